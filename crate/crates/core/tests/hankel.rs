use std::sync::Arc;

use invsq::hankel::{
    diagonalization_defect, involution_defect, isometry_defect, make_plan, self_adjointness_defect,
    HankelPair,
};
use invsq::operator::{make_context, HarmonicContext};
use invsq::profiles::{gaussian_poly, sector_gaussian, standard_bump};
use invsq::radial::{make_grid, RadialGrid, SectorField, Side};

fn grid(n: usize, lo: f64, hi: f64, len: usize) -> Arc<RadialGrid> {
    Arc::new(make_grid(n, lo, hi, len).unwrap())
}

fn field(ctx: HarmonicContext, g: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> SectorField {
    SectorField::from_real(ctx, g.clone(), Side::Physical, f).unwrap()
}

/// Physical and spectral grids for data supported in `[1, 2]`.
fn annulus_pair(ctx: HarmonicContext, len: usize) -> HankelPair {
    let phys = grid(ctx.n(), 1e-3, 4.0, len);
    let spec = grid(ctx.n(), 1e-3, 120.0, len);
    HankelPair::quadrature(ctx, phys, spec).unwrap()
}

#[test]
fn gaussian_is_a_fixed_point() {
    for (n, a, l) in [(3, 0.0, 0), (3, 1.0, 0), (4, 0.5, 1), (2, 1.0, 1)] {
        let ctx = make_context(n, a, l).unwrap();
        let g = grid(n, 1e-3, 50.0, 1024);
        let pair = HankelPair::symmetric(ctx, g.clone()).unwrap();
        let prof = |r: f64| sector_gaussian(r, ctx.nu(), ctx.lambda(), 1.0);
        let f = field(ctx, &g, prof);
        let hf = pair.to_spectral(&f).unwrap();
        let expect = SectorField::from_real(ctx, g.clone(), Side::Spectral, prof).unwrap();
        let err = hf.rel_distance(&expect).unwrap();
        let inv = involution_defect(&pair, &f).unwrap();
        println!("({n},{a},{l}) forward {err:.2e} involution {inv:.2e}");
        assert!(err < 1e-6);
        assert!(inv < 1e-6);
    }
}

#[test]
fn gaussian_isometry_and_refinement() {
    let ctx = make_context(3, 1.0, 0).unwrap();
    let mut prev = f64::INFINITY;
    for len in [256, 512, 1024] {
        let g = grid(3, 1e-3, 50.0, len);
        let plan = make_plan(ctx, g.clone(), g.clone()).unwrap();
        let f = field(ctx, &g, |r| {
            gaussian_poly(r, ctx.nu(), ctx.lambda(), &[1.0, -0.5, 0.1])
        });
        let d = isometry_defect(&plan, &f).unwrap();
        println!("N={len} isometry {d:.2e}");
        assert!(d <= 0.5 * prev || d < 1e-12);
        prev = d;
    }
    assert!(prev < 1e-6);
}

#[test]
fn annulus_isometry_is_spectrally_small() {
    for (n, a, l) in [(3, 1.0, 0), (4, 0.0, 2)] {
        let ctx = make_context(n, a, l).unwrap();
        let pair = annulus_pair(ctx, 1024);
        let f = field(ctx, pair.physical(), standard_bump);
        let d = isometry_defect(pair.forward(), &f).unwrap();
        let inv = involution_defect(&pair, &f).unwrap();
        println!("({n},{a},{l}) annulus isometry {d:.2e} involution {inv:.2e}");
        assert!(d < 1e-8);
        assert!(inv < 1e-4);
    }
}

#[test]
fn self_adjointness_on_a_shared_grid() {
    let ctx = make_context(3, 1.0, 0).unwrap();
    let g = grid(3, 1e-3, 50.0, 1024);
    let plan = make_plan(ctx, g.clone(), g.clone()).unwrap();
    let f = field(ctx, &g, standard_bump);
    let h = field(ctx, &g, |r| {
        gaussian_poly(r, ctx.nu(), ctx.lambda(), &[1.0, 0.3])
    });
    let d = self_adjointness_defect(&plan, &f, &h).unwrap();
    assert!(d < 1e-12, "{d:.2e}");
    // M[i][j] / w_j is symmetric on a shared grid.
    let w = g.weights();
    let m = plan.matrix();
    for (i, j) in [(3, 700), (100, 900), (512, 513)] {
        let a = m.get(i, j) / w[j];
        let b = m.get(j, i) / w[i];
        assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-300));
    }
}

#[test]
fn half_integer_entries_match_sine_kernel() {
    let ctx = make_context(3, 0.0, 0).unwrap();
    let g = grid(3, 1e-2, 30.0, 64);
    let plan = make_plan(ctx, g.clone(), g.clone()).unwrap();
    let (r, w) = (g.nodes(), g.weights());
    for i in (0..64).step_by(7) {
        for j in (0..64).step_by(5) {
            let x = r[i] * r[j];
            let expect = (2.0 / std::f64::consts::PI).sqrt() * x.sin() / x * w[j];
            let got = plan.matrix().get(i, j);
            let tol = 1e-10 * expect.abs().max(1e-3 * w[j]);
            assert!((got - expect).abs() <= tol, "({i},{j}) x={x}");
        }
    }
}

#[test]
fn diagonalization_converges() {
    for (n, a, l) in [(3, 1.0, 0), (2, 1.0, 1)] {
        let ctx = make_context(n, a, l).unwrap();
        let mut prev = f64::INFINITY;
        for len in [1024, 2048] {
            let pair = annulus_pair(ctx, len);
            let f = field(ctx, pair.physical(), standard_bump);
            let d = diagonalization_defect(pair.forward(), &f, 4).unwrap();
            println!("({n},{a},{l}) N={len} diagonalization {d:.2e}");
            assert!(d < 1e-4);
            assert!(d <= 0.5 * prev);
            prev = d;
        }
    }
}

#[test]
fn mismatched_field_is_rejected() {
    let ctx = make_context(3, 0.0, 0).unwrap();
    let g = grid(3, 1e-2, 10.0, 32);
    let other = grid(3, 1e-2, 11.0, 32);
    let plan = make_plan(ctx, g, other.clone()).unwrap();
    let f = field(ctx, &other, |r| r);
    assert!(plan.apply(&f).is_err());
    let zero = field(ctx, plan.grid_in(), |_| 0.0);
    assert!(isometry_defect(&plan, &zero).is_err());
}
