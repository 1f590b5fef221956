use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use invsq::hankel::HankelPair;
use invsq::operator::{
    apply_a, apply_frac_power, apply_frac_power_kernel, conjugation_apply, conjugation_kernel,
    diagonal_kernel, fd_apply_a, frac_kernel, frac_kernel_near, make_context, HarmonicContext,
    KernelSpec,
};
use invsq::profiles::{annulus_bump, chi, gaussian_poly, sector_gaussian, standard_bump};
use invsq::quad::GaussRule;
use invsq::radial::{make_grid, RadialGrid, SectorField, Side};

fn field(ctx: HarmonicContext, g: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> SectorField {
    SectorField::from_real(ctx, g.clone(), Side::Physical, f).unwrap()
}

/// Log-periodic pair wide enough for data supported near `[1, 2]`.
fn periodic_pair(ctx: HarmonicContext, len: usize) -> HankelPair {
    let phys = Arc::new(RadialGrid::periodic_span(ctx.n(), 1e-3, 1e2, len).unwrap());
    let spec =
        Arc::new(RadialGrid::periodic(ctx.n(), (1e-2f64).ln(), phys.spacing(), len).unwrap());
    HankelPair::log_periodic(ctx, phys, spec).unwrap()
}

/// Quadrature pair for data supported in `[1, 2]`.
fn annulus_pair(ctx: HarmonicContext, len: usize) -> HankelPair {
    let phys = Arc::new(make_grid(ctx.n(), 1e-3, 4.0, len).unwrap());
    let spec = Arc::new(make_grid(ctx.n(), 1e-3, 120.0, len).unwrap());
    HankelPair::quadrature(ctx, phys, spec).unwrap()
}

/// `∫ k(r, s) φ(s) s^{n−1} ds` for `φ` supported in `[a, b]`, by composite Gauss–Legendre.
fn kernel_against_bump(
    k: impl Fn(f64) -> f64,
    phi: impl Fn(f64) -> f64,
    n: usize,
    a: f64,
    b: f64,
) -> f64 {
    let rule = GaussRule::new(32);
    let pieces = 16;
    let step = (b - a) / pieces as f64;
    (0..pieces)
        .map(|p| {
            let lo = a + p as f64 * step;
            rule.integrate(lo, lo + step, |s| k(s) * phi(s) * s.powi(n as i32 - 1))
        })
        .sum()
}

fn max_rel_on(x: &SectorField, expect: impl Fn(f64) -> f64, keep: impl Fn(f64) -> bool) -> f64 {
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for (r, v) in x.grid().nodes().iter().zip(x.values()) {
        if keep(*r) {
            let e = expect(*r);
            num = num.max((v.re - e).abs());
            den = den.max(e.abs());
        }
    }
    num / den
}

#[test]
fn spherical_wave_is_an_eigenfunction() {
    let ctx = make_context(3, 0.0, 0).unwrap();
    let k = 3.0;
    let cut = 6.0;
    let prof = |r: f64| (k * r).sin() / r * chi(r / cut);
    let phys = Arc::new(make_grid(3, 1e-3, 2.0 * cut, 1024).unwrap());
    let spec = Arc::new(make_grid(3, 1e-3, 20.0, 1024).unwrap());
    let pair = HankelPair::quadrature(ctx, phys.clone(), spec).unwrap();
    let f = field(ctx, &phys, prof);
    let af = apply_a(&pair, &f).unwrap();
    let err = max_rel_on(&af, |r| k * k * prof(r), |r| (0.05..cut).contains(&r));
    println!("spherical wave {err:.2e}");
    assert!(err < 1e-4);

    let zero = field(ctx, &phys, |_| 0.0);
    assert!(apply_a(&pair, &zero).unwrap().norm() == 0.0);
}

#[test]
fn apply_a_is_linear() {
    let ctx = make_context(3, 1.0, 0).unwrap();
    let pair = annulus_pair(ctx, 512);
    let f = field(ctx, pair.physical(), standard_bump);
    let g = field(ctx, pair.physical(), |r| {
        annulus_bump(r, 1.2, 1.9, 0.3, 1.0)
    });
    let lhs = apply_a(&pair, &f.add(&g).unwrap()).unwrap();
    let rhs = apply_a(&pair, &f)
        .unwrap()
        .add(&apply_a(&pair, &g).unwrap())
        .unwrap();
    assert!(lhs.rel_distance(&rhs).unwrap() < 1e-13);
}

#[test]
fn spectral_and_finite_difference_routes_agree() {
    for (n, a, l) in [(3, 1.0, 0), (2, 1.0, 1), (4, 0.0, 0)] {
        let ctx = make_context(n, a, l).unwrap();
        let g = Arc::new(make_grid(n, 1e-3, 50.0, 1024).unwrap());
        let pair = HankelPair::symmetric(ctx, g.clone()).unwrap();
        let f = field(ctx, &g, |r| {
            gaussian_poly(r, ctx.nu(), ctx.lambda(), &[1.0, -0.5, 0.1])
        });
        let spectral = apply_a(&pair, &f).unwrap();
        let fd = fd_apply_a(&ctx, &f, 8).unwrap();
        let mask = g.interior(8);
        let d = spectral.sub(&fd).unwrap().masked_norm(&mask) / fd.masked_norm(&mask);
        println!("({n},{a},{l}) gaussian spectral vs fd {d:.2e}");
        assert!(d < 1e-5);
    }
    let ctx = make_context(3, 1.0, 0).unwrap();
    let pair = annulus_pair(ctx, 1024);
    let f = field(ctx, pair.physical(), standard_bump);
    let d = apply_a(&pair, &f)
        .unwrap()
        .rel_distance(&fd_apply_a(&ctx, &f, 8).unwrap())
        .unwrap();
    println!("annulus spectral vs fd {d:.2e}");
    assert!(d < 1e-4);
}

#[test]
fn trivial_powers() {
    let ctx = make_context(4, 0.5, 1).unwrap();
    let pair = annulus_pair(ctx, 512);
    let f = field(ctx, pair.physical(), standard_bump);
    let id = apply_frac_power(&pair, &f, 0.0).unwrap();
    assert_eq!(id.values(), f.values());
    let two = apply_frac_power(&pair, &f, 2.0).unwrap();
    assert!(two.rel_distance(&apply_a(&pair, &f).unwrap()).unwrap() < 1e-8);
}

#[test]
fn smoothing_exponents_compose() {
    let alpha = 0.25;
    let s = -0.5 - 2.0 * alpha;
    for (n, a, l) in [(3, 1.0, 0), (3, 0.0, 0), (2, 1.0, 1)] {
        let ctx = make_context(n, a, l).unwrap();
        let pair = periodic_pair(ctx, 1025);
        let f = field(ctx, pair.physical(), standard_bump);
        let twice = apply_frac_power(&pair, &apply_frac_power(&pair, &f, s).unwrap(), s).unwrap();
        let once = apply_frac_power(&pair, &f, -1.0 - 4.0 * alpha).unwrap();
        let d = twice.rel_distance(&once).unwrap();
        println!("({n},{a},{l}) composition {d:.2e}");
        assert!(d < 1e-8);
    }
}

#[test]
fn kernel_matches_transform_route() {
    // A narrow bump at s = 1 stands in for a point mass; the oracle integrates the
    // closed-form kernel against the same bump.
    let ctx = make_context(3, 1.0, 0).unwrap();
    let spec = KernelSpec::new(ctx, -1.0);
    let (a, b) = (0.95, 1.05);
    let bump = |s: f64| annulus_bump(s, a, b, 0.3, 1.0);
    let pair = periodic_pair(ctx, 2049);
    let f = field(ctx, pair.physical(), bump);
    let out = apply_frac_power(&pair, &f, -1.0).unwrap();
    let expect = |r: f64| kernel_against_bump(|s| frac_kernel(&spec, r, s).unwrap(), bump, 3, a, b);
    let err = max_rel_on(&out, expect, |r| (1.9..2.1).contains(&r));
    println!("k^-1 element near (2,1): {err:.2e}");
    assert!(err < 1e-4);
}

#[test]
fn kernel_route_cross_checks_sandwich() {
    let ctx = make_context(3, 1.0, 0).unwrap();
    for sigma in [-0.5, -1.0, -1.5] {
        let mut prev = f64::INFINITY;
        for len in [512, 1024, 2048] {
            let g = Arc::new(make_grid(3, 1e-3, 50.0, len).unwrap());
            let pair = HankelPair::symmetric(ctx, g.clone()).unwrap();
            let f = field(ctx, &g, |r| sector_gaussian(r, ctx.nu(), ctx.lambda(), 1.0));
            let sandwich = apply_frac_power(&pair, &f, sigma).unwrap();
            let kernel = apply_frac_power_kernel(&ctx, &f, sigma).unwrap();
            let mask = g
                .nodes()
                .iter()
                .map(|&r| (0.01..10.0).contains(&r))
                .collect::<Vec<_>>();
            let d = kernel.sub(&sandwich).unwrap().masked_norm(&mask) / sandwich.masked_norm(&mask);
            println!("sigma {sigma} N={len}: kernel vs sandwich {d:.2e}");
            if len == 1024 {
                assert!(d < 1e-3);
            }
            assert!(d < 0.6 * prev);
            prev = d;
        }
    }
}

/// `∫ k^{σ/2}(ω, s)² s^{n−1} ds` by graded Gauss–Legendre in `v = ln(s/ω)`.
fn composition_oracle(ctx: HarmonicContext, sigma: f64, omega: f64) -> f64 {
    let half = KernelSpec::new(ctx, sigma / 2.0);
    let n = ctx.n() as i32;
    let rule = GaussRule::new(24);
    let integrand = |v: f64| {
        let s = omega * v.exp();
        frac_kernel_near(&half, omega, s).unwrap().powi(2) * s.powi(n)
    };
    let mut total = 0.0;
    for sign in [1.0, -1.0] {
        total += rule.integrate_graded(1.0, 40, |v| integrand(sign * v));
        let mut lo = 1.0;
        while lo < 40.0 {
            let hi = lo * 1.5;
            total += rule.integrate(lo, hi, |v| integrand(sign * v));
            lo = hi;
        }
    }
    total
}

#[test]
fn diagonal_kernel_matches_composition_integral() {
    for (n, a, l, alpha) in [(3, 1.0, 0, 0.25), (3, 1.0, 0, 0.15), (4, 0.0, 1, 0.2)] {
        let ctx = make_context(n, a, l).unwrap();
        let sigma = -1.0 - 4.0 * alpha;
        let spec = KernelSpec::new(ctx, sigma);
        let direct = diagonal_kernel(&spec, 1.3).unwrap();
        let oracle = composition_oracle(ctx, sigma, 1.3);
        let rel = ((direct - oracle) / oracle).abs();
        println!("({n},{a},{l}) alpha={alpha}: diag {direct:.8} oracle {oracle:.8} rel {rel:.1e}");
        assert!(rel < 1e-3);
        // Homogeneity makes the scaled diagonal value independent of ω.
        let scaled = |w: f64| {
            diagonal_kernel(&spec, w).unwrap() * w.powf(2.0 * ctx.lambda() + 1.0 - 4.0 * alpha)
        };
        let c0 = scaled(0.5);
        for w in [0.7, 1.0, 2.0, 3.3, 4.0] {
            assert!(((scaled(w) - c0) / c0).abs() < 1e-6);
        }
        assert!(
            ((diagonal_kernel(&spec, 2.6).unwrap() / direct) - 2f64.powf(spec.degree())).abs()
                < 1e-13
        );
    }
}

#[test]
fn conjugation_reduces_to_involution() {
    let ctx = make_context(3, 1.0, 0).unwrap();
    let pair = annulus_pair(ctx, 1024);
    let f = field(ctx, pair.physical(), standard_bump);
    let k = conjugation_apply(&pair, &pair, &f).unwrap();
    let d = k.rel_distance(&f).unwrap();
    let inv = invsq::hankel::involution_defect(&pair, &f).unwrap();
    assert!((d - inv).abs() < 1e-15);
}

#[test]
fn conjugation_intertwines() {
    let from = make_context(3, 1.0, 0).unwrap();
    let to = from.free().unwrap();
    let mut prev = f64::INFINITY;
    for len in [1024, 2048] {
        let nu_pair = annulus_pair(from, len);
        let mu_pair = annulus_pair(to, len);
        let f = field(from, nu_pair.physical(), standard_bump);
        let kf = conjugation_apply(&nu_pair, &mu_pair, &f).unwrap();
        let lhs = fd_apply_a(&to, &kf, 8).unwrap();
        let af = fd_apply_a(&from, &f, 8).unwrap();
        let rhs = conjugation_apply(&nu_pair, &mu_pair, &af).unwrap();
        // K⁰f is cut off at the outer end of the grid; stencils there are dropped.
        let mask = nu_pair.physical().interior(16);
        let d = lhs.sub(&rhs).unwrap().masked_norm(&mask) / af.norm();
        println!("N={len} intertwining {d:.2e}");
        if len == 1024 {
            assert!(d < 1e-5);
        } else {
            assert!(d <= 0.5 * prev || d < 1e-10);
        }
        prev = d;
    }
}

#[test]
fn conjugation_matches_closed_form_kernel() {
    let from = make_context(3, 1.0, 0).unwrap();
    let to = from.free().unwrap();
    let (a, b) = (0.95, 1.05);
    let bump = |s: f64| annulus_bump(s, a, b, 0.3, 1.0);
    let nu_pair = periodic_pair(from, 2049);
    let mu_pair = periodic_pair(to, 2049);
    let f = field(from, nu_pair.physical(), bump);
    let out = conjugation_apply(&nu_pair, &mu_pair, &f).unwrap();
    let expect_far = |r: f64| {
        kernel_against_bump(
            |s| conjugation_kernel(&from, &to, r, s).unwrap(),
            bump,
            3,
            a,
            b,
        )
    };
    let far = max_rel_on(&out, expect_far, |r| (2.0..3.0).contains(&r));
    let near = max_rel_on(&out, expect_far, |r| (0.3..0.5).contains(&r));
    println!("K0 elements: outer {far:.2e} inner {near:.2e}");
    assert!(far < 1e-4);
    assert!(near < 1e-4);
}

#[test]
fn conjugation_kernel_elementary_case() {
    // μ = 1/2, ν = 3/2 in three dimensions: both Bessel functions are elementary and
    // the kernel is (2/π)(rs)^{−1}[ln((r+s)/|r−s|)/(2s) − r/(r²−s²)].
    let from = make_context(3, 2.0, 0).unwrap();
    let to = make_context(3, 0.0, 0).unwrap();
    let exact = [
        (2.0, 1.0, -0.037_357_014_51),
        (3.0, 1.0, -0.006_032_271_495),
        (0.5, 1.0, 1.548_224_668),
        (0.25, 1.0, 1.329_464_475),
    ];
    for (r, s, v) in exact {
        let k = conjugation_kernel(&from, &to, r, s).unwrap();
        assert!(((k - v) / v).abs() < 1e-9, "({r},{s}): {k}");
    }
    let same = make_context(3, 1.0, 0).unwrap();
    assert_eq!(conjugation_kernel(&same, &same, 2.0, 1.0).unwrap(), 0.0);
}

#[test]
fn conjugation_rejects_mismatched_grids() {
    let from = make_context(3, 1.0, 0).unwrap();
    let to = from.free().unwrap();
    let p1 = annulus_pair(from, 256);
    let p2 = annulus_pair(to, 512);
    let f = field(from, p1.physical(), standard_bump);
    assert!(conjugation_apply(&p1, &p2, &f).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn kernel_is_symmetric(r in 0.05f64..20.0, ratio in 1.2f64..30.0, sigma in -3.0f64..-0.1, a in 0.0f64..3.0) {
        let spec = KernelSpec::new(make_context(3, a, 0).unwrap(), sigma);
        let s = r * ratio;
        let k1 = frac_kernel(&spec, r, s).unwrap();
        let k2 = frac_kernel(&spec, s, r).unwrap();
        prop_assert!((k1 - k2).abs() <= 1e-15 * k1.abs());
    }

    #[test]
    fn kernel_is_homogeneous(r in 0.05f64..20.0, ratio in 1.2f64..30.0, sigma in -3.0f64..-0.1, n in 2usize..6, l in 1usize..4) {
        let spec = KernelSpec::new(make_context(n, 0.3, l).unwrap(), sigma);
        let s = r / ratio;
        let k1 = frac_kernel(&spec, r, s).unwrap();
        let k2 = frac_kernel(&spec, 2.0 * r, 2.0 * s).unwrap();
        prop_assert!((k2 / k1 - 2f64.powf(spec.degree())).abs() < 1e-13);
    }

    #[test]
    fn powers_compose(s1 in -1.5f64..2.0, s2 in -1.5f64..2.0) {
        let ctx = make_context(3, 1.0, 0).unwrap();
        let pair = periodic_pair(ctx, 1025);
        let f = field(ctx, pair.physical(), standard_bump);
        let twice = apply_frac_power(&pair, &apply_frac_power(&pair, &f, s1).unwrap(), s2).unwrap();
        let once = apply_frac_power(&pair, &f, s1 + s2).unwrap();
        prop_assert!(twice.rel_distance(&once).unwrap() < 1e-7);
    }
}

#[test]
fn complex_data_is_handled_componentwise() {
    let ctx = make_context(3, 1.0, 0).unwrap();
    let pair = annulus_pair(ctx, 256);
    let re = field(ctx, pair.physical(), standard_bump);
    let z = re.scale(Complex64::new(0.6, -0.8));
    let az = apply_a(&pair, &z).unwrap();
    let ar = apply_a(&pair, &re)
        .unwrap()
        .scale(Complex64::new(0.6, -0.8));
    assert!(az.rel_distance(&ar).unwrap() < 1e-14);
}
