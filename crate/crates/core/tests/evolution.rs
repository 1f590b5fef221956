use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use invsq::evolution::{
    decay_curve, h_plus_minus, kato_jensen_experiment, pseudo_conformal_apply, schrodinger_evolve,
    schrodinger_evolve_many, sinc_propagator, wave_energy, wave_evolve, wave_velocity,
    write_snapshots, TimeGrid, WaveDataPair,
};
use invsq::hankel::{involution_defect, HankelPair};
use invsq::operator::{apply_frac_power, make_context, HarmonicContext};
use invsq::profiles::{annulus_bump, gaussian, sector_gaussian, standard_bump};
use invsq::radial::{apply_weight, make_grid, weighted_l2_norm, RadialGrid, SectorField, Side};
use invsq::Error;

fn field(pair: &HankelPair, f: impl Fn(f64) -> f64) -> SectorField {
    SectorField::from_real(*pair.context(), pair.physical().clone(), Side::Physical, f).unwrap()
}

fn quadrature_pair(
    ctx: HarmonicContext,
    phys: (f64, f64, usize),
    spec: (f64, f64, usize),
) -> HankelPair {
    let p = Arc::new(make_grid(ctx.n(), phys.0, phys.1, phys.2).unwrap());
    let s = Arc::new(make_grid(ctx.n(), spec.0, spec.1, spec.2).unwrap());
    HankelPair::quadrature(ctx, p, s).unwrap()
}

fn periodic_pair(ctx: HarmonicContext, len: usize) -> HankelPair {
    let phys = Arc::new(RadialGrid::periodic_span(ctx.n(), 1e-3, 1e2, len).unwrap());
    let spec =
        Arc::new(RadialGrid::periodic(ctx.n(), (1e-2f64).ln(), phys.spacing(), len).unwrap());
    HankelPair::log_periodic(ctx, phys, spec).unwrap()
}

fn modulus(u: &SectorField) -> SectorField {
    u.with_values(
        u.values()
            .iter()
            .map(|v| Complex64::new(v.norm(), 0.0))
            .collect(),
    )
}

#[test]
fn time_zero_is_the_round_trip() {
    let ctx = make_context(3, 1.0, 0).unwrap();
    let pair = quadrature_pair(ctx, (1e-3, 50.0, 1024), (1e-3, 50.0, 1024));
    let f = field(&pair, |r| sector_gaussian(r, ctx.nu(), ctx.lambda(), 1.0));
    let u = schrodinger_evolve(&pair, &f, 0.0).unwrap();
    let inv = involution_defect(&pair, &f).unwrap();
    assert!((u.rel_distance(&f).unwrap() - inv).abs() < 1e-15, "{inv:e}");
}

#[test]
fn free_gaussian_matches_closed_form() {
    // With the multiplier e^{−itρ²}, |u| = (1+4t²)^{−3/4} e^{−r²/(2(1+4t²))}.
    let ctx = make_context(3, 0.0, 0).unwrap();
    let pair = quadrature_pair(ctx, (1e-3, 50.0, 1024), (1e-3, 50.0, 1024));
    let f = field(&pair, |r| gaussian(r, 1.0));
    let t: f64 = 2.0;
    let m: f64 = 1.0 + 4.0 * t * t;
    let exact = field(&pair, |r| m.powf(-0.75) * (-r * r / (2.0 * m)).exp());
    let err = modulus(&schrodinger_evolve(&pair, &f, t).unwrap())
        .rel_distance(&exact)
        .unwrap();
    assert!(err < 1e-4, "{err:e}");
}

#[test]
fn mass_is_conserved() {
    let ctx = make_context(3, 1.0, 0).unwrap();
    let pair = quadrature_pair(ctx, (1e-3, 200.0, 2048), (1e-3, 8.0, 2048));
    let f = field(&pair, |r| sector_gaussian(r, ctx.nu(), ctx.lambda(), 1.0));
    let times = TimeGrid::linear(0.0, 10.0, 21).unwrap();
    let us = schrodinger_evolve_many(&pair, &f, times.times()).unwrap();
    for (t, u) in times.times().iter().zip(&us) {
        let drift = (u.norm() / f.norm() - 1.0).abs();
        assert!(drift < 1e-6, "t={t}: {drift:e}");
    }
}

#[test]
fn group_property_and_time_reversal() {
    for ctx in [
        make_context(3, 1.0, 0).unwrap(),
        make_context(5, 1.0, 1).unwrap(),
    ] {
        let pair = periodic_pair(ctx, 1025);
        let f = field(&pair, standard_bump);
        let a = schrodinger_evolve(&pair, &f, 0.7).unwrap();
        let ab = schrodinger_evolve(&pair, &a, 1.1).unwrap();
        let direct = schrodinger_evolve(&pair, &f, 1.8).unwrap();
        assert!(ab.rel_distance(&direct).unwrap() < 1e-8);
        let back = schrodinger_evolve(&pair, &a, -0.7).unwrap();
        assert!(back.rel_distance(&f).unwrap() < 1e-8);
    }
}

fn wave_data(pair: &HankelPair, with_velocity: bool) -> WaveDataPair {
    let f = field(pair, standard_bump);
    let g = if with_velocity {
        field(pair, |r| annulus_bump(r, 1.0, 2.0, 0.3, 0.1))
    } else {
        f.scale(Complex64::new(0.0, 0.0))
    };
    WaveDataPair::new(f, g).unwrap()
}

#[test]
fn wave_starts_from_its_data() {
    let ctx = make_context(3, 1.0, 0).unwrap();
    let pair = periodic_pair(ctx, 1025);
    let data = wave_data(&pair, true);
    let u0 = wave_evolve(&pair, &data, 0.0).unwrap();
    assert!(u0.rel_distance(data.position()).unwrap() < 1e-12);
    let mut prev = f64::INFINITY;
    for h in [1e-2, 5e-3, 2.5e-3] {
        let up = wave_evolve(&pair, &data, h).unwrap();
        let um = wave_evolve(&pair, &data, -h).unwrap();
        let diff = up.sub(&um).unwrap().scale(Complex64::new(0.5 / h, 0.0));
        let err = diff.rel_distance(data.velocity()).unwrap();
        assert!(err < 0.6 * prev, "h={h}: {err:e} after {prev:e}");
        prev = err;
    }
    assert!(prev < 1e-3, "{prev:e}");
}

#[test]
fn wave_energy_is_conserved() {
    for ctx in [
        make_context(3, 1.0, 0).unwrap(),
        make_context(4, 0.0, 1).unwrap(),
    ] {
        let pair = periodic_pair(ctx, 1025);
        let data = wave_data(&pair, true);
        let energy = |t: f64| {
            let u = wave_evolve(&pair, &data, t).unwrap();
            let ut = wave_velocity(&pair, &data, t).unwrap();
            wave_energy(&pair, &u, &ut).unwrap()
        };
        let e0 = energy(0.0);
        for t in [0.5, 1.0, 2.5, 5.0, 7.5, 10.0] {
            let drift = (energy(t) / e0 - 1.0).abs();
            assert!(drift < 1e-6, "t={t}: {drift:e}");
        }
    }
}

#[test]
fn cosine_propagator_is_even_without_velocity() {
    let ctx = make_context(3, 1.0, 0).unwrap();
    let pair = periodic_pair(ctx, 1025);
    let data = wave_data(&pair, false);
    let plus = wave_evolve(&pair, &data, 1.5).unwrap();
    let minus = wave_evolve(&pair, &data, -1.5).unwrap();
    assert!(plus.rel_distance(&minus).unwrap() < 1e-14);
}

#[test]
fn sinc_series_joins_the_closed_form() {
    for (t, rho) in [
        (1.0f64, 0.999e-4f64),
        (1.0, 1.001e-4),
        (2.0, 1e-9),
        (-3.0, 2e-5),
    ] {
        let closed = (t * rho).sin() / rho;
        assert!((sinc_propagator(t, rho) - closed).abs() <= 1e-15 * closed.abs().max(1.0));
    }
    assert_eq!(sinc_propagator(2.0, 0.0), 2.0);
}

#[test]
fn h_plus_minus_special_cases() {
    let ctx = make_context(3, 1.0, 0).unwrap();
    let pair = periodic_pair(ctx, 1025);
    let (hp, hm) = h_plus_minus(&pair, &wave_data(&pair, false)).unwrap();
    assert!(hp.rel_distance(&hm).unwrap() < 1e-15);

    let g = field(&pair, standard_bump);
    let data = WaveDataPair::new(g.scale(Complex64::new(0.0, 0.0)), g.clone()).unwrap();
    let (hp, hm) = h_plus_minus(&pair, &data).unwrap();
    assert!(hp.add(&hm).unwrap().norm() <= 1e-15 * hp.norm());
    let lhs = hp.norm().powi(2) + hm.norm().powi(2);
    let rhs = 0.5 * apply_frac_power(&pair, &g, -0.5).unwrap().norm().powi(2);
    assert!((lhs / rhs - 1.0).abs() < 1e-8, "{lhs} {rhs}");
}

fn kj_pair(ctx: HarmonicContext, k: usize) -> HankelPair {
    quadrature_pair(ctx, (1e-2, 600.0, 600 * k), (1e-4, 4.0, 2400 * k))
}

#[test]
fn pseudo_conformal_at_time_zero() {
    let ctx = make_context(5, 1.0, 0).unwrap();
    let pair = quadrature_pair(ctx, (1e-3, 100.0, 512), (1e-4, 6.0, 512));
    let f = field(&pair, |r| sector_gaussian(r, ctx.nu(), ctx.lambda(), 2.0));
    let c = pseudo_conformal_apply(&pair, &f, 0.0).unwrap();
    let quarter = apply_weight(&f, 2.0).scale(Complex64::new(0.25, 0.0));
    assert!(c.rel_distance(&quarter).unwrap() < 1e-15);
    assert!((c.norm() - 0.25 * weighted_l2_norm(&f, 2.0)).abs() <= 1e-15 * c.norm());
}

#[test]
fn pseudo_conformal_norm_is_conserved() {
    for (a, tol) in [(1.0, 1e-4), (0.0, 1e-4), (-2.0, 1e-4)] {
        let ctx = make_context(5, a, 0).unwrap();
        let pair = quadrature_pair(ctx, (1e-3, 100.0, 1024), (1e-4, 6.0, 1024));
        let f = field(&pair, |r| sector_gaussian(r, ctx.nu(), ctx.lambda(), 2.0));
        let mask = pair.physical().interior(8);
        let c0 = pseudo_conformal_apply(&pair, &f, 0.0)
            .unwrap()
            .masked_norm(&mask);
        for t in [0.5, 1.0, 2.0, 3.0, 4.0, 5.0] {
            let u = schrodinger_evolve(&pair, &f, t).unwrap();
            let c = pseudo_conformal_apply(&pair, &u, t)
                .unwrap()
                .masked_norm(&mask);
            let drift = (c / c0 - 1.0).abs();
            assert!(drift < tol, "a={a} t={t}: {drift:e}");
        }
    }
}

#[test]
fn kato_jensen_decay() {
    let ctx = make_context(5, 1.0, 0).unwrap();
    let pairs = [kj_pair(ctx, 1), kj_pair(ctx, 2)];
    let profile = move |r: f64| sector_gaussian(r, ctx.nu(), ctx.lambda(), 2.0);
    let times = TimeGrid::geometric(10.0, 100.0, 11).unwrap();
    let report = kato_jensen_experiment(&pairs, &profile, &times).unwrap();
    assert!(
        (report.computed + 2.0).abs() < 0.05,
        "slope {}",
        report.computed
    );
    assert!(
        report.convergence.deltas[0] < 0.05,
        "{:?}",
        report.convergence
    );
    assert!(report.pass);
    assert!(report.diagnostics["sup_ratio"].is_finite());
}

#[test]
fn kato_jensen_weight_is_continuous_at_zero() {
    let ctx = make_context(5, 1.0, 0).unwrap();
    let pair = kj_pair(ctx, 1);
    let f = field(&pair, |r| sector_gaussian(r, ctx.nu(), ctx.lambda(), 2.0));
    let w0 = apply_weight(&f, -2.0).norm();
    let times = TimeGrid::new(vec![1e-4, 1e-3, 1e-2]).unwrap();
    let curve = decay_curve(&pair, &f, &times).unwrap();
    let gaps: Vec<f64> = curve
        .weighted
        .iter()
        .map(|w| (w / w0 - 1.0).abs())
        .collect();
    assert!(
        gaps[0] < 1e-4 && gaps[0] <= gaps[1] && gaps[1] <= gaps[2],
        "{gaps:?}"
    );
}

#[test]
fn kato_jensen_rejects_bad_input() {
    let ctx3 = make_context(3, 1.0, 0).unwrap();
    let times = TimeGrid::geometric(10.0, 100.0, 11).unwrap();
    let p3 = quadrature_pair(ctx3, (1e-2, 10.0, 64), (1e-2, 10.0, 64));
    let f3 = field(&p3, |r| gaussian(r, 1.0));
    assert!(matches!(
        decay_curve(&p3, &f3, &times),
        Err(Error::Config(_))
    ));

    let ctx5 = make_context(5, 1.0, 0).unwrap();
    let p5 = quadrature_pair(ctx5, (1e-2, 800.0, 64), (1e-2, 10.0, 64));
    let wild = field(&p5, |r| r.exp());
    assert!(matches!(
        decay_curve(&p5, &wild, &times),
        Err(Error::Config(_))
    ));
}

#[test]
fn snapshots_are_written_per_node() {
    let ctx = make_context(3, 0.0, 0).unwrap();
    let pair = quadrature_pair(ctx, (1e-2, 10.0, 32), (1e-2, 10.0, 32));
    let f = field(&pair, |r| gaussian(r, 1.0));
    let snaps: Vec<(f64, SectorField)> = [0.0, 1.0]
        .iter()
        .map(|&t| (t, schrodinger_evolve(&pair, &f, t).unwrap()))
        .collect();
    let mut buf = Vec::new();
    write_snapshots(&mut buf, &snaps).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,r,re,im,abs");
    assert_eq!(lines.len(), 1 + 2 * 32);
    let first: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert_eq!(first[1], pair.physical().nodes()[0]);
}

#[test]
fn time_grids_validate() {
    assert!(TimeGrid::new(vec![0.0]).is_err());
    assert!(TimeGrid::new(vec![0.0, 1.0, 1.0]).is_err());
    assert!(TimeGrid::new(vec![0.0, f64::NAN]).is_err());
    assert!(TimeGrid::hybrid(2.0, 10, 1.0, 10).is_err());
    assert!(TimeGrid::geometric(0.0, 1.0, 4).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn trapezoid_weights_are_positive_and_exact_on_lines(
        t_switch in 0.1f64..5.0, n_lin in 1usize..40, factor in 1.5f64..100.0, n_geo in 1usize..40,
        slope in -3.0f64..3.0,
    ) {
        let g = TimeGrid::hybrid(t_switch, n_lin, t_switch * factor, n_geo).unwrap();
        prop_assert!(g.weights().iter().all(|w| *w > 0.0));
        let t_max = g.t_max();
        let line: Vec<f64> = g.times().iter().map(|t| 1.0 + slope * t).collect();
        let exact = t_max + slope * t_max * t_max / 2.0;
        prop_assert!((g.integrate(&line) - exact).abs() <= 1e-11 * (1.0 + exact.abs()));
    }
}
