#![allow(clippy::excessive_precision)]

use invsq::specfun::*;
use proptest::prelude::*;

// Reference values computed offline at 40 significant digits.
const LOG_GAMMA: [(f64, f64); 18] = [
    (0.001, 6.9071788853838536617),
    (0.01, 4.5994798780420217016),
    (0.1, 2.252712651734205902),
    (0.3, 1.0957979948180755606),
    (0.7, 0.26086724653166656857),
    (0.999, 0.00057803853289138023817),
    (1.001, -0.00057639359828330615152),
    (1.3, -0.10817480950786047846),
    (1.9999, -0.000042275208772153458011),
    (2.0001, 0.000042281658112919946317),
    (2.6, 0.35741186354897983677),
    (3.7, 1.4280723266653881292),
    (7.25, 7.0521854507385394449),
    (9.99, 12.77931521435019336),
    (10.5, 13.940625219403763633),
    (33.3, 82.603723581654943008),
    (150.0, 600.00947055532742811),
    (999.0, 5898.3136684305326583),
];
const BESSEL: [(f64, f64, f64); 70] = [
    (0.0, 0.01, 0.99997500015624956597),
    (0.0, 1.0, 0.76519768655796655145),
    (0.0, 9.7, -0.22179548203172285752),
    (0.0, 14.9, 0.0063915448908529068301),
    (0.0, 15.1, -0.034561851455564956162),
    (0.0, 18.0, -0.013355805721984110885),
    (0.0, 25.0, 0.096266783275958116174),
    (0.0, 60.0, -0.091471804089061869531),
    (0.0, 333.3, 0.038466654416718674802),
    (0.0, 1000.0, 0.024786686152420174561),
    (0.5, 0.01, 0.079787126279334220485),
    (0.5, 1.0, 0.67139670714180309042),
    (0.5, 9.7, -0.069621075712655024628),
    (0.5, 14.9, 0.14942179431555047107),
    (0.5, 15.1, 0.1172836319867624135),
    (0.5, 18.0, -0.14123306066859600767),
    (0.5, 25.0, -0.021120283599650445018),
    (0.5, 60.0, -0.031397461182520413009),
    (0.5, 333.3, 0.012546646215519415456),
    (0.5, 1000.0, 0.02086326660509382773),
    (1.118033988749895, 0.01, 0.0025338907359983496607),
    (1.118033988749895, 1.0, 0.3868925277164960221),
    (1.118033988749895, 9.7, 0.15427200137372315456),
    (1.118033988749895, 14.9, 0.20379310353823278262),
    (1.118033988749895, 15.1, 0.20548925024375999981),
    (1.118033988749895, 18.0, -0.18359645278472899981),
    (1.118033988749895, 25.0, -0.14106329705408373878),
    (1.118033988749895, 60.0, 0.062566373360244735594),
    (1.118033988749895, 333.3, -0.027417198739618782407),
    (1.118033988749895, 1000.0, 0.000081513178701761015847),
    (2.25, 0.01, 2.6077475988732277456e-6),
    (2.25, 1.0, 0.076305043798935936606),
    (2.25, 9.7, 0.20578922597914794671),
    (2.25, 14.9, -0.052192448162291088588),
    (2.25, 15.1, -0.011549969330681623018),
    (2.25, 18.0, 0.059955514046663594298),
    (2.25, 25.0, -0.055753132743452056099),
    (2.25, 60.0, 0.069672410050845110039),
    (2.25, 333.3, -0.02785656908161431917),
    (2.25, 1000.0, -0.024717549368349250383),
    (7.3, 0.01, 1.7173807215938286574e-21),
    (7.3, 1.0, 6.6338472310364560484e-7),
    (7.3, 9.7, 0.29642610599457483267),
    (7.3, 14.9, -0.055166655831721806995),
    (7.3, 15.1, -0.01686889667689640705),
    (7.3, 18.0, 0.1133601941270705818),
    (7.3, 25.0, 0.051603286624551371712),
    (7.3, 60.0, -0.049967537496460059451),
    (7.3, 333.3, 0.033851869219038159399),
    (7.3, 1000.0, 0.0064031587635825924981),
    (20.0, 0.01, 3.9198996830746469195e-65),
    (20.0, 1.0, 3.8735030085246577189e-25),
    (20.0, 9.7, 6.7449896068506483567e-6),
    (20.0, 14.9, 0.0067100904345426344716),
    (20.0, 15.1, 0.008063126381806353902),
    (20.0, 18.0, 0.06730594743740596909),
    (20.0, 25.0, 0.05199404922830323178),
    (20.0, 60.0, 0.10266020557876329043),
    (20.0, 333.3, 0.043499656715052581012),
    (20.0, 1000.0, 0.023357967932679334591),
    (49.5, 0.01, 2.9275939934411842027e-178),
    (49.5, 1.0, 2.9131375175253564762e-79),
    (49.5, 9.7, 1.2837934790075395878e-30),
    (49.5, 14.9, 1.1393962963666880299e-21),
    (49.5, 15.1, 2.1385630533655088778e-21),
    (49.5, 18.0, 7.8449952695806765802e-18),
    (49.5, 25.0, 1.8917978300762271432e-11),
    (49.5, 60.0, -0.13300393998389361788),
    (49.5, 333.3, 0.029603391344943954376),
    (49.5, 1000.0, 0.014832977345580639835),
];
const HYP: [(f64, f64, f64, f64, f64); 5] = [
    (0.5, 1.5, 2.5, 0.3, 1.1080625510569319884),
    (
        1.618033988749895,
        0.5,
        2.118033988749895,
        0.25,
        1.1139626745536796748,
    ),
    (-0.3, 2.2, 0.7, 0.5, 0.24085157520885228695),
    (3.1, -2.6, 1.4, 0.75, -0.041196561512193836485),
    (2.0, 1.0, 1.5, 0.7, 5.27146831974204591),
];
const HYP_NEAR_ONE: [(f64, f64, f64, f64, f64); 4] = [
    (
        1.618033988749895,
        0.5,
        2.118033988749895,
        0.9,
        2.115436728205572727,
    ),
    (
        1.118033988749895,
        0.0001,
        2.118033988749895,
        0.99,
        1.0001022318573159337,
    ),
    (0.8, 0.3, 1.5, 0.999, 1.590237202842523122),
    (1.25, 0.25, 1.5, 0.9999, 3.37395244805917296),
];

#[test]
fn log_gamma_relative_accuracy() {
    for (x, want) in LOG_GAMMA {
        let got = log_gamma(x).unwrap();
        let err = ((got - want) / want).abs();
        assert!(err < 1e-13, "x={x}: {got} vs {want} (rel {err:e})");
    }
}

#[test]
fn bessel_absolute_accuracy() {
    for (nu, x, want) in BESSEL {
        let got = bessel_j(nu, x).unwrap();
        assert!((got - want).abs() < 1e-10, "nu={nu} x={x}: {got} vs {want}");
    }
}

#[test]
fn bessel_struct_agrees_with_free_function() {
    let j = BesselJ::new(3.7).unwrap();
    for x in [0.5, 12.0, 15.5, 40.0, 700.0] {
        assert_eq!(j.eval(x), bessel_j(3.7, x).unwrap());
    }
}

#[test]
fn hyp2f1_reference_values() {
    for (a, b, c, z, want) in HYP {
        let v = hyp2f1_bounded(a, b, c, z, Z_MAX).unwrap();
        assert!(((v.value - want) / want).abs() < 1e-12, "({a},{b},{c},{z})");
        assert!(v.abs_error_bound >= 0.0 && v.abs_error_bound < 1e-12 * want.abs().max(1.0));
    }
}

#[test]
fn continuation_reference_values() {
    for (a, b, c, z, want) in HYP_NEAR_ONE {
        let got = hyp2f1_continued(a, b, c, z).unwrap();
        assert!(
            ((got - want) / want).abs() < 1e-11,
            "({a},{b},{c},{z}): {got}"
        );
    }
}

#[test]
fn partial_sums_near_one_approach_gauss_value() {
    for (a, b, c) in [(1.0, 1.0, 3.0), (0.5, 0.25, 2.0), (0.3, 0.8, 2.6)] {
        let s = hyp2f1_partial_sum(a, b, c, 1.0 - 1e-6, 100_000_000).unwrap();
        let g = gauss_value_at_one(a, b, c).unwrap();
        assert!(((s - g) / g).abs() < 1e-4, "({a},{b},{c}): {s} vs {g}");
    }
}

/// Double-double number used as a higher-precision oracle.
#[derive(Clone, Copy)]
struct Dd(f64, f64);

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd(s, (a - (s - bb)) + (b - bb))
}

impl Dd {
    fn add(self, o: Dd) -> Dd {
        let s = two_sum(self.0, o.0);
        let t = s.1 + self.1 + o.1;
        two_sum(s.0, t)
    }
    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let e = self.0.mul_add(o.0, -p);
        two_sum(p, e + self.0 * o.1 + self.1 * o.0)
    }
    fn div(self, o: Dd) -> Dd {
        let q = self.0 / o.0;
        let r = self.add(o.mul(Dd(-q, 0.0)));
        let q2 = r.0 / o.0;
        two_sum(q, q2)
    }
}

fn dd_2f1(a: f64, b: f64, c: f64, z: f64) -> f64 {
    let mut sum = Dd(1.0, 0.0);
    let mut term = Dd(1.0, 0.0);
    for k in 0..4000 {
        let k = k as f64;
        let num = Dd(a + k, 0.0).mul(Dd(b + k, 0.0)).mul(Dd(z, 0.0));
        let den = Dd(c + k, 0.0).mul(Dd(k + 1.0, 0.0));
        term = term.mul(num).div(den);
        sum = sum.add(term);
        if term.0.abs() < 1e-34 * sum.0.abs() {
            break;
        }
    }
    sum.0 + sum.1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn hyp2f1_matches_double_double_sum(
        a in -3.0f64..3.0, b in -3.0f64..3.0, c in 0.2f64..4.0, z in 0.0f64..0.5
    ) {
        let got = hyp2f1(a, b, c, z).unwrap();
        let want = dd_2f1(a, b, c, z);
        prop_assume!(want.abs() > 1e-3);
        prop_assert!(((got - want) / want).abs() < 1e-11);
    }

    #[test]
    fn bessel_three_term_recurrence(nu in 1.0f64..40.0, x in 0.1f64..100.0) {
        let lo = bessel_j(nu - 1.0, x).unwrap();
        let mid = bessel_j(nu, x).unwrap();
        let hi = bessel_j(nu + 1.0, x).unwrap();
        prop_assert!((lo + hi - 2.0 * nu / x * mid).abs() < 1e-9);
    }

    #[test]
    fn gauss_value_matches_gamma_quotient(a in 0.1f64..2.0, b in 0.1f64..2.0, extra in 0.2f64..3.0) {
        let c = a + b + extra;
        let g = gauss_value_at_one(a, b, c).unwrap();
        let q = gamma(c).unwrap() * gamma(extra).unwrap() / (gamma(c - a).unwrap() * gamma(c - b).unwrap());
        prop_assert!(((g - q) / q).abs() < 1e-12);
    }
}
