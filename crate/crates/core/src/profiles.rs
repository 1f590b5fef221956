//! Test profiles: Gaussians, compactly supported bumps, smooth cutoffs and
//! seeded random fields.

use rand::{RngExt, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// `e^{−r²/(2s²)}`.
pub fn gaussian(r: f64, s: f64) -> f64 {
    (-r * r / (2.0 * s * s)).exp()
}

/// `r^{ν−λ} e^{−r²/(2s²)}`, the Gaussian adapted to a sector of order `ν`.
pub fn sector_gaussian(r: f64, nu: f64, lambda: f64, s: f64) -> f64 {
    r.powf(nu - lambda) * gaussian(r, s)
}

/// `r^{ν−λ} p(r²) e^{−r²/2}` with `p` given by its coefficients.
pub fn gaussian_poly(r: f64, nu: f64, lambda: f64, coeffs: &[f64]) -> f64 {
    let x = r * r;
    let p = coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
    r.powf(nu - lambda) * p * gaussian(r, 1.0)
}

/// Smooth bump supported in `(a, b)`: with `t ∈ (−1, 1)` the log-mapped
/// position, `exp(−t²/(2w²) − p/(1 − t²))`.
pub fn annulus_bump(r: f64, a: f64, b: f64, width: f64, p: f64) -> f64 {
    if r <= a || r >= b {
        return 0.0;
    }
    let t = 2.0 * (r / a).ln() / (b / a).ln() - 1.0;
    (-t * t / (2.0 * width * width) - p / (1.0 - t * t)).exp()
}

/// The standard bump on `[1, 2]`. The narrow Gaussian core keeps its Hankel
/// transform negligible beyond `ρ ≈ 100`; the edge factor only removes the
/// `1e−11` jump at the ends of the support.
pub fn standard_bump(r: f64) -> f64 {
    annulus_bump(r, 1.0, 2.0, 0.2, 0.1)
}

/// `ψ(t) = e^{−1/t}` for `t > 0`, else 0.
pub fn psi(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth cutoff equal to 1 on `[0, 1]` and 0 on `[2, ∞)`.
pub fn chi(x: f64) -> f64 {
    let a = psi(2.0 - x);
    let b = psi(x - 1.0);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Seeded generator shared by every random construction in the crate.
pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Random smooth profile supported in `[a, b]`: a bump times a short random
/// trigonometric series in `ln r`.
pub fn random_annulus_profile(seed: u64, a: f64, b: f64, modes: usize) -> impl Fn(f64) -> f64 {
    let mut g = rng(seed);
    let coeffs: Vec<(f64, f64)> = (0..modes)
        .map(|_| (g.random_range(-1.0..1.0), g.random_range(-1.0..1.0)))
        .collect();
    let span = (b / a).ln();
    move |r: f64| {
        let bump = annulus_bump(r, a, b, 0.2, 0.1);
        if bump == 0.0 {
            return 0.0;
        }
        let x = std::f64::consts::PI * (r / a).ln() / span;
        let series: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(k, (c, s))| c * (k as f64 * x).cos() + s * (k as f64 * x).sin())
            .sum();
        bump * (1.0 + series)
    }
}
