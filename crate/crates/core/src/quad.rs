//! Gauss–Legendre rules and a graded integrator for endpoint singularities.

use std::f64::consts::PI;

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1, "Gauss–Legendre rule needs at least one node");
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if m == 1 { z } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = mf * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if m == 1 {
            return (vec![0.0], vec![2.0]);
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    (x, w)
}

/// Fixed-order Gauss–Legendre quadrature of `f` over `[a, b]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl GaussRule {
    pub fn new(m: usize) -> Self {
        let (x, w) = gauss_legendre(m);
        Self { x, w }
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let c = 0.5 * (a + b);
        let d = 0.5 * (b - a);
        self.x
            .iter()
            .zip(&self.w)
            .map(|(x, w)| w * f(c + d * x))
            .sum::<f64>()
            * d
    }

    /// `∫_δ^L f` over dyadically graded pieces `[L 2^{−k−1}, L 2^{−k}]`,
    /// `k < levels`, with `δ = L 2^{−levels}`; suited to integrable
    /// singularities at the left endpoint.
    pub fn integrate_graded(&self, length: f64, levels: usize, f: impl Fn(f64) -> f64) -> f64 {
        let mut total = 0.0;
        let mut hi = length;
        for _ in 0..levels {
            let lo = 0.5 * hi;
            total += self.integrate(lo, hi, &f);
            hi = lo;
        }
        total
    }
}
