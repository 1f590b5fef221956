//! Harmonic sectors, the radial operator `A_ν`, its fractional powers and the
//! conjugation operators between sectors.

use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

use crate::error::{config, domain, Error, Result};
use crate::hankel::HankelPair;
use crate::quad::GaussRule;
use crate::radial::{log_derivative_order, log_second_derivative_order, SectorField, Side};
use crate::specfun::{
    gamma, gauss_value_at_one, hyp2f1_bounded, hyp2f1_continued, inv_gamma, zeta, Z_MAX,
};

/// Orders attached to the `l`-th spherical harmonic subspace of
/// `−Δ + a/|x|²` on `ℝⁿ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicContext {
    n: usize,
    a: f64,
    l: usize,
    lambda: f64,
    mu: f64,
    nu: f64,
    d0: usize,
}

/// Validated context for dimension `n`, coupling `a` and harmonic degree `l`.
pub fn make_context(n: usize, a: f64, l: usize) -> Result<HarmonicContext> {
    if n < 2 {
        return config(format!("dimension must be at least 2, got {n}"));
    }
    if !a.is_finite() {
        return config(format!("coupling must be finite, got {a}"));
    }
    let d0 = usize::from(n == 2);
    if n == 2 && a == 0.0 && l == 0 {
        return Err(Error::SectorExcluded);
    }
    let lambda = (n as f64 - 2.0) / 2.0;
    let mu = lambda + l as f64;
    let nu_sq = mu * mu + a;
    if nu_sq <= 0.0 {
        return Err(Error::NonPositiveNu(nu_sq.max(0.0).sqrt()));
    }
    let nu = nu_sq.sqrt();
    Ok(HarmonicContext {
        n,
        a,
        l,
        lambda,
        mu,
        nu,
        d0,
    })
}

impl HarmonicContext {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn l(&self) -> usize {
        self.l
    }
    /// `λ = (n − 2)/2`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    /// `μ = λ + l`, the free order of the sector.
    pub fn mu(&self) -> f64 {
        self.mu
    }
    /// `ν = √(μ² + a)`.
    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn d0(&self) -> usize {
        self.d0
    }

    /// The free (`a = 0`) context of the same sector.
    pub fn free(&self) -> Result<HarmonicContext> {
        make_context(self.n, 0.0, self.l)
    }

    /// Coefficient `ν² − λ²` of `r^{−2}` in `A_ν`.
    pub fn potential_coefficient(&self) -> f64 {
        self.nu * self.nu - self.lambda * self.lambda
    }
}

/// Kernel of `A_ν^{σ/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub ctx: HarmonicContext,
    pub sigma: f64,
}

impl KernelSpec {
    pub fn new(ctx: HarmonicContext, sigma: f64) -> Self {
        Self { ctx, sigma }
    }

    /// Homogeneity degree `−(σ + 2λ + 2)`.
    pub fn degree(&self) -> f64 {
        -(self.sigma + 2.0 * self.ctx.lambda + 2.0)
    }

    fn parameters(&self) -> (f64, f64, f64) {
        let nu = self.ctx.nu;
        (
            nu + self.sigma / 2.0 + 1.0,
            self.sigma / 2.0 + 1.0,
            nu + 1.0,
        )
    }

    fn prefactor(&self) -> Result<f64> {
        let nu = self.ctx.nu;
        let s = self.sigma;
        Ok(
            2f64.powf(s + 1.0) * gamma(nu + s / 2.0 + 1.0)? * inv_gamma(-s / 2.0)
                / gamma(nu + 1.0)?,
        )
    }

    fn check_negative(&self) -> Result<()> {
        if !(self.sigma < 0.0) {
            return domain(format!(
                "pointwise kernel needs sigma < 0, got {}",
                self.sigma
            ));
        }
        Ok(())
    }

    fn value_with(
        &self,
        r: f64,
        s: f64,
        f: impl Fn(f64, f64, f64, f64) -> Result<f64>,
    ) -> Result<f64> {
        self.check_negative()?;
        if !(r > 0.0 && s > 0.0) {
            return domain(format!("kernel arguments must be positive, got ({r}, {s})"));
        }
        let (lo, hi) = if s < r { (s, r) } else { (r, s) };
        let (a, b, c) = self.parameters();
        let lam = self.ctx.lambda;
        let nu = self.ctx.nu;
        let hyp = f(a, b, c, (lo / hi).powi(2))?;
        Ok(self.prefactor()? * lo.powf(nu - lam) / hi.powf(self.sigma + lam + nu + 2.0) * hyp)
    }
}

/// `k^σ_{ν,ν}(r, s)` by the hypergeometric series; refuses `(s/r)² > Z_MAX`.
pub fn frac_kernel(spec: &KernelSpec, r: f64, s: f64) -> Result<f64> {
    spec.value_with(r, s, |a, b, c, z| {
        hyp2f1_bounded(a, b, c, z, Z_MAX)
            .map(|v| v.value)
            .map_err(|e| match e {
                Error::Domain(m) => Error::Resolution(m),
                other => other,
            })
    })
}

/// `k^σ_{ν,ν}(r, s)` for any `r ≠ s`, continuing the hypergeometric function
/// analytically towards `z = 1`.
pub fn frac_kernel_near(spec: &KernelSpec, r: f64, s: f64) -> Result<f64> {
    if r == s {
        return domain("kernel is not evaluated at coincidence; use diagonal_kernel");
    }
    spec.value_with(r, s, hyp2f1_continued)
}

/// `k^σ_{ν,ν}(ω, ω)` from Gauss's value of the hypergeometric function at 1.
pub fn diagonal_kernel(spec: &KernelSpec, omega: f64) -> Result<f64> {
    if !(spec.sigma < -1.0) {
        return Err(Error::Divergence(format!(
            "kernel diverges on the diagonal for sigma = {} >= -1",
            spec.sigma
        )));
    }
    if !(omega > 0.0) {
        return domain(format!("diagonal point must be positive, got {omega}"));
    }
    let (a, b, c) = spec.parameters();
    Ok(spec.prefactor()? * omega.powf(spec.degree()) * gauss_value_at_one(a, b, c)?)
}

/// Kernel of `K⁰_{μ,ν} = H_μ H_ν`, with `μ` taken from `to` and `ν` from `from`.
///
/// For `s < r` this is `2Γ((μ+ν)/2+1) / (Γ((μ−ν)/2) Γ(ν+1)) · s^{ν−λ} / r^{λ+ν+2} ·
/// F((μ+ν)/2+1, (ν−μ)/2+1; ν+1; s²/r²)`, the Weber–Schafheitlin value; for
/// `s > r` exchange `r ↔ s` and `μ ↔ ν`.
pub fn conjugation_kernel(
    from: &HarmonicContext,
    to: &HarmonicContext,
    r: f64,
    s: f64,
) -> Result<f64> {
    if from.n != to.n {
        return config("conjugation needs contexts of equal dimension");
    }
    if !(r > 0.0 && s > 0.0) || r == s {
        return domain(format!(
            "conjugation kernel needs distinct positive points, got ({r}, {s})"
        ));
    }
    let (mu, nu) = if s < r {
        (to.nu, from.nu)
    } else {
        (from.nu, to.nu)
    };
    let (lo, hi) = if s < r { (s, r) } else { (r, s) };
    let lam = from.lambda;
    let pref = 2.0 * gamma((mu + nu) / 2.0 + 1.0)? * inv_gamma((mu - nu) / 2.0) / gamma(nu + 1.0)?;
    if pref == 0.0 {
        return Ok(0.0);
    }
    let z = (lo / hi).powi(2);
    let hyp = hyp2f1_continued((mu + nu) / 2.0 + 1.0, (nu - mu) / 2.0 + 1.0, nu + 1.0, z)?;
    Ok(pref * lo.powf(nu - lam) / hi.powf(lam + nu + 2.0) * hyp)
}

/// `A_ν f = −r^{−2}(f_xx + (n−2) f_x − (ν²−λ²) f)` in `x = ln r`, by central
/// differences of the given order (2, 4, 6 or 8).
pub fn fd_apply_a(ctx: &HarmonicContext, f: &SectorField, order: usize) -> Result<SectorField> {
    if !matches!(order, 2 | 4 | 6 | 8) {
        return config(format!(
            "finite-difference order must be 2, 4, 6 or 8, got {order}"
        ));
    }
    let h = f.grid().spacing();
    let fx = log_derivative_order(f.values(), h, order);
    let fxx = log_second_derivative_order(f.values(), h, order);
    let k = ctx.potential_coefficient();
    let m = ctx.n as f64 - 2.0;
    let values = f
        .grid()
        .nodes()
        .iter()
        .zip(fxx.iter().zip(&fx).zip(f.values()))
        .map(|(r, ((dxx, dx), v))| -(dxx + dx * m - v * k) / (r * r))
        .collect();
    Ok(f.with_values(values).retag(*ctx, f.side()))
}

/// `A_ν f = H_ν Ω² H_ν f`.
pub fn apply_a(pair: &HankelPair, f: &SectorField) -> Result<SectorField> {
    apply_frac_power(pair, f, 2.0)
}

/// `A_ν^{σ/2} f = H_ν Ω^σ H_ν f` for any real `σ`.
pub fn apply_frac_power(pair: &HankelPair, f: &SectorField, sigma: f64) -> Result<SectorField> {
    if sigma == 0.0 {
        return Ok(f.clone());
    }
    pair.multiplier(f, |rho| Complex64::new(rho.powf(sigma), 0.0))
}

/// `A_ν^{σ/2} f` by quadrature against `k^σ_{ν,ν}`, `σ < 0`.
///
/// Nodes within two grid spacings (in `ln r`) of the target are replaced by
/// `f(r_i) r_i^{−σ} I`, with `I` the kernel integral over that band. For
/// `σ ∈ (−1, 0)` the trapezoid sum outside the band also carries the
/// generalised Euler–Maclaurin correction of the `|v|^{−σ−1}` singularity.
pub fn apply_frac_power_kernel(
    ctx: &HarmonicContext,
    f: &SectorField,
    sigma: f64,
) -> Result<SectorField> {
    let spec = KernelSpec::new(*ctx, sigma);
    spec.check_negative()?;
    let grid = Arc::clone(f.grid());
    let len = grid.len();
    let h = grid.spacing();
    // k(r_i, r_j) = r_i^{deg} κ[j − i + len − 1] with κ_d = k(1, e^{d h}).
    let kappa: Vec<f64> = (0..2 * len - 1)
        .into_par_iter()
        .map(|k| {
            let d = k as isize - (len as isize - 1);
            if d.abs() < 2 {
                Ok(0.0)
            } else {
                frac_kernel_near(&spec, 1.0, (d as f64 * h).exp())
            }
        })
        .collect::<Result<_>>()?;
    let band = band_integral(&spec, 2.0 * h)? - 2.0 * singular_trapezoid_error(sigma, h)?;
    let r = grid.nodes();
    let w = grid.weights();
    let deg = spec.degree();
    let values = (0..len)
        .into_par_iter()
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..len {
                let d = j.abs_diff(i);
                if d < 2 {
                    continue;
                }
                let weight = if d == 2 { 0.5 * w[j] } else { w[j] };
                acc += f.values()[j] * (kappa[j + len - 1 - i] * weight);
            }
            acc * r[i].powf(deg) + f.values()[i] * (r[i].powf(-sigma) * band)
        })
        .collect();
    Ok(f.with_values(values).retag(*ctx, f.side()))
}

/// Coefficient `C` of the coincidence singularity `k^σ(1, e^v) ≈ C |v|^{−σ−1}`.
fn singular_coefficient(sigma: f64) -> Result<f64> {
    Ok(gamma(sigma + 1.0)? * inv_gamma(-sigma / 2.0) * inv_gamma(1.0 + sigma / 2.0))
}

/// Trapezoid sum minus integral of `C|v|^p` over `v ≥ 2h` (half weight at `2h`),
/// `p = −σ−1`; zero outside the singular range `σ ∈ (−1, 0)`.
fn singular_trapezoid_error(sigma: f64, h: f64) -> Result<f64> {
    if !(sigma > -1.0 && sigma < 0.0) {
        return Ok(0.0);
    }
    let p = -sigma - 1.0;
    let z = zeta(-p)? - 1.0 - 0.5 * 2f64.powf(p) + 2f64.powf(p + 1.0) / (p + 1.0);
    Ok(singular_coefficient(sigma)? * h.powf(p + 1.0) * z)
}

/// `∫ k^σ(1, u) u^{n−1} du` over `|ln u| < δ`.
///
/// Graded Gauss–Legendre in `v = ln u` on both sides of the singularity, with
/// the innermost piece taken from the leading behaviour of the kernel there.
pub fn band_integral(spec: &KernelSpec, delta: f64) -> Result<f64> {
    const LEVELS: usize = 30;
    let rule = GaussRule::new(16);
    let n = spec.ctx.n as i32;
    let sigma = spec.sigma;
    let eval = |v: f64| -> f64 {
        let u = v.exp();
        frac_kernel_near(spec, 1.0, u).unwrap_or(f64::NAN) * u.powi(n)
    };
    let right = rule.integrate_graded(delta, LEVELS, eval);
    let left = rule.integrate_graded(delta, LEVELS, |v| eval(-v));
    let inner = delta * 0.5f64.powi(LEVELS as i32);
    let core = if sigma < -1.0 {
        2.0 * inner * diagonal_kernel(spec, 1.0)?
    } else if sigma > -1.0 {
        2.0 * singular_coefficient(sigma)? * inner.powf(-sigma) / (-sigma)
    } else {
        0.0
    };
    let total = right + left + core;
    if !total.is_finite() {
        return Err(Error::Resolution(format!(
            "band integral of the sigma = {sigma} kernel did not evaluate"
        )));
    }
    Ok(total)
}

/// `K⁰_{μ,ν} f = H_μ H_ν f` with `ν` from `from` and `μ` from `to`.
pub fn conjugation_apply(
    from: &HankelPair,
    to: &HankelPair,
    f: &SectorField,
) -> Result<SectorField> {
    if from.context().n() != to.context().n() {
        return config("conjugation needs contexts of equal dimension");
    }
    if **from.spectral() != **to.spectral() || **from.physical() != **to.physical() {
        return config("conjugation needs both transforms on the same grids");
    }
    let g = from.to_spectral(f)?;
    let g = g.retag(*to.context(), Side::Spectral);
    to.to_physical(&g)
}
