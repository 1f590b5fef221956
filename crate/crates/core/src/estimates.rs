//! Smoothing, Morawetz, Strichartz, Hardy and norm-equivalence experiments,
//! and the report type shared by every experiment.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::evolution::{
    h_plus_minus, schrodinger_phase, spectral_scale, wave_spectral, TimeGrid, WaveDataPair,
};
use crate::hankel::HankelPair;
use crate::operator::HarmonicContext;
use crate::radial::{weighted_l2_norm, GridRule, SectorField, Side};
use crate::specfun::{ln_gamma_complex, log_gamma};

/// How a computed value is compared with its reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// `|c − r| ≤ tol |r|`.
    Relative,
    /// `|c − r| ≤ tol`.
    Absolute,
    /// `c ≤ r (1 + tol)`.
    AtMost,
    /// `c ≥ r − tol`.
    AtLeast,
}

impl Criterion {
    pub fn holds(self, computed: f64, reference: f64, tolerance: f64) -> bool {
        if !computed.is_finite() {
            return false;
        }
        match self {
            Criterion::Relative => (computed - reference).abs() <= tolerance * reference.abs(),
            Criterion::Absolute => (computed - reference).abs() <= tolerance,
            Criterion::AtMost => computed <= reference * (1.0 + tolerance),
            Criterion::AtLeast => computed >= reference - tolerance,
        }
    }
}

/// A tracked quantity at successive resolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    /// Which quantity is tracked.
    pub quantity: String,
    /// Resolution labels, coarse to fine (usually the physical node count).
    pub resolutions: Vec<usize>,
    pub values: Vec<f64>,
    /// Relative changes between consecutive resolutions.
    pub deltas: Vec<f64>,
    /// Largest acceptable final delta.
    pub tolerance: f64,
    /// Final time of the time quadrature, when there is one.
    pub horizon: Option<f64>,
    pub converged: bool,
}

/// Deltas below this are treated as at the rounding floor.
const DELTA_FLOOR: f64 = 1e-10;

impl Convergence {
    /// At least two resolutions, a final delta within `tolerance`, and deltas
    /// that do not grow before reaching the floor.
    pub fn new(quantity: &str, resolutions: Vec<usize>, values: Vec<f64>, tolerance: f64) -> Self {
        let deltas: Vec<f64> = values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / w[1].abs().max(f64::MIN_POSITIVE))
            .collect();
        let monotone = deltas
            .windows(2)
            .all(|d| d[1] <= d[0] || d[1] <= DELTA_FLOOR);
        let converged = values.len() >= 2
            && values.iter().all(|v| v.is_finite())
            && monotone
            && deltas.last().is_some_and(|d| *d <= tolerance);
        Self {
            quantity: quantity.to_string(),
            resolutions,
            values,
            deltas,
            tolerance,
            horizon: None,
            converged,
        }
    }

    pub fn with_horizon(mut self, t: f64) -> Self {
        self.horizon = Some(t);
        self
    }
}

/// Outcome of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub experiment: String,
    pub params: BTreeMap<String, f64>,
    pub computed: f64,
    pub reference: f64,
    /// `|computed − reference| / |reference|`, or the absolute gap when the reference is 0.
    pub rel_dev: f64,
    pub tolerance: f64,
    pub criterion: Criterion,
    pub convergence: Convergence,
    pub diagnostics: BTreeMap<String, f64>,
    /// Criterion met and refinement converged.
    pub pass: bool,
}

impl EstimateReport {
    pub fn new(
        experiment: &str,
        params: &[(&str, f64)],
        computed: f64,
        reference: f64,
        tolerance: f64,
        criterion: Criterion,
        convergence: Convergence,
    ) -> Self {
        let gap = (computed - reference).abs();
        let rel_dev = if reference == 0.0 {
            gap
        } else {
            gap / reference.abs()
        };
        let pass = convergence.converged && criterion.holds(computed, reference, tolerance);
        Self {
            experiment: experiment.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            computed,
            reference,
            rel_dev,
            tolerance,
            criterion,
            convergence,
            diagnostics: BTreeMap::new(),
            pass,
        }
    }

    pub fn diagnostic(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    /// Parameters as a compact JSON object with sorted keys.
    pub fn params_json(&self) -> String {
        serde_json::to_string(&self.params).expect("finite map serialises")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Real radial profile used to build data at each resolution.
pub type Profile<'a> = &'a (dyn Fn(f64) -> f64 + Sync);

fn sector_params(ctx: &HarmonicContext) -> Vec<(&'static str, f64)> {
    vec![("n", ctx.n() as f64), ("a", ctx.a()), ("l", ctx.l() as f64)]
}

fn physical_field(pair: &HankelPair, profile: Profile) -> Result<SectorField> {
    SectorField::from_real(
        *pair.context(),
        Arc::clone(pair.physical()),
        Side::Physical,
        profile,
    )
}

fn nonzero(value: f64, what: &str) -> Result<f64> {
    if value == 0.0 || !value.is_finite() {
        return config(format!("{what} must be finite and nonzero"));
    }
    Ok(value)
}

/// Checks `0 < α < 1/4 + ν/2`, where `C_{ν,α}` is finite.
pub fn check_alpha(nu: f64, alpha: f64) -> Result<()> {
    if !(nu > 0.0) {
        return Err(Error::NonPositiveNu(nu));
    }
    if !(alpha > 0.0 && alpha < 0.25 + nu / 2.0) {
        return Err(Error::Divergence(format!(
            "C_(nu,alpha) needs 0 < alpha < 1/4 + nu/2 = {}, got alpha = {alpha}",
            0.25 + nu / 2.0
        )));
    }
    Ok(())
}

/// `C_{ν,α} = 2^{1/2−2α} √(π Γ(ν−2α+1/2) Γ(4α) / (Γ(ν+2α+1/2) Γ(2α+1/2)²))`.
pub fn smoothing_constant(nu: f64, alpha: f64) -> Result<f64> {
    check_alpha(nu, alpha)?;
    let ln = log_gamma(nu - 2.0 * alpha + 0.5)? + log_gamma(4.0 * alpha)?
        - log_gamma(nu + 2.0 * alpha + 0.5)?
        - 2.0 * log_gamma(2.0 * alpha + 0.5)?;
    Ok(
        ((0.5 - 2.0 * alpha) * std::f64::consts::LN_2 + 0.5 * (std::f64::consts::PI.ln() + ln))
            .exp(),
    )
}

/// Integral over `t ∈ ℝ` of a nonnegative integrand sampled at `±t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeIntegral {
    pub times: Vec<f64>,
    /// `I(t) + I(−t)` at each grid time.
    pub samples: Vec<f64>,
    /// Trapezoid integral over `[−T, T]`.
    pub bulk: f64,
    /// Extrapolated contribution of `|t| > T`.
    pub tail: f64,
    /// Change in `tail` between the two highest fit orders.
    pub tail_spread: f64,
    /// Assumed decay exponent: `I(t) ~ |t|^{−decay}`.
    pub decay: f64,
}

impl TimeIntegral {
    pub fn total(&self) -> f64 {
        self.bulk + self.tail
    }

    /// Fraction of the total carried by `|t| ∈ [T/10, T]`.
    pub fn last_decade_fraction(&self, grid: &TimeGrid) -> f64 {
        let t_max = grid.t_max();
        let part: f64 = grid
            .times()
            .iter()
            .zip(grid.weights())
            .zip(&self.samples)
            .filter(|((t, _), _)| **t >= t_max / 10.0)
            .map(|((_, w), s)| w * s)
            .sum();
        part / self.total()
    }
}

/// Least-squares coefficients of `y ≈ Σ_{k<m} d_k z^k`.
fn poly_fit(z: &[f64], y: &[f64], m: usize) -> Vec<f64> {
    let mut a = vec![vec![0.0; m + 1]; m];
    for (zi, yi) in z.iter().zip(y) {
        let pw: Vec<f64> = (0..m).map(|k| zi.powi(k as i32)).collect();
        for r in 0..m {
            for c in 0..m {
                a[r][c] += pw[r] * pw[c];
            }
            a[r][m] += pw[r] * yi;
        }
    }
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty");
        a.swap(col, piv);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot = &top[col];
        for row in rest {
            let f = row[col] / pivot[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                *x -= f * p;
            }
        }
    }
    let mut d = vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|c| a[r][c] * d[c]).sum();
        d[r] = (a[r][m] - s) / a[r][r];
    }
    d
}

/// Trapezoid over the grid plus a tail from fitting `t^{decay} S(t) = Σ d_k (T/t)^k`
/// on `t ≥ T/2`.
pub fn time_integral(grid: &TimeGrid, samples: Vec<f64>, decay: f64) -> Result<TimeIntegral> {
    if grid.times()[0] != 0.0 {
        return config("spacetime integrals need a time grid starting at t = 0");
    }
    if !(decay > 1.0) {
        return config(format!("tail extrapolation needs decay > 1, got {decay}"));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::Resolution("nonfinite spacetime integrand".into()));
    }
    let t_max = grid.t_max();
    let bulk = grid.integrate(&samples);
    let (z, y): (Vec<f64>, Vec<f64>) = grid
        .times()
        .iter()
        .zip(&samples)
        .filter(|(t, _)| **t >= t_max / 2.0)
        .map(|(t, s)| (t_max / t, s * t.powf(decay)))
        .unzip();
    let tail_of = |m: usize| {
        let d = poly_fit(&z, &y, m);
        t_max.powf(1.0 - decay)
            * d.iter()
                .enumerate()
                .map(|(k, dk)| dk / (decay + k as f64 - 1.0))
                .sum::<f64>()
    };
    let (tail, tail_spread) = match z.len() {
        0 => return config("no samples in the last half of the time grid"),
        1 | 2 => (tail_of(1), f64::INFINITY),
        3..=5 => {
            let t2 = tail_of(2);
            (t2, (t2 - tail_of(1)).abs())
        }
        _ => {
            let t3 = tail_of(3);
            (t3, (t3 - tail_of(2)).abs())
        }
    };
    Ok(TimeIntegral {
        times: grid.times().to_vec(),
        samples,
        bulk,
        tail,
        tail_spread,
        decay,
    })
}

/// `I(t) + I(−t)` with `I(t) = measure(H spectral_at(t))`; only `+t` is evaluated
/// when `even` holds. At `t = 0` this is `2 I(0)`, so the trapezoid over
/// `[0, T]` is the one over `[−T, T]`.
fn sample_times(
    pair: &HankelPair,
    grid: &TimeGrid,
    even: bool,
    spectral_at: impl Fn(f64) -> SectorField + Sync,
    measure: impl Fn(&SectorField) -> Result<f64> + Sync,
) -> Result<Vec<f64>> {
    grid.times()
        .par_iter()
        .map(|&t| {
            let plus = measure(&pair.to_physical(&spectral_at(t))?)?;
            if even || t == 0.0 {
                Ok(2.0 * plus)
            } else {
                Ok(plus + measure(&pair.to_physical(&spectral_at(-t))?)?)
            }
        })
        .collect()
}

fn is_real(f: &SectorField) -> bool {
    f.values().iter().all(|v| v.im == 0.0)
}

/// `∫_ℝ ‖Ω^{−1/2−2α} A^{1/4−α} e^{−itA} f‖² dt` by time quadrature.
pub fn smoothing_spacetime(
    pair: &HankelPair,
    f: &SectorField,
    alpha: f64,
    grid: &TimeGrid,
) -> Result<TimeIntegral> {
    check_alpha(pair.context().nu(), alpha)?;
    let hf = pair.to_spectral(f)?;
    let beta = 0.5 - 2.0 * alpha;
    let weight = -0.5 - 2.0 * alpha;
    let samples = sample_times(
        pair,
        grid,
        is_real(&hf),
        |t| spectral_scale(&hf, |rho| schrodinger_phase(t, rho) * rho.powf(beta)),
        |v| Ok(weighted_l2_norm(v, weight).powi(2)),
    )?;
    time_integral(grid, samples, 1.0 + 4.0 * alpha)
}

/// `∫_ℝ ‖Ω^{−1/2−2α} A^{1/4−α} u‖² dt` for the wave solution with `data`.
pub fn morawetz_spacetime(
    pair: &HankelPair,
    data: &WaveDataPair,
    alpha: f64,
    grid: &TimeGrid,
) -> Result<TimeIntegral> {
    check_alpha(pair.context().nu(), alpha)?;
    let hf = pair.to_spectral(data.position())?;
    let hg = pair.to_spectral(data.velocity())?;
    let beta = 0.5 - 2.0 * alpha;
    let weight = -0.5 - 2.0 * alpha;
    let even = hg.values().iter().all(|v| *v == Complex64::new(0.0, 0.0));
    let samples = sample_times(
        pair,
        grid,
        even,
        |t| {
            spectral_scale(&wave_spectral(&hf, &hg, t), |rho| {
                Complex64::new(rho.powf(beta), 0.0)
            })
        },
        |v| Ok(weighted_l2_norm(v, weight).powi(2)),
    )?;
    time_integral(grid, samples, 1.0 + 4.0 * alpha)
}

fn spacetime_diagnostics(
    report: EstimateReport,
    ti: &TimeIntegral,
    grid: &TimeGrid,
) -> EstimateReport {
    report
        .diagnostic("tail_fraction", ti.tail / ti.total())
        .diagnostic("tail_spread", ti.tail_spread / ti.total())
        .diagnostic("last_decade_fraction", ti.last_decade_fraction(grid))
}

fn resolutions(pairs: &[HankelPair]) -> Vec<usize> {
    pairs.iter().map(|p| p.physical().len()).collect()
}

fn finest(pairs: &[HankelPair]) -> Result<&HankelPair> {
    pairs
        .last()
        .ok_or_else(|| Error::Config("at least one resolution is required".into()))
}

/// Schrödinger smoothing: `(∫‖Ω^{−1/2−2α} A^{1/4−α} u‖² dt)^{1/2} / ‖f‖` against
/// `C_{ν,α}` (relative tolerance 2%), on each pair in turn.
pub fn smoothing_experiment(
    pairs: &[HankelPair],
    alpha: f64,
    profile: Profile,
    grid: &TimeGrid,
) -> Result<EstimateReport> {
    let ctx = *finest(pairs)?.context();
    let reference = smoothing_constant(ctx.nu(), alpha)?;
    let runs = pairs
        .iter()
        .map(|p| {
            let f = physical_field(p, profile)?;
            let norm = nonzero(f.norm(), "smoothing data norm")?;
            let ti = smoothing_spacetime(p, &f, alpha, grid)?;
            Ok((ti.total().sqrt() / norm, ti))
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let (ratio, ti) = runs.last().expect("nonempty");
    let tolerance = 0.02;
    let conv = Convergence::new("ratio", resolutions(pairs), ratios, tolerance / 4.0)
        .with_horizon(grid.t_max());
    let mut params = sector_params(&ctx);
    params.push(("alpha", alpha));
    let report = EstimateReport::new(
        "smoothing",
        &params,
        *ratio,
        reference,
        tolerance,
        Criterion::Relative,
        conv,
    )
    .diagnostic("constant_factor", ratio / reference);
    Ok(spacetime_diagnostics(report, ti, grid))
}

/// Sector data for [`multi_sector_smoothing`]: pairs coarse to fine and a profile.
pub struct SectorRun<'a> {
    pub pairs: &'a [HankelPair],
    pub profile: Profile<'a>,
}

/// Smoothing for a finite sum of sectors: the aggregate ratio
/// `(Σ_l ∫‖…u_l‖² dt / Σ_l ‖f_l‖²)^{1/2}` is at most the largest sector constant.
pub fn multi_sector_smoothing(
    sectors: &[SectorRun],
    alpha: f64,
    grid: &TimeGrid,
) -> Result<EstimateReport> {
    let Some(first) = sectors.first() else {
        return config("at least one sector is required");
    };
    let base = *finest(first.pairs)?.context();
    let levels = first.pairs.len();
    let mut seen = Vec::new();
    for s in sectors {
        let ctx = *finest(s.pairs)?.context();
        if ctx.n() != base.n() || ctx.a() != base.a() {
            return config("sectors must share n and a");
        }
        if s.pairs.len() != levels {
            return config("sectors must supply the same number of resolutions");
        }
        if seen.contains(&ctx.l()) {
            return config(format!("sector l = {} appears twice", ctx.l()));
        }
        seen.push(ctx.l());
    }
    let mut reference: f64 = 0.0;
    for s in sectors {
        reference = reference.max(smoothing_constant(finest(s.pairs)?.context().nu(), alpha)?);
    }
    let mut ratios = Vec::with_capacity(levels);
    let mut defect = 0.0;
    for level in 0..levels {
        let mut per_sector = Vec::new();
        let mut mass = 0.0;
        for s in sectors {
            let pair = &s.pairs[level];
            let f = physical_field(pair, s.profile)?;
            mass += f.norm().powi(2);
            per_sector.push(smoothing_spacetime(pair, &f, alpha, grid)?);
        }
        nonzero(mass, "aggregate data norm")?;
        let summed: f64 = per_sector.iter().map(TimeIntegral::total).sum();
        // Aggregate integrand first, then integrate: must agree with the sum of sector integrals.
        let joint: Vec<f64> = (0..grid.len())
            .map(|k| per_sector.iter().map(|ti| ti.samples[k]).sum())
            .collect();
        let joint = time_integral(grid, joint, per_sector[0].decay)?.total();
        defect = (joint - summed).abs() / summed;
        ratios.push((summed / mass).sqrt());
    }
    let tolerance = 0.02;
    let ratio = *ratios.last().expect("nonempty");
    let conv = Convergence::new("ratio", resolutions(first.pairs), ratios, tolerance / 4.0)
        .with_horizon(grid.t_max());
    let params = [
        ("n", base.n() as f64),
        ("a", base.a()),
        ("sectors", sectors.len() as f64),
        ("alpha", alpha),
    ];
    Ok(EstimateReport::new(
        "multi_sector_smoothing",
        &params,
        ratio,
        reference,
        tolerance,
        Criterion::AtMost,
        conv,
    )
    .diagnostic("aggregation_defect", defect))
}

/// `√(‖h₊‖² + ‖h₋‖²)`.
pub fn h_norm(pair: &HankelPair, data: &WaveDataPair) -> Result<f64> {
    let (hp, hm) = h_plus_minus(pair, data)?;
    Ok((hp.norm().powi(2) + hm.norm().powi(2)).sqrt())
}

/// Wave analogue of [`smoothing_experiment`]: the spacetime norm over
/// `√(‖h₊‖² + ‖h₋‖²)` against `C_{ν,α}`, relative tolerance 3%; with
/// `Criterion::AtMost` it checks only the upper bound.
pub fn morawetz_experiment(
    pairs: &[HankelPair],
    alpha: f64,
    position: Profile,
    velocity: Profile,
    grid: &TimeGrid,
    criterion: Criterion,
) -> Result<EstimateReport> {
    let ctx = *finest(pairs)?.context();
    let reference = smoothing_constant(ctx.nu(), alpha)?;
    let runs = pairs
        .iter()
        .map(|p| {
            let data =
                WaveDataPair::new(physical_field(p, position)?, physical_field(p, velocity)?)?;
            let h = nonzero(h_norm(p, &data)?, "√(‖h₊‖² + ‖h₋‖²)")?;
            let ti = morawetz_spacetime(p, &data, alpha, grid)?;
            Ok((ti.total().sqrt() / h, ti))
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let (ratio, ti) = runs.last().expect("nonempty");
    let tolerance = 0.03;
    let conv = Convergence::new("ratio", resolutions(pairs), ratios, tolerance / 4.0)
        .with_horizon(grid.t_max());
    let mut params = sector_params(&ctx);
    params.push(("alpha", alpha));
    let report = EstimateReport::new(
        "morawetz", &params, *ratio, reference, tolerance, criterion, conv,
    )
    .diagnostic("constant_factor", ratio / reference);
    Ok(spacetime_diagnostics(report, ti, grid))
}

/// Which equation a Strichartz pair refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Schrodinger,
    Wave,
}

/// Validated Strichartz exponents; `gamma` and `sigma` are 0 for Schrödinger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissiblePair {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub equation: Equation,
    pub gamma: f64,
    pub sigma: f64,
}

const SCALING_SLACK: f64 = 1e-12;

/// `2/p + n/q = n/2` with `p ≥ 2` and `(n, p) ≠ (2, 2)`; `p = ∞` is allowed.
pub fn schrodinger_admissible(n: usize, p: f64, q: f64) -> bool {
    if !(p >= 2.0) || !(q >= 2.0) {
        return false;
    }
    if n == 2 && p == 2.0 {
        return false;
    }
    let nf = n as f64;
    (2.0 / p + nf / q - nf / 2.0).abs() <= SCALING_SLACK
}

/// Validates `1/p ≤ min{1/2, (n−1)/2 (1/2 − 1/q)}` for `q ∈ [2, ∞)` with the
/// exclusions `p > 2` at `n = 3` and `p > 4` at `n = 2`; returns
/// `σ = γ + 1/p − n(1/2 − 1/q)`.
pub fn wave_admissible(n: usize, p: f64, q: f64, gamma: f64) -> Result<f64> {
    if !(2.0..f64::INFINITY).contains(&q) {
        return config(format!("wave pairs need q in [2, inf), got {q}"));
    }
    if !(p >= 2.0) {
        return config(format!("wave pairs need p >= 2, got {p}"));
    }
    let nf = n as f64;
    let bound = (0.5f64).min((nf - 1.0) / 2.0 * (0.5 - 1.0 / q));
    if 1.0 / p > bound + SCALING_SLACK {
        return config(format!(
            "1/p = {} exceeds min(1/2, (n-1)/2 (1/2 - 1/q)) = {bound}",
            1.0 / p
        ));
    }
    if n == 3 && p <= 2.0 {
        return config("the n = 3 wave endpoint p = 2 is excluded");
    }
    if n == 2 && p <= 4.0 {
        return config("n = 2 wave pairs need p > 4");
    }
    Ok(gamma + 1.0 / p - nf * (0.5 - 1.0 / q))
}

impl AdmissiblePair {
    pub fn schrodinger(n: usize, p: f64, q: f64) -> Result<Self> {
        if !schrodinger_admissible(n, p, q) {
            return config(format!(
                "(n, p, q) = ({n}, {p}, {q}) is not Schrödinger admissible"
            ));
        }
        Ok(Self {
            n,
            p,
            q,
            equation: Equation::Schrodinger,
            gamma: 0.0,
            sigma: 0.0,
        })
    }

    pub fn wave(n: usize, p: f64, q: f64, gamma: f64) -> Result<Self> {
        let sigma = wave_admissible(n, p, q, gamma)?;
        Ok(Self {
            n,
            p,
            q,
            equation: Equation::Wave,
            gamma,
            sigma,
        })
    }

    /// Large-time decay exponent of `‖u(t)‖_{L^q}^p`.
    fn decay(&self) -> f64 {
        let nf = self.n as f64;
        let rate = match self.equation {
            Equation::Schrodinger => nf * (0.5 - 1.0 / self.q),
            Equation::Wave => (nf - 1.0) * (0.5 - 1.0 / self.q),
        };
        self.p * rate
    }
}

/// `‖u‖_{L^p_t L^q_r}` over `t ∈ ℝ` and the matching data norm: `‖f‖` for
/// Schrödinger, `(‖A^{γ/2} f‖² + ‖A^{(γ−1)/2} g‖²)^{1/2}` for the wave, whose
/// left side carries `A^{σ/2}`.
pub fn strichartz_norms(
    pair: &HankelPair,
    adm: &AdmissiblePair,
    data: &WaveDataPair,
    grid: &TimeGrid,
) -> Result<(f64, f64, TimeIntegral)> {
    if !adm.q.is_finite() || !adm.p.is_finite() {
        return config("Strichartz experiments use finite p and q");
    }
    if pair.context().n() != adm.n {
        return config("admissible pair and sector disagree on n");
    }
    let (p, q) = (adm.p, adm.q);
    let measure = |v: &SectorField| Ok(v.lq_norm(q)?.powf(p));
    let hf = pair.to_spectral(data.position())?;
    let (samples, data_norm) = match adm.equation {
        Equation::Schrodinger => {
            let samples = sample_times(
                pair,
                grid,
                is_real(&hf),
                |t| spectral_scale(&hf, |rho| schrodinger_phase(t, rho)),
                measure,
            )?;
            (samples, data.position().norm())
        }
        Equation::Wave => {
            let hg = pair.to_spectral(data.velocity())?;
            let even = hg.values().iter().all(|v| *v == Complex64::new(0.0, 0.0));
            let sigma = adm.sigma;
            let samples = sample_times(
                pair,
                grid,
                even && is_real(&hf),
                |t| {
                    spectral_scale(&wave_spectral(&hf, &hg, t), |rho| {
                        Complex64::new(rho.powf(sigma), 0.0)
                    })
                },
                measure,
            )?;
            let norm = (weighted_l2_norm(&hf, adm.gamma).powi(2)
                + weighted_l2_norm(&hg, adm.gamma - 1.0).powi(2))
            .sqrt();
            (samples, norm)
        }
    };
    let ti = time_integral(grid, samples, adm.decay())?;
    Ok((
        ti.total().powf(1.0 / p),
        nonzero(data_norm, "Strichartz data norm")?,
        ti,
    ))
}

/// Strichartz ratio `‖u‖_{L^p L^q} / data norm` on refined pairs. No constant
/// is asserted: the reference is the previous resolution's ratio and the
/// criterion is 5% stability.
pub fn strichartz_experiment(
    pairs: &[HankelPair],
    adm: &AdmissiblePair,
    position: Profile,
    velocity: Profile,
    grid: &TimeGrid,
) -> Result<EstimateReport> {
    let ctx = *finest(pairs)?.context();
    let runs = pairs
        .iter()
        .map(|pair| {
            let data = WaveDataPair::new(
                physical_field(pair, position)?,
                physical_field(pair, velocity)?,
            )?;
            let (lhs, rhs, ti) = strichartz_norms(pair, adm, &data, grid)?;
            Ok((lhs / rhs, ti))
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let (ratio, ti) = runs.last().expect("nonempty");
    let reference = if ratios.len() >= 2 {
        ratios[ratios.len() - 2]
    } else {
        f64::NAN
    };
    let tolerance = 0.05;
    let conv =
        Convergence::new("ratio", resolutions(pairs), ratios, tolerance).with_horizon(grid.t_max());
    let mut params = sector_params(&ctx);
    params.extend([
        ("p", adm.p),
        ("q", adm.q),
        ("gamma", adm.gamma),
        ("sigma", adm.sigma),
    ]);
    let name = match adm.equation {
        Equation::Schrodinger => "strichartz_schrodinger",
        Equation::Wave => "strichartz_wave",
    };
    let report = EstimateReport::new(
        name,
        &params,
        *ratio,
        reference,
        tolerance,
        Criterion::Relative,
        conv,
    );
    Ok(spacetime_diagnostics(report, ti, grid))
}

/// Hardy constant of a free sector: `1/λ` for `n ≥ 3`, 1 for `n = 2`, `l ≥ 1`.
pub fn hardy_constant(ctx: &HarmonicContext) -> Result<f64> {
    match (ctx.n(), ctx.l()) {
        (2, 0) => config("the n = 2 Hardy inequality needs l >= 1"),
        (2, _) => Ok(1.0),
        _ => Ok(1.0 / ctx.lambda()),
    }
}

/// `‖Ω^{−1} f‖ / ‖A_μ^{1/2} f‖` with the denominator computed as `‖Ω H_μ f‖` on
/// the spectral grid of a free-sector pair.
pub fn hardy_quotient(pair: &HankelPair, f: &SectorField) -> Result<f64> {
    let ctx = pair.context();
    if ctx.a() != 0.0 {
        return config("Hardy quotients are measured with a free-sector pair (a = 0)");
    }
    hardy_constant(ctx)?;
    let num = weighted_l2_norm(f, -1.0);
    let den = weighted_l2_norm(&pair.to_spectral(f)?, 1.0);
    if num == 0.0 || den == 0.0 {
        return config("Hardy quotient of a zero field");
    }
    Ok(num / den)
}

/// Hardy quotient on a log-periodic physical grid, computed in the variable
/// `x = ln r` so that nodes far below `1e-100` stay usable. The numerator is
/// `‖r^{n/2−1} f‖_{L²(dx)}`; the denominator applies the Mellin multiplier of
/// `e^{2t} J_ν(e^t)`, which sends `r^{n/2−1} f` to `ρ^{n/2+1} H_μ f`.
pub fn hardy_quotient_periodic(f: &SectorField) -> Result<f64> {
    let ctx = f.context();
    if ctx.a() != 0.0 {
        return config("Hardy quotients are measured in a free sector (a = 0)");
    }
    hardy_constant(ctx)?;
    let grid = f.grid();
    if grid.rule() != GridRule::Periodic || f.side() != Side::Physical {
        return config("periodic Hardy quotient needs a physical field on a periodic grid");
    }
    let (len, h, nu) = (grid.len(), grid.spacing(), ctx.nu());
    let power = ctx.n() as f64 / 2.0 - 1.0;
    let mut u: Vec<Complex64> = f
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| v * (power * (grid.log_start() + i as f64 * h)).exp())
        .collect();
    let num = u.iter().map(|z| z.norm_sqr()).sum::<f64>() * h;
    let mut planner = rustfft::FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut u);
    for (k, z) in u.iter_mut().enumerate() {
        let q = if k <= len / 2 {
            k as f64
        } else {
            k as f64 - len as f64
        };
        let omega = 2.0 * std::f64::consts::PI * q / (len as f64 * h);
        let log_m = Complex64::new(1.0, -omega) * std::f64::consts::LN_2
            + ln_gamma_complex(Complex64::new((nu + 2.0) / 2.0, -omega / 2.0))
            - ln_gamma_complex(Complex64::new(nu / 2.0, -omega / 2.0));
        *z *= log_m.exp() / len as f64;
    }
    planner.plan_fft_inverse(len).process(&mut u);
    let den = u.iter().map(|z| z.norm_sqr()).sum::<f64>() * h;
    if !(num > 0.0 && den > 0.0) {
        return config("Hardy quotient of a zero field");
    }
    Ok((num / den).sqrt())
}

/// `(C₁, C₂)` with `C₁ ‖f‖_{Ḣ^s} ≤ ‖P_a^{s/2} f‖ ≤ C₂ ‖f‖_{Ḣ^s}`: the `s = 1`
/// constants `min/max{ν₀/λ, 1}` (`1` and `1 + a` for `n = 2`), raised to the
/// power `s` as duality and interpolation give.
pub fn equivalence_constants(n: usize, a: f64, s: f64) -> Result<(f64, f64)> {
    if !(-1.0..=1.0).contains(&s) {
        return config(format!("norm equivalence needs s in [-1, 1], got {s}"));
    }
    let base = match n {
        0 | 1 => return config("norm equivalence needs n >= 2"),
        2 => {
            if !(a > -1.0) {
                return config("n = 2 norm equivalence needs a > -1");
            }
            1.0 + a
        }
        _ => {
            let lambda = (n as f64 - 2.0) / 2.0;
            if !(a + lambda * lambda > 0.0) {
                return config("norm equivalence needs a + λ² > 0");
            }
            (lambda * lambda + a).sqrt() / lambda
        }
    };
    let c = base.powf(s);
    Ok((c.min(1.0), c.max(1.0)))
}

/// Sector data for [`norm_equivalence_experiment`]: potential pairs and free
/// pairs on the same grids, coarse to fine.
pub struct EquivalenceRun<'a> {
    pub potential: &'a [HankelPair],
    pub free: &'a [HankelPair],
}

/// Slack allowed on the equivalence bounds.
pub const EQUIVALENCE_SLACK: f64 = 1e-8;

/// Per field and sector, `‖A_ν^{s/2} f‖ / ‖A_μ^{s/2} f‖` (both spectral) must lie in
/// `[C₁, C₂]`. The computed value is the violation count at the finest level;
/// refinement tracks the largest ratio. At `s = 1` the diagnostic
/// `s1_identity_defect` checks `‖A_ν^{1/2}f‖² = ‖A_μ^{1/2}f‖² + a‖f/r‖²`.
pub fn norm_equivalence_experiment(
    sectors: &[EquivalenceRun],
    s: f64,
    profiles: &[Profile],
) -> Result<EstimateReport> {
    let Some(first) = sectors.first() else {
        return config("at least one sector is required");
    };
    let base = *finest(first.potential)?.context();
    let (c1, c2) = equivalence_constants(base.n(), base.a(), s)?;
    let levels = first.potential.len();
    for run in sectors {
        let ctx = finest(run.potential)?.context();
        if run.potential.len() != levels || run.free.len() != levels {
            return config("sectors must supply the same number of resolutions");
        }
        if ctx.n() != base.n() || ctx.a() != base.a() {
            return config("sectors must share n and a");
        }
        if base.n() == 2 && ctx.l() == 0 {
            return config("n = 2 norm equivalence needs sectors l >= 1");
        }
        for (p, q) in run.potential.iter().zip(run.free) {
            if q.context().a() != 0.0
                || q.context().l() != p.context().l()
                || q.physical() != p.physical()
            {
                return config("free pairs must match the potential pairs' sector and grids");
            }
        }
    }
    let mut extremes = Vec::with_capacity(levels);
    let mut violations = 0usize;
    let mut identity_defect: f64 = 0.0;
    let mut lowest = f64::INFINITY;
    for level in 0..levels {
        let mut worst: f64 = 0.0;
        violations = 0;
        for run in sectors {
            let (pp, fp) = (&run.potential[level], &run.free[level]);
            for profile in profiles {
                let f = physical_field(pp, profile)?;
                let f_mu = f.clone().retag(*fp.context(), Side::Physical);
                let top = weighted_l2_norm(&pp.to_spectral(&f)?, s);
                let bottom = nonzero(weighted_l2_norm(&fp.to_spectral(&f_mu)?, s), "Ḣ^s norm")?;
                let ratio = top / bottom;
                if ratio < c1 * (1.0 - EQUIVALENCE_SLACK) || ratio > c2 * (1.0 + EQUIVALENCE_SLACK)
                {
                    violations += 1;
                }
                worst = worst.max(ratio);
                lowest = lowest.min(ratio);
                if s == 1.0 && level + 1 == levels {
                    let lhs = top * top;
                    let rhs = bottom * bottom + base.a() * weighted_l2_norm(&f, -1.0).powi(2);
                    identity_defect = identity_defect.max((lhs - rhs).abs() / lhs);
                }
            }
        }
        extremes.push(worst);
    }
    let conv = Convergence::new("max_ratio", resolutions(first.potential), extremes, 1e-6);
    let params = [
        ("n", base.n() as f64),
        ("a", base.a()),
        ("s", s),
        ("sectors", sectors.len() as f64),
    ];
    let mut report = EstimateReport::new(
        "norm_equivalence",
        &params,
        violations as f64,
        0.0,
        0.0,
        Criterion::Absolute,
        conv,
    )
    .diagnostic("c1", c1)
    .diagnostic("c2", c2)
    .diagnostic("min_ratio", lowest);
    if s == 1.0 {
        report = report.diagnostic("s1_identity_defect", identity_defect);
    }
    Ok(report)
}

/// `|‖A^{−1/2} g‖ − ‖A^{1/2} (A^{−1} g)‖| / ‖A^{−1/2} g‖`: the `s = −1` norm
/// directly and as the `s = 1` norm of the physical preimage `A^{−1} g`.
pub fn dual_norm_defect(pair: &HankelPair, g: &SectorField) -> Result<f64> {
    let direct = nonzero(weighted_l2_norm(&pair.to_spectral(g)?, -1.0), "Ḣ^{-1} norm")?;
    let preimage = pair.multiplier(g, |rho| Complex64::new(rho.powi(-2), 0.0))?;
    let via = weighted_l2_norm(&pair.to_spectral(&preimage)?, 1.0);
    Ok((direct - via).abs() / direct)
}
