//! Spectral propagators for the Schrödinger and wave equations on one
//! sector, the wave data reduction `h_±`, the pseudo-conformal operator and
//! the Kato–Jensen decay experiment.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{config, Result};
use crate::estimates::{Convergence, Criterion, EstimateReport};
use crate::hankel::HankelPair;
use crate::operator::apply_a;
use crate::radial::{apply_weight, log_derivative, weighted_l2_norm, SectorField, Side};

/// Times with composite-trapezoid weights for `∫ dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    weights: Vec<f64>,
}

impl TimeGrid {
    /// Strictly increasing finite times, at least two.
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return config("a time grid needs at least two times");
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return config("times must be finite and strictly increasing");
        }
        let last = times.len() - 1;
        let weights = (0..=last)
            .map(|k| {
                let lo = times[k.saturating_sub(1)];
                let hi = times[(k + 1).min(last)];
                0.5 * (hi - lo)
            })
            .collect();
        Ok(Self { times, weights })
    }

    /// `count` equally spaced times on `[t0, t1]`.
    pub fn linear(t0: f64, t1: f64, count: usize) -> Result<Self> {
        let steps = count.max(2) - 1;
        Self::new(
            (0..=steps)
                .map(|k| t0 + (t1 - t0) * k as f64 / steps as f64)
                .collect(),
        )
    }

    /// `count` geometrically spaced times on `[t0, t1]`, `0 < t0 < t1`.
    pub fn geometric(t0: f64, t1: f64, count: usize) -> Result<Self> {
        if !(t0 > 0.0) {
            return config("geometric time grids start at a positive time");
        }
        let steps = count.max(2) - 1;
        let q = (t1 / t0).ln();
        Self::new(
            (0..=steps)
                .map(|k| t0 * (q * k as f64 / steps as f64).exp())
                .collect(),
        )
    }

    /// `n_linear` steps on `[0, t_switch]`, then `n_geometric` geometric steps to `t_max`.
    pub fn hybrid(t_switch: f64, n_linear: usize, t_max: f64, n_geometric: usize) -> Result<Self> {
        if !(0.0 < t_switch && t_switch < t_max) || n_linear == 0 || n_geometric == 0 {
            return config("hybrid time grid needs 0 < t_switch < t_max and nonzero step counts");
        }
        let q = (t_max / t_switch).ln();
        let times = (0..=n_linear)
            .map(|k| t_switch * k as f64 / n_linear as f64)
            .chain((1..=n_geometric).map(|k| t_switch * (q * k as f64 / n_geometric as f64).exp()))
            .collect();
        Self::new(times)
    }

    /// The same grid with every time multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            times: self.times.iter().map(|t| t * factor).collect(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
    pub fn t_max(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Trapezoid sum of samples taken at the grid times.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Initial position and velocity for the wave equation.
#[derive(Debug, Clone)]
pub struct WaveDataPair {
    f: SectorField,
    g: SectorField,
}

impl WaveDataPair {
    pub fn new(f: SectorField, g: SectorField) -> Result<Self> {
        if f.context() != g.context() {
            return config("wave data must share a context");
        }
        if f.side() != Side::Physical || g.side() != Side::Physical {
            return config("wave data must be physical-side fields");
        }
        // Shares the grid check of `sub`.
        f.sub(&g)?;
        Ok(Self { f, g })
    }

    pub fn position(&self) -> &SectorField {
        &self.f
    }
    pub fn velocity(&self) -> &SectorField {
        &self.g
    }

    /// `(f, −g)`, the data of the time-reversed solution.
    pub fn reversed(&self) -> Self {
        Self {
            f: self.f.clone(),
            g: self.g.scale(Complex64::new(-1.0, 0.0)),
        }
    }
}

fn check_physical(f: &SectorField) -> Result<()> {
    if f.side() != Side::Physical {
        return config("evolution acts on physical-side fields");
    }
    Ok(())
}

/// Multiplies spectral samples pointwise by `m(ρ)`.
pub(crate) fn spectral_scale(g: &SectorField, m: impl Fn(f64) -> Complex64) -> SectorField {
    g.with_values(
        g.grid()
            .nodes()
            .iter()
            .zip(g.values())
            .map(|(&rho, v)| v * m(rho))
            .collect(),
    )
}

/// `e^{−itρ²}`.
pub(crate) fn schrodinger_phase(t: f64, rho: f64) -> Complex64 {
    Complex64::from_polar(1.0, -t * rho * rho)
}

/// `sin(tρ)/ρ`, by its series when `|tρ| < 1e−4`.
pub fn sinc_propagator(t: f64, rho: f64) -> f64 {
    let x = t * rho;
    if x.abs() < 1e-4 {
        t * (1.0 - x * x / 6.0)
    } else {
        x.sin() / rho
    }
}

/// `u(t) = H e^{−itΩ²} H f`.
pub fn schrodinger_evolve(pair: &HankelPair, f: &SectorField, t: f64) -> Result<SectorField> {
    check_physical(f)?;
    let hf = pair.to_spectral(f)?;
    pair.to_physical(&spectral_scale(&hf, |rho| schrodinger_phase(t, rho)))
}

/// [`schrodinger_evolve`] at many times, sharing one forward transform.
pub fn schrodinger_evolve_many(
    pair: &HankelPair,
    f: &SectorField,
    times: &[f64],
) -> Result<Vec<SectorField>> {
    check_physical(f)?;
    let hf = pair.to_spectral(f)?;
    times
        .par_iter()
        .map(|&t| pair.to_physical(&spectral_scale(&hf, |rho| schrodinger_phase(t, rho))))
        .collect()
}

/// `u(t) = H [cos(tΩ) H f + sin(tΩ)/Ω H g]`.
pub fn wave_evolve(pair: &HankelPair, data: &WaveDataPair, t: f64) -> Result<SectorField> {
    let hf = pair.to_spectral(&data.f)?;
    let hg = pair.to_spectral(&data.g)?;
    pair.to_physical(&wave_spectral(&hf, &hg, t))
}

/// `∂_t u(t) = H [−Ω sin(tΩ) H f + cos(tΩ) H g]`.
pub fn wave_velocity(pair: &HankelPair, data: &WaveDataPair, t: f64) -> Result<SectorField> {
    let hf = pair.to_spectral(&data.f)?;
    let hg = pair.to_spectral(&data.g)?;
    let values = hf
        .grid()
        .nodes()
        .iter()
        .zip(hf.values().iter().zip(hg.values()))
        .map(|(&rho, (a, b))| a * (-rho * (t * rho).sin()) + b * (t * rho).cos())
        .collect();
    pair.to_physical(&hf.with_values(values))
}

/// Spectral-side wave solution from spectral data.
pub(crate) fn wave_spectral(hf: &SectorField, hg: &SectorField, t: f64) -> SectorField {
    let values = hf
        .grid()
        .nodes()
        .iter()
        .zip(hf.values().iter().zip(hg.values()))
        .map(|(&rho, (a, b))| a * (t * rho).cos() + b * sinc_propagator(t, rho))
        .collect();
    hf.with_values(values)
}

/// `‖A^{1/2} u‖² + ‖∂_t u‖²` with `A^{1/2}` applied spectrally to the physical field.
pub fn wave_energy(pair: &HankelPair, u: &SectorField, ut: &SectorField) -> Result<f64> {
    let root = pair.multiplier(u, |rho| Complex64::new(rho, 0.0))?;
    Ok(root.norm().powi(2) + ut.norm().powi(2))
}

/// `h_± = ½(√Ω H f ± (i√Ω)^{−1} H g)` on the spectral grid.
pub fn h_plus_minus(pair: &HankelPair, data: &WaveDataPair) -> Result<(SectorField, SectorField)> {
    let hf = pair.to_spectral(&data.f)?;
    let hg = pair.to_spectral(&data.g)?;
    let half = |sign: f64| {
        let values = hf
            .grid()
            .nodes()
            .iter()
            .zip(hf.values().iter().zip(hg.values()))
            .map(|(&rho, (a, b))| {
                let s = rho.sqrt();
                (a * s + b * Complex64::new(0.0, -sign / s)) * 0.5
            })
            .collect();
        hf.with_values(values)
    };
    Ok((half(1.0), half(-1.0)))
}

/// `C u = (r²/4) u + it (r∂_r + n/2) u + t² A_ν u` at time `t`.
///
/// `r∂_r` is an eighth-order log-grid difference, so the outermost nodes
/// carry stencil error and are excluded by callers' masks.
pub fn pseudo_conformal_apply(pair: &HankelPair, u: &SectorField, t: f64) -> Result<SectorField> {
    check_physical(u)?;
    let grid = Arc::clone(u.grid());
    let half_n = grid.dimension() as f64 / 2.0;
    let du = log_derivative(u.values(), grid.spacing());
    let au = if t == 0.0 {
        u.scale(Complex64::new(0.0, 0.0))
    } else {
        apply_a(pair, u)?
    };
    let it = Complex64::new(0.0, t);
    let values = grid
        .nodes()
        .iter()
        .zip(u.values().iter().zip(du.iter().zip(au.values())))
        .map(|(&r, (v, (dv, av)))| v * (r * r / 4.0) + it * (dv + v * half_n) + av * (t * t))
        .collect();
    Ok(u.with_values(values))
}

/// Decay record of one Kato–Jensen run.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    /// `w(t) = ‖u(t)/r²‖`.
    pub weighted: Vec<f64>,
    /// `‖r² f‖`.
    pub data_norm: f64,
    /// `sup_t t² w(t) / ‖r² f‖`.
    pub sup_ratio: f64,
    /// Least-squares slope of `ln w` against `ln t` over the last decade of times.
    pub slope: f64,
}

/// Least-squares slope and intercept of `y` against `x`, with `R²`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    (slope, my - slope * mx, r2)
}

/// `w(t) = ‖u(t)/r²‖` along the Schrödinger flow, with its decay summary.
pub fn decay_curve(pair: &HankelPair, f: &SectorField, times: &TimeGrid) -> Result<DecayCurve> {
    check_physical(f)?;
    if pair.context().n() < 5 {
        return config("the Kato–Jensen estimate needs n >= 5");
    }
    let data_norm = weighted_l2_norm(f, 2.0);
    if !data_norm.is_finite() || data_norm == 0.0 {
        return config("‖r² f‖ must be finite and nonzero on the grid");
    }
    let us = schrodinger_evolve_many(pair, f, times.times())?;
    let weighted: Vec<f64> = us.iter().map(|u| apply_weight(u, -2.0).norm()).collect();
    let sup_ratio = times
        .times()
        .iter()
        .zip(&weighted)
        .map(|(t, w)| t * t * w / data_norm)
        .fold(0.0, f64::max);
    let t_max = times.t_max();
    let (lx, ly): (Vec<f64>, Vec<f64>) = times
        .times()
        .iter()
        .zip(&weighted)
        .filter(|(t, _)| **t >= t_max / 10.0 * (1.0 - 1e-12))
        .map(|(t, w)| (t.ln(), w.ln()))
        .unzip();
    if lx.len() < 2 {
        return config("the last time decade needs at least two samples");
    }
    let (slope, _, _) = linear_fit(&lx, &ly);
    Ok(DecayCurve {
        times: times.times().to_vec(),
        weighted,
        data_norm,
        sup_ratio,
        slope,
    })
}

/// Kato–Jensen decay `‖u(t)/r²‖ ≲ t^{−2} ‖r² f‖` on a sequence of refined pairs.
///
/// The report compares the fitted slope on the finest pair with −2 (absolute
/// tolerance 0.05) and tracks the sup ratio across pairs (5% stability).
pub fn kato_jensen_experiment(
    pairs: &[HankelPair],
    profile: &(dyn Fn(f64) -> f64 + Sync),
    times: &TimeGrid,
) -> Result<EstimateReport> {
    let Some(finest) = pairs.last() else {
        return config("at least one resolution is required");
    };
    let curves = pairs
        .iter()
        .map(|p| {
            let f = SectorField::from_real(
                *p.context(),
                Arc::clone(p.physical()),
                Side::Physical,
                profile,
            )?;
            decay_curve(p, &f, times)
        })
        .collect::<Result<Vec<_>>>()?;
    let fine = curves.last().expect("nonempty");
    let ctx = finest.context();
    let conv = Convergence::new(
        "sup_ratio",
        pairs.iter().map(|p| p.physical().len()).collect(),
        curves.iter().map(|c| c.sup_ratio).collect(),
        0.05,
    )
    .with_horizon(times.t_max());
    Ok(EstimateReport::new(
        "kato_jensen",
        &[
            ("n", ctx.n() as f64),
            ("a", ctx.a()),
            ("l", ctx.l() as f64),
            ("t_max", times.t_max()),
        ],
        fine.slope,
        -2.0,
        0.05,
        Criterion::Absolute,
        conv,
    )
    .diagnostic("sup_ratio", fine.sup_ratio)
    .diagnostic("data_norm", fine.data_norm))
}

/// Writes `t,r,re,im,abs` rows for each snapshot.
pub fn write_snapshots<W: Write>(out: W, snapshots: &[(f64, SectorField)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let io = |e: csv::Error| crate::Error::Resource(e.to_string());
    wtr.write_record(["t", "r", "re", "im", "abs"])
        .map_err(io)?;
    for (t, u) in snapshots {
        for (r, v) in u.grid().nodes().iter().zip(u.values()) {
            wtr.serialize((t, r, v.re, v.im, v.norm())).map_err(io)?;
        }
    }
    wtr.flush()
        .map_err(|e| crate::Error::Resource(e.to_string()))?;
    Ok(())
}
