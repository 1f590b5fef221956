//! Dyadic frequency localization on a sector: bumps `β_j`, the projections
//! `Δ_j = H_μ β_j H_μ` and `Π_k = H_ν β_k H_ν`, weighted sandwiches of them,
//! operator norms and fitted decay exponents.
//!
//! Everything lives on a log-periodic lattice in `x = ln r`, `y = ln ρ`, with
//! fields stored as `r^{n/2} f` (resp. `ρ^{n/2} H f`) so that the weighted
//! `L²` inner product is the Euclidean one. Hankel transforms are periodic
//! correlations applied by FFT.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{config, Error, Result};
use crate::estimates::{Convergence, Criterion, EstimateReport};
use crate::evolution::linear_fit;
use crate::hankel::{mellin_multiplier, periodic_kernel};
use crate::linalg::{power_norm, DenseMatrix, NormEstimate};
use crate::operator::{make_context, HarmonicContext};
use crate::profiles::chi;
use crate::quad::GaussRule;
use crate::radial::{GridRule, RadialGrid, Side};

/// Separations `|j − k|` used by every decay fit.
pub const FIT_WINDOW: (i32, i32) = (3, 8);
/// Allowance subtracted from each exponent bound.
pub const FIT_MARGIN: f64 = 0.3;
/// Fits below this coefficient of determination are unconverged.
pub const MIN_R2: f64 = 0.98;
/// Relative tolerance and iteration cap of the power iteration.
pub const NORM_TOL: f64 = 1e-8;
pub const NORM_MAX_ITER: usize = 20_000;

/// `β₀ = √(χ(x) − χ(2x))`, supported in `[1/2, 2]`.
pub fn beta0(x: f64) -> f64 {
    (chi(x) - chi(2.0 * x)).max(0.0).sqrt()
}

/// `β_j(x) = β₀(2^{−j} x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct DyadicBump {
    level: i32,
}

impl DyadicBump {
    pub fn new(level: i32) -> Self {
        Self { level }
    }
    pub fn level(&self) -> i32 {
        self.level
    }
    pub fn eval(&self, x: f64) -> f64 {
        beta0(x * 2f64.powi(-self.level))
    }
    /// `[2^{j−1}, 2^{j+1}]`.
    pub fn support(&self) -> (f64, f64) {
        (2f64.powi(self.level - 1), 2f64.powi(self.level + 1))
    }
}

/// Bumps `β_j` for `j_min ≤ j ≤ j_max`; `Σ β_j² = 1` on `[2^{j_min}, 2^{j_max}]`.
pub fn make_bump_family(j_min: i32, j_max: i32) -> Result<Vec<DyadicBump>> {
    if j_min > j_max {
        return config(format!(
            "empty bump family: j_min = {j_min} > j_max = {j_max}"
        ));
    }
    Ok((j_min..=j_max).map(DyadicBump::new).collect())
}

/// `Σ_j β_j(x)²` over a family.
pub fn partition_sum(family: &[DyadicBump], x: f64) -> f64 {
    family.iter().map(|b| b.eval(x).powi(2)).sum()
}

/// Periodic correlation `(C u)_m = Σ_i c_{(i+m) mod N} u_i`, applied by FFT.
#[derive(Clone)]
struct Correlator {
    kernel_hat: Vec<Complex64>,
}

/// Matched periodic grids in `ln r` and `ln ρ` with shared spacing.
#[derive(Clone)]
pub struct LogLattice {
    n: usize,
    physical: Arc<RadialGrid>,
    spectral: Arc<RadialGrid>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for LogLattice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogLattice")
            .field("n", &self.n)
            .field("len", &self.len())
            .field("h", &self.spacing())
            .field("x0", &self.physical.log_start())
            .field("y0", &self.spectral.log_start())
            .finish()
    }
}

impl LogLattice {
    /// Physical nodes `e^{x0 + i h}`, spectral nodes `e^{y0 + i h}`, `i < len` (odd).
    pub fn new(n: usize, x0: f64, y0: f64, h: f64, len: usize) -> Result<Self> {
        let physical = Arc::new(RadialGrid::periodic(n, x0, h, len)?);
        let spectral = Arc::new(RadialGrid::periodic(n, y0, h, len)?);
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            physical,
            spectral,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    /// Spectral lattice over `[ρ_lo e^{−margin}, ρ_hi e^{margin}]` and the
    /// reciprocal physical lattice, spacing at most `h`.
    pub fn covering(n: usize, rho_lo: f64, rho_hi: f64, margin: f64, h: f64) -> Result<Self> {
        if !(rho_lo > 0.0 && rho_hi > rho_lo && margin >= 0.0 && h > 0.0) {
            return config(format!(
                "lattice needs 0 < rho_lo < rho_hi, margin >= 0 and h > 0 (got [{rho_lo}, {rho_hi}], {margin}, {h})"
            ));
        }
        let y0 = rho_lo.ln() - margin;
        let span = rho_hi.ln() + margin - y0;
        let len = ((span / h).ceil() as usize) | 1;
        let h = span / len as f64;
        Self::new(n, -(y0 + span), y0, h, len)
    }

    /// Lattice for bands `j_min..=j_max`: `[2^{j_min−2}, 2^{j_max+2}]` plus margin.
    pub fn for_bands(n: usize, j_min: i32, j_max: i32, margin: f64, h: f64) -> Result<Self> {
        Self::covering(n, 2f64.powi(j_min - 2), 2f64.powi(j_max + 2), margin, h)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }
    pub fn len(&self) -> usize {
        self.physical.len()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn spacing(&self) -> f64 {
        self.physical.spacing()
    }
    pub fn physical(&self) -> &Arc<RadialGrid> {
        &self.physical
    }
    pub fn spectral(&self) -> &Arc<RadialGrid> {
        &self.spectral
    }
    pub fn grid(&self, side: Side) -> &Arc<RadialGrid> {
        match side {
            Side::Physical => &self.physical,
            Side::Spectral => &self.spectral,
        }
    }

    /// Correlation with the kernel of `r^{n/2−b} f ↦ ρ^{n/2+b} H_ν f`.
    fn correlator(&self, nu: f64, bias: f64) -> Correlator {
        let shift = self.physical.log_start() + self.spectral.log_start();
        let mut c: Vec<Complex64> = if bias == 0.0 {
            periodic_kernel(self.len(), self.spacing(), shift, |w| {
                let m = mellin_multiplier(nu, 0.0, w);
                m / m.norm()
            })
        } else {
            periodic_kernel(self.len(), self.spacing(), shift, |w| {
                mellin_multiplier(nu, bias, w)
            })
        }
        .into_iter()
        .map(|v| Complex64::new(v, 0.0))
        .collect();
        self.forward.process(&mut c);
        Correlator { kernel_hat: c }
    }

    /// Multiplier of the composition of two transforms (`first` applied
    /// first), smoothly cut off between half and full Nyquist. The exact
    /// multiplier tends to different limits at `ω → ±∞`; on a periodic lattice
    /// that jump would sit at the Nyquist frequency and leave a slowly decaying
    /// alternating tail.
    fn composite(&self, first: (f64, f64), second: (f64, f64)) -> Vec<Complex64> {
        let a = self.correlator(first.0, first.1);
        let b = self.correlator(second.0, second.1);
        let len = self.len();
        let nyquist = std::f64::consts::PI / self.spacing();
        (0..len)
            .map(|k| {
                let kk = if k <= len / 2 {
                    k as f64
                } else {
                    k as f64 - len as f64
                };
                let w = 2.0 * std::f64::consts::PI * kk / (len as f64 * self.spacing());
                b.kernel_hat[k] * a.kernel_hat[(len - k) % len] * chi(2.0 * w.abs() / nyquist)
                    / len as f64
            })
            .collect()
    }

    fn convolve(&self, m: &[Complex64], u: &[f64]) -> Vec<f64> {
        let mut hat: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut hat);
        hat.iter_mut().zip(m).for_each(|(h, m)| *h *= m);
        self.inverse.process(&mut hat);
        hat.into_iter().map(|z| z.re).collect()
    }

    fn correlate(&self, c: &Correlator, u: &[f64]) -> Vec<f64> {
        let len = self.len();
        let mut hat: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut hat);
        let mut out: Vec<Complex64> = (0..len)
            .map(|k| c.kernel_hat[k] * hat[(len - k) % len] / len as f64)
            .collect();
        self.inverse.process(&mut out);
        out.into_iter().map(|z| z.re).collect()
    }
}

/// One factor of a sandwich, applied right to left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    /// Hankel transform of order `ν` with bias `b`; switches side.
    Hankel { nu: f64, bias: f64 },
    /// Multiplication by `β_j` of the current variable (frequency on the
    /// spectral side, radius on the physical side).
    Bump(i32),
    /// Multiplication by `e^{p t}`, `t` the current log variable (`r^p` or `ρ^p`).
    Power(f64),
}

/// What a [`LocalizedOperator`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Descriptor {
    /// `Δ_j` (free order) or `Π_j` (potential order).
    Projection { j: i32, flavor: Flavor },
    /// `Ω^{−η} Δ_j Π_k Ω^{η}`; `η = 0` is `M_{jk}`.
    Mjk { j: i32, k: i32, eta: f64 },
    /// `N_{kj} = Π_k Δ_j`.
    Nkj { k: i32, j: i32 },
    /// `Ω^{ζ} Δ_j Ω^{−2} Δ_k Ω^{2−ζ}`.
    Jjk { j: i32, k: i32, zeta: f64 },
    /// `β₀ A_μ^{−1} β_m` with spatial cutoffs.
    Newtonian { m: i32 },
}

/// Which transform a projection uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// `Δ_j = H_μ β_j H_μ`.
    Laplacian,
    /// `Π_j = H_ν β_j H_ν`.
    Potential,
}

/// A composition of [`Step`]s starting on one side of a lattice.
#[derive(Debug, Clone)]
pub struct Sandwich {
    lattice: LogLattice,
    start: Side,
    steps: Vec<Step>,
}

impl Sandwich {
    /// `steps` are listed in application order.
    pub fn new(lattice: &LogLattice, start: Side, steps: Vec<Step>) -> Self {
        Self {
            lattice: lattice.clone(),
            start,
            steps,
        }
    }

    pub fn end_side(&self) -> Side {
        self.steps.iter().fold(self.start, |side, s| match s {
            Step::Hankel { .. } => side.flip(),
            _ => side,
        })
    }

    fn prepare(&self) -> Vec<Prepared> {
        let mut side = self.start;
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.steps.len() {
            let nodes = self.lattice.grid(side).nodes();
            match (self.steps[i], self.steps.get(i + 1).copied()) {
                (Step::Hankel { nu: n1, bias: b1 }, Some(Step::Hankel { nu: n2, bias: b2 })) => {
                    // Adjacent transforms compose to a log-convolution; an unbiased
                    // transform applied twice is the identity.
                    if !(n1 == n2 && b1 == 0.0 && b2 == 0.0) {
                        out.push(Prepared::Convolve(
                            self.lattice.composite((n1, b1), (n2, b2)),
                        ));
                    }
                    i += 2;
                    continue;
                }
                (Step::Hankel { nu, bias }, _) => {
                    side = side.flip();
                    out.push(Prepared::Correlate(self.lattice.correlator(nu, bias)));
                }
                (Step::Bump(j), _) => {
                    let b = DyadicBump::new(j);
                    out.push(Prepared::Scale(nodes.iter().map(|&x| b.eval(x)).collect()));
                }
                (Step::Power(p), _) => {
                    out.push(Prepared::Scale(nodes.iter().map(|&x| x.powf(p)).collect()))
                }
            }
            i += 1;
        }
        out
    }

    /// Applies the sandwich to lattice values.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.lattice.len() {
            return config("vector length does not match the lattice");
        }
        Ok(run(&self.lattice, &self.prepare(), u.to_vec()))
    }

    /// Dense block: rows `rows` of the output, columns `cols` of the input.
    pub fn matrix(&self, rows: &[usize], cols: &[usize]) -> Result<DenseMatrix> {
        let len = self.lattice.len();
        if rows.iter().chain(cols).any(|&i| i >= len) {
            return config("matrix index outside the lattice");
        }
        let prepared = self.prepare();
        let columns: Vec<Vec<f64>> = cols
            .par_iter()
            .map(|&c| {
                let mut e = vec![0.0; len];
                e[c] = 1.0;
                let out = run(&self.lattice, &prepared, e);
                rows.iter().map(|&r| out[r]).collect()
            })
            .collect();
        let m = DenseMatrix::from_fn(rows.len(), cols.len(), |i, j| columns[j][i]);
        if !m.is_finite() {
            return Err(Error::Resolution(
                "sandwich matrix has nonfinite entries".into(),
            ));
        }
        Ok(m)
    }
}

enum Prepared {
    Correlate(Correlator),
    Convolve(Vec<Complex64>),
    Scale(Vec<f64>),
}

fn run(lattice: &LogLattice, steps: &[Prepared], mut u: Vec<f64>) -> Vec<f64> {
    for s in steps {
        match s {
            Prepared::Correlate(c) => u = lattice.correlate(c, &u),
            Prepared::Convolve(m) => u = lattice.convolve(m, &u),
            Prepared::Scale(w) => u.iter_mut().zip(w).for_each(|(v, w)| *v *= w),
        }
    }
    u
}

/// Dense sandwich with its provenance. The matrix acts on `r^{n/2} f`
/// (resp. `ρ^{n/2} Hf`) restricted to the index sets `rows` and `cols`, so the
/// weighted `L²` operator norm is its spectral norm.
#[derive(Debug, Clone)]
pub struct LocalizedOperator {
    pub matrix: DenseMatrix,
    pub ctx: HarmonicContext,
    pub descriptor: Descriptor,
    pub side_in: Side,
    pub side_out: Side,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

/// Largest singular value by power iteration (tolerance [`NORM_TOL`]).
pub fn op_norm(t: &LocalizedOperator) -> Result<NormEstimate> {
    matrix_norm(&t.matrix)
}

/// [`op_norm`] of a bare matrix.
pub fn matrix_norm(m: &DenseMatrix) -> Result<NormEstimate> {
    power_norm(m, NORM_TOL, NORM_MAX_ITER)
}

/// Lattice indices whose node lies in `[lo, hi]`.
pub fn indices_within(grid: &RadialGrid, lo: f64, hi: f64) -> Vec<usize> {
    grid.nodes()
        .iter()
        .enumerate()
        .filter(|(_, &x)| x >= lo && x <= hi)
        .map(|(i, _)| i)
        .collect()
}

fn all_indices(lattice: &LogLattice) -> Vec<usize> {
    (0..lattice.len()).collect()
}

fn check_band(lattice: &LogLattice, j: i32) -> Result<()> {
    let (lo, hi) = DyadicBump::new(j).support();
    let g = lattice.spectral();
    if lo < g.r_min() * 2.0 || hi > g.r_max() / 2.0 {
        return Err(Error::Resolution(format!(
            "band j = {j} ([{lo}, {hi}]) is not interior to the spectral lattice [{}, {}]",
            g.r_min(),
            g.r_max()
        )));
    }
    Ok(())
}

fn hankel(nu: f64) -> Step {
    Step::Hankel { nu, bias: 0.0 }
}

/// `Δ_j` or `Π_j` as a dense physical operator on the whole lattice.
pub fn projection(
    ctx: &HarmonicContext,
    lattice: &LogLattice,
    j: i32,
    flavor: Flavor,
) -> Result<LocalizedOperator> {
    check_lattice(ctx, lattice)?;
    check_band(lattice, j)?;
    let order = match flavor {
        Flavor::Laplacian => ctx.mu(),
        Flavor::Potential => ctx.nu(),
    };
    let s = Sandwich::new(
        lattice,
        Side::Physical,
        vec![hankel(order), Step::Bump(j), hankel(order)],
    );
    let idx = all_indices(lattice);
    Ok(LocalizedOperator {
        matrix: s.matrix(&idx, &idx)?,
        ctx: *ctx,
        descriptor: Descriptor::Projection { j, flavor },
        side_in: Side::Physical,
        side_out: Side::Physical,
        rows: idx.clone(),
        cols: idx,
    })
}

fn check_lattice(ctx: &HarmonicContext, lattice: &LogLattice) -> Result<()> {
    if ctx.n() != lattice.dimension() {
        return config("lattice and context dimensions differ");
    }
    if lattice.physical().rule() != GridRule::Periodic {
        return config("localization needs a periodic lattice");
    }
    Ok(())
}

/// `M_{jk} = Δ_j Π_k`, through `β_j H_μ H_ν β_k` on the spectral side: the
/// block between the supports of `β_k` (columns) and `β_j` (rows).
pub fn mjk(
    ctx: &HarmonicContext,
    lattice: &LogLattice,
    j: i32,
    k: i32,
) -> Result<LocalizedOperator> {
    check_lattice(ctx, lattice)?;
    check_band(lattice, j)?;
    check_band(lattice, k)?;
    let s = Sandwich::new(
        lattice,
        Side::Spectral,
        vec![
            Step::Bump(k),
            hankel(ctx.nu()),
            hankel(ctx.mu()),
            Step::Bump(j),
        ],
    );
    let spec = lattice.spectral();
    let (rlo, rhi) = DyadicBump::new(j).support();
    let (clo, chi_) = DyadicBump::new(k).support();
    let rows = indices_within(spec, rlo, rhi);
    let cols = indices_within(spec, clo, chi_);
    Ok(LocalizedOperator {
        matrix: s.matrix(&rows, &cols)?,
        ctx: *ctx,
        descriptor: Descriptor::Mjk { j, k, eta: 0.0 },
        side_in: Side::Spectral,
        side_out: Side::Spectral,
        rows,
        cols,
    })
}

/// `N_{kj} = Π_k Δ_j`, the adjoint of [`mjk`], as `β_k H_ν H_μ β_j`.
pub fn nkj(
    ctx: &HarmonicContext,
    lattice: &LogLattice,
    k: i32,
    j: i32,
) -> Result<LocalizedOperator> {
    check_lattice(ctx, lattice)?;
    check_band(lattice, j)?;
    check_band(lattice, k)?;
    let s = Sandwich::new(
        lattice,
        Side::Spectral,
        vec![
            Step::Bump(j),
            hankel(ctx.mu()),
            hankel(ctx.nu()),
            Step::Bump(k),
        ],
    );
    let spec = lattice.spectral();
    let (rlo, rhi) = DyadicBump::new(k).support();
    let (clo, chi_) = DyadicBump::new(j).support();
    let rows = indices_within(spec, rlo, rhi);
    let cols = indices_within(spec, clo, chi_);
    Ok(LocalizedOperator {
        matrix: s.matrix(&rows, &cols)?,
        ctx: *ctx,
        descriptor: Descriptor::Nkj { k, j },
        side_in: Side::Spectral,
        side_out: Side::Spectral,
        rows,
        cols,
    })
}

/// `Ω^{−η} Δ_j Π_k Ω^{η}`, conjugated to the spectral side by `H_ν` on the
/// right and `H_μ` on the left (which preserves the norm). A weight next to a
/// transform is a biased transform, `H r^b = ρ^{−b} H^{(b)}` and
/// `r^b H = H^{(b)} ρ^{−b}`, so every power of `ρ` sits on a bump and the
/// unbounded `r^{±η}` never meets the lattice directly.
pub fn mjk_weighted(
    ctx: &HarmonicContext,
    lattice: &LogLattice,
    j: i32,
    k: i32,
    eta: f64,
) -> Result<LocalizedOperator> {
    check_lattice(ctx, lattice)?;
    check_band(lattice, j)?;
    check_band(lattice, k)?;
    let (mu, nu) = (ctx.mu(), ctx.nu());
    let steps = vec![
        hankel(nu),
        Step::Hankel { nu, bias: eta },
        Step::Power(-eta),
        Step::Bump(k),
        hankel(nu),
        hankel(mu),
        Step::Bump(j),
        Step::Power(eta),
        Step::Hankel { nu: mu, bias: -eta },
        hankel(mu),
    ];
    spectral_block(ctx, lattice, steps, Descriptor::Mjk { j, k, eta })
}

/// `Ω^{ζ} Δ_j Ω^{−2} Δ_k Ω^{2−ζ}` on a free sector, conjugated to the spectral
/// side by `H_μ`, with `H r^{−2} H = ρ H^{(−1)} H^{(−1)} ρ` in the middle.
pub fn jjk_weighted(
    ctx: &HarmonicContext,
    lattice: &LogLattice,
    j: i32,
    k: i32,
    zeta: f64,
) -> Result<LocalizedOperator> {
    check_lattice(ctx, lattice)?;
    check_band(lattice, j)?;
    check_band(lattice, k)?;
    let mu = ctx.mu();
    let steps = vec![
        hankel(mu),
        Step::Hankel {
            nu: mu,
            bias: 2.0 - zeta,
        },
        Step::Power(zeta - 2.0),
        Step::Bump(k),
        Step::Power(1.0),
        Step::Hankel { nu: mu, bias: -1.0 },
        Step::Hankel { nu: mu, bias: -1.0 },
        Step::Power(1.0),
        Step::Bump(j),
        Step::Power(-zeta),
        Step::Hankel { nu: mu, bias: zeta },
        hankel(mu),
    ];
    spectral_block(ctx, lattice, steps, Descriptor::Jjk { j, k, zeta })
}

fn spectral_block(
    ctx: &HarmonicContext,
    lattice: &LogLattice,
    steps: Vec<Step>,
    descriptor: Descriptor,
) -> Result<LocalizedOperator> {
    let idx = all_indices(lattice);
    let s = Sandwich::new(lattice, Side::Spectral, steps);
    Ok(LocalizedOperator {
        matrix: s.matrix(&idx, &idx)?,
        ctx: *ctx,
        descriptor,
        side_in: Side::Spectral,
        side_out: Side::Spectral,
        rows: idx.clone(),
        cols: idx,
    })
}

/// `β₀ A_μ^{−1} β_m` with `β` as radial cutoffs and `A_μ^{−1} = H_μ ρ^{−2} H_μ`.
/// Both transforms carry bias `−1`: the first maps `r^{n/2+1} f` to
/// `ρ^{n/2−1} H f = ρ^{n/2+1} (ρ^{−2} H f)`, which the second maps to
/// `r^{n/2−1} A^{−1} f`, so `ρ^{−2}` is absorbed by the change of weights.
pub fn newtonian_block(
    ctx: &HarmonicContext,
    lattice: &LogLattice,
    m: i32,
) -> Result<LocalizedOperator> {
    check_lattice(ctx, lattice)?;
    let mu = ctx.mu();
    let steps = vec![
        Step::Bump(m),
        Step::Power(1.0),
        Step::Hankel { nu: mu, bias: -1.0 },
        Step::Hankel { nu: mu, bias: -1.0 },
        Step::Power(1.0),
        Step::Bump(0),
    ];
    let phys = lattice.physical();
    for level in [0, m] {
        let (lo, hi) = DyadicBump::new(level).support();
        if lo < phys.r_min() * 2.0 || hi > phys.r_max() / 2.0 {
            return Err(Error::Resolution(format!(
                "cutoff β_{level} is not interior to the physical lattice"
            )));
        }
    }
    let (rlo, rhi) = DyadicBump::new(0).support();
    let (clo, chi_) = DyadicBump::new(m).support();
    let rows = indices_within(phys, rlo, rhi);
    let cols = indices_within(phys, clo, chi_);
    let s = Sandwich::new(lattice, Side::Physical, steps);
    Ok(LocalizedOperator {
        matrix: s.matrix(&rows, &cols)?,
        ctx: *ctx,
        descriptor: Descriptor::Newtonian { m },
        side_in: Side::Physical,
        side_out: Side::Physical,
        rows,
        cols,
    })
}

/// Closed form of `‖β₀ A_μ^{−1} β_m‖` for `|m| ≥ 2`: the Green kernel
/// `(rs)^{−λ} (r_</r_>)^μ / (2μ)` is rank one on disjoint supports.
pub fn newtonian_block_exact(ctx: &HarmonicContext, m: i32) -> Result<f64> {
    if m.abs() < 2 {
        return config("the rank-one form needs |m| >= 2");
    }
    let (mu, lambda, n) = (ctx.mu(), ctx.lambda(), ctx.n() as f64);
    // ∫ β_j(r)² r^{2p} r^{n−1} dr by Gauss–Legendre in ln r.
    let moment = |j: i32, p: f64| -> f64 {
        let (lo, hi) = DyadicBump::new(j).support();
        GaussRule::new(400).integrate(lo.ln(), hi.ln(), |x| {
            let r = x.exp();
            DyadicBump::new(j).eval(r).powi(2) * r.powf(2.0 * p + n)
        })
    };
    let (inner, outer) = if m > 0 {
        (mu - lambda, -mu - lambda)
    } else {
        (-mu - lambda, mu - lambda)
    };
    Ok((moment(0, inner) * moment(m, outer)).sqrt() / (2.0 * mu))
}

/// One measured norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormSample {
    pub j: i32,
    pub k: i32,
    pub separation: i32,
    pub norm: f64,
    pub log2_norm: f64,
}

/// Least-squares fit of `log₂ ‖·‖` against the separation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub samples: Vec<NormSample>,
    /// Minus the fitted slope.
    pub exponent: f64,
    pub intercept: f64,
    pub r2: f64,
    pub residuals: Vec<f64>,
}

/// Fits the envelope `max_{|j−k| = s} log₂ ‖·‖` against `s` for separations
/// inside [`FIT_WINDOW`] whose envelope lies above `floor`.
pub fn fit_decay(samples: Vec<NormSample>, floor: f64) -> Result<DecayFit> {
    let mut envelope: BTreeMap<i32, f64> = BTreeMap::new();
    for s in &samples {
        if s.separation >= FIT_WINDOW.0 && s.separation <= FIT_WINDOW.1 {
            let e = envelope.entry(s.separation).or_insert(0.0);
            *e = e.max(s.norm);
        }
    }
    envelope.retain(|_, v| *v > floor);
    if envelope.len() < 3 {
        return Err(Error::Estimation {
            message: format!(
                "only {} separations above the noise floor {floor:e}",
                envelope.len()
            ),
            residual: f64::NAN,
        });
    }
    let x: Vec<f64> = envelope.keys().map(|&s| s as f64).collect();
    let y: Vec<f64> = envelope.values().map(|v| v.log2()).collect();
    let (slope, intercept, r2) = linear_fit(&x, &y);
    let residuals = x
        .iter()
        .zip(&y)
        .map(|(x, y)| y - (slope * x + intercept))
        .collect();
    Ok(DecayFit {
        samples,
        exponent: -slope,
        intercept,
        r2,
        residuals,
    })
}

fn sample(j: i32, k: i32, norm: f64) -> NormSample {
    NormSample {
        j,
        k,
        separation: (j - k).abs(),
        norm,
        log2_norm: norm.log2(),
    }
}

/// Resolution of a localization experiment: lattice spacing and margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeSpec {
    pub h: f64,
    pub margin: f64,
}

impl LatticeSpec {
    /// Coarse and fine spacings used for refinement tracking.
    pub fn standard() -> [LatticeSpec; 2] {
        [
            LatticeSpec {
                h: 0.04,
                margin: 14.0,
            },
            LatticeSpec {
                h: 0.02,
                margin: 14.0,
            },
        ]
    }
}

/// Norms for one pair per orientation and separation in the fit window, each
/// centred in `j_range`; the sandwiches are dilation covariant, so the norm
/// depends on `j − k` alone up to lattice effects.
fn pair_norms(
    j_range: (i32, i32),
    norm_of: impl Fn(i32, i32) -> Result<f64> + Sync,
) -> Result<Vec<NormSample>> {
    let width = j_range.1 - j_range.0;
    let pairs: Vec<(i32, i32)> = (FIT_WINDOW.0..=FIT_WINDOW.1)
        .flat_map(|s| {
            let lo = j_range.0 + (width - s) / 2;
            [(lo, lo + s), (lo + s, lo)]
        })
        .collect();
    pairs
        .par_iter()
        .map(|&(j, k)| Ok(sample(j, k, norm_of(j, k)?)))
        .collect()
}

fn decay_report(
    name: &str,
    params: &[(&str, f64)],
    fits: Vec<(usize, DecayFit)>,
    bound: f64,
) -> (EstimateReport, DecayFit) {
    let resolutions = fits.iter().map(|(n, _)| *n).collect();
    let exps: Vec<f64> = fits.iter().map(|(_, f)| f.exponent).collect();
    let last = &fits.last().expect("at least one fit").1;
    let mut conv = Convergence::new("exponent", resolutions, exps, 0.05);
    if fits.iter().any(|(_, f)| f.r2 < MIN_R2) {
        conv.converged = false;
    }
    let worst_residual = last.residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let report = EstimateReport::new(
        name,
        params,
        last.exponent,
        bound,
        FIT_MARGIN,
        Criterion::AtLeast,
        conv,
    )
    .diagnostic("r2", last.r2)
    .diagnostic("max_residual", worst_residual)
    .diagnostic("samples", last.samples.len() as f64);
    (report, last.clone())
}

fn check_range(j_range: (i32, i32)) -> Result<()> {
    if j_range.1 - j_range.0 < FIT_WINDOW.1 {
        return config(format!(
            "j range [{}, {}] cannot realise separation {}",
            j_range.0, j_range.1, FIT_WINDOW.1
        ));
    }
    Ok(())
}

/// Fitted decay exponent of `‖Δ_j Π_k‖` against `min{μ, ν} + 1`.
pub fn mn_decay_experiment(
    ctx: &HarmonicContext,
    j_range: (i32, i32),
    specs: &[LatticeSpec],
) -> Result<(EstimateReport, DecayFit)> {
    check_range(j_range)?;
    if ctx.a() == 0.0 {
        return config("with a = 0 the cross terms vanish; there is no decay to fit");
    }
    let bound = ctx.mu().min(ctx.nu()) + 1.0;
    let fits = fit_specs(ctx.n(), j_range, specs, |lattice, j, k| {
        mjk(ctx, lattice, j, k)
    })?;
    let params = [("n", ctx.n() as f64), ("a", ctx.a()), ("l", ctx.l() as f64)];
    Ok(decay_report("mn_decay", &params, fits, bound))
}

fn fit_specs(
    n: usize,
    j_range: (i32, i32),
    specs: &[LatticeSpec],
    build: impl Fn(&LogLattice, i32, i32) -> Result<LocalizedOperator> + Sync,
) -> Result<Vec<(usize, DecayFit)>> {
    if specs.is_empty() {
        return config("at least one lattice spec is required");
    }
    specs
        .iter()
        .map(|spec| {
            let lattice = LogLattice::for_bands(n, j_range.0, j_range.1, spec.margin, spec.h)?;
            let samples = pair_norms(j_range, |j, k| Ok(op_norm(&build(&lattice, j, k)?)?.value))?;
            Ok((lattice.len(), fit_decay(samples, NOISE_FLOOR)?))
        })
        .collect()
}

/// Norms below this are treated as lattice noise in fits.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Fitted decay exponent of `‖Ω^{−η} Δ_j Π_k Ω^{η}‖` against
/// `min{μ, ν} + 1 − η`. At `η = 0` the matrices are those of
/// [`mn_decay_experiment`].
pub fn m_weighted_decay(
    ctx: &HarmonicContext,
    eta: f64,
    j_range: (i32, i32),
    specs: &[LatticeSpec],
) -> Result<(EstimateReport, DecayFit)> {
    if !(0.0..=2.0).contains(&eta) {
        return config(format!("eta must lie in [0, 2], got {eta}"));
    }
    check_range(j_range)?;
    let bound = ctx.mu().min(ctx.nu()) + 1.0 - eta;
    let fits = fit_specs(ctx.n(), j_range, specs, |lattice, j, k| {
        if eta == 0.0 {
            mjk(ctx, lattice, j, k)
        } else {
            mjk_weighted(ctx, lattice, j, k, eta)
        }
    })?;
    let params = [
        ("n", ctx.n() as f64),
        ("a", ctx.a()),
        ("l", ctx.l() as f64),
        ("eta", eta),
    ];
    Ok(decay_report("m_weighted_decay", &params, fits, bound))
}

/// Fitted decay exponent of `‖Ω^{ζ} Δ_j Ω^{−2} Δ_k Ω^{2−ζ}‖` on the free
/// sector `l = d` against `λ + d − |1 − ζ|`.
pub fn j_weighted_decay(
    n: usize,
    d: usize,
    zeta: f64,
    j_range: (i32, i32),
    specs: &[LatticeSpec],
) -> Result<(EstimateReport, DecayFit)> {
    if !(0.0..=2.0).contains(&zeta) {
        return config(format!("zeta must lie in [0, 2], got {zeta}"));
    }
    check_range(j_range)?;
    let ctx = make_context(n, 0.0, d)?;
    let bound = ctx.lambda() + d as f64 - (1.0 - zeta).abs();
    let fits = fit_specs(n, j_range, specs, |lattice, j, k| {
        jjk_weighted(&ctx, lattice, j, k, zeta)
    })?;
    let params = [("n", n as f64), ("d", d as f64), ("zeta", zeta)];
    Ok(decay_report("j_weighted_decay", &params, fits, bound))
}

/// `‖β₀ A_μ^{−1} β_m‖` on the free sector `l = d` of dimension `n`.
pub fn newtonian_block_norm(n: usize, d: usize, m: i32, h: f64) -> Result<f64> {
    let ctx = make_context(n, 0.0, d)?;
    if d < ctx.d0() {
        return config(format!("Newtonian blocks need d >= d0 = {}", ctx.d0()));
    }
    let reach = 2f64.powi(m.abs() + 1);
    let lattice = LogLattice::covering(n, 1.0 / (4.0 * reach), 4.0 * reach, 40.0 / ctx.mu(), h)?;
    Ok(op_norm(&newtonian_block(&ctx, &lattice, m)?)?.value)
}

/// Decay exponents of `‖β₀ A_μ^{−1} β_m‖` for `m ∈ [3, 8]` and
/// `m ∈ [−8, −3]` against `λ + d − 1` and `λ + d + 1`.
pub fn newtonian_decay_experiment(
    n: usize,
    d: usize,
    hs: &[f64],
) -> Result<[(EstimateReport, DecayFit); 2]> {
    let ctx = make_context(n, 0.0, d)?;
    let lam_d = ctx.lambda() + d as f64;
    let mut out = Vec::new();
    for (sign, bound, name) in [
        (1, lam_d - 1.0, "newtonian_decay_up"),
        (-1, lam_d + 1.0, "newtonian_decay_down"),
    ] {
        let mut fits = Vec::new();
        for &h in hs {
            let samples = (FIT_WINDOW.0..=FIT_WINDOW.1)
                .map(|s| {
                    let norm = newtonian_block_norm(n, d, sign * s, h)?;
                    Ok(NormSample {
                        j: 0,
                        k: sign * s,
                        separation: s,
                        norm,
                        log2_norm: norm.log2(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let len = LogLattice::covering(n, 1.0, 2.0, 0.0, h)?.len();
            fits.push((len, fit_decay(samples, 0.0)?));
        }
        let params = [("n", n as f64), ("d", d as f64), ("direction", sign as f64)];
        out.push(decay_report(name, &params, fits, bound));
    }
    let second = out.pop().expect("two directions");
    let first = out.pop().expect("two directions");
    Ok([first, second])
}

/// Writes `separation,j,k,log2_norm` rows.
pub fn write_decay_csv<W: Write>(out: W, fit: &DecayFit) -> Result<()> {
    let io = |e: csv::Error| Error::Config(format!("csv write failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["separation", "j", "k", "log2_norm"])
        .map_err(io)?;
    for s in &fit.samples {
        w.write_record([
            s.separation.to_string(),
            s.j.to_string(),
            s.k.to_string(),
            format!("{:.17e}", s.log2_norm),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Config(format!("csv write failed: {e}")))?;
    Ok(())
}
