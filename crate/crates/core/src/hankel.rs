//! Dense order-ν Hankel transforms on radial grids and their defect diagnostics.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{config, Result};
use crate::linalg::DenseMatrix;
use crate::operator::{fd_apply_a, HarmonicContext};
use crate::radial::{apply_weight, GridRule, RadialGrid, SectorField};
use crate::specfun::{ln_gamma_complex, BesselJ};

/// Largest grid length accepted when assembling a dense plan.
pub const MAX_PLAN_NODES: usize = 8192;

/// How the transform matrix was discretised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanKind {
    /// Trapezoid quadrature of the Bessel integral.
    Quadrature,
    /// Log-periodic discretisation; exactly orthogonal and involutive.
    LogPeriodic,
}

/// Transform from `grid_in` to `grid_out` for one context.
#[derive(Debug, Clone)]
pub struct HankelPlan {
    ctx: HarmonicContext,
    kind: PlanKind,
    grid_in: Arc<RadialGrid>,
    grid_out: Arc<RadialGrid>,
    matrix: DenseMatrix,
}

fn check_grids(ctx: &HarmonicContext, grid_in: &RadialGrid, grid_out: &RadialGrid) -> Result<()> {
    if grid_in.dimension() != grid_out.dimension() || grid_in.dimension() != ctx.n() {
        return config(format!(
            "grid dimensions {} and {} do not match context dimension {}",
            grid_in.dimension(),
            grid_out.dimension(),
            ctx.n()
        ));
    }
    let largest = grid_in.len().max(grid_out.len());
    if largest > MAX_PLAN_NODES {
        return Err(crate::Error::Resource(format!(
            "dense plan with {largest} nodes exceeds the cap of {MAX_PLAN_NODES}"
        )));
    }
    Ok(())
}

/// Quadrature plan `M[i][j] = (r_j ρ_i)^{−λ} J_ν(r_j ρ_i) w_j`.
pub fn make_plan(
    ctx: HarmonicContext,
    grid_in: Arc<RadialGrid>,
    grid_out: Arc<RadialGrid>,
) -> Result<HankelPlan> {
    check_grids(&ctx, &grid_in, &grid_out)?;
    let bessel = BesselJ::new(ctx.nu())?;
    let lambda = ctx.lambda();
    let (r, w) = (grid_in.nodes(), grid_in.weights());
    let rho = grid_out.nodes();
    let matrix = DenseMatrix::from_fn(rho.len(), r.len(), |i, j| {
        let x = r[j] * rho[i];
        x.powf(-lambda) * bessel.eval(x) * w[j]
    });
    Ok(HankelPlan {
        ctx,
        kind: PlanKind::Quadrature,
        grid_in,
        grid_out,
        matrix,
    })
}

/// Log-periodic plan between two periodic grids of equal length and spacing.
///
/// The kernel `e^t J_ν(e^t)` is convolved in `t = ln r + ln ρ` using its exact
/// Fourier transform sampled on the periodic frequency lattice, so the matrix
/// is orthogonal in the grid inner products and squares to the identity.
pub fn make_log_periodic_plan(
    ctx: HarmonicContext,
    grid_in: Arc<RadialGrid>,
    grid_out: Arc<RadialGrid>,
) -> Result<HankelPlan> {
    check_grids(&ctx, &grid_in, &grid_out)?;
    if grid_in.rule() != GridRule::Periodic || grid_out.rule() != GridRule::Periodic {
        return config("log-periodic plans need periodic grids");
    }
    let len = grid_in.len();
    let h = grid_in.spacing();
    if grid_out.len() != len || (grid_out.spacing() - h).abs() > 1e-12 * h {
        return config("log-periodic plans need grids of equal length and spacing");
    }
    let coeffs =
        log_periodic_coefficients(ctx.nu(), h, grid_in.log_start() + grid_out.log_start(), len);
    let half_n = ctx.n() as f64 / 2.0;
    let r_pow: Vec<f64> = grid_in.nodes().iter().map(|r| r.powf(half_n)).collect();
    let rho_pow: Vec<f64> = grid_out.nodes().iter().map(|p| p.powf(-half_n)).collect();
    let matrix = DenseMatrix::from_fn(len, len, |m, i| {
        rho_pow[m] * coeffs[(i + m) % len] * r_pow[i]
    });
    Ok(HankelPlan {
        ctx,
        kind: PlanKind::LogPeriodic,
        grid_in,
        grid_out,
        matrix,
    })
}

/// Real sequence `c_s = h K(shift + s h)` periodised, from the multiplier
/// `2^{iω} Γ((ν+1+iω)/2) / Γ((ν+1−iω)/2)`.
fn log_periodic_coefficients(nu: f64, h: f64, shift: f64, len: usize) -> Vec<f64> {
    periodic_kernel(len, h, shift, |omega| {
        let lg = ln_gamma_complex(Complex64::new((nu + 1.0) / 2.0, omega / 2.0));
        Complex64::from_polar(1.0, omega * std::f64::consts::LN_2 + 2.0 * lg.im)
    })
}

/// `∫ J_ν(z) z^{b+iω} dz = 2^{b+iω} Γ((ν+1+b+iω)/2) / Γ((ν+1−b−iω)/2)`: the
/// Fourier transform (`e^{+iωt}`) of the kernel `e^{(1+b)t} J_ν(e^t)` that maps
/// `r^{n/2−b} f` to `ρ^{n/2+b} H_ν f` in the variables `ln r`, `ln ρ`.
pub fn mellin_multiplier(nu: f64, bias: f64, omega: f64) -> Complex64 {
    let log = Complex64::new(bias, omega) * std::f64::consts::LN_2
        + ln_gamma_complex(Complex64::new((nu + 1.0 + bias) / 2.0, omega / 2.0))
        - ln_gamma_complex(Complex64::new((nu + 1.0 - bias) / 2.0, -omega / 2.0));
    log.exp()
}

/// Samples `c_s = h k(shift + s h)`, `s = 0..len`, of the periodised kernel whose
/// Fourier transform (`e^{+iωt}`) is `m(ω)`, on the lattice `ω_q = 2πq/(len h)`.
pub fn periodic_kernel(len: usize, h: f64, shift: f64, m: impl Fn(f64) -> Complex64) -> Vec<f64> {
    let mut spectrum: Vec<Complex64> = (0..len)
        .map(|k| {
            let q = if k <= len / 2 {
                k as f64
            } else {
                k as f64 - len as f64
            };
            let omega = 2.0 * PI * q / (len as f64 * h);
            m(omega) * Complex64::from_polar(1.0, -omega * shift)
        })
        .collect();
    FftPlanner::new()
        .plan_fft_forward(len)
        .process(&mut spectrum);
    spectrum.iter().map(|c| c.re / len as f64).collect()
}

impl HankelPlan {
    pub fn context(&self) -> &HarmonicContext {
        &self.ctx
    }
    pub fn kind(&self) -> PlanKind {
        self.kind
    }
    pub fn grid_in(&self) -> &Arc<RadialGrid> {
        &self.grid_in
    }
    pub fn grid_out(&self) -> &Arc<RadialGrid> {
        &self.grid_out
    }
    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    /// Applies the transform; the result lives on `grid_out`, opposite side.
    pub fn apply(&self, f: &SectorField) -> Result<SectorField> {
        if **f.grid() != *self.grid_in {
            return config("field is not sampled on the plan's input grid");
        }
        if f.context().n() != self.ctx.n() {
            return config("field and plan have different dimensions");
        }
        let values = self.matrix.mul_complex(f.values());
        SectorField::new(
            self.ctx,
            Arc::clone(&self.grid_out),
            f.side().flip(),
            values,
        )
    }
}

/// Free-function form of [`HankelPlan::apply`].
pub fn hankel_apply(plan: &HankelPlan, f: &SectorField) -> Result<SectorField> {
    plan.apply(f)
}

/// A transform and its inverse between a physical and a spectral grid.
#[derive(Debug, Clone)]
pub struct HankelPair {
    forward: Arc<HankelPlan>,
    backward: Arc<HankelPlan>,
}

impl HankelPair {
    /// Quadrature pair; when both grids coincide the same matrix serves both ways.
    pub fn quadrature(
        ctx: HarmonicContext,
        physical: Arc<RadialGrid>,
        spectral: Arc<RadialGrid>,
    ) -> Result<Self> {
        let forward = Arc::new(make_plan(
            ctx,
            Arc::clone(&physical),
            Arc::clone(&spectral),
        )?);
        let backward = if *physical == *spectral {
            Arc::clone(&forward)
        } else {
            Arc::new(make_plan(ctx, spectral, physical)?)
        };
        Ok(Self { forward, backward })
    }

    /// Quadrature pair on a single grid.
    pub fn symmetric(ctx: HarmonicContext, grid: Arc<RadialGrid>) -> Result<Self> {
        Self::quadrature(ctx, Arc::clone(&grid), grid)
    }

    /// Log-periodic pair between two periodic grids.
    pub fn log_periodic(
        ctx: HarmonicContext,
        physical: Arc<RadialGrid>,
        spectral: Arc<RadialGrid>,
    ) -> Result<Self> {
        let forward = Arc::new(make_log_periodic_plan(
            ctx,
            Arc::clone(&physical),
            Arc::clone(&spectral),
        )?);
        let backward = if *physical == *spectral {
            Arc::clone(&forward)
        } else {
            Arc::new(make_log_periodic_plan(ctx, spectral, physical)?)
        };
        Ok(Self { forward, backward })
    }

    pub fn context(&self) -> &HarmonicContext {
        self.forward.context()
    }
    pub fn physical(&self) -> &Arc<RadialGrid> {
        self.forward.grid_in()
    }
    pub fn spectral(&self) -> &Arc<RadialGrid> {
        self.forward.grid_out()
    }
    pub fn forward(&self) -> &HankelPlan {
        &self.forward
    }
    pub fn backward(&self) -> &HankelPlan {
        &self.backward
    }

    /// Physical to spectral.
    pub fn to_spectral(&self, f: &SectorField) -> Result<SectorField> {
        self.forward.apply(f)
    }

    /// Spectral to physical.
    pub fn to_physical(&self, g: &SectorField) -> Result<SectorField> {
        self.backward.apply(g)
    }

    /// `H m(Ω) H f` for a spectral multiplier `m(ρ)`.
    pub fn multiplier(&self, f: &SectorField, m: impl Fn(f64) -> Complex64) -> Result<SectorField> {
        let g = self.to_spectral(f)?;
        let scaled: Vec<Complex64> = g
            .grid()
            .nodes()
            .iter()
            .zip(g.values())
            .map(|(&rho, v)| v * m(rho))
            .collect();
        self.to_physical(&g.with_values(scaled))
    }
}

fn nonzero_norm(f: &SectorField) -> Result<f64> {
    let n = f.norm();
    if n == 0.0 {
        return config("defect of the zero field is undefined");
    }
    Ok(n)
}

/// `| ‖H f‖ − ‖f‖ | / ‖f‖`.
pub fn isometry_defect(plan: &HankelPlan, f: &SectorField) -> Result<f64> {
    let nf = nonzero_norm(f)?;
    Ok((plan.apply(f)?.norm() - nf).abs() / nf)
}

/// `‖H H f − f‖ / ‖f‖` through the forward and backward plans.
pub fn involution_defect(pair: &HankelPair, f: &SectorField) -> Result<f64> {
    let nf = nonzero_norm(f)?;
    let back = pair.to_physical(&pair.to_spectral(f)?)?;
    Ok(back.sub(f)?.norm() / nf)
}

/// `|⟨H f, g⟩ − ⟨f, H g⟩| / (‖f‖ ‖g‖)` for a plan whose grids coincide.
pub fn self_adjointness_defect(plan: &HankelPlan, f: &SectorField, g: &SectorField) -> Result<f64> {
    if *plan.grid_in != *plan.grid_out {
        return config("self-adjointness needs matching input and output grids");
    }
    let scale = nonzero_norm(f)? * nonzero_norm(g)?;
    let hf = plan.apply(f)?.retag(*f.context(), f.side());
    let hg = plan.apply(g)?.retag(*g.context(), g.side());
    Ok((hf.inner(g)? - f.inner(&hg)?).norm() / scale)
}

/// `‖H(A f) − Ω² H f‖ / ‖A f‖` with `A` from finite differences of the given order.
pub fn diagonalization_defect(plan: &HankelPlan, f: &SectorField, order: usize) -> Result<f64> {
    let af = fd_apply_a(plan.context(), f, order)?;
    let lhs = plan.apply(&af)?;
    let rhs = apply_weight(&plan.apply(f)?, 2.0);
    Ok(lhs.sub(&rhs)?.norm() / nonzero_norm(&af)?)
}
