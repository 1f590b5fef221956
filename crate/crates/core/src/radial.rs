//! Log-spaced radial grids, single-sector fields and the weights `Ω^s`.

use num_complex::Complex64;
use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{config, Error, Result};
use crate::operator::HarmonicContext;

/// Quadrature rule attached to a log-spaced grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridRule {
    /// Trapezoid in `x = ln r` with halved end weights.
    Trapezoid,
    /// Equal weights `h r^n`, the rule of the log-periodic transform.
    Periodic,
}

/// Nodes and weights realising `∫₀^∞ φ(r) r^{n−1} dr`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    n: usize,
    x0: f64,
    h: f64,
    rule: GridRule,
    r: Vec<f64>,
    w: Vec<f64>,
}

/// Log-spaced trapezoid grid on `[r_min, r_max]` with `len` nodes.
pub fn make_grid(n: usize, r_min: f64, r_max: f64, len: usize) -> Result<RadialGrid> {
    if n < 2 {
        return config(format!("dimension must be at least 2, got {n}"));
    }
    if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) {
        return config(format!("need 0 < r_min < r_max, got [{r_min}, {r_max}]"));
    }
    if len < 16 {
        return config(format!("grid needs at least 16 nodes, got {len}"));
    }
    let x0 = r_min.ln();
    let h = (r_max.ln() - x0) / (len - 1) as f64;
    Ok(RadialGrid::build(n, x0, h, len, GridRule::Trapezoid))
}

impl RadialGrid {
    /// Grid `r_i = e^{x0 + i h}` with the periodic rule; `len` must be odd.
    pub fn periodic(n: usize, x0: f64, h: f64, len: usize) -> Result<Self> {
        if n < 2 || len < 17 || len.is_multiple_of(2) || !(h > 0.0) || !x0.is_finite() {
            return config(format!(
                "periodic grid needs n >= 2, odd len >= 17 and h > 0 (n={n}, len={len}, h={h})"
            ));
        }
        Ok(Self::build(n, x0, h, len, GridRule::Periodic))
    }

    /// Periodic grid spanning `[r_min, r_max]` with `len` (odd) nodes.
    pub fn periodic_span(n: usize, r_min: f64, r_max: f64, len: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min) {
            return config(format!("need 0 < r_min < r_max, got [{r_min}, {r_max}]"));
        }
        let h = (r_max / r_min).ln() / (len.max(2) - 1) as f64;
        Self::periodic(n, r_min.ln(), h, len)
    }

    fn build(n: usize, x0: f64, h: f64, len: usize, rule: GridRule) -> Self {
        let r: Vec<f64> = (0..len).map(|i| (x0 + i as f64 * h).exp()).collect();
        let mut w: Vec<f64> = r.iter().map(|&ri| h * ri.powi(n as i32)).collect();
        if rule == GridRule::Trapezoid {
            w[0] *= 0.5;
            w[len - 1] *= 0.5;
        }
        Self {
            n,
            x0,
            h,
            rule,
            r,
            w,
        }
    }

    /// Same nodes scaled by `factor`, weights scaled by `factor^n`.
    pub fn dilate(&self, factor: f64) -> Self {
        let mut g = self.clone();
        g.x0 += factor.ln();
        let wf = factor.powi(self.n as i32);
        for (r, w) in g.r.iter_mut().zip(g.w.iter_mut()) {
            *r *= factor;
            *w *= wf;
        }
        g
    }

    pub fn dimension(&self) -> usize {
        self.n
    }
    pub fn len(&self) -> usize {
        self.r.len()
    }
    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
    pub fn nodes(&self) -> &[f64] {
        &self.r
    }
    pub fn weights(&self) -> &[f64] {
        &self.w
    }
    /// Spacing in `ln r`.
    pub fn spacing(&self) -> f64 {
        self.h
    }
    pub fn log_start(&self) -> f64 {
        self.x0
    }
    pub fn rule(&self) -> GridRule {
        self.rule
    }
    pub fn r_min(&self) -> f64 {
        self.r[0]
    }
    pub fn r_max(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    /// `Σ w_i φ(r_i)`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.w.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Boolean mask dropping `margin` nodes at each end.
    pub fn interior(&self, margin: usize) -> Vec<bool> {
        (0..self.len())
            .map(|i| i >= margin && i + margin < self.len())
            .collect()
    }
}

/// Which side of the Hankel transform a field lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Physical,
    Spectral,
}

impl Side {
    pub fn flip(self) -> Self {
        match self {
            Side::Physical => Side::Spectral,
            Side::Spectral => Side::Physical,
        }
    }
}

/// Complex radial profile of one spherical-harmonic sector.
#[derive(Debug, Clone)]
pub struct SectorField {
    ctx: HarmonicContext,
    grid: Arc<RadialGrid>,
    side: Side,
    values: Vec<Complex64>,
}

impl SectorField {
    pub fn new(
        ctx: HarmonicContext,
        grid: Arc<RadialGrid>,
        side: Side,
        values: Vec<Complex64>,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return config(format!(
                "field has {} samples but grid has {} nodes",
                values.len(),
                grid.len()
            ));
        }
        if ctx.n() != grid.dimension() {
            return config(format!(
                "context dimension {} differs from grid dimension {}",
                ctx.n(),
                grid.dimension()
            ));
        }
        Ok(Self {
            ctx,
            grid,
            side,
            values,
        })
    }

    pub fn from_fn(
        ctx: HarmonicContext,
        grid: Arc<RadialGrid>,
        side: Side,
        f: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(ctx, grid, side, values)
    }

    pub fn from_real(
        ctx: HarmonicContext,
        grid: Arc<RadialGrid>,
        side: Side,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        Self::from_fn(ctx, grid, side, |r| Complex64::new(f(r), 0.0))
    }

    pub fn zeros(ctx: HarmonicContext, grid: Arc<RadialGrid>, side: Side) -> Result<Self> {
        let len = grid.len();
        Self::new(ctx, grid, side, vec![Complex64::new(0.0, 0.0); len])
    }

    /// Field with the same context, grid and side but new samples.
    pub fn with_values(&self, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), self.values.len(), "sample count mismatch");
        Self {
            ctx: self.ctx,
            grid: Arc::clone(&self.grid),
            side: self.side,
            values,
        }
    }

    pub(crate) fn retag(mut self, ctx: HarmonicContext, side: Side) -> Self {
        self.ctx = ctx;
        self.side = side;
        self
    }

    pub fn context(&self) -> &HarmonicContext {
        &self.ctx
    }
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn side(&self) -> Side {
        self.side
    }
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check_compatible(&self, other: &SectorField) -> Result<()> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && *self.grid != *other.grid {
            return config("fields live on different grids");
        }
        if self.side != other.side {
            return config("fields live on different sides of the transform");
        }
        Ok(())
    }

    pub fn add(&self, other: &SectorField) -> Result<SectorField> {
        self.check_compatible(other)?;
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    pub fn sub(&self, other: &SectorField) -> Result<SectorField> {
        self.check_compatible(other)?;
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    pub fn scale(&self, c: Complex64) -> SectorField {
        self.with_values(self.values.iter().map(|v| v * c).collect())
    }

    /// `⟨self, other⟩ = Σ w_i conj(self_i) other_i`.
    pub fn inner(&self, other: &SectorField) -> Result<Complex64> {
        self.check_compatible(other)?;
        Ok(self
            .grid
            .weights()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(w, (a, b))| a.conj() * b * *w)
            .sum())
    }

    /// Plain weighted L² norm.
    pub fn norm(&self) -> f64 {
        weighted_l2_norm(self, 0.0)
    }

    /// L² norm restricted to nodes where `mask` is true.
    pub fn masked_norm(&self, mask: &[bool]) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .zip(mask)
            .filter(|(_, m)| **m)
            .map(|((w, v), _)| w * v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `(Σ w_i |f_i|^q)^{1/q}` for finite `q ≥ 1`.
    pub fn lq_norm(&self, q: f64) -> Result<f64> {
        if !(q >= 1.0 && q.is_finite()) {
            return config(format!("L^q norms need finite q >= 1, got {q}"));
        }
        let s: f64 = self
            .grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.norm().powf(q))
            .sum();
        Ok(s.powf(1.0 / q))
    }

    /// Relative L² distance `‖self − other‖ / ‖other‖`.
    pub fn rel_distance(&self, other: &SectorField) -> Result<f64> {
        let d = self.sub(other)?.norm();
        let base = other.norm();
        if base == 0.0 {
            return config("relative distance to a zero field");
        }
        Ok(d / base)
    }

    /// Writes `r,re,im` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Config(format!("csv write failed: {e}"));
        wtr.write_record(["r", "re", "im"]).map_err(io)?;
        for (r, v) in self.grid.nodes().iter().zip(&self.values) {
            wtr.write_record([
                format!("{r:.17e}"),
                format!("{:.17e}", v.re),
                format!("{:.17e}", v.im),
            ])
            .map_err(io)?;
        }
        wtr.flush()
            .map_err(|e| Error::Config(format!("csv flush failed: {e}")))?;
        Ok(())
    }

    /// Reads `r,re,im` rows; nodes must match `grid` to 1e-12 relative.
    pub fn read_csv<R: Read>(
        ctx: HarmonicContext,
        grid: Arc<RadialGrid>,
        side: Side,
        input: R,
    ) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut values = Vec::with_capacity(grid.len());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Config(format!("csv row {}: {e}", i + 2)))?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Config(format!("csv row {}: missing column {k}", i + 2)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("csv row {}: {e}", i + 2)))
            };
            let r = parse(0)?;
            let node = *grid.nodes().get(i).ok_or_else(|| {
                Error::Config(format!("csv has more rows than the grid ({})", grid.len()))
            })?;
            if ((r - node) / node).abs() > 1e-12 {
                return config(format!(
                    "csv row {}: r = {r} does not match node {node}",
                    i + 2
                ));
            }
            values.push(Complex64::new(parse(1)?, parse(2)?));
        }
        Self::new(ctx, grid, side, values)
    }
}

/// `‖Ω^s f‖ = (Σ w_i r_i^{2s} |f_i|²)^{1/2}`.
pub fn weighted_l2_norm(f: &SectorField, s: f64) -> f64 {
    f.grid
        .nodes()
        .iter()
        .zip(f.grid.weights())
        .zip(&f.values)
        .map(|((r, w), v)| w * r.powf(2.0 * s) * v.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Pointwise multiplication by `r^s`.
pub fn apply_weight(f: &SectorField, s: f64) -> SectorField {
    f.with_values(
        f.grid
            .nodes()
            .iter()
            .zip(&f.values)
            .map(|(r, v)| v * r.powf(s))
            .collect(),
    )
}

/// Central-difference weights for the first derivative, orders 2 to 8.
const D1: [&[f64]; 4] = [
    &[0.5],
    &[2.0 / 3.0, -1.0 / 12.0],
    &[3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0],
    &[4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0],
];

/// Central-difference weights for the second derivative (offsets 1..), orders 2 to 8.
const D2: [(f64, &[f64]); 4] = [
    (-2.0, &[1.0]),
    (-5.0 / 2.0, &[4.0 / 3.0, -1.0 / 12.0]),
    (-49.0 / 18.0, &[3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0]),
    (
        -205.0 / 72.0,
        &[8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0],
    ),
];

fn stencil_order(order: usize) -> usize {
    assert!(
        matches!(order, 2 | 4 | 6 | 8),
        "finite-difference order must be 2, 4, 6 or 8, got {order}"
    );
    order / 2
}

fn stencil_half_width(i: usize, len: usize, max: usize) -> usize {
    i.min(len - 1 - i).min(max)
}

/// `r ∂_r` on a log grid: eighth-order central differences in `ln r`,
/// dropping to lower order near the ends and to a one-sided stencil at them.
pub fn log_derivative(values: &[Complex64], h: f64) -> Vec<Complex64> {
    log_derivative_order(values, h, 8)
}

/// [`log_derivative`] with interior accuracy `order` (2, 4, 6 or 8).
pub fn log_derivative_order(values: &[Complex64], h: f64, order: usize) -> Vec<Complex64> {
    let max = stencil_order(order);
    let len = values.len();
    (0..len)
        .map(|i| {
            let k = stencil_half_width(i, len, max);
            if k == 0 {
                return if i == 0 {
                    (values[1] * 4.0 - values[0] * 3.0 - values[2]) / (2.0 * h)
                } else {
                    (values[len - 3] - values[len - 2] * 4.0 + values[len - 1] * 3.0) / (2.0 * h)
                };
            }
            let c = D1[k - 1];
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, cm) in c.iter().enumerate() {
                acc += (values[i + m + 1] - values[i - m - 1]) * *cm;
            }
            acc / h
        })
        .collect()
}

/// `(r ∂_r)²` on a log grid with the same stencil policy as [`log_derivative`].
pub fn log_second_derivative(values: &[Complex64], h: f64) -> Vec<Complex64> {
    log_second_derivative_order(values, h, 8)
}

/// [`log_second_derivative`] with interior accuracy `order` (2, 4, 6 or 8).
pub fn log_second_derivative_order(values: &[Complex64], h: f64, order: usize) -> Vec<Complex64> {
    let max = stencil_order(order);
    let len = values.len();
    (0..len)
        .map(|i| {
            let k = stencil_half_width(i, len, max).max(1);
            let (i, k) = if i == 0 {
                (1, 1)
            } else if i == len - 1 {
                (len - 2, 1)
            } else {
                (i, k)
            };
            let (c0, c) = D2[k - 1];
            let mut acc = values[i] * c0;
            for (m, cm) in c.iter().enumerate() {
                acc += (values[i + m + 1] + values[i - m - 1]) * *cm;
            }
            acc / (h * h)
        })
        .collect()
}
