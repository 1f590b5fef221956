//! Gamma, Bessel J of real order and the Gauss hypergeometric function.
//!
//! Everything here works in `f64`. Gamma ratios are formed from logarithms so
//! that prefactors like `Γ(ν+σ/2+1)/Γ(ν+1)` never overflow.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

/// Largest argument accepted by [`hyp2f1`].
pub const Z_MAX: f64 = 0.75;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `ζ(k) − 1` for `k = 2..=41`.
#[allow(clippy::excessive_precision)]
const ZETA_M1: [f64; 40] = [
    0.644_934_066_848_226_4,
    0.202_056_903_159_594_3,
    0.082_323_233_711_138_19,
    0.036_927_755_143_369_93,
    0.017_343_061_984_449_14,
    0.008_349_277_381_922_827,
    0.004_077_356_197_944_339,
    0.002_008_392_826_082_214,
    9.945_751_278_180_853e-4,
    4.941_886_041_194_646e-4,
    2.460_865_533_080_483e-4,
    1.227_133_475_784_891e-4,
    6.124_813_505_870_483e-5,
    3.058_823_630_702_049e-5,
    1.528_225_940_865_187e-5,
    7.637_197_637_899_762e-6,
    3.817_293_264_999_840e-6,
    1.908_212_716_553_939e-6,
    9.539_620_338_727_961e-7,
    4.769_329_867_878_065e-7,
    2.384_505_027_277_330e-7,
    1.192_199_259_653_111e-7,
    5.960_818_905_125_948e-8,
    2.980_350_351_465_228e-8,
    1.490_155_482_836_504e-8,
    7.450_711_789_835_429e-9,
    3.725_334_024_788_457e-9,
    1.862_659_723_513_049e-9,
    9.313_274_324_196_682e-10,
    4.656_629_065_033_784e-10,
    2.328_311_833_676_505e-10,
    1.164_155_017_270_052e-10,
    5.820_772_087_902_701e-11,
    2.910_385_044_497_100e-11,
    1.455_192_189_104_198e-11,
    7.275_959_835_057_481e-12,
    3.637_979_547_378_651e-12,
    1.818_989_650_307_066e-12,
    9.094_947_840_263_889e-13,
    4.547_473_783_042_154e-13,
];

/// Bernoulli coefficients `B_{2k} / (2k(2k−1))` of the Stirling series.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// A value together with a bound on its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecialValue {
    pub value: f64,
    pub abs_error_bound: f64,
}

/// `ln Γ(1+z)` for `|z| ≤ 1/2`.
fn ln_gamma_1p(z: f64) -> f64 {
    let mut sum = -z.ln_1p() + z * (1.0 - EULER_GAMMA);
    let mut zk = -z;
    for (i, zm1) in ZETA_M1.iter().enumerate() {
        zk *= -z;
        let k = (i + 2) as f64;
        let term = zm1 * zk / k;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn stirling_tail(y: f64) -> f64 {
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let mut pow = inv;
    let mut s = 0.0;
    for c in STIRLING {
        s += c * pow;
        pow *= inv2;
    }
    s
}

/// Natural logarithm of `Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!(
            "log_gamma needs a positive finite argument, got {x}"
        ));
    }
    Ok(log_gamma_pos(x))
}

fn log_gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        ln_gamma_1p(x) - x.ln()
    } else if x <= 1.5 {
        ln_gamma_1p(x - 1.0)
    } else if x <= 2.5 {
        let z = x - 2.0;
        z.ln_1p() + ln_gamma_1p(z)
    } else if x < 10.0 {
        let mut y = x;
        let mut prod = 1.0;
        while y < 10.0 {
            prod *= y;
            y += 1.0;
        }
        (y - 0.5) * y.ln() - y + HALF_LN_2PI + stirling_tail(y) - prod.ln()
    } else {
        (x - 0.5) * x.ln() - x + HALF_LN_2PI + stirling_tail(x)
    }
}

/// `sin(πx)` with exact zeros at the integers.
fn sin_pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    if r == 0.0 || r == 1.0 {
        return 0.0;
    }
    if r < 0.5 {
        (PI * r).sin()
    } else if r < 1.5 {
        -(PI * (r - 1.0)).sin()
    } else {
        (PI * (r - 2.0)).sin()
    }
}

/// `(ln|Γ(x)|, sign Γ(x))` for any real `x` that is not a pole.
pub fn gamma_ln_sign(x: f64) -> Result<(f64, f64)> {
    if !x.is_finite() {
        return domain(format!("gamma of non-finite argument {x}"));
    }
    if x > 0.0 {
        return Ok((log_gamma_pos(x), 1.0));
    }
    if x == x.floor() {
        return domain(format!("gamma has a pole at {x}"));
    }
    let s = sin_pi(x);
    let ln = PI.ln() - s.abs().ln() - log_gamma_pos(1.0 - x);
    Ok((ln, s.signum()))
}

/// `Γ(x)` for real non-pole `x`; may overflow to infinity for large `x`.
pub fn gamma(x: f64) -> Result<f64> {
    let (ln, sign) = gamma_ln_sign(x)?;
    Ok(sign * ln.exp())
}

/// `1/Γ(x)`, which is zero at the poles.
pub fn inv_gamma(x: f64) -> f64 {
    match gamma_ln_sign(x) {
        Ok((ln, sign)) => sign * (-ln).exp(),
        Err(_) => 0.0,
    }
}

/// Principal `ln Γ(z)` for `Re z > 0`.
pub fn ln_gamma_complex(z: Complex64) -> Complex64 {
    let mut y = z;
    let mut shift = Complex64::new(0.0, 0.0);
    while y.norm() < 15.0 {
        shift += y.ln();
        y += 1.0;
    }
    let inv = y.inv();
    let inv2 = inv * inv;
    let mut pow = inv;
    let mut tail = Complex64::new(0.0, 0.0);
    for c in STIRLING {
        tail += pow * c;
        pow *= inv2;
    }
    (y - 0.5) * y.ln() - y + HALF_LN_2PI + tail - shift
}

/// Threshold between the ascending series and the asymptotic expansion.
const BESSEL_SERIES_MAX: f64 = 15.0;

/// Bessel function `J_ν` of a fixed real order, with cached order data.
#[derive(Debug, Clone, Copy)]
pub struct BesselJ {
    order: f64,
    ln_gamma_order1: f64,
    base: f64,
    steps: usize,
}

impl BesselJ {
    pub fn new(order: f64) -> Result<Self> {
        if !(order >= 0.0) || !order.is_finite() {
            return domain(format!("Bessel order must be non-negative, got {order}"));
        }
        let steps = order.floor() as usize;
        Ok(Self {
            order,
            ln_gamma_order1: log_gamma_pos(order + 1.0),
            base: order - steps as f64,
            steps,
        })
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    /// `J_ν(x)` for `x ≥ 0`; NaN for negative input.
    pub fn eval(&self, x: f64) -> f64 {
        if !(x >= 0.0) {
            return f64::NAN;
        }
        if x == 0.0 {
            return if self.order == 0.0 { 1.0 } else { 0.0 };
        }
        if x <= BESSEL_SERIES_MAX {
            return self.series(x);
        }
        let j0 = hankel_asymptotic(self.base, x);
        if self.steps == 0 {
            return j0;
        }
        let j1 = hankel_asymptotic(self.base + 1.0, x);
        let reach = self.steps.min(x.floor() as usize).max(1);
        let (mut prev, mut cur) = (j0, j1);
        for k in 1..reach {
            let next = 2.0 * (self.base + k as f64) / x * cur - prev;
            prev = cur;
            cur = next;
        }
        if reach == self.steps {
            return cur;
        }
        self.miller(x, reach, prev, cur)
    }

    fn series(&self, x: f64) -> f64 {
        let half = 0.5 * x;
        let mut term = (self.order * half.ln() - self.ln_gamma_order1).exp();
        let q = -half * half;
        let mut sum = term;
        let mut m = 1.0;
        loop {
            term *= q / (m * (self.order + m));
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() && m > half {
                break;
            }
            if m > 500.0 {
                break;
            }
            m += 1.0;
        }
        sum
    }

    /// Downward recurrence from far above the order, normalised at orders
    /// `base + reach − 1` and `base + reach` where upward values are reliable.
    fn miller(&self, x: f64, reach: usize, j_lo: f64, j_hi: f64) -> f64 {
        let top = self.steps + 60;
        let mut upper = 0.0_f64;
        let mut cur = 1e-30_f64;
        let mut at_order = 0.0;
        let mut at_hi = 0.0;
        let mut at_lo = 0.0;
        let mut k = top;
        while k >= reach {
            if k == self.steps {
                at_order = cur;
            }
            if k == reach {
                at_hi = cur;
            }
            let lower = 2.0 * (self.base + k as f64) / x * cur - upper;
            upper = cur;
            cur = lower;
            if k == reach {
                at_lo = cur;
            }
            if cur.abs() > 1e200 {
                cur *= 1e-200;
                upper *= 1e-200;
                at_order *= 1e-200;
                at_hi *= 1e-200;
                at_lo *= 1e-200;
            }
            k -= 1;
        }
        let scale = (at_hi * j_hi + at_lo * j_lo) / (at_hi * at_hi + at_lo * at_lo);
        at_order * scale
    }
}

/// Hankel's large-argument expansion of `J_ν(x)`.
fn hankel_asymptotic(order: f64, x: f64) -> f64 {
    let mu = 4.0 * order * order;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        let mag = term.abs();
        if mag > last {
            break;
        }
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 1 {
            q += sign * term;
        } else {
            p += sign * term;
        }
        if mag < 1e-17 {
            break;
        }
        last = mag;
    }
    let chi = x - (0.5 * order + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// `J_ν(x)` for `ν ≥ 0`, `x ≥ 0`.
pub fn bessel_j(order: f64, x: f64) -> Result<f64> {
    let j = BesselJ::new(order)?;
    if !(x >= 0.0) || !x.is_finite() {
        return domain(format!("Bessel argument must be non-negative, got {x}"));
    }
    Ok(j.eval(x))
}

fn check_c(c: f64) -> Result<()> {
    if c <= 0.0 && c == c.floor() {
        return domain(format!("hypergeometric parameter c = {c} is a pole"));
    }
    Ok(())
}

/// Series for `₂F₁(a,b;c;z)`, `0 ≤ z ≤ z_max ≤ Z_MAX`, with a tail bound.
pub fn hyp2f1_bounded(a: f64, b: f64, c: f64, z: f64, z_max: f64) -> Result<SpecialValue> {
    check_c(c)?;
    let z_max = z_max.min(Z_MAX);
    if !(0.0..=z_max).contains(&z) {
        return domain(format!("hyp2f1 argument {z} outside [0, {z_max}]"));
    }
    Ok(series_2f1(a, b, c, z))
}

/// `₂F₁(a,b;c;z)` on `[0, Z_MAX]`.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    hyp2f1_bounded(a, b, c, z, Z_MAX).map(|v| v.value)
}

fn series_2f1(a: f64, b: f64, c: f64, z: f64) -> SpecialValue {
    let mut sum = 1.0;
    let mut abs_sum = 1.0;
    let mut term = 1.0;
    let mut k = 0.0;
    let mut tail = 0.0;
    while k < 100_000.0 {
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z;
        k += 1.0;
        sum += term;
        abs_sum += term.abs();
        if term == 0.0 {
            tail = 0.0;
            break;
        }
        if k > c.abs() + 1.0 {
            let ratio = z * (k + a.abs()) * (k + b.abs()) / ((k - c.abs()) * (k + 1.0));
            if ratio < 1.0 {
                tail = term.abs() * ratio / (1.0 - ratio);
                if tail <= 1e-17 * sum.abs() {
                    break;
                }
            }
        }
    }
    SpecialValue {
        value: sum,
        abs_error_bound: tail + 4.0 * f64::EPSILON * abs_sum,
    }
}

/// Plain partial sum of the defining series with at most `max_terms` terms,
/// stopping early once terms drop below `1e-17` of the running sum.
pub fn hyp2f1_partial_sum(a: f64, b: f64, c: f64, z: f64, max_terms: usize) -> Result<f64> {
    check_c(c)?;
    if !(0.0..1.0).contains(&z) {
        return domain(format!("partial sums need z in [0,1), got {z}"));
    }
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 0..max_terms {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() && kf > 10.0 {
            break;
        }
    }
    Ok(sum)
}

/// `₂F₁(a,b;c;z)` on `[0,1)` by Taylor recentring of the hypergeometric ODE.
///
/// Used only where kernels are integrated up to coincidence; public callers
/// that evaluate kernel values should use [`hyp2f1`], which refuses `z > Z_MAX`.
pub fn hyp2f1_continued(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    check_c(c)?;
    if !(0.0..1.0).contains(&z) {
        return domain(format!("continuation needs z in [0,1), got {z}"));
    }
    if z <= 0.5 {
        return Ok(series_2f1(a, b, c, z).value);
    }
    let z0 = 0.5;
    let mut f = series_2f1(a, b, c, z0).value;
    let mut df = a * b / c * series_2f1(a + 1.0, b + 1.0, c + 1.0, z0).value;
    let mut at = z0;
    while at < z {
        let step = (z - at).min(0.5 * (1.0 - at));
        let (nf, ndf) = taylor_step(a, b, c, at, f, df, step);
        f = nf;
        df = ndf;
        at += step;
        if z - at < 1e-15 * z {
            break;
        }
    }
    Ok(f)
}

fn taylor_step(a: f64, b: f64, c: f64, z0: f64, f: f64, df: f64, h: f64) -> (f64, f64) {
    let p0 = z0 * (1.0 - z0);
    let p1 = 1.0 - 2.0 * z0;
    let q0 = c - (a + b + 1.0) * z0;
    let q1 = -(a + b + 1.0);
    let ab = a * b;
    // Scaled Taylor coefficients d_k = c_k h^k, so that neither factor overflows
    // when the centre approaches the singular point.
    let (mut dk, mut dk1) = (f, df * h);
    let mut val = dk + dk1;
    let mut der = dk1;
    let mut small = 0;
    for k in 0..2000 {
        let kf = k as f64;
        let dk2 = -((p1 * kf * (kf + 1.0) + q0 * (kf + 1.0)) * dk1 * h
            + (-kf * (kf - 1.0) + q1 * kf - ab) * dk * h * h)
            / (p0 * (kf + 2.0) * (kf + 1.0));
        val += dk2;
        der += (kf + 2.0) * dk2;
        dk = dk1;
        dk1 = dk2;
        if dk2.abs() <= 1e-18 * val.abs() {
            small += 1;
            if small >= 3 {
                break;
            }
        } else {
            small = 0;
        }
    }
    (val, der / h)
}

/// Gauss's summation `Γ(c)Γ(c−a−b)/(Γ(c−a)Γ(c−b))` for `c − a − b > 0`.
pub fn gauss_value_at_one(a: f64, b: f64, c: f64) -> Result<f64> {
    let s = c - a - b;
    if !(s > 0.0) {
        return Err(Error::Divergence(format!(
            "F(a,b;c;1) diverges for c - a - b = {s}"
        )));
    }
    check_c(c)?;
    let (lc, sc) = gamma_ln_sign(c)?;
    let (ls, ss) = gamma_ln_sign(s)?;
    let inv_a = inv_gamma(c - a);
    let inv_b = inv_gamma(c - b);
    if inv_a == 0.0 || inv_b == 0.0 {
        return Ok(0.0);
    }
    let (la, sa) = gamma_ln_sign(c - a)?;
    let (lb, sb) = gamma_ln_sign(c - b)?;
    Ok(sc * ss * sa * sb * (lc + ls - la - lb).exp())
}

/// `B_{2j} / (2j)!` for `j = 1..=8`.
const BERNOULLI_OVER_FACTORIAL: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30_240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
    -691.0 / 1_307_674_368_000.0,
    1.0 / 74_724_249_600.0,
    -3617.0 / 10_670_622_842_880_000.0,
];

/// Riemann zeta function for real `s ≠ 1`, by Euler–Maclaurin summation.
pub fn zeta(s: f64) -> Result<f64> {
    if s == 1.0 || !s.is_finite() || s < -6.0 {
        return domain(format!(
            "zeta is evaluated for finite s >= -6, s != 1; got {s}"
        ));
    }
    const N: f64 = 12.0;
    let mut sum: f64 = (1..12).map(|k| (k as f64).powf(-s)).sum();
    sum += N.powf(1.0 - s) / (s - 1.0) + 0.5 * N.powf(-s);
    let mut rising = s;
    let mut power = N.powf(-s - 1.0);
    for (j, b) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        sum += b * rising * power;
        let k = 2.0 * j as f64;
        rising *= (s + k + 1.0) * (s + k + 2.0);
        power /= N * N;
    }
    Ok(sum)
}
