//! Log-space q-Pochhammer symbols and the real dilogarithm.
//!
//! Everything here works with natural logarithms of products. Finite
//! products `(q; q)_n` have `n` factors and, in the scaling `q = 1 - beta/N`,
//! their logarithms reach magnitude `N`, so all loops use compensated
//! summation and evaluate `ln(1 - q^k)` through `expm1`/`ln` rather than
//! forming `1 - q^k` directly.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// `pi^2 / 6 = Li2(1)`.
pub const ZETA2: f64 = PI * PI / 6.0;

/// Tolerances for series and product truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericConfig {
    /// Relative tolerance for truncating power series.
    pub series_tol: f64,
    /// Upper bound on the number of series or product terms.
    pub max_terms: usize,
    /// Absolute tolerance for truncating infinite products (in log space).
    pub tail_tol: f64,
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self {
            series_tol: 1e-15,
            max_terms: 1_000_000,
            tail_tol: 1e-14,
        }
    }
}

impl NumericConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.series_tol > 0.0) {
            return Err(domain(format!("series_tol must be > 0, got {}", self.series_tol)));
        }
        if self.max_terms < 1 {
            return Err(domain("max_terms must be >= 1"));
        }
        if !(self.tail_tol > 0.0) {
            return Err(domain(format!("tail_tol must be > 0, got {}", self.tail_tol)));
        }
        Ok(())
    }
}

/// The symbol `(q^m; q)_inf`: base `q` and a nonnegative real shift exponent `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QArgument {
    pub q: f64,
    pub shift: f64,
}

impl QArgument {
    pub fn new(q: f64, shift: f64) -> Result<Self> {
        check_q(q)?;
        if !(shift >= 0.0) || !shift.is_finite() {
            return Err(domain(format!("shift exponent must be finite and >= 0, got {shift}")));
        }
        Ok(Self { q, shift })
    }
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub(crate) fn check_q(q: f64) -> Result<()> {
    if !(0.0..1.0).contains(&q) {
        return Err(domain(format!("q must lie in [0, 1), got {q}")));
    }
    Ok(())
}

/// `ln(1 - e^t)` for `t <= 0`, accurate when `e^t` is close to 0 or to 1.
#[inline]
pub fn ln_one_minus_exp(t: f64) -> f64 {
    (-t.exp_m1()).ln()
}

/// `ln(1 - q^k)` given `ln q` (which is `-inf` when `q = 0`) and a real `k > 0`.
#[inline]
pub fn ln_one_minus_qpow(ln_q: f64, k: f64) -> f64 {
    ln_one_minus_exp(k * ln_q)
}

/// `ln (q; q)_n = sum_{k=1..n} ln(1 - q^k)`.
pub fn log_qpoch_finite(q: f64, n: usize) -> Result<f64> {
    check_q(q)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    let ln_q = q.ln();
    Ok((1..=n)
        .map(|k| ln_one_minus_qpow(ln_q, k as f64))
        .collect::<NeumaierSum>()
        .value())
}

/// Prefix table `t[n] = ln (q; q)_n` for `n = 0..=n_max`, built with one
/// running compensated sum.
pub fn log_qpoch_prefix(q: f64, n_max: usize) -> Result<Vec<f64>> {
    check_q(q)?;
    let mut table = Vec::with_capacity(n_max + 1);
    table.push(0.0);
    if q == 0.0 {
        table.resize(n_max + 1, 0.0);
        return Ok(table);
    }
    let ln_q = q.ln();
    let mut acc = NeumaierSum::new();
    for k in 1..=n_max {
        acc.add(ln_one_minus_qpow(ln_q, k as f64));
        table.push(acc.value());
    }
    Ok(table)
}

/// `ln (q^m; q)_inf = sum_{k>=0} ln(1 - q^{m+k})`.
///
/// The sum is cut once the remaining tail is provably below `cfg.tail_tol`:
/// `sum_{k>K} |ln(1 - q^{m+k})| <= q^{m+K+1} / ((1-q)(1-q^{m+K+1}))`.
pub fn log_qpoch_inf(arg: QArgument, cfg: &NumericConfig) -> Result<f64> {
    cfg.validate()?;
    let QArgument { q, shift } = QArgument::new(arg.q, arg.shift)?;
    if shift == 0.0 {
        return Err(Error::Divergent(format!(
            "(q^0; q)_inf = 0 for q = {q}; its logarithm is -inf"
        )));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    let ln_q = q.ln();
    let one_minus_q = -ln_q.exp_m1();
    let mut acc = NeumaierSum::new();
    let mut tail = f64::INFINITY;
    for k in 0..cfg.max_terms {
        let e = shift + k as f64;
        acc.add(ln_one_minus_qpow(ln_q, e));
        let next = ((e + 1.0) * ln_q).exp();
        tail = next / (one_minus_q * (1.0 - next));
        if tail < cfg.tail_tol {
            return Ok(acc.value());
        }
    }
    Err(Error::NotConverged {
        terms: cfg.max_terms,
        tail,
    })
}

/// Real dilogarithm `Li2(z) = sum z^n / n^2` for `z <= 1`, default tolerances.
pub fn dilog(z: f64) -> Result<f64> {
    dilog_with(z, &NumericConfig::default())
}

/// Real dilogarithm with explicit series tolerance.
///
/// The power series is summed only for `|z| <= 1/2`; other arguments are
/// mapped there by Euler reflection `z -> 1 - z`, the Landen transform
/// `z -> z/(z-1)` and inversion `z -> 1/z`.
pub fn dilog_with(z: f64, cfg: &NumericConfig) -> Result<f64> {
    if z.is_nan() || z > 1.0 {
        return Err(domain(format!("dilog is defined here only for real z <= 1, got {z}")));
    }
    Ok(dilog_reduced(z, cfg))
}

fn dilog_reduced(z: f64, cfg: &NumericConfig) -> f64 {
    if z == 1.0 {
        ZETA2
    } else if z == 0.0 {
        0.0
    } else if z.abs() <= 0.5 {
        dilog_series(z, cfg)
    } else if z > 0.5 {
        // Li2(z) + Li2(1-z) = pi^2/6 - ln z ln(1-z)
        ZETA2 - z.ln() * (-z).ln_1p() - dilog_series(1.0 - z, cfg)
    } else if z >= -1.0 {
        // Li2(z) = -Li2(z/(z-1)) - ln^2(1-z)/2, with z/(z-1) in [1/3, 1/2)
        let l = (-z).ln_1p();
        -dilog_series(z / (z - 1.0), cfg) - 0.5 * l * l
    } else {
        // Li2(z) = -Li2(1/z) - pi^2/6 - ln^2(-z)/2, with 1/z in (-1, 0)
        let l = (-z).ln();
        -dilog_reduced(1.0 / z, cfg) - ZETA2 - 0.5 * l * l
    }
}

fn dilog_series(z: f64, cfg: &NumericConfig) -> f64 {
    let mut sum = 0.0;
    let mut pow = z;
    for n in 1..=cfg.max_terms {
        let nf = n as f64;
        let term = pow / (nf * nf);
        sum += term;
        if term.abs() <= cfg.series_tol * sum.abs() * 0.1 {
            break;
        }
        pow *= z;
    }
    sum
}

/// Real part of the principal-branch dilogarithm for any real `z`.
///
/// Equal to [`dilog`] for `z <= 1`; for `z > 1` it is
/// `pi^2/3 - ln^2(z)/2 - Li2(1/z)`.
pub fn dilog_re(z: f64) -> Result<f64> {
    if z.is_nan() {
        return Err(domain("dilog of NaN"));
    }
    if z <= 1.0 {
        return dilog(z);
    }
    let l = z.ln();
    Ok(2.0 * ZETA2 - 0.5 * l * l - dilog(1.0 / z)?)
}

/// `|Li2'(z) + ln(1 - z)/z|` with `Li2'` from a Richardson-extrapolated
/// centered difference at steps `step` and `step/2`.
pub fn dilog_derivative_residual(z: f64, step: f64) -> Result<f64> {
    if !(z > 0.0 && z < 1.0) {
        return Err(domain(format!("z must lie in (0, 1), got {z}")));
    }
    let max_step = z.min(1.0 - z) / 2.0;
    if !(step > 0.0 && step < max_step) {
        return Err(domain(format!("step must lie in (0, {max_step}), got {step}")));
    }
    let central = |h: f64| -> Result<f64> { Ok((dilog(z + h)? - dilog(z - h)?) / (2.0 * h)) };
    let coarse = central(step)?;
    let fine = central(step / 2.0)?;
    let derivative = (4.0 * fine - coarse) / 3.0;
    Ok((derivative + (-z).ln_1p() / z).abs())
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == den {
        1.0
    } else {
        num / den
    }
}

/// Signed residual `LHS - RHS` of the nine-term dilogarithm identity
///
/// `Li2(ab/uv) = Li2(a/u) + Li2(b/v) + Li2(a/v) + Li2(b/u) + Li2(u) + Li2(v)
///               - Li2(a) - Li2(b) + ln^2(-u/v)/2`
///
/// on the manifold `(1-a)(1-b) = (1-u)(1-v)`. Terms with arguments above 1
/// and the logarithm of the negative ratio `-u/v` enter through their real
/// parts, which is the real form of the identity. Ratios `0/0` are read as 1.
pub fn mantel_residual(a: f64, b: f64, u: f64, v: f64) -> Result<f64> {
    let lhs_c = (1.0 - a) * (1.0 - b);
    let rhs_c = (1.0 - u) * (1.0 - v);
    if !((lhs_c - rhs_c).abs() <= 1e-12) {
        return Err(Error::Constraint(format!(
            "(1-a)(1-b) = {lhs_c} differs from (1-u)(1-v) = {rhs_c}"
        )));
    }
    let uv = ratio(u, v);
    if !(uv.is_finite()) || uv == 0.0 {
        return Err(domain(format!("ln(-u/v) undefined for u = {u}, v = {v}")));
    }
    let log_term = if uv > 0.0 {
        let l = uv.ln();
        0.5 * l * l - 3.0 * ZETA2
    } else {
        let l = (-uv).ln();
        0.5 * l * l
    };
    let li = dilog_re;
    let lhs = li(ratio(a * b, u * v))?;
    let rhs = li(ratio(a, u))? + li(ratio(b, v))? + li(ratio(a, v))? + li(ratio(b, u))?
        + li(u)?
        + li(v)?
        - li(a)?
        - li(b)?
        + log_term;
    Ok(lhs - rhs)
}

/// `ln` of the Gaussian binomial `(q;q)_L / ((q;q)_s (q;q)_{L-s})`, the
/// inversion generating function of binary words with `s` ones.
pub fn gaussian_binomial_log(q: f64, l: usize, s: usize) -> Result<f64> {
    if s > l {
        return Err(domain(format!("need 0 <= s <= L, got s = {s}, L = {l}")));
    }
    Ok(log_qpoch_finite(q, l)? - log_qpoch_finite(q, s)? - log_qpoch_finite(q, l - s)?)
}
