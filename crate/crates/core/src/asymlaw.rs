//! Closed-form limit laws in the scaling `q = 1 - beta/N`.
//!
//! Every exponential is routed through `exp_m1`/`ln_1p` so the formulas stay
//! accurate for small `beta` and near the edges of the unit square.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::qnum::{self, NumericConfig, QArgument, ZETA2};

/// A point `(x, y)` of the open unit square at inverse temperature `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawPoint {
    pub beta: f64,
    pub x: f64,
    pub y: f64,
}

impl LawPoint {
    pub fn new(beta: f64, x: f64, y: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(domain(format!("beta must be positive, got {beta}")));
        }
        for (name, v) in [("x", x), ("y", y)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(domain(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(Self { beta, x, y })
    }

    /// `[max(x+y-1, 0), min(x, y)]`.
    pub fn support(&self) -> (f64, f64) {
        ((self.x + self.y - 1.0).max(0.0), self.x.min(self.y))
    }
}

/// `1 - e^{-t}`.
#[inline]
fn one_minus_exp_neg(t: f64) -> f64 {
    -(-t).exp_m1()
}

/// `ln(1 - e^{-t})`.
#[inline]
fn ln_one_minus_exp_neg(t: f64) -> f64 {
    qnum::ln_one_minus_exp(-t)
}

/// `e^{-t} / (1 - e^{-t}) = 1 / (e^t - 1)`.
#[inline]
fn bose(t: f64) -> f64 {
    1.0 / t.exp_m1()
}

/// Limit shape `h_beta(x, y)`, the almost-sure limit of `H_{xN,yN}/N`.
///
/// Rewritten as `-ln(1 - AB/C)/beta` with `A = 1 - e^{-beta x}`,
/// `B = 1 - e^{-beta y}`, `C = 1 - e^{-beta}`.
pub fn h_beta(p: &LawPoint) -> f64 {
    let a = one_minus_exp_neg(p.beta * p.x);
    let b = one_minus_exp_neg(p.beta * p.y);
    let c = one_minus_exp_neg(p.beta);
    -(-a * b / c).ln_1p() / p.beta
}

pub fn d_beta(p: &LawPoint) -> f64 {
    let h = h_beta(p);
    let b = p.beta;
    0.5 * ln_one_minus_exp_neg(b) - 0.5 * ln_one_minus_exp_neg(b * (p.x - h)) - 0.5 * ln_one_minus_exp_neg(b * (p.y - h))
}

/// `sqrt(beta) e^{d_beta}`: inverse standard deviation of `H/sqrt(N)`.
pub fn sigma_beta(p: &LawPoint) -> f64 {
    p.beta.sqrt() * d_beta(p).exp()
}

/// Standard deviation `sqrt(N) / sigma_beta` of `H_{xN,yN}` itself.
pub fn sigma_n_beta(p: &LawPoint, n: usize) -> f64 {
    (n as f64).sqrt() / sigma_beta(p)
}

fn check_delta(p: &LawPoint, delta: f64, interior: bool) -> Result<()> {
    let (lo, hi) = p.support();
    let ok = if interior {
        delta > lo && delta < hi
    } else {
        delta >= lo && delta <= hi
    };
    if ok {
        Ok(())
    } else {
        let kind = if interior { "open" } else { "closed" };
        Err(domain(format!(
            "delta = {delta} outside the {kind} support interval [{lo}, {hi}]"
        )))
    }
}

fn li2_exp_neg(t: f64) -> f64 {
    qnum::dilog((-t).exp()).expect("argument in (0, 1]")
}

/// The ten dilogarithm terms of the rate function, without the `1/beta`.
fn rate_bracket(p: &LawPoint, delta: f64) -> f64 {
    let (b, x, y) = (p.beta, p.x, p.y);
    let plus = [delta, x - delta, y - delta, 1.0 - x - y + delta, 1.0]
        .iter()
        .map(|&t| li2_exp_neg(b * t))
        .sum::<f64>();
    let minus = [x, y, 1.0 - x, 1.0 - y]
        .iter()
        .map(|&t| li2_exp_neg(b * t))
        .sum::<f64>();
    b * b * (x - delta) * (y - delta) - ZETA2 + plus - minus
}

/// LDP rate `a_beta(x, y; delta)` on the closed support interval.
pub fn rate_a(p: &LawPoint, delta: f64) -> Result<f64> {
    check_delta(p, delta, false)?;
    Ok(rate_bracket(p, delta) / p.beta)
}

/// First and second `delta`-derivatives of the rate, interior points only.
pub fn rate_a_derivatives(p: &LawPoint, delta: f64) -> Result<(f64, f64)> {
    check_delta(p, delta, true)?;
    let (b, x, y) = (p.beta, p.x, p.y);
    let w = 1.0 - x - y + delta;
    let first = b * (2.0 * delta - x - y) - ln_one_minus_exp_neg(b * (x - delta)) - ln_one_minus_exp_neg(b * (y - delta))
        + ln_one_minus_exp_neg(b * delta)
        + ln_one_minus_exp_neg(b * w);
    let second = b * (2.0 + bose(b * delta) + bose(b * (x - delta)) + bose(b * (y - delta)) + bose(b * w));
    Ok((first, second))
}

/// Residuals of the identities that make the local limit theorem collapse
/// to a pure Gaussian; each vanishes exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProofResiduals {
    /// Nine-dilogarithm identity at `delta = h`.
    pub li2_identity: f64,
    /// Linear coefficient `b_beta`, which is minus the rate's slope at `h`.
    pub linear_term: f64,
    /// Constant term `c_beta`.
    pub constant_term: f64,
    /// `f_beta - exp(2 d_beta)`.
    pub curvature: f64,
}

impl ProofResiduals {
    pub fn max_abs(&self) -> f64 {
        [self.li2_identity, self.linear_term, self.constant_term, self.curvature]
            .iter()
            .fold(0.0f64, |m, r| m.max(r.abs()))
    }
}

pub fn proof_residuals(p: &LawPoint) -> ProofResiduals {
    let (b, x, y) = (p.beta, p.x, p.y);
    let h = h_beta(p);
    let w = 1.0 - x - y + h;
    let l = ln_one_minus_exp_neg;

    let rhs = ZETA2 - b * b * (x - h) * (y - h) - li2_exp_neg(b * h) - li2_exp_neg(b * (x - h)) - li2_exp_neg(b * (y - h))
        - li2_exp_neg(b)
        + li2_exp_neg(b * x)
        + li2_exp_neg(b * y)
        + li2_exp_neg(b * (1.0 - x))
        + li2_exp_neg(b * (1.0 - y));
    let li2_identity = li2_exp_neg(b * w) - rhs;

    let linear_term = b * (x + y - 2.0 * h) + l(b * (x - h)) + l(b * (y - h)) - l(b * h) - l(b * w);

    let constant_term = 0.5 * b * b * (x + y) * h - b * b * x * y - 0.5 * l(b * h) - 0.5 * b * x * l(b * (x - h))
        - 0.5 * b * y * l(b * (y - h))
        - 0.5 * (1.0 + b * (1.0 - x - y)) * l(b * w)
        + 0.5 * (1.0 + b * x) * l(b * x)
        + 0.5 * (1.0 + b * y) * l(b * y)
        + 0.5 * (1.0 + b * (1.0 - x)) * l(b * (1.0 - x))
        + 0.5 * (1.0 + b * (1.0 - y)) * l(b * (1.0 - y))
        - (1.0 + 0.5 * b) * l(b);

    let f = 2.0 + bose(b * h) + bose(b * (x - h)) + bose(b * (y - h)) + bose(b * w);
    let curvature = f - (2.0 * d_beta(p)).exp();

    ProofResiduals {
        li2_identity,
        linear_term,
        constant_term,
        curvature,
    }
}

/// The nine-dilogarithm identity routed through the general functional
/// equation at `(e^{-beta}, e^{-beta h}, e^{-beta x}, e^{-beta y})`.
pub fn li2_identity_via_mantel(p: &LawPoint) -> Result<f64> {
    let h = h_beta(p);
    let e = |t: f64| (-p.beta * t).exp();
    qnum::mantel_residual(e(1.0), e(h), e(p.x), e(p.y))
}

/// Both closed forms of each drift coefficient for a shifted `K = yN + gamma sqrt(N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftForms {
    pub u_sum: f64,
    pub u_ratio: f64,
    pub v_sum: f64,
    pub v_ratio: f64,
}

pub fn drift_forms(p: &LawPoint) -> DriftForms {
    let (b, x, y) = (p.beta, p.x, p.y);
    let h = h_beta(p);
    let w = 1.0 - x - y + h;
    let om = one_minus_exp_neg;
    let u_sum = 1.0 + bose(b * (y - h)) + bose(b * w);
    let u_ratio = om(b * (1.0 - x)) / (om(b * (y - h)) * om(b * w));
    let v_sum = bose(b * (y - h)) + bose(b * w) - bose(b * y) - bose(b * (1.0 - y));
    let v_ratio = (-b * (y - x)).exp() * om(b) * om(b * x) / (om(b * y) * om(b * (1.0 - x)) * om(b * (1.0 - y)));
    DriftForms {
        u_sum,
        u_ratio,
        v_sum,
        v_ratio,
    }
}

/// `(u_beta, v_beta)` from the ratio forms.
pub fn drift_terms(p: &LawPoint) -> (f64, f64) {
    let f = drift_forms(p);
    (f.u_ratio, f.v_ratio)
}

/// Mean shift (in units of `sqrt(N)`) of `H` when `K` moves by `gamma sqrt(N)`.
pub fn mu_beta(p: &LawPoint, gamma: f64) -> f64 {
    let (_, v) = drift_terms(p);
    gamma * (p.beta * v).sqrt() / sigma_beta(p)
}

/// Gaussian prediction for `P(H_{xN, yN + gamma sqrt(N)} = k)`.
pub fn lclt_prediction(p: &LawPoint, n: usize, k: f64, gamma: f64) -> f64 {
    let nf = n as f64;
    let sigma = sigma_beta(p);
    let alpha = (k - h_beta(p) * nf) / nf.sqrt();
    let z = alpha - mu_beta(p, gamma);
    sigma / (2.0 * PI * nf).sqrt() * (-0.5 * sigma * sigma * z * z).exp()
}

/// Every limit-law scalar at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawValues {
    pub beta: f64,
    pub x: f64,
    pub y: f64,
    pub h: f64,
    pub d: f64,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_n: Option<f64>,
    pub delta: f64,
    pub a: f64,
    pub u: f64,
    pub v: f64,
    pub gamma: f64,
    pub mu: f64,
}

/// Evaluates the law at `p`; `delta` defaults to `h` (where `a = 0`).
pub fn law_values(p: &LawPoint, n: Option<usize>, delta: Option<f64>, gamma: f64) -> Result<LawValues> {
    let h = h_beta(p);
    let delta = delta.unwrap_or(h);
    let a = rate_a(p, delta)?;
    let (u, v) = drift_terms(p);
    Ok(LawValues {
        beta: p.beta,
        x: p.x,
        y: p.y,
        h,
        d: d_beta(p),
        sigma: sigma_beta(p),
        sigma_n: n.map(|n| sigma_n_beta(p, n)),
        delta,
        a,
        u,
        v,
        gamma,
        mu: mu_beta(p, gamma),
    })
}

/// Limiting covariance of `((H_{xN, y_i N} - h_beta(x, y_i) N) / sqrt(N))_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub beta: f64,
    pub x: f64,
    pub y_list: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    pub det: f64,
    pub inv: Vec<Vec<f64>>,
}

/// `zeta(y) = (e^{-beta(1-y)} - e^{-beta}) / (1 - e^{-beta(1-y)})`, increasing
/// from 0 at `y = 0` to infinity at `y = 1`.
fn zeta(beta: f64, y: f64) -> f64 {
    (-beta).exp() * (beta * y).exp_m1() / one_minus_exp_neg(beta * (1.0 - y))
}

/// `C = D Z D` with `Z(i, j) = zeta(y_min(i,j))` and `D_i = 1/(sigma_i sqrt(zeta_i))`, so
/// `C(i, i) = 1/sigma_i^2` and `C(i, j) = sqrt(zeta_i/zeta_j)/(sigma_i sigma_j)` for `i < j`.
/// Determinant and inverse come from the closed forms for `Z`.
pub fn covariance_spec(beta: f64, x: f64, y_list: &[f64]) -> Result<CovarianceSpec> {
    if y_list.is_empty() {
        return Err(domain("y list must be nonempty"));
    }
    if y_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(domain("y list must be strictly increasing"));
    }
    let points = y_list
        .iter()
        .map(|&y| LawPoint::new(beta, x, y))
        .collect::<Result<Vec<_>>>()?;
    let r = y_list.len();
    let sigma: Vec<f64> = points.iter().map(sigma_beta).collect();
    let z: Vec<f64> = y_list.iter().map(|&y| zeta(beta, y)).collect();
    let scale: Vec<f64> = (0..r).map(|i| 1.0 / (sigma[i] * z[i].sqrt())).collect();

    let mut c = vec![vec![0.0; r]; r];
    for i in 0..r {
        c[i][i] = 1.0 / (sigma[i] * sigma[i]);
        for j in i + 1..r {
            c[i][j] = scale[i] * z[i] * scale[j];
            c[j][i] = c[i][j];
        }
    }

    let mut det = z[0];
    for i in 1..r {
        det *= z[i] - z[i - 1];
    }
    for i in 0..r {
        det *= scale[i] * scale[i];
    }

    // Z^{-1} is tridiagonal; C^{-1} = D^{-1} Z^{-1} D^{-1}
    let gap = |i: usize| if i == 0 { z[0] } else { z[i] - z[i - 1] };
    let mut inv = vec![vec![0.0; r]; r];
    for i in 0..r {
        let upper = if i + 1 < r { 1.0 / gap(i + 1) } else { 0.0 };
        inv[i][i] = (1.0 / gap(i) + upper) / (scale[i] * scale[i]);
        if i + 1 < r {
            let off = -1.0 / gap(i + 1) / (scale[i] * scale[i + 1]);
            inv[i][i + 1] = off;
            inv[i + 1][i] = off;
        }
    }

    Ok(CovarianceSpec {
        beta,
        x,
        y_list: y_list.to_vec(),
        c,
        det,
        inv,
    })
}

impl CovarianceSpec {
    pub fn dim(&self) -> usize {
        self.y_list.len()
    }

    /// Cholesky factor of `C`, or `None` if `C` is not positive definite.
    pub fn cholesky(&self) -> Option<Vec<Vec<f64>>> {
        let r = self.dim();
        let mut l = vec![vec![0.0; r]; r];
        for i in 0..r {
            for j in 0..=i {
                let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
                if i == j {
                    let d = self.c[i][i] - s;
                    if d <= 0.0 {
                        return None;
                    }
                    l[i][i] = d.sqrt();
                } else {
                    l[i][j] = (self.c[i][j] - s) / l[j][j];
                }
            }
        }
        Some(l)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_some()
    }

    /// Determinant from the Cholesky factor, independent of the closed form.
    pub fn numeric_det(&self) -> Option<f64> {
        self.cholesky()
            .map(|l| (0..self.dim()).map(|i| l[i][i] * l[i][i]).product())
    }

    /// `max |C inv - I|` entrywise.
    pub fn inverse_residual(&self) -> f64 {
        let r = self.dim();
        let mut worst = 0.0f64;
        for i in 0..r {
            for j in 0..r {
                let v: f64 = (0..r).map(|k| self.c[i][k] * self.inv[k][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }
}

/// Residual of the self-similarity of the limit shape under restriction to
/// the rows below `y_prev`.
pub fn h_composition_residual(beta: f64, x: f64, y_prev: f64, y_next: f64) -> Result<f64> {
    if !(y_prev > 0.0 && y_prev < y_next && y_next < 1.0) {
        return Err(domain(format!(
            "need 0 < y_prev < y_next < 1, got {y_prev}, {y_next}"
        )));
    }
    let h_prev = h_beta(&LawPoint::new(beta, x, y_prev)?);
    let h_next = h_beta(&LawPoint::new(beta, x, y_next)?);
    let rest = 1.0 - y_prev;
    let inner = LawPoint::new(beta * rest, (x - h_prev) / rest, (y_next - y_prev) / rest)?;
    Ok((h_beta(&inner) - (h_next - h_prev) / rest).abs())
}

/// Which q-Pochhammer symbol an expansion approximates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QPochExpansion {
    /// `ln (q; q)_inf`.
    Full,
    /// `ln (q^{delta N + 1}; q)_inf`.
    Linear { delta: f64 },
    /// `ln (q^{s+1}; q)_inf` with `s = floor(delta N + alpha sqrt(N))`.
    Diffusive { delta: f64, alpha: f64 },
}

impl QPochExpansion {
    /// Shift `m` of the symbol `(q^m; q)_inf` being approximated at size `n`.
    pub fn shift(&self, n: usize) -> f64 {
        let nf = n as f64;
        match *self {
            QPochExpansion::Full => 1.0,
            QPochExpansion::Linear { delta } => delta * nf + 1.0,
            QPochExpansion::Diffusive { delta, alpha } => (delta * nf + alpha * nf.sqrt()).floor() + 1.0,
        }
    }

    /// Decay order `p` of the expansion error, `O(N^{-p})` at fixed parameters.
    pub fn error_order(&self) -> f64 {
        match self {
            QPochExpansion::Diffusive { alpha, .. } if *alpha != 0.0 => 0.5,
            _ => 1.0,
        }
    }
}

fn check_scaling(beta: f64, n: usize) -> Result<()> {
    if n == 0 || !(beta > 0.0 && beta <= n as f64) {
        return Err(domain(format!("need N >= 1 and 0 < beta <= N, got N = {n}, beta = {beta}")));
    }
    Ok(())
}

/// Truncated large-N expansion of a q-Pochhammer logarithm at `q = 1 - beta/N`.
pub fn asym_log_qpoch(beta: f64, n: usize, kind: QPochExpansion) -> Result<f64> {
    check_scaling(beta, n)?;
    let nf = n as f64;
    match kind {
        QPochExpansion::Full => Ok(-ZETA2 / beta * nf + ZETA2 / 2.0 - 0.5 * (beta / (2.0 * PI * nf)).ln()),
        QPochExpansion::Linear { delta } | QPochExpansion::Diffusive { delta, .. } => {
            if !(delta > 0.0) {
                return Err(domain(format!("delta must be positive, got {delta}")));
            }
            let t = beta * delta;
            let li = li2_exp_neg(t);
            let lg = ln_one_minus_exp_neg(t);
            let mut value = -li / beta * nf + 0.5 * li - 0.5 * (1.0 + t) * lg;
            if let QPochExpansion::Diffusive { alpha, .. } = kind {
                value += -alpha * lg * nf.sqrt() - alpha * alpha * beta * bose(t) / 2.0;
            }
            Ok(value)
        }
    }
}

/// The symbol itself, summed directly.
pub fn direct_log_qpoch(beta: f64, n: usize, kind: QPochExpansion, cfg: &NumericConfig) -> Result<f64> {
    check_scaling(beta, n)?;
    let q = 1.0 - beta / n as f64;
    qnum::log_qpoch_inf(QArgument::new(q, kind.shift(n))?, cfg)
}

/// Density of the limiting permuton, `d^2 h_beta / dx dy`.
pub fn starr_density(p: &LawPoint) -> f64 {
    let b = p.beta;
    let den = (b / 4.0).exp() * (b * (p.x - p.y) / 2.0).cosh() - (-b / 4.0).exp() * (b * (p.x + p.y - 1.0) / 2.0).cosh();
    assert!(den > 0.0, "density denominator vanished at {p:?}");
    0.5 * b * (b / 2.0).sinh() / (den * den)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
    const BETAS: [f64; 3] = [0.5, 1.0, 4.0];

    fn pt(beta: f64, x: f64, y: f64) -> LawPoint {
        LawPoint::new(beta, x, y).unwrap()
    }

    fn grid() -> impl Iterator<Item = LawPoint> {
        BETAS
            .iter()
            .flat_map(|&b| GRID.iter().flat_map(move |&x| GRID.iter().map(move |&y| pt(b, x, y))))
    }

    #[test]
    fn h_reference_value() {
        // 30-digit evaluation of the closed form
        assert!((h_beta(&pt(1.0, 0.5, 0.5)) - 0.28092980362).abs() < 1e-10);
    }

    #[test]
    fn h_symmetric_and_inside_support() {
        for p in grid() {
            let h = h_beta(&p);
            let (lo, hi) = p.support();
            assert!(h > lo && h < hi, "{p:?}");
            assert!((h - h_beta(&pt(p.beta, p.y, p.x))).abs() < 1e-15);
        }
    }

    #[test]
    fn h_small_beta_is_product() {
        assert!((h_beta(&pt(0.001, 0.3, 0.6)) - 0.18).abs() < 1e-4);
    }

    #[test]
    fn h_matches_literal_formula() {
        for p in grid() {
            let b = p.beta;
            let lit = ((1.0 - (-b).exp()).ln()
                - ((-b * p.x).exp() + (-b * p.y).exp() - (-b * (p.x + p.y)).exp() - (-b).exp()).ln())
                / b;
            assert!((lit - h_beta(&p)).abs() < 1e-12);
        }
    }

    #[test]
    fn sigma_links() {
        let p = pt(1.0, 0.5, 0.5);
        let h = h_beta(&p);
        let s2 = (1.0 - (-1.0f64).exp()) / (1.0 - (-(0.5 - h)).exp()).powi(2);
        assert!((sigma_beta(&p).powi(2) - s2).abs() < 1e-13);
        for p in grid() {
            for n in [1usize, 100, 12345] {
                assert!((sigma_n_beta(&p, n) * sigma_beta(&p) - (n as f64).sqrt()).abs() < 1e-10);
            }
            assert!((sigma_beta(&p) - sigma_beta(&pt(p.beta, p.y, p.x))).abs() < 1e-13);
        }
    }

    #[test]
    fn rate_vanishes_at_limit_shape() {
        for p in grid() {
            let h = h_beta(&p);
            assert!(rate_a(&p, h).unwrap().abs() < 1e-12, "{p:?}");
            let (d1, d2) = rate_a_derivatives(&p, h).unwrap();
            assert!(d1.abs() < 1e-10);
            let target = p.beta * (2.0 * d_beta(&p)).exp();
            assert!((d2 - target).abs() < 1e-8 * target.max(1.0));
        }
    }

    #[test]
    fn rate_positive_away_from_minimum() {
        let p = pt(1.0, 0.5, 0.5);
        let h = h_beta(&p);
        assert!(rate_a(&p, h + 1e-3).unwrap() > 0.0);
        assert!(rate_a(&p, h - 1e-3).unwrap() > 0.0);
        assert!(rate_a(&p, 0.0).unwrap() > 0.0);
        assert!(rate_a(&p, 0.5).unwrap() > 0.0);
        assert!(rate_a(&p, 0.51).is_err());
        assert!(rate_a_derivatives(&p, 0.5).is_err());
    }

    #[test]
    fn rate_second_difference_at_minimum() {
        let p = pt(1.0, 0.5, 0.5);
        let h = h_beta(&p);
        let step = 1e-3;
        let fd = (rate_a(&p, h + step).unwrap() - 2.0 * rate_a(&p, h).unwrap() + rate_a(&p, h - step).unwrap()) / (step * step);
        let target = p.beta * (2.0 * d_beta(&p)).exp();
        assert!((fd - target).abs() < 1e-5 * target);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for p in grid() {
            let (lo, hi) = p.support();
            for t in [0.2, 0.5, 0.8] {
                let delta = lo + t * (hi - lo);
                let (d1, d2) = rate_a_derivatives(&p, delta).unwrap();
                let s = 1e-5 * (hi - lo);
                let f = |d: f64| rate_a(&p, d).unwrap();
                let fd1 = (f(delta + s) - f(delta - s)) / (2.0 * s);
                assert!((fd1 - d1).abs() < 1e-5 * (1.0 + d1.abs()), "{p:?} {delta}");
                let s2 = 1e-3 * (hi - lo);
                let fd2 = (rate_a_derivatives(&p, delta + s2).unwrap().0 - rate_a_derivatives(&p, delta - s2).unwrap().0) / (2.0 * s2);
                assert!((fd2 - d2).abs() < 1e-4 * d2, "{p:?} {delta}");
            }
        }
    }

    #[test]
    fn rate_is_convex() {
        for p in grid() {
            let (lo, hi) = p.support();
            for i in 1..=100 {
                let delta = lo + (hi - lo) * i as f64 / 101.0;
                assert!(rate_a_derivatives(&p, delta).unwrap().1 > 0.0);
            }
        }
    }

    #[test]
    fn proof_identities_hold() {
        for p in grid() {
            let r = proof_residuals(&p);
            assert!(r.max_abs() < 1e-10, "{p:?}: {r:?}");
            assert!(li2_identity_via_mantel(&p).unwrap().abs() < 1e-10, "{p:?}");
        }
        assert!(proof_residuals(&pt(4.0, 0.2, 0.7)).max_abs() < 1e-10);
    }

    #[test]
    fn drift_forms_agree() {
        for p in grid() {
            let f = drift_forms(&p);
            assert!((f.u_sum - f.u_ratio).abs() < 1e-12 * f.u_ratio.max(1.0), "{p:?}");
            assert!((f.v_sum - f.v_ratio).abs() < 1e-12 * f.v_ratio.max(1.0), "{p:?}");
            assert!(f.u_ratio > 0.0 && f.v_ratio > 0.0);
        }
    }

    #[test]
    fn mu_is_slope_of_h_in_y() {
        for p in grid() {
            assert_eq!(mu_beta(&p, 0.0), 0.0);
            let eps = 1e-6;
            let dh = (h_beta(&pt(p.beta, p.x, p.y + eps)) - h_beta(&pt(p.beta, p.x, p.y - eps))) / (2.0 * eps);
            assert!((mu_beta(&p, 1.0) - dh).abs() < 1e-7, "{p:?}");
            assert!((mu_beta(&p, 2.5) - 2.5 * mu_beta(&p, 1.0)).abs() < 1e-14);
        }
        assert!((mu_beta(&pt(1.0, 0.5, 0.5), 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn prediction_shape() {
        let p = pt(1.0, 0.5, 0.5);
        let n = 1000usize;
        let center = h_beta(&p) * n as f64;
        for a in [1.0, 7.5, 20.0] {
            assert!((lclt_prediction(&p, n, center + a, 0.0) - lclt_prediction(&p, n, center - a, 0.0)).abs() < 1e-15);
        }
        let peak = lclt_prediction(&p, n, center, 0.0);
        assert!((peak - sigma_beta(&p) / (2.0 * PI * n as f64).sqrt()).abs() < 1e-15);
        let total: f64 = (0..=n).map(|k| lclt_prediction(&p, n, k as f64, 0.0)).sum();
        assert!((total - 1.0).abs() < 1e-6);
        let k_floor = center.floor();
        let frac = (k_floor - center) / (n as f64).sqrt();
        let s = sigma_beta(&p);
        let expected = s / (2.0 * PI * n as f64).sqrt() * (-s * s * frac * frac / 2.0).exp();
        assert!((lclt_prediction(&p, n, k_floor, 0.0) - expected).abs() < 1e-15);
    }

    #[test]
    fn law_values_bundle() {
        let p = pt(1.0, 0.5, 0.5);
        let v = law_values(&p, Some(400), None, 1.0).unwrap();
        assert!(v.a.abs() < 1e-12);
        assert!((v.sigma - p.beta.sqrt() * v.d.exp()).abs() < 1e-15);
        assert!((v.sigma_n.unwrap() - 20.0 / v.sigma).abs() < 1e-12);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(serde_json::from_str::<LawValues>(&json).unwrap(), v);
        assert!(law_values(&p, None, Some(0.9), 0.0).is_err());
    }

    #[test]
    fn covariance_single_point() {
        let c = covariance_spec(1.0, 0.5, &[0.4]).unwrap();
        let s = sigma_beta(&pt(1.0, 0.5, 0.4));
        assert!((c.c[0][0] - 1.0 / (s * s)).abs() < 1e-15);
        assert!((c.det - c.c[0][0]).abs() < 1e-15);
        assert!((c.inv[0][0] - s * s).abs() < 1e-12);
    }

    #[test]
    fn tridiagonal_inverse_abstract() {
        // [[1,1],[1,2]]^{-1} = [[2,-1],[-1,1]]
        let z = [1.0, 2.0];
        let inv00 = 1.0 / z[0] + 1.0 / (z[1] - z[0]);
        let inv01 = -1.0 / (z[1] - z[0]);
        let inv11 = 1.0 / (z[1] - z[0]);
        assert_eq!((inv00, inv01, inv11), (2.0, -1.0, 1.0));
    }

    #[test]
    fn covariance_consistency() {
        for &b in &BETAS {
            for &x in &GRID {
                let c = covariance_spec(b, x, &[0.1, 0.3, 0.5, 0.7, 0.9]).unwrap();
                assert!(c.is_positive_definite());
                let nd = c.numeric_det().unwrap();
                assert!((nd - c.det).abs() < 1e-10 * c.det, "b={b} x={x}");
                assert!(c.inverse_residual() < 1e-10);
                for i in 0..5 {
                    for j in 0..5 {
                        assert_eq!(c.c[i][j], c.c[j][i]);
                        if i != j {
                            assert!(c.c[i][j] > 0.0 && c.c[i][j] < (c.c[i][i] * c.c[j][j]).sqrt());
                        }
                    }
                }
            }
        }
        assert!(covariance_spec(1.0, 0.5, &[0.5, 0.3]).is_err());
        assert!(covariance_spec(1.0, 0.5, &[]).is_err());
    }

    #[test]
    fn covariance_det_matches_lu() {
        let c = covariance_spec(1.0, 0.5, &[0.2, 0.5, 0.8]).unwrap();
        let m = nalgebra::DMatrix::from_fn(3, 3, |i, j| c.c[i][j]);
        let lu = m.clone().lu().determinant();
        assert!((lu - c.det).abs() < 1e-10 * c.det);
        let inv = m.try_inverse().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((inv[(i, j)] - c.inv[i][j]).abs() < 1e-9 * inv[(i, j)].abs().max(1.0));
            }
        }
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<CovarianceSpec>(&json).unwrap(), c);
    }

    #[test]
    fn h_composition_identity() {
        assert!(h_composition_residual(1.0, 0.5, 0.3, 0.6).unwrap() < 1e-12);
        assert!(h_composition_residual(0.5, 0.8, 0.1, 0.9).unwrap() < 1e-12);
        assert!(h_composition_residual(1.0, 0.5, 1e-9, 0.6).unwrap() < 1e-12);
        for &b in &BETAS {
            for &x in &GRID {
                for (i, &y0) in GRID.iter().enumerate() {
                    for &y1 in &GRID[i + 1..] {
                        assert!(h_composition_residual(b, x, y0, y1).unwrap() < 1e-12);
                    }
                }
            }
        }
        assert!(h_composition_residual(1.0, 0.5, 0.6, 0.3).is_err());
    }

    fn error_at(kind: QPochExpansion, n: usize) -> f64 {
        let cfg = NumericConfig::default();
        direct_log_qpoch(1.0, n, kind, &cfg).unwrap() - asym_log_qpoch(1.0, n, kind).unwrap()
    }

    #[test]
    fn expansion_orders() {
        let kinds = [
            QPochExpansion::Full,
            QPochExpansion::Linear { delta: 0.5 },
            QPochExpansion::Diffusive { delta: 0.5, alpha: 1.0 },
        ];
        for kind in kinds {
            let ideal = 4f64.powf(kind.error_order());
            for n in [100usize, 400, 1600] {
                let ratio = error_at(kind, n) / error_at(kind, 4 * n);
                assert!(ratio > ideal / 4.0 && ratio < ideal * 4.0, "{kind:?} n={n} ratio={ratio}");
            }
        }
        let e1000 = error_at(QPochExpansion::Full, 1000).abs();
        let e10000 = error_at(QPochExpansion::Full, 10000).abs();
        assert!(e1000 < 10.0 * e10000 * 10.0);
        assert!(error_at(QPochExpansion::Linear { delta: 0.5 }, 1000).abs() < 5e-3);
    }

    #[test]
    fn diffusive_without_alpha_is_linear() {
        for n in [10usize, 1000] {
            let a = asym_log_qpoch(1.0, n, QPochExpansion::Diffusive { delta: 0.3, alpha: 0.0 }).unwrap();
            let b = asym_log_qpoch(1.0, n, QPochExpansion::Linear { delta: 0.3 }).unwrap();
            assert_eq!(a, b);
        }
        assert!(asym_log_qpoch(1.0, 0, QPochExpansion::Full).is_err());
    }

    #[test]
    fn starr_density_properties() {
        assert!((starr_density(&pt(0.001, 0.3, 0.7)) - 1.0).abs() < 1e-3);
        for p in grid() {
            let u = starr_density(&p);
            assert!(u > 0.0);
            assert!((u - starr_density(&pt(p.beta, p.y, p.x))).abs() < 1e-13 * u);
        }
        let (b, x, y, s) = (2.0, 0.4, 0.6, 1e-3);
        let h = |x: f64, y: f64| h_beta(&pt(b, x, y));
        let mixed = (h(x + s, y + s) - h(x + s, y - s) - h(x - s, y + s) + h(x - s, y - s)) / (4.0 * s * s);
        assert!((mixed - starr_density(&pt(b, x, y))).abs() < 1e-6);
    }
}
