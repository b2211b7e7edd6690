//! The Mallows measure `M_N^q(w) = q^{inv(w)} Y_N` on permutations of `{1..N}`.

mod fenwick;
mod permutation;
mod sampler;

pub use fenwick::FenwickSet;
pub use permutation::{height, inversion_count, multi_height, Permutation};
pub use sampler::{q_shuffle_sample, q_shuffle_sample_with, sample_truncated_geometric, SeedSpec};

use serde::{Deserialize, Serialize};

use crate::error::{domain, out_of_range, Error, Result};
use crate::qnum;

/// Size and deformation parameter of the measure.
///
/// When built from `beta`, `q = 1 - beta/N` is computed here once and every
/// other module reads it from this struct.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct MallowsParams {
    pub n: usize,
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Deserialize)]
struct RawParams {
    n: usize,
    q: f64,
    #[serde(default)]
    beta: Option<f64>,
}

impl TryFrom<RawParams> for MallowsParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        let p = match raw.beta {
            Some(beta) => MallowsParams::from_beta(raw.n, beta)?,
            None => MallowsParams::new(raw.n, raw.q)?,
        };
        if p.q != raw.q {
            return Err(domain(format!(
                "q = {} inconsistent with beta (expected {})",
                raw.q, p.q
            )));
        }
        Ok(p)
    }
}

impl MallowsParams {
    pub fn new(n: usize, q: f64) -> Result<Self> {
        if n == 0 {
            return Err(out_of_range("N must be positive"));
        }
        qnum::check_q(q)?;
        Ok(Self { n, q, beta: None })
    }

    /// The scaling regime `q = 1 - beta/N`, requiring `0 < beta < N`.
    pub fn from_beta(n: usize, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(out_of_range("N must be positive"));
        }
        if !(beta > 0.0 && beta < n as f64) {
            return Err(domain(format!("beta must lie in (0, N = {n}), got {beta}")));
        }
        Ok(Self {
            n,
            q: 1.0 - beta / n as f64,
            beta: Some(beta),
        })
    }

    /// `ln q`, which is `-inf` at `q = 0`.
    pub fn ln_q(&self) -> f64 {
        self.q.ln()
    }

    /// `ln Y_N = N ln(1 - q) - ln (q; q)_N`.
    pub fn log_normalizer(&self) -> f64 {
        let n = self.n as f64;
        n * (-self.q).ln_1p() - qnum::log_qpoch_finite(self.q, self.n).expect("q validated")
    }
}

/// `k * ln q` with the convention `0 * ln 0 = 0`.
#[inline]
pub(crate) fn scaled_ln_q(k: f64, ln_q: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * ln_q
    }
}

/// `ln M_N^q(w) = inv(w) ln q + ln Y_N`.
pub fn mallows_log_prob(w: &Permutation, p: &MallowsParams) -> Result<f64> {
    if w.len() != p.n {
        return Err(Error::SizeMismatch {
            expected: p.n,
            found: w.len(),
        });
    }
    Ok(scaled_ln_q(inversion_count(w) as f64, p.ln_q()) + p.log_normalizer())
}

/// Log-space residual of q-exchangeability at the adjacent pair `(i, i+1)`:
/// `q M(w) = M(w_{i,i+1})` if `w(i) < w(i+1)`, and `M(w) = q M(w_{i,i+1})` otherwise.
pub fn q_exchangeability_residual(w: &Permutation, i: usize, p: &MallowsParams) -> Result<f64> {
    if i == 0 || i >= p.n {
        return Err(out_of_range(format!(
            "index must lie in 1..={}, got {i}",
            p.n.saturating_sub(1)
        )));
    }
    let swapped = w.swap_adjacent(i)?;
    let here = mallows_log_prob(w, p)?;
    let there = mallows_log_prob(&swapped, p)?;
    let ln_q = p.ln_q();
    let (lhs, rhs) = if w.at(i) < w.at(i + 1) {
        (ln_q + here, there)
    } else {
        (here, ln_q + there)
    };
    if lhs == f64::NEG_INFINITY && rhs == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    Ok((lhs - rhs).abs())
}
