use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fenwick::FenwickSet;
use super::{MallowsParams, Permutation};
use crate::error::{domain, Result};

/// Identifies one reproducible pseudo-random stream.
///
/// The generator is ChaCha8 keyed from `root_seed` with the 64-bit stream
/// (nonce) word set to `stream_index`; distinct indices give disjoint
/// keystreams, and output does not depend on which thread consumes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub root_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(root_seed: u64, stream_index: u64) -> Self {
        Self { root_seed, stream_index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root_seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// The `j`-th stream after this one.
    pub fn substream(&self, j: u64) -> SeedSpec {
        SeedSpec {
            root_seed: self.root_seed,
            stream_index: self.stream_index.wrapping_add(j),
        }
    }
}

/// Inverse-CDF draw from `G_{n,q}(i) = q^{i-1}(1-q)/(1-q^n)` on `{1..n}`.
///
/// `i = 1 + floor(ln(1 - u(1-q^n)) / ln q)` with `1 - q^n` and the outer
/// logarithm evaluated through `expm1`/`ln_1p`, clamped to `[1, n]`.
pub fn sample_truncated_geometric(n: usize, q: f64, u: f64) -> Result<usize> {
    if n == 0 {
        return Err(domain("truncated geometric needs n >= 1"));
    }
    crate::qnum::check_q(q)?;
    if !(0.0..1.0).contains(&u) {
        return Err(domain(format!("u must lie in [0, 1), got {u}")));
    }
    Ok(truncated_geometric(n, q, q.ln(), u))
}

#[inline]
fn truncated_geometric(n: usize, q: f64, ln_q: f64, u: f64) -> usize {
    if n == 1 || q == 0.0 {
        return 1;
    }
    let mass = -(n as f64 * ln_q).exp_m1();
    let t = (-u * mass).ln_1p() / ln_q;
    if t.is_finite() && mass > 0.0 {
        (1 + t.floor() as usize).clamp(1, n)
    } else {
        linear_scan(n, q, u)
    }
}

fn linear_scan(n: usize, q: f64, u: f64) -> usize {
    // unnormalized masses q^{i-1}; compare u against the running CDF
    let total: f64 = (0..n).map(|i| q.powi(i as i32)).sum();
    let mut acc = 0.0;
    let mut w = 1.0;
    for i in 1..=n {
        acc += w;
        if u * total < acc {
            return i;
        }
        w *= q;
    }
    n
}

/// One draw from `M_N^q` via the q-shuffle on its own seeded stream.
pub fn q_shuffle_sample(p: &MallowsParams, seed: SeedSpec) -> Permutation {
    q_shuffle_sample_with(p, &mut seed.rng())
}

/// The q-shuffle: at step `k` draw `xi_k ~ G_{N-k+1,q}` and take the
/// `xi_k`-th smallest value not yet used. Remaining values live in a
/// Fenwick tree, so a draw costs `O(N log N)`.
pub fn q_shuffle_sample_with<R: Rng + ?Sized>(p: &MallowsParams, rng: &mut R) -> Permutation {
    let n = p.n;
    let ln_q = p.ln_q();
    let mut remaining = FenwickSet::full(n);
    let mut out = Vec::with_capacity(n);
    for step in 0..n {
        let u: f64 = rng.gen();
        let xi = truncated_geometric(n - step, p.q, ln_q, u);
        let value = remaining.take_kth(xi).expect("xi within remaining count");
        out.push(value as u32);
    }
    Permutation::from_vec_unchecked(out)
}
