//! Exact finite-N laws of the height function.
//!
//! For `max(L+K-N, 0) <= s <= min(L, K)`,
//!
//! ```text
//! P(H_{L,K} = s) = q^{(K-s)(L-s)} (q;q)_K (q;q)_L (q;q)_{N-K} (q;q)_{N-L}
//!                  / [(q;q)_s (q;q)_{K-s} (q;q)_{L-s} (q;q)_{N+s-K-L} (q;q)_N]
//! ```
//!
//! and the block increments over `L_1 <= ... <= L_r` factor into a product of
//! such laws with shrinking `N` and `K`. Log-probabilities outside the support
//! are `-inf` rather than errors, so summation loops stay uniform.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, Error, Result};
use crate::mallows::{scaled_ln_q, MallowsParams, Permutation};
use crate::qnum::{self, NumericConfig, QArgument};

/// Height-function query `H_{L,K}` under the measure `params`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightQuery {
    pub params: MallowsParams,
    pub l: usize,
    pub k: usize,
}

impl HeightQuery {
    pub fn new(params: MallowsParams, l: usize, k: usize) -> Result<Self> {
        let n = params.n;
        if l == 0 || l > n || k == 0 || k > n {
            return Err(out_of_range(format!(
                "need 1 <= L, K <= N = {n}, got L = {l}, K = {k}"
            )));
        }
        Ok(Self { params, l, k })
    }

    pub fn support(&self) -> (usize, usize) {
        support_bounds(self.params.n, self.l, self.k)
    }
}

/// Joint query for the block increments `(s_1, .., s_r)` over `L_1 <= .. <= L_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPointQuery {
    pub params: MallowsParams,
    pub k: usize,
    pub ls: Vec<usize>,
    pub s: Vec<usize>,
}

impl MultiPointQuery {
    pub fn new(params: MallowsParams, k: usize, ls: Vec<usize>, s: Vec<usize>) -> Result<Self> {
        validate_blocks(&params, k, &ls)?;
        if s.len() != ls.len() {
            return Err(out_of_range(format!(
                "{} block values for {} blocks",
                s.len(),
                ls.len()
            )));
        }
        Ok(Self { params, k, ls, s })
    }
}

fn validate_blocks(params: &MallowsParams, k: usize, ls: &[usize]) -> Result<()> {
    let n = params.n;
    if k == 0 || k > n {
        return Err(out_of_range(format!("K must lie in 1..={n}, got {k}")));
    }
    if ls.is_empty() {
        return Err(out_of_range("L list must be nonempty"));
    }
    let mut prev = 1usize;
    for (i, &l) in ls.iter().enumerate() {
        if l < prev || l > n {
            return Err(out_of_range(format!(
                "L list must be nondecreasing within 1..={n}, got L_{} = {l}",
                i + 1
            )));
        }
        prev = l;
    }
    Ok(())
}

/// Support of a height-function law as log-probabilities over `s_min..=s_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfTable {
    #[serde(rename = "N")]
    pub n: usize,
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub s_min: usize,
    pub s_max: usize,
    pub log_probs: Vec<f64>,
}

impl PmfTable {
    pub fn log_prob(&self, s: usize) -> f64 {
        if s < self.s_min || s > self.s_max {
            f64::NEG_INFINITY
        } else {
            self.log_probs[s - self.s_min]
        }
    }

    pub fn prob(&self, s: usize) -> f64 {
        self.log_prob(s).exp()
    }

    /// `(s, probability)` pairs over the support.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.log_probs
            .iter()
            .enumerate()
            .map(move |(i, lp)| (self.s_min + i, lp.exp()))
    }

    pub fn total(&self) -> f64 {
        self.iter().map(|(_, p)| p).collect::<qnum::NeumaierSum>().value()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(s, p)| s as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.iter().map(|(s, p)| (s as f64 - m).powi(2) * p).sum()
    }

    /// Most likely value (smallest on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &lp) in self.log_probs.iter().enumerate() {
            if lp > self.log_probs[best] {
                best = i;
            }
        }
        self.s_min + best
    }
}

/// `[max(L+K-N, 0), min(L, K)]`.
pub fn support_bounds(n: usize, l: usize, k: usize) -> (usize, usize) {
    ((l + k).saturating_sub(n), l.min(k))
}

/// Prefix sums `ln (q;q)_n`, `n = 0..=n_max`, for one `q`. Immutable after
/// construction, so one instance serves every table and thread at that `q`.
#[derive(Debug, Clone)]
pub struct LogQFactorials {
    q: f64,
    ln_q: f64,
    prefix: Vec<f64>,
}

impl LogQFactorials {
    pub fn new(q: f64, n_max: usize) -> Result<Self> {
        Ok(Self {
            q,
            ln_q: q.ln(),
            prefix: qnum::log_qpoch_prefix(q, n_max)?,
        })
    }

    pub fn for_params(params: &MallowsParams) -> Self {
        Self::new(params.q, params.n).expect("params validated")
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn n_max(&self) -> usize {
        self.prefix.len() - 1
    }

    /// `ln (q;q)_n`.
    pub fn ln_qpoch(&self, n: usize) -> f64 {
        self.prefix[n]
    }

    /// Single-point log-PMF for `0 <= L, K <= n <= n_max`; the degenerate
    /// cases `L = 0` or `K = 0` give the point mass at `s = 0`.
    pub fn log_pmf(&self, n: usize, l: usize, k: usize, s: usize) -> f64 {
        debug_assert!(n <= self.n_max() && l <= n && k <= n);
        let (lo, hi) = support_bounds(n, l, k);
        if s < lo || s > hi {
            return f64::NEG_INFINITY;
        }
        let t = &self.prefix;
        // pairwise grouping keeps the value bitwise symmetric under L <-> K
        let num = (t[k] + t[l]) + (t[n - k] + t[n - l]);
        let den = (t[k - s] + t[l - s]) + (t[s] + t[n + s - k - l]) + t[n];
        scaled_ln_q(((k - s) * (l - s)) as f64, self.ln_q) + (num - den)
    }

    /// Table of the single-point law at `(n, L, K)`.
    pub fn table(&self, params: &MallowsParams, l: usize, k: usize) -> PmfTable {
        let n = params.n;
        let (s_min, s_max) = support_bounds(n, l, k);
        PmfTable {
            n,
            q: params.q,
            beta: params.beta,
            l,
            k,
            s_min,
            s_max,
            log_probs: (s_min..=s_max).map(|s| self.log_pmf(n, l, k, s)).collect(),
        }
    }

    /// Joint log-probability of block increments; `-inf` outside the support,
    /// including when the running sum of `s` exceeds `K`.
    pub fn log_pmf_multi(&self, n: usize, k: usize, ls: &[usize], s: &[usize]) -> f64 {
        let mut total = 0.0;
        let mut used_rows = 0usize;
        let mut used_k = 0usize;
        for (&l, &si) in ls.iter().zip(s) {
            if used_k + si > k {
                return f64::NEG_INFINITY;
            }
            let term = self.log_pmf(n - used_rows, l - used_rows, k - used_k, si);
            if term == f64::NEG_INFINITY {
                return term;
            }
            total += term;
            used_rows = l;
            used_k += si;
        }
        total
    }
}

/// `ln P(H_{L,K} = s)` from finite q-Pochhammer symbols.
pub fn log_pmf_height(query: &HeightQuery, s: usize) -> f64 {
    LogQFactorials::for_params(&query.params).log_pmf(query.params.n, query.l, query.k, s)
}

/// The same law through infinite products `(q^m; q)_inf`.
pub fn log_pmf_height_infinite_form(query: &HeightQuery, s: usize, cfg: &NumericConfig) -> Result<f64> {
    let (n, l, k) = (query.params.n, query.l, query.k);
    let (lo, hi) = query.support();
    if s < lo || s > hi {
        return Ok(f64::NEG_INFINITY);
    }
    let q = query.params.q;
    let inf = |m: usize| -> Result<f64> { qnum::log_qpoch_inf(QArgument::new(q, m as f64)?, cfg) };
    let num = inf(s + 1)? + inf(n + 1)? + inf(k - s + 1)? + inf(l - s + 1)? + inf(n + s + 1 - k - l)?;
    let den = inf(k + 1)? + inf(l + 1)? + inf(n - k + 1)? + inf(n - l + 1)? + inf(1)?;
    Ok(scaled_ln_q(((k - s) * (l - s)) as f64, query.params.ln_q()) + num - den)
}

/// The same law through q-factorials `[n]!_q = (q;q)_n / (1-q)^n`, each
/// accumulated as `sum_{j<=n} ln [j]_q`.
pub fn log_pmf_height_qfactorial(query: &HeightQuery, s: usize) -> f64 {
    let (n, l, k) = (query.params.n, query.l, query.k);
    let (lo, hi) = query.support();
    if s < lo || s > hi {
        return f64::NEG_INFINITY;
    }
    let ln_q = query.params.ln_q();
    let ln_one_minus_q = (-query.params.q).ln_1p();
    let ln_qfact = |m: usize| -> f64 {
        (1..=m)
            .map(|j| qnum::ln_one_minus_qpow(ln_q, j as f64) - ln_one_minus_q)
            .collect::<qnum::NeumaierSum>()
            .value()
    };
    let num = ln_qfact(k) + ln_qfact(l) + ln_qfact(n - k) + ln_qfact(n - l);
    let den = ln_qfact(s) + ln_qfact(k - s) + ln_qfact(l - s) + ln_qfact(n + s - k - l) + ln_qfact(n);
    scaled_ln_q(((k - s) * (l - s)) as f64, ln_q) + num - den
}

/// Full table of `H_{L,K}`.
pub fn pmf_table(query: &HeightQuery) -> PmfTable {
    LogQFactorials::for_params(&query.params).table(&query.params, query.l, query.k)
}

/// `ln P(block increments = s)` for a multi-point query.
pub fn log_pmf_multi(query: &MultiPointQuery) -> f64 {
    LogQFactorials::for_params(&query.params).log_pmf_multi(query.params.n, query.k, &query.ls, &query.s)
}

/// Exact joint law of block increments (keys) with probabilities (values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTable {
    pub k: usize,
    pub ls: Vec<usize>,
    pub probs: BTreeMap<Vec<usize>, f64>,
}

impl JointTable {
    /// Re-key by cumulative heights `(H_{L_1,K}, .., H_{L_r,K})`.
    pub fn cumulative(&self) -> BTreeMap<Vec<usize>, f64> {
        self.probs
            .iter()
            .map(|(blocks, &p)| {
                let mut acc = 0;
                let cum = blocks
                    .iter()
                    .map(|b| {
                        acc += b;
                        acc
                    })
                    .collect();
                (cum, p)
            })
            .collect()
    }

    /// Mean vector and covariance matrix of the cumulative heights.
    pub fn cumulative_moments(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let r = self.ls.len();
        let cum = self.cumulative();
        let mut mean = vec![0.0; r];
        for (h, p) in &cum {
            for i in 0..r {
                mean[i] += p * h[i] as f64;
            }
        }
        let mut cov = vec![vec![0.0; r]; r];
        for (h, p) in &cum {
            for i in 0..r {
                for j in 0..r {
                    cov[i][j] += p * (h[i] as f64 - mean[i]) * (h[j] as f64 - mean[j]);
                }
            }
        }
        (mean, cov)
    }
}

/// Joint law of the block increments from the product formula, by
/// enumerating every admissible `(s_1, .., s_r)`.
pub fn multi_point_joint(params: &MallowsParams, ls: &[usize], k: usize) -> Result<JointTable> {
    validate_blocks(params, k, ls)?;
    let cache = LogQFactorials::for_params(params);
    let mut probs = BTreeMap::new();
    let mut prefix = Vec::with_capacity(ls.len());
    fn recurse(
        cache: &LogQFactorials,
        n: usize,
        k: usize,
        ls: &[usize],
        prefix: &mut Vec<usize>,
        used_rows: usize,
        used_k: usize,
        acc: f64,
        out: &mut BTreeMap<Vec<usize>, f64>,
    ) {
        let i = prefix.len();
        if i == ls.len() {
            out.insert(prefix.clone(), acc.exp());
            return;
        }
        let (nn, ll, kk) = (n - used_rows, ls[i] - used_rows, k - used_k);
        let (lo, hi) = support_bounds(nn, ll, kk);
        for s in lo..=hi {
            let lp = cache.log_pmf(nn, ll, kk, s);
            prefix.push(s);
            recurse(cache, n, k, ls, prefix, ls[i], used_k + s, acc + lp, out);
            prefix.pop();
        }
    }
    recurse(&cache, params.n, k, ls, &mut prefix, 0, 0, 0.0, &mut probs);
    Ok(JointTable {
        k,
        ls: ls.to_vec(),
        probs,
    })
}

/// Calls `f` on every permutation of `{1..n}` (Heap's algorithm).
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&Permutation)) {
    let mut a: Vec<u32> = (1..=n as u32).collect();
    let mut c = vec![0usize; n];
    let mut perm = Permutation::from_vec_unchecked(a.clone());
    f(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            perm = Permutation::from_vec_unchecked(a.clone());
            f(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

const BRUTE_FORCE_MAX_N: usize = 9;

fn quadratic_inversions(w: &[u32]) -> i32 {
    let mut c = 0;
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            if w[i] > w[j] {
                c += 1;
            }
        }
    }
    c
}

/// Enumerates `S_N`, weights each permutation by `q^inv / Z` with `Z` summed
/// directly, and bins by the statistic `stat`.
fn brute_force_law<K: Ord>(params: &MallowsParams, stat: impl Fn(&Permutation) -> K) -> Result<BTreeMap<K, f64>> {
    if params.n > BRUTE_FORCE_MAX_N {
        return Err(Error::TooLarge(params.n));
    }
    let mut weights: BTreeMap<K, f64> = BTreeMap::new();
    let mut z = 0.0;
    for_each_permutation(params.n, |w| {
        let weight = params.q.powi(quadratic_inversions(w.as_slice()));
        z += weight;
        *weights.entry(stat(w)).or_default() += weight;
    });
    for v in weights.values_mut() {
        *v /= z;
    }
    Ok(weights)
}

/// Oracle law of `H_{L,K}` by enumerating `S_N` (`N <= 9`).
pub fn brute_force_pmf(query: &HeightQuery) -> Result<PmfTable> {
    let (l, k) = (query.l, query.k);
    let law = brute_force_law(&query.params, |w| {
        w.as_slice()[..l].iter().filter(|&&v| v as usize <= k).count()
    })?;
    let (s_min, s_max) = query.support();
    Ok(PmfTable {
        n: query.params.n,
        q: query.params.q,
        beta: query.params.beta,
        l,
        k,
        s_min,
        s_max,
        log_probs: (s_min..=s_max)
            .map(|s| law.get(&s).copied().unwrap_or(0.0).ln())
            .collect(),
    })
}

/// Oracle joint law of block increments by enumerating `S_N` (`N <= 9`).
pub fn brute_force_joint(params: &MallowsParams, ls: &[usize], k: usize) -> Result<JointTable> {
    validate_blocks(params, k, ls)?;
    let probs = brute_force_law(params, |w| {
        let mut prev = 0;
        ls.iter()
            .map(|&l| {
                let c = w.as_slice()[prev..l].iter().filter(|&&v| v as usize <= k).count();
                prev = l;
                c
            })
            .collect::<Vec<usize>>()
    })?;
    Ok(JointTable {
        k,
        ls: ls.to_vec(),
        probs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn query(n: usize, q: f64, l: usize, k: usize) -> HeightQuery {
        HeightQuery::new(MallowsParams::new(n, q).unwrap(), l, k).unwrap()
    }

    #[test]
    fn support_examples() {
        assert_eq!(support_bounds(10, 3, 4), (0, 3));
        assert_eq!(support_bounds(10, 7, 8), (5, 7));
        assert_eq!(support_bounds(5, 5, 2), (2, 2));
    }

    #[test]
    fn s2_values() {
        for &q in &[0.1, 0.5, 0.9] {
            let lp = log_pmf_height(&query(2, q, 1, 1), 1);
            assert!((lp - (1.0 / (1.0 + q)).ln()).abs() < 1e-14);
        }
        assert!((log_pmf_height(&query(2, 0.5, 1, 1), 0) - (1.0f64 / 3.0).ln()).abs() < 1e-14);
        assert!((log_pmf_height_qfactorial(&query(2, 0.5, 1, 1), 1) - (2.0f64 / 3.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn q_zero_point_mass() {
        let t = pmf_table(&query(6, 0.0, 3, 4));
        assert_eq!(t.log_prob(3), 0.0);
        for s in 0..3 {
            assert_eq!(t.log_prob(s), f64::NEG_INFINITY);
        }
        let brute = brute_force_pmf(&query(5, 0.0, 2, 4)).unwrap();
        assert_eq!(brute.prob(2), 1.0);
    }

    #[test]
    fn out_of_support_is_sentinel() {
        let qy = query(10, 0.5, 7, 8);
        assert_eq!(log_pmf_height(&qy, 4), f64::NEG_INFINITY);
        assert_eq!(log_pmf_height(&qy, 8), f64::NEG_INFINITY);
        assert_eq!(log_pmf_height_qfactorial(&qy, 8), f64::NEG_INFINITY);
        assert!(HeightQuery::new(MallowsParams::new(5, 0.5).unwrap(), 0, 2).is_err());
    }

    #[test]
    fn n6_table_normalized_and_symmetric() {
        let a = pmf_table(&query(6, 0.5, 3, 4));
        assert!((a.total() - 1.0).abs() < 1e-12);
        let b = pmf_table(&query(6, 0.5, 4, 3));
        assert_eq!(a.log_probs, b.log_probs);
    }

    #[test]
    fn formula_matches_brute_force() {
        for n in 1..=8 {
            for &q in &[0.1, 0.5, 0.9] {
                for l in 1..=n {
                    for k in 1..=n {
                        let qy = query(n, q, l, k);
                        let oracle = brute_force_pmf(&qy).unwrap();
                        let table = pmf_table(&qy);
                        for s in 0..=n {
                            let diff = (table.prob(s) - oracle.prob(s)).abs();
                            assert!(diff < 1e-12, "n={n} q={q} L={l} K={k} s={s}: {diff}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn three_forms_agree() {
        let cfg = NumericConfig::default();
        for &(n, q) in &[(8usize, 0.3f64), (8, 0.9), (40, 0.97), (200, 0.995)] {
            let cache = LogQFactorials::new(q, n).unwrap();
            let params = MallowsParams::new(n, q).unwrap();
            for &(l, k) in &[(1, 1), (n / 2, n / 3 + 1), (n, n / 2), (n - 1, n - 1)] {
                let qy = HeightQuery::new(params, l, k).unwrap();
                let (lo, hi) = qy.support();
                for s in lo..=hi {
                    let base = cache.log_pmf(n, l, k, s);
                    if base < -600.0 {
                        continue;
                    }
                    let fact = log_pmf_height_qfactorial(&qy, s);
                    let inf = log_pmf_height_infinite_form(&qy, s, &cfg).unwrap();
                    assert!((base - fact).abs() < 1e-10, "n={n} L={l} K={k} s={s}");
                    assert!((base - inf).abs() < 1e-10, "n={n} L={l} K={k} s={s}: {base} vs {inf}");
                }
            }
        }
    }

    #[test]
    fn n3_qfactorial_matches_oracle() {
        let qy = query(3, 0.3, 2, 2);
        let oracle = brute_force_pmf(&qy).unwrap();
        assert!((log_pmf_height_qfactorial(&qy, 2).exp() - oracle.prob(2)).abs() < 1e-14);
    }

    #[test]
    fn multi_reduces_to_single() {
        let params = MallowsParams::new(7, 0.6).unwrap();
        for s in 0..=4 {
            let mq = MultiPointQuery::new(params, 4, vec![3], vec![s]).unwrap();
            let single = log_pmf_height(&HeightQuery::new(params, 3, 4).unwrap(), s);
            assert_eq!(log_pmf_multi(&mq), single);
        }
    }

    #[test]
    fn multi_normalized_n5() {
        let params = MallowsParams::new(5, 0.4).unwrap();
        let mut total = 0.0;
        for s1 in 0..=5 {
            for s2 in 0..=5 {
                let mq = MultiPointQuery::new(params, 3, vec![2, 4], vec![s1, s2]).unwrap();
                total += log_pmf_multi(&mq).exp();
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multi_matches_s6_enumeration() {
        let params = MallowsParams::new(6, 0.5).unwrap();
        let oracle = brute_force_joint(&params, &[2, 5], 3).unwrap();
        let joint = multi_point_joint(&params, &[2, 5], 3).unwrap();
        for s1 in 0..=3 {
            for s2 in 0..=3 {
                let key = vec![s1, s2];
                let expected = oracle.probs.get(&key).copied().unwrap_or(0.0);
                let got = log_pmf_multi(&MultiPointQuery::new(params, 3, vec![2, 5], key.clone()).unwrap()).exp();
                assert!((got - expected).abs() < 1e-12, "{key:?}");
                assert!((joint.probs.get(&key).copied().unwrap_or(0.0) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn multi_cumulative_constraint_enforced() {
        let params = MallowsParams::new(6, 0.5).unwrap();
        // each block could hold 2 small values on its own, but K = 3 caps the sum
        let mq = MultiPointQuery::new(params, 3, vec![2, 4], vec![2, 2]).unwrap();
        assert_eq!(log_pmf_multi(&mq), f64::NEG_INFINITY);
        assert!(MultiPointQuery::new(params, 3, vec![4, 2], vec![0, 0]).is_err());
        assert!(MultiPointQuery::new(params, 3, vec![2, 4], vec![0]).is_err());
    }

    #[test]
    fn marginalization() {
        let params = MallowsParams::from_beta(60, 2.0).unwrap();
        let cache = LogQFactorials::for_params(&params);
        let (k, ls) = (25usize, [20usize, 45]);
        for s1 in 0..=20 {
            let single = cache.log_pmf(60, 20, k, s1).exp();
            let summed: f64 = (0..=25).map(|s2| cache.log_pmf_multi(60, k, &ls, &[s1, s2]).exp()).sum();
            assert!((summed - single).abs() < 1e-11, "s1={s1}");
        }
    }

    #[test]
    fn brute_force_limits() {
        let big = MallowsParams::new(10, 0.5).unwrap();
        assert!(matches!(
            brute_force_pmf(&HeightQuery::new(big, 2, 2).unwrap()),
            Err(Error::TooLarge(10))
        ));
        let t = brute_force_pmf(&query(2, 0.5, 1, 1)).unwrap();
        assert!((t.prob(1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((t.prob(0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn enumeration_counts() {
        let mut count = 0;
        let mut seen = std::collections::HashSet::new();
        for_each_permutation(6, |w| {
            count += 1;
            seen.insert(w.clone());
        });
        assert_eq!(count, 720);
        assert_eq!(seen.len(), 720);
    }

    #[test]
    fn table_serde() {
        let t = pmf_table(&HeightQuery::new(MallowsParams::from_beta(12, 1.0).unwrap(), 5, 6).unwrap());
        let json = serde_json::to_string(&t).unwrap();
        let back: PmfTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn symmetry_and_normalization(n in 1usize..300, beta in 0.1f64..6.0, lf in 0.0f64..1.0, kf in 0.0f64..1.0) {
                prop_assume!(beta < n as f64);
                let params = MallowsParams::from_beta(n, beta).unwrap();
                let l = 1 + (lf * (n - 1) as f64) as usize;
                let k = 1 + (kf * (n - 1) as f64) as usize;
                let cache = LogQFactorials::for_params(&params);
                let a = cache.table(&params, l, k);
                let b = cache.table(&params, k, l);
                prop_assert_eq!(&a.log_probs, &b.log_probs);
                prop_assert!((a.total() - 1.0).abs() < 1e-10);
            }
        }
    }
}
