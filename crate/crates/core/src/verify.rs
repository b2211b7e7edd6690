//! Confrontation harness: exact laws against limit laws, and Monte Carlo
//! against both.
//!
//! Every report is a pure function of its configuration. Monte Carlo draws
//! sample `j` from substream `j` of the configured seed and collects results
//! in index order, so thread count and scheduling never change a number.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::asymlaw::{self, LawPoint};
use crate::error::{domain, Result};
use crate::exactdist::{self, LogQFactorials};
use crate::mallows::{mallows_log_prob, q_shuffle_sample, MallowsParams, Permutation, SeedSpec};

/// Pass/fail tolerances. Statistical ones are deliberately loose enough that
/// a correct implementation fails only with negligible probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub z_max: f64,
    pub p_min: f64,
    pub ks_max: f64,
    pub cov_se_max: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub ldp_gap_max: f64,
    pub min_expected_count: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            z_max: 4.0,
            p_min: 1e-3,
            ks_max: 0.02,
            cov_se_max: 4.0,
            ratio_min: 1.0,
            ratio_max: 8.0,
            ldp_gap_max: 0.02,
            min_expected_count: 5.0,
        }
    }
}

/// One experiment. Single-point checks use `y_list[0]`; `L = floor(xN)` and
/// `K = floor(yN)` throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub beta: f64,
    pub x: f64,
    pub y_list: Vec<f64>,
    pub n_list: Vec<usize>,
    pub n_samples: usize,
    pub seed: SeedSpec,
    /// Constant `A_N`: the local window is `|k - center| < A_N sqrt(N)`.
    pub window: f64,
    /// `K` is shifted to `floor(yN + gamma sqrt(N))`.
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub thresholds: Thresholds,
}

impl ExperimentConfig {
    pub fn new(beta: f64, x: f64, y: f64, n_list: Vec<usize>) -> Self {
        Self {
            beta,
            x,
            y_list: vec![y],
            n_list,
            n_samples: 100_000,
            seed: SeedSpec::new(0, 0),
            window: 2.0,
            gamma: 0.0,
            delta: None,
            thresholds: Thresholds::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.y_list.is_empty() {
            return Err(domain("y list must be nonempty"));
        }
        for &y in &self.y_list {
            LawPoint::new(self.beta, self.x, y)?;
        }
        if self.n_list.is_empty() || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("N list must be nonempty and strictly increasing"));
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| self.beta >= n as f64) {
            return Err(domain(format!("beta = {} must be below every N, got N = {n}", self.beta)));
        }
        if self.n_samples == 0 {
            return Err(domain("n_samples must be at least 1"));
        }
        if !(self.window > 0.0) {
            return Err(domain(format!("window A_N must be positive, got {}", self.window)));
        }
        Ok(())
    }

    pub fn point(&self) -> LawPoint {
        LawPoint::new(self.beta, self.x, self.y_list[0]).expect("validated")
    }

    fn params(&self, n: usize) -> MallowsParams {
        MallowsParams::from_beta(n, self.beta).expect("validated")
    }
}

fn floor_index(t: f64, n: usize) -> usize {
    (t.floor().max(1.0) as usize).min(n)
}

/// Long-format row for external plotting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub n: usize,
    pub k_or_delta: f64,
    pub exact: f64,
    pub predicted: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcltRow {
    pub n: usize,
    pub l: usize,
    pub k: usize,
    pub center: f64,
    pub window_points: usize,
    pub max_rel_error: f64,
    pub peak_rel_error: f64,
    /// Most likely height under the exact law.
    pub exact_argmax: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcltReport {
    pub rows: Vec<LcltRow>,
    pub plot: Vec<PlotRow>,
    pub strictly_decreasing: bool,
    /// `error(N_{m-1}) / error(N_m)` for the last two sizes.
    pub last_ratio: Option<f64>,
    pub passed: bool,
}

/// Exact PMF against the Gaussian local limit over `|k - center| < A_N sqrt(N)`,
/// where `center = hN + mu sqrt(N)` accounts for the `gamma` shift of `K`.
pub fn lclt_sweep(cfg: &ExperimentConfig) -> Result<LcltReport> {
    cfg.validate()?;
    let p = cfg.point();
    let h = asymlaw::h_beta(&p);
    let mu = asymlaw::mu_beta(&p, cfg.gamma);
    let mut rows = Vec::new();
    let mut plot = Vec::new();
    for &n in &cfg.n_list {
        let nf = n as f64;
        let sqrt_n = nf.sqrt();
        let l = floor_index(cfg.x * nf, n);
        let k = floor_index(p.y * nf + cfg.gamma * sqrt_n, n);
        let params = cfg.params(n);
        let table = LogQFactorials::for_params(&params).table(&params, l, k);
        let center = h * nf + mu * sqrt_n;
        let half = cfg.window * sqrt_n;
        let lo = (center - half).floor().max(0.0) as usize;
        let hi = (center + half).ceil() as usize;
        let mut max_rel = 0.0f64;
        let mut peak_rel = 0.0;
        let mut best_gap = f64::INFINITY;
        let mut points = 0;
        for s in lo..=hi.min(n) {
            let sf = s as f64;
            if (sf - center).abs() >= half {
                continue;
            }
            let exact = table.prob(s);
            let predicted = asymlaw::lclt_prediction(&p, n, sf, cfg.gamma);
            let rel = (exact / predicted - 1.0).abs();
            max_rel = max_rel.max(rel);
            if (sf - center).abs() < best_gap {
                best_gap = (sf - center).abs();
                peak_rel = rel;
            }
            points += 1;
            plot.push(PlotRow {
                n,
                k_or_delta: sf,
                exact,
                predicted,
                rel_error: rel,
            });
        }
        rows.push(LcltRow {
            n,
            l,
            k,
            center,
            window_points: points,
            max_rel_error: max_rel,
            peak_rel_error: peak_rel,
            exact_argmax: table.argmax(),
        });
    }
    let strictly_decreasing = rows.windows(2).all(|w| w[1].max_rel_error < w[0].max_rel_error);
    let last_ratio = match rows.as_slice() {
        [.., a, b] => Some(a.max_rel_error / b.max_rel_error),
        _ => None,
    };
    let t = &cfg.thresholds;
    let ratio_ok = last_ratio.is_none_or(|r| r >= t.ratio_min && r <= t.ratio_max);
    Ok(LcltReport {
        passed: strictly_decreasing && ratio_ok,
        rows,
        plot,
        strictly_decreasing,
        last_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpRow {
    pub n: usize,
    pub s: usize,
    pub log_pmf: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpReport {
    pub delta: f64,
    pub rate: f64,
    pub rows: Vec<LdpRow>,
    pub decreasing: bool,
    pub passed: bool,
}

/// `|ln P(H = floor(delta N)) / N + a_beta(delta)|` along `cfg.n_list`.
pub fn ldp_check(cfg: &ExperimentConfig) -> Result<LdpReport> {
    cfg.validate()?;
    let p = cfg.point();
    let delta = cfg.delta.ok_or_else(|| domain("LDP check needs delta"))?;
    let rate = asymlaw::rate_a(&p, delta)?;
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        let nf = n as f64;
        let params = cfg.params(n);
        let l = floor_index(p.x * nf, n);
        let k = floor_index(p.y * nf, n);
        let s = (delta * nf).floor() as usize;
        let cache = LogQFactorials::for_params(&params);
        let log_pmf = cache.log_pmf(n, l, k, s);
        rows.push(LdpRow {
            n,
            s,
            log_pmf,
            gap: (log_pmf / nf + rate).abs(),
        });
    }
    let decreasing = rows.windows(2).all(|w| w[1].gap < w[0].gap);
    let last_ok = rows.last().is_some_and(|r| r.gap < cfg.thresholds.ldp_gap_max);
    Ok(LdpReport {
        delta,
        rate,
        passed: decreasing && last_ok,
        rows,
        decreasing,
    })
}

/// Draws `n_samples` permutations on substreams `0..n_samples` and maps each
/// through `f`, in parallel, returning results in substream order.
pub fn monte_carlo<T, F>(params: &MallowsParams, n_samples: usize, seed: SeedSpec, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&Permutation) -> T + Sync,
{
    (0..n_samples as u64)
        .into_par_iter()
        .map(|j| f(&q_shuffle_sample(params, seed.substream(j))))
        .collect()
}

fn first_l_count(w: &Permutation, l: usize, k: usize) -> usize {
    w.as_slice()[..l].iter().filter(|&&v| v as usize <= k).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlnRow {
    pub n: usize,
    pub sample_mean: f64,
    pub limit: f64,
    pub standard_error: f64,
    pub z: f64,
    /// `z` against the exact finite-N mean, free of the `O(1/N)` floor bias.
    pub z_exact_mean: f64,
    pub passed: bool,
}

/// Sample mean of `H/N` against the limit shape at one size.
pub fn lln_mc_row(params: &MallowsParams, x: f64, y: f64, n_samples: usize, seed: SeedSpec, t: &Thresholds) -> Result<LlnRow> {
    let n = params.n;
    let nf = n as f64;
    let l = floor_index(x * nf, n);
    let k = floor_index(y * nf, n);
    if params.q == 0.0 {
        let limit = l.min(k) as f64 / nf;
        return Ok(LlnRow {
            n,
            sample_mean: limit,
            limit,
            standard_error: 0.0,
            z: 0.0,
            z_exact_mean: 0.0,
            passed: true,
        });
    }
    let beta = params.beta.unwrap_or(nf * (1.0 - params.q));
    let p = LawPoint::new(beta, x, y)?;
    let heights = monte_carlo(params, n_samples, seed, |w| first_l_count(w, l, k));
    let mean = heights.iter().map(|&h| h as f64).sum::<f64>() / (n_samples as f64 * nf);
    let limit = asymlaw::h_beta(&p);
    let se = asymlaw::sigma_n_beta(&p, n) / (nf * (n_samples as f64).sqrt());
    let z = (mean - limit) / se;
    let exact_mean = LogQFactorials::for_params(params).table(params, l, k).mean() / nf;
    Ok(LlnRow {
        n,
        sample_mean: mean,
        limit,
        standard_error: se,
        z,
        z_exact_mean: (mean - exact_mean) / se,
        passed: z.abs() < t.z_max,
    })
}

pub fn lln_mc_check(cfg: &ExperimentConfig) -> Result<Vec<LlnRow>> {
    cfg.validate()?;
    let p = cfg.point();
    cfg.n_list
        .iter()
        .map(|&n| lln_mc_row(&cfg.params(n), p.x, p.y, cfg.n_samples, cfg.seed, &cfg.thresholds))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsRow {
    pub n: usize,
    pub sigma_n: f64,
    /// ECDF against the normal CDF at lattice midpoints `k + 1/2`.
    pub ks_midpoint: f64,
    /// Plain sup distance between the ECDF step function and the normal CDF.
    pub ks_plain: f64,
    pub passed: bool,
}

/// The two Kolmogorov-Smirnov distances of an integer sample against
/// `Normal(center, scale)`.
pub fn ks_distances(values: &[usize], center: f64, scale: f64) -> (f64, f64) {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let phi = |t: f64| normal.cdf((t - center) / scale);
    let lo = *values.iter().min().expect("nonempty sample");
    let hi = *values.iter().max().expect("nonempty sample");
    let mut counts = vec![0usize; hi - lo + 1];
    for &v in values {
        counts[v - lo] += 1;
    }
    let total = values.len() as f64;
    let mut midpoint = phi(lo as f64 - 0.5);
    let mut plain = 0.0f64;
    let mut below = 0.0;
    for (i, &c) in counts.iter().enumerate() {
        let k = (lo + i) as f64;
        let at = below + c as f64 / total;
        let jump = phi(k);
        plain = plain.max((below - jump).abs()).max((at - jump).abs());
        midpoint = midpoint.max((at - phi(k + 0.5)).abs());
        below = at;
    }
    (midpoint, plain)
}

/// Global CLT: ECDF of `H` against `Normal(hN, sigma_N)` at each size.
pub fn clt_ks_check(cfg: &ExperimentConfig) -> Result<Vec<KsRow>> {
    cfg.validate()?;
    let p = cfg.point();
    let h = asymlaw::h_beta(&p);
    cfg.n_list
        .iter()
        .map(|&n| {
            let nf = n as f64;
            let l = floor_index(p.x * nf, n);
            let k = floor_index(p.y * nf, n);
            let heights = monte_carlo(&cfg.params(n), cfg.n_samples, cfg.seed, |w| first_l_count(w, l, k));
            let sigma_n = asymlaw::sigma_n_beta(&p, n);
            let (ks_midpoint, ks_plain) = ks_distances(&heights, h * nf, sigma_n);
            Ok(KsRow {
                n,
                sigma_n,
                ks_midpoint,
                ks_plain,
                passed: ks_midpoint < cfg.thresholds.ks_max,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactJointCheck {
    pub n: usize,
    pub covariance: Vec<Vec<f64>>,
    pub correlation: Vec<Vec<f64>>,
    pub limit_correlation: Vec<Vec<f64>>,
    /// Exact and limiting correlations are both positive and decay with
    /// separation in `y`.
    pub ordering_matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovRow {
    pub n: usize,
    pub limit: Vec<Vec<f64>>,
    pub empirical: Vec<Vec<f64>>,
    pub standard_error: Vec<Vec<f64>>,
    /// `|empirical - limit| / standard_error`, entrywise.
    pub deviation_se: Vec<Vec<f64>>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovReport {
    pub rows: Vec<CovRow>,
    pub exact: Option<ExactJointCheck>,
    pub passed: bool,
}

fn correlation(cov: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let r = cov.len();
    (0..r)
        .map(|i| (0..r).map(|j| cov[i][j] / (cov[i][i] * cov[j][j]).sqrt()).collect())
        .collect()
}

/// All correlations positive, and for `i < j < k` the outer pair `(i, k)`
/// is less correlated than either inner pair.
fn nested_positive(m: &[Vec<f64>]) -> bool {
    let r = m.len();
    for i in 0..r {
        for k in i + 1..r {
            if m[i][k] <= 0.0 {
                return false;
            }
            if (i + 1..k).any(|j| m[i][k] >= m[i][j] || m[i][k] >= m[j][k]) {
                return false;
            }
        }
    }
    true
}

/// Exact covariance of `(H_{L, K_i})_i` at a small size through the block
/// product formula; `L <-> K` symmetry turns the fixed-row query into blocks
/// of rows `K_1 <= .. <= K_r` below the column bound `L`.
pub fn exact_joint_check(beta: f64, x: f64, y_list: &[f64], n: usize) -> Result<ExactJointCheck> {
    let limit = asymlaw::covariance_spec(beta, x, y_list)?;
    let params = MallowsParams::from_beta(n, beta)?;
    let nf = n as f64;
    let l = floor_index(x * nf, n);
    let ks: Vec<usize> = y_list.iter().map(|&y| floor_index(y * nf, n)).collect();
    let joint = exactdist::multi_point_joint(&params, &ks, l)?;
    let (_, covariance) = joint.cumulative_moments();
    let corr = correlation(&covariance);
    let limit_corr = correlation(&limit.c);
    Ok(ExactJointCheck {
        n,
        ordering_matches: nested_positive(&corr) && nested_positive(&limit_corr),
        covariance,
        correlation: corr,
        limit_correlation: limit_corr,
    })
}

/// Empirical covariance of `((H_{xN, y_i N} - h_beta(x, y_i) N)/sqrt(N))_i`
/// against the limiting matrix, plus the exact small-N route when `exact_n`
/// is given.
pub fn multipoint_cov_check(cfg: &ExperimentConfig, exact_n: Option<usize>) -> Result<CovReport> {
    cfg.validate()?;
    if cfg.n_samples < 2 {
        return Err(domain("covariance needs at least 2 samples"));
    }
    let spec = asymlaw::covariance_spec(cfg.beta, cfg.x, &cfg.y_list)?;
    let r = cfg.y_list.len();
    let hs: Vec<f64> = cfg
        .y_list
        .iter()
        .map(|&y| asymlaw::h_beta(&LawPoint::new(cfg.beta, cfg.x, y).expect("validated")))
        .collect();
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        let nf = n as f64;
        let sqrt_n = nf.sqrt();
        let l = floor_index(cfg.x * nf, n);
        let ks: Vec<usize> = cfg.y_list.iter().map(|&y| floor_index(y * nf, n)).collect();
        let samples = monte_carlo(&cfg.params(n), cfg.n_samples, cfg.seed, |w| {
            let prefix = &w.as_slice()[..l];
            ks.iter()
                .zip(&hs)
                .map(|(&k, &h)| (prefix.iter().filter(|&&v| v as usize <= k).count() as f64 - h * nf) / sqrt_n)
                .collect::<Vec<f64>>()
        });
        let m = samples.len() as f64;
        let mean: Vec<f64> = (0..r).map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / m).collect();
        let mut empirical = vec![vec![0.0; r]; r];
        let mut se = vec![vec![0.0; r]; r];
        let mut deviation = vec![vec![0.0; r]; r];
        for i in 0..r {
            for j in 0..r {
                let prods: Vec<f64> = samples.iter().map(|s| (s[i] - mean[i]) * (s[j] - mean[j])).collect();
                let c = prods.iter().sum::<f64>() / (m - 1.0);
                let var = prods.iter().map(|p| (p - c).powi(2)).sum::<f64>() / (m - 1.0);
                empirical[i][j] = c;
                se[i][j] = (var / m).sqrt();
                deviation[i][j] = (c - spec.c[i][j]).abs() / se[i][j];
            }
        }
        let passed = deviation.iter().flatten().all(|&d| d < cfg.thresholds.cov_se_max);
        rows.push(CovRow {
            n,
            limit: spec.c.clone(),
            empirical,
            standard_error: se,
            deviation_se: deviation,
            passed,
        });
    }
    let exact = exact_n
        .map(|n| exact_joint_check(cfg.beta, cfg.x, &cfg.y_list, n))
        .transpose()?;
    let passed = rows.iter().all(|r| r.passed) && exact.as_ref().is_none_or(|e| e.ordering_matches);
    Ok(CovReport { rows, exact, passed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub n: usize,
    pub q: f64,
    pub n_samples: usize,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    pub min_expected: f64,
    /// Some cell has expected count below the configured minimum.
    pub low_counts: bool,
    pub passed: bool,
}

/// Lexicographic rank of a permutation of `{1..n}` (Lehmer code).
fn lex_rank(w: &[u32]) -> usize {
    let n = w.len();
    let mut rank = 0;
    for i in 0..n {
        let smaller = w[i + 1..].iter().filter(|&&v| v < w[i]).count();
        rank = rank * (n - i) + smaller;
    }
    rank
}

const GOF_MAX_N: usize = 6;

/// Chi-square test of q-shuffle frequencies over all of `S_N` against the
/// exact measure. At `q = 0` the test is exact: every draw must be the identity.
pub fn sampler_gof_check(params: &MallowsParams, n_samples: usize, seed: SeedSpec, t: &Thresholds) -> Result<GofReport> {
    let n = params.n;
    if n > GOF_MAX_N {
        return Err(domain(format!("goodness of fit enumerates S_N; need N <= {GOF_MAX_N}, got {n}")));
    }
    if n_samples == 0 {
        return Err(domain("n_samples must be at least 1"));
    }
    let cells: usize = (1..=n).product();
    let mut expected = vec![0.0; cells];
    exactdist::for_each_permutation(n, |w| {
        expected[lex_rank(w.as_slice())] = mallows_log_prob(w, params).expect("size matches").exp() * n_samples as f64;
    });
    let ranks = monte_carlo(params, n_samples, seed, |w| lex_rank(w.as_slice()));
    let mut observed = vec![0usize; cells];
    for r in ranks {
        observed[r] += 1;
    }
    let mut chi_square = 0.0;
    let mut live = 0usize;
    let mut impossible_hits = 0usize;
    let mut min_expected = f64::INFINITY;
    for (o, e) in observed.iter().zip(&expected) {
        if *e > 0.0 {
            chi_square += (*o as f64 - e).powi(2) / e;
            live += 1;
            min_expected = min_expected.min(*e);
        } else {
            impossible_hits += o;
        }
    }
    let dof = live.saturating_sub(1);
    let p_value = if impossible_hits > 0 {
        0.0
    } else if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).expect("positive dof").sf(chi_square)
    };
    Ok(GofReport {
        n,
        q: params.q,
        n_samples,
        chi_square,
        dof,
        p_value,
        min_expected,
        low_counts: min_expected < t.min_expected_count,
        passed: p_value > t.p_min,
    })
}

/// Error of one q-Pochhammer expansion at `N` and `4N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRow {
    pub n: usize,
    pub error_n: f64,
    pub error_4n: f64,
    pub ratio: f64,
    pub ideal: f64,
    pub passed: bool,
}

/// Ratio test of an expansion's decay order: `err(N)/err(4N)` must lie within
/// a factor `slack` of `4^order`.
pub fn expansion_order_check(beta: f64, kind: asymlaw::QPochExpansion, n_list: &[usize], slack: f64) -> Result<Vec<ExpansionRow>> {
    let cfg = crate::qnum::NumericConfig::default();
    let err = |n: usize| -> Result<f64> {
        Ok(asymlaw::direct_log_qpoch(beta, n, kind, &cfg)? - asymlaw::asym_log_qpoch(beta, n, kind)?)
    };
    let ideal = 4f64.powf(kind.error_order());
    n_list
        .iter()
        .map(|&n| {
            let (a, b) = (err(n)?, err(4 * n)?);
            let ratio = a / b;
            Ok(ExpansionRow {
                n,
                error_n: a,
                error_4n: b,
                ratio,
                ideal,
                passed: ratio > ideal / slack && ratio < ideal * slack,
            })
        })
        .collect()
}
