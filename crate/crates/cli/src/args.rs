use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use mallows_core::mallows::{MallowsParams, SeedSpec};
use mallows_core::verify::ExperimentConfig;

#[derive(Debug, Parser)]
#[command(name = "mallows", version, about = "Sampling, exact laws and limit laws of the Mallows measure on permutations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub output: OutputArgs,

    /// Worker threads for Monte Carlo and sweeps (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Output file; relative paths resolve against $MALLOWS_OUTPUT_DIR when set.
    /// Defaults to stdout.
    #[arg(long, global = true)]
    pub output: Option<std::path::PathBuf>,
}

/// Every subcommand with its configuration. Serialized as
/// `{"command": ..., "config": {...}}` inside the output envelope.
#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "kebab-case")]
pub enum Command {
    /// Draw permutations with the q-shuffle sampler.
    Sample(SampleArgs),
    /// Exact law of one height H_{L,K}, or the joint law of H_{L_i,K} with --L-list.
    Pmf(PmfArgs),
    /// Limit-law values at (beta, x, y); with --y-list also the covariance matrix.
    Law(LawArgs),
    /// Exact PMF against the Gaussian local limit along a sequence of N.
    VerifyLclt(VerifyLcltArgs),
    /// Exact log-PMF against the rate function along a sequence of N.
    VerifyLdp(VerifyLdpArgs),
    /// Kolmogorov-Smirnov distance of sampled heights to the normal limit.
    VerifyClt(VerifyCltArgs),
    /// Empirical covariance of several heights against the limiting matrix.
    VerifyCov(VerifyCovArgs),
    /// Chi-square test of sampler frequencies over all of S_N (N <= 6).
    VerifySampler(VerifySamplerArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[command(group(ArgGroup::new("deformation").required(true).args(["q", "beta"])))]
pub struct Measure {
    /// Permutation size.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: usize,

    /// Deformation parameter in [0, 1).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,

    /// Scaling parameter, q = 1 - beta/N.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl Measure {
    pub fn params(&self) -> mallows_core::Result<MallowsParams> {
        match (self.q, self.beta) {
            (Some(q), None) => MallowsParams::new(self.n, q),
            (None, Some(beta)) => MallowsParams::from_beta(self.n, beta),
            _ => unreachable!("clap enforces exactly one of --q/--beta"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: Measure,

    #[arg(long, default_value_t = 1)]
    pub count: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PmfArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: Measure,

    /// Column bound: H counts i <= L with w(i) <= K.
    #[arg(long = "L", required_unless_present = "l_list", conflicts_with = "l_list")]
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,

    /// Comma-separated nondecreasing column bounds L_1 <= .. <= L_r.
    #[arg(long = "L-list", id = "l_list", value_name = "L1,L2,..", value_delimiter = ',')]
    #[serde(rename = "L_list", default, skip_serializing_if = "Option::is_none")]
    pub l_list: Option<Vec<usize>>,

    /// Value bound.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct LawArgs {
    #[arg(long)]
    pub beta: f64,

    #[arg(long)]
    pub x: f64,

    #[arg(long, required_unless_present = "y_list", conflicts_with = "y_list")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,

    /// Comma-separated increasing y values; adds the covariance matrix.
    #[arg(long, value_delimiter = ',')]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_list: Option<Vec<f64>>,

    /// Adds sigma_N to each row.
    #[arg(long = "N")]
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,

    /// Point at which to evaluate the rate function (default: h).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,

    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct Point {
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,

    #[arg(long, default_value_t = 0.5)]
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VerifyLcltArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub point: Point,

    #[arg(long, default_value_t = 0.5)]
    pub y: f64,

    #[arg(long = "N-list", value_delimiter = ',', default_values_t = [100, 400, 1600])]
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,

    /// Half-width A of the window |k - center| < A sqrt(N).
    #[arg(long, default_value_t = 2.0)]
    pub window: f64,

    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VerifyLdpArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub point: Point,

    #[arg(long, default_value_t = 0.5)]
    pub y: f64,

    #[arg(long)]
    pub delta: f64,

    #[arg(long = "N-list", value_delimiter = ',', default_values_t = [200, 2000])]
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VerifyCltArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub point: Point,

    #[arg(long, default_value_t = 0.5)]
    pub y: f64,

    #[arg(long = "N-list", value_delimiter = ',', default_values_t = [500])]
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,

    #[arg(long, default_value_t = 100_000)]
    pub n_samples: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VerifyCovArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub point: Point,

    #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.7])]
    pub y_list: Vec<f64>,

    #[arg(long = "N-list", value_delimiter = ',', default_values_t = [500])]
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,

    #[arg(long, default_value_t = 100_000)]
    pub n_samples: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Also compare against the exact joint law at this (small) N.
    #[arg(long = "exact-N")]
    #[serde(rename = "exact_N", default, skip_serializing_if = "Option::is_none")]
    pub exact_n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VerifySamplerArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: Measure,

    #[arg(long, default_value_t = 1_000_000)]
    pub n_samples: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn experiment(point: &Point, y_list: Vec<f64>, n_list: Vec<usize>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(point.beta, point.x, y_list.first().copied().unwrap_or(0.5), n_list);
    cfg.y_list = y_list;
    cfg
}

pub fn seed(seed: u64) -> SeedSpec {
    SeedSpec::new(seed, 0)
}
