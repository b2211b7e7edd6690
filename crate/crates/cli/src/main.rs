mod args;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde::{Deserialize, Serialize};

use mallows_core::asymlaw::{self, CovarianceSpec, LawPoint, LawValues};
use mallows_core::exactdist::{self, HeightQuery, PmfTable};
use mallows_core::mallows::{inversion_count, MallowsParams};
use mallows_core::verify::{self, CovReport, GofReport, KsRow, LcltReport, LdpReport, Thresholds};

use args::{Cli, Command};
use output::{emit, num, opt, Tabular};

const EXIT_INVALID: u8 = 1;
const EXIT_CHECK_FAILED: u8 = 2;

#[derive(Debug, Serialize, Deserialize)]
struct Samples {
    permutations: Vec<Vec<u32>>,
    inversions: Vec<u64>,
}

impl Tabular for Samples {
    fn header(&self) -> Vec<String> {
        vec!["sample".into(), "inversions".into(), "permutation".into()]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.permutations
            .iter()
            .zip(&self.inversions)
            .enumerate()
            .map(|(i, (w, inv))| {
                let line = w.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
                vec![i.to_string(), inv.to_string(), line]
            })
            .collect()
    }
}

impl Tabular for PmfTable {
    fn header(&self) -> Vec<String> {
        vec!["s".into(), "prob".into(), "log_prob".into()]
    }

    fn rows(&self) -> Vec<Vec<String>> {
        (self.s_min..=self.s_max)
            .map(|s| vec![s.to_string(), num(self.prob(s)), num(self.log_prob(s))])
            .collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct JointRow {
    s: Vec<usize>,
    prob: f64,
    log_prob: f64,
}

/// Joint law of `(H_{L_1,K}, .., H_{L_r,K})`.
#[derive(Debug, Serialize, Deserialize)]
struct JointPmf {
    #[serde(rename = "N")]
    n: usize,
    q: f64,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "L_list")]
    l_list: Vec<usize>,
    rows: Vec<JointRow>,
}

impl Tabular for JointPmf {
    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = (1..=self.l_list.len()).map(|i| format!("s{i}")).collect();
        h.extend(["prob".into(), "log_prob".into()]);
        h
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut row: Vec<String> = r.s.iter().map(usize::to_string).collect();
                row.extend([num(r.prob), num(r.log_prob)]);
                row
            })
            .collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum PmfResult {
    Single(PmfTable),
    Joint(JointPmf),
}

impl Tabular for PmfResult {
    fn header(&self) -> Vec<String> {
        match self {
            PmfResult::Single(t) => t.header(),
            PmfResult::Joint(t) => t.header(),
        }
    }

    fn rows(&self) -> Vec<Vec<String>> {
        match self {
            PmfResult::Single(t) => t.rows(),
            PmfResult::Joint(t) => t.rows(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LawResult {
    values: Vec<LawValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    covariance: Option<CovarianceSpec>,
}

const LAW_COLUMNS: [&str; 14] = ["beta", "x", "y", "h", "d", "sigma", "sigma_n", "delta", "a", "u", "v", "gamma", "mu", "c_row"];

impl Tabular for LawResult {
    fn header(&self) -> Vec<String> {
        let n = if self.covariance.is_some() { LAW_COLUMNS.len() } else { LAW_COLUMNS.len() - 1 };
        LAW_COLUMNS[..n].iter().map(|s| s.to_string()).collect()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let mut row = vec![
                    num(v.beta),
                    num(v.x),
                    num(v.y),
                    num(v.h),
                    num(v.d),
                    num(v.sigma),
                    opt(v.sigma_n),
                    num(v.delta),
                    num(v.a),
                    num(v.u),
                    num(v.v),
                    num(v.gamma),
                    num(v.mu),
                ];
                if let Some(c) = &self.covariance {
                    row.push(c.c[i].iter().map(|&e| num(e)).collect::<Vec<_>>().join(" "));
                }
                row
            })
            .collect()
    }
}

impl Tabular for LcltReport {
    fn header(&self) -> Vec<String> {
        ["N", "k", "exact", "predicted", "rel_error"].map(String::from).to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.plot
            .iter()
            .map(|r| vec![r.n.to_string(), num(r.k_or_delta), num(r.exact), num(r.predicted), num(r.rel_error)])
            .collect()
    }
}

impl Tabular for LdpReport {
    fn header(&self) -> Vec<String> {
        ["N", "delta", "s", "log_pmf", "rate", "gap"].map(String::from).to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| vec![r.n.to_string(), num(self.delta), r.s.to_string(), num(r.log_pmf), num(self.rate), num(r.gap)])
            .collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CltResult {
    rows: Vec<KsRow>,
    passed: bool,
}

impl Tabular for CltResult {
    fn header(&self) -> Vec<String> {
        ["N", "sigma_n", "ks_midpoint", "ks_plain", "passed"].map(String::from).to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| vec![r.n.to_string(), num(r.sigma_n), num(r.ks_midpoint), num(r.ks_plain), r.passed.to_string()])
            .collect()
    }
}

impl Tabular for CovReport {
    fn header(&self) -> Vec<String> {
        ["N", "i", "j", "limit", "empirical", "standard_error", "deviation_se"].map(String::from).to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        for r in &self.rows {
            for i in 0..r.limit.len() {
                for j in 0..r.limit.len() {
                    out.push(vec![
                        r.n.to_string(),
                        i.to_string(),
                        j.to_string(),
                        num(r.limit[i][j]),
                        num(r.empirical[i][j]),
                        num(r.standard_error[i][j]),
                        num(r.deviation_se[i][j]),
                    ]);
                }
            }
        }
        out
    }
}

impl Tabular for GofReport {
    fn header(&self) -> Vec<String> {
        ["N", "q", "n_samples", "chi_square", "dof", "p_value", "min_expected", "passed"].map(String::from).to_vec()
    }

    fn rows(&self) -> Vec<Vec<String>> {
        vec![vec![
            self.n.to_string(),
            num(self.q),
            self.n_samples.to_string(),
            num(self.chi_square),
            self.dof.to_string(),
            num(self.p_value),
            num(self.min_expected),
            self.passed.to_string(),
        ]]
    }
}

enum Failure {
    Invalid(String),
    Check,
}

impl From<mallows_core::Error> for Failure {
    fn from(e: mallows_core::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Invalid(format!("cannot write output: {e}"))
    }
}

fn sample(params: &MallowsParams, count: usize, seed: u64) -> Samples {
    let (permutations, inversions) = verify::monte_carlo(params, count, args::seed(seed), |w| (w.as_slice().to_vec(), inversion_count(w)))
        .into_iter()
        .unzip();
    Samples { permutations, inversions }
}

fn pmf(a: &args::PmfArgs) -> Result<PmfResult, Failure> {
    let params = a.measure.params()?;
    match (&a.l, &a.l_list) {
        (Some(l), _) => Ok(PmfResult::Single(exactdist::pmf_table(&HeightQuery::new(params, *l, a.k)?))),
        (None, Some(ls)) => {
            let joint = exactdist::multi_point_joint(&params, ls, a.k)?;
            let rows = joint
                .cumulative()
                .into_iter()
                .map(|(s, prob)| JointRow { s, prob, log_prob: prob.ln() })
                .collect();
            Ok(PmfResult::Joint(JointPmf { n: params.n, q: params.q, k: a.k, l_list: ls.clone(), rows }))
        }
        (None, None) => Err(Failure::Invalid("one of --L or --L-list is required".into())),
    }
}

fn law(a: &args::LawArgs) -> Result<LawResult, Failure> {
    let ys = match (&a.y, &a.y_list) {
        (Some(y), _) => vec![*y],
        (None, Some(ys)) => ys.clone(),
        (None, None) => return Err(Failure::Invalid("one of --y or --y-list is required".into())),
    };
    if let Some(n) = a.n {
        if n == 0 {
            return Err(Failure::Invalid("--N must be positive".into()));
        }
    }
    let values = ys
        .iter()
        .map(|&y| asymlaw::law_values(&LawPoint::new(a.beta, a.x, y)?, a.n, a.delta, a.gamma))
        .collect::<mallows_core::Result<Vec<_>>>()?;
    let covariance = match a.y_list {
        Some(ref ys) => Some(asymlaw::covariance_spec(a.beta, a.x, ys)?),
        None => None,
    };
    Ok(LawResult { values, covariance })
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let fmt = cli.output.format;
    let path = cli.output.output.as_deref();
    let cmd = &cli.command;
    let passed = match cmd {
        Command::Sample(a) => {
            let params = a.measure.params()?;
            emit(cmd, sample(&params, a.count, a.seed), fmt, path)?;
            true
        }
        Command::Pmf(a) => {
            emit(cmd, pmf(a)?, fmt, path)?;
            true
        }
        Command::Law(a) => {
            emit(cmd, law(a)?, fmt, path)?;
            true
        }
        Command::VerifyLclt(a) => {
            let mut cfg = args::experiment(&a.point, vec![a.y], a.n_list.clone());
            cfg.window = a.window;
            cfg.gamma = a.gamma;
            let report = verify::lclt_sweep(&cfg)?;
            let ok = report.passed;
            emit(cmd, report, fmt, path)?;
            ok
        }
        Command::VerifyLdp(a) => {
            let mut cfg = args::experiment(&a.point, vec![a.y], a.n_list.clone());
            cfg.delta = Some(a.delta);
            let report = verify::ldp_check(&cfg)?;
            let ok = report.passed;
            emit(cmd, report, fmt, path)?;
            ok
        }
        Command::VerifyClt(a) => {
            let mut cfg = args::experiment(&a.point, vec![a.y], a.n_list.clone());
            cfg.n_samples = a.n_samples;
            cfg.seed = args::seed(a.seed);
            let rows = verify::clt_ks_check(&cfg)?;
            let ok = rows.iter().all(|r| r.passed);
            emit(cmd, CltResult { rows, passed: ok }, fmt, path)?;
            ok
        }
        Command::VerifyCov(a) => {
            let mut cfg = args::experiment(&a.point, a.y_list.clone(), a.n_list.clone());
            cfg.n_samples = a.n_samples;
            cfg.seed = args::seed(a.seed);
            let report = verify::multipoint_cov_check(&cfg, a.exact_n)?;
            let ok = report.passed;
            emit(cmd, report, fmt, path)?;
            ok
        }
        Command::VerifySampler(a) => {
            let params = a.measure.params()?;
            let report = verify::sampler_gof_check(&params, a.n_samples, args::seed(a.seed), &Thresholds::default())?;
            let ok = report.passed;
            emit(cmd, report, fmt, path)?;
            ok
        }
    };
    if passed {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_INVALID),
            };
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_INVALID);
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().expect("global pool is set once");
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Check) => {
            eprintln!("check failed");
            ExitCode::from(EXIT_CHECK_FAILED)
        }
    }
}
