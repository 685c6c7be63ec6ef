//! Command-line surface.
//!
//! Configuration is a JSON document; reports are JSON on stdout, with
//! `--out <dir>` additionally writing `<command>.json` (and `runs.csv` for
//! `simulate`). Site labels in all CLI output are one-based.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::acceptance;
use crate::experiments::{
    csv_string, run_batch, BatchSpec, DEFAULT_CERT_THRESHOLD, DEFAULT_MAX_STEPS, DEFAULT_WINDOW,
};
use crate::landscape::{classify, regime};
use crate::model::{Config, Params, MIN_SITES};
use crate::oracles::{
    escape_bound, pair_stick_lower_factor_mc, pair_stick_probability_mc,
    pair_stick_upper_bound_mc, single_site_stick_probability, OracleError, PairRates,
};
use crate::progressions::{
    coupled_partial_sum_violations, enumerate_fn_vs_zn, sample_z, ZetaSpec, DEFAULT_MAX_TERMS,
    DEFAULT_TAIL_EPSILON,
};
use crate::rng::RngStream;
use crate::stats::Estimate;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;
pub const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

fn default_steps() -> u64 {
    DEFAULT_MAX_STEPS
}
fn default_runs() -> u64 {
    1
}
fn default_window() -> u64 {
    DEFAULT_WINDOW
}
fn default_cert() -> f64 {
    DEFAULT_CERT_THRESHOLD
}
fn default_tail() -> f64 {
    DEFAULT_TAIL_EPSILON
}
fn default_max_terms() -> u64 {
    DEFAULT_MAX_TERMS
}
fn default_oracle_n() -> u64 {
    20
}
fn default_samples() -> u64 {
    10_000
}
fn default_tol() -> f64 {
    1e-10
}

/// Oracle and progression settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleRequest {
    /// One-based site; the pair is this site and the next.
    pub site: usize,
    #[serde(default = "default_oracle_n")]
    pub n: u64,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_sites: usize,
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub x0: Option<Vec<i64>>,
    #[serde(default = "default_steps")]
    pub steps: u64,
    #[serde(default = "default_runs")]
    pub runs: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_window")]
    pub window: u64,
    #[serde(default = "default_cert")]
    pub cert_threshold: f64,
    #[serde(default = "default_tail")]
    pub tail_epsilon: f64,
    #[serde(default = "default_max_terms")]
    pub max_terms: u64,
    #[serde(default)]
    pub oracle: Option<OracleRequest>,
}

impl RunConfig {
    /// Defaults for everything except the landscape.
    pub fn new(lambdas: Vec<f64>) -> Self {
        Self {
            n_sites: lambdas.len(),
            lambdas,
            x0: None,
            steps: default_steps(),
            runs: default_runs(),
            seed: 0,
            window: default_window(),
            cert_threshold: default_cert(),
            tail_epsilon: default_tail(),
            max_terms: default_max_terms(),
            oracle: None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.n_sites < MIN_SITES {
            return bad(format!("n_sites must be ≥ {MIN_SITES} (got {})", self.n_sites));
        }
        if self.lambdas.len() != self.n_sites {
            return bad(format!(
                "lambdas: expected {} entries, got {}",
                self.n_sites,
                self.lambdas.len()
            ));
        }
        if let Some(i) = self.lambdas.iter().position(|l| !(l.is_finite() && *l > 0.0)) {
            return bad(format!(
                "lambdas entry {} must be positive and finite (got {})",
                i + 1,
                self.lambdas[i]
            ));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != self.n_sites {
                return bad(format!("x0: expected {} entries, got {}", self.n_sites, x0.len()));
            }
            if let Some(i) = x0.iter().position(|&c| c < 0) {
                return bad(format!("x0 entry {} must be non-negative (got {})", i + 1, x0[i]));
            }
        }
        if self.runs == 0 {
            return bad("runs must be ≥ 1".into());
        }
        if self.window == 0 {
            return bad("window must be ≥ 1".into());
        }
        if !(self.cert_threshold > 0.0) {
            return bad(format!("cert_threshold must be positive (got {})", self.cert_threshold));
        }
        if !(self.tail_epsilon > 0.0) {
            return bad(format!("tail_epsilon must be positive (got {})", self.tail_epsilon));
        }
        if self.max_terms == 0 {
            return bad("max_terms must be ≥ 1".into());
        }
        if let Some(o) = &self.oracle {
            if o.site == 0 || o.site > self.n_sites {
                return bad(format!("oracle.site must be in 1..={} (got {})", self.n_sites, o.site));
            }
            if o.samples == 0 {
                return bad("oracle.samples must be ≥ 1".into());
            }
            if !(o.tol > 0.0) {
                return bad(format!("oracle.tol must be positive (got {})", o.tol));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<Params, CliError> {
        Params::new(self.n_sites, self.lambdas.clone()).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn initial(&self, params: &Params) -> Result<Config, CliError> {
        match &self.x0 {
            None => Ok(Config::zeros(self.n_sites)),
            Some(xs) => Config::new(params, xs.iter().map(|&c| c as u64).collect())
                .map_err(|e| CliError::Config(e.to_string())),
        }
    }

    fn batch_spec(&self) -> BatchSpec {
        BatchSpec {
            runs: self.runs,
            steps: self.steps,
            master_seed: self.seed,
            window: self.window,
            cert_threshold: self.cert_threshold,
        }
    }

    fn oracle_request(&self) -> Result<&OracleRequest, CliError> {
        self.oracle
            .as_ref()
            .ok_or_else(|| CliError::Config("missing \"oracle\" section with a site".into()))
    }
}

/// Parse and validate a JSON configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Parser)]
#[command(name = "growthlab", version, about = "Growth process on a cycle: simulation and verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for output files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub runs: Option<u64>,
    #[arg(long)]
    pub steps: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a batch of trajectories; report JSON and per-run CSV.
    Simulate(CommonArgs),
    /// Classify the lambda landscape.
    Classify(CommonArgs),
    /// Sticking probabilities and bounds for the configured site.
    Oracle(CommonArgs),
    /// Random geometric progression checks for the configured pair.
    Progressions(CommonArgs),
    /// Run the acceptance suite.
    Verify {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated criterion numbers (default: all).
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
    },
}

fn load(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg: RunConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid JSON config: {e}")))?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(r) = args.runs {
        cfg.runs = r;
    }
    if let Some(s) = args.steps {
        cfg.steps = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn pretty(v: &impl Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(runtime)
}

fn write_out(dir: Option<&Path>, name: &str, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(runtime)?;
        fs::write(dir.join(name), contents)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", dir.join(name).display())))?;
    }
    Ok(())
}

/// Batch report JSON and per-run CSV for a validated configuration.
pub fn simulate_outputs(cfg: &RunConfig) -> Result<(String, String), CliError> {
    let params = cfg.params()?;
    let x0 = cfg.initial(&params)?;
    let batch = run_batch(&params, &x0, &cfg.batch_spec()).map_err(runtime)?;
    Ok((pretty(&batch.report)?, csv_string(&batch.records).map_err(runtime)?))
}

/// Landscape report with one-based site labels.
pub fn classify_output(cfg: &RunConfig) -> Result<Value, CliError> {
    let params = cfg.params()?;
    let mut report = classify(&params);
    for f in &mut report.features {
        for s in &mut f.sites {
            *s += 1;
        }
    }
    Ok(json!({ "lambdas": cfg.lambdas, "landscape": report }))
}

fn or_error<T: Serialize, E: std::fmt::Display>(r: Result<T, E>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn one_based(mut v: Value, key: &str) -> Value {
    if let Some(k) = v.get_mut(key).and_then(|x| x.as_u64()) {
        v[key] = json!(k + 1);
    }
    v
}

pub fn oracle_output(cfg: &RunConfig) -> Result<Value, CliError> {
    let params = cfg.params()?;
    let x0 = cfg.initial(&params)?;
    let req = cfg.oracle_request()?;
    let k = req.site - 1;
    type PairEstimator = fn(&Params, &Config, usize, u64, usize, u64) -> Result<Estimate, OracleError>;
    let mc = |f: PairEstimator| {
        or_error(f(&params, &x0, k, req.n, req.samples as usize, cfg.seed))
    };
    let regime = or_error(regime(&params, &x0, k)).get("kind").cloned();
    Ok(json!({
        "site": req.site,
        "x0": x0.counts(),
        "single_site": {
            "stick_probability": or_error(single_site_stick_probability(&params, &x0, k, req.tol)),
            "escape_bound": or_error(escape_bound(&params, &x0, k)),
            "tol": req.tol,
        },
        "pair": {
            "sites": [req.site, params.site(k, 1) + 1],
            "regime": regime,
            "rates": one_based(or_error(PairRates::dominant(&params, &x0, k)), "k"),
            "n": req.n,
            "stick_probability": mc(pair_stick_probability_mc),
            "upper_bound": mc(pair_stick_upper_bound_mc),
            "lower_bound_factor": mc(pair_stick_lower_factor_mc),
        },
    }))
}

fn progression_report(spec: &ZetaSpec, cfg: &RunConfig, samples: u64) -> Value {
    let drift = spec.expected_log();
    // a divergent series is summarised through its reciprocal
    let summed = if drift < 0.0 { *spec } else { spec.reciprocal() };
    let values: Result<Vec<f64>, _> = (0..samples)
        .map(|s| {
            let mut rng = RngStream::new(cfg.seed, s);
            sample_z(&summed, cfg.tail_epsilon, cfg.max_terms, &mut rng).map(|z| (-z.value).exp())
        })
        .collect();
    let enumeration: Vec<Value> = (1..=10)
        .map(|n| match enumerate_fn_vs_zn(spec, n) {
            Ok((f, z)) => json!({ "n": n, "atoms": z.atoms.len(), "identical": f.matches(&z) }),
            Err(e) => json!({ "n": n, "error": e.to_string() }),
        })
        .collect();
    let p_hi = (spec.p + 0.5 * (1.0 - spec.p)).min(0.999);
    json!({
        "spec": spec,
        "expected_log": drift,
        "stdev_log": spec.stdev_log(),
        "summed_reciprocal": drift >= 0.0,
        "expected_exp_neg_z": or_error(values.map(|v| Estimate::from_samples(&v))),
        "fn_vs_zn": enumeration,
        "coupled_violations": or_error(
            coupled_partial_sum_violations(spec, spec.p, p_hi, 200, samples as usize, cfg.seed)
        ),
    })
}

pub fn progressions_output(cfg: &RunConfig) -> Result<Value, CliError> {
    let params = cfg.params()?;
    let x0 = cfg.initial(&params)?;
    let req = cfg.oracle_request()?;
    let rates = PairRates::from_state(&params, &x0, req.site - 1).map_err(runtime)?;
    let left = ZetaSpec::left(rates.p, rates.lambda_left, rates.lambda).map_err(runtime)?;
    let right = ZetaSpec::right(rates.p, rates.lambda_right, rates.lambda).map_err(runtime)?;
    let samples = req.samples.min(100_000);
    Ok(json!({
        "pair": [req.site, params.site(req.site - 1, 1) + 1],
        "p": rates.p,
        "left": progression_report(&left, cfg, samples),
        "right": progression_report(&right, cfg, samples),
    }))
}

fn configure_threads() {
    if let Some(n) = std::env::var("GROWTHLAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // fails only if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    configure_threads();
    match cli.command {
        Command::Simulate(args) => {
            let cfg = load(&args)?;
            let (json, csv) = simulate_outputs(&cfg)?;
            write_out(args.out.as_deref(), "simulate.json", &json)?;
            write_out(args.out.as_deref(), "runs.csv", &csv)?;
            print!("{json}");
        }
        Command::Classify(args) => {
            let out = pretty(&classify_output(&load(&args)?)?)?;
            write_out(args.out.as_deref(), "classify.json", &out)?;
            print!("{out}");
        }
        Command::Oracle(args) => {
            let out = pretty(&oracle_output(&load(&args)?)?)?;
            write_out(args.out.as_deref(), "oracle.json", &out)?;
            print!("{out}");
        }
        Command::Progressions(args) => {
            let out = pretty(&progressions_output(&load(&args)?)?)?;
            write_out(args.out.as_deref(), "progressions.json", &out)?;
            print!("{out}");
        }
        Command::Verify { out, criteria } => {
            if let Some(bad) = criteria.iter().find(|&&c| !acceptance::CRITERIA.iter().any(|k| k.0 == c)) {
                return Err(CliError::Config(format!("unknown criterion {bad}")));
            }
            let mut results = Vec::new();
            for &(id, _, _) in acceptance::CRITERIA.iter() {
                if criteria.is_empty() || criteria.contains(&id) {
                    let r = acceptance::run_criterion(id).expect("criterion exists");
                    println!("{}", r.line());
                    results.push(r);
                }
            }
            write_out(out.as_deref(), "verify.json", &pretty(&results)?)?;
            if results.iter().any(|r| !r.passed) {
                return Ok(ExitCode::from(EXIT_ACCEPTANCE));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("growthlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(r#"{"n_sites":4, "lambdas":[1,1,1,1], "steps":1000, "runs":10, "seed":7}"#)
            .unwrap();
        assert_eq!(cfg.x0, None);
        assert_eq!((cfg.steps, cfg.runs, cfg.seed), (1000, 10, 7));
        assert_eq!(cfg.window, 2000);
        assert_eq!(cfg.cert_threshold, 1e-6);
        assert_eq!(cfg.tail_epsilon, 1e-9);
        assert_eq!(cfg.max_terms, 1_000_000);
        let p = cfg.params().unwrap();
        assert_eq!(cfg.initial(&p).unwrap(), Config::zeros(4));
    }

    fn config_error(text: &str) -> String {
        match parse_config(text) {
            Err(CliError::Config(m)) => m,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn config_errors_name_the_field() {
        assert!(config_error(r#"{"n_sites":3, "lambdas":[1,1,1]}"#).contains("n_sites must be ≥ 4"));
        let m = config_error(r#"{"n_sites":4, "lambdas":[1,2,-1,1]}"#);
        assert!(m.contains("lambdas entry 3"), "{m}");
        assert!(config_error(r#"{"n_sites":4, "lambdas":[1,1,1]}"#).contains("expected 4 entries"));
        assert!(config_error(r#"{"n_sites":4, "lambdas":[1,1,1,1], "x0":[0,-2,0,0]}"#)
            .contains("x0 entry 2"));
        assert!(config_error(r#"{"n_sites":4, "lambdas":[1,1,1,1], "bogus":1}"#).contains("bogus"));
        assert!(config_error(r#"{"n_sites":4, "#).contains("invalid JSON"));
    }

    #[test]
    fn classify_uses_one_based_sites() {
        let cfg = RunConfig::new(vec![1.0, 3.0, 1.0, 1.0]);
        let v = classify_output(&cfg).unwrap();
        let features = v["landscape"]["features"].as_array().unwrap();
        let max: Vec<&Value> = features
            .iter()
            .filter(|f| f["kind"]["kind"] == "LocalMaximum")
            .collect();
        assert_eq!(max.len(), 1);
        assert_eq!(max[0]["sites"], json!([2]));
    }

    #[test]
    fn oracle_report_for_local_max() {
        let mut cfg = RunConfig::new(vec![1.0, 3.0, 1.0, 1.0]);
        cfg.oracle = Some(OracleRequest {
            site: 2,
            n: 5,
            samples: 10,
            tol: 1e-12,
        });
        let v = oracle_output(&cfg).unwrap();
        let prob = v["single_site"]["stick_probability"]["probability"].as_f64().unwrap();
        assert!((prob - 0.181_139_548_852_872_1).abs() < 1e-12);
        assert!(v["pair"]["stick_probability"]["error"].is_string());
    }

    #[test]
    fn progressions_report_shape() {
        let mut cfg = RunConfig::new(vec![0.5, 1.0, 1.0, 2.0]);
        cfg.x0 = Some(vec![0, 3, 0, 1]);
        cfg.oracle = Some(OracleRequest {
            site: 2,
            n: 5,
            samples: 50,
            tol: 1e-10,
        });
        let v = progressions_output(&cfg).unwrap();
        assert_eq!(v["right"]["summed_reciprocal"], json!(true));
        assert_eq!(v["left"]["summed_reciprocal"], json!(false));
        assert_eq!(v["right"]["coupled_violations"], json!(0));
        assert!(v["left"]["fn_vs_zn"]
            .as_array()
            .unwrap()
            .iter()
            .all(|e| e["identical"] == json!(true)));
    }
}
