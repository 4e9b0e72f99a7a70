//! Command-line front end: `construct`, `cost`, `verify`, `sharpness` and
//! `batch`.
//!
//! Exit codes: 0 success, 1 I/O or parse error, 2 marginal rejected by
//! validation, 3 internal assertion or failed certificate.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use symplan::construct::{construct, Branch, ConstructConfig, ConstructError, DEFAULT_CUTOFF};
use symplan::cost::{plan_cost_with, sharpness_lower_bound, sharpness_marginal, sharpness_monte_carlo, CostConfig, Omega};
use symplan::extended;
use symplan::generate::{family, FamilySpec};
use symplan::measure::{load_marginal, validate_marginal_with, Marginal, ValidationConfig};
use symplan::partition::SplitConfig;
use symplan::plan::Plan;
use symplan::verify::{certify, Certificate, VerifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn io(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl From<ConstructError> for CliError {
    fn from(e: ConstructError) -> Self {
        let code = match e {
            ConstructError::Validation(_) => EXIT_VALIDATION,
            _ => EXIT_INTERNAL,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "symplan", version, about = "Symmetric multi-marginal plans of finite repulsive cost")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a plan for a marginal and certify it.
    Construct(ConstructArgs),
    /// Print the cost of a plan.
    Cost(CostArgs),
    /// Check a plan against a marginal.
    Verify(VerifyArgs),
    /// Tabulate truncated cost bounds for the concentration-1/N marginal.
    Sharpness(SharpnessArgs),
    /// Construct and verify every case of a batch spec.
    Batch(BatchArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Knobs {
    /// Seed for direction candidates and cost subsampling.
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    /// Number of atoms above which long lists are reduced first.
    #[arg(long, default_value_t = DEFAULT_CUTOFF)]
    pub cutoff: usize,
    /// Tolerance on marginal residuals.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Cost profile: `identity`, `power:S`, inline JSON or a JSON file.
    #[arg(long, default_value = "identity")]
    pub omega: String,
    /// Largest accepted cloud sample weight; defaults to 1/64 of the cloud
    /// mass.
    #[arg(long)]
    pub max_sample_weight: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ConstructArgs {
    pub marginal: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub knobs: Knobs,
    /// Directory for `plan.json` and `certificate.json`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CostArgs {
    pub plan: PathBuf,
    #[arg(long, default_value = "identity")]
    pub omega: String,
    #[arg(long, default_value_t = 0xc057)]
    pub seed: u64,
    /// Print a JSON object instead of the bare value.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    pub plan: PathBuf,
    pub marginal: PathBuf,
    #[command(flatten)]
    pub knobs: Knobs,
    /// Certificate path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SharpnessArgs {
    #[arg(long, default_value = "identity")]
    pub omega: String,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Comma-separated truncation radii in (0, 1).
    #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4")]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// CSV path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the sampled marginal here as well.
    #[arg(long)]
    pub marginal_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BatchArgs {
    pub spec: PathBuf,
    #[command(flatten)]
    pub knobs: Knobs,
    /// CSV report path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Every knob that influences an output, recorded next to it.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub seed: u64,
    pub cutoff: usize,
    pub tol: f64,
    pub omega: Omega,
    pub sample_cap: usize,
    pub dense_cap: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_sample_weight: Option<f64>,
}

impl RunConfig {
    fn new(command: &'static str, n: Option<usize>, knobs: &Knobs) -> Result<Self, CliError> {
        let verify = VerifyConfig::default();
        Ok(RunConfig {
            command,
            n,
            seed: knobs.seed,
            cutoff: knobs.cutoff,
            tol: knobs.tol,
            omega: parse_omega(&knobs.omega)?,
            sample_cap: verify.cost.sample_cap,
            dense_cap: verify.dense_cap,
            max_sample_weight: knobs.max_sample_weight,
        })
    }

    /// SHA-256 of the JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    fn construct_config(&self) -> ConstructConfig {
        ConstructConfig {
            cutoff: self.cutoff,
            split: SplitConfig {
                seed: self.seed,
                ..SplitConfig::default()
            },
            validation: self.validation_config(),
        }
    }

    fn validation_config(&self) -> ValidationConfig {
        ValidationConfig {
            max_sample_weight: self.max_sample_weight,
            ..ValidationConfig::default()
        }
    }

    fn verify_config(&self) -> VerifyConfig {
        VerifyConfig {
            tol: self.tol,
            dense_cap: self.dense_cap,
            cost: CostConfig {
                sample_cap: self.sample_cap,
                seed: self.seed,
            },
        }
    }
}

#[derive(Serialize)]
struct CertificateDoc<'a> {
    #[serde(flatten)]
    certificate: &'a Certificate,
    config: &'a RunConfig,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_omega(s: &str) -> Result<Omega, CliError> {
    let path = Path::new(s);
    let text = if !s.trim_start().starts_with('{') && path.is_file() {
        read(path)?
    } else {
        s.to_string()
    };
    text.parse().map_err(|e| CliError::io(format!("omega: {e}")))
}

fn load_marginal_file(path: &Path) -> Result<Marginal, CliError> {
    load_marginal(&read(path)?).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn load_plan_file(path: &Path) -> Result<Plan, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn certificate_json(cert: &Certificate, cfg: &RunConfig) -> String {
    let doc = CertificateDoc { certificate: cert, config: cfg };
    serde_json::to_string_pretty(&doc).expect("certificate serializes") + "\n"
}

pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Construct(a) => cmd_construct(&a),
        Command::Cost(a) => cmd_cost(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Sharpness(a) => cmd_sharpness(&a),
        Command::Batch(a) => cmd_batch(&a),
    }
}

pub fn cmd_construct(a: &ConstructArgs) -> Result<i32, CliError> {
    let cfg = RunConfig::new("construct", Some(a.n), &a.knobs)?;
    let m = load_marginal_file(&a.marginal)?;
    let built = construct(&m, a.n, &cfg.construct_config())?;
    let mut cert = certify(&built.plan, &m, std::slice::from_ref(&cfg.omega), Some(&built.ledger), &cfg.verify_config());
    cert.config_hash = Some(cfg.hash());
    fs::create_dir_all(&a.out).map_err(|e| CliError::io(format!("{}: {e}", a.out.display())))?;
    write(
        &a.out.join("plan.json"),
        &(serde_json::to_string(&built.plan).expect("plan serializes") + "\n"),
    )?;
    write(&a.out.join("certificate.json"), &certificate_json(&cert, &cfg))?;
    if cert.passed {
        eprintln!("certificate passed: {} blocks", cert.blocks);
        Ok(EXIT_OK)
    } else {
        eprintln!("certificate failed: {}", cert.failures.join("; "));
        Ok(EXIT_INTERNAL)
    }
}

#[derive(Serialize)]
struct CostDoc {
    omega: Omega,
    #[serde(serialize_with = "extended::serialize")]
    value: f64,
    error: f64,
    subsampled: bool,
}

pub fn cmd_cost(a: &CostArgs) -> Result<i32, CliError> {
    let omega = parse_omega(&a.omega)?;
    let plan = load_plan_file(&a.plan)?;
    let est = plan_cost_with(
        &plan,
        &omega,
        &CostConfig {
            seed: a.seed,
            ..CostConfig::default()
        },
    );
    if a.json {
        let doc = CostDoc {
            omega,
            value: est.value,
            error: est.error,
            subsampled: est.subsampled,
        };
        println!("{}", serde_json::to_string(&doc).expect("cost serializes"));
    } else {
        println!("{}", extended::format(est.value));
    }
    Ok(EXIT_OK)
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<i32, CliError> {
    let cfg = RunConfig::new("verify", None, &a.knobs)?;
    let plan = load_plan_file(&a.plan)?;
    let m = load_marginal_file(&a.marginal)?;
    let mut cert = certify(&plan, &m, std::slice::from_ref(&cfg.omega), None, &cfg.verify_config());
    cert.config_hash = Some(cfg.hash());
    emit(a.out.as_deref(), &certificate_json(&cert, &cfg))?;
    Ok(if cert.passed { EXIT_OK } else { EXIT_INTERNAL })
}

pub fn cmd_sharpness(a: &SharpnessArgs) -> Result<i32, CliError> {
    let omega = parse_omega(&a.omega)?;
    if let Some(bad) = a.eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(CliError::io(format!("eps {bad} is not in (0, 1)")));
    }
    if a.n < 2 || a.d == 0 || a.samples == 0 {
        return Err(CliError::io("sharpness needs N ≥ 2, d ≥ 1 and at least one sample"));
    }
    let m = sharpness_marginal(&omega, a.d, a.n, a.samples, a.seed);
    let mut csv = String::from("eps,closed_form_bound,monte_carlo_estimate,samples\n");
    for &eps in &a.eps {
        let bound = sharpness_lower_bound(&omega, a.n, eps);
        let mc = sharpness_monte_carlo(&m, &omega, a.n, eps);
        writeln!(csv, "{eps:e},{bound:?},{mc:?},{}", a.samples).expect("string write");
    }
    if let Some(p) = &a.marginal_out {
        write(p, &symplan::measure::save_marginal(&m))?;
    }
    emit(a.out.as_deref(), &csv)?;
    Ok(EXIT_OK)
}

/// Where a batch case gets its marginal.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MarginalSource {
    /// Path relative to the batch file.
    Path(PathBuf),
    Inline(serde_json::Value),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchCase {
    pub name: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub marginal: MarginalSource,
}

/// `{"cases": [...], "grid": {"dims": [...], "ns": [...], "seeds": [...], "samples": M}}`;
/// either part may be absent.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSpec {
    #[serde(default)]
    pub cases: Vec<BatchCase>,
    #[serde(default)]
    pub grid: Option<FamilySpec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStatus {
    Pass,
    Fail,
    Rejected,
}

/// One row of a batch report.
#[derive(Clone, Debug, Serialize)]
pub struct CaseReport {
    pub name: String,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    pub status: CaseStatus,
    pub branch: String,
    pub blocks: usize,
    pub max_residual: f64,
    pub separation: f64,
    pub cost: f64,
    pub ledger_checks: usize,
    pub ledger_violations: usize,
    pub seconds: f64,
    pub detail: String,
}

impl CaseReport {
    const HEADER: &'static str = "name,d,N,k,status,branch,blocks,max_residual,separation,cost,ledger_checks,ledger_violations,seconds,detail";

    fn csv_row(&self) -> String {
        let status = match self.status {
            CaseStatus::Pass => "pass",
            CaseStatus::Fail => "fail",
            CaseStatus::Rejected => "rejected",
        };
        format!(
            "{},{},{},{},{},{},{},{:e},{},{},{},{},{:.4},\"{}\"",
            self.name,
            self.d,
            self.n,
            self.k,
            status,
            self.branch,
            self.blocks,
            self.max_residual,
            extended::format(self.separation),
            extended::format(self.cost),
            self.ledger_checks,
            self.ledger_violations,
            self.seconds,
            self.detail.replace('"', "'"),
        )
    }
}

fn branch_name(b: Option<&Branch>) -> String {
    match b {
        None => String::new(),
        Some(b) => serde_json::to_value(b).expect("branch serializes")["branch"]
            .as_str()
            .unwrap_or_default()
            .to_string(),
    }
}

/// Constructs and certifies one marginal. Marginals rejected by validation
/// are reported as such, not as failures.
pub fn run_case(name: &str, m: &Marginal, n: usize, cfg: &RunConfig) -> CaseReport {
    let start = Instant::now();
    let mut report = CaseReport {
        name: name.to_string(),
        d: m.d,
        n,
        k: m.k(),
        status: CaseStatus::Fail,
        branch: String::new(),
        blocks: 0,
        max_residual: f64::NAN,
        separation: f64::NAN,
        cost: f64::NAN,
        ledger_checks: 0,
        ledger_violations: 0,
        seconds: 0.0,
        detail: String::new(),
    };
    let validation = validate_marginal_with(m, n, &cfg.validation_config());
    if !validation.is_ok() {
        report.status = CaseStatus::Rejected;
        report.detail = validation.to_string();
        report.seconds = start.elapsed().as_secs_f64();
        return report;
    }
    match construct(m, n, &cfg.construct_config()) {
        Ok(built) => {
            let cert = certify(&built.plan, m, std::slice::from_ref(&cfg.omega), Some(&built.ledger), &cfg.verify_config());
            report.status = if cert.passed { CaseStatus::Pass } else { CaseStatus::Fail };
            report.branch = branch_name(built.branches.first());
            report.blocks = cert.blocks;
            report.max_residual = cert.marginal.max_residual();
            report.separation = cert.separation;
            report.cost = cert.costs.first().map_or(f64::NAN, |c| c.value);
            report.ledger_checks = cert.ledger.checks;
            report.ledger_violations = cert.ledger.violations;
            report.detail = cert.failures.join("; ");
        }
        Err(e) => report.detail = e.to_string(),
    }
    report.seconds = start.elapsed().as_secs_f64();
    report
}

/// Expands a batch spec into named marginals with their `N`.
pub fn batch_cases(spec: &BatchSpec, base: &Path) -> Result<Vec<(String, usize, Marginal)>, CliError> {
    let mut out = Vec::new();
    for c in &spec.cases {
        let m = match &c.marginal {
            MarginalSource::Path(p) => load_marginal_file(&base.join(p))?,
            MarginalSource::Inline(v) => {
                load_marginal(&v.to_string()).map_err(|e| CliError::io(format!("case {}: {e}", c.name)))?
            }
        };
        out.push((c.name.clone(), c.n, m));
    }
    if let Some(grid) = &spec.grid {
        out.extend(family(grid).into_iter().map(|c| (c.name, c.n, c.marginal)));
    }
    Ok(out)
}

pub fn cmd_batch(a: &BatchArgs) -> Result<i32, CliError> {
    let cfg = RunConfig::new("batch", None, &a.knobs)?;
    let spec: BatchSpec =
        serde_json::from_str(&read(&a.spec)?).map_err(|e| CliError::io(format!("{}: {e}", a.spec.display())))?;
    let base = a.spec.parent().unwrap_or(Path::new("."));
    let cases = batch_cases(&spec, base)?;
    if cases.is_empty() {
        return Err(CliError::io("batch spec lists no cases"));
    }
    let mut csv = String::from(CaseReport::HEADER);
    csv.push('\n');
    let mut failed = 0;
    for (name, n, m) in &cases {
        let r = run_case(name, m, *n, &cfg);
        if r.status == CaseStatus::Fail {
            failed += 1;
        }
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    emit(a.out.as_deref(), &csv)?;
    eprintln!("{} cases, {failed} failed, config {}", cases.len(), cfg.hash());
    Ok(if failed == 0 { EXIT_OK } else { EXIT_INTERNAL })
}
