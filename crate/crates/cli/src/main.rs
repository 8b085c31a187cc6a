//! `fragsim`: batch driver for simulations, verification suites, analytic
//! quantities and the coalescent dual.

mod manifest;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fragsim::analytic::{AnalyticError, KappaFunction};
use fragsim::duality::{build_cut_process, reverse, write_merge_csv};
use fragsim::engine::{run_replicas, write_events_csv, write_trajectory_csv, EngineError, SimConfig, SimConfigFile};
use fragsim::laws::{DislocationLaw, ErosionParams, LawError, LawSpec};
use fragsim::stats::write_report_csv;
use fragsim::suites::{self, SuiteError, SuiteOptions, DEFAULT_SEED};
use fragsim::types::RngStream;

use manifest::{write_output, RunManifest};

mod code {
    pub const VERIFY_FAILED: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const CONFIG_NOT_FOUND: u8 = 3;
    pub const INVALID_CONFIG: u8 = 4;
    pub const UNKNOWN_LAW: u8 = 5;
    pub const PRECONDITION: u8 = 6;
    pub const OUTPUT_UNWRITABLE: u8 = 7;
    pub const RUNTIME: u8 = 8;
}

#[derive(Debug, Parser)]
#[command(name = "fragsim", version, about = "Self-similar fragmentation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a configured fragmentation chain and write trajectory and event CSVs.
    Simulate(SimulateArgs),
    /// Run verification suites and write a pass/fail report.
    Verify(VerifyArgs),
    /// Print analytic quantities of a dislocation law.
    Analytic(AnalyticArgs),
    /// Build coalescents by time-reversing uniform interval cuts.
    Duality(DualityArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the replica count in the config.
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// `AC1` … `AC15`, or `all`.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Overrides the main Monte Carlo replica count of each suite.
    #[arg(long)]
    replicas: Option<usize>,
    /// Directory for `report.csv`; the report goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyticArgs {
    #[arg(long)]
    law: String,
    /// Law parameter as `key=value`, repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, serde_json::Value)>,
    #[arg(long, default_value_t = 0.0)]
    erosion: f64,
    /// κ(p).
    #[arg(long, value_name = "P")]
    kappa: Option<f64>,
    /// κ'(p).
    #[arg(long, value_name = "P")]
    kappa_prime: Option<f64>,
    /// The tangency exponent p̄ with κ(p̄)/p̄ = κ'(p̄).
    #[arg(long)]
    pbar: bool,
    /// The Malthusian exponent p* with κ(p*) = 0.
    #[arg(long)]
    malthusian: bool,
}

#[derive(Debug, Args)]
struct DualityArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    replicas: usize,
    /// Coalescent time span; cuts are followed down to `e^-horizon`.
    #[arg(long, default_value_t = 8.0)]
    horizon: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_param(s: &str) -> Result<(String, serde_json::Value), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let value = match v.parse::<f64>() {
        Ok(x) => serde_json::Number::from_f64(x)
            .map(serde_json::Value::Number)
            .ok_or_else(|| format!("non-finite value for `{k}`"))?,
        Err(_) => serde_json::Value::String(v.to_string()),
    };
    Ok((k.to_string(), value))
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn output(dir: &Path, e: io::Error) -> Self {
        Self::new(code::OUTPUT_UNWRITABLE, format!("cannot write to {}: {e}", dir.display()))
    }
}

fn law_code(e: &LawError) -> u8 {
    match e {
        LawError::UnknownLaw(_) => code::UNKNOWN_LAW,
        LawError::InvalidParameter { .. } => code::INVALID_CONFIG,
        LawError::Divergent { .. } => code::PRECONDITION,
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let code = match &e {
            EngineError::InvalidConfig(_) => code::INVALID_CONFIG,
            EngineError::Precondition(_) | EngineError::CutoffViolation(_) => code::PRECONDITION,
            EngineError::Law(l) => law_code(l),
            EngineError::Analytic(a) => analytic_code(a),
            EngineError::EventBudgetExceeded { .. } => code::RUNTIME,
        };
        Self::new(code, e.to_string())
    }
}

fn analytic_code(e: &AnalyticError) -> u8 {
    match e {
        AnalyticError::Law(l) => law_code(l),
        _ => code::PRECONDITION,
    }
}

impl From<AnalyticError> for Failure {
    fn from(e: AnalyticError) -> Self {
        Self::new(analytic_code(&e), e.to_string())
    }
}

impl From<SuiteError> for Failure {
    fn from(e: SuiteError) -> Self {
        let code = match &e {
            SuiteError::UnknownSuite(_) => code::USAGE,
            SuiteError::Engine(en) => Failure::from(en.clone()).code,
            _ => code::RUNTIME,
        };
        Self::new(code, e.to_string())
    }
}

fn prepare_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::output(dir, e))
}

fn simulate(args: &SimulateArgs) -> Result<u8, Failure> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        let code = if e.kind() == io::ErrorKind::NotFound {
            code::CONFIG_NOT_FOUND
        } else {
            code::INVALID_CONFIG
        };
        Failure::new(code, format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let mut cfg = SimConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(n) = args.replicas {
        cfg = cfg.with_replicas(n);
    }
    cfg.validate()?;

    let mut m = RunManifest::new("simulate", cfg.seed);
    m.config_path = Some(args.config.clone());
    m.configs = vec![cfg.to_file()];
    m.output_dir = Some(args.out.clone());
    m.replicas = Some(cfg.replicas);
    prepare_dir(&args.out)?;

    let logs = run_replicas(&cfg)?;
    let mut traj = Vec::new();
    write_trajectory_csv(&mut traj, &logs).expect("in-memory write");
    let mut events = Vec::new();
    write_events_csv(&mut events, &logs).expect("in-memory write");
    let resolved: &SimConfigFile = &m.configs[0];
    let cfg_json = serde_json::to_string_pretty(resolved).expect("config serializes") + "\n";

    let dir = &args.out;
    write_output(dir, "trajectory.csv", &m, &traj).map_err(|e| Failure::output(dir, e))?;
    write_output(dir, "events.csv", &m, &events).map_err(|e| Failure::output(dir, e))?;
    write_output(dir, "config.json", &m, cfg_json.as_bytes()).map_err(|e| Failure::output(dir, e))?;
    write_output(dir, "manifest.json", &m, m.to_json().as_bytes()).map_err(|e| Failure::output(dir, e))?;
    eprintln!("simulated {} replicas into {}", logs.len(), dir.display());
    Ok(0)
}

fn verify(args: &VerifyArgs) -> Result<u8, Failure> {
    let ids = suites::select(&args.suite)?;
    let mut m = RunManifest::new("verify", args.seed);
    m.suites = ids.clone();
    m.output_dir = args.out.clone();
    m.replicas = args.replicas;
    if let Some(dir) = &args.out {
        prepare_dir(dir)?;
    }
    let opts = SuiteOptions {
        seed: args.seed,
        replicas: args.replicas,
    };
    let mut rows = Vec::new();
    for id in &ids {
        let r = suites::run_suite(id, &opts)?;
        let pass = r.iter().all(|row| row.pass);
        eprintln!("{id} {}", if pass { "PASS" } else { "FAIL" });
        rows.extend(r);
    }
    let mut report = Vec::new();
    write_report_csv(&mut report, &rows).expect("in-memory write");
    match &args.out {
        Some(dir) => {
            write_output(dir, "report.csv", &m, &report).map_err(|e| Failure::output(dir, e))?;
            write_output(dir, "manifest.json", &m, m.to_json().as_bytes()).map_err(|e| Failure::output(dir, e))?;
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(m.hash_line().as_bytes())
                .and_then(|_| stdout.write_all(&report))
                .map_err(|e| Failure::new(code::OUTPUT_UNWRITABLE, e.to_string()))?;
        }
    }
    Ok(if rows.iter().all(|r| r.pass) { 0 } else { code::VERIFY_FAILED })
}

/// At least 12 significant digits and at least 12 decimals, trailing zeros trimmed.
fn format_value(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-300..=300).contains(&exp) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - exp).max(12) as usize;
    let s = format!("{x:.decimals$}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn analytic(args: &AnalyticArgs) -> Result<u8, Failure> {
    let spec = LawSpec {
        name: args.law.clone(),
        params: args.params.iter().cloned().collect(),
    };
    let law = DislocationLaw::from_spec(&spec).map_err(|e| Failure::new(law_code(&e), e.to_string()))?;
    let erosion = ErosionParams::new(args.erosion).map_err(|e| Failure::new(code::INVALID_CONFIG, e.to_string()))?;
    let kappa = KappaFunction::new(law, erosion);

    let mut values = Vec::new();
    if let Some(p) = args.kappa {
        values.push((format!("kappa({p})"), kappa.kappa(p)?));
    }
    if let Some(p) = args.kappa_prime {
        values.push((format!("kappa_prime({p})"), kappa.kappa_prime(p)?));
    }
    if args.pbar {
        values.push(("pbar".to_string(), kappa.p_bar()?));
    }
    if args.malthusian {
        values.push(("malthusian".to_string(), kappa.malthusian()?));
    }
    match values.as_slice() {
        [] => return Err(Failure::new(code::USAGE, "no quantity requested; use --kappa, --kappa-prime, --pbar or --malthusian")),
        [(_, v)] => println!("{}", format_value(*v)),
        many => {
            for (name, v) in many {
                println!("{name} {}", format_value(*v));
            }
        }
    }
    Ok(0)
}

fn duality(args: &DualityArgs) -> Result<u8, Failure> {
    if !(args.horizon > 0.0 && args.horizon.is_finite()) {
        return Err(Failure::new(code::PRECONDITION, format!("horizon = {} must be positive and finite", args.horizon)));
    }
    let mut m = RunManifest::new("duality", args.seed);
    m.output_dir = Some(args.out.clone());
    m.replicas = Some(args.replicas);
    m.settings.insert("horizon".into(), serde_json::json!(args.horizon));
    prepare_dir(&args.out)?;

    let runs = fragsim::par::try_map_replicas(args.replicas, |r| {
        let mut rng = RngStream::new(args.seed, r as u64);
        let cut = build_cut_process(1.0, &mut rng)?;
        reverse(&cut, args.horizon).map(|c| (r as u64, c))
    })
    .map_err(|e| Failure::new(code::PRECONDITION, e.to_string()))?;
    let mut merges = Vec::new();
    write_merge_csv(&mut merges, &runs).expect("in-memory write");
    let dir = &args.out;
    write_output(dir, "merges.csv", &m, &merges).map_err(|e| Failure::output(dir, e))?;
    write_output(dir, "manifest.json", &m, m.to_json().as_bytes()).map_err(|e| Failure::output(dir, e))?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Verify(a) => verify(a),
        Command::Analytic(a) => analytic(a),
        Command::Duality(a) => duality(a),
    };
    match result {
        Ok(c) => ExitCode::from(c),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
