//! Command-line harness: every computation as a subcommand with
//! deterministic seeding and CSV/JSON output.
//!
//! Configuration precedence is flags over config-file values over defaults.
//! The config file is either flat `key = value` text (lists
//! comma-separated, `#` comments allowed) or a JSON object; a JSON report
//! previously emitted by the harness also re-parses, via its `config` field.
//! Unknown keys are a hard error. All floating-point output is printed with
//! 17 significant digits so values round-trip exactly.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use crate::dynamics::{self, InitialData, SupMode};
use crate::tail::{self, RegimeSpec, RegimeTarget, TailContext, VariancePair};
use crate::{curve, pde, verify, Error, Result};

/// Default RNG seed; fixed so runs are reproducible by default.
pub const DEFAULT_SEED: u64 = 8_261_826;

/// Default worker count for partitioned estimators.
pub const DEFAULT_WORKERS: usize = 4;

/// Environment variable overriding the output directory (and nothing else).
pub const OUT_DIR_ENV: &str = "BEATNLS_OUT_DIR";

/// Process exit codes.
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_COMPUTATION: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "beatnls",
    about = "Two-mode beating dynamics, branch diagrams and rare-event tails",
    version
)]
pub struct Cli {
    /// Config file (flat key = value lines, or a JSON object).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output path; stdout when omitted. A relative path is resolved under
    /// $BEATNLS_OUT_DIR when that variable is set.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format.
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    pub format: Option<String>,
    /// RNG seed for randomized estimators.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker count for partitioned estimators (part of the determinism
    /// contract: results are bit-identical for a fixed seed and workers).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Branch diagram over a tau grid: all branches, births, folds.
    Branches(BranchArgs),
    /// Decay-rate function over a tau grid.
    Rate(BranchArgs),
    /// Birth and fold table up to a maximal index.
    Collisions(CollisionArgs),
    /// Fixed-point branch offsets near folds, with direct-bisection checks.
    Mu(MuArgs),
    /// Reduced two-mode trajectory with conserved quantities.
    Dynamics(DynamicsArgs),
    /// Full pseudospectral run with mass/energy tracking.
    Pde(PdeArgs),
    /// One tail estimate (quadrature, Monte Carlo, or both).
    Tail(TailArgs),
    /// Scaled log-probability sweep over decreasing eps.
    LdpSweep(SweepArgs),
    /// Invariant suites; exit code 3 on any failure.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Clone)]
pub struct BranchArgs {
    /// Threshold z0 (the curve parameter lambda).
    #[arg(long)]
    pub z0: Option<f64>,
    #[arg(long)]
    pub tau_min: Option<f64>,
    #[arg(long)]
    pub tau_max: Option<f64>,
    /// Number of tau samples.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct CollisionArgs {
    #[arg(long)]
    pub z0: Option<f64>,
    #[arg(long)]
    pub max_index: Option<u32>,
}

#[derive(Debug, Args, Clone)]
pub struct MuArgs {
    /// Fold indices, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub j: Option<Vec<u32>>,
    /// Number of zeta samples across [-pi, pi].
    #[arg(long)]
    pub zeta_samples: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct DynamicsArgs {
    #[arg(long)]
    pub alpha_re: Option<f64>,
    #[arg(long)]
    pub alpha_im: Option<f64>,
    #[arg(long)]
    pub beta_re: Option<f64>,
    #[arg(long)]
    pub beta_im: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Keep every k-th state in the emitted trajectory.
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct PdeArgs {
    #[arg(long)]
    pub alpha_re: Option<f64>,
    #[arg(long)]
    pub alpha_im: Option<f64>,
    #[arg(long)]
    pub beta_re: Option<f64>,
    #[arg(long)]
    pub beta_im: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Mode count (power of two, at least 8).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// 2/3-rule dealiasing.
    #[arg(long)]
    pub dealias: Option<bool>,
    /// Write a binary checkpoint of the final field here.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct TailArgs {
    #[arg(long)]
    pub z0: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub c_time: Option<f64>,
    #[arg(long)]
    pub cutoff_c: Option<f64>,
    #[arg(long)]
    pub sigma_a2: Option<f64>,
    #[arg(long)]
    pub sigma_b2: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// quadrature | monte-carlo | both
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub mc_samples: Option<u64>,
}

#[derive(Debug, Args, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub tail: TailArgs,
    /// Decreasing list of eps values, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    /// Also run the Monte Carlo estimator per eps.
    #[arg(long)]
    pub with_mc: Option<bool>,
}

#[derive(Debug, Args, Clone)]
pub struct VerifyArgs {
    /// Suite name or "all".
    #[arg(long)]
    pub suite: Option<String>,
}

/// Key/value view of a config file.
#[derive(Debug, Default, Clone)]
pub struct FileConfig(BTreeMap<String, String>);

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidInput(format!("bad JSON config: {e}")))?;
            // A previously emitted report re-parses through its config echo.
            let obj = match value.get("config") {
                Some(serde_json::Value::Object(o)) => o.clone(),
                _ => match value {
                    serde_json::Value::Object(o) => o,
                    _ => return Err(Error::InvalidInput("JSON config must be an object".into())),
                },
            };
            let mut map = BTreeMap::new();
            for (k, v) in obj {
                let s = match v {
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Array(items) => {
                        items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
                    }
                    other => other.to_string(),
                };
                map.insert(k, s);
            }
            return Ok(FileConfig(map));
        }
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidInput(format!(
                    "config line {} is not `key = value`: {line:?}",
                    lineno + 1
                )));
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig(map))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::InvalidInput(format!("config key {key} has bad value {raw:?}"))),
        }
    }

    fn get_list_f64(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| Error::InvalidInput(format!("config key {key} has bad list {raw:?}"))),
        }
    }

    fn get_list_u32(&self, key: &str) -> Result<Option<Vec<u32>>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|s| s.trim().parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| Error::InvalidInput(format!("config key {key} has bad list {raw:?}"))),
        }
    }

    fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        for key in self.0.keys() {
            if !known.contains(&key.as_str()) && !GLOBAL_KEYS.contains(&key.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "unknown config key {key:?}; known keys: {known:?} plus {GLOBAL_KEYS:?}"
                )));
            }
        }
        Ok(())
    }
}

const GLOBAL_KEYS: [&str; 4] = ["seed", "workers", "format", "out"];

/// Fully resolved run configuration: subcommand parameters plus the global
/// seed/output contract, and a flat echo of every resolved key for reports.
#[derive(Debug)]
pub struct RunConfig {
    pub command: ResolvedCommand,
    pub seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub echo: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug)]
pub enum ResolvedCommand {
    Branches { z0: f64, tau_min: f64, tau_max: f64, samples: usize },
    Rate { z0: f64, tau_min: f64, tau_max: f64, samples: usize },
    Collisions { z0: f64, max_index: u32 },
    Mu { j: Vec<u32>, zeta_samples: usize },
    Dynamics { data: InitialData, t_end: f64, dt: f64, stride: usize },
    Pde { data: InitialData, config: pde::PdeRunConfig, checkpoint: Option<PathBuf> },
    Tail { spec: RegimeSpec, var: VariancePair, eps: f64, method: TailRun, mc_samples: u64 },
    LdpSweep { spec: RegimeSpec, var: VariancePair, eps_list: Vec<f64>, with_mc: bool, mc_samples: u64 },
    Verify { suite: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailRun {
    Quadrature,
    MonteCarlo,
    Both,
}

macro_rules! resolve {
    ($echo:expr, $key:literal, $flag:expr, $file:expr, $default:expr) => {{
        let v = match $flag {
            Some(x) => x,
            None => match $file? {
                Some(x) => x,
                None => $default,
            },
        };
        $echo.insert($key.to_string(), format!("{}", v));
        v
    }};
}

/// Parses argv (and the optional config file named in it) into a validated
/// run configuration. Flags override file values override defaults.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::InvalidInput(e.to_string()))?;
    build_config(cli)
}

pub fn build_config(cli: Cli) -> Result<RunConfig> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut echo = BTreeMap::new();
    let seed = resolve!(echo, "seed", cli.seed, file.get::<u64>("seed"), DEFAULT_SEED);
    let workers =
        resolve!(echo, "workers", cli.workers, file.get::<usize>("workers"), DEFAULT_WORKERS);
    if workers == 0 {
        return Err(Error::InvalidInput("workers must be positive".into()));
    }
    let format_str =
        resolve!(echo, "format", cli.format.clone(), file.get::<String>("format"), "csv".to_string());
    let format = match format_str.as_str() {
        "csv" => OutputFormat::Csv,
        "json" => OutputFormat::Json,
        other => {
            return Err(Error::InvalidInput(format!("format must be csv or json, got {other:?}")))
        }
    };
    let out = cli.out.clone().or_else(|| file.0.get("out").map(PathBuf::from));
    if let Some(o) = &out {
        echo.insert("out".into(), o.display().to_string());
    }

    let command = match cli.command {
        Command::Branches(a) => {
            file.reject_unknown(&["z0", "tau-min", "tau-max", "samples"])?;
            let (z0, tau_min, tau_max, samples) = resolve_tau_grid(&mut echo, &a, &file)?;
            ResolvedCommand::Branches { z0, tau_min, tau_max, samples }
        }
        Command::Rate(a) => {
            file.reject_unknown(&["z0", "tau-min", "tau-max", "samples"])?;
            let (z0, tau_min, tau_max, samples) = resolve_tau_grid(&mut echo, &a, &file)?;
            ResolvedCommand::Rate { z0, tau_min, tau_max, samples }
        }
        Command::Collisions(a) => {
            file.reject_unknown(&["z0", "max-index"])?;
            let z0 = resolve!(echo, "z0", a.z0, file.get("z0"), 1.0);
            let max_index = resolve!(echo, "max-index", a.max_index, file.get("max-index"), 32);
            if !(z0 > 0.0) || max_index < 1 {
                return Err(Error::InvalidInput("need z0 > 0 and max-index >= 1".into()));
            }
            ResolvedCommand::Collisions { z0, max_index }
        }
        Command::Mu(a) => {
            file.reject_unknown(&["j", "zeta-samples"])?;
            let j = match a.j {
                Some(v) => v,
                None => file.get_list_u32("j")?.unwrap_or_else(|| vec![100, 1000]),
            };
            echo.insert("j".into(), j.iter().map(u32::to_string).collect::<Vec<_>>().join(","));
            let zeta_samples =
                resolve!(echo, "zeta-samples", a.zeta_samples, file.get("zeta-samples"), 33);
            if j.is_empty() || zeta_samples < 2 {
                return Err(Error::InvalidInput("need at least one j and two zeta samples".into()));
            }
            ResolvedCommand::Mu { j, zeta_samples }
        }
        Command::Dynamics(a) => {
            file.reject_unknown(&[
                "alpha-re", "alpha-im", "beta-re", "beta-im", "eps", "t-end", "dt", "stride",
            ])?;
            let alpha_re = resolve!(echo, "alpha-re", a.alpha_re, file.get("alpha-re"), 1.0);
            let alpha_im = resolve!(echo, "alpha-im", a.alpha_im, file.get("alpha-im"), 0.0);
            let beta_re = resolve!(echo, "beta-re", a.beta_re, file.get("beta-re"), 0.5);
            let beta_im = resolve!(echo, "beta-im", a.beta_im, file.get("beta-im"), 0.0);
            let eps = resolve!(echo, "eps", a.eps, file.get("eps"), 0.1);
            let t_end = resolve!(echo, "t-end", a.t_end, file.get("t-end"), 100.0);
            let dt = resolve!(echo, "dt", a.dt, file.get("dt"), 1e-3);
            let stride = resolve!(echo, "stride", a.stride, file.get("stride"), 10);
            let data = InitialData::new(
                Complex64::new(alpha_re, alpha_im),
                Complex64::new(beta_re, beta_im),
                eps,
            )?;
            if stride == 0 || !(t_end > 0.0) {
                return Err(Error::InvalidInput("need stride >= 1 and t-end > 0".into()));
            }
            ResolvedCommand::Dynamics { data, t_end, dt, stride }
        }
        Command::Pde(a) => {
            file.reject_unknown(&[
                "alpha-re", "alpha-im", "beta-re", "beta-im", "eps", "n", "dt", "t-end",
                "dealias", "checkpoint",
            ])?;
            let alpha_re = resolve!(echo, "alpha-re", a.alpha_re, file.get("alpha-re"), 1.0);
            let alpha_im = resolve!(echo, "alpha-im", a.alpha_im, file.get("alpha-im"), 0.0);
            let beta_re = resolve!(echo, "beta-re", a.beta_re, file.get("beta-re"), 0.0);
            let beta_im = resolve!(echo, "beta-im", a.beta_im, file.get("beta-im"), 0.0);
            let eps = resolve!(echo, "eps", a.eps, file.get("eps"), 0.1);
            let n = resolve!(echo, "n", a.n, file.get("n"), 64);
            let dt = resolve!(echo, "dt", a.dt, file.get("dt"), 1e-3);
            let t_end = resolve!(echo, "t-end", a.t_end, file.get("t-end"), 100.0);
            let dealias = resolve!(echo, "dealias", a.dealias, file.get("dealias"), true);
            let checkpoint = a.checkpoint.or_else(|| file.0.get("checkpoint").map(PathBuf::from));
            let data = InitialData::new(
                Complex64::new(alpha_re, alpha_im),
                Complex64::new(beta_re, beta_im),
                eps,
            )?;
            ResolvedCommand::Pde {
                data,
                config: pde::PdeRunConfig { n, dt, t_end, dealias },
                checkpoint,
            }
        }
        Command::Tail(a) => {
            file.reject_unknown(&TAIL_KEYS)?;
            let (spec, var) = resolve_tail(&mut echo, &a, &file)?;
            let eps = resolve!(echo, "eps", a.eps, file.get("eps"), 0.1);
            if !(eps > 0.0) {
                return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
            }
            let method_str = resolve!(
                echo,
                "method",
                a.method.clone(),
                file.get::<String>("method"),
                "quadrature".to_string()
            );
            let method = match method_str.as_str() {
                "quadrature" => TailRun::Quadrature,
                "monte-carlo" => TailRun::MonteCarlo,
                "both" => TailRun::Both,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "method must be quadrature, monte-carlo or both, got {other:?}"
                    )))
                }
            };
            let mc_samples =
                resolve!(echo, "mc-samples", a.mc_samples, file.get("mc-samples"), 400_000u64);
            ResolvedCommand::Tail { spec, var, eps, method, mc_samples }
        }
        Command::LdpSweep(a) => {
            let mut keys = TAIL_KEYS.to_vec();
            keys.extend_from_slice(&["eps-list", "with-mc"]);
            keys.retain(|k| *k != "eps" && *k != "method");
            file.reject_unknown(&keys)?;
            let (spec, var) = resolve_tail(&mut echo, &a.tail, &file)?;
            let eps_list = match a.eps_list {
                Some(v) => v,
                None => file.get_list_f64("eps-list")?.unwrap_or_else(|| vec![0.3, 0.1, 0.03]),
            };
            echo.insert(
                "eps-list".into(),
                eps_list.iter().map(|e| format!("{e}")).collect::<Vec<_>>().join(","),
            );
            let with_mc = resolve!(echo, "with-mc", a.with_mc, file.get("with-mc"), false);
            let mc_samples =
                resolve!(echo, "mc-samples", a.tail.mc_samples, file.get("mc-samples"), 400_000u64);
            ResolvedCommand::LdpSweep { spec, var, eps_list, with_mc, mc_samples }
        }
        Command::Verify(a) => {
            file.reject_unknown(&["suite"])?;
            let suite =
                resolve!(echo, "suite", a.suite, file.get::<String>("suite"), "all".to_string());
            ResolvedCommand::Verify { suite }
        }
    };

    Ok(RunConfig { command, seed, workers, out, format, echo })
}

const TAIL_KEYS: [&str; 10] = [
    "z0", "delta", "gamma", "c-time", "cutoff-c", "sigma-a2", "sigma-b2", "eps", "method",
    "mc-samples",
];

fn resolve_tau_grid(
    echo: &mut BTreeMap<String, String>,
    a: &BranchArgs,
    file: &FileConfig,
) -> Result<(f64, f64, f64, usize)> {
    let z0 = resolve!(echo, "z0", a.z0, file.get("z0"), 1.0);
    let tau_min = resolve!(echo, "tau-min", a.tau_min, file.get("tau-min"), 0.05);
    let tau_max = resolve!(echo, "tau-max", a.tau_max, file.get("tau-max"), 10.0);
    let samples = resolve!(echo, "samples", a.samples, file.get("samples"), 400);
    if !(z0 > 0.0) {
        return Err(Error::InvalidInput(format!("z0 must be positive, got {z0}")));
    }
    if !(tau_min > 0.0 && tau_max > tau_min) {
        return Err(Error::InvalidInput(format!(
            "need 0 < tau-min < tau-max, got [{tau_min}, {tau_max}]"
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 samples, got {samples}")));
    }
    Ok((z0, tau_min, tau_max, samples))
}

fn resolve_tail(
    echo: &mut BTreeMap<String, String>,
    a: &TailArgs,
    file: &FileConfig,
) -> Result<(RegimeSpec, VariancePair)> {
    let z0 = resolve!(echo, "z0", a.z0, file.get("z0"), 1.0);
    let delta = resolve!(echo, "delta", a.delta, file.get("delta"), 0.3);
    let gamma = resolve!(echo, "gamma", a.gamma, file.get("gamma"), 0.0);
    let c_time = resolve!(echo, "c-time", a.c_time, file.get("c-time"), 1.0);
    let cutoff_c = resolve!(echo, "cutoff-c", a.cutoff_c, file.get("cutoff-c"), 10.0 * z0);
    let sigma_a2 = resolve!(echo, "sigma-a2", a.sigma_a2, file.get("sigma-a2"), 2.0);
    let sigma_b2 = resolve!(echo, "sigma-b2", a.sigma_b2, file.get("sigma-b2"), 1.0);
    let spec = RegimeSpec::new(z0, delta, gamma, c_time, cutoff_c)?;
    let var = VariancePair::new(sigma_a2, sigma_b2)?;
    Ok((spec, var))
}

/// Formats a float with 17 significant digits (exact f64 round-trip).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Report rows as ordered column-name/value pairs; one shape serves both the
/// CSV writer and the JSON writer.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: Vec<&'static str>) -> Self {
        Table { columns, rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Everything a subcommand produces: a table plus optional structured extras
/// included in JSON reports.
pub struct RunOutput {
    pub table: Table,
    pub extra: serde_json::Map<String, serde_json::Value>,
    /// Verification outcome when the subcommand was `verify`.
    pub all_passed: Option<bool>,
}

fn fixture_provenance() -> serde_json::Value {
    serde_json::json!({
        "empirical_j0": crate::fixtures::EMPIRICAL_J0,
        "gap_bound_constant": crate::fixtures::GAP_BOUND_CONSTANT,
        "branch_limit_ctilde": crate::fixtures::BRANCH_LIMIT_CTILDE,
        "claim_inclusion_c1": crate::fixtures::CLAIM_INCLUSION_C1,
        "lambda_shift_c2": crate::fixtures::LAMBDA_SHIFT_C2,
        "default_seed": DEFAULT_SEED,
    })
}

/// Executes a resolved configuration and renders its output.
pub fn execute(config: &RunConfig) -> Result<RunOutput> {
    match &config.command {
        ResolvedCommand::Branches { z0, tau_min, tau_max, samples } => {
            run_branches(*z0, *tau_min, *tau_max, *samples)
        }
        ResolvedCommand::Rate { z0, tau_min, tau_max, samples } => {
            run_rate(*z0, *tau_min, *tau_max, *samples)
        }
        ResolvedCommand::Collisions { z0, max_index } => run_collisions(*z0, *max_index),
        ResolvedCommand::Mu { j, zeta_samples } => run_mu(j, *zeta_samples),
        ResolvedCommand::Dynamics { data, t_end, dt, stride } => {
            run_dynamics(data, *t_end, *dt, *stride)
        }
        ResolvedCommand::Pde { data, config: pc, checkpoint } => {
            run_pde(data, pc, checkpoint.as_deref())
        }
        ResolvedCommand::Tail { spec, var, eps, method, mc_samples } => {
            run_tail(spec, var, *eps, *method, *mc_samples, config.seed, config.workers)
        }
        ResolvedCommand::LdpSweep { spec, var, eps_list, with_mc, mc_samples } => {
            run_sweep(spec, var, eps_list, *with_mc, *mc_samples, config.seed, config.workers)
        }
        ResolvedCommand::Verify { suite } => run_verify(suite),
    }
}

fn run_branches(z0: f64, tau_min: f64, tau_max: f64, samples: usize) -> Result<RunOutput> {
    let mut table = Table::new(vec!["tau", "branch_index", "y", "xi", "exists"]);
    for s in 0..samples {
        let tau = tau_min + (tau_max - tau_min) * s as f64 / (samples - 1) as f64;
        for sol in curve::enumerate_solutions(tau, z0)? {
            table.push(vec![
                fmt_f64(tau),
                sol.branch_index.to_string(),
                fmt_f64(sol.y),
                fmt_f64(sol.xi),
                sol.exists.to_string(),
            ]);
        }
    }
    // Birth/fold metadata up to the largest index alive on the grid.
    let max_index = (2.0 * tau_max * z0 * z0 / std::f64::consts::FRAC_PI_2).ceil() as u32 + 1;
    let bt = curve::build_branch_table(z0, max_index)?;
    let mut extra = serde_json::Map::new();
    extra.insert(
        "births".into(),
        serde_json::json!(bt
            .births
            .iter()
            .map(|(j, xi, tau)| serde_json::json!({"j": j, "xi": xi, "tau": tau}))
            .collect::<Vec<_>>()),
    );
    extra.insert(
        "collisions".into(),
        serde_json::json!(bt
            .collisions
            .iter()
            .map(|(j, xi, tau)| serde_json::json!({"j": j, "xi": xi, "tau": tau}))
            .collect::<Vec<_>>()),
    );
    Ok(RunOutput { table, extra, all_passed: None })
}

fn run_rate(z0: f64, tau_min: f64, tau_max: f64, samples: usize) -> Result<RunOutput> {
    let mut table = Table::new(vec!["tau", "J", "is_jump"]);
    for s in 0..samples {
        let tau = tau_min + (tau_max - tau_min) * s as f64 / (samples - 1) as f64;
        let (value, is_jump) = curve::rate_j(z0, tau)?;
        table.push(vec![fmt_f64(tau), fmt_f64(value), is_jump.to_string()]);
    }
    Ok(RunOutput { table, extra: serde_json::Map::new(), all_passed: None })
}

fn run_collisions(z0: f64, max_index: u32) -> Result<RunOutput> {
    let bt = curve::build_branch_table(z0, max_index)?;
    let mut table =
        Table::new(vec!["j", "xi_birth", "tau_birth", "xi_collision", "tau_collision"]);
    for ((j, xb, tb), (_, xc, tc)) in bt.births.iter().zip(&bt.collisions) {
        table.push(vec![j.to_string(), fmt_f64(*xb), fmt_f64(*tb), fmt_f64(*xc), fmt_f64(*tc)]);
    }
    Ok(RunOutput { table, extra: serde_json::Map::new(), all_passed: None })
}

fn run_mu(js: &[u32], zeta_samples: usize) -> Result<RunOutput> {
    let mut table = Table::new(vec![
        "j",
        "zeta",
        "mu_minus",
        "mu_plus",
        "iterations",
        "xi_fp_minus",
        "xi_direct_minus",
        "xi_fp_plus",
        "xi_direct_plus",
    ]);
    for &j in js {
        for g in 0..zeta_samples {
            let zeta = -std::f64::consts::PI
                + 2.0 * std::f64::consts::PI * g as f64 / (zeta_samples - 1) as f64;
            let sol = curve::mu_solution(j, zeta)?;
            table.push(vec![
                j.to_string(),
                fmt_f64(zeta),
                fmt_f64(sol.mu_minus),
                fmt_f64(sol.mu_plus),
                sol.iterations.to_string(),
                fmt_f64(curve::xi_from_mu(j, curve::MuSign::Minus, sol.mu_minus)),
                fmt_f64(curve::xi_direct(j, zeta, curve::MuSign::Minus)?),
                fmt_f64(curve::xi_from_mu(j, curve::MuSign::Plus, sol.mu_plus)),
                fmt_f64(curve::xi_direct(j, zeta, curve::MuSign::Plus)?),
            ]);
        }
    }
    Ok(RunOutput { table, extra: serde_json::Map::new(), all_passed: None })
}

fn run_dynamics(data: &InitialData, t_end: f64, dt: f64, stride: usize) -> Result<RunOutput> {
    let traj = dynamics::integrate_reduced(data, t_end, dt)?;
    let mut table = Table::new(vec![
        "t", "re_u1", "im_u1", "re_um1", "im_um1", "J1", "K1", "G", "sup_paper", "sup_exact",
    ]);
    for (i, st) in traj.iter().enumerate() {
        if i % stride != 0 && i != traj.len() - 1 {
            continue;
        }
        let cons = dynamics::conserved_set(st);
        table.push(vec![
            fmt_f64(st.t),
            fmt_f64(st.u1.re),
            fmt_f64(st.u1.im),
            fmt_f64(st.u_minus1.re),
            fmt_f64(st.u_minus1.im),
            fmt_f64(cons.j1),
            fmt_f64(cons.k1),
            fmt_f64(cons.g),
            fmt_f64(dynamics::sup_norm_effective(data, st.t, SupMode::Paper)),
            fmt_f64(dynamics::sup_norm_effective(data, st.t, SupMode::Exact)),
        ]);
    }
    Ok(RunOutput { table, extra: serde_json::Map::new(), all_passed: None })
}

fn run_pde(
    data: &InitialData,
    config: &pde::PdeRunConfig,
    checkpoint: Option<&Path>,
) -> Result<RunOutput> {
    let run = pde::solve_pde(config, data)?;
    let mut table = Table::new(vec![
        "t",
        "mass",
        "energy",
        "sup_pde",
        "sup_effective_exact",
        "sup_effective_paper",
        "tail_mass",
    ]);
    for s in &run.samples {
        table.push(vec![
            fmt_f64(s.t),
            fmt_f64(s.mass),
            fmt_f64(s.energy),
            fmt_f64(s.sup),
            fmt_f64(dynamics::sup_norm_effective(data, s.t, SupMode::Exact)),
            fmt_f64(dynamics::sup_norm_effective(data, s.t, SupMode::Paper)),
            fmt_f64(s.tail_mass),
        ]);
    }
    if let Some(path) = checkpoint {
        let file = std::fs::File::create(resolve_out_path(path))?;
        pde::write_checkpoint(&run.final_field, config.dt, std::io::BufWriter::new(file))?;
    }
    Ok(RunOutput { table, extra: serde_json::Map::new(), all_passed: None })
}

fn tail_columns() -> Vec<&'static str> {
    vec![
        "eps", "tau", "gamma", "delta", "z0", "sigma_a2", "sigma_b2", "method", "log_p",
        "scaled", "err", "target_rate", "regime",
    ]
}

fn tail_row(
    spec: &RegimeSpec,
    var: &VariancePair,
    est: &tail::TailEstimate,
    target: &RegimeTarget,
    regime: tail::Regime,
) -> Vec<String> {
    let method = match est.method {
        tail::TailMethod::Quadrature => "quadrature",
        tail::TailMethod::MonteCarlo => "monte_carlo",
        tail::TailMethod::ClosedForm => "closed_form",
    };
    let target_rate = match target {
        RegimeTarget::Rate(r) => fmt_f64(*r),
        // The transient window has no single established rate; both bounds
        // appear in the JSON extras instead.
        RegimeTarget::Bounds { .. } => String::new(),
    };
    vec![
        fmt_f64(est.eps),
        fmt_f64(spec.tau(est.eps)),
        fmt_f64(spec.gamma),
        fmt_f64(spec.delta),
        fmt_f64(spec.z0),
        fmt_f64(var.sigma_a2),
        fmt_f64(var.sigma_b2),
        method.to_string(),
        fmt_f64(est.log_p),
        fmt_f64(est.scaled),
        fmt_f64(est.err),
        target_rate,
        regime.label().to_string(),
    ]
}

fn target_extra(target: &RegimeTarget) -> serde_json::Value {
    match target {
        RegimeTarget::Rate(r) => serde_json::json!({ "rate": r }),
        RegimeTarget::Bounds { upper, lower } => {
            serde_json::json!({ "upper": upper, "lower": lower })
        }
    }
}

fn run_tail(
    spec: &RegimeSpec,
    var: &VariancePair,
    eps: f64,
    method: TailRun,
    mc_samples: u64,
    seed: u64,
    workers: usize,
) -> Result<RunOutput> {
    let ctx = TailContext::default();
    let regime = tail::classify(spec, var);
    let target = tail::target_for(spec, var)?;
    let mut table = Table::new(tail_columns());
    if matches!(method, TailRun::Quadrature | TailRun::Both) {
        let est = tail::log_tail_quadrature(spec, var, eps, &ctx)?;
        table.push(tail_row(spec, var, &est, &target, regime));
    }
    if matches!(method, TailRun::MonteCarlo | TailRun::Both) {
        let est = tail::log_tail_monte_carlo(spec, var, eps, mc_samples, seed, workers, &ctx)?;
        table.push(tail_row(spec, var, &est, &target, regime));
    }
    let mut extra = serde_json::Map::new();
    extra.insert("target".into(), target_extra(&target));
    Ok(RunOutput { table, extra, all_passed: None })
}

fn run_sweep(
    spec: &RegimeSpec,
    var: &VariancePair,
    eps_list: &[f64],
    with_mc: bool,
    mc_samples: u64,
    seed: u64,
    workers: usize,
) -> Result<RunOutput> {
    let ctx = TailContext::default();
    let rows = tail::ldp_sweep(spec, var, eps_list, &ctx)?;
    let mut table = Table::new(tail_columns());
    for row in &rows {
        table.push(tail_row(spec, var, &row.estimate, &row.target, row.regime));
        if with_mc {
            let est =
                tail::log_tail_monte_carlo(spec, var, row.eps, mc_samples, seed, workers, &ctx)?;
            table.push(tail_row(spec, var, &est, &row.target, row.regime));
        }
    }
    let mut extra = serde_json::Map::new();
    if let Some(first) = rows.first() {
        extra.insert("target".into(), target_extra(&first.target));
        extra.insert("regime".into(), serde_json::json!(first.regime.label()));
    }
    Ok(RunOutput { table, extra, all_passed: None })
}

fn run_verify(suite: &str) -> Result<RunOutput> {
    let results = verify::run(suite)?;
    let mut table = Table::new(vec!["suite", "name", "pass", "measured", "threshold", "detail"]);
    for r in &results {
        table.push(vec![
            r.suite.to_string(),
            r.name.to_string(),
            r.pass.to_string(),
            fmt_f64(r.measured),
            fmt_f64(r.threshold),
            r.detail.replace(',', ";"),
        ]);
    }
    let all = results.iter().all(|r| r.pass);
    let mut extra = serde_json::Map::new();
    extra.insert("checks".into(), serde_json::to_value(&results).unwrap());
    Ok(RunOutput { table, extra, all_passed: Some(all) })
}

/// Renders the output in the configured format.
pub fn render(config: &RunConfig, output: &RunOutput) -> String {
    match config.format {
        OutputFormat::Csv => output.table.to_csv(),
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = output
                .table
                .rows
                .iter()
                .map(|row| {
                    let mut obj = serde_json::Map::new();
                    for (name, value) in output.table.columns.iter().zip(row) {
                        obj.insert((*name).to_string(), serde_json::json!(value));
                    }
                    serde_json::Value::Object(obj)
                })
                .collect();
            let mut report = serde_json::Map::new();
            report.insert("config".into(), serde_json::json!(config.echo));
            report.insert("fixtures".into(), fixture_provenance());
            report.insert("columns".into(), serde_json::json!(output.table.columns));
            report.insert("rows".into(), serde_json::Value::Array(rows));
            for (k, v) in &output.extra {
                report.insert(k.clone(), v.clone());
            }
            let mut text = serde_json::to_string_pretty(&report).unwrap();
            text.push('\n');
            text
        }
    }
}

/// Resolves an output destination, applying the directory override.
pub fn resolve_out_path(out: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if out.is_relative() => PathBuf::from(dir).join(out),
        _ => out.to_path_buf(),
    }
}

/// Runs a parsed configuration end to end, writing to the configured sink.
/// Returns the process exit code.
pub fn run_to_completion(config: &RunConfig) -> i32 {
    let output = match execute(config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return match e {
                Error::InvalidInput(_) => EXIT_VALIDATION,
                _ => EXIT_COMPUTATION,
            };
        }
    };
    let text = render(config, &output);
    let write_result = match &config.out {
        None => std::io::stdout().write_all(text.as_bytes()).map_err(Error::from),
        Some(path) => {
            let path = resolve_out_path(path);
            std::fs::write(&path, &text).map_err(Error::from)
        }
    };
    if let Err(e) = write_result {
        eprintln!("error: {e}");
        return EXIT_COMPUTATION;
    }
    match output.all_passed {
        Some(false) => EXIT_VERIFY_FAILED,
        _ => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig> {
        let mut argv = vec!["beatnls"];
        argv.extend_from_slice(args);
        parse_config(argv)
    }

    #[test]
    fn branches_flags_parse() {
        let cfg =
            parse(&["branches", "--z0", "1.0", "--tau-max", "20", "--samples", "2000"]).unwrap();
        match cfg.command {
            ResolvedCommand::Branches { z0, tau_max, samples, .. } => {
                assert_eq!(z0, 1.0);
                assert_eq!(tau_max, 20.0);
                assert_eq!(samples, 2000);
            }
            _ => panic!("wrong command"),
        }
        assert_eq!(cfg.seed, DEFAULT_SEED);
    }

    #[test]
    fn delta_out_of_range_names_the_constraint() {
        let err = parse(&["tail", "--delta", "1.5"]).unwrap_err();
        assert!(err.to_string().contains("delta must lie in (0,1)"), "{err}");
    }

    #[test]
    fn gamma_out_of_range_names_the_bound() {
        let err = parse(&["ldp-sweep", "--gamma", "2.4", "--delta", "0.3"]).unwrap_err();
        assert!(err.to_string().contains("(5/2)(1-delta) = 1.75"), "{err}");
    }

    #[test]
    fn unknown_config_key_is_fatal() {
        let dir = std::env::temp_dir().join(format!("beatnls-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.cfg");
        std::fs::write(&path, "z0 = 1.0\ntypo-key = 3\n").unwrap();
        let err = parse(&["branches", "--config", path.to_str().unwrap()]).unwrap_err();
        assert!(err.to_string().contains("typo-key"), "{err}");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn flags_override_file_values() {
        let dir = std::env::temp_dir().join(format!("beatnls-test-o-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cfg.txt");
        std::fs::write(&path, "# comment\nz0 = 2.0\nsamples = 10\nseed = 7\n").unwrap();
        let cfg = parse(&["branches", "--config", path.to_str().unwrap(), "--z0", "3.0"]).unwrap();
        match cfg.command {
            ResolvedCommand::Branches { z0, samples, .. } => {
                assert_eq!(z0, 3.0, "flag wins");
                assert_eq!(samples, 10, "file fills the rest");
            }
            _ => panic!("wrong command"),
        }
        assert_eq!(cfg.seed, 7);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn float_format_round_trips() {
        for x in [1.0 / 3.0, std::f64::consts::PI, 1e-300, -2.5e17] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn json_report_reparses_as_config() {
        let cfg = parse(&["ldp-sweep", "--eps-list", "0.3,0.2", "--gamma", "0.0"]).unwrap();
        let report = serde_json::json!({
            "config": cfg.echo,
            "rows": [],
        });
        let dir = std::env::temp_dir().join(format!("beatnls-test-r-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("report.json");
        std::fs::write(&path, serde_json::to_string(&report).unwrap()).unwrap();
        let cfg2 = parse(&["ldp-sweep", "--config", path.to_str().unwrap()]).unwrap();
        match (&cfg.command, &cfg2.command) {
            (
                ResolvedCommand::LdpSweep { spec: s1, eps_list: e1, .. },
                ResolvedCommand::LdpSweep { spec: s2, eps_list: e2, .. },
            ) => {
                assert_eq!(s1.gamma, s2.gamma);
                assert_eq!(e1, e2);
            }
            _ => panic!("wrong command"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
