//! Command-line front end. Exit codes: 0 on PASS, 2 on FAIL, 1 on any
//! error (reported as a single `ERR:` line on stderr).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use agglab_core::calibration::{calibration_curve, calibration_lower_bound, mv_law, noise_profile, witness_law, FiniteModel};
use agglab_core::scenarios::bipartite_noise_model;
use agglab_core::surrogate::{
    check_certificate, make_cert_bipartite, make_cert_margin, make_cert_structured, Certificate, SearchOpts, StructuredHinge, Surrogate,
};
use agglab_core::task::{FiniteDist, TaskLoss};

use crate::config::{ExperimentConfig, ExperimentId, ScalarChoice};
use crate::error::{LabError, Result};
use crate::experiments::{self, e4::surrogate_for, DEFAULT_SEED};
use crate::par;
use crate::report::{fmt_num, RunReport, Verdict};

pub const OUT_ENV: &str = "AGG_LAB_OUT";

#[derive(Debug, Parser)]
#[command(name = "agglab", version, about = "Surrogate consistency under label aggregation: experiments and checks")]
pub struct Cli {
    /// Base seed for every random stream (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output root; falls back to $AGG_LAB_OUT, the config, then `out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Replace every Monte Carlo trial count.
    #[arg(long = "mc-trials", global = true)]
    pub mc_trials: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment from a JSON config (or an id such as `E2` for defaults).
    Run { config: String },
    /// List experiments.
    List,
    /// Check a config and print it with defaults filled in.
    Validate { config: String },
    /// Build and check a surrogate certificate from a JSON spec.
    Cert { spec: PathBuf },
    /// Print a pointwise calibration curve and its lower bound.
    Calib {
        scenario: CalibScenario,
        /// Label law at the point (margin and multiclass scenarios).
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
        /// Votes per example.
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Scalar loss of the margin scenario.
        #[arg(long, value_enum, default_value_t = LossArg::Hinge)]
        loss: LossArg,
        /// Matching size (bipartite scenario).
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Corruption rate (bipartite scenario).
        #[arg(long, default_value_t = 0.2)]
        eta: f64,
        /// Number of grid points in (0, 1].
        #[arg(long, default_value_t = 20)]
        grid: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CalibScenario {
    Margin,
    Multiclass,
    Bipartite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Hinge,
    Logistic,
    Exp,
    SquaredHinge,
}

impl From<LossArg> for ScalarChoice {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Hinge => ScalarChoice::Hinge,
            LossArg::Logistic => ScalarChoice::Logistic,
            LossArg::Exp => ScalarChoice::Exp,
            LossArg::SquaredHinge => ScalarChoice::SquaredHinge,
        }
    }
}

/// Certificate request read by `cert`.
#[derive(Debug, Deserialize)]
#[serde(tag = "surrogate", rename_all = "snake_case", deny_unknown_fields)]
pub enum CertSpec {
    Margin {
        loss: ScalarChoice,
        #[serde(default = "one")]
        delta: f64,
        #[serde(default)]
        check: CheckOpts,
    },
    Bipartite {
        n: usize,
        #[serde(default)]
        check: CheckOpts,
    },
    /// Structured hinge with a row-major `k x d` embedding and either
    /// zero-one loss (no table) or a row-major `k x k` loss table.
    Structured {
        k: usize,
        d: usize,
        embedding: Vec<f64>,
        loss: Option<Vec<f64>>,
        #[serde(default)]
        check: CheckOpts,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckOpts {
    pub radius: f64,
    pub grid: usize,
}

impl Default for CheckOpts {
    fn default() -> Self {
        CheckOpts { radius: 3.0, grid: 21 }
    }
}

/// Loads a config file, or the defaults when `arg` names an experiment and
/// no such file exists.
pub fn load_config(arg: &str) -> Result<ExperimentConfig> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Ok(id) = arg.parse::<ExperimentId>() {
            return Ok(ExperimentConfig::default_for(id));
        }
    }
    ExperimentConfig::load(path)
}

/// Runs one experiment on a pool of `threads` workers.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64, threads: Option<usize>) -> Result<RunReport> {
    par::with_pool(threads, || experiments::run(cfg, seed))?
}

fn out_root(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

pub fn build_certificate(spec: &CertSpec) -> Result<(Surrogate, Certificate, f64, usize)> {
    Ok(match spec {
        CertSpec::Margin { loss, delta, check } => {
            let (s, c) = make_cert_margin(&loss.loss(), *delta)?;
            (s, c, check.radius, check.grid)
        }
        CertSpec::Bipartite { n, check } => {
            let (s, c) = make_cert_bipartite(*n)?;
            (s, c, check.radius, check.grid)
        }
        CertSpec::Structured { k, d, embedding, loss, check } => {
            let task = match loss {
                None => TaskLoss::ZeroOne,
                Some(t) => TaskLoss::table(*k, t.clone())?,
            };
            let (s, c) = make_cert_structured(&StructuredHinge::new(*k, *d, embedding.clone(), &task)?)?;
            (s, c, check.radius, check.grid)
        }
    })
}

fn cmd_run(cli: &Cli, arg: &str, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let mut cfg = load_config(arg)?;
    if let Some(n) = cli.mc_trials {
        cfg.override_mc_trials(n);
        cfg.validate()?;
    }
    let seed = cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let report = run_experiment(&cfg, seed, cli.threads)?;
    let dir = report.write_run(&out_root(cli.out.clone(), &cfg))?;
    write!(out, "{}", report.summary()).map_err(|e| LabError::io("<stdout>", e))?;
    writeln!(err, "wrote {} ({:.2} s)", dir.display(), report.wall_clock_s).map_err(|e| LabError::io("<stderr>", e))?;
    Ok(match report.verdict() {
        Verdict::Pass => 0,
        Verdict::Fail => 2,
    })
}

fn cmd_cert(path: &Path, out: &mut dyn Write) -> Result<i32> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let spec: CertSpec = serde_json::from_str(&text).map_err(|e| LabError::Config(e.to_string()))?;
    let (s, c, radius, grid) = build_certificate(&spec)?;
    let r = check_certificate(&s, &c, radius, grid)?;
    let io = |e| LabError::io("<stdout>", e);
    writeln!(out, "c1={} c2={} valid={}", fmt_num(c.c1), fmt_num(c.c2), r.valid).map_err(io)?;
    writeln!(out, "slack1={} slack2={}", fmt_num(r.worst_slack_1), fmt_num(r.worst_slack_2)).map_err(io)?;
    Ok(if r.valid { 0 } else { 2 })
}

#[allow(clippy::too_many_arguments)]
fn cmd_calib(scenario: CalibScenario, p: Option<&[f64]>, m: usize, loss: LossArg, n: usize, eta: f64, grid: usize, out: &mut dyn Write) -> Result<i32> {
    let need_p = || p.map(|v| v.to_vec()).ok_or_else(|| LabError::Config("--p is required for this scenario".into()));
    let (spec, cert, dist, task) = match scenario {
        CalibScenario::Margin => {
            let (s, c) = make_cert_margin(&ScalarChoice::from(loss).loss(), 1.0)?;
            (s, c, FiniteDist::new(need_p()?)?, TaskLoss::ZeroOne)
        }
        CalibScenario::Multiclass => {
            let dist = FiniteDist::new(need_p()?)?;
            let (s, c) = surrogate_for(dist.k(), ScalarChoice::Hinge)?;
            (s, c, dist, TaskLoss::ZeroOne)
        }
        CalibScenario::Bipartite => {
            let (s, c) = make_cert_bipartite(n)?;
            (s, c, bipartite_noise_model(n, eta, 0)?, TaskLoss::MatchingHamming { n })
        }
    };
    if spec.num_labels() != dist.k() {
        return Err(LabError::Config(format!("--p needs {} entries", spec.num_labels())));
    }
    if grid == 0 {
        return Err(LabError::Config("--grid must be positive".into()));
    }
    let kappa = noise_profile(&FiniteModel::new(vec![1.0], vec![dist.clone()])?, &task, 0.0)?.points[0].kappa;
    let law = witness_law(&mv_law(&dist, m, &task)?, &cert);
    let eps: Vec<f64> = (1..=grid).map(|i| i as f64 / grid as f64).collect();
    let curve = calibration_curve(&spec, &law, &dist, &task, &eps, &SearchOpts::default())?;
    let io = |e| LabError::io("<stdout>", e);
    writeln!(out, "# {} m={} c1={} c2={} kappa={}", spec.name(), m, fmt_num(cert.c1), fmt_num(cert.c2), fmt_num(kappa)).map_err(io)?;
    writeln!(out, "eps,psi_raw,psi_convex,lower_bound").map_err(io)?;
    for (i, e) in eps.iter().enumerate() {
        let lb = calibration_lower_bound(cert.c1, cert.c2, dist.k(), m, *e, kappa);
        writeln!(out, "{},{},{},{}", fmt_num(*e), fmt_num(curve.psi_raw[i]), fmt_num(curve.psi_convex[i]), fmt_num(lb)).map_err(io)?;
    }
    Ok(0)
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let io = |e| LabError::io("<stdout>", e);
    match &cli.command {
        Command::Run { config } => cmd_run(cli, config, out, err),
        Command::List => {
            for id in ExperimentId::ALL {
                writeln!(out, "{id}  {}", id.describe()).map_err(io)?;
            }
            Ok(0)
        }
        Command::Validate { config } => {
            let mut cfg = load_config(config)?;
            if let Some(n) = cli.mc_trials {
                cfg.override_mc_trials(n);
                cfg.validate()?;
            }
            let text = serde_json::to_string_pretty(&cfg.resolved())?;
            writeln!(out, "{text}").map_err(io)?;
            Ok(0)
        }
        Command::Cert { spec } => cmd_cert(spec, out),
        Command::Calib { scenario, p, m, loss, n, eta, grid } => cmd_calib(*scenario, p.as_deref(), *m, *loss, *n, *eta, *grid, out),
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = write!(out, "{}", e.render());
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 1 } else { 0 };
            }
            let text = e.render().to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            let _ = writeln!(err, "ERR: {}", line.trim_start_matches("error: "));
            return 1;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            let _ = writeln!(err, "ERR: {msg}");
            1
        }
    }
}
