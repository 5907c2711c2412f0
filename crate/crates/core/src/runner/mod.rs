//! Command-line experiment runner: flag parsing, config-file merging,
//! thread-pool sizing and output placement.

pub mod commands;
pub mod config;
pub mod data;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
pub use config::{settings_from_csv, Settings, ECHO_PREFIX};

#[derive(Debug, Parser)]
#[command(name = "discdiff", version, about = "Exact computations for score-based discrete diffusion on [S]^d")]
pub struct Cli {
    /// JSON file with default settings; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Directory for output files.
    #[arg(long = "out-dir", global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// KL to uniform of the forward marginals, with the exponential mixing bound.
    Forward(ForwardArgs),
    /// Exact score vector at one state and time.
    Score(ScoreArgs),
    /// Time-discretized score estimation error of an estimator.
    EpsScore(EstimationArgs),
    /// Monte Carlo draws from the uniformization sampler.
    Sample(SampleArgs),
    /// Exact law of the sampler output.
    ExactLaw(EstimationArgs),
    /// Path-measure KL between the true and the approximate reverse process.
    PathKl(EstimationArgs),
    /// Checks KL(q_delta || output) <= KL(q_T || uniform) + path KL.
    Decompose(EstimationArgs),
    /// Evaluates a convergence bound term by term.
    Bounds(BoundsArgs),
    /// Fits the order in h of the path KL.
    OrderCheck(OrderArgs),
    /// Horizon, step size and step count for a target accuracy.
    Schedule(ScheduleArgs),
    /// Runs eps-score, path-kl and decompose over a grid of (h, gamma, delta, T).
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Default)]
pub struct DataArgs {
    /// uniform | point:<index> | product:<file> | dense:<file> | dirichlet:<alpha>:<seed> | <file>.json
    #[arg(long)]
    pub dist: Option<String>,
    /// Alphabet size.
    #[arg(long = "S")]
    pub alphabet: Option<usize>,
    /// Sequence length.
    #[arg(long)]
    pub d: Option<usize>,
    /// Output file (relative paths land under --out-dir).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl DataArgs {
    fn apply(&self, s: &mut Settings) {
        s.dist = self.dist.clone();
        s.alphabet = self.alphabet;
        s.d = self.d;
        s.out = self.out.clone();
    }
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated forward times.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub t: Option<f64>,
    /// Comma-separated tokens of the anchor state.
    #[arg(long, value_delimiter = ',')]
    pub state: Option<Vec<usize>>,
    /// Also print the time-based and data-based score bounds.
    #[arg(long)]
    pub bounds: bool,
}

#[derive(Debug, Args)]
pub struct EstimationArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// h,delta,K
    #[arg(long)]
    pub grid: Option<String>,
    /// exact | perturb:<gamma> | clip:<cap>[:<inner>] | file:<path>
    #[arg(long)]
    pub estimator: Option<String>,
    /// Gauss-Legendre nodes per step.
    #[arg(long)]
    pub nodes: Option<usize>,
}

impl EstimationArgs {
    fn apply(&self, s: &mut Settings) {
        self.data.apply(s);
        s.grid = self.grid.clone();
        s.estimator = self.estimator.clone();
        s.nodes = self.nodes;
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub estimation: EstimationArgs,
    #[arg(long)]
    pub trials: Option<usize>,
    /// exact | analytic
    #[arg(long = "lambda-mode")]
    pub lambda_mode: Option<String>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub estimation: EstimationArgs,
    /// early-stopped (delta > 0) or full-support (no early stopping).
    #[arg(long)]
    pub regime: Option<String>,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long = "C")]
    pub c: Option<f64>,
    #[arg(long = "kappa-sq")]
    pub kappa_sq: Option<f64>,
    #[arg(long = "eps-score")]
    pub eps_score: Option<f64>,
    #[arg(long = "constant-factor")]
    pub constant_factor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OrderArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub estimator: Option<String>,
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Comma-separated step sizes.
    #[arg(long, value_delimiter = ',')]
    pub hs: Option<Vec<f64>>,
    /// Shared T - delta.
    #[arg(long)]
    pub span: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long = "S")]
    pub alphabet: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long = "C")]
    pub c: Option<f64>,
    /// Selects the full-support rule.
    #[arg(long = "kappa-sq")]
    pub kappa_sq: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub hs: Option<Vec<f64>>,
    /// Log-perturbation sizes; 0 means the exact estimator.
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    /// Horizons T.
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<f64>>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Forward(_) => "forward",
            Command::Score(_) => "score",
            Command::EpsScore(_) => "eps-score",
            Command::Sample(_) => "sample",
            Command::ExactLaw(_) => "exact-law",
            Command::PathKl(_) => "path-kl",
            Command::Decompose(_) => "decompose",
            Command::Bounds(_) => "bounds",
            Command::OrderCheck(_) => "order-check",
            Command::Schedule(_) => "schedule",
            Command::Sweep(_) => "sweep",
        }
    }

    /// Settings carried by the flags alone.
    fn settings(&self) -> Settings {
        let mut s = Settings::default();
        match self {
            Command::Forward(a) => {
                a.data.apply(&mut s);
                s.times = a.times.clone();
            }
            Command::Score(a) => {
                a.data.apply(&mut s);
                s.t = a.t;
                s.state = a.state.clone();
                s.bounds = a.bounds.then_some(true);
            }
            Command::EpsScore(a) | Command::ExactLaw(a) | Command::PathKl(a) | Command::Decompose(a) => {
                a.apply(&mut s)
            }
            Command::Sample(a) => {
                a.estimation.apply(&mut s);
                s.trials = a.trials;
                s.lambda_mode = a.lambda_mode.clone();
            }
            Command::Bounds(a) => {
                a.estimation.apply(&mut s);
                s.regime = a.regime.clone();
                s.horizon = a.horizon;
                s.h = a.h;
                s.delta = a.delta;
                s.c = a.c;
                s.kappa_sq = a.kappa_sq;
                s.eps_score = a.eps_score;
                s.constant_factor = a.constant_factor;
            }
            Command::OrderCheck(a) => {
                a.data.apply(&mut s);
                s.estimator = a.estimator.clone();
                s.nodes = a.nodes;
                s.hs = a.hs.clone();
                s.span = a.span;
                s.delta = a.delta;
            }
            Command::Schedule(a) => {
                s.eps = a.eps;
                s.alphabet = a.alphabet;
                s.d = a.d;
                s.delta = a.delta;
                s.c = a.c;
                s.kappa_sq = a.kappa_sq;
                s.out = a.out.clone();
            }
            Command::Sweep(a) => {
                a.data.apply(&mut s);
                s.nodes = a.nodes;
                s.hs = a.hs.clone();
                s.gammas = a.gammas.clone();
                s.deltas = a.deltas.clone();
                s.horizons = a.horizons.clone();
            }
        }
        s
    }
}

/// Runs a subcommand on fully merged settings and returns the CSV text.
pub fn execute(command: &str, settings: Settings) -> Result<String> {
    let s = Settings {
        command: Some(command.to_string()),
        ..settings
    };
    match command {
        "forward" => commands::forward(s),
        "score" => commands::score(s),
        "eps-score" => commands::eps_score(s),
        "sample" => commands::sample(s),
        "exact-law" => commands::exact_law(s),
        "path-kl" => commands::path_kl_cmd(s),
        "decompose" => commands::decompose(s),
        "bounds" => commands::bounds(s),
        "order-check" => commands::order_check_cmd(s),
        "schedule" => commands::schedule(s),
        "sweep" => commands::sweep(s),
        other => Err(Error::config("command", format!("unknown command {other:?}"))),
    }
}

/// Merges flags over the config file, runs the command on a pool of the
/// requested size and places the output.
pub fn run(cli: Cli) -> Result<()> {
    let mut flags = cli.command.settings();
    flags.seed = cli.seed;
    flags.jobs = cli.jobs;
    flags.out_dir = cli.out_dir.clone();
    let file = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let name = cli.command.name();
    if let Some(other) = file.command.as_deref().filter(|c| *c != name) {
        return Err(Error::config(
            "command",
            format!("config file was written for `{other}`, not `{name}`"),
        ));
    }
    let settings = flags.over(file);
    let jobs = settings.jobs;
    let out_dir = settings.out_dir.clone();
    let out = settings.out.clone();

    let text = match jobs {
        Some(0) => return Err(Error::config("jobs", "must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("jobs", e.to_string()))?
            .install(|| execute(name, settings))?,
        None => execute(name, settings)?,
    };

    let target = match (out, out_dir) {
        (Some(out), Some(dir)) if out.is_relative() => Some(dir.join(out)),
        (Some(out), _) => Some(out),
        (None, Some(dir)) => Some(dir.join(format!("{name}.csv"))),
        (None, None) => None,
    };
    match target {
        Some(path) => commands::write_atomic(&path, &text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("writing to stdout", e)),
    }
}

/// Entry point shared by the binary and tests.
pub fn main_with_args<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::config("arguments", e.to_string()))?;
    run(cli)
}
