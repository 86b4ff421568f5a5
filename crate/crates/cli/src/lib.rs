//! Command-line workflows over the `exohawkes` library.
//!
//! Exit codes: 0 success, 2 validation failure (including an empty prepare
//! result), 3 input error, 4 numerical failure.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_INPUT: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<exohawkes::Error> for CliError {
    fn from(e: exohawkes::Error) -> Self {
        CliError {
            code: if e.is_input_error() { EXIT_INPUT } else { EXIT_NUMERICAL },
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "exohawkes", version, about = "Fit, simulate and analyze exogenously driven multivariate Hawkes processes")]
pub struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML file with run settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct LabelArgs {
    /// Labels to model, comma-separated (default: all input labels).
    #[arg(long, value_delimiter = ',')]
    pub emotions: Option<Vec<String>>,
    /// Labels that may appear in the events file, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub input_labels: Option<Vec<String>>,
}

#[derive(Debug, Args, Default)]
pub struct ShapeArgs {
    /// Exogenous response shape.
    #[arg(long, value_enum)]
    pub shape: Option<config::ShapeFamily>,
    /// Log-normal mode in minutes.
    #[arg(long)]
    pub peak: Option<f64>,
    /// Log-normal median in minutes.
    #[arg(long)]
    pub median: Option<f64>,
    /// Power-law exponent.
    #[arg(long)]
    pub c: Option<f64>,
    /// Power-law offset in minutes.
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct FitArgs {
    /// Number of subsampled refits.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Fraction of sessions per refit, drawn without replacement.
    #[arg(long)]
    pub frac: Option<f64>,
    /// Optimizer starts per label.
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter an events file and report per-session statistics.
    Prepare {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Copy sessions through without filtering.
        #[arg(long)]
        no_filters: bool,
        /// Smallest median message gap kept, minutes.
        #[arg(long)]
        min_gap: Option<f64>,
        /// Largest median message gap kept, minutes.
        #[arg(long)]
        max_gap: Option<f64>,
        #[arg(long)]
        q_lo: Option<f64>,
        #[arg(long)]
        q_hi: Option<f64>,
        /// Input uses the eleven extended labels; fold them to six.
        #[arg(long)]
        extended_labels: bool,
        /// Drop chat outside the span of each session's subtitles.
        #[arg(long)]
        strict_subtitle_window: bool,
        #[command(flatten)]
        labels: LabelArgs,
    },
    /// Fit parameters with subsampled refits.
    Fit {
        #[arg(long)]
        events: Option<PathBuf>,
        #[command(flatten)]
        labels: LabelArgs,
        #[command(flatten)]
        shape: ShapeArgs,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Simulate sessions from a params file.
    Simulate {
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        sessions: Option<usize>,
        /// Session length, minutes.
        #[arg(long)]
        duration: Option<f64>,
        /// Subtitles per minute: one value, or one per label.
        #[arg(long, value_delimiter = ',')]
        subtitle_rate: Option<Vec<f64>>,
        #[arg(long)]
        max_events: Option<usize>,
    },
    /// Influence ratios, branching matrix and residual diagnostics.
    Analyze {
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
        /// Also evaluate ratios on a uniform time grid with this step.
        #[arg(long)]
        grid: Option<f64>,
        #[command(flatten)]
        labels: LabelArgs,
    },
    /// Simulate from known parameters, refit, and score the recovery.
    Validate {
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        sessions: Option<usize>,
        #[arg(long)]
        duration: Option<f64>,
        /// Smoke run: few short sessions.
        #[arg(long)]
        quick: bool,
        #[arg(long, value_delimiter = ',')]
        subtitle_rate: Option<Vec<f64>>,
        #[command(flatten)]
        fit: FitArgs,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Prepare { .. } => "prepare",
            Command::Fit { .. } => "fit",
            Command::Simulate { .. } => "simulate",
            Command::Analyze { .. } => "analyze",
            Command::Validate { .. } => "validate",
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn apply_labels(cfg: &mut RunConfig, l: LabelArgs) {
    if l.emotions.is_some() {
        cfg.emotions = l.emotions;
    }
    set(&mut cfg.input_labels, l.input_labels);
}

fn apply_shape(cfg: &mut RunConfig, s: ShapeArgs) {
    set(&mut cfg.shape.family, s.shape);
    set(&mut cfg.shape.peak, s.peak);
    set(&mut cfg.shape.median, s.median);
    set(&mut cfg.shape.c, s.c);
    set(&mut cfg.shape.eps, s.eps);
}

fn apply_fit(cfg: &mut RunConfig, f: FitArgs) {
    set(&mut cfg.fit.replicas, f.bootstrap);
    set(&mut cfg.fit.frac, f.frac);
    set(&mut cfg.fit.starts, f.starts);
    set(&mut cfg.fit.max_iterations, f.max_iterations);
}

/// Defaults, then the config file, then flags.
pub fn resolve(cli: Cli) -> Result<(RunConfig, &'static str), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let name = cli.command.name();
    cfg.command = name.to_string();
    set(&mut cfg.seed, cli.seed);
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    set(&mut cfg.out, cli.out);
    if cli.verbose > 0 {
        cfg.verbosity = cli.verbose;
    }
    match cli.command {
        Command::Prepare {
            input,
            no_filters,
            min_gap,
            max_gap,
            q_lo,
            q_hi,
            extended_labels,
            strict_subtitle_window,
            labels,
        } => {
            if input.is_some() {
                cfg.inputs.events = input;
            }
            if no_filters {
                cfg.prepare.filters = false;
            }
            set(&mut cfg.prepare.min_gap, min_gap);
            set(&mut cfg.prepare.max_gap, max_gap);
            set(&mut cfg.prepare.q_lo, q_lo);
            set(&mut cfg.prepare.q_hi, q_hi);
            cfg.prepare.extended_labels |= extended_labels;
            cfg.prepare.strict_subtitle_window |= strict_subtitle_window;
            apply_labels(&mut cfg, labels);
        }
        Command::Fit {
            events,
            labels,
            shape,
            fit,
        } => {
            if events.is_some() {
                cfg.inputs.events = events;
            }
            apply_labels(&mut cfg, labels);
            apply_shape(&mut cfg, shape);
            apply_fit(&mut cfg, fit);
        }
        Command::Simulate {
            params,
            sessions,
            duration,
            subtitle_rate,
            max_events,
        } => {
            if params.is_some() {
                cfg.inputs.params = params;
            }
            set(&mut cfg.simulate.sessions, sessions);
            set(&mut cfg.simulate.duration, duration);
            set(&mut cfg.simulate.subtitle_rates, subtitle_rate);
            set(&mut cfg.simulate.max_events, max_events);
        }
        Command::Analyze {
            params,
            events,
            grid,
            labels,
        } => {
            if params.is_some() {
                cfg.inputs.params = params;
            }
            if events.is_some() {
                cfg.inputs.events = events;
            }
            if grid.is_some() {
                cfg.analyze.grid_step = grid;
            }
            apply_labels(&mut cfg, labels);
        }
        Command::Validate {
            params,
            sessions,
            duration,
            quick,
            subtitle_rate,
            fit,
        } => {
            if params.is_some() {
                cfg.inputs.params = params;
            }
            set(&mut cfg.validate.sessions, sessions);
            set(&mut cfg.validate.duration, duration);
            cfg.validate.quick |= quick;
            set(&mut cfg.simulate.subtitle_rates, subtitle_rate);
            apply_fit(&mut cfg, fit);
        }
    }
    Ok((cfg, name))
}

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Parses arguments and runs the selected workflow.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        use clap::error::ErrorKind;
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                let _ = e.print();
                CliError {
                    code: 0,
                    message: String::new(),
                }
            }
            _ => CliError::input(e.to_string()),
        }
    })?;
    let (cfg, name) = resolve(cli)?;
    init_logging(cfg.verbosity);
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(CliError::input("--threads must be at least 1"));
        }
        // Fails only if a pool already exists (repeated calls in one process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    std::fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", cfg.out.display())))?;
    commands::write_text(&cfg.out.join("resolved_config.toml"), &cfg.to_toml()?)?;
    match name {
        "prepare" => commands::prepare(&cfg),
        "fit" => commands::fit(&cfg),
        "simulate" => commands::simulate(&cfg),
        "analyze" => commands::analyze(&cfg),
        "validate" => commands::validate(&cfg),
        _ => unreachable!("clap only yields known subcommands"),
    }
}
