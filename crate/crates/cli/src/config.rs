//! Run configuration: built-in defaults, overridden by a TOML file, overridden
//! by command-line flags. The resolved result is written next to every run's
//! outputs.

use std::path::{Path, PathBuf};

use exohawkes::events::{DEFAULT_MAX_GAP, DEFAULT_MIN_GAP};
use exohawkes::fitter::Bounds;
use exohawkes::kernels::{DEFAULT_MEDIAN_MIN, DEFAULT_PEAK_MIN, DEFAULT_POWERLAW_EPS};
use exohawkes::simulator::{RecoveryTolerances, DEFAULT_MAX_EVENTS, DEFAULT_WINDOW};
use exohawkes::{EmotionSet, ShapeConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ShapeFamily {
    Lognormal,
    Powerlaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeSettings {
    pub family: ShapeFamily,
    /// Log-normal mode, minutes.
    pub peak: f64,
    /// Log-normal median, minutes.
    pub median: f64,
    /// Power-law exponent.
    pub c: f64,
    /// Power-law offset, minutes.
    pub eps: f64,
}

impl Default for ShapeSettings {
    fn default() -> Self {
        ShapeSettings {
            family: ShapeFamily::Lognormal,
            peak: DEFAULT_PEAK_MIN,
            median: DEFAULT_MEDIAN_MIN,
            c: 2.5,
            eps: DEFAULT_POWERLAW_EPS,
        }
    }
}

impl ShapeSettings {
    pub fn build(&self) -> Result<ShapeConfig, CliError> {
        let shape = match self.family {
            ShapeFamily::Lognormal => ShapeConfig::lognormal_from_peak_median(self.peak, self.median),
            ShapeFamily::Powerlaw => ShapeConfig::powerlaw(self.c, self.eps),
        };
        Ok(shape?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareSettings {
    pub filters: bool,
    pub min_gap: f64,
    pub max_gap: f64,
    pub q_lo: f64,
    pub q_hi: f64,
    /// Input carries the eleven extended labels; fold them to the basic six.
    pub extended_labels: bool,
    pub strict_subtitle_window: bool,
}

impl Default for PrepareSettings {
    fn default() -> Self {
        PrepareSettings {
            filters: true,
            min_gap: DEFAULT_MIN_GAP,
            max_gap: DEFAULT_MAX_GAP,
            q_lo: 0.2,
            q_hi: 0.8,
            extended_labels: false,
            strict_subtitle_window: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub replicas: usize,
    pub frac: f64,
    pub starts: usize,
    pub max_iterations: usize,
    pub grad_tol: f64,
    pub value_tol: f64,
    pub gamma_profile: bool,
    pub bounds: Bounds,
}

impl Default for FitSettings {
    fn default() -> Self {
        let f = exohawkes::FitConfig::default();
        let b = exohawkes::BootstrapConfig::default();
        FitSettings {
            replicas: b.n_replicas,
            frac: b.frac,
            starts: f.n_starts,
            max_iterations: f.max_iterations,
            grad_tol: f.grad_tol,
            value_tol: f.value_tol,
            gamma_profile: f.gamma_profile,
            bounds: f.bounds,
        }
    }
}

impl FitSettings {
    pub fn fit_config(&self, seed: u64) -> exohawkes::FitConfig {
        exohawkes::FitConfig {
            bounds: self.bounds,
            max_iterations: self.max_iterations,
            grad_tol: self.grad_tol,
            value_tol: self.value_tol,
            n_starts: self.starts,
            seed,
            gamma_profile: self.gamma_profile,
            ..exohawkes::FitConfig::default()
        }
    }

    pub fn bootstrap(&self) -> exohawkes::BootstrapConfig {
        exohawkes::BootstrapConfig {
            n_replicas: self.replicas,
            frac: self.frac,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSettings {
    pub sessions: usize,
    pub duration: f64,
    /// One rate for every label, or one per label.
    pub subtitle_rates: Vec<f64>,
    pub window: f64,
    pub max_events: usize,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        SimulateSettings {
            sessions: 50,
            duration: 120.0,
            subtitle_rates: vec![0.5],
            window: DEFAULT_WINDOW,
            max_events: DEFAULT_MAX_EVENTS,
        }
    }
}

impl SimulateSettings {
    pub fn rates_for(&self, n_labels: usize) -> Result<Vec<f64>, CliError> {
        match self.subtitle_rates.len() {
            1 => Ok(vec![self.subtitle_rates[0]; n_labels]),
            n if n == n_labels => Ok(self.subtitle_rates.clone()),
            n => Err(CliError::input(format!(
                "got {n} subtitle rates for {n_labels} labels (give one, or one per label)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSettings {
    /// Also evaluate the ratios on a uniform grid with this step (minutes).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSettings {
    pub sessions: usize,
    pub duration: f64,
    pub quick: bool,
    pub tolerances: RecoveryTolerances,
}

impl Default for ValidateSettings {
    fn default() -> Self {
        ValidateSettings {
            sessions: 50,
            duration: 120.0,
            quick: false,
            tolerances: RecoveryTolerances::default(),
        }
    }
}

pub const QUICK_SESSIONS: usize = 5;
pub const QUICK_DURATION: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub events: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Subcommand this configuration was resolved for.
    pub command: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub verbosity: u8,
    /// Labels that may appear in events files, in order.
    pub input_labels: Vec<String>,
    /// Labels to model; defaults to `input_labels`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emotions: Option<Vec<String>>,
    pub inputs: Inputs,
    pub shape: ShapeSettings,
    pub prepare: PrepareSettings,
    pub fit: FitSettings,
    pub simulate: SimulateSettings,
    pub analyze: AnalyzeSettings,
    pub validate: ValidateSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: String::new(),
            seed: 0,
            threads: None,
            out: PathBuf::from("."),
            verbosity: 0,
            input_labels: EmotionSet::default().labels().to_vec(),
            emotions: None,
            inputs: Inputs::default(),
            shape: ShapeSettings::default(),
            prepare: PrepareSettings::default(),
            fit: FitSettings::default(),
            simulate: SimulateSettings::default(),
            analyze: AnalyzeSettings::default(),
            validate: ValidateSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::input(format!("bad config {}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::input(format!("cannot serialize config: {e}")))
    }

    pub fn input_set(&self) -> Result<EmotionSet, CliError> {
        Ok(EmotionSet::new(self.input_labels.clone())?)
    }

    pub fn model_set(&self) -> Result<EmotionSet, CliError> {
        match &self.emotions {
            Some(l) => Ok(EmotionSet::new(l.clone())?),
            None => self.input_set(),
        }
    }
}
