//! Configuration resolution: built-in reference defaults, then the config file,
//! then command-line flags, in that order of increasing precedence. The
//! fully resolved set is frozen into the run manifest before anything
//! executes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use clap::Args;
use serde::Serialize;

use rabi_cp::experiments::{Calibration, ExperimentConfig};

/// CLI error split by exit code: 2 for configuration problems, 3 for
/// numerical failures.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl CliError {
    pub fn config(e: impl fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Numeric(m) => write!(f, "{m}"),
        }
    }
}

impl From<rabi_cp::Error> for CliError {
    fn from(e: rabi_cp::Error) -> Self {
        match e {
            rabi_cp::Error::InvalidParameter { .. } | rabi_cp::Error::DegenerateInput(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

/// Flag-level overrides shared by every subcommand. SI units throughout:
/// meters, seconds, kelvin, rates in 1/s.
#[derive(Args, Debug, Default, Clone)]
pub struct Overrides {
    /// Particle number N.
    #[arg(long, value_name = "N")]
    pub n: Option<usize>,

    /// Tunneling rate E_J/hbar, 1/s.
    #[arg(long)]
    pub ej_rate: Option<f64>,

    /// Detuning rate delta/hbar used by the sensitivity pipelines, 1/s.
    #[arg(long)]
    pub delta_rate: Option<f64>,

    /// Plate distance, meters.
    #[arg(long)]
    pub d: Option<f64>,

    /// Well separation, meters.
    #[arg(long)]
    pub l: Option<f64>,

    /// Detection resolution per shot, particles.
    #[arg(long)]
    pub sigma_res: Option<f64>,

    /// Residual-interaction strength gamma = N E_C/E_J.
    #[arg(long)]
    pub gamma: Option<f64>,

    /// Probe times per record.
    #[arg(long)]
    pub k: Option<usize>,

    /// Repetitions per probe time.
    #[arg(long)]
    pub m: Option<usize>,

    /// Monte-Carlo trials.
    #[arg(long)]
    pub trials: Option<usize>,

    /// RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Input-state squeezing xi^2 for sensitivity/simulate/fit (1 = CSS).
    #[arg(long)]
    pub xi2: Option<f64>,

    /// Gaussian mode width, meters (omit for point-sampled modes).
    #[arg(long)]
    pub mode_width: Option<f64>,
}

/// Fully resolved run description; serialized as the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub subcommand: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    /// Subcommand-specific resolved parameters.
    pub extra: BTreeMap<String, String>,
    pub calibration: Option<Calibration>,
    pub version: String,
    #[serde(skip)]
    pub input_xi2: f64,
}

impl Resolved {
    pub fn load(
        config_path: Option<&Path>,
        overrides: &Overrides,
        subcommand: &str,
    ) -> Result<Self, CliError> {
        let mut config = match config_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                toml::from_str::<ExperimentConfig>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => ExperimentConfig::default(),
        };

        if let Some(v) = overrides.n {
            config.particles = v;
        }
        if let Some(v) = overrides.ej_rate {
            config.ej_rate = v;
        }
        if let Some(v) = overrides.delta_rate {
            config.delta_rate = v;
        }
        if let Some(v) = overrides.d {
            config.d_m = v;
        }
        if let Some(v) = overrides.l {
            config.l_m = v;
        }
        if let Some(v) = overrides.sigma_res {
            config.sigma_res = v;
        }
        if let Some(v) = overrides.gamma {
            config.gamma = v;
        }
        if let Some(v) = overrides.k {
            config.k = v;
        }
        if let Some(v) = overrides.m {
            config.m = v;
        }
        if let Some(v) = overrides.trials {
            config.trials = v;
        }
        if let Some(v) = overrides.seed {
            config.seed = v;
        }
        if let Some(v) = overrides.mode_width {
            config.mode_width_m = Some(v);
        }
        config.validate().map_err(CliError::config)?;

        let input_xi2 = overrides.xi2.unwrap_or(1.0);
        if !(input_xi2 > 0.0 && input_xi2 <= 1.0) {
            return Err(CliError::Config(format!(
                "invalid parameter `xi2`: {input_xi2} must lie in (0, 1]"
            )));
        }

        let mut extra = BTreeMap::new();
        extra.insert("input_xi2".to_string(), input_xi2.to_string());
        Ok(Self {
            subcommand: subcommand.to_string(),
            seed: config.seed,
            config,
            extra,
            calibration: None,
            version: rabi_cp::version().to_string(),
            input_xi2,
        })
    }

    /// Record a subcommand-specific resolved parameter in the manifest.
    pub fn note(&mut self, key: &str, value: String) {
        self.extra.insert(key.to_string(), value);
    }

    pub fn manifest_toml(&self, outputs: &[String]) -> Result<String, CliError> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            subcommand: &'a str,
            seed: u64,
            outputs: &'a [String],
            version: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            calibration: &'a Option<Calibration>,
            extra: &'a BTreeMap<String, String>,
            config: &'a ExperimentConfig,
        }
        toml::to_string_pretty(&Manifest {
            subcommand: &self.subcommand,
            seed: self.seed,
            outputs,
            version: &self.version,
            calibration: &self.calibration,
            extra: &self.extra,
            config: &self.config,
        })
        .map_err(|e| CliError::Config(format!("manifest serialization: {e}")))
    }
}
