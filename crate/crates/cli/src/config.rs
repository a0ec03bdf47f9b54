use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, ValueEnum};
use serde::Deserialize;

use crate::units::{parse_quantity, Quantity};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Resolution and bandwidth figures of merit for one rotation
    Metrics,
    /// Sensing kernel by Gaussian-probe delay sweep
    Kernel,
    /// Bode gain by sine-tone fits
    Bode,
    /// Phase pick-up ratio versus sequence duration
    Fig2,
    /// Kernels for α = 22.5°, 45°, 67°, 90°
    Fig3b,
    /// Bode gains for α = 22.5°, 45°, 67°, 90°
    Fig3c,
    /// Sensitivity surface over (ω, τ) plus its ridge
    Fig3d,
    /// Spin-1 signal versus Rabi frequency for both readout bases
    Fig4d,
    /// Lab-frame Bode gains for tilted stimuli
    Offaxis,
    /// Optimal pulse duration per signal frequency
    Optimal,
    /// Quantum speed limits for a resonant drive
    Qsl,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Metrics => "metrics",
            Command::Kernel => "kernel",
            Command::Bode => "bode",
            Command::Fig2 => "fig2",
            Command::Fig3b => "fig3b",
            Command::Fig3c => "fig3c",
            Command::Fig3d => "fig3d",
            Command::Fig4d => "fig4d",
            Command::Offaxis => "offaxis",
            Command::Optimal => "optimal",
            Command::Qsl => "qsl",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qsense", version, about = "Time-resolved qubit sensing datasets")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// TOML file with `command`, `out`, `expensive` and a `[parameters]` table
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV path or directory (default: $QSENSE_OUT_DIR or .)
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Run the analytic cross-checks and print a pass/fail table
    #[arg(long)]
    pub check: bool,
    /// Use the full-scale bias field for fig4d
    #[arg(long)]
    pub expensive: bool,
    /// Allow flip angles up to 180° in fig3d/optimal
    #[arg(long)]
    pub extended: bool,
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Default, Args)]
pub struct ParamArgs {
    /// Rabi frequency, e.g. 10MHz or 6.3e7rad/s
    #[arg(long, allow_hyphen_values = true)]
    pub rabi: Option<String>,
    /// Flip angle per pulse, e.g. 90deg
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Sequence duration, e.g. 50ns
    #[arg(long, allow_hyphen_values = true)]
    pub tau: Option<String>,
    /// Single signal frequency
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<String>,
    /// Upper end of a frequency sweep
    #[arg(long, allow_hyphen_values = true)]
    pub omega_max: Option<String>,
    /// Bias field, e.g. 100mT
    #[arg(long, allow_hyphen_values = true)]
    pub b0: Option<String>,
    /// Stimulus tilt from the quantization axis
    #[arg(long, allow_hyphen_values = true)]
    pub chi: Option<String>,
    /// Gaussian probe FWHM for kernel estimation
    #[arg(long, allow_hyphen_values = true)]
    pub probe_fwhm: Option<String>,
    /// Lower end of the fig4d Rabi sweep
    #[arg(long, allow_hyphen_values = true)]
    pub rabi_min: Option<String>,
    /// Upper end of the fig4d Rabi sweep
    #[arg(long, allow_hyphen_values = true)]
    pub rabi_max: Option<String>,
    /// rotating or lab
    #[arg(long)]
    pub backend: Option<String>,
    /// ms0 or ms-1 (lab backend)
    #[arg(long)]
    pub basis: Option<String>,
    /// Number of sweep points
    #[arg(long)]
    pub points: Option<String>,
    /// Number of τ grid points (fig3d)
    #[arg(long)]
    pub tau_points: Option<String>,
}

impl ParamArgs {
    fn entries(&self) -> [(&'static str, &Option<String>); 14] {
        [
            ("rabi", &self.rabi),
            ("alpha", &self.alpha),
            ("tau", &self.tau),
            ("omega", &self.omega),
            ("omega_max", &self.omega_max),
            ("b0", &self.b0),
            ("chi", &self.chi),
            ("probe_fwhm", &self.probe_fwhm),
            ("rabi_min", &self.rabi_min),
            ("rabi_max", &self.rabi_max),
            ("backend", &self.backend),
            ("basis", &self.basis),
            ("points", &self.points),
            ("tau_points", &self.tau_points),
        ]
    }
}

fn known_key(key: &str) -> bool {
    ParamArgs::default().entries().iter().any(|(k, _)| *k == key)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    command: Option<Command>,
    out: Option<PathBuf>,
    expensive: Option<bool>,
    extended: Option<bool>,
    #[serde(default)]
    parameters: BTreeMap<String, toml::Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Option<Command>,
    /// raw values with unit suffixes
    pub parameters: BTreeMap<String, String>,
    pub output_path: Option<PathBuf>,
    pub expensive: bool,
    pub extended: bool,
    pub check: bool,
}

/// Rotation triple resolved from any two of Ω, α, τ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation {
    pub rabi: f64,
    pub alpha: f64,
    pub tau: f64,
}

/// Merges the optional config document with flags; flags win.
pub fn parse_config(cli: Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig {
        command: None,
        parameters: BTreeMap::new(),
        output_path: None,
        expensive: false,
        extended: false,
        check: cli.check,
    };
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let doc: ConfigDoc = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.command = doc.command;
        cfg.output_path = doc.out;
        cfg.expensive = doc.expensive.unwrap_or(false);
        cfg.extended = doc.extended.unwrap_or(false);
        for (key, value) in doc.parameters {
            if !known_key(&key) {
                return Err(CliError::Config(format!("unknown parameter {key:?}")));
            }
            let text = match value {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(x) => x.to_string(),
                other => {
                    return Err(CliError::Config(format!("{key}: expected a string, got {other}")));
                }
            };
            cfg.parameters.insert(key, text);
        }
    }
    if cli.command.is_some() {
        cfg.command = cli.command;
    }
    if cli.out.is_some() {
        cfg.output_path = cli.out;
    }
    cfg.expensive |= cli.expensive;
    cfg.extended |= cli.extended;
    for (key, value) in cli.params.entries() {
        if let Some(v) = value {
            cfg.parameters.insert(key.to_string(), v.clone());
        }
    }
    if cfg.command.is_none() && !cfg.check {
        return Err(CliError::Config("no command given (see --help)".into()));
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn text(&self, key: &str) -> Option<&str> {
        self.parameters.get(key).map(String::as_str)
    }

    pub fn quantity(&self, key: &str, kind: Quantity) -> Result<Option<f64>, CliError> {
        self.text(key).map(|t| parse_quantity(key, t, kind)).transpose()
    }

    pub fn quantity_or(&self, key: &str, kind: Quantity, default: f64) -> Result<f64, CliError> {
        Ok(self.quantity(key, kind)?.unwrap_or(default))
    }

    pub fn require(&self, key: &str, kind: Quantity) -> Result<f64, CliError> {
        self.quantity(key, kind)?
            .ok_or_else(|| CliError::Config(format!("{key}: required by {}", self.command_name())))
    }

    /// Integer count, at least 2.
    pub fn count(&self, key: &str, default: usize) -> Result<usize, CliError> {
        let Some(t) = self.text(key) else {
            return Ok(default);
        };
        match t.trim().parse::<usize>() {
            Ok(n) if n >= 2 => Ok(n),
            _ => Err(CliError::Config(format!("{key}: expected an integer ≥ 2, got {t:?}"))),
        }
    }

    pub fn command_name(&self) -> &'static str {
        self.command.map_or("check", Command::name)
    }

    /// Ω, α, τ from any two of them. A third value must agree to 1e-9.
    pub fn rotation(&self) -> Result<Rotation, CliError> {
        let rabi = self.quantity("rabi", Quantity::Frequency)?;
        let alpha = self.quantity("alpha", Quantity::Angle)?;
        let tau = self.quantity("tau", Quantity::Time)?;
        resolve_rotation(rabi, alpha, tau)
    }

    /// As [`rotation`](Self::rotation) but only Ω is needed, with a default.
    pub fn rabi_or(&self, default: f64) -> Result<f64, CliError> {
        let v = self.quantity_or("rabi", Quantity::Frequency, default)?;
        positive("rabi", v)
    }
}

pub(crate) fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{key}: must be positive, got {v:e}")))
    }
}

pub fn resolve_rotation(rabi: Option<f64>, alpha: Option<f64>, tau: Option<f64>) -> Result<Rotation, CliError> {
    let r = match (rabi, alpha, tau) {
        (Some(w), Some(a), Some(t)) => {
            if (0.5 * w * t - a).abs() > 1e-9 * a.abs().max(f64::MIN_POSITIVE) {
                return Err(CliError::Config(format!(
                    "rabi, alpha, tau over-determined and inconsistent: Ωτ/2 = {:e} rad but alpha = {a:e} rad",
                    0.5 * w * t
                )));
            }
            Rotation { rabi: w, alpha: a, tau: t }
        }
        (Some(w), None, Some(t)) => Rotation { rabi: w, alpha: 0.5 * w * t, tau: t },
        (None, Some(a), Some(t)) => Rotation { rabi: 2.0 * a / t, alpha: a, tau: t },
        (Some(w), Some(a), None) => Rotation { rabi: w, alpha: a, tau: 2.0 * a / w },
        _ => {
            return Err(CliError::Config(
                "rotation under-determined: give two of rabi, alpha, tau".into(),
            ));
        }
    };
    positive("rabi", r.rabi)?;
    positive("alpha", r.alpha)?;
    positive("tau", r.tau)?;
    Ok(r)
}
