use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use epr_noise::epr::epr_report;
use epr_noise::fit::{fit, FitError, FitProblem, FitResult};
use epr_noise::presets::{Scenario, ScenarioTag};
use epr_noise::spectra::{epr_noise_spectrum, interferometer_noise_map, spectrogram, SqueezeMode};
use epr_noise::ModelError;
use serde::Serialize;

use crate::config::{check_angles, parse_grid, FitConfig, ScenarioConfig};
use crate::error::{CliError, Result};
use crate::io::{emit, format_matrix, format_spectrum, read_trace_dir, to_json};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "EPR_NOISE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "epr-noise",
    version,
    about = "Quantum-noise spectra for EPR-squeezed readout"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Noise spectrum at the configured readout angle (CSV: omega_rad_s,S,dB).
    Spectrum(ScenarioArgs),
    /// Noise in dB over frequency and readout angle (CSV matrix).
    Spectrogram(ScenarioArgs),
    /// Interferometer noise relative to no squeezing over frequency and
    /// readout angle (CSV matrix).
    Map(ScenarioArgs),
    /// Fit model parameters to the traces in a directory.
    Fit(FitArgs),
    /// Conditional variances and Reid criterion of a two-mode squeezed state.
    Epr(EprArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// JSON scenario configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Preset: fig3a, fig3b, fig4, fig1-fi, fig1-fd or custom.
    #[arg(long, value_parser = parse_tag)]
    pub preset: Option<ScenarioTag>,
    /// Frequency grid as <min_hz>:<max_hz>:<points>:<lin|log>.
    #[arg(long)]
    pub grid: Option<String>,
    /// Number of readout angles over [0, 2π).
    #[arg(long)]
    pub angles: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Directory of trace CSV files.
    pub data_dir: PathBuf,
    /// JSON with the initial guess, free parameters and options.
    #[arg(long)]
    pub init: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EprArgs {
    /// Squeeze factor r.
    #[arg(long)]
    pub r: f64,
    /// Detection efficiency applied to both modes.
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_tag(s: &str) -> std::result::Result<ScenarioTag, String> {
    s.parse()
}

fn model_error(context: &str, e: ModelError) -> CliError {
    match e {
        ModelError::Domain { .. } | ModelError::InvalidGrid(_) => {
            CliError::validation(format!("{context}: {e}"))
        }
        _ => CliError::numerics(format!("{context}: {e}")),
    }
}

fn fit_error(e: FitError) -> CliError {
    match e {
        FitError::NonFiniteInitial(_) | FitError::Model { .. } => {
            CliError::numerics(format!("fit failed: {e}"))
        }
        _ => CliError::validation(format!("fit: {e}")),
    }
}

pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::validation(format!("{THREADS_ENV}='{value}' is not a positive integer"))
    })?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

impl ScenarioArgs {
    pub fn scenario(&self) -> Result<Scenario> {
        let config = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        let mut sc = config.resolve(self.preset)?;
        if let Some(spec) = &self.grid {
            sc.grid = parse_grid(spec)?.build()?;
        }
        if let Some(n) = self.angles {
            sc.angle_count = check_angles(n)?;
        }
        Ok(sc)
    }
}

fn map_mode_name(mode: SqueezeMode) -> &'static str {
    match mode {
        SqueezeMode::None => "none",
        SqueezeMode::FixedAngle => "fixed-angle",
        SqueezeMode::FrequencyDependent => "frequency-dependent",
    }
}

pub fn run_spectrum(sc: &Scenario, out: Option<&Path>) -> Result<()> {
    let spectrum = epr_noise_spectrum(&sc.cavity, &sc.squeezer, &sc.readout, &sc.grid)
        .map_err(|e| model_error("spectrum", e))?;
    let meta = [
        ("scenario", sc.tag.to_string()),
        ("zeta_rad", sc.readout.readout_angle().to_string()),
    ];
    emit(out, &format_spectrum(&meta, &spectrum))
}

pub fn run_spectrogram(sc: &Scenario, out: Option<&Path>) -> Result<()> {
    let map = spectrogram(
        &sc.cavity,
        &sc.squeezer,
        &sc.readout,
        &sc.grid,
        sc.angle_count,
    )
    .map_err(|e| model_error("spectrogram", e))?;
    emit(
        out,
        &format_matrix(&[("scenario", sc.tag.to_string())], &map),
    )
}

pub fn run_map(sc: &Scenario, out: Option<&Path>) -> Result<()> {
    let map = interferometer_noise_map(
        &sc.interferometer,
        &sc.squeezer,
        sc.readout.efficiency(),
        &sc.grid,
        sc.angle_count,
        sc.map_mode,
    )
    .map_err(|e| model_error("map", e))?;
    let meta = [
        ("scenario", sc.tag.to_string()),
        ("map_mode", map_mode_name(sc.map_mode).to_string()),
    ];
    emit(out, &format_matrix(&meta, &map))
}

#[derive(Debug, Serialize)]
pub struct FitReport<'a> {
    pub data_dir: String,
    #[serde(flatten)]
    pub result: &'a FitResult,
}

pub fn run_fit(data_dir: &Path, init: &Path, out: Option<&Path>) -> Result<FitResult> {
    let config = FitConfig::load(init)?;
    let traces = read_trace_dir(data_dir)?;
    let problem = FitProblem::with_options(
        traces,
        config.initial,
        config.free.clone(),
        config.options(),
    )
    .map_err(fit_error)?;
    let result = fit(&problem).map_err(fit_error)?;
    if !result.converged {
        eprintln!(
            "warning: fit stopped after {} iterations without converging (residual {})",
            result.iterations, result.residual
        );
    }
    let report = FitReport {
        data_dir: data_dir.display().to_string(),
        result: &result,
    };
    emit(out, &to_json(&report)?)?;
    Ok(result)
}

pub fn run_epr(r: f64, eta: f64, out: Option<&Path>) -> Result<()> {
    let report = epr_report(r, eta).map_err(|e| model_error("epr", e))?;
    emit(out, &to_json(&report)?)
}

pub fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Spectrum(a) => run_spectrum(&a.scenario()?, a.out.as_deref()),
        Command::Spectrogram(a) => run_spectrogram(&a.scenario()?, a.out.as_deref()),
        Command::Map(a) => run_map(&a.scenario()?, a.out.as_deref()),
        Command::Fit(a) => run_fit(&a.data_dir, &a.init, a.out.as_deref()).map(|_| ()),
        Command::Epr(a) => run_epr(a.r, a.eta, a.out.as_deref()),
    }
}
