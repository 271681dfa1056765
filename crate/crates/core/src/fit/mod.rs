//! Joint least-squares estimation of model parameters from measured noise
//! traces taken at several readout angles.
//!
//! The objective is Σ_traces w · Σ_samples (model dB − measured dB)². It is
//! minimized by a restarted Nelder–Mead simplex in transformed coordinates
//! (logistic for η, log for γ, r and LO powers, identity for detunings and
//! readout angles), followed by a Levenberg–Marquardt polish on the same
//! residual vector.

mod refine;
mod simplex;
pub mod synthetic;

use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ModelError;
use crate::params::{FilterCavityParams, ReadoutParams};
use crate::spectra::{epr_noise, to_db};

pub use synthetic::{synthetic_trace, synthetic_traces};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid fit problem: {0}")]
    Invalid(String),

    #[error("gauge violation: {0}")]
    Gauge(String),

    #[error("no free parameters")]
    NoFreeParameters,

    #[error("residual at the initial guess is not finite ({0})")]
    NonFiniteInitial(f64),

    #[error("parameter {name} = {value} is outside its bounds [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("model evaluation failed for trace {trace}, sample {sample}: {source}")]
    Model {
        trace: usize,
        sample: usize,
        #[source]
        source: ModelError,
    },
}

/// Readout quadrature a trace was recorded at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceLabel {
    Phase,
    Intermediate,
    Amplitude,
    Explicit(f64),
}

impl TraceLabel {
    pub fn zeta(&self) -> f64 {
        match self {
            TraceLabel::Phase => FRAC_PI_2,
            TraceLabel::Intermediate => FRAC_PI_4,
            TraceLabel::Amplitude => 0.0,
            TraceLabel::Explicit(z) => *z,
        }
    }
}

/// Noise samples (frequency in Hz, noise in dB re. vacuum) at one readout
/// angle.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredTrace {
    name: String,
    label: TraceLabel,
    samples: Vec<(f64, f64)>,
    weight: f64,
}

impl MeasuredTrace {
    pub fn new(
        name: impl Into<String>,
        label: TraceLabel,
        samples: Vec<(f64, f64)>,
        weight: f64,
    ) -> Result<Self, FitError> {
        let name = name.into();
        if samples.is_empty() {
            return Err(FitError::Invalid(format!("trace '{name}' has no samples")));
        }
        if !label.zeta().is_finite() {
            return Err(FitError::Invalid(format!(
                "trace '{name}' has a non-finite angle"
            )));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(FitError::Invalid(format!(
                "trace '{name}' weight {weight} must be positive"
            )));
        }
        for (i, (f, db)) in samples.iter().enumerate() {
            if !(f.is_finite() && *f > 0.0 && db.is_finite()) {
                return Err(FitError::Invalid(format!(
                    "trace '{name}' sample {i} is not finite or has non-positive frequency"
                )));
            }
            if i > 0 && *f <= samples[i - 1].0 {
                return Err(FitError::Invalid(format!(
                    "trace '{name}' frequencies are not strictly increasing at sample {i}"
                )));
            }
        }
        Ok(Self {
            name,
            label,
            samples,
            weight,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn label(&self) -> TraceLabel {
        self.label
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn with_weight(mut self, weight: f64) -> Result<Self, FitError> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(FitError::Invalid(format!(
                "weight {weight} must be positive"
            )));
        }
        self.weight = weight;
        Ok(self)
    }
}

/// Model parameters shared by all traces. Frequencies in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub squeeze_factor: f64,
    pub efficiency: f64,
    pub halfwidth_rad_s: f64,
    pub detuning_signal_rad_s: f64,
    pub detuning_idler_rad_s: f64,
    pub lo_power_signal: f64,
    pub lo_power_idler: f64,
}

impl ModelParams {
    pub fn lo_ratio(&self) -> f64 {
        self.lo_power_signal / self.lo_power_idler
    }

    pub fn cavity(&self) -> Result<FilterCavityParams, ModelError> {
        FilterCavityParams::new(
            self.halfwidth_rad_s,
            self.detuning_signal_rad_s,
            self.detuning_idler_rad_s,
        )
    }

    pub fn readout(&self, zeta: f64) -> Result<ReadoutParams, ModelError> {
        ReadoutParams::new(
            zeta,
            self.efficiency,
            self.lo_power_signal,
            self.lo_power_idler,
        )
    }

    /// Model noise in dB at frequency `f_hz` and readout angle `zeta`.
    pub fn noise_db(&self, zeta: f64, f_hz: f64) -> Result<f64, ModelError> {
        let cav = self.cavity()?;
        let rd = self.readout(zeta)?;
        epr_noise(&cav, self.squeeze_factor, &rd, std::f64::consts::TAU * f_hz).map(to_db)
    }

    pub fn get(&self, id: ParamId, zetas: &[f64]) -> f64 {
        match id {
            ParamId::SqueezeFactor => self.squeeze_factor,
            ParamId::Efficiency => self.efficiency,
            ParamId::Halfwidth => self.halfwidth_rad_s,
            ParamId::DetuningSignal => self.detuning_signal_rad_s,
            ParamId::DetuningIdler => self.detuning_idler_rad_s,
            ParamId::LoRatio => self.lo_ratio(),
            ParamId::LoPowerSignal => self.lo_power_signal,
            ParamId::LoPowerIdler => self.lo_power_idler,
            ParamId::Zeta(i) => zetas[i],
        }
    }

    fn set(&mut self, id: ParamId, value: f64, zetas: &mut [f64]) {
        match id {
            ParamId::SqueezeFactor => self.squeeze_factor = value,
            ParamId::Efficiency => self.efficiency = value,
            ParamId::Halfwidth => self.halfwidth_rad_s = value,
            ParamId::DetuningSignal => self.detuning_signal_rad_s = value,
            ParamId::DetuningIdler => self.detuning_idler_rad_s = value,
            ParamId::LoRatio => self.lo_power_signal = value * self.lo_power_idler,
            ParamId::LoPowerSignal => self.lo_power_signal = value,
            ParamId::LoPowerIdler => self.lo_power_idler = value,
            ParamId::Zeta(i) => zetas[i] = value,
        }
    }
}

/// Names of fittable quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamId {
    SqueezeFactor,
    Efficiency,
    Halfwidth,
    DetuningSignal,
    DetuningIdler,
    /// α/β with β held fixed.
    LoRatio,
    LoPowerSignal,
    LoPowerIdler,
    /// Readout angle of the trace with this index.
    Zeta(usize),
}

impl ParamId {
    pub fn unit(&self) -> &'static str {
        match self {
            ParamId::Halfwidth | ParamId::DetuningSignal | ParamId::DetuningIdler => "rad/s",
            ParamId::Zeta(_) => "rad",
            _ => "1",
        }
    }

    fn transform(&self, lower: f64, upper: f64) -> Transform {
        match self {
            ParamId::Efficiency => Transform::Logistic { lower, upper },
            ParamId::SqueezeFactor
            | ParamId::Halfwidth
            | ParamId::LoRatio
            | ParamId::LoPowerSignal
            | ParamId::LoPowerIdler => Transform::Log,
            ParamId::DetuningSignal | ParamId::DetuningIdler | ParamId::Zeta(_) => {
                Transform::Identity
            }
        }
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamId::SqueezeFactor => f.write_str("r"),
            ParamId::Efficiency => f.write_str("eta"),
            ParamId::Halfwidth => f.write_str("gamma"),
            ParamId::DetuningSignal => f.write_str("delta_signal"),
            ParamId::DetuningIdler => f.write_str("delta_idler"),
            ParamId::LoRatio => f.write_str("lo_ratio"),
            ParamId::LoPowerSignal => f.write_str("alpha"),
            ParamId::LoPowerIdler => f.write_str("beta"),
            ParamId::Zeta(i) => write!(f, "zeta[{i}]"),
        }
    }
}

impl FromStr for ParamId {
    type Err = FitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "r" => ParamId::SqueezeFactor,
            "eta" => ParamId::Efficiency,
            "gamma" => ParamId::Halfwidth,
            "delta_signal" => ParamId::DetuningSignal,
            "delta_idler" => ParamId::DetuningIdler,
            "lo_ratio" => ParamId::LoRatio,
            "alpha" => ParamId::LoPowerSignal,
            "beta" => ParamId::LoPowerIdler,
            other => {
                let index = other
                    .strip_prefix("zeta[")
                    .and_then(|rest| rest.strip_suffix(']'))
                    .and_then(|i| i.parse::<usize>().ok());
                match index {
                    Some(i) => ParamId::Zeta(i),
                    None => return Err(FitError::Invalid(format!("unknown parameter '{other}'"))),
                }
            }
        })
    }
}

impl Serialize for ParamId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ParamId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Transform {
    Identity,
    Log,
    Logistic { lower: f64, upper: f64 },
}

impl Transform {
    fn to_internal(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Log => x.ln(),
            Transform::Logistic { lower, upper } => {
                let p = (x - lower) / (upper - lower);
                (p / (1.0 - p)).ln()
            }
        }
    }

    fn to_external(self, u: f64) -> f64 {
        match self {
            Transform::Identity => u,
            Transform::Log => u.exp(),
            Transform::Logistic { lower, upper } => lower + (upper - lower) / (1.0 + (-u).exp()),
        }
    }
}

/// A free parameter with its bounds. `step` overrides the initial simplex
/// size (in external units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeParameter {
    pub id: ParamId,
    pub lower: f64,
    pub upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl FreeParameter {
    pub fn new(id: ParamId, lower: f64, upper: f64) -> Self {
        Self {
            id,
            lower,
            upper,
            step: None,
        }
    }

    fn transform(&self) -> Transform {
        self.id.transform(self.lower, self.upper)
    }

    fn contains(&self, value: f64) -> bool {
        value >= self.lower && value <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Cap on simplex iterations summed over restarts.
    pub max_iterations: usize,
    /// Relative residual change below which a simplex cycle counts as converged.
    pub tolerance: f64,
    /// Run the Levenberg–Marquardt polish after the simplex.
    pub refine: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            tolerance: 1e-9,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    traces: Vec<MeasuredTrace>,
    initial: ModelParams,
    zetas: Vec<f64>,
    free: Vec<FreeParameter>,
    options: FitOptions,
}

impl FitProblem {
    pub fn new(
        traces: Vec<MeasuredTrace>,
        initial: ModelParams,
        free: Vec<FreeParameter>,
    ) -> Result<Self, FitError> {
        Self::with_options(traces, initial, free, FitOptions::default())
    }

    pub fn with_options(
        traces: Vec<MeasuredTrace>,
        initial: ModelParams,
        free: Vec<FreeParameter>,
        options: FitOptions,
    ) -> Result<Self, FitError> {
        if traces.is_empty() {
            return Err(FitError::Invalid("no traces".into()));
        }
        if free.is_empty() {
            return Err(FitError::NoFreeParameters);
        }
        let zetas: Vec<f64> = traces.iter().map(|t| t.label.zeta()).collect();
        let ids: HashSet<ParamId> = free.iter().map(|p| p.id).collect();
        if ids.len() != free.len() {
            return Err(FitError::Invalid("a parameter is listed twice".into()));
        }
        let lo = [
            ParamId::LoRatio,
            ParamId::LoPowerSignal,
            ParamId::LoPowerIdler,
        ];
        if lo.iter().filter(|id| ids.contains(id)).count() > 1 {
            return Err(FitError::Gauge(
                "only the ratio of the local-oscillator powers is identifiable; free at most one of lo_ratio, alpha, beta".into(),
            ));
        }
        for p in &free {
            if let ParamId::Zeta(i) = p.id {
                if i >= traces.len() {
                    return Err(FitError::Invalid(format!(
                        "{} refers to a missing trace ({} traces)",
                        p.id,
                        traces.len()
                    )));
                }
            }
            let value = initial.get(p.id, &zetas);
            if p.lower.is_nan() || p.upper.is_nan() || p.lower >= p.upper {
                return Err(FitError::Invalid(format!(
                    "bounds [{}, {}] of {} are empty",
                    p.lower, p.upper, p.id
                )));
            }
            if !p.contains(value) {
                return Err(FitError::OutOfBounds {
                    name: p.id.to_string(),
                    value,
                    lower: p.lower,
                    upper: p.upper,
                });
            }
            match p.transform() {
                Transform::Log if value <= 0.0 => {
                    return Err(FitError::Invalid(format!(
                        "{} needs a positive initial value (log-scaled)",
                        p.id
                    )))
                }
                Transform::Logistic { lower, upper } => {
                    if !(lower.is_finite() && upper.is_finite()) {
                        return Err(FitError::Invalid(format!("{} needs finite bounds", p.id)));
                    }
                    if value <= lower || value >= upper {
                        return Err(FitError::Invalid(format!(
                            "{} must start strictly inside its bounds",
                            p.id
                        )));
                    }
                }
                _ => {}
            }
            if let Some(step) = p.step {
                if !(step.is_finite() && step > 0.0) {
                    return Err(FitError::Invalid(format!("{} step must be positive", p.id)));
                }
            }
        }
        Ok(Self {
            traces,
            initial,
            zetas,
            free,
            options,
        })
    }

    pub fn traces(&self) -> &[MeasuredTrace] {
        &self.traces
    }

    pub fn initial(&self) -> &ModelParams {
        &self.initial
    }

    pub fn free(&self) -> &[FreeParameter] {
        &self.free
    }

    pub fn options(&self) -> &FitOptions {
        &self.options
    }

    /// Initial values of the free parameters, in order.
    pub fn initial_values(&self) -> Vec<f64> {
        self.free
            .iter()
            .map(|p| self.initial.get(p.id, &self.zetas))
            .collect()
    }

    fn assemble(&self, values: &[f64]) -> (ModelParams, Vec<f64>) {
        let mut model = self.initial;
        let mut zetas = self.zetas.clone();
        for (p, v) in self.free.iter().zip(values) {
            model.set(p.id, *v, &mut zetas);
        }
        (model, zetas)
    }

    fn check_bounds(&self, values: &[f64]) -> Result<(), FitError> {
        if values.len() != self.free.len() {
            return Err(FitError::Invalid(format!(
                "expected {} parameter values, got {}",
                self.free.len(),
                values.len()
            )));
        }
        for (p, v) in self.free.iter().zip(values) {
            if !p.contains(*v) {
                return Err(FitError::OutOfBounds {
                    name: p.id.to_string(),
                    value: *v,
                    lower: p.lower,
                    upper: p.upper,
                });
            }
        }
        Ok(())
    }

    /// √w·(model − measured) for every sample of every trace.
    fn residual_vector(
        &self,
        model: &ModelParams,
        zetas: &[f64],
    ) -> Result<Vec<Vec<f64>>, FitError> {
        let cav = model.cavity().map_err(|source| FitError::Model {
            trace: 0,
            sample: 0,
            source,
        })?;
        self.traces
            .iter()
            .enumerate()
            .map(|(t, trace)| {
                let rd = model.readout(zetas[t]).map_err(|source| FitError::Model {
                    trace: t,
                    sample: 0,
                    source,
                })?;
                let sw = trace.weight.sqrt();
                trace
                    .samples
                    .iter()
                    .enumerate()
                    .map(|(i, (f, db))| {
                        epr_noise(&cav, model.squeeze_factor, &rd, std::f64::consts::TAU * f)
                            .map(|s| sw * (to_db(s) - db))
                            .map_err(|source| FitError::Model {
                                trace: t,
                                sample: i,
                                source,
                            })
                    })
                    .collect()
            })
            .collect()
    }

    fn internal_start(&self) -> Vec<f64> {
        self.free
            .iter()
            .zip(self.initial_values())
            .map(|(p, v)| p.transform().to_internal(v))
            .collect()
    }

    fn external(&self, internal: &[f64]) -> Vec<f64> {
        self.free
            .iter()
            .zip(internal)
            .map(|(p, u)| p.transform().to_external(*u))
            .collect()
    }

    fn internal_steps(&self, start: &[f64]) -> Vec<f64> {
        self.free
            .iter()
            .zip(start)
            .map(|(p, u)| match p.transform() {
                Transform::Identity => p.step.unwrap_or(if *u != 0.0 {
                    0.1 * u.abs()
                } else if matches!(p.id, ParamId::Zeta(_)) {
                    0.1
                } else {
                    0.1 * self.initial.halfwidth_rad_s
                }),
                Transform::Log => p
                    .step
                    .map(|step| (1.0 + step / u.exp()).ln())
                    .unwrap_or(0.1),
                Transform::Logistic { .. } => 0.3,
            })
            .collect()
    }

    fn objective_internal(&self, internal: &[f64]) -> f64 {
        let values = self.external(internal);
        if self.check_bounds(&values).is_err() {
            return f64::INFINITY;
        }
        let (model, zetas) = self.assemble(&values);
        match self.residual_vector(&model, &zetas) {
            Ok(r) => r.iter().flatten().map(|v| v * v).sum(),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Weighted sum of squared dB deviations for the free-parameter `values`
/// (in the order of [`FitProblem::free`]).
pub fn evaluate_residual(problem: &FitProblem, values: &[f64]) -> Result<f64, FitError> {
    problem.check_bounds(values)?;
    let (model, zetas) = problem.assemble(values);
    let r = problem.residual_vector(&model, &zetas)?;
    Ok(r.iter().flatten().map(|v| v * v).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedParameter {
    pub name: ParamId,
    pub value: f64,
    pub unit: &'static str,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceResidual {
    pub name: String,
    pub zeta_rad: f64,
    pub residual: f64,
    /// Model minus measured, dB, per sample.
    pub residuals_db: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FitDiagnostics {
    /// Free parameters that ended on (or numerically at) a bound.
    pub at_bounds: Vec<ParamId>,
    /// Free parameters the residual does not respond to at the optimum.
    pub insensitive: Vec<ParamId>,
    /// The detunings (and readout angles) were mirrored to make δ_signal ≥ 0.
    pub detuning_gauge_flipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: ModelParams,
    pub parameters: Vec<FittedParameter>,
    pub zetas_rad: Vec<f64>,
    pub residual: f64,
    pub initial_residual: f64,
    pub traces: Vec<TraceResidual>,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best residual after each accepted optimizer step.
    pub history: Vec<f64>,
    pub diagnostics: FitDiagnostics,
}

impl FitResult {
    pub fn value(&self, id: ParamId) -> f64 {
        self.model.get(id, &self.zetas_rad)
    }

    /// Free-parameter values in problem order.
    pub fn values(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.value).collect()
    }
}

/// Locally minimize [`evaluate_residual`].
pub fn fit(problem: &FitProblem) -> Result<FitResult, FitError> {
    let initial_values = problem.initial_values();
    let initial_residual = evaluate_residual(problem, &initial_values)?;
    if !initial_residual.is_finite() {
        return Err(FitError::NonFiniteInitial(initial_residual));
    }

    let opts = &problem.options;
    let mut internal = problem.internal_start();
    let mut value = initial_residual;
    let mut history = vec![initial_residual];
    let mut iterations = 0;
    let mut evaluations = 1;
    let mut converged = false;

    // restarted simplex: a cycle that no longer improves by `tolerance` ends it
    while iterations < opts.max_iterations {
        let steps = problem.internal_steps(&internal);
        let settings = simplex::SimplexSettings {
            max_iterations: opts.max_iterations - iterations,
            value_tolerance: opts.tolerance,
            size_tolerance: 1e-12,
        };
        let out = simplex::minimize(
            |u| problem.objective_internal(u),
            &internal,
            &steps,
            &settings,
        );
        iterations += out.iterations;
        evaluations += out.evaluations;
        history.extend(out.history.iter().map(|v| v.min(value)));
        let improvement = value - out.value;
        if out.value < value {
            internal = out.best;
            value = out.value;
        }
        if !out.converged {
            break;
        }
        if improvement <= opts.tolerance * value.abs() || value == 0.0 {
            converged = true;
            break;
        }
    }

    if opts.refine && value > 0.0 {
        let residuals = |u: &[f64]| -> Option<Vec<f64>> {
            let values = problem.external(u);
            problem.check_bounds(&values).ok()?;
            let (model, zetas) = problem.assemble(&values);
            problem
                .residual_vector(&model, &zetas)
                .ok()
                .map(|r| r.into_iter().flatten().collect())
        };
        if let Some(out) = refine::refine(residuals, &internal) {
            evaluations += out.iterations * (2 * internal.len() + 1);
            if out.value < value {
                internal = out.best;
                value = out.value;
            }
            history.extend(out.history);
        }
    }

    let mut values = problem.external(&internal);
    let diagnostics_insensitive = insensitive_parameters(problem, &internal, value);
    let (mut model, mut zetas) = problem.assemble(&values);

    let mut flipped = false;
    if model.detuning_signal_rad_s < 0.0 {
        let mut mirrored = model;
        mirrored.detuning_signal_rad_s = -model.detuning_signal_rad_s;
        mirrored.detuning_idler_rad_s = -model.detuning_idler_rad_s;
        let mirrored_zetas: Vec<f64> = zetas.iter().map(|z| -z).collect();
        let mirrored_values: Vec<f64> = problem
            .free
            .iter()
            .map(|p| mirrored.get(p.id, &mirrored_zetas))
            .collect();
        if problem.check_bounds(&mirrored_values).is_ok() {
            model = mirrored;
            zetas = mirrored_zetas;
            values = mirrored_values;
            flipped = true;
        }
    }

    let per_trace = problem.residual_vector(&model, &zetas)?;
    let residual: f64 = per_trace.iter().flatten().map(|v| v * v).sum();
    let traces = problem
        .traces
        .iter()
        .zip(&per_trace)
        .zip(&zetas)
        .map(|((t, r), z)| TraceResidual {
            name: t.name.clone(),
            zeta_rad: *z,
            residual: r.iter().map(|v| v * v).sum(),
            residuals_db: r.iter().map(|v| v / t.weight.sqrt()).collect(),
        })
        .collect();

    let at_bounds = problem
        .free
        .iter()
        .zip(&internal)
        .zip(&values)
        .filter(|((p, u), v)| match p.transform() {
            Transform::Logistic { .. } => u.abs() > 20.0,
            _ => {
                let width = if (p.upper - p.lower).is_finite() {
                    p.upper - p.lower
                } else {
                    v.abs().max(1.0)
                };
                (*v - p.lower).abs() <= 1e-6 * width || (p.upper - *v).abs() <= 1e-6 * width
            }
        })
        .map(|((p, _), _)| p.id)
        .collect();

    Ok(FitResult {
        model,
        parameters: problem
            .free
            .iter()
            .zip(&values)
            .map(|(p, v)| FittedParameter {
                name: p.id,
                value: *v,
                unit: p.id.unit(),
                lower: p.lower,
                upper: p.upper,
            })
            .collect(),
        zetas_rad: zetas,
        residual,
        initial_residual,
        traces,
        converged,
        iterations,
        evaluations,
        history,
        diagnostics: FitDiagnostics {
            at_bounds,
            insensitive: diagnostics_insensitive,
            detuning_gauge_flipped: flipped,
        },
    })
}

fn insensitive_parameters(problem: &FitProblem, internal: &[f64], value: f64) -> Vec<ParamId> {
    let scale = value.abs().max(1e-300);
    problem
        .free
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let probe = |delta: f64| {
                let mut u = internal.to_vec();
                u[*k] += delta * internal[*k].abs().max(1.0);
                problem.objective_internal(&u)
            };
            let (plus, minus) = (probe(1e-3), probe(-1e-3));
            let moved = [plus, minus]
                .iter()
                .filter(|f| f.is_finite())
                .any(|f| (f - value).abs() > 1e-10 * scale);
            !moved
        })
        .map(|(_, p)| p.id)
        .collect()
}

/// Residual profile of one free parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    pub parameter: ParamId,
    pub joint_value: f64,
    pub joint_residual: f64,
    /// (fixed value, residual minimized over the other free parameters)
    pub points: Vec<(f64, f64)>,
}

/// For each value in `grid`, fix `parameter` there and re-fit the rest,
/// starting from the joint optimum.
pub fn profile_parameter(
    problem: &FitProblem,
    parameter: ParamId,
    grid: &[f64],
) -> Result<Profile, FitError> {
    let slot = problem
        .free
        .iter()
        .position(|p| p.id == parameter)
        .ok_or_else(|| FitError::Invalid(format!("{parameter} is not a free parameter")))?;
    let joint = fit(problem)?;
    let points = grid
        .par_iter()
        .map(|v| {
            let mut model = joint.model;
            let mut zetas = joint.zetas_rad.clone();
            model.set(parameter, *v, &mut zetas);
            let mut rest = problem.free.clone();
            rest.remove(slot);
            let traces: Vec<MeasuredTrace> = problem
                .traces
                .iter()
                .zip(&zetas)
                .map(|(t, z)| MeasuredTrace {
                    label: TraceLabel::Explicit(*z),
                    ..t.clone()
                })
                .collect();
            if rest.is_empty() {
                let sub = FitProblem {
                    traces,
                    initial: model,
                    zetas,
                    free: vec![],
                    options: problem.options,
                };
                let r = sub.residual_vector(&sub.initial, &sub.zetas)?;
                return Ok((*v, r.iter().flatten().map(|x| x * x).sum()));
            }
            let sub = FitProblem::with_options(traces, model, rest, problem.options)?;
            Ok((*v, fit(&sub)?.residual))
        })
        .collect::<Result<Vec<_>, FitError>>()?;
    Ok(Profile {
        parameter,
        joint_value: joint.value(parameter),
        joint_residual: joint.residual,
        points,
    })
}
