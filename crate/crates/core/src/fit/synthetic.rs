//! Model-generated traces with optional Gaussian dB noise, for testing and
//! round-trip checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{FitError, MeasuredTrace, ModelParams, TraceLabel};

/// One trace at `label`'s angle, with N(0, `noise_db`²) added to every sample.
pub fn synthetic_trace<R: Rng + ?Sized>(
    model: &ModelParams,
    name: impl Into<String>,
    label: TraceLabel,
    freqs_hz: &[f64],
    noise_db: f64,
    rng: &mut R,
) -> Result<MeasuredTrace, FitError> {
    let noise = Normal::new(0.0, noise_db)
        .map_err(|e| FitError::Invalid(format!("noise level {noise_db}: {e}")))?;
    let samples = freqs_hz
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let clean = model
                .noise_db(label.zeta(), *f)
                .map_err(|source| FitError::Model {
                    trace: 0,
                    sample: i,
                    source,
                })?;
            Ok((*f, clean + noise.sample(rng)))
        })
        .collect::<Result<Vec<_>, FitError>>()?;
    MeasuredTrace::new(name, label, samples, 1.0)
}

/// One trace per label, seeded deterministically.
pub fn synthetic_traces(
    model: &ModelParams,
    labels: &[TraceLabel],
    freqs_hz: &[f64],
    noise_db: f64,
    seed: u64,
) -> Result<Vec<MeasuredTrace>, FitError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            synthetic_trace(
                model,
                format!("trace{i}"),
                *label,
                freqs_hz,
                noise_db,
                &mut rng,
            )
        })
        .collect()
}
