//! End-to-end acceptance checks. Each test writes one PASS/FAIL line to
//! stderr (uncaptured) before asserting.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::io::Write;

use epr_noise::coupling::{
    kimble_cavity_equivalence_error, kimble_factor, optimal_squeeze_angle, phase_noise_closed_form,
    phase_quadrature_noise_closed_form, phase_quadrature_noise_propagated,
};
use epr_noise::epr::{
    min_conditional_variance, optimal_gain, reid_epr_criterion, Quadrature, TwoModeCovariance,
};
use epr_noise::fit::{
    fit, synthetic_traces, FitProblem, FreeParameter, ModelParams, ParamId, TraceLabel,
};
use epr_noise::presets::{Scenario, ScenarioTag, CAVITY_HALFWIDTH, PLATEAU_DB, SIGNAL_DETUNING};
use epr_noise::spectra::{
    coefficient_c, coefficient_d, coupling_k1, coupling_k2, epr_noise, inference_fidelity,
    interferometer_noise_ratio, min_epr_noise, spectrogram, squeeze_angle_trajectory, to_db,
    SqueezeMode,
};
use epr_noise::{
    FilterCavityParams, FrequencyGrid, InterferometerParams, ReadoutParams, SqueezerParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn report(n: u32, name: &str, pass: bool, detail: String) {
    let line = format!(
        "acceptance {n:>2} {}: {name} [{detail}]\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn criterion_01_flat_spectrum() {
    let sc = Scenario::preset(ScenarioTag::Fig3b);
    assert_eq!(sc.cavity.detuning_idler(), -SIGNAL_DETUNING);
    assert_eq!(sc.readout.lo_power_signal(), sc.readout.lo_power_idler());
    let r = sc.squeezer.squeeze_factor();
    let closed: Vec<f64> = sc
        .grid
        .omegas()
        .iter()
        .map(|w| to_db(min_epr_noise(&sc.cavity, r, &sc.readout, *w).unwrap()))
        .collect();
    let swept: Vec<f64> = spectrogram(&sc.cavity, &sc.squeezer, &sc.readout, &sc.grid, 256)
        .unwrap()
        .row_minima()
        .into_iter()
        .map(|(_, db)| db)
        .collect();
    let variation = |v: &[f64]| {
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - v.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let (vc, vs) = (variation(&closed), variation(&swept));
    report(
        1,
        "flat spectrum with opposite detunings",
        vc < 0.01 && vs < 0.01,
        format!("closed-form variation {vc:.3e} dB, swept variation {vs:.3e} dB"),
    );
}

#[test]
fn criterion_02_plateau_and_fidelity_dip() {
    let sc = Scenario::preset(ScenarioTag::Fig3a);
    let r = sc.squeezer.squeeze_factor();
    let high: Vec<f64> = sc
        .grid
        .omegas()
        .iter()
        .filter(|w| **w >= TAU * 10e6)
        .map(|w| to_db(min_epr_noise(&sc.cavity, r, &sc.readout, *w).unwrap()))
        .collect();
    let plateau_ok = !high.is_empty() && high.iter().all(|db| (db - PLATEAU_DB).abs() <= 0.1);
    let worst = high
        .iter()
        .map(|db| (db - PLATEAU_DB).abs())
        .fold(0.0, f64::max);

    let d1 = sc.cavity.detuning_signal();
    let near: Vec<f64> = (0..=40)
        .map(|k| d1 * (0.8 + 0.01 * k as f64))
        .map(|w| inference_fidelity(&sc.cavity, w).unwrap())
        .collect();
    let max_near = near.iter().copied().fold(0.0, f64::max);
    report(
        2,
        "-4 dB plateau above 10 MHz, fidelity loss near the detuning",
        plateau_ok && max_near < 1.0,
        format!(
            "{} points, max |dB - ({PLATEAU_DB})| = {worst:.2e}; max fidelity in 0.8..1.2 x delta_1 = {max_near:.4}",
            high.len()
        ),
    );
}

#[test]
fn criterion_03_angle_span() {
    let sc = Scenario::preset(ScenarioTag::Fig4);
    let trajectory = squeeze_angle_trajectory(&sc.cavity, &sc.grid).span();
    let argmin = spectrogram(&sc.cavity, &sc.squeezer, &sc.readout, &sc.grid, 256)
        .unwrap()
        .argmin_angle_span();
    let target = 0.75 * PI;
    report(
        3,
        "squeeze-angle span with equal detunings",
        rel(trajectory, target) <= 0.1 && rel(argmin, target) <= 0.1,
        format!(
            "trajectory {:.4} rad ({:.3} x 3pi/4), spectrogram argmin {:.4} rad",
            trajectory,
            trajectory / target,
            argmin
        ),
    );
}

// written out independently of the library's factored form
fn oracle_c(g: f64, d1: f64, d2: f64, w: f64) -> f64 {
    (d1 * d1 - w * w) * (d2 * d2 - w * w) + g * g * (g * g + d1 * d1 + d2 * d2 + 2.0 * w * w)
}

fn oracle_d(g: f64, d1: f64, d2: f64, w: f64) -> f64 {
    [d1, d2]
        .iter()
        .map(|d| (g * g + (d - w).powi(2)) * (g * g + (d + w).powi(2)))
        .product()
}

#[test]
fn criterion_04_coefficient_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_norm = 0.0f64;
    let mut worst_mirror = 0.0f64;
    let mut worst_oracle = 0.0f64;
    let mut worst_swap = 0.0f64;
    let mut d_positive = true;
    for _ in 0..10_000 {
        let g = log_uniform(&mut rng, 1e3, 1e7);
        let d1 = g * rng.gen_range(-5.0..5.0);
        let d2 = g * rng.gen_range(-5.0..5.0);
        let w = g * log_uniform(&mut rng, 1e-3, 1e2);

        let (c, d) = (coefficient_c(g, d1, d2, w), coefficient_d(g, d1, d2, w));
        d_positive &= d > 0.0;
        // C can cancel to zero; compare it on the scale of √D
        worst_oracle = worst_oracle
            .max((c - oracle_c(g, d1, d2, w)).abs() / d.sqrt())
            .max(rel(d, oracle_d(g, d1, d2, w)));

        let (k1, k2) = (coupling_k1(g, d1, d2, w), coupling_k2(g, d1, d2, w));
        worst_norm = worst_norm.max(rel(k1 * k1 + k2 * k2, c * c / d));

        for d2m in [d1, -d1] {
            let (cm, dm) = (coefficient_c(g, d1, d2m, w), coefficient_d(g, d1, d2m, w));
            worst_mirror = worst_mirror.max(rel(cm * cm, dm));
        }

        let r = rng.gen_range(0.0..2.0);
        let rd = ReadoutParams::new(
            rng.gen_range(0.0..PI),
            rng.gen_range(0.0..=1.0),
            rng.gen_range(0.1..10.0),
            rng.gen_range(0.1..10.0),
        )
        .unwrap();
        let a = epr_noise(&FilterCavityParams::new(g, d1, d2).unwrap(), r, &rd, w).unwrap();
        let b = epr_noise(&FilterCavityParams::new(g, d2, d1).unwrap(), r, &rd, w).unwrap();
        worst_swap = worst_swap.max(rel(a, b));
    }
    report(
        4,
        "coefficient identities over 10^4 draws",
        worst_norm <= 1e-9 && worst_mirror <= 1e-9 && d_positive && worst_swap <= 1e-12 && worst_oracle <= 1e-9,
        format!(
            "K1^2+K2^2 vs C^2/D {worst_norm:.1e}, C^2 vs D at mirrored detunings {worst_mirror:.1e}, D>0 {d_positive}, swap symmetry {worst_swap:.1e}, C/D oracle {worst_oracle:.1e}"
        ),
    );
}

#[test]
fn criterion_05_optimal_angle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_value = 0.0f64;
    let mut sweep_ok = true;
    for _ in 0..2_000 {
        let gamma = TAU * log_uniform(&mut rng, 10.0, 1e4);
        let ifo = InterferometerParams::new(
            log_uniform(&mut rng, 1e3, 1e6),
            log_uniform(&mut rng, 1.0, 100.0),
            1064e-9,
            log_uniform(&mut rng, 10.0, 4000.0),
            gamma,
        )
        .unwrap();
        let omega = gamma * log_uniform(&mut rng, 1e-2, 1e2);
        let r = rng.gen_range(0.0..2.0);
        let k = kimble_factor(&ifo, omega).unwrap();
        let phi = optimal_squeeze_angle(k);
        let at_opt = phase_quadrature_noise_closed_form(
            &ifo,
            &SqueezerParams::from_phase_referenced_angle(r, phi).unwrap(),
            omega,
        )
        .unwrap();
        let expected = (-2.0 * r).exp() * (1.0 + k * k);
        worst_value = worst_value.max(rel(at_opt, expected));
        for j in 0..64 {
            let sweep = phase_noise_closed_form(k, r, PI * j as f64 / 64.0);
            sweep_ok &= sweep >= at_opt * (1.0 - 1e-12);
        }
    }
    report(
        5,
        "noise at arctan K equals e^{-2r}(1+K^2) and is the sweep minimum",
        worst_value <= 1e-10 && sweep_ok,
        format!("max relative error {worst_value:.2e}, 64-point sweep never lower: {sweep_ok}"),
    );
}

#[test]
fn criterion_06_cavity_ponderomotive_equivalence() {
    let ifo = InterferometerParams::advanced_ligo_like();
    let gamma = ifo.detector_halfwidth();
    let grid = FrequencyGrid::logarithmic_hz(gamma / TAU * 1e-4, gamma / TAU / 30.0, 64).unwrap();
    let errors: Vec<f64> = grid
        .omegas()
        .iter()
        .map(|w| kimble_cavity_equivalence_error(&ifo, gamma, *w).unwrap())
        .collect();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let monotone = errors.windows(2).all(|p| p[0] <= p[1]);
    report(
        6,
        "cavity coupling matches ponderomotive coupling below gamma/30",
        worst < 1e-3 && monotone,
        format!(
            "max relative error {worst:.4e} at Omega = gamma/30, monotone in Omega: {monotone}"
        ),
    );
}

#[test]
fn criterion_07_epr_conditioning() {
    let mut worst_closed = 0.0f64;
    for k in 0..=40 {
        let r = 0.05 * k as f64;
        let state = TwoModeCovariance::two_mode_squeezed(r).unwrap();
        for q in [Quadrature::Amplitude, Quadrature::Phase] {
            let v = min_conditional_variance(&state, q).unwrap();
            worst_closed = worst_closed.max(rel(v, 1.0 / (2.0 * r).cosh()));
        }
    }

    // sampling oracle: draw (x_s, x_i) from the bivariate normal with
    // marginals cosh 2r and correlation ±sinh 2r, via its Cholesky factor
    let r: f64 = 1.0;
    let (ch, sh) = ((2.0 * r).cosh(), (2.0 * r).sinh());
    let state = TwoModeCovariance::two_mode_squeezed(r).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 1_000_000;
    let mut sampling_ok = true;
    let mut details = Vec::new();
    for (q, sign) in [(Quadrature::Amplitude, 1.0), (Quadrature::Phase, -1.0)] {
        let g = optimal_gain(&state, q).unwrap();
        let (l11, l21) = (ch.sqrt(), sign * sh / ch.sqrt());
        let l22 = (ch - l21 * l21).sqrt();
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let (xs, xi) = (l11 * z1, l21 * z1 + l22 * z2);
            let y = xs + g * xi;
            sum += y;
            sum_sq += y * y;
        }
        let mean = sum / n as f64;
        let var = (sum_sq - n as f64 * mean * mean) / (n as f64 - 1.0);
        let exact = min_conditional_variance(&state, q).unwrap();
        let se = exact * (2.0 / (n as f64 - 1.0)).sqrt();
        let z = (var - exact) / se;
        sampling_ok &= z.abs() <= 3.0;
        details.push(format!("{q:?} sampled {var:.5} vs {exact:.5} ({z:+.2} se)"));
    }

    let vacuum = reid_epr_criterion(&TwoModeCovariance::two_mode_squeezed(0.0).unwrap()).unwrap();
    let reid_ok = vacuum.product == 1.0
        && !vacuum.entangled
        && (1..=60).all(|k| {
            let c =
                reid_epr_criterion(&TwoModeCovariance::two_mode_squeezed(0.05 * k as f64).unwrap())
                    .unwrap();
            c.product < 1.0 && c.entangled
        });
    report(
        7,
        "conditional variance 1/cosh 2r and Reid product",
        worst_closed <= 1e-10 && sampling_ok && reid_ok,
        format!(
            "closed form {worst_closed:.1e}; {}; Reid product 1 at r=0 and <1 for r>0: {reid_ok}",
            details.join(", ")
        ),
    );
}

#[test]
fn criterion_08_frequency_dependent_squeezing_map() {
    let fi = Scenario::preset(ScenarioTag::Fig1Fi);
    let ifo = fi.interferometer;
    let sq = fi.squeezer;
    let r = sq.squeeze_factor();
    let mut dominated = true;
    let mut strict_points = 0;
    let mut strict_ok = true;
    let mut worst_ideal = 0.0f64;
    for w in fi.grid.omegas() {
        let lossy = |mode| interferometer_noise_ratio(&ifo, &sq, 0.6, *w, FRAC_PI_2, mode).unwrap();
        let (fixed, dependent) = (
            lossy(SqueezeMode::FixedAngle),
            lossy(SqueezeMode::FrequencyDependent),
        );
        dominated &= dependent <= fixed * (1.0 + 1e-12);
        if kimble_factor(&ifo, *w).unwrap() > 1.0 {
            strict_points += 1;
            strict_ok &= dependent < fixed;
        }
        let ideal = interferometer_noise_ratio(
            &ifo,
            &sq,
            1.0,
            *w,
            FRAC_PI_2,
            SqueezeMode::FrequencyDependent,
        )
        .unwrap();
        worst_ideal = worst_ideal.max(rel(ideal, (-2.0 * r).exp()));
    }
    report(
        8,
        "frequency-dependent squeezing never worse, e^{-2r} when lossless",
        dominated && strict_points > 0 && strict_ok && worst_ideal <= 1e-10,
        format!(
            "eta=0.6 dominated at all {} points: {dominated}; strict where K>1 ({strict_points} points): {strict_ok}; eta=1 ratio error {worst_ideal:.1e}",
            fi.grid.len()
        ),
    );
}

#[test]
fn criterion_09_fit_recovery() {
    let truth = ModelParams {
        squeeze_factor: 0.8,
        efficiency: 0.7,
        halfwidth_rad_s: CAVITY_HALFWIDTH,
        detuning_signal_rad_s: SIGNAL_DETUNING,
        detuning_idler_rad_s: -0.5 * SIGNAL_DETUNING,
        lo_power_signal: 1.0,
        lo_power_idler: 1.0,
    };
    let freqs: Vec<f64> = FrequencyGrid::logarithmic_hz(1e4, 3e7, 200)
        .unwrap()
        .omegas()
        .iter()
        .map(|w| w / TAU)
        .collect();
    let labels = [
        TraceLabel::Amplitude,
        TraceLabel::Explicit(FRAC_PI_4),
        TraceLabel::Phase,
    ];
    let traces = synthetic_traces(&truth, &labels, &freqs, 0.1, 2024).unwrap();
    let ids = [
        ParamId::SqueezeFactor,
        ParamId::Efficiency,
        ParamId::Halfwidth,
        ParamId::DetuningSignal,
        ParamId::DetuningIdler,
    ];
    let free: Vec<FreeParameter> = vec![
        FreeParameter::new(ParamId::SqueezeFactor, 1e-3, 3.0),
        FreeParameter::new(ParamId::Efficiency, 0.0, 1.0),
        FreeParameter::new(ParamId::Halfwidth, TAU * 1e3, TAU * 5e6),
        FreeParameter::new(ParamId::DetuningSignal, -TAU * 5e6, TAU * 5e6),
        FreeParameter::new(ParamId::DetuningIdler, -TAU * 5e6, TAU * 5e6),
    ];

    let patterns: [[f64; 5]; 4] = [
        [1.3; 5],
        [0.7; 5],
        [1.3, 0.7, 1.3, 0.7, 1.3],
        [0.7, 1.3, 0.7, 1.3, 0.7],
    ];
    let mut all_ok = true;
    let mut worst = 0.0f64;
    let mut deterministic = true;
    for f in patterns {
        let start = ModelParams {
            squeeze_factor: truth.squeeze_factor * f[0],
            efficiency: truth.efficiency * f[1],
            halfwidth_rad_s: truth.halfwidth_rad_s * f[2],
            detuning_signal_rad_s: truth.detuning_signal_rad_s * f[3],
            detuning_idler_rad_s: truth.detuning_idler_rad_s * f[4],
            ..truth
        };
        let problem = FitProblem::new(traces.clone(), start, free.clone()).unwrap();
        let result = fit(&problem).unwrap();
        for id in ids {
            let e = rel(result.value(id), truth.get(id, &[]));
            worst = worst.max(e);
            all_ok &= e <= 0.05;
        }
        let again = fit(&problem).unwrap();
        deterministic &= again == result;
    }
    let reseeded = synthetic_traces(&truth, &labels, &freqs, 0.1, 2024).unwrap();
    deterministic &= reseeded == traces;
    report(
        9,
        "joint three-angle fit recovers r, eta, gamma, delta_1, delta_2",
        all_ok && deterministic,
        format!("worst relative error over 4 starts at +/-30%: {worst:.2e}; bit-identical reruns: {deterministic}"),
    );
}

#[test]
fn criterion_10_path_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for _ in 0..1_000 {
        let gamma = TAU * log_uniform(&mut rng, 10.0, 1e4);
        let ifo = InterferometerParams::new(
            log_uniform(&mut rng, 1e3, 1e6),
            log_uniform(&mut rng, 1.0, 100.0),
            1064e-9,
            log_uniform(&mut rng, 10.0, 4000.0),
            gamma,
        )
        .unwrap();
        let omega = gamma * log_uniform(&mut rng, 1e-2, 1e2);
        let sq = SqueezerParams::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..PI)).unwrap();
        let direct = phase_quadrature_noise_closed_form(&ifo, &sq, omega).unwrap();
        let propagated = phase_quadrature_noise_propagated(&ifo, &sq, omega).unwrap();
        worst = worst.max(rel(direct, propagated));
    }
    report(
        10,
        "closed form and covariance propagation agree",
        worst <= 1e-12,
        format!("max relative difference over 10^3 draws {worst:.2e}"),
    );
}
