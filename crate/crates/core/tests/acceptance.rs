//! Acceptance criteria 1–9. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::f64::consts::PI;
use std::time::Instant;

use tlsecho::constants::{angular_from_hz, debye_to_si, EPSILON0, HBAR, K_B, TWO_PI};
use tlsecho::echo::{alpha_kernel, beta_kernel, presets, t2_of_model, ModelVariant, SpectralDiffusionParams};
use tlsecho::fit::{
    bootstrap_fit, fit_stretched_exponential, pack, BootstrapOptions, DecayKind, DecayPoint, GlobalFitOptions,
    TemperatureSeries,
};
use tlsecho::io::{gaussian_noise, generate_decay_dataset, generate_trace_set, SynthDecaySpec, SynthTraceSpec};
use tlsecho::loss::{
    cell_attenuation, efficiency_band, noise_cascade, per_cell_gain, quantum_efficiency,
    tan_delta_from_spectral_diffusion, AmplifierChainSpec, CAPACITANCE_BAND,
};
use tlsecho::montecarlo::{ensemble_echo, flip_history_average, BathEnsemble, TelegraphConfig, DEFAULT_R_MIN};
use tlsecho::trace::{build_filter, estimate_integration_noise, integrate_echo, EchoFilter};
use tlsecho::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn loss_tangent() -> Result<Outcome> {
    let d2 = tan_delta_from_spectral_diffusion(angular_from_hz(743e3), angular_from_hz(1.9e9), 1.0)?;
    let d3 = tan_delta_from_spectral_diffusion(angular_from_hz(831e3), angular_from_hz(2.0e9), 1.0)?;
    outcome(
        (d2 - 0.012).abs() <= 0.001 && (d3 - 0.014).abs() <= 0.001,
        format!("D2 {d2:.4} (0.012 ± 0.001), D3 {d3:.4} (0.014 ± 0.001)"),
    )
}

fn t2_reproduction() -> Result<Outcome> {
    let d3 = presets::d3_base();
    let hot = t2_of_model(&d3, ModelVariant::BaseIntrinsic, 0.09)?;
    let cold = t2_of_model(&d3, ModelVariant::BaseIntrinsic, 0.008)?;
    let limit = 1.0 / d3.gamma2.unwrap_or(f64::NAN);
    outcome(
        (0.49e-6..=0.73e-6).contains(&hot) && (cold / limit - 1.0).abs() <= 0.01,
        format!(
            "2τ(90 mK) = {:.3} µs in [0.49, 0.73]; 2τ(8 mK) = {:.3} µs vs 1/Γ₂ = {:.3} µs",
            hot * 1e6,
            cold * 1e6,
            limit * 1e6
        ),
    )
}

fn kernel_oracle() -> Result<Outcome> {
    const N: u64 = 1_000_000;
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for (k, w) in [0.01, 0.1, 1.0, 10.0, 100.0].into_iter().enumerate() {
        let hahn = flip_history_average(&TelegraphConfig::hahn(w, 1.0, N, 100 + k as u64))?;
        worst = worst.max((hahn.mean - alpha_kernel(1.0, w)?).abs() / hahn.std_error);
        points += 1;
        for (j, ratio) in [0.0, 1.0, 10.0].into_iter().enumerate() {
            let est = flip_history_average(&TelegraphConfig::stimulated(w, 1.0, ratio, N, 200 + 10 * k as u64 + j as u64))?;
            worst = worst.max((est.mean - beta_kernel(1.0, ratio, w)?).abs() / est.std_error);
            points += 1;
        }
    }
    outcome(
        worst < 3.0,
        format!("{points} points at 1e6 histories, largest deviation {worst:.2} standard errors"),
    )
}

fn asymptotic_slopes() -> Result<Outcome> {
    let slope = |wtau: f64| -> Result<f64> {
        let h: f64 = 1e-3;
        let (lo, hi) = (alpha_kernel(wtau * (-h).exp(), 1.0)?, alpha_kernel(wtau * h.exp(), 1.0)?);
        Ok((hi.ln() - lo.ln()) / (2.0 * h))
    };
    let (slow, fast) = (slope(1e-3)?, slope(1e3)?);
    outcome(
        (slow - 2.0).abs() <= 0.05 && (fast - 0.5).abs() <= 0.05,
        format!("slope {slow:.4} at Wτ = 1e-3 (2.00 ± 0.05), {fast:.4} at Wτ = 1e3 (0.50 ± 0.05)"),
    )
}

/// Noise of the integrated echo and the low-temperature echo amplitude, both
/// in mV-equivalent units of Ī.
const SIGMA_IBAR: f64 = 0.28e-3;
const A0_HAHN: f64 = 3e-3;

fn global_fit_round_trip() -> Result<Outcome> {
    let truth = presets::d2_base();
    let temperatures: Vec<f64> = (0..24).map(|k| 0.008 + 0.102 * k as f64 / 23.0).collect();
    let drive = HBAR * TWO_PI * 7e9 / (2.0 * K_B);
    let spec = SynthDecaySpec {
        kind: DecayKind::Hahn,
        device_label: "D2".into(),
        params: truth,
        variant: ModelVariant::BaseIntrinsic,
        amplitudes: temperatures.iter().map(|t| A0_HAHN * (drive / t).tanh()).collect(),
        temperatures,
        delays: (1..=52).map(|k| k as f64 * 0.2e-6).collect(),
        tau: None,
        noise_std: SIGMA_IBAR,
        seed: 5,
    };
    let data = generate_decay_dataset(&spec)?;
    let g2 = truth.gamma2.unwrap_or(f64::NAN);
    let init = SpectralDiffusionParams::base(truth.gamma_sd0 * 2.0, truth.omega_b * 0.7, truth.gamma1_b * 0.5, g2 * 1.5);
    let boot = bootstrap_fit(
        &data,
        ModelVariant::BaseIntrinsic,
        &init,
        &GlobalFitOptions::default(),
        &BootstrapOptions {
            n_resamples: 400,
            subset_size: 18,
            seed: 5,
        },
    )?;
    let want = pack(&truth, ModelVariant::BaseIntrinsic)?;
    let reference_std = presets::d2_base_std();
    let mut pass = boot.n_failed < boot.n_resamples;
    let mut parts = Vec::new();
    for k in 0..4 {
        let z = (boot.mean[k] - want[k]) / boot.std[k];
        let ratio = boot.std[k] / reference_std[k];
        pass &= z.abs() <= 2.0 && (1.0 / 3.0..=3.0).contains(&ratio);
        parts.push(format!("{} z {z:+.2} std/reference {ratio:.2}", boot.parameter_names[k]));
    }
    outcome(
        pass,
        format!("400 resamples of 18/24, {} failed; {}", boot.n_failed, parts.join("; ")),
    )
}

fn cascade_consistency() -> Result<Outcome> {
    let chain = AmplifierChainSpec::default();
    let g = per_cell_gain(&chain)?;
    let a = cell_attenuation(&chain, 0.0128)?;
    let c = noise_cascade(&chain, a, g, 0.5)?;
    let agree = ((c.closed_form - c.iterated) / c.closed_form).abs();
    let long = AmplifierChainSpec {
        n_cells: 20_000,
        ..chain
    };
    let cl = noise_cascade(&long, a, g, 0.5)?;
    let eta = quantum_efficiency(a, g)?;
    let asym = (cl.net_gain / cl.closed_form - eta).abs();
    let band = efficiency_band(&chain, 0.0128, CAPACITANCE_BAND)?;
    let fmt = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.3}"));
    outcome(
        agree <= 1e-12 && asym <= 1e-3 && (eta - 0.59).abs() <= 0.08,
        format!(
            "closed vs iterated {agree:.1e}; |T/N_out − η| {asym:.1e} at T = {:.2e}; η = {eta:.3} (0.59 ± 0.08) \
             assuming c = 39 fF, Z₀ = 50 Ω, ω = 2π·7 GHz; η over c ∈ [20, 60] fF: [{}, {}]",
            cl.net_gain,
            fmt(band.eta_at_max),
            fmt(band.eta_at_min)
        ),
    )
}

fn ensemble_micro_model() -> Result<Outcome> {
    let (tau, w) = (1e-6, 1e6);
    let d = debye_to_si(3.0);
    let alpha = alpha_kernel(tau, w)?;
    let probe = BathEnsemble::new(1.0, d, d, 2.5 * EPSILON0, 1, DEFAULT_R_MIN, 0)?;
    let c_b = 1.0 / (probe.mean_field_gamma_sd() * alpha);
    let bath = BathEnsemble::new(c_b, d, d, 2.5 * EPSILON0, 1000, DEFAULT_R_MIN, 7)?;
    let est = ensemble_echo(&bath, w, tau, 10_000)?;
    let measured = -est.mean.ln();
    let predicted = bath.mean_field_gamma_sd() * alpha;
    let rel = (measured - predicted) / predicted;
    outcome(
        rel.abs() <= 0.15,
        format!("n_B = 1000, 1e4 realizations: exponent {measured:.4} vs Γ_sd·α {predicted:.4} ({:+.1}%)", 100.0 * rel),
    )
}

fn pipeline_closure() -> Result<Outcome> {
    let (amp, width) = (1e-3, 50e-9);
    let spec = SynthTraceSpec {
        dt: 3.2e-9,
        duration: 3.2e-6,
        amplitude: amp,
        center: 1.6e-6,
        width,
        phase: 0.6,
        noise_std_per_sample: amp / 100.0,
        n_traces: 20,
        seed: 11,
    };
    let traces = generate_trace_set(&spec)?;
    let filter = build_filter(&traces)?;
    let want = amp * (2.0 * PI).sqrt() * width;
    let (mut worst_amp, mut worst_q, mut worst_rot): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for tr in &traces {
        let r = integrate_echo(tr, &filter)?;
        worst_amp = worst_amp.max((r.i_bar / want - 1.0).abs());
        worst_q = worst_q.max((r.q_bar / r.i_bar).abs());
        for angle in [0.4, -1.9] {
            let rf = EchoFilter::new(filter.mu_bar, filter.sigma_bar, filter.phi0 + angle)?;
            let rr = integrate_echo(&tr.rotated(angle), &rf)?;
            worst_rot = worst_rot.max((rr.i_bar / r.i_bar - 1.0).abs());
        }
    }
    let sigma_n = 1e-3;
    let noise = generate_trace_set(&SynthTraceSpec {
        amplitude: 0.0,
        noise_std_per_sample: sigma_n,
        n_traces: 1000,
        seed: 12,
        ..spec
    })?;
    let est = estimate_integration_noise(&noise, &filter)?;
    let predicted = filter.white_noise_sigma(&noise[0], sigma_n)?;
    let noise_ratio = est.sigma / predicted;
    outcome(
        worst_amp <= 0.01 && worst_rot <= 1e-9 && (noise_ratio - 1.0).abs() <= 0.05 && worst_q < 1e-3,
        format!(
            "SNR 100: worst |Ī/(A√(2π)σ) − 1| {worst_amp:.2e}; rotation {worst_rot:.1e}; \
             noise estimate/analytic {noise_ratio:.4} over 1000 traces; worst |Q̄/Ī| {worst_q:.1e}"
        ),
    )
}

/// Stimulated-echo amplitude in mV-equivalent units of Ī.
const A0_STIMULATED: f64 = 40e-3;

fn stretched_recovery() -> Result<Outcome> {
    let delays: Vec<f64> = (0..61).map(|k| k as f64 * 0.5e-6).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, p) in [0.606, 0.547].into_iter().enumerate() {
        let noise = gaussian_noise(9, k as u64, delays.len(), SIGMA_IBAR);
        let series = TemperatureSeries {
            temperature: 0.008,
            tau: Some(0.55e-6),
            points: delays
                .iter()
                .zip(noise)
                .map(|(&d, e)| DecayPoint {
                    delay: d,
                    amplitude: A0_STIMULATED * (-(d / 5e-6).powf(p)).exp() + e,
                    err: Some(SIGMA_IBAR),
                })
                .collect(),
        };
        let fit = fit_stretched_exponential(&series)?;
        pass &= (fit.p - p).abs() <= 0.02;
        parts.push(format!("p = {p}: fitted {:.4}", fit.p));
    }
    outcome(pass, parts.join("; "))
}

type Criterion = (&'static str, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 9] = [
        ("loss-tangent reproduction", loss_tangent),
        ("T2 reproduction", t2_reproduction),
        ("kernel-oracle equivalence", kernel_oracle),
        ("asymptotic regimes", asymptotic_slopes),
        ("global-fit round trip", global_fit_round_trip),
        ("cascade consistency", cascade_consistency),
        ("ensemble micro-model", ensemble_micro_model),
        ("pipeline closure", pipeline_closure),
        ("stretched-exponential recovery", stretched_recovery),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} of {} acceptance criteria failed", criteria.len());
        std::process::exit(1);
    }
}
