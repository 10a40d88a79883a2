use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};
use tlsecho::constants::{angular_from_hz, debye_to_si, EPSILON0, HBAR, K_B, TWO_PI};
use tlsecho::echo::{
    alpha_kernel, beta_kernel, presets, EchoModel, ModelVariant, SpectralDiffusionParams, StimulatedDiffusionRate,
};
use tlsecho::fit::{
    bootstrap_fit, fit_global, fit_simple_exponential, fit_stretched_exponential, parameter_names, BootstrapOptions,
    DecayKind, GlobalFitOptions,
};
use tlsecho::io::{self, ParamsFile, SynthDecaySpec, SynthTraceSpec};
use tlsecho::loss::{self, AmplifierChainSpec, DielectricSpec};
use tlsecho::montecarlo::{self, BathEnsemble, RabiConfig, TelegraphConfig};
use tlsecho::trace::{self, EchoFilter, IQTrace};

use crate::args::*;
use crate::output::{emit_curve, Output};

fn check(flag: &str, value: f64, ok: bool, what: &str) -> Result<()> {
    if !(value.is_finite() && ok) {
        bail!("{flag} must be {what}, got {value}");
    }
    Ok(())
}

fn positive(flag: &str, v: f64) -> Result<()> {
    check(flag, v, v > 0.0, "> 0")
}

fn non_negative(flag: &str, v: f64) -> Result<()> {
    check(flag, v, v >= 0.0, ">= 0")
}

fn load_params(args: &ParamsArgs) -> Result<(SpectralDiffusionParams, ModelVariant)> {
    let file = io::read_params(&args.params)?;
    let variant = args.variant.unwrap_or(file.variant);
    file.params
        .validate(variant)
        .with_context(|| format!("--params {} does not define the {} variant", args.params.display(), variant.label()))?;
    Ok((file.params, variant))
}

fn params_json(params: &SpectralDiffusionParams, variant: ModelVariant) -> Value {
    let text = io::params_to_json(&ParamsFile {
        device_label: None,
        variant,
        params: *params,
    });
    serde_json::from_str(&text).expect("parameter JSON is valid")
}

/// Evenly spaced points on (0, max], or [0, max] when `from_zero`.
fn grid(max: f64, n: usize, from_zero: bool) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|k| {
            if from_zero {
                max * k as f64 / (n - 1) as f64
            } else {
                max * (k + 1) as f64 / n as f64
            }
        })
        .collect()
}

fn curve<F>(args: &CurveArgs, default_max: f64, from_zero: bool, x_name: &str, y_name: &str, mut f: F) -> Result<()>
where
    F: FnMut(f64) -> tlsecho::Result<f64>,
{
    let Some(path) = &args.emit_curve else { return Ok(()) };
    let max = args.curve_max.unwrap_or(default_max);
    positive("--curve-max", max)?;
    let pts = grid(max, args.curve_points, from_zero)
        .into_iter()
        .map(|x| Ok((x, f(x)?)))
        .collect::<Result<Vec<_>>>()?;
    emit_curve(path, x_name, y_name, &pts)
}

fn us(seconds: f64) -> String {
    format!("{:.4} µs", seconds * 1e6)
}

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    let out = match &cli.command {
        Command::Model(c) => model(c)?,
        Command::Simulate(c) => simulate(c, g.seed)?,
        Command::Analyze(c) => analyze(c)?,
        Command::Fit(c) => fit(c, g.seed)?,
        Command::Losses(c) => losses(c)?,
        Command::Synth(c) => synth(c, g)?,
    };
    out.finish(g.out.as_deref(), g.format)
}

fn model(cmd: &ModelCmd) -> Result<Output> {
    Ok(match cmd {
        ModelCmd::Hahn {
            params,
            temp_k,
            tau,
            a0,
            curve: c,
        } => {
            positive("--temp-k", *temp_k)?;
            non_negative("--tau", *tau)?;
            let (p, v) = load_params(params)?;
            let m = EchoModel::new(p, v)?;
            let a = m.hahn_amplitude(*a0, *tau, *temp_k)?;
            curve(c, 4.0 * m.t2(*temp_k)?, true, "two_tau_s", "amplitude_Vs", |x| {
                m.hahn_amplitude(*a0, 0.5 * x, *temp_k)
            })?;
            Output::new("model_hahn", json!({"temperature_k": temp_k, "tau_s": tau, "a0_Vs": a0, "amplitude_Vs": a}))
                .line(format!("A(τ = {}, T = {temp_k} K) = {a:.6e} V·s", us(*tau)))
        }
        ModelCmd::Stimulated {
            params,
            temp_k,
            tau,
            tau_prime,
            a0,
            high_temperature_rate,
            curve: c,
        } => {
            positive("--temp-k", *temp_k)?;
            non_negative("--tau", *tau)?;
            non_negative("--tau-prime", *tau_prime)?;
            let (p, v) = load_params(params)?;
            let rate = if *high_temperature_rate {
                StimulatedDiffusionRate::HighTemperatureLimit
            } else {
                StimulatedDiffusionRate::AtTemperature
            };
            let m = EchoModel::new(p, v)?.with_stimulated_rate(rate);
            let a = m.stimulated_amplitude(*a0, *tau, *tau_prime, *temp_k)?;
            curve(c, 30e-6, true, "tau_prime_s", "amplitude_Vs", |x| {
                m.stimulated_amplitude(*a0, *tau, x, *temp_k)
            })?;
            Output::new(
                "model_stimulated",
                json!({"temperature_k": temp_k, "tau_s": tau, "tau_prime_s": tau_prime, "a0_Vs": a0, "amplitude_Vs": a}),
            )
            .line(format!("A(τ = {}, τ′ = {}, T = {temp_k} K) = {a:.6e} V·s", us(*tau), us(*tau_prime)))
        }
        ModelCmd::T2 { params, temp_k } => {
            positive("--temp-k", *temp_k)?;
            let (p, v) = load_params(params)?;
            let t2 = EchoModel::new(p, v)?.t2(*temp_k)?;
            Output::new("model_t2", json!({"temperature_k": temp_k, "two_tau_s": t2}))
                .line(format!("T2 at {temp_k} K: 2τ = {}", us(t2)))
        }
        ModelCmd::T1 { params, temp_k, tau } => {
            positive("--temp-k", *temp_k)?;
            non_negative("--tau", *tau)?;
            let (p, v) = load_params(params)?;
            let t1 = EchoModel::new(p, v)?.t1(*tau, *temp_k)?;
            Output::new("model_t1", json!({"temperature_k": temp_k, "tau_s": tau, "tau_prime_s": t1}))
                .line(format!("T1 at {temp_k} K, τ = {}: τ′ = {}", us(*tau), us(t1)))
        }
        ModelCmd::Alpha { tau, w, curve: c } => {
            non_negative("--tau", *tau)?;
            non_negative("--w", *w)?;
            let a = alpha_kernel(*tau, *w)?;
            curve(c, 10.0 * tau.max(1e-9), true, "tau_s", "alpha_s", |x| alpha_kernel(x, *w))?;
            Output::new("model_alpha", json!({"tau_s": tau, "w_per_s": w, "alpha_s": a}))
                .line(format!("α(τ = {tau:e} s, W = {w:e} 1/s) = {a:.10e} s"))
        }
        ModelCmd::Beta { tau, tau_prime, w, curve: c } => {
            non_negative("--tau", *tau)?;
            non_negative("--tau-prime", *tau_prime)?;
            non_negative("--w", *w)?;
            let b = beta_kernel(*tau, *tau_prime, *w)?;
            curve(c, 10.0 * tau_prime.max(*tau).max(1e-9), true, "tau_prime_s", "beta_s", |x| {
                beta_kernel(*tau, x, *w)
            })?;
            Output::new("model_beta", json!({"tau_s": tau, "tau_prime_s": tau_prime, "w_per_s": w, "beta_s": b}))
                .line(format!("β(τ = {tau:e} s, τ′ = {tau_prime:e} s, W = {w:e} 1/s) = {b:.10e} s"))
        }
    })
}

fn simulate(cmd: &SimulateCmd, seed: u64) -> Result<Output> {
    Ok(match cmd {
        SimulateCmd::Telegraph {
            w,
            tau,
            tau_prime,
            histories,
        } => {
            non_negative("--w", *w)?;
            non_negative("--tau", *tau)?;
            if *histories == 0 {
                bail!("--histories must be >= 1");
            }
            let (cfg, kernel) = match tau_prime {
                Some(tp) => {
                    non_negative("--tau-prime", *tp)?;
                    (TelegraphConfig::stimulated(*w, *tau, *tp, *histories, seed), beta_kernel(*tau, *tp, *w)?)
                }
                None => (TelegraphConfig::hahn(*w, *tau, *histories, seed), alpha_kernel(*tau, *w)?),
            };
            let est = montecarlo::flip_history_average(&cfg)?;
            let z = if est.std_error > 0.0 {
                (est.mean - kernel) / est.std_error
            } else {
                0.0
            };
            Output::new(
                "simulate_telegraph",
                json!({"w_per_s": w, "tau_s": tau, "tau_prime_s": tau_prime, "histories": histories, "seed": seed,
                       "mean_s": est.mean, "std_error_s": est.std_error, "kernel_s": kernel, "z": z}),
            )
            .line(format!(
                "Monte Carlo {:.6} ± {:.6} s vs kernel {kernel:.6} s ({z:+.2} standard errors)",
                est.mean, est.std_error
            ))
        }
        SimulateCmd::Ensemble {
            c_b,
            d_a_debye,
            d_b_debye,
            epsilon_r,
            n_b,
            r_min,
            w,
            tau,
            realizations,
        } => {
            non_negative("--c-b", *c_b)?;
            positive("--d-a-debye", *d_a_debye)?;
            positive("--d-b-debye", *d_b_debye)?;
            positive("--epsilon-r", *epsilon_r)?;
            positive("--r-min", *r_min)?;
            non_negative("--w", *w)?;
            non_negative("--tau", *tau)?;
            let bath = BathEnsemble::new(
                *c_b,
                debye_to_si(*d_a_debye),
                debye_to_si(*d_b_debye),
                epsilon_r * EPSILON0,
                *n_b,
                *r_min,
                seed,
            )?;
            let est = montecarlo::ensemble_echo(&bath, *w, *tau, *realizations)?;
            let gsd = bath.mean_field_gamma_sd();
            let predicted = (-gsd * alpha_kernel(*tau, *w)?).exp();
            Output::new(
                "simulate_ensemble",
                json!({"c_b_per_m3": c_b, "n_b": n_b, "r_min_m": r_min, "r_max_m": bath.r_max, "w_per_s": w,
                       "tau_s": tau, "realizations": realizations, "seed": seed, "echo": est.mean,
                       "std_error": est.std_error, "mean_field_gamma_sd_per_s": gsd, "mean_field_echo": predicted}),
            )
            .assume("epsilon_r", *epsilon_r, "1")
            .line(format!(
                "echo {:.6} ± {:.6}; mean-field exp(−Γ_sd·α) = {predicted:.6}",
                est.mean, est.std_error
            ))
        }
        SimulateCmd::Rabi {
            gamma_r,
            p1,
            p2,
            theta,
            omega_d_over_2pi_hz,
            spread,
            samples,
            curve: c,
        } => {
            non_negative("--gamma-r", *gamma_r)?;
            non_negative("--p1", *p1)?;
            non_negative("--p2", *p2)?;
            positive("--theta", *theta)?;
            positive("--omega-d-over-2pi-hz", *omega_d_over_2pi_hz)?;
            non_negative("--spread", *spread)?;
            let cfg = RabiConfig {
                gamma_r: *gamma_r,
                pulse1_power: *p1,
                pulse2_power: *p2,
                theta: *theta,
                omega_d: angular_from_hz(*omega_d_over_2pi_hz),
                coupling_spread: *spread,
                n_samples: *samples,
                seed,
            };
            let a = montecarlo::two_pulse_rabi_amplitude(&cfg)?;
            curve(c, 10.0 * p1.max(1e-18), true, "p1_w", "echo", |x| {
                montecarlo::two_pulse_rabi_amplitude(&RabiConfig { pulse1_power: x, ..cfg })
            })?;
            Output::new(
                "simulate_rabi",
                json!({"gamma_r_per_s": gamma_r, "p1_w": p1, "p2_w": p2, "theta_s": theta,
                       "omega_d_over_2pi_hz": omega_d_over_2pi_hz, "spread": spread, "samples": samples,
                       "seed": seed, "echo": a}),
            )
            .line(format!("normalized echo {a:.6}"))
        }
    })
}

fn build_filter_from(args: &FilterArgs, fallback: Option<&[IQTrace]>) -> Result<EchoFilter> {
    if let (Some(mu), Some(sigma), Some(phi0)) = (args.mu, args.sigma, args.phi0) {
        return EchoFilter::new(mu, sigma, phi0).context("--mu/--sigma/--phi0");
    }
    let loaded;
    let traces: &[IQTrace] = match (&args.filter_from, fallback) {
        (Some(path), _) => {
            loaded = io::read_trace_set(path)?;
            &loaded
        }
        (None, Some(t)) => t,
        (None, None) => bail!("give either --filter-from or all of --mu, --sigma and --phi0"),
    };
    let chosen: Vec<IQTrace> = match args.reference_traces {
        Some(0) => bail!("--reference-traces must be >= 1"),
        Some(k) => trace::highest_echoes(traces, k).into_iter().map(|i| traces[i].clone()).collect(),
        None => traces.to_vec(),
    };
    Ok(trace::build_filter(&chosen)?)
}

fn filter_json(f: &EchoFilter) -> Value {
    json!({"mu_bar_s": f.mu_bar, "sigma_bar_s": f.sigma_bar, "phi0_rad": f.phi0})
}

fn analyze(cmd: &AnalyzeCmd) -> Result<Output> {
    Ok(match cmd {
        AnalyzeCmd::Trace { manifest, filter } => {
            let traces = io::read_trace_set(manifest)?;
            let f = build_filter_from(filter, Some(&traces))?;
            let results = traces
                .iter()
                .map(|t| trace::integrate_echo(t, &f))
                .collect::<tlsecho::Result<Vec<_>>>()?;
            let rows: Vec<Vec<Value>> = results
                .iter()
                .enumerate()
                .map(|(k, r)| vec![json!(k), json!(r.i_bar), json!(r.q_bar), json!(r.phi), json!(r.delta)])
                .collect();
            let mean = results.iter().map(|r| r.i_bar).sum::<f64>() / results.len() as f64;
            Output::new(
                "analyze_trace",
                json!({"filter": filter_json(&f), "traces": results.iter().map(|r| json!({
                    "i_bar_Vs": r.i_bar, "q_bar_Vs": r.q_bar, "phi_rad": r.phi, "delta_rad": r.delta})).collect::<Vec<_>>()}),
            )
            .table(vec!["index", "i_bar_Vs", "q_bar_Vs", "phi_rad", "delta_rad"], rows)
            .line(format!(
                "filter µ̄ = {}, σ̄ = {}, φ₀ = {:.4} rad; {} traces, mean Ī = {mean:.6e} V·s",
                us(f.mu_bar),
                us(f.sigma_bar),
                f.phi0,
                results.len()
            ))
        }
        AnalyzeCmd::Noise { manifest, filter } => {
            let traces = io::read_trace_set(manifest)?;
            let f = build_filter_from(filter, None)?;
            let est = trace::estimate_integration_noise(&traces, &f)?;
            Output::new(
                "analyze_noise",
                json!({"filter": filter_json(&f), "sigma_Vs": est.sigma, "sample_std_Vs": est.sample_std,
                       "n_traces": est.n_traces}),
            )
            .line(format!(
                "σ(Ī) = {:.6e} V·s from the histogram fit (sample std {:.6e}) over {} traces",
                est.sigma, est.sample_std, est.n_traces
            ))
        }
        AnalyzeCmd::Diff {
            a,
            b,
            window_start,
            window_end,
        } => {
            if !(window_end > window_start) {
                bail!("--window-end must exceed --window-start");
            }
            let ta = io::read_trace_csv(a, None)?;
            let tb = io::read_trace_csv(b, None)?;
            let d = trace::trace_difference(&ta, &tb, (*window_start, *window_end))?;
            Output::new(
                "analyze_diff",
                json!({"window_start_s": window_start, "window_end_s": window_end, "difference_Vs": d}),
            )
            .line(format!("∫(I_b − I_a) dt = {d:.6e} V·s"))
        }
    })
}

fn read_dataset(path: &Path) -> Result<tlsecho::fit::DecayDataset> {
    Ok(io::read_decay_dataset(path)?)
}

fn fit(cmd: &FitCmd, seed: u64) -> Result<Output> {
    Ok(match cmd {
        FitCmd::Exp { input } => {
            let data = read_dataset(input)?;
            let mut rows = Vec::new();
            let mut lines = Vec::new();
            for s in &data.series {
                let f = fit_simple_exponential(s).with_context(|| format!("series at {} K", s.temperature))?;
                rows.push(vec![json!(s.temperature), json!(f.a0), json!(f.t2), json!(f.cost)]);
                lines.push(format!("T = {:.4} K: A0 = {:.4e} V·s, T2 = {}", s.temperature, f.a0, us(f.t2)));
            }
            let results = rows
                .iter()
                .map(|r| json!({"temperature_k": r[0], "a0_Vs": r[1], "t2_s": r[2], "cost": r[3]}))
                .collect::<Vec<_>>();
            let mut out = Output::new("fit_exp", json!({"series": results}))
                .table(vec!["temperature_k", "a0_Vs", "t2_s", "cost"], rows);
            out.summary = lines;
            out
        }
        FitCmd::Stretched { input } => {
            let data = read_dataset(input)?;
            let mut rows = Vec::new();
            let mut lines = Vec::new();
            for s in &data.series {
                let f = fit_stretched_exponential(s).with_context(|| format!("series at {} K", s.temperature))?;
                rows.push(vec![json!(s.temperature), json!(f.a), json!(f.t1), json!(f.p), json!(f.cost)]);
                lines.push(format!(
                    "T = {:.4} K: A = {:.4e} V·s, T1 = {}, p = {:.4}",
                    s.temperature,
                    f.a,
                    us(f.t1),
                    f.p
                ));
            }
            let results = rows
                .iter()
                .map(|r| json!({"temperature_k": r[0], "a_Vs": r[1], "t1_s": r[2], "p": r[3], "cost": r[4]}))
                .collect::<Vec<_>>();
            let mut out = Output::new("fit_stretched", json!({"series": results}))
                .table(vec!["temperature_k", "a_Vs", "t1_s", "p", "cost"], rows);
            out.summary = lines;
            out
        }
        FitCmd::Global {
            input,
            variant,
            init,
            multistart,
            weighted,
            bootstrap,
            subset,
        } => {
            if *multistart == 0 {
                bail!("--multistart must be >= 1");
            }
            let data = read_dataset(input)?;
            let start = match init {
                Some(path) => io::read_params(path)?.params,
                None => match variant {
                    ModelVariant::BaseIntrinsic => presets::d2_base(),
                    ModelVariant::RefinedTemperatureDependent => presets::d2_refined(),
                },
            };
            let opts = GlobalFitOptions {
                multistart: *multistart,
                seed,
                weighted: *weighted,
                ..Default::default()
            };
            let names = parameter_names(*variant);
            let (fit, boot) = if *bootstrap > 0 {
                let b = bootstrap_fit(
                    &data,
                    *variant,
                    &start,
                    &opts,
                    &BootstrapOptions {
                        n_resamples: *bootstrap,
                        subset_size: *subset,
                        seed,
                    },
                )?;
                (b.full_fit.clone(), Some(b))
            } else {
                (fit_global(&data, *variant, &start, &opts)?, None)
            };
            let values = tlsecho::fit::pack(&fit.params, *variant)?;
            let mut lines = vec![format!(
                "global fit ({}): converged {}, cost {:.4e}, curvature condition {:.2e}{}",
                variant.label(),
                fit.converged,
                fit.cost,
                fit.condition_number,
                if fit.well_conditioned { "" } else { " (parameters not all identifiable)" }
            )];
            let mut rows = Vec::new();
            for (k, name) in names.iter().enumerate() {
                let (mean, std) = boot.as_ref().map_or((None, None), |b| (Some(b.mean[k]), Some(b.std[k])));
                let unit = if *name == "w_ex" { "Hz/K" } else { "Hz" };
                lines.push(match (mean, std) {
                    (Some(m), Some(s)) => format!(
                        "  {name}/2π = {:.5e} {unit} (bootstrap {:.5e} ± {:.3e})",
                        values[k] / TWO_PI,
                        m / TWO_PI,
                        s / TWO_PI
                    ),
                    _ => format!("  {name}/2π = {:.5e} {unit}", values[k] / TWO_PI),
                });
                rows.push(vec![
                    json!(name),
                    json!(values[k] / TWO_PI),
                    json!(mean.map(|m| m / TWO_PI)),
                    json!(std.map(|s| s / TWO_PI)),
                ]);
            }
            let boot_json = boot.as_ref().map(|b| {
                json!({
                    "n_resamples": b.n_resamples, "subset_size": b.subset_size, "seed": b.seed,
                    "n_failed": b.n_failed, "parameter_names": b.parameter_names,
                    "mean_over_2pi_hz": b.mean.iter().map(|v| v / TWO_PI).collect::<Vec<_>>(),
                    "std_over_2pi_hz": b.std.iter().map(|v| v / TWO_PI).collect::<Vec<_>>(),
                    "samples_over_2pi_hz": b.samples.iter()
                        .map(|r| r.as_ref().map(|v| v.iter().map(|x| x / TWO_PI).collect::<Vec<_>>()))
                        .collect::<Vec<_>>(),
                })
            });
            let mut out = Output::new(
                "fit_global",
                json!({
                    "variant": variant,
                    "params": params_json(&fit.params, *variant),
                    "amplitudes": fit.amplitudes.iter().map(|a| json!({"temperature_k": a.temperature, "a0_Vs": a.a0})).collect::<Vec<_>>(),
                    "cost": fit.cost,
                    "converged": fit.converged,
                    "n_evals": fit.n_evals,
                    "condition_number": fit.condition_number,
                    "well_conditioned": fit.well_conditioned,
                    "bootstrap": boot_json,
                }),
            )
            .table(vec!["parameter", "fit_over_2pi", "bootstrap_mean_over_2pi", "bootstrap_std_over_2pi"], rows);
            out.summary = lines;
            out
        }
    })
}

fn chain_spec(c: &ChainArgs) -> Result<AmplifierChainSpec> {
    if c.n_cells == 0 {
        bail!("--n-cells must be >= 1");
    }
    check("--total-gain", c.total_gain, c.total_gain > 1.0, "> 1")?;
    positive("--capacitance", c.capacitance)?;
    positive("--z0", c.z0)?;
    positive("--omega-over-2pi-hz", c.omega_over_2pi_hz)?;
    non_negative("--tan-delta", c.tan_delta)?;
    Ok(AmplifierChainSpec {
        n_cells: c.n_cells,
        total_gain: c.total_gain,
        capacitance: c.capacitance,
        z0: c.z0,
        omega: angular_from_hz(c.omega_over_2pi_hz),
        ..Default::default()
    })
}

fn with_chain_assumptions(out: Output, c: &ChainArgs) -> Output {
    out.assume("capacitance", c.capacitance, "F")
        .assume("z0", c.z0, "ohm")
        .assume("omega_over_2pi", c.omega_over_2pi_hz, "Hz")
        .assume("n_cells", c.n_cells as f64, "1")
        .assume("total_gain", c.total_gain, "1")
}

fn losses(cmd: &LossesCmd) -> Result<Output> {
    Ok(match cmd {
        LossesCmd::Tandelta {
            params,
            gamma_sd0_over_2pi_hz,
            omega_b_over_2pi_hz,
            ratio,
            n0,
            d_a_debye,
            epsilon_r,
        } => {
            positive("--ratio", *ratio)?;
            if let (Some(n0), Some(d)) = (n0, d_a_debye) {
                positive("--n0", *n0)?;
                positive("--d-a-debye", *d)?;
                positive("--epsilon-r", *epsilon_r)?;
                let diel = DielectricSpec {
                    epsilon_r: *epsilon_r,
                    gamma_b_over_omega_b: *ratio,
                };
                let t = loss::tan_delta_from_density(*n0, debye_to_si(*d), &diel)?;
                return Ok(Output::new("losses_tandelta", json!({"route": "density", "n0_per_j_m3": n0, "d_a_debye": d, "tan_delta": t}))
                    .assume("epsilon_r", *epsilon_r, "1")
                    .line(format!("tan δ = {t:.5}")));
            }
            let (gsd0, wb) = match (params, gamma_sd0_over_2pi_hz, omega_b_over_2pi_hz) {
                (Some(path), _, _) => {
                    let f = io::read_params(path)?;
                    (f.params.gamma_sd0, f.params.omega_b)
                }
                (None, Some(g), Some(w)) => {
                    positive("--gamma-sd0-over-2pi-hz", *g)?;
                    positive("--omega-b-over-2pi-hz", *w)?;
                    (angular_from_hz(*g), angular_from_hz(*w))
                }
                _ => bail!("give --params, or --gamma-sd0-over-2pi-hz with --omega-b-over-2pi-hz, or --n0 with --d-a-debye"),
            };
            let t = loss::tan_delta_from_spectral_diffusion(gsd0, wb, *ratio)?;
            Output::new(
                "losses_tandelta",
                json!({"route": "spectral_diffusion", "gamma_sd0_over_2pi_hz": gsd0 / TWO_PI,
                       "omega_b_over_2pi_hz": wb / TWO_PI, "ratio": ratio, "tan_delta": t}),
            )
            .line(format!("tan δ = {t:.5}"))
        }
        LossesCmd::Efficiency { chain, c_min, c_max } => {
            let spec = chain_spec(chain)?;
            positive("--c-min", *c_min)?;
            check("--c-max", *c_max, *c_max > *c_min, "> --c-min")?;
            let g = loss::per_cell_gain(&spec)?;
            let a = loss::cell_attenuation(&spec, chain.tan_delta)?;
            let eta = loss::quantum_efficiency(a, g)?;
            let band = loss::efficiency_band(&spec, chain.tan_delta, (*c_min, *c_max))?;
            let fmt = |v: Option<f64>| v.map_or("undefined".into(), |x| format!("{x:.4}"));
            let out = Output::new(
                "losses_efficiency",
                json!({"tan_delta": chain.tan_delta, "per_cell_attenuation": a, "per_cell_gain": g, "eta": eta,
                       "band": {"capacitance_min_f": band.capacitance_min, "capacitance_max_f": band.capacitance_max,
                                "eta_at_min": band.eta_at_min, "eta_at_max": band.eta_at_max}}),
            )
            .line(format!("a = {a:.6}, g = {g:.7}, η = {eta:.4}"))
            .line(format!(
                "η over c ∈ [{:.0}, {:.0}] fF: {} to {}",
                c_min * 1e15,
                c_max * 1e15,
                fmt(band.eta_at_max),
                fmt(band.eta_at_min)
            ));
            with_chain_assumptions(out, chain)
        }
        LossesCmd::Cascade { chain, n_input } => {
            let spec = chain_spec(chain)?;
            non_negative("--n-input", *n_input)?;
            let g = loss::per_cell_gain(&spec)?;
            let a = loss::cell_attenuation(&spec, chain.tan_delta)?;
            let c = loss::noise_cascade(&spec, a, g, *n_input)?;
            let eta = loss::quantum_efficiency(a, g).ok();
            let out = Output::new(
                "losses_cascade",
                json!({"per_cell_attenuation": a, "per_cell_gain": g, "n_input": n_input,
                       "n_out_closed_form": c.closed_form, "n_out_iterated": c.iterated, "net_gain": c.net_gain,
                       "gain_over_noise": c.net_gain / c.closed_form, "eta": eta}),
            )
            .line(format!(
                "N_out = {:.6} (iterated {:.6}), T = {:.4}, T/N_out = {:.4}",
                c.closed_form,
                c.iterated,
                c.net_gain,
                c.net_gain / c.closed_form
            ));
            with_chain_assumptions(out, chain)
        }
    })
}

fn synth(cmd: &SynthCmd, g: &GlobalArgs) -> Result<Output> {
    let Some(out_path) = &g.out else {
        bail!("synth needs --out");
    };
    if g.format != Format::Json {
        bail!("synth writes its own formats; --format must be json");
    }
    let mut out = match cmd {
        SynthCmd::Decay {
            params,
            kind,
            temps_k,
            delay_min,
            delay_max,
            n_delays,
            tau,
            amplitude,
            thermal_over_2pi_hz,
            noise_std,
            label,
        } => {
            let kind = match kind.as_str() {
                "hahn" => DecayKind::Hahn,
                "stimulated" => DecayKind::Stimulated,
                other => bail!("--kind must be hahn or stimulated, got {other:?}"),
            };
            for t in temps_k {
                positive("--temps-k", *t)?;
            }
            non_negative("--delay-min", *delay_min)?;
            check("--delay-max", *delay_max, delay_max > delay_min, "> --delay-min")?;
            if *n_delays < 2 {
                bail!("--n-delays must be >= 2");
            }
            non_negative("--noise-std", *noise_std)?;
            let (p, v) = load_params(params)?;
            let amplitudes = temps_k
                .iter()
                .map(|t| match thermal_over_2pi_hz {
                    Some(f) => amplitude * (HBAR * TWO_PI * f / (2.0 * K_B * t)).tanh(),
                    None => *amplitude,
                })
                .collect();
            let delays = (0..*n_delays)
                .map(|k| delay_min + (delay_max - delay_min) * k as f64 / (*n_delays - 1) as f64)
                .collect();
            let spec = SynthDecaySpec {
                kind,
                device_label: label.clone(),
                params: p,
                variant: v,
                temperatures: temps_k.clone(),
                delays,
                tau: *tau,
                amplitudes,
                noise_std: *noise_std,
                seed: g.seed,
            };
            let data = io::generate_decay_dataset(&spec)?;
            io::write_decay_dataset(out_path, &data)?;
            Output::new("synth_decay", json!({"series": data.series.len(), "points": data.n_points()})).line(format!(
                "wrote {} series × {} delays to {}",
                data.series.len(),
                n_delays,
                out_path.display()
            ))
        }
        SynthCmd::Traces {
            dt,
            duration,
            amplitude,
            center,
            width,
            phase,
            noise,
            n_traces,
        } => {
            let spec = SynthTraceSpec {
                dt: *dt,
                duration: *duration,
                amplitude: *amplitude,
                center: *center,
                width: *width,
                phase: *phase,
                noise_std_per_sample: *noise,
                n_traces: *n_traces,
                seed: g.seed,
            };
            let traces = io::generate_trace_set(&spec)?;
            let manifest = io::write_trace_set(out_path, &traces, Some(&spec))?;
            Output::new("synth_traces", json!({"traces": traces.len()}))
                .line(format!("wrote {} traces, manifest {}", traces.len(), manifest.display()))
        }
    };
    out.wrote_out = true;
    Ok(out)
}
