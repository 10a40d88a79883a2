//! Least-squares fitting of echo decays: single-trace exponential and
//! stretched-exponential fits, the global multi-temperature fit with
//! analytically profiled amplitudes, and the series-subset bootstrap.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::TWO_PI;
use crate::echo::{EchoModel, ModelVariant, RatesAtTemperature, SpectralDiffusionParams, StimulatedDiffusionRate};
use crate::error::{Error, Result};
use crate::montecarlo::substream;
use crate::numeric::lsq::{levenberg_marquardt, Bounds, LmOptions, LmReport};
use crate::numeric::mean_std;
use crate::numeric::minimize::{nelder_mead, NelderMeadOptions};

/// Bounds on every rate parameter, rad/s (and rad/(s·K) for W_ex).
pub const RATE_BOUNDS: (f64, f64) = (TWO_PI * 0.1, TWO_PI * 1e8);
/// Bounds on ω_B, rad/s.
pub const OMEGA_B_BOUNDS: (f64, f64) = (TWO_PI * 0.1e9, TWO_PI * 20e9);
/// Inverse condition number of the curvature below which a fit is flagged.
pub const CONDITION_LIMIT: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayKind {
    /// Two-pulse echo; delays are the full echo delay 2τ.
    Hahn,
    /// Three-pulse echo; delays are the waiting time τ′ at fixed τ.
    Stimulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    /// s.
    pub delay: f64,
    /// Integrated echo amplitude, V·s.
    pub amplitude: f64,
    /// Optional one-sigma uncertainty, V·s.
    pub err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSeries {
    /// K.
    pub temperature: f64,
    /// Fixed pulse spacing τ of a stimulated series, s.
    pub tau: Option<f64>,
    pub points: Vec<DecayPoint>,
}

impl TemperatureSeries {
    pub fn delays(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delay).collect()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.amplitude).collect()
    }

    pub fn validate(&self, kind: DecayKind) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::domain(
                "TemperatureSeries",
                format!("temperature must be > 0, got {}", self.temperature),
            ));
        }
        if kind == DecayKind::Stimulated && !self.tau.is_some_and(|t| t.is_finite() && t >= 0.0) {
            return Err(Error::domain("TemperatureSeries", "stimulated series needs a pulse spacing tau >= 0"));
        }
        for (k, p) in self.points.iter().enumerate() {
            if !(p.delay.is_finite() && p.delay >= 0.0 && p.amplitude.is_finite()) {
                return Err(Error::domain("TemperatureSeries", format!("point {k} is not finite/non-negative")));
            }
            if p.err.is_some_and(|e| !(e.is_finite() && e > 0.0)) {
                return Err(Error::domain("TemperatureSeries", format!("point {k} has a non-positive err")));
            }
        }
        if self.points.windows(2).any(|w| w[1].delay <= w[0].delay) {
            return Err(Error::domain("TemperatureSeries", "delays must be strictly increasing"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayDataset {
    pub kind: DecayKind,
    pub device_label: String,
    pub series: Vec<TemperatureSeries>,
    /// Generator settings, present on synthetic datasets.
    #[serde(skip)]
    pub truth: Option<crate::io::GeneratorTruth>,
}

impl DecayDataset {
    pub fn validate(&self) -> Result<()> {
        if self.series.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        self.series.iter().try_for_each(|s| s.validate(self.kind))
    }

    pub fn n_points(&self) -> usize {
        self.series.iter().map(|s| s.points.len()).sum()
    }
}

fn delay_span(series: &TemperatureSeries) -> f64 {
    let d = series.delays();
    let span = d.last().copied().unwrap_or(0.0) - d.first().copied().unwrap_or(0.0);
    if span > 0.0 {
        span
    } else {
        1.0
    }
}

fn require_points(series: &TemperatureSeries, needed: usize) -> Result<()> {
    if series.points.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            got: series.points.len(),
        });
    }
    if series.points.windows(2).any(|w| w[1].delay <= w[0].delay) {
        return Err(Error::domain("fit", "delays must be strictly increasing"));
    }
    Ok(())
}

fn lm_error(func: &'static str, rep: &LmReport) -> Error {
    Error::Convergence {
        func,
        iterations: rep.iterations,
        detail: format!("{:?} at cost {:.3e}", rep.termination, rep.cost),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    /// V·s.
    pub a0: f64,
    /// Decay constant on the stored delay axis, s.
    pub t2: f64,
    /// Sum of squared residuals, (V·s)².
    pub cost: f64,
}

const LOG_TIME_LIMIT: f64 = 13.815_510_557_964_274; // ln 1e6

/// Fits A₀·exp(−delay/T₂).
pub fn fit_simple_exponential(series: &TemperatureSeries) -> Result<ExponentialFit> {
    require_points(series, 4)?;
    let x = series.delays();
    let y = series.amplitudes();
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::Fit("all amplitudes are zero".into()));
    }
    let span = delay_span(series);
    let ys: Vec<f64> = y.iter().map(|v| v / scale).collect();
    let xs: Vec<f64> = x.iter().map(|v| v / span).collect();

    // Log-linear regression on the positive points for a starting value.
    let pos: Vec<(f64, f64)> = xs.iter().zip(&ys).filter(|p| *p.1 > 0.0).map(|(a, b)| (*a, b.ln())).collect();
    let (mut a_init, mut lt_init) = (ys[0].max(1e-3), 0.0);
    if pos.len() >= 2 {
        let n = pos.len() as f64;
        let mx = pos.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pos.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx = pos.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        let slope = pos.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
        if slope < 0.0 {
            lt_init = (-1.0 / slope).ln().clamp(-LOG_TIME_LIMIT + 1.0, LOG_TIME_LIMIT - 1.0);
            a_init = (my - slope * mx).exp();
        }
    }
    let bounds = Bounds::new(vec![None, Some(-LOG_TIME_LIMIT)], vec![None, Some(LOG_TIME_LIMIT)]);
    let rep = levenberg_marquardt(
        |p, out| {
            let rate = (-p[1]).exp();
            for k in 0..xs.len() {
                out[k] = ys[k] - p[0] * (-xs[k] * rate).exp();
            }
            true
        },
        xs.len(),
        &[a_init, lt_init],
        &bounds,
        &tight_lm(),
    );
    if !rep.converged() {
        return Err(lm_error("fit_simple_exponential", &rep));
    }
    let lt = rep.params[1];
    if lt >= LOG_TIME_LIMIT - 1e-9 || lt <= -LOG_TIME_LIMIT + 1e-9 {
        return Err(Error::Bracket {
            func: "fit_simple_exponential",
            detail: "T2 ran to the edge of its search range; the data show no decay".into(),
        });
    }
    if rep.params[0] <= 0.0 {
        return Err(Error::Fit("fitted amplitude is not positive".into()));
    }
    Ok(ExponentialFit {
        a0: rep.params[0] * scale,
        t2: lt.exp() * span,
        cost: rep.cost * scale * scale,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchedFit {
    /// V·s.
    pub a: f64,
    /// s.
    pub t1: f64,
    pub p: f64,
    /// (V·s)².
    pub cost: f64,
}

/// Lower (exclusive in spirit) and upper limits on the stretch exponent.
pub const STRETCH_BOUNDS: (f64, f64) = (0.1, 2.0);

/// Fits A·exp(−(t/T₁)^p) with p constrained to (0.1, 2].
pub fn fit_stretched_exponential(series: &TemperatureSeries) -> Result<StretchedFit> {
    require_points(series, 6)?;
    let x = series.delays();
    let y = series.amplitudes();
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::Fit("all amplitudes are zero".into()));
    }
    let span = delay_span(series);
    let ys: Vec<f64> = y.iter().map(|v| v / scale).collect();
    let xs: Vec<f64> = x.iter().map(|v| v / span).collect();
    let y0 = ys[0];
    let t_init = xs
        .iter()
        .zip(&ys)
        .find(|(_, &v)| v < y0 / std::f64::consts::E)
        .map(|(t, _)| *t)
        .unwrap_or(1.0)
        .max(1e-3);
    let bounds = Bounds::new(
        vec![None, Some(-LOG_TIME_LIMIT), Some(STRETCH_BOUNDS.0)],
        vec![None, Some(LOG_TIME_LIMIT), Some(STRETCH_BOUNDS.1)],
    );
    let residuals = |p: &[f64], out: &mut [f64]| {
        let t1 = p[1].exp();
        for k in 0..xs.len() {
            out[k] = ys[k] - p[0] * (-(xs[k] / t1).powf(p[2])).exp();
        }
        true
    };
    let best = [0.5, 1.0, 1.5]
        .into_iter()
        .map(|p0| levenberg_marquardt(residuals, xs.len(), &[y0.max(1e-3), t_init.ln(), p0], &bounds, &tight_lm()))
        .filter(|r| r.converged())
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .ok_or_else(|| Error::Convergence {
            func: "fit_stretched_exponential",
            iterations: 0,
            detail: "no start converged".into(),
        })?;
    let p = &best.params;
    if p[0] <= 0.0 {
        return Err(Error::Fit("fitted amplitude is not positive".into()));
    }
    Ok(StretchedFit {
        a: p[0] * scale,
        t1: p[1].exp() * span,
        p: p[2],
        cost: best.cost * scale * scale,
    })
}

fn tight_lm() -> LmOptions {
    LmOptions {
        max_iterations: 500,
        ftol: 1e-15,
        xtol: 1e-12,
        gtol: 1e-14,
        ..Default::default()
    }
}

/// Controls for [`fit_global`] and [`bootstrap_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalFitOptions {
    /// Number of starting points, the first being `init` itself.
    pub multistart: usize,
    /// Half-width of the uniform jitter applied to each log-rate, decades.
    pub jitter_decades: f64,
    pub seed: u64,
    /// Divide residuals by the point `err` where present.
    pub weighted: bool,
    pub stimulated_rate: StimulatedDiffusionRate,
    pub max_iterations: usize,
}

impl Default for GlobalFitOptions {
    fn default() -> Self {
        GlobalFitOptions {
            multistart: 8,
            jitter_decades: 0.5,
            seed: 0,
            weighted: false,
            stimulated_rate: StimulatedDiffusionRate::AtTemperature,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesAmplitude {
    /// K.
    pub temperature: f64,
    /// Profiled A₀(T), V·s.
    pub a0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: SpectralDiffusionParams,
    pub variant: ModelVariant,
    /// One entry per series, in dataset order.
    pub amplitudes: Vec<SeriesAmplitude>,
    /// Sum of squared residuals, (V·s)².
    pub cost: f64,
    pub converged: bool,
    pub n_evals: usize,
    /// Condition number of the Gauss–Newton curvature in log-parameter space.
    pub condition_number: f64,
    /// False when the curvature is numerically singular: some parameter
    /// combination is not constrained by the data.
    pub well_conditioned: bool,
}

/// Names of the shared parameters, in the order used by
/// [`BootstrapSummary`] and [`pack`].
pub fn parameter_names(variant: ModelVariant) -> &'static [&'static str] {
    match variant {
        ModelVariant::BaseIntrinsic => &["gamma2", "gamma_sd0", "gamma1_b", "omega_b"],
        ModelVariant::RefinedTemperatureDependent => &["gamma2_star", "gamma_sd0", "gamma1_b", "omega_b", "w_ex"],
    }
}

/// Shared parameters as a flat vector of natural (not log) values.
pub fn pack(params: &SpectralDiffusionParams, variant: ModelVariant) -> Result<Vec<f64>> {
    params.validate(variant)?;
    Ok(match variant {
        ModelVariant::BaseIntrinsic => vec![
            params.gamma2.unwrap_or_default(),
            params.gamma_sd0,
            params.gamma1_b,
            params.omega_b,
        ],
        ModelVariant::RefinedTemperatureDependent => vec![
            params.gamma2_star.unwrap_or_default(),
            params.gamma_sd0,
            params.gamma1_b,
            params.omega_b,
            params.w_ex.unwrap_or_default(),
        ],
    })
}

pub fn unpack(values: &[f64], variant: ModelVariant) -> SpectralDiffusionParams {
    match variant {
        ModelVariant::BaseIntrinsic => SpectralDiffusionParams::base(values[1], values[3], values[2], values[0]),
        ModelVariant::RefinedTemperatureDependent => {
            SpectralDiffusionParams::refined(values[1], values[3], values[2], values[0], values[4])
        }
    }
}

fn log_bounds(variant: ModelVariant) -> (Vec<f64>, Vec<f64>) {
    let n = parameter_names(variant).len();
    let mut lo = vec![RATE_BOUNDS.0.ln(); n];
    let mut hi = vec![RATE_BOUNDS.1.ln(); n];
    lo[3] = OMEGA_B_BOUNDS.0.ln();
    hi[3] = OMEGA_B_BOUNDS.1.ln();
    (lo, hi)
}

/// Profiled least-squares problem over the shared log-rates.
struct Problem<'a> {
    data: &'a DecayDataset,
    variant: ModelVariant,
    stimulated_rate: StimulatedDiffusionRate,
    weighted: bool,
}

impl Problem<'_> {
    fn model(&self, logp: &[f64]) -> Option<EchoModel> {
        let values: Vec<f64> = logp.iter().map(|v| v.exp()).collect();
        EchoModel::new(unpack(&values, self.variant), self.variant)
            .ok()
            .map(|m| m.with_stimulated_rate(self.stimulated_rate))
    }

    fn exponent(&self, rates: &RatesAtTemperature, series: &TemperatureSeries, delay: f64) -> f64 {
        match self.data.kind {
            DecayKind::Hahn => rates.hahn_exponent(0.5 * delay),
            DecayKind::Stimulated => rates.stimulated_exponent(series.tau.unwrap_or(0.0), delay),
        }
    }

    fn weight(&self, p: &DecayPoint) -> f64 {
        match (self.weighted, p.err) {
            (true, Some(e)) => 1.0 / e,
            _ => 1.0,
        }
    }

    /// Fills residuals and returns the profiled amplitudes, or the index of
    /// the first series whose model vanishes.
    fn residuals(&self, logp: &[f64], out: &mut [f64]) -> std::result::Result<Vec<f64>, usize> {
        let model = self.model(logp).ok_or(usize::MAX)?;
        let mut amps = Vec::with_capacity(self.data.series.len());
        let mut k = 0;
        let mut m = Vec::new();
        for (si, series) in self.data.series.iter().enumerate() {
            let rates = model.rates(series.temperature).map_err(|_| si)?;
            m.clear();
            let (mut num, mut den) = (0.0, 0.0);
            for p in &series.points {
                let w = self.weight(p);
                let v = (-self.exponent(&rates, series, p.delay)).exp();
                m.push(v);
                num += w * w * p.amplitude * v;
                den += w * w * v * v;
            }
            if !(den > 0.0) || !den.is_finite() {
                return Err(si);
            }
            let a0 = num / den;
            for (p, v) in series.points.iter().zip(&m) {
                out[k] = self.weight(p) * (p.amplitude - a0 * v);
                k += 1;
            }
            amps.push(a0);
        }
        Ok(amps)
    }

    fn cost(&self, logp: &[f64], scratch: &mut [f64]) -> f64 {
        match self.residuals(logp, scratch) {
            Ok(_) => scratch.iter().map(|r| r * r).sum(),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Profiled amplitudes A₀(T) = Σ Ī·m / Σ m² for fixed shared parameters.
pub fn profile_amplitudes(
    data: &DecayDataset,
    params: &SpectralDiffusionParams,
    variant: ModelVariant,
) -> Result<Vec<SeriesAmplitude>> {
    data.validate()?;
    let logp: Vec<f64> = pack(params, variant)?.iter().map(|v| v.ln()).collect();
    let problem = Problem {
        data,
        variant,
        stimulated_rate: StimulatedDiffusionRate::AtTemperature,
        weighted: false,
    };
    let mut out = vec![0.0; data.n_points()];
    let amps = problem.residuals(&logp, &mut out).map_err(|si| singular(data, si))?;
    Ok(with_temperatures(data, &amps))
}

fn singular(data: &DecayDataset, si: usize) -> Error {
    match data.series.get(si) {
        Some(s) => Error::SingularProfile {
            temperature_k: s.temperature,
        },
        None => Error::Fit("model parameters are invalid".into()),
    }
}

fn with_temperatures(data: &DecayDataset, amps: &[f64]) -> Vec<SeriesAmplitude> {
    data.series
        .iter()
        .zip(amps)
        .map(|(s, &a0)| SeriesAmplitude {
            temperature: s.temperature,
            a0,
        })
        .collect()
}

fn condition_number(curvature: &nalgebra::DMatrix<f64>) -> f64 {
    let eig = curvature.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn run_lm(problem: &Problem, start: &[f64], bounds: &Bounds, max_iterations: usize) -> LmReport {
    let opts = LmOptions {
        max_iterations,
        ftol: 1e-13,
        xtol: 1e-11,
        gtol: 1e-12,
        fd_step: 1e-7,
        ..Default::default()
    };
    levenberg_marquardt(
        |p, out| problem.residuals(p, out).is_ok(),
        problem.data.n_points(),
        start,
        bounds,
        &opts,
    )
}

fn fit_from_starts(
    data: &DecayDataset,
    variant: ModelVariant,
    starts: &[Vec<f64>],
    opts: &GlobalFitOptions,
) -> Result<FitResult> {
    let problem = Problem {
        data,
        variant,
        stimulated_rate: opts.stimulated_rate,
        weighted: opts.weighted,
    };
    let (lo, hi) = log_bounds(variant);
    let bounds = Bounds::new(lo.iter().copied().map(Some).collect(), hi.iter().copied().map(Some).collect());
    let mut evals = 0;
    let mut best: Option<LmReport> = None;
    for s in starts {
        let rep = run_lm(&problem, s, &bounds, opts.max_iterations);
        evals += rep.evaluations;
        let better = match &best {
            None => true,
            Some(b) => match (rep.converged(), b.converged()) {
                (true, false) => true,
                (false, true) => false,
                _ => rep.cost < b.cost,
            },
        };
        if better {
            best = Some(rep);
        }
    }
    let mut best = best.ok_or_else(|| Error::Fit("no starting point".into()))?;

    if !best.converged() {
        // Simplex restart from the best point, then polish.
        let mut scratch = vec![0.0; data.n_points()];
        let nm = nelder_mead(
            |p| {
                let mut q = p.to_vec();
                for (v, (l, h)) in q.iter_mut().zip(lo.iter().zip(&hi)) {
                    *v = v.clamp(*l, *h);
                }
                problem.cost(&q, &mut scratch)
            },
            &best.params,
            &vec![0.1; best.params.len()],
            &NelderMeadOptions {
                max_evals: 3000,
                ..Default::default()
            },
        );
        evals += nm.evaluations;
        let mut x = nm.x;
        for (v, (l, h)) in x.iter_mut().zip(lo.iter().zip(&hi)) {
            *v = v.clamp(*l, *h);
        }
        let polished = run_lm(&problem, &x, &bounds, opts.max_iterations);
        evals += polished.evaluations;
        if polished.cost <= best.cost || polished.converged() {
            best = polished;
        }
    }

    let mut out = vec![0.0; data.n_points()];
    let amps = problem.residuals(&best.params, &mut out).map_err(|si| singular(data, si))?;
    let values: Vec<f64> = best.params.iter().map(|v| v.exp()).collect();
    let cond = condition_number(&best.curvature);
    Ok(FitResult {
        params: unpack(&values, variant),
        variant,
        amplitudes: with_temperatures(data, &amps),
        cost: out.iter().map(|r| r * r).sum(),
        converged: best.converged(),
        n_evals: evals,
        condition_number: cond,
        well_conditioned: cond.is_finite() && cond < CONDITION_LIMIT,
    })
}

fn starting_points(init: &[f64], variant: ModelVariant, opts: &GlobalFitOptions) -> Vec<Vec<f64>> {
    let (lo, hi) = log_bounds(variant);
    let base: Vec<f64> = init.iter().map(|v| v.ln()).collect();
    let mut rng = substream(opts.seed, u64::MAX);
    let half = opts.jitter_decades * std::f64::consts::LN_10;
    (0..opts.multistart.max(1))
        .map(|k| {
            base.iter()
                .enumerate()
                .map(|(i, v)| {
                    let j = if k == 0 { 0.0 } else { rng.random_range(-half..=half) };
                    (v + j).clamp(lo[i], hi[i])
                })
                .collect()
        })
        .collect()
}

fn check_init(init: &[f64], variant: ModelVariant) -> Result<()> {
    let (lo, hi) = log_bounds(variant);
    for (k, v) in init.iter().enumerate() {
        let l = v.ln();
        if !(l >= lo[k] - 1e-12 && l <= hi[k] + 1e-12) {
            return Err(Error::domain(
                "fit_global",
                format!(
                    "initial {} = {v:e} lies outside [{:e}, {:e}]",
                    parameter_names(variant)[k],
                    lo[k].exp(),
                    hi[k].exp()
                ),
            ));
        }
    }
    Ok(())
}

/// Global fit of shared rates with per-series amplitudes profiled out.
pub fn fit_global(
    data: &DecayDataset,
    variant: ModelVariant,
    init: &SpectralDiffusionParams,
    opts: &GlobalFitOptions,
) -> Result<FitResult> {
    data.validate()?;
    let x0 = pack(init, variant)?;
    check_init(&x0, variant)?;
    fit_from_starts(data, variant, &starting_points(&x0, variant, opts), opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub n_resamples: usize,
    pub subset_size: usize,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            n_resamples: 400,
            subset_size: 18,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub variant: ModelVariant,
    pub parameter_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// One row per resample; `None` where the fit failed.
    pub samples: Vec<Option<Vec<f64>>>,
    pub n_resamples: usize,
    pub n_failed: usize,
    pub subset_size: usize,
    pub seed: u64,
    /// The fit to the complete dataset that seeds every resample.
    pub full_fit: FitResult,
}

/// Refits random subsets of whole temperature series.
///
/// The complete dataset is fitted first with the multistart in `fit_opts`;
/// each resample then starts from that optimum. Resamples run in parallel,
/// each with its own random substream, and are collected by index.
pub fn bootstrap_fit(
    data: &DecayDataset,
    variant: ModelVariant,
    init: &SpectralDiffusionParams,
    fit_opts: &GlobalFitOptions,
    opts: &BootstrapOptions,
) -> Result<BootstrapSummary> {
    data.validate()?;
    if opts.n_resamples == 0 {
        return Err(Error::Config("n_resamples must be >= 1".into()));
    }
    if opts.subset_size == 0 || data.series.len() < opts.subset_size {
        return Err(Error::InsufficientData {
            needed: opts.subset_size.max(1),
            got: data.series.len(),
        });
    }
    let full_fit = fit_global(data, variant, init, fit_opts)?;
    let start = pack(&full_fit.params, variant)?;
    let log_start: Vec<f64> = start.iter().map(|v| v.ln()).collect();
    let single = GlobalFitOptions {
        multistart: 1,
        ..*fit_opts
    };

    let samples: Vec<Option<Vec<f64>>> = (0..opts.n_resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(opts.seed, r as u64);
            let mut idx = sample(&mut rng, data.series.len(), opts.subset_size).into_vec();
            idx.sort_unstable();
            let subset = DecayDataset {
                kind: data.kind,
                device_label: data.device_label.clone(),
                series: idx.iter().map(|&i| data.series[i].clone()).collect(),
                truth: None,
            };
            fit_from_starts(&subset, variant, std::slice::from_ref(&log_start), &single)
                .ok()
                .filter(|f| f.converged)
                .and_then(|f| pack(&f.params, variant).ok())
        })
        .collect();

    let n = parameter_names(variant).len();
    let good: Vec<&Vec<f64>> = samples.iter().flatten().collect();
    if good.is_empty() {
        return Err(Error::Fit("every bootstrap resample failed".into()));
    }
    let (mean, std): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|k| mean_std(&good.iter().map(|s| s[k]).collect::<Vec<_>>()))
        .unzip();
    Ok(BootstrapSummary {
        variant,
        parameter_names: parameter_names(variant).iter().map(|s| s.to_string()).collect(),
        mean,
        std,
        n_failed: samples.len() - good.len(),
        samples,
        n_resamples: opts.n_resamples,
        subset_size: opts.subset_size,
        seed: opts.seed,
        full_fit,
    })
}
