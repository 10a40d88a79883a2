//! Echo signal integration for demodulated I/Q records: per-quadrature
//! Gaussian fits, the matched filter, phase-optimal weighted integration and
//! the associated noise estimators.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::lsq::{levenberg_marquardt, Bounds, LmOptions};
use crate::numeric::mean_std;
use crate::numeric::minimize::golden_section;

/// Half-width of the integration window in units of σ̄.
pub const WINDOW_SIGMAS: f64 = 5.0;
/// Minimum peak signal-to-noise ratio accepted by [`fit_gaussian_pulse`].
pub const MIN_FIT_SNR: f64 = 2.0;
/// Minimum population for [`estimate_integration_noise`].
pub const MIN_NOISE_TRACES: usize = 50;

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Uniformly sampled demodulated record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IQTrace {
    /// Sample period, s.
    pub dt: f64,
    /// Time of the first sample, s.
    pub t0: f64,
    /// V.
    pub i: Vec<f64>,
    /// V.
    pub q: Vec<f64>,
}

impl IQTrace {
    pub fn new(dt: f64, t0: f64, i: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let trace = IQTrace { dt, t0, i, q };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) || !self.t0.is_finite() {
            return Err(Error::domain("IQTrace", format!("invalid dt {} or t0 {}", self.dt, self.t0)));
        }
        if self.i.len() != self.q.len() {
            return Err(Error::domain(
                "IQTrace",
                format!("I has {} samples but Q has {}", self.i.len(), self.q.len()),
            ));
        }
        if self.i.len() < 8 {
            return Err(Error::InsufficientData {
                needed: 8,
                got: self.i.len(),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Time of the last sample, s.
    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn quadrature(&self, which: Quadrature) -> &[f64] {
        match which {
            Quadrature::I => &self.i,
            Quadrature::Q => &self.q,
        }
    }

    /// Rotates the I/Q plane by `angle` (radians, counter-clockwise).
    pub fn rotated(&self, angle: f64) -> IQTrace {
        let (s, c) = angle.sin_cos();
        let (i, q) = self
            .i
            .iter()
            .zip(&self.q)
            .map(|(&i, &q)| (c * i - s * q, s * i + c * q))
            .unzip();
        IQTrace { i, q, ..*self }
    }

    pub fn scaled(&self, k: f64) -> IQTrace {
        IQTrace {
            i: self.i.iter().map(|v| v * k).collect(),
            q: self.q.iter().map(|v| v * k).collect(),
            ..*self
        }
    }

    fn same_grid(&self, other: &IQTrace) -> bool {
        self.len() == other.len()
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
            && (self.t0 - other.t0).abs() <= 1e-9 * self.dt
    }

    /// Largest |I + iQ| sample.
    pub fn peak_magnitude(&self) -> f64 {
        self.i
            .iter()
            .zip(&self.q)
            .map(|(i, q)| i.hypot(*q))
            .fold(0.0, f64::max)
    }

    fn window_indices(&self, start: f64, end: f64) -> std::ops::Range<usize> {
        let lo = ((start - self.t0) / self.dt).ceil().max(0.0) as usize;
        let hi = (((end - self.t0) / self.dt).floor() as usize + 1).min(self.len());
        lo..hi.max(lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrature {
    I,
    Q,
}

/// A·exp(−(t−µ)²/(2σ²)) + offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPulseFit {
    /// V.
    pub amplitude: f64,
    /// s.
    pub center: f64,
    /// s.
    pub width: f64,
    /// V.
    pub offset: f64,
    /// V.
    pub residual_rms: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Robust per-sample noise level from the median absolute first difference.
fn noise_level(y: &[f64]) -> f64 {
    let diffs: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    median(diffs) / (0.674_489_750_196_081_7 * std::f64::consts::SQRT_2)
}

/// Least-squares Gaussian-plus-offset fit of one quadrature.
pub fn fit_gaussian_pulse(trace: &IQTrace, quadrature: Quadrature) -> Result<GaussianPulseFit> {
    trace.validate()?;
    let y = trace.quadrature(quadrature);
    let n = y.len();
    let offset0 = median(y.to_vec());
    let (peak, &ypk) = y
        .iter()
        .enumerate()
        .max_by(|a, b| (a.1 - offset0).abs().total_cmp(&(b.1 - offset0).abs()))
        .expect("trace is non-empty");
    let a0 = ypk - offset0;
    let noise = noise_level(y);
    if a0 == 0.0 || a0.abs() < MIN_FIT_SNR * noise {
        return Err(Error::Fit(format!(
            "no pulse on {quadrature:?}: peak {:.3e} V against noise {noise:.3e} V",
            a0.abs()
        )));
    }

    let half = 0.5 * a0.abs();
    let above = |k: usize| (y[k] - offset0).abs() >= half;
    let mut lo = peak;
    while lo > 0 && above(lo - 1) {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < n && above(hi + 1) {
        hi += 1;
    }
    let fwhm = ((hi - lo + 1) as f64 * trace.dt).max(trace.dt);
    let sigma0 = fwhm / (8.0 * 2f64.ln()).sqrt();
    let mu0 = trace.time(peak);

    // Scaled parameters: amplitude and offset in units of a0, centre shift
    // and width in units of sigma0.
    let times: Vec<f64> = (0..n).map(|k| (trace.time(k) - mu0) / sigma0).collect();
    let scaled: Vec<f64> = y.iter().map(|v| v / a0).collect();
    let residuals = |p: &[f64], out: &mut [f64]| {
        let (amp, shift, width, off) = (p[0], p[1], p[2], p[3]);
        for k in 0..n {
            let z = (times[k] - shift) / width;
            out[k] = scaled[k] - (amp * (-0.5 * z * z).exp() + off);
        }
        true
    };
    let bounds = Bounds::new(vec![None, None, Some(1e-3), None], vec![None, None, None, None]);
    let opts = LmOptions {
        max_iterations: 400,
        ftol: 1e-15,
        xtol: 1e-13,
        gtol: 1e-14,
        ..Default::default()
    };
    let rep = levenberg_marquardt(residuals, n, &[1.0, 0.0, 1.0, offset0 / a0], &bounds, &opts);
    if !rep.converged() {
        return Err(Error::Convergence {
            func: "fit_gaussian_pulse",
            iterations: rep.iterations,
            detail: format!("{:?}", rep.termination),
        });
    }
    let p = &rep.params;
    Ok(GaussianPulseFit {
        amplitude: p[0] * a0,
        center: mu0 + p[1] * sigma0,
        width: p[2] * sigma0,
        offset: p[3] * a0,
        residual_rms: (rep.cost / n as f64).sqrt() * a0.abs(),
    })
}

/// Matched filter u(t) = exp(−(t−µ̄)²/(2σ̄²))/(√(2π)σ̄) and reference phase φ₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoFilter {
    /// s.
    pub mu_bar: f64,
    /// s.
    pub sigma_bar: f64,
    /// rad, in (−π, π].
    pub phi0: f64,
}

impl EchoFilter {
    pub fn new(mu_bar: f64, sigma_bar: f64, phi0: f64) -> Result<Self> {
        if !(sigma_bar.is_finite() && sigma_bar > 0.0 && mu_bar.is_finite() && phi0.is_finite()) {
            return Err(Error::domain("EchoFilter", "sigma_bar must be > 0 and all fields finite"));
        }
        let mut phi = phi0.rem_euclid(2.0 * PI);
        if phi > PI {
            phi -= 2.0 * PI;
        }
        Ok(EchoFilter {
            mu_bar,
            sigma_bar,
            phi0: phi,
        })
    }

    /// Unit-area filter weight at time `t`, 1/s.
    pub fn weight(&self, t: f64) -> f64 {
        let z = (t - self.mu_bar) / self.sigma_bar;
        (-0.5 * z * z).exp() / (SQRT_2PI * self.sigma_bar)
    }

    pub fn window(&self) -> (f64, f64) {
        let h = WINDOW_SIGMAS * self.sigma_bar;
        (self.mu_bar - h, self.mu_bar + h)
    }

    fn sums(&self, trace: &IQTrace) -> Result<FilterSums> {
        let (start, end) = self.window();
        if start < trace.t0 - 1e-9 * trace.dt || end > trace.t_end() + 1e-9 * trace.dt {
            return Err(Error::WindowOverlap {
                start,
                end,
                trace_start: trace.t0,
                trace_end: trace.t_end(),
            });
        }
        let mut s = FilterSums::default();
        for k in trace.window_indices(start, end) {
            let u = self.weight(trace.time(k));
            s.ui += u * trace.i[k];
            s.uq += u * trace.q[k];
            s.uu += u * u;
        }
        s.ui *= trace.dt;
        s.uq *= trace.dt;
        s.uu *= trace.dt;
        Ok(s)
    }

    /// Predicted std of Ī for white noise of `sigma_n` V per sample on each
    /// quadrature, for a trace with the grid of `trace`.
    pub fn white_noise_sigma(&self, trace: &IQTrace, sigma_n: f64) -> Result<f64> {
        let s = self.sums(trace)?;
        // Σu·n·Δt has std σ_n·Δt·√Σu²; dividing by Σu²Δt gives σ_n·√(Δt/uu).
        Ok(sigma_n * (trace.dt / s.uu).sqrt())
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct FilterSums {
    ui: f64,
    uq: f64,
    uu: f64,
}

impl FilterSums {
    fn project(&self, phi: f64) -> (f64, f64) {
        let (s, c) = phi.sin_cos();
        ((self.ui * c + self.uq * s) / self.uu, (self.uq * c - self.ui * s) / self.uu)
    }
}

/// Indices of the `k` traces with the largest peak magnitude, largest first.
pub fn highest_echoes(traces: &[IQTrace], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..traces.len()).collect();
    idx.sort_by(|&a, &b| traces[b].peak_magnitude().total_cmp(&traces[a].peak_magnitude()));
    idx.truncate(k);
    idx
}

/// Builds the matched filter from construction traces (typically the three
/// highest echoes). µ̄ and σ̄ average the per-quadrature fits that succeed.
pub fn build_filter(traces: &[IQTrace]) -> Result<EchoFilter> {
    if traces.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut centers = Vec::new();
    let mut widths = Vec::new();
    for (n, tr) in traces.iter().enumerate() {
        let fits: Vec<GaussianPulseFit> = [Quadrature::I, Quadrature::Q]
            .into_iter()
            .filter_map(|q| fit_gaussian_pulse(tr, q).ok())
            .collect();
        if fits.is_empty() {
            return Err(Error::Fit(format!("construction trace {n}: no quadrature could be fitted")));
        }
        for f in fits {
            centers.push(f.center);
            widths.push(f.width);
        }
    }
    let mu_bar = mean_std(&centers).0;
    let sigma_bar = mean_std(&widths).0;
    let (start, end) = (mu_bar - WINDOW_SIGMAS * sigma_bar, mu_bar + WINDOW_SIGMAS * sigma_bar);
    let (mut re, mut im) = (0.0, 0.0);
    for tr in traces {
        for k in tr.window_indices(start, end) {
            re += tr.i[k];
            im += tr.q[k];
        }
    }
    EchoFilter::new(mu_bar, sigma_bar, im.atan2(re))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoIntegral {
    /// Weighted in-phase integral Ī, V·s.
    pub i_bar: f64,
    /// Residual quadrature Q̄ at `phi`, V·s.
    pub q_bar: f64,
    /// φ = φ₀ + δ, rad.
    pub phi: f64,
    /// rad.
    pub delta: f64,
}

/// Ī = Σu(I cos φ + Q sin φ)Δt / Σu²Δt with φ = φ₀ + δ, where δ ∈ (−π/4, π/4)
/// minimizes |Q̄|.
pub fn integrate_echo(trace: &IQTrace, filter: &EchoFilter) -> Result<EchoIntegral> {
    trace.validate()?;
    let s = filter.sums(trace)?;
    let (delta, _) = golden_section(
        |d| s.project(filter.phi0 + d).1.abs(),
        -FRAC_PI_4,
        FRAC_PI_4,
        1e-13,
    );
    let phi = filter.phi0 + delta;
    let (i_bar, q_bar) = s.project(phi);
    Ok(EchoIntegral {
        i_bar,
        q_bar,
        phi,
        delta,
    })
}

/// Ī at the fixed filter phase φ₀, without the δ search.
pub fn integrate_at_reference_phase(trace: &IQTrace, filter: &EchoFilter) -> Result<f64> {
    trace.validate()?;
    Ok(filter.sums(trace)?.project(filter.phi0).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    /// Width of the Gaussian fitted to the Ī histogram, V·s.
    pub sigma: f64,
    /// Direct sample std of the Ī population, V·s.
    pub sample_std: f64,
    pub n_traces: usize,
}

fn gaussian_histogram_width(values: &[f64], mean: f64, std: f64) -> Result<f64> {
    let n = values.len();
    let bins = (2.0 * (n as f64).cbrt()).ceil() as usize;
    let (lo, hi) = (mean - 4.0 * std, mean + 4.0 * std);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0.0; bins];
    for v in values {
        let b = ((v - lo) / width).floor();
        if b >= 0.0 && (b as usize) < bins {
            counts[b as usize] += 1.0;
        }
    }
    // Bin centres in units of the sample std; density normalized to unit area.
    let xs: Vec<f64> = (0..bins).map(|b| (lo + (b as f64 + 0.5) * width - mean) / std).collect();
    let ys: Vec<f64> = counts.iter().map(|c| c / (n as f64 * width / std)).collect();
    let rep = levenberg_marquardt(
        |p, out| {
            for k in 0..bins {
                let z = (xs[k] - p[1]) / p[2];
                out[k] = ys[k] - p[0] * (-0.5 * z * z).exp();
            }
            true
        },
        bins,
        &[1.0 / SQRT_2PI, 0.0, 1.0],
        &Bounds::new(vec![Some(0.0), None, Some(1e-3)], vec![None, None, None]),
        &LmOptions::default(),
    );
    if !rep.converged() {
        return Err(Error::Convergence {
            func: "estimate_integration_noise",
            iterations: rep.iterations,
            detail: format!("histogram fit {:?}", rep.termination),
        });
    }
    Ok(rep.params[2].abs() * std)
}

/// Spread of Ī over echo-free traces, from a Gaussian fit of its histogram.
pub fn estimate_integration_noise(traces: &[IQTrace], filter: &EchoFilter) -> Result<NoiseEstimate> {
    if traces.len() < MIN_NOISE_TRACES {
        return Err(Error::InsufficientData {
            needed: MIN_NOISE_TRACES,
            got: traces.len(),
        });
    }
    let values = traces
        .iter()
        .map(|t| integrate_at_reference_phase(t, filter))
        .collect::<Result<Vec<f64>>>()?;
    let (mean, sample_std) = mean_std(&values);
    if sample_std == 0.0 {
        return Ok(NoiseEstimate {
            sigma: 0.0,
            sample_std,
            n_traces: values.len(),
        });
    }
    let sigma = gaussian_histogram_width(&values, mean, sample_std)?;
    if ((sigma - sample_std) / sample_std).abs() > 0.1 {
        return Err(Error::Fit(format!(
            "histogram width {sigma:.4e} disagrees with sample std {sample_std:.4e} by more than 10%"
        )));
    }
    Ok(NoiseEstimate {
        sigma,
        sample_std,
        n_traces: values.len(),
    })
}

fn check_grids(traces: &[IQTrace]) -> Result<()> {
    for (k, t) in traces.iter().enumerate().skip(1) {
        if !traces[0].same_grid(t) {
            return Err(Error::GridMismatch(format!("trace {k} does not share the grid of trace 0")));
        }
    }
    Ok(())
}

/// Per-sample √(σ_I² + σ_Q²) across a population of traces on one grid, V.
pub fn pointwise_std(traces: &[IQTrace]) -> Result<Vec<f64>> {
    if traces.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: traces.len(),
        });
    }
    check_grids(traces)?;
    let n = traces.len() as f64;
    let var = |x: &dyn Fn(&IQTrace) -> f64| {
        let m = traces.iter().map(x).sum::<f64>() / n;
        traces.iter().map(|t| (x(t) - m).powi(2)).sum::<f64>() / n
    };
    Ok((0..traces[0].len())
        .map(|k| (var(&|t| t.i[k]) + var(&|t| t.q[k])).sqrt())
        .collect())
}

/// ∫(I_b − I_a)dt over samples with t in `[window.0, window.1)`, V·s.
pub fn trace_difference(a: &IQTrace, b: &IQTrace, window: (f64, f64)) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    if !a.same_grid(b) {
        return Err(Error::GridMismatch("traces do not share a sample grid".into()));
    }
    let (w0, w1) = window;
    if !(w0 < w1) || w0 < a.t0 - 1e-9 * a.dt || w1 > a.t_end() + a.dt * (1.0 + 1e-9) {
        return Err(Error::WindowOverlap {
            start: w0,
            end: w1,
            trace_start: a.t0,
            trace_end: a.t_end(),
        });
    }
    let eps = 1e-9 * a.dt;
    let sum: f64 = (0..a.len())
        .filter(|&k| {
            let t = a.time(k);
            t >= w0 - eps && t < w1 - eps
        })
        .map(|k| b.i[k] - a.i[k])
        .sum();
    Ok(sum * a.dt)
}
