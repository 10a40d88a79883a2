//! Synthetic data generators and the on-disk formats: JSON decay datasets,
//! JSON parameter files, CSV trace sets with a JSON manifest, and JSON reports.
//!
//! Rates are written as `*_over_2pi_hz` and multiplied by 2π on load. When a
//! rate cannot be reproduced bit-exactly through that conversion it is written
//! as `*_rad_per_s` instead, so every writer/reader pair is lossless.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::{DeserializeOwned, Error as _};
use serde::{Deserialize, Deserializer, Serialize};

use crate::constants::TWO_PI;
use crate::echo::{EchoModel, ModelVariant, SpectralDiffusionParams};
use crate::error::{Error, Result};
use crate::fit::{DecayDataset, DecayKind, DecayPoint, TemperatureSeries};
use crate::montecarlo::substream;
use crate::trace::IQTrace;

pub const FORMAT_VERSION: u32 = 1;

/// Generator settings stored next to a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTruth {
    pub params: SpectralDiffusionParams,
    pub variant: ModelVariant,
    /// One per series, V·s.
    pub amplitudes: Vec<f64>,
    /// V·s.
    pub noise_std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDecaySpec {
    pub kind: DecayKind,
    pub device_label: String,
    pub params: SpectralDiffusionParams,
    pub variant: ModelVariant,
    /// K.
    pub temperatures: Vec<f64>,
    /// Stored delay axis (2τ for Hahn, τ′ for stimulated), s.
    pub delays: Vec<f64>,
    /// Fixed τ of a stimulated sequence, s.
    pub tau: Option<f64>,
    /// A₀(T) for each temperature, V·s.
    pub amplitudes: Vec<f64>,
    /// V·s.
    pub noise_std: f64,
    pub seed: u64,
}

impl SynthDecaySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |d: String| Err(Error::domain("SynthDecaySpec", d));
        if self.temperatures.is_empty() || self.delays.is_empty() {
            return bad("temperature and delay grids must be non-empty".into());
        }
        if self.amplitudes.len() != self.temperatures.len() {
            return bad(format!(
                "{} amplitudes for {} temperatures",
                self.amplitudes.len(),
                self.temperatures.len()
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        if self.kind == DecayKind::Stimulated && self.tau.is_none() {
            return bad("a stimulated dataset needs tau".into());
        }
        self.params.validate(self.variant)
    }
}

/// `n` independent standard-normal draws scaled by `std`, reproducible per seed.
pub fn gaussian_noise(seed: u64, stream: u64, n: usize, std: f64) -> Vec<f64> {
    let mut rng = substream(seed, stream);
    (0..n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Forward model plus additive Gaussian noise, one substream per series.
pub fn generate_decay_dataset(spec: &SynthDecaySpec) -> Result<DecayDataset> {
    spec.validate()?;
    let model = EchoModel::new(spec.params, spec.variant)?;
    let mut series = Vec::with_capacity(spec.temperatures.len());
    for (k, (&t, &a0)) in spec.temperatures.iter().zip(&spec.amplitudes).enumerate() {
        let noise = gaussian_noise(spec.seed, k as u64, spec.delays.len(), spec.noise_std);
        let points = spec
            .delays
            .iter()
            .zip(noise)
            .map(|(&d, n)| {
                let clean = match spec.kind {
                    DecayKind::Hahn => model.hahn_amplitude(a0, 0.5 * d, t)?,
                    DecayKind::Stimulated => model.stimulated_amplitude(a0, spec.tau.unwrap_or(0.0), d, t)?,
                };
                Ok(DecayPoint {
                    delay: d,
                    amplitude: clean + n,
                    err: (spec.noise_std > 0.0).then_some(spec.noise_std),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        series.push(TemperatureSeries {
            temperature: t,
            tau: spec.tau.filter(|_| spec.kind == DecayKind::Stimulated),
            points,
        });
    }
    Ok(DecayDataset {
        kind: spec.kind,
        device_label: spec.device_label.clone(),
        series,
        truth: Some(GeneratorTruth {
            params: spec.params,
            variant: spec.variant,
            amplitudes: spec.amplitudes.clone(),
            noise_std: spec.noise_std,
            seed: spec.seed,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthTraceSpec {
    #[serde(rename = "dt_s")]
    pub dt: f64,
    #[serde(rename = "duration_s")]
    pub duration: f64,
    #[serde(rename = "amplitude_v")]
    pub amplitude: f64,
    #[serde(rename = "center_s")]
    pub center: f64,
    #[serde(rename = "width_s")]
    pub width: f64,
    #[serde(rename = "phase_rad")]
    pub phase: f64,
    #[serde(rename = "noise_std_per_sample_v")]
    pub noise_std_per_sample: f64,
    pub n_traces: usize,
    pub seed: u64,
}

impl SynthTraceSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |d: String| Err(Error::domain("SynthTraceSpec", d));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return bad(format!("width must be > 0, got {}", self.width));
        }
        if !(self.duration.is_finite() && self.duration >= self.center + 5.0 * self.width) {
            return bad("duration must cover the echo centre plus five widths".into());
        }
        if !(self.noise_std_per_sample.is_finite() && self.noise_std_per_sample >= 0.0) {
            return bad("noise_std_per_sample must be >= 0".into());
        }
        if !(self.amplitude.is_finite() && self.phase.is_finite() && self.center.is_finite()) {
            return bad("amplitude, phase and center must be finite".into());
        }
        if self.n_traces == 0 {
            return bad("n_traces must be >= 1".into());
        }
        Ok(())
    }
}

/// Gaussian echo of the given phase on I and Q plus white noise on both.
pub fn generate_trace_set(spec: &SynthTraceSpec) -> Result<Vec<IQTrace>> {
    spec.validate()?;
    let n = (spec.duration / spec.dt).floor() as usize + 1;
    let (s, c) = spec.phase.sin_cos();
    let envelope: Vec<f64> = (0..n)
        .map(|k| {
            let x = (k as f64 * spec.dt - spec.center) / spec.width;
            spec.amplitude * (-0.5 * x * x).exp()
        })
        .collect();
    (0..spec.n_traces)
        .map(|r| {
            let noise = gaussian_noise(spec.seed, r as u64, 2 * n, spec.noise_std_per_sample);
            let i = envelope.iter().zip(&noise[..n]).map(|(g, e)| c * g + e).collect();
            let q = envelope.iter().zip(&noise[n..]).map(|(g, e)| s * g + e).collect();
            IQTrace::new(spec.dt, 0.0, i, q)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Field validators, so that violations carry the serde path and line.

fn check<'de, D: Deserializer<'de>>(d: D, ok: fn(f64) -> bool, what: &str) -> std::result::Result<f64, D::Error> {
    let v = f64::deserialize(d)?;
    if v.is_finite() && ok(v) {
        Ok(v)
    } else {
        Err(D::Error::custom(format!("expected {what}, got {v}")))
    }
}

fn positive<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    check(d, |v| v > 0.0, "a finite number > 0")
}

fn non_negative<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    check(d, |v| v >= 0.0, "a finite number >= 0")
}

fn finite<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    check(d, |_| true, "a finite number")
}

fn opt_positive<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    Option::<f64>::deserialize(d)?
        .map(|v| {
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(D::Error::custom(format!("expected a finite number > 0, got {v}")))
            }
        })
        .transpose()
}

fn opt_non_negative<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    Option::<f64>::deserialize(d)?
        .map(|v| {
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                Err(D::Error::custom(format!("expected a finite number >= 0, got {v}")))
            }
        })
        .transpose()
}

fn version<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<u32>, D::Error> {
    match Option::<u32>::deserialize(d)? {
        Some(FORMAT_VERSION) | None => Ok(Some(FORMAT_VERSION)),
        Some(v) => Err(D::Error::custom(format!(
            "unsupported format_version {v}, expected {FORMAT_VERSION}"
        ))),
    }
}

fn schema(path: &Path, location: impl Into<String>, detail: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        location: location.into(),
        detail: detail.into(),
    }
}

fn parse_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        let location = if field == "." {
            format!("line {}", inner.line())
        } else {
            format!("{field} (line {})", inner.line())
        };
        schema(path, location, inner.to_string())
    })?;
    de.end().map_err(|e| schema(path, format!("line {}", e.line()), e.to_string()))?;
    Ok(value)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("wire types always serialize");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// Parameter files.

/// A rate split into its two admissible encodings; exactly one is set.
fn encode_rate(omega: f64) -> (Option<f64>, Option<f64>) {
    let x = omega / TWO_PI;
    [x, x.next_up(), x.next_down()]
        .into_iter()
        .find(|c| c * TWO_PI == omega)
        .map_or((None, Some(omega)), |c| (Some(c), None))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsWire {
    #[serde(default, deserialize_with = "version", skip_serializing_if = "Option::is_none")]
    format_version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    device_label: Option<String>,
    variant: Option<ModelVariant>,
    #[serde(default, deserialize_with = "opt_positive", skip_serializing_if = "Option::is_none")]
    gamma_sd0_over_2pi_hz: Option<f64>,
    #[serde(default, deserialize_with = "opt_positive", skip_serializing_if = "Option::is_none")]
    gamma_sd0_rad_per_s: Option<f64>,
    #[serde(default, deserialize_with = "opt_positive", skip_serializing_if = "Option::is_none")]
    omega_b_over_2pi_hz: Option<f64>,
    #[serde(default, deserialize_with = "opt_positive", skip_serializing_if = "Option::is_none")]
    omega_b_rad_per_s: Option<f64>,
    #[serde(default, deserialize_with = "opt_non_negative", skip_serializing_if = "Option::is_none")]
    gamma1_b_over_2pi_hz: Option<f64>,
    #[serde(default, deserialize_with = "opt_non_negative", skip_serializing_if = "Option::is_none")]
    gamma1_b_rad_per_s: Option<f64>,
    #[serde(default, deserialize_with = "opt_non_negative", skip_serializing_if = "Option::is_none")]
    gamma2_over_2pi_hz: Option<f64>,
    #[serde(default, deserialize_with = "opt_non_negative", skip_serializing_if = "Option::is_none")]
    gamma2_rad_per_s: Option<f64>,
    #[serde(default, deserialize_with = "opt_non_negative", skip_serializing_if = "Option::is_none")]
    gamma2_star_over_2pi_hz: Option<f64>,
    #[serde(default, deserialize_with = "opt_non_negative", skip_serializing_if = "Option::is_none")]
    gamma2_star_rad_per_s: Option<f64>,
    #[serde(default, deserialize_with = "opt_non_negative", skip_serializing_if = "Option::is_none")]
    w_ex_over_2pi_hz_per_k: Option<f64>,
    #[serde(default, deserialize_with = "opt_non_negative", skip_serializing_if = "Option::is_none")]
    w_ex_rad_per_s_per_k: Option<f64>,
}

impl ParamsWire {
    fn from_params(params: &SpectralDiffusionParams, variant: ModelVariant, label: Option<&str>) -> Self {
        let (gamma_sd0_over_2pi_hz, gamma_sd0_rad_per_s) = encode_rate(params.gamma_sd0);
        let (omega_b_over_2pi_hz, omega_b_rad_per_s) = encode_rate(params.omega_b);
        let (gamma1_b_over_2pi_hz, gamma1_b_rad_per_s) = encode_rate(params.gamma1_b);
        let split = |v: Option<f64>| v.map_or((None, None), encode_rate);
        let (gamma2_over_2pi_hz, gamma2_rad_per_s) = split(params.gamma2);
        let (gamma2_star_over_2pi_hz, gamma2_star_rad_per_s) = split(params.gamma2_star);
        let (w_ex_over_2pi_hz_per_k, w_ex_rad_per_s_per_k) = split(params.w_ex);
        ParamsWire {
            format_version: None,
            device_label: label.map(str::to_owned),
            variant: Some(variant),
            gamma_sd0_over_2pi_hz,
            gamma_sd0_rad_per_s,
            omega_b_over_2pi_hz,
            omega_b_rad_per_s,
            gamma1_b_over_2pi_hz,
            gamma1_b_rad_per_s,
            gamma2_over_2pi_hz,
            gamma2_rad_per_s,
            gamma2_star_over_2pi_hz,
            gamma2_star_rad_per_s,
            w_ex_over_2pi_hz_per_k,
            w_ex_rad_per_s_per_k,
        }
    }

    fn into_params(self, path: &Path, prefix: &str) -> Result<ParamsFile> {
        let loc = |f: &str| format!("{prefix}{f}");
        let pick = |over: Option<f64>, rad: Option<f64>, name: &str, rad_suffix: &str| -> Result<Option<f64>> {
            match (over, rad) {
                (Some(_), Some(_)) => Err(schema(
                    path,
                    loc(name),
                    format!("give only one of {name}_over_2pi_hz and {name}_{rad_suffix}"),
                )),
                (Some(v), None) => Ok(Some(v * TWO_PI)),
                (None, r) => Ok(r),
            }
        };
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| schema(path, loc(&format!("{name}_over_2pi_hz")), "missing required field"))
        };
        let gsd0 = need(pick(self.gamma_sd0_over_2pi_hz, self.gamma_sd0_rad_per_s, "gamma_sd0", "rad_per_s")?, "gamma_sd0")?;
        let wb = need(pick(self.omega_b_over_2pi_hz, self.omega_b_rad_per_s, "omega_b", "rad_per_s")?, "omega_b")?;
        let g1b = need(pick(self.gamma1_b_over_2pi_hz, self.gamma1_b_rad_per_s, "gamma1_b", "rad_per_s")?, "gamma1_b")?;
        let g2 = pick(self.gamma2_over_2pi_hz, self.gamma2_rad_per_s, "gamma2", "rad_per_s")?;
        let g2s = pick(self.gamma2_star_over_2pi_hz, self.gamma2_star_rad_per_s, "gamma2_star", "rad_per_s")?;
        let wex = pick(self.w_ex_over_2pi_hz_per_k, self.w_ex_rad_per_s_per_k, "w_ex", "rad_per_s_per_k")?;
        let params = SpectralDiffusionParams {
            gamma_sd0: gsd0,
            omega_b: wb,
            gamma1_b: g1b,
            gamma2: g2,
            gamma2_star: g2s,
            w_ex: wex,
        };
        let variant = match self.variant {
            Some(v) => v,
            None => params
                .inferred_variant()
                .ok_or_else(|| schema(path, loc("variant"), "missing and cannot be inferred from the rates"))?,
        };
        params
            .validate(variant)
            .map_err(|e| schema(path, loc("variant"), e.to_string()))?;
        Ok(ParamsFile {
            device_label: self.device_label,
            variant,
            params,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamsFile {
    pub device_label: Option<String>,
    pub variant: ModelVariant,
    pub params: SpectralDiffusionParams,
}

pub fn params_to_json(file: &ParamsFile) -> String {
    let mut wire = ParamsWire::from_params(&file.params, file.variant, file.device_label.as_deref());
    wire.format_version = Some(FORMAT_VERSION);
    to_json(&wire)
}

/// `path` is used only for diagnostics.
pub fn params_from_json(text: &str, path: &Path) -> Result<ParamsFile> {
    parse_json::<ParamsWire>(text, path)?.into_params(path, "")
}

pub fn write_params(path: &Path, file: &ParamsFile) -> Result<()> {
    write_text(path, &params_to_json(file))
}

pub fn read_params(path: &Path) -> Result<ParamsFile> {
    params_from_json(&read_text(path)?, path)
}

// ---------------------------------------------------------------------------
// Decay datasets.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecayWire {
    #[serde(default, deserialize_with = "version")]
    format_version: Option<u32>,
    kind: DecayKind,
    #[serde(default)]
    device_label: String,
    series: Vec<SeriesWire>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth: Option<TruthWire>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesWire {
    #[serde(deserialize_with = "positive")]
    temperature_k: f64,
    #[serde(default, deserialize_with = "opt_non_negative", skip_serializing_if = "Option::is_none")]
    tau_s: Option<f64>,
    points: Vec<PointWire>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointWire {
    #[serde(deserialize_with = "non_negative")]
    delay_s: f64,
    #[serde(rename = "amplitude_Vs", deserialize_with = "finite")]
    amplitude: f64,
    #[serde(rename = "err_Vs", default, deserialize_with = "opt_positive", skip_serializing_if = "Option::is_none")]
    err: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthWire {
    params: ParamsWire,
    #[serde(rename = "amplitudes_Vs")]
    amplitudes: Vec<f64>,
    #[serde(rename = "noise_std_Vs", deserialize_with = "non_negative")]
    noise_std: f64,
    seed: u64,
}

pub fn decay_dataset_to_json(data: &DecayDataset) -> String {
    let wire = DecayWire {
        format_version: Some(FORMAT_VERSION),
        kind: data.kind,
        device_label: data.device_label.clone(),
        series: data
            .series
            .iter()
            .map(|s| SeriesWire {
                temperature_k: s.temperature,
                tau_s: s.tau,
                points: s
                    .points
                    .iter()
                    .map(|p| PointWire {
                        delay_s: p.delay,
                        amplitude: p.amplitude,
                        err: p.err,
                    })
                    .collect(),
            })
            .collect(),
        truth: data.truth.as_ref().map(|t| TruthWire {
            params: ParamsWire::from_params(&t.params, t.variant, None),
            amplitudes: t.amplitudes.clone(),
            noise_std: t.noise_std,
            seed: t.seed,
        }),
    };
    to_json(&wire)
}

/// `path` is used only for diagnostics.
pub fn decay_dataset_from_json(text: &str, path: &Path) -> Result<DecayDataset> {
    let wire: DecayWire = parse_json(text, path)?;
    let truth = match wire.truth {
        Some(t) => {
            let p = t.params.into_params(path, "truth.params.")?;
            Some(GeneratorTruth {
                params: p.params,
                variant: p.variant,
                amplitudes: t.amplitudes,
                noise_std: t.noise_std,
                seed: t.seed,
            })
        }
        None => None,
    };
    let data = DecayDataset {
        kind: wire.kind,
        device_label: wire.device_label,
        series: wire
            .series
            .into_iter()
            .map(|s| TemperatureSeries {
                temperature: s.temperature_k,
                tau: s.tau_s,
                points: s
                    .points
                    .into_iter()
                    .map(|p| DecayPoint {
                        delay: p.delay_s,
                        amplitude: p.amplitude,
                        err: p.err,
                    })
                    .collect(),
            })
            .collect(),
        truth,
    };
    if data.series.is_empty() {
        return Err(schema(path, "series", "at least one series is required"));
    }
    for (k, s) in data.series.iter().enumerate() {
        s.validate(data.kind)
            .map_err(|e| schema(path, format!("series[{k}]"), e.to_string()))?;
    }
    Ok(data)
}

pub fn write_decay_dataset(path: &Path, data: &DecayDataset) -> Result<()> {
    write_text(path, &decay_dataset_to_json(data))
}

pub fn read_decay_dataset(path: &Path) -> Result<DecayDataset> {
    decay_dataset_from_json(&read_text(path)?, path)
}

// ---------------------------------------------------------------------------
// Trace sets.

pub const TRACE_HEADER: [&str; 3] = ["t_s", "i_v", "q_v"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Relative to the manifest directory.
    pub file: String,
    #[serde(rename = "t0_s", deserialize_with = "finite")]
    pub t0: f64,
    #[serde(rename = "dt_s", deserialize_with = "positive")]
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceManifest {
    #[serde(default, deserialize_with = "version")]
    pub format_version: Option<u32>,
    pub traces: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<SynthTraceSpec>,
}

pub fn write_trace_csv(path: &Path, trace: &IQTrace) -> Result<()> {
    let io = |e: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(TRACE_HEADER).map_err(io)?;
    for k in 0..trace.len() {
        w.write_record([trace.time(k), trace.i[k], trace.q[k]].map(|v| v.to_string()))
            .map_err(io)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads one CSV trace. Without `grid` the sample period is inferred from
/// the time column, which must be uniform.
pub fn read_trace_csv(path: &Path, grid: Option<(f64, f64)>) -> Result<IQTrace> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
    let header = r
        .headers()
        .map_err(|e| schema(path, "line 1", e.to_string()))?
        .clone();
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != TRACE_HEADER {
        return Err(schema(
            path,
            "line 1",
            format!("header must be {}, got {}", TRACE_HEADER.join(","), got.join(",")),
        ));
    }
    let (mut t, mut i, mut q) = (Vec::new(), Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            schema(path, format!("line {line}"), e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut vals = [0.0; 3];
        for (c, name) in TRACE_HEADER.iter().enumerate() {
            let field = rec
                .get(c)
                .ok_or_else(|| schema(path, format!("line {line}, column {name}"), "missing value"))?;
            vals[c] = field
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| schema(path, format!("line {line}, column {name}"), format!("not a finite number: {field:?}")))?;
        }
        t.push(vals[0]);
        i.push(vals[1]);
        q.push(vals[2]);
    }
    if t.len() < 2 {
        return Err(schema(path, "t_s", format!("need at least 2 samples, got {}", t.len())));
    }
    let (t0, dt) = grid.unwrap_or((t[0], (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64));
    if !(dt > 0.0) {
        return Err(schema(path, "t_s", "time column must increase"));
    }
    for (k, &tk) in t.iter().enumerate() {
        if (tk - (t0 + k as f64 * dt)).abs() > 1e-6 * dt {
            return Err(schema(path, format!("line {}, column t_s", k + 2), "sample times are not on a uniform grid"));
        }
    }
    IQTrace::new(dt, t0, i, q).map_err(|e| schema(path, "t_s", e.to_string()))
}

/// Writes `trace_NNNN.csv` files and `manifest.json` into `dir`.
pub fn write_trace_set(dir: &Path, traces: &[IQTrace], truth: Option<&SynthTraceSpec>) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut entries = Vec::with_capacity(traces.len());
    for (k, tr) in traces.iter().enumerate() {
        let file = format!("trace_{k:04}.csv");
        write_trace_csv(&dir.join(&file), tr)?;
        entries.push(ManifestEntry {
            file,
            t0: tr.t0,
            dt: tr.dt,
        });
    }
    let manifest = TraceManifest {
        format_version: Some(FORMAT_VERSION),
        traces: entries,
        truth: truth.copied(),
    };
    let path = dir.join("manifest.json");
    write_text(&path, &to_json(&manifest))?;
    Ok(path)
}

pub fn read_trace_manifest(path: &Path) -> Result<TraceManifest> {
    parse_json(&read_text(path)?, path)
}

pub fn read_trace_set(manifest_path: &Path) -> Result<Vec<IQTrace>> {
    let manifest = read_trace_manifest(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    manifest
        .traces
        .iter()
        .map(|e| read_trace_csv(&dir.join(&e.file), Some((e.t0, e.dt))))
        .collect()
}

// ---------------------------------------------------------------------------
// Reports.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assumption {
    pub value: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    #[serde(default, deserialize_with = "version")]
    pub format_version: Option<u32>,
    pub kind: String,
    pub results: serde_json::Value,
    /// Every assumed constant that influenced a number in `results`.
    pub assumptions: BTreeMap<String, Assumption>,
}

impl Report {
    pub fn new(kind: impl Into<String>, results: serde_json::Value) -> Self {
        Report {
            format_version: Some(FORMAT_VERSION),
            kind: kind.into(),
            results,
            assumptions: BTreeMap::new(),
        }
    }

    pub fn assume(mut self, name: &str, value: f64, unit: &str) -> Self {
        self.assumptions.insert(
            name.to_owned(),
            Assumption {
                value,
                unit: unit.to_owned(),
            },
        );
        self
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

pub fn write_report(path: &Path, report: &Report) -> Result<()> {
    write_text(path, &report.to_json())
}

pub fn read_report(path: &Path) -> Result<Report> {
    parse_json(&read_text(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::echo::presets;
    use crate::numeric::mean_std;

    fn spec(noise: f64, seed: u64) -> SynthDecaySpec {
        SynthDecaySpec {
            kind: DecayKind::Hahn,
            device_label: "D2".into(),
            params: presets::d2_base(),
            variant: ModelVariant::BaseIntrinsic,
            temperatures: vec![0.02, 0.05, 0.08, 0.1],
            delays: (0..250).map(|k| k as f64 * 2e-8).collect(),
            tau: None,
            amplitudes: vec![1e-9, 2e-9, 3e-9, 4e-9],
            noise_std: noise,
            seed,
        }
    }

    fn p() -> &'static Path {
        Path::new("mem.json")
    }

    #[test]
    fn noiseless_points_are_the_model() {
        let d = generate_decay_dataset(&spec(0.0, 1)).unwrap();
        let m = EchoModel::new(presets::d2_base(), ModelVariant::BaseIntrinsic).unwrap();
        for (s, a0) in d.series.iter().zip([1e-9, 2e-9, 3e-9, 4e-9]) {
            for pt in &s.points {
                assert_eq!(pt.amplitude, m.hahn_amplitude(a0, 0.5 * pt.delay, s.temperature).unwrap());
                assert_eq!(pt.err, None);
            }
        }
    }

    #[test]
    fn noise_scales_linearly() {
        let clean = generate_decay_dataset(&spec(0.0, 1)).unwrap();
        let rms = |noise: f64| {
            let d = generate_decay_dataset(&spec(noise, 9)).unwrap();
            let r: Vec<f64> = d
                .series
                .iter()
                .zip(&clean.series)
                .flat_map(|(a, b)| a.points.iter().zip(&b.points).map(|(x, y)| x.amplitude - y.amplitude))
                .collect();
            (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt()
        };
        let (a, b) = (rms(1e-11), rms(2e-11));
        assert!((b / a / 2.0 - 1.0).abs() < 0.05);
        assert!((a / 1e-11 - 1.0).abs() < 0.1);
    }

    #[test]
    fn same_seed_same_dataset() {
        assert_eq!(generate_decay_dataset(&spec(1e-11, 4)).unwrap(), generate_decay_dataset(&spec(1e-11, 4)).unwrap());
        assert_ne!(generate_decay_dataset(&spec(1e-11, 4)).unwrap(), generate_decay_dataset(&spec(1e-11, 5)).unwrap());
    }

    #[test]
    fn noise_kurtosis_is_gaussian() {
        let x = gaussian_noise(17, 0, 200_000, 1.0);
        let (m, s) = mean_std(&x);
        let k = x.iter().map(|v| ((v - m) / s).powi(4)).sum::<f64>() / x.len() as f64;
        assert!((k - 3.0).abs() < 0.2, "kurtosis {k}");
    }

    #[test]
    fn decay_round_trip_is_exact() {
        let d = generate_decay_dataset(&spec(3e-11, 2)).unwrap();
        let back = decay_dataset_from_json(&decay_dataset_to_json(&d), p()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn params_round_trip_is_exact() {
        for (params, variant) in [
            (presets::d2_base(), ModelVariant::BaseIntrinsic),
            (presets::d3_refined(), ModelVariant::RefinedTemperatureDependent),
            (SpectralDiffusionParams::base(1.234567e6, 1.1e10, 0.1, 3.3), ModelVariant::BaseIntrinsic),
        ] {
            let f = ParamsFile {
                device_label: Some("x".into()),
                variant,
                params,
            };
            assert_eq!(params_from_json(&params_to_json(&f), p()).unwrap(), f);
        }
    }

    #[test]
    fn over_2pi_fields_are_scaled() {
        let text = r#"{"format_version":1,"variant":"base","gamma_sd0_over_2pi_hz":743e3,
            "omega_b_over_2pi_hz":1.9e9,"gamma1_b_over_2pi_hz":146e3,"gamma2_over_2pi_hz":50e3}"#;
        let f = params_from_json(text, p()).unwrap();
        assert_eq!(f.params.gamma_sd0, 743e3 * TWO_PI);
        assert_eq!(f.params.omega_b, 1.9e9 * TWO_PI);
    }

    #[test]
    fn negative_temperature_names_the_field() {
        let text = "{\"format_version\":1,\"kind\":\"hahn\",\"series\":[\n{\"temperature_k\":-0.05,\"points\":[]}]}";
        let e = decay_dataset_from_json(text, p()).unwrap_err();
        let Error::Schema { location, .. } = &e else { panic!("{e}") };
        assert!(location.contains("series[0].temperature_k") && location.contains("line 2"), "{location}");
    }

    #[test]
    fn missing_err_column_loads() {
        let text = r#"{"format_version":1,"kind":"hahn","device_label":"old","series":[
            {"temperature_k":0.05,"points":[{"delay_s":0,"amplitude_Vs":1e-9},{"delay_s":1e-7,"amplitude_Vs":9e-10}]}]}"#;
        let d = decay_dataset_from_json(text, p()).unwrap();
        assert!(d.series[0].points.iter().all(|pt| pt.err.is_none()));
    }

    #[test]
    fn schema_violations_are_reported() {
        let bad = [
            r#"{"format_version":2,"kind":"hahn","series":[]}"#,
            r#"{"format_version":1,"kind":"echo","series":[]}"#,
            r#"{"format_version":1,"kind":"hahn","series":[]}"#,
            r#"{"format_version":1,"kind":"stimulated","series":[{"temperature_k":0.05,"points":[]}]}"#,
            r#"{"format_version":1,"kind":"hahn","series":[{"temperature_k":0.05,"points":[],"extra":1}]}"#,
        ];
        for text in bad {
            assert!(matches!(decay_dataset_from_json(text, p()), Err(Error::Schema { .. })), "{text}");
        }
        let both = r#"{"variant":"base","gamma_sd0_over_2pi_hz":1,"gamma_sd0_rad_per_s":6,
            "omega_b_over_2pi_hz":1e9,"gamma1_b_over_2pi_hz":1,"gamma2_over_2pi_hz":1}"#;
        assert!(matches!(params_from_json(both, p()), Err(Error::Schema { .. })));
        let missing = r#"{"variant":"base","omega_b_over_2pi_hz":1e9,"gamma1_b_over_2pi_hz":1,"gamma2_over_2pi_hz":1}"#;
        let Err(Error::Schema { location, .. }) = params_from_json(missing, p()) else { panic!() };
        assert!(location.contains("gamma_sd0"));
    }

    fn trace_spec(phase: f64, noise: f64) -> SynthTraceSpec {
        SynthTraceSpec {
            dt: 1e-9,
            duration: 2e-6,
            amplitude: 1e-3,
            center: 1e-6,
            width: 1e-7,
            phase,
            noise_std_per_sample: noise,
            n_traces: 3,
            seed: 1,
        }
    }

    #[test]
    fn phase_places_echo_on_quadratures() {
        let on_i = generate_trace_set(&trace_spec(0.0, 0.0)).unwrap();
        assert!(on_i.iter().all(|t| t.q.iter().all(|&v| v == 0.0)));
        let on_q = generate_trace_set(&trace_spec(std::f64::consts::FRAC_PI_2, 0.0)).unwrap();
        assert!(on_q.iter().all(|t| t.i.iter().all(|&v| v.abs() < 1e-18)));
    }

    #[test]
    fn trace_set_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let spec = trace_spec(0.4, 1e-5);
        let traces = generate_trace_set(&spec).unwrap();
        let manifest = write_trace_set(dir.path(), &traces, Some(&spec)).unwrap();
        assert_eq!(read_trace_set(&manifest).unwrap(), traces);
        assert_eq!(read_trace_manifest(&manifest).unwrap().truth, Some(spec));
        let single = read_trace_csv(&dir.path().join("trace_0000.csv"), None).unwrap();
        assert_eq!(single.i, traces[0].i);
    }

    #[test]
    fn bad_csv_names_line_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("t.csv");
        fs::write(&f, "t_s,i_v,q_v\n0,1,2\n1e-9,x,2\n2e-9,1,2\n").unwrap();
        let Err(Error::Schema { location, .. }) = read_trace_csv(&f, None) else { panic!() };
        assert_eq!(location, "line 3, column i_v");
        fs::write(&f, "time,i,q\n0,1,2\n").unwrap();
        assert!(matches!(read_trace_csv(&f, None), Err(Error::Schema { .. })));
    }

    #[test]
    fn report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = Report::new("efficiency", serde_json::json!({"eta": 0.533}))
            .assume("epsilon_r", 2.5, "1")
            .assume("capacitance", 39e-15, "F");
        let path = dir.path().join("r.json");
        write_report(&path, &r).unwrap();
        assert_eq!(read_report(&path).unwrap(), r);
    }
}
