use rand::Rng;
use rand_distr::LogNormal;

use super::{deterministic_average, substream};
use crate::error::{Error, Result};
use crate::loss::rabi_rate;

/// Two-pulse echo driven with pulses of equal length `theta` and powers
/// `pulse1_power`, `pulse2_power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiConfig {
    /// Mean radiative rate Γ_R, 1/s.
    pub gamma_r: f64,
    /// W.
    pub pulse1_power: f64,
    /// W.
    pub pulse2_power: f64,
    /// Pulse length, s.
    pub theta: f64,
    /// Drive frequency, rad/s.
    pub omega_d: f64,
    /// Relative standard deviation of Γ_R across the ensemble (log-normal).
    pub coupling_spread: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl RabiConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("gamma_r", self.gamma_r, self.gamma_r >= 0.0),
            ("pulse1_power", self.pulse1_power, self.pulse1_power >= 0.0),
            ("pulse2_power", self.pulse2_power, self.pulse2_power >= 0.0),
            ("theta", self.theta, self.theta > 0.0),
            ("omega_d", self.omega_d, self.omega_d > 0.0),
            ("coupling_spread", self.coupling_spread, self.coupling_spread >= 0.0),
        ];
        for (name, v, ok) in checks {
            if !(v.is_finite() && ok) {
                return Err(Error::domain("RabiConfig", format!("invalid {name}: {v}")));
            }
        }
        if self.n_samples == 0 {
            return Err(Error::domain("RabiConfig", "n_samples must be >= 1"));
        }
        Ok(())
    }

    fn envelope(&self, gamma_r: f64) -> Result<f64> {
        let w1 = rabi_rate(gamma_r, self.pulse1_power, self.omega_d)?;
        let w2 = rabi_rate(gamma_r, self.pulse2_power, self.omega_d)?;
        Ok((w1 * self.theta).sin() * (0.5 * w2 * self.theta).sin().powi(2))
    }
}

/// Ensemble-averaged envelope sin(Ω₁θ)·sin²(Ω₂θ/2) with Ω = 2√(Γ_R·P/(ħω_d)).
///
/// Γ_R is log-normal with mean `gamma_r` and relative spread `coupling_spread`.
/// With zero spread the envelope is evaluated once, without sampling.
pub fn two_pulse_rabi_amplitude(cfg: &RabiConfig) -> Result<f64> {
    cfg.validate()?;
    if cfg.coupling_spread == 0.0 || cfg.gamma_r == 0.0 {
        return cfg.envelope(cfg.gamma_r);
    }
    let sigma = cfg.coupling_spread.mul_add(cfg.coupling_spread, 1.0).ln().sqrt();
    let dist = LogNormal::new(-0.5 * sigma * sigma, sigma)
        .map_err(|e| Error::domain("two_pulse_rabi_amplitude", e.to_string()))?;
    let est = deterministic_average(cfg.n_samples, |i| {
        let scale: f64 = substream(cfg.seed, i).sample(dist);
        cfg.envelope(cfg.gamma_r * scale).unwrap_or(f64::NAN)
    });
    Ok(est.mean)
}
