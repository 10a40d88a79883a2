//! Analytic forward models for two- and three-pulse echo amplitudes under
//! spectral diffusion in the sudden-jump (telegraph) approximation.
//!
//! All rates are angular (rad/s). Values quoted in the literature as X/(2π)
//! must be multiplied by 2π before they reach this module; the file readers
//! in [`crate::io`] do that based on the `_over_2pi_hz` field suffix.

mod amplitude;
mod kernels;

use serde::{Deserialize, Serialize};

pub use amplitude::{
    hahn_amplitude, stimulated_amplitude, stretched_exponential, t1_of_model, t2_of_model,
    EchoModel, RatesAtTemperature, StimulatedDiffusionRate,
};
pub use kernels::{alpha_kernel, beta_kernel};

use crate::constants::{HBAR, K_B};
use crate::error::{Error, Result};
use crate::specfun;

/// Which intrinsic-decoherence law accompanies the spectral-diffusion term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelVariant {
    /// Temperature-independent Γ₂; Γ₁ = 2Γ₂.
    #[serde(rename = "base")]
    BaseIntrinsic,
    /// Γ₂(T) = W_ex·T/2 + Γ₂*, Γ₁(T) = W_ex·T + 2Γ₂*.
    #[serde(rename = "refined")]
    RefinedTemperatureDependent,
}

impl ModelVariant {
    pub fn label(self) -> &'static str {
        match self {
            ModelVariant::BaseIntrinsic => "base",
            ModelVariant::RefinedTemperatureDependent => "refined",
        }
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" | "base_intrinsic" => Ok(ModelVariant::BaseIntrinsic),
            "refined" | "refined_temperature_dependent" => {
                Ok(ModelVariant::RefinedTemperatureDependent)
            }
            other => Err(Error::Config(format!(
                "unknown model variant '{other}' (expected 'base' or 'refined')"
            ))),
        }
    }
}

/// Fitted rate set for one device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDiffusionParams {
    /// High-temperature spectral-diffusion rate Γ_sd⁰, rad/s.
    pub gamma_sd0: f64,
    /// Bath TLS angular frequency ω_B, rad/s.
    pub omega_b: f64,
    /// Bath TLS relaxation rate Γ₁^B, rad/s.
    pub gamma1_b: f64,
    /// Intrinsic dephasing Γ₂ (base variant only), rad/s.
    pub gamma2: Option<f64>,
    /// Temperature-independent part Γ₂* (refined variant only), rad/s.
    pub gamma2_star: Option<f64>,
    /// Linear-in-temperature relaxation slope W_ex (refined variant only), rad/(s·K).
    pub w_ex: Option<f64>,
}

impl SpectralDiffusionParams {
    pub fn base(gamma_sd0: f64, omega_b: f64, gamma1_b: f64, gamma2: f64) -> Self {
        SpectralDiffusionParams {
            gamma_sd0,
            omega_b,
            gamma1_b,
            gamma2: Some(gamma2),
            gamma2_star: None,
            w_ex: None,
        }
    }

    pub fn refined(gamma_sd0: f64, omega_b: f64, gamma1_b: f64, gamma2_star: f64, w_ex: f64) -> Self {
        SpectralDiffusionParams {
            gamma_sd0,
            omega_b,
            gamma1_b,
            gamma2: None,
            gamma2_star: Some(gamma2_star),
            w_ex: Some(w_ex),
        }
    }

    /// The variant implied by which optional fields are populated, if unambiguous.
    pub fn inferred_variant(&self) -> Option<ModelVariant> {
        match (self.gamma2, self.gamma2_star, self.w_ex) {
            (Some(_), None, None) => Some(ModelVariant::BaseIntrinsic),
            (None, Some(_), Some(_)) => Some(ModelVariant::RefinedTemperatureDependent),
            _ => None,
        }
    }

    /// Checks signs and that exactly the fields needed by `variant` are present.
    pub fn validate(&self, variant: ModelVariant) -> Result<()> {
        let check = |name: &str, v: f64| -> Result<()> {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::domain(
                    "SpectralDiffusionParams",
                    format!("{name} must be finite and >= 0, got {v}"),
                ));
            }
            Ok(())
        };
        check("gamma_sd0", self.gamma_sd0)?;
        check("gamma1_b", self.gamma1_b)?;
        if !(self.omega_b > 0.0 && self.omega_b.is_finite()) {
            return Err(Error::domain(
                "SpectralDiffusionParams",
                format!("omega_b must be > 0, got {}", self.omega_b),
            ));
        }
        match variant {
            ModelVariant::BaseIntrinsic => {
                let g2 = self.gamma2.ok_or_else(|| {
                    Error::domain("SpectralDiffusionParams", "base variant requires gamma2")
                })?;
                check("gamma2", g2)?;
                if self.gamma2_star.is_some() || self.w_ex.is_some() {
                    return Err(Error::domain(
                        "SpectralDiffusionParams",
                        "base variant must not carry gamma2_star or w_ex",
                    ));
                }
            }
            ModelVariant::RefinedTemperatureDependent => {
                let (g, w) = match (self.gamma2_star, self.w_ex) {
                    (Some(g), Some(w)) => (g, w),
                    _ => {
                        return Err(Error::domain(
                            "SpectralDiffusionParams",
                            "refined variant requires gamma2_star and w_ex",
                        ))
                    }
                };
                check("gamma2_star", g)?;
                check("w_ex", w)?;
                if self.gamma2.is_some() {
                    return Err(Error::domain(
                        "SpectralDiffusionParams",
                        "refined variant must not carry gamma2",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Rate sets reported for the measured devices, as angular rates.
pub mod presets {
    use super::SpectralDiffusionParams;
    use crate::constants::TWO_PI;

    fn khz(v: f64) -> f64 {
        TWO_PI * v * 1e3
    }

    fn ghz(v: f64) -> f64 {
        TWO_PI * v * 1e9
    }

    /// D2 with temperature-independent Γ₂.
    pub fn d2_base() -> SpectralDiffusionParams {
        SpectralDiffusionParams::base(khz(743.0), ghz(1.9), khz(146.0), khz(50.0))
    }

    /// D3 with temperature-independent Γ₂.
    pub fn d3_base() -> SpectralDiffusionParams {
        SpectralDiffusionParams::base(khz(831.0), ghz(2.0), khz(165.0), khz(52.0))
    }

    /// D2 with Γ₂(T) = W_ex·T/2 + Γ₂*.
    pub fn d2_refined() -> SpectralDiffusionParams {
        SpectralDiffusionParams::refined(khz(468.0), ghz(2.3), khz(161.0), khz(32.0), TWO_PI * 2.9e6)
    }

    /// D3 with Γ₂(T) = W_ex·T/2 + Γ₂*.
    pub fn d3_refined() -> SpectralDiffusionParams {
        SpectralDiffusionParams::refined(khz(586.0), ghz(2.4), khz(187.0), khz(33.0), TWO_PI * 3.0e6)
    }

    /// Reported bootstrap standard deviations for the base fits, in the
    /// order (Γ₂, Γ_sd⁰, Γ₁^B, ω_B), angular.
    pub fn d2_base_std() -> [f64; 4] {
        [khz(2.0), khz(87.0), khz(19.0), ghz(0.1)]
    }

    pub fn d3_base_std() -> [f64; 4] {
        [khz(2.0), khz(76.0), khz(17.0), ghz(0.1)]
    }
}

/// Energy level of a tunneling two-level system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlsLevel {
    /// Asymmetry Δ, rad/s.
    pub delta: f64,
    /// Tunneling splitting Δ₀, rad/s.
    pub delta0: f64,
    omega0: f64,
}

impl TlsLevel {
    pub fn new(delta: f64, delta0: f64) -> Result<Self> {
        if !(delta0 > 0.0) || !delta.is_finite() || !delta0.is_finite() {
            return Err(Error::domain(
                "TlsLevel::new",
                format!("need finite delta and delta0 > 0, got ({delta}, {delta0})"),
            ));
        }
        Ok(TlsLevel {
            delta,
            delta0,
            omega0: delta.hypot(delta0),
        })
    }

    /// Resonance √(Δ² + Δ₀²), rad/s.
    pub fn omega0(&self) -> f64 {
        self.omega0
    }
}

fn check_temperature(func: &'static str, t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(func, format!("temperature must be finite and > 0, got {t}")));
    }
    Ok(())
}

/// ħω_B / (2 k_B T).
pub fn thermal_argument(omega_b: f64, t: f64) -> f64 {
    HBAR * omega_b / (2.0 * K_B * t)
}

/// Γ_sd(T) = Γ_sd⁰ · sech²(ħω_B / 2k_BT).
pub fn gamma_sd(params: &SpectralDiffusionParams, t: f64) -> Result<f64> {
    check_temperature("gamma_sd", t)?;
    Ok(params.gamma_sd0 * specfun::sech2(thermal_argument(params.omega_b, t)))
}

/// Γ_sd as T → ∞.
pub fn gamma_sd_high_temperature_limit(params: &SpectralDiffusionParams) -> f64 {
    params.gamma_sd0
}

/// Γ_sd as T → 0⁺: the bath is frozen.
pub fn gamma_sd_zero_temperature_limit(_params: &SpectralDiffusionParams) -> f64 {
    0.0
}

/// Bath jump rate W(T) = Γ₁^B · coth(ħω_B / 2k_BT).
pub fn jump_rate(params: &SpectralDiffusionParams, t: f64) -> Result<f64> {
    check_temperature("jump_rate", t)?;
    Ok(params.gamma1_b * specfun::coth(thermal_argument(params.omega_b, t))?)
}

/// W as T → 0⁺.
pub fn jump_rate_zero_temperature_limit(params: &SpectralDiffusionParams) -> f64 {
    params.gamma1_b
}

/// Intrinsic dephasing rate Γ₂(T) for the chosen variant.
pub fn intrinsic_dephasing(
    params: &SpectralDiffusionParams,
    variant: ModelVariant,
    t: f64,
) -> Result<f64> {
    check_temperature("intrinsic_dephasing", t)?;
    intrinsic_dephasing_unchecked(params, variant, t)
}

pub(crate) fn intrinsic_dephasing_unchecked(
    params: &SpectralDiffusionParams,
    variant: ModelVariant,
    t: f64,
) -> Result<f64> {
    match variant {
        ModelVariant::BaseIntrinsic => params
            .gamma2
            .ok_or_else(|| Error::domain("intrinsic_dephasing", "base variant requires gamma2")),
        ModelVariant::RefinedTemperatureDependent => match (params.gamma2_star, params.w_ex) {
            (Some(g), Some(w)) => Ok(0.5 * w * t + g),
            _ => Err(Error::domain(
                "intrinsic_dephasing",
                "refined variant requires gamma2_star and w_ex",
            )),
        },
    }
}

/// Intrinsic energy relaxation Γ₁(T) = 2Γ₂(T).
pub fn intrinsic_relaxation(
    params: &SpectralDiffusionParams,
    variant: ModelVariant,
    t: f64,
) -> Result<f64> {
    Ok(2.0 * intrinsic_dephasing(params, variant, t)?)
}
