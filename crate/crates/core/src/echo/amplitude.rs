use serde::{Deserialize, Serialize};

use super::kernels::{alpha_raw, beta_excess_raw, beta_raw};
use super::{
    check_temperature, gamma_sd, intrinsic_dephasing_unchecked, jump_rate, ModelVariant,
    SpectralDiffusionParams,
};
use crate::error::{Error, Result};
use crate::numeric::roots::{bisect_secant, grow_bracket};

/// Lower end of the bracket used when solving for T₁ and T₂, seconds.
pub const ROOT_BRACKET_START: f64 = 1e-12;
/// Upper end of the bracket used when solving for T₁ and T₂, seconds.
pub const ROOT_BRACKET_LIMIT: f64 = 1.0;
pub const ROOT_REL_TOL: f64 = 1e-9;

/// Which diffusion rate multiplies β in the stimulated-echo exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StimulatedDiffusionRate {
    /// Γ_sd(T), the same rate that multiplies α in the two-pulse model.
    #[default]
    AtTemperature,
    /// Γ_sd⁰ taken literally, independent of temperature.
    HighTemperatureLimit,
}

/// Every temperature-dependent rate entering the echo models, evaluated once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatesAtTemperature {
    /// Intrinsic dephasing Γ₂(T), rad/s.
    pub gamma2: f64,
    /// Intrinsic relaxation Γ₁(T) = 2Γ₂(T), rad/s.
    pub gamma1: f64,
    /// Γ_sd(T), rad/s.
    pub gamma_sd: f64,
    /// Rate multiplying β in the stimulated exponent.
    pub gamma_sd_stimulated: f64,
    /// Bath jump rate W(T), 1/s.
    pub w: f64,
}

impl RatesAtTemperature {
    /// Exponent 2Γ₂τ + Γ_sd·α(2τ, W) of the two-pulse echo at delay 2τ.
    pub fn hahn_exponent(&self, tau: f64) -> f64 {
        2.0 * self.gamma2 * tau + self.gamma_sd * alpha_raw(tau, self.w)
    }

    /// Exponent Γ₁τ′ + Γ·β(τ, τ′, W) of the three-pulse echo.
    pub fn stimulated_exponent(&self, tau: f64, tau_prime: f64) -> f64 {
        self.gamma1 * tau_prime + self.gamma_sd_stimulated * beta_raw(tau, tau_prime, self.w)
    }

    /// Stimulated exponent relative to its value at τ′ = 0.
    pub fn stimulated_excess_exponent(&self, tau: f64, tau_prime: f64) -> f64 {
        self.gamma1 * tau_prime + self.gamma_sd_stimulated * beta_excess_raw(tau, tau_prime, self.w)
    }
}

/// A parameter set bound to a model variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoModel {
    pub params: SpectralDiffusionParams,
    pub variant: ModelVariant,
    pub stimulated_rate: StimulatedDiffusionRate,
}

impl EchoModel {
    pub fn new(params: SpectralDiffusionParams, variant: ModelVariant) -> Result<Self> {
        params.validate(variant)?;
        Ok(EchoModel {
            params,
            variant,
            stimulated_rate: StimulatedDiffusionRate::default(),
        })
    }

    pub fn with_stimulated_rate(mut self, rate: StimulatedDiffusionRate) -> Self {
        self.stimulated_rate = rate;
        self
    }

    pub fn rates(&self, t: f64) -> Result<RatesAtTemperature> {
        check_temperature("EchoModel::rates", t)?;
        let gamma2 = intrinsic_dephasing_unchecked(&self.params, self.variant, t)?;
        let gsd = gamma_sd(&self.params, t)?;
        Ok(RatesAtTemperature {
            gamma2,
            gamma1: 2.0 * gamma2,
            gamma_sd: gsd,
            gamma_sd_stimulated: match self.stimulated_rate {
                StimulatedDiffusionRate::AtTemperature => gsd,
                StimulatedDiffusionRate::HighTemperatureLimit => self.params.gamma_sd0,
            },
            w: jump_rate(&self.params, t)?,
        })
    }

    /// Rates in the T → 0⁺ limit: frozen bath, W = Γ₁^B, Γ₂ at its
    /// temperature-independent value.
    pub fn zero_temperature_rates(&self) -> RatesAtTemperature {
        let gamma2 = match self.variant {
            ModelVariant::BaseIntrinsic => self.params.gamma2.unwrap_or(0.0),
            ModelVariant::RefinedTemperatureDependent => self.params.gamma2_star.unwrap_or(0.0),
        };
        RatesAtTemperature {
            gamma2,
            gamma1: 2.0 * gamma2,
            gamma_sd: 0.0,
            gamma_sd_stimulated: match self.stimulated_rate {
                StimulatedDiffusionRate::AtTemperature => 0.0,
                StimulatedDiffusionRate::HighTemperatureLimit => self.params.gamma_sd0,
            },
            w: self.params.gamma1_b,
        }
    }

    /// Two-pulse echo amplitude at delay 2τ.
    pub fn hahn_amplitude(&self, a0: f64, tau: f64, t: f64) -> Result<f64> {
        check_delay("hahn_amplitude", "tau", tau)?;
        Ok(a0 * (-self.rates(t)?.hahn_exponent(tau)).exp())
    }

    /// Three-pulse (stimulated) echo amplitude.
    pub fn stimulated_amplitude(&self, a0se: f64, tau: f64, tau_prime: f64, t: f64) -> Result<f64> {
        check_delay("stimulated_amplitude", "tau", tau)?;
        check_delay("stimulated_amplitude", "tau_prime", tau_prime)?;
        Ok(a0se * (-self.rates(t)?.stimulated_exponent(tau, tau_prime)).exp())
    }

    /// The full echo delay 2τ at which the two-pulse amplitude has fallen to A₀/e.
    pub fn t2(&self, t: f64) -> Result<f64> {
        let rates = self.rates(t)?;
        let f = |two_tau: f64| Ok(rates.hahn_exponent(0.5 * two_tau) - 1.0);
        let (lo, hi) = grow_bracket("t2_of_model", f, ROOT_BRACKET_START, ROOT_BRACKET_LIMIT, 2.0)?;
        bisect_secant("t2_of_model", f, lo, hi, ROOT_REL_TOL)
    }

    /// The waiting time τ′ at which the stimulated amplitude has fallen by 1/e
    /// from its τ′ = 0 value.
    pub fn t1(&self, tau: f64, t: f64) -> Result<f64> {
        check_delay("t1_of_model", "tau", tau)?;
        let rates = self.rates(t)?;
        let f = |tp: f64| Ok(rates.stimulated_excess_exponent(tau, tp) - 1.0);
        let (lo, hi) = grow_bracket("t1_of_model", f, ROOT_BRACKET_START, ROOT_BRACKET_LIMIT, 2.0)?;
        bisect_secant("t1_of_model", f, lo, hi, ROOT_REL_TOL)
    }
}

fn check_delay(func: &'static str, name: &str, v: f64) -> Result<()> {
    if v.is_nan() || v < 0.0 || v.is_infinite() {
        return Err(Error::domain(func, format!("{name} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

/// A(2τ, T) for the given parameters.
pub fn hahn_amplitude(
    params: &SpectralDiffusionParams,
    variant: ModelVariant,
    a0: f64,
    tau: f64,
    t: f64,
) -> Result<f64> {
    EchoModel::new(*params, variant)?.hahn_amplitude(a0, tau, t)
}

/// A^se(τ′, T) with Γ_sd(T) multiplying β.
pub fn stimulated_amplitude(
    params: &SpectralDiffusionParams,
    variant: ModelVariant,
    a0se: f64,
    tau: f64,
    tau_prime: f64,
    t: f64,
) -> Result<f64> {
    EchoModel::new(*params, variant)?.stimulated_amplitude(a0se, tau, tau_prime, t)
}

/// A·exp(−(t/T₁)^p).
pub fn stretched_exponential(a: f64, t: f64, t1: f64, p: f64) -> Result<f64> {
    if !(t1 > 0.0) || !t1.is_finite() {
        return Err(Error::domain("stretched_exponential", format!("T1 must be > 0, got {t1}")));
    }
    if !(p > 0.0 && p <= 2.0) {
        return Err(Error::domain("stretched_exponential", format!("p must lie in (0, 2], got {p}")));
    }
    if t.is_nan() || t < 0.0 {
        return Err(Error::domain("stretched_exponential", format!("t must be >= 0, got {t}")));
    }
    Ok(a * (-(t / t1).powf(p)).exp())
}

/// Model T₂: the delay 2τ where A(2τ, T)/A₀ = 1/e.
pub fn t2_of_model(params: &SpectralDiffusionParams, variant: ModelVariant, t: f64) -> Result<f64> {
    EchoModel::new(*params, variant)?.t2(t)
}

/// Model T₁ at fixed first-pulse spacing τ.
pub fn t1_of_model(
    params: &SpectralDiffusionParams,
    variant: ModelVariant,
    tau: f64,
    t: f64,
) -> Result<f64> {
    EchoModel::new(*params, variant)?.t1(tau, t)
}
