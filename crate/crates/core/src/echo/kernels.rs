//! Flip-history averages of the accumulated echo phase.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::specfun::{i0_scaled_raw, i1_scaled_raw, kernel_scaled_raw};

fn check(func: &'static str, name: &str, v: f64, allow_inf: bool) -> Result<()> {
    if v.is_nan() || v < 0.0 || (!allow_inf && v.is_infinite()) {
        return Err(Error::domain(func, format!("{name} must be >= 0, got {v}")));
    }
    Ok(())
}

/// α(2τ, W): mean |∫₀^{2τ} s(t) h(t) dt| over telegraph histories h with
/// flip rate `w`, where s flips sign at τ.
///
/// α = 2τ·e^(−2Wτ)[I₁(2Wτ) + (π/2)(I₁L₀ − I₀L₁)(2Wτ)], evaluated in
/// exp-scaled form. Units follow `tau`.
pub fn alpha_kernel(tau: f64, w: f64) -> Result<f64> {
    check("alpha_kernel", "tau", tau, false)?;
    check("alpha_kernel", "w", w, false)?;
    Ok(alpha_raw(tau, w))
}

pub(crate) fn alpha_raw(tau: f64, w: f64) -> f64 {
    if tau == 0.0 || w == 0.0 {
        return 0.0;
    }
    let x = 2.0 * w * tau;
    2.0 * tau * (i1_scaled_raw(x) + FRAC_PI_2 * kernel_scaled_raw(x))
}

/// β(τ, τ′, W): the stimulated-echo counterpart of α, with no precession
/// during the waiting time τ′. `tau_prime` may be `+inf`.
pub fn beta_kernel(tau: f64, tau_prime: f64, w: f64) -> Result<f64> {
    check("beta_kernel", "tau", tau, false)?;
    check("beta_kernel", "tau_prime", tau_prime, true)?;
    check("beta_kernel", "w", w, false)?;
    Ok(beta_raw(tau, tau_prime, w))
}

pub(crate) fn beta_raw(tau: f64, tau_prime: f64, w: f64) -> f64 {
    if tau == 0.0 || w == 0.0 {
        return 0.0;
    }
    let x = 2.0 * w * tau;
    let y = -2.0 * w * tau_prime;
    let decorrelated = -y.exp_m1();
    let retained = 1.0 + y.exp();
    tau * (i0_scaled_raw(x) + i1_scaled_raw(x)) * decorrelated + 0.5 * alpha_raw(tau, w) * retained
}

/// β(τ, τ′, W) − β(τ, 0, W): the part of the stimulated diffusion exponent
/// that builds up during the waiting time.
pub(crate) fn beta_excess_raw(tau: f64, tau_prime: f64, w: f64) -> f64 {
    if tau == 0.0 || w == 0.0 {
        return 0.0;
    }
    let x = 2.0 * w * tau;
    let decorrelated = -(-2.0 * w * tau_prime).exp_m1();
    decorrelated * (tau * (i0_scaled_raw(x) + i1_scaled_raw(x)) - 0.5 * alpha_raw(tau, w))
}
