use rand::Rng;
use rand_distr::Exp1;

use super::{deterministic_average, substream, Estimate};
use crate::error::{Error, Result};

/// Flip-history average of the accumulated echo phase of a single telegraph
/// fluctuator. `tau_prime = 0` is the two-pulse (Hahn) sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelegraphConfig {
    /// Flip rate, 1/s.
    pub w: f64,
    /// Pulse spacing τ, s.
    pub tau: f64,
    /// Waiting time τ′ between the second and third pulse, s.
    pub tau_prime: f64,
    pub n_histories: u64,
    pub seed: u64,
}

impl TelegraphConfig {
    pub fn hahn(w: f64, tau: f64, n_histories: u64, seed: u64) -> Self {
        TelegraphConfig {
            w,
            tau,
            tau_prime: 0.0,
            n_histories,
            seed,
        }
    }

    pub fn stimulated(w: f64, tau: f64, tau_prime: f64, n_histories: u64, seed: u64) -> Self {
        TelegraphConfig {
            tau_prime,
            ..Self::hahn(w, tau, n_histories, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("w", self.w), ("tau", self.tau), ("tau_prime", self.tau_prime)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(
                    "flip_history_average",
                    format!("{name} must be finite and >= 0, got {v}"),
                ));
            }
        }
        if self.n_histories == 0 {
            return Err(Error::domain("flip_history_average", "n_histories must be >= 1"));
        }
        Ok(())
    }
}

/// Integrates h over a segment of length `len`, advancing `h` to the segment end.
pub(super) fn integrate_segment<R: Rng>(rng: &mut R, h: &mut f64, len: f64, w: f64) -> f64 {
    if w == 0.0 {
        return *h * len;
    }
    let mut t = 0.0;
    let mut acc = 0.0;
    loop {
        let dt: f64 = rng.sample::<f64, _>(Exp1) / w;
        if t + dt >= len {
            acc += *h * (len - t);
            return acc;
        }
        acc += *h * dt;
        t += dt;
        *h = -*h;
    }
}

fn one_history(cfg: &TelegraphConfig, index: u64) -> f64 {
    let mut rng = substream(cfg.seed, index);
    let mut h = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let first = integrate_segment(&mut rng, &mut h, cfg.tau, cfg.w);
    if cfg.tau_prime > 0.0 {
        // Only the sign at the end of the wait matters; the telegraph process
        // keeps its sign with probability (1 + e^(−2Wτ′))/2.
        let flip = -0.5 * (-2.0 * cfg.w * cfg.tau_prime).exp_m1();
        if rng.random::<f64>() < flip {
            h = -h;
        }
    }
    let second = integrate_segment(&mut rng, &mut h, cfg.tau, cfg.w);
    (first - second).abs()
}

/// Monte Carlo estimate of ⟨|∫₀^τ h − ∫_{τ+τ′}^{2τ+τ′} h|⟩ in seconds.
///
/// With `tau_prime = 0` this is the Hahn average α(2τ, W); otherwise the
/// stimulated-echo average β(τ, τ′, W). Flips are simulated event by event.
pub fn flip_history_average(cfg: &TelegraphConfig) -> Result<Estimate> {
    cfg.validate()?;
    Ok(deterministic_average(cfg.n_histories, |i| one_history(cfg, i)))
}
