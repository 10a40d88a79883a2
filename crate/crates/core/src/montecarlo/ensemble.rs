use std::f64::consts::PI;

use rand::Rng;

use super::telegraph::integrate_segment;
use super::{deterministic_average, substream, Estimate};
use crate::constants::HBAR;
use crate::error::{Error, Result};

/// Default excluded-volume radius around the probed dipole, m.
pub const DEFAULT_R_MIN: f64 = 1e-9;

/// A randomized shell of bath dipoles around one probed dipole.
///
/// Positions are uniform in volume between `r_min` and `r_max`; the angle to
/// the fixed field axis has cos θ uniform in [−1, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathEnsemble {
    /// Bath density, 1/m³.
    pub c_b: f64,
    /// Probed dipole moment, C·m.
    pub d_a: f64,
    /// Bath dipole moment, C·m.
    pub d_b: f64,
    /// Absolute permittivity, F/m.
    pub epsilon: f64,
    pub n_b: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub seed: u64,
}

impl BathEnsemble {
    /// Builds a shell holding `n_b` dipoles at density `c_b` outside `r_min`.
    pub fn new(c_b: f64, d_a: f64, d_b: f64, epsilon: f64, n_b: usize, r_min: f64, seed: u64) -> Result<Self> {
        let r_max = if c_b > 0.0 {
            (r_min.powi(3) + 3.0 * n_b as f64 / (4.0 * PI * c_b)).cbrt()
        } else {
            f64::INFINITY
        };
        let bath = BathEnsemble {
            c_b,
            d_a,
            d_b,
            epsilon,
            n_b,
            r_min,
            r_max,
            seed,
        };
        bath.validate()?;
        Ok(bath)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_a", self.d_a),
            ("d_b", self.d_b),
            ("epsilon", self.epsilon),
            ("r_min", self.r_min),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain("BathEnsemble", format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.c_b.is_finite() && self.c_b >= 0.0) {
            return Err(Error::domain("BathEnsemble", format!("c_b must be >= 0, got {}", self.c_b)));
        }
        if !(self.r_max > self.r_min) {
            return Err(Error::domain("BathEnsemble", "r_max must exceed r_min"));
        }
        Ok(())
    }

    /// Dipolar coupling scale d_A·d_B/(4πεħ), rad·m³/s.
    pub fn coupling_scale(&self) -> f64 {
        self.d_a * self.d_b / (4.0 * PI * self.epsilon * HBAR)
    }

    /// Mean-field diffusion rate 2π·d_A·d_B·c_B/(9√3·ħε), rad/s.
    pub fn mean_field_gamma_sd(&self) -> f64 {
        2.0 * PI * self.d_a * self.d_b * self.c_b / (9.0 * 3f64.sqrt() * HBAR * self.epsilon)
    }
}

fn one_realization(bath: &BathEnsemble, w: f64, tau: f64, index: u64) -> f64 {
    let mut rng = substream(bath.seed, index);
    let k = bath.coupling_scale();
    let (u_lo, u_span) = (bath.r_min.powi(3), bath.r_max.powi(3) - bath.r_min.powi(3));
    let mut phase = 0.0;
    for _ in 0..bath.n_b {
        let r3 = u_lo + u_span * rng.random::<f64>();
        let mu: f64 = 2.0 * rng.random::<f64>() - 1.0;
        let mut h = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let first = integrate_segment(&mut rng, &mut h, tau, w);
        let second = integrate_segment(&mut rng, &mut h, tau, w);
        phase += k * (1.0 - 3.0 * mu * mu) / r3 * (first - second);
    }
    phase.cos()
}

/// Echo amplitude Re⟨e^{iΦ}⟩ of a probed dipole whose bath dipoles flip at
/// rate `w`, averaged over `n_realizations` bath draws and flip histories.
pub fn ensemble_echo(bath: &BathEnsemble, w: f64, tau: f64, n_realizations: u64) -> Result<Estimate> {
    bath.validate()?;
    if !(w.is_finite() && w >= 0.0 && tau.is_finite() && tau >= 0.0) {
        return Err(Error::domain("ensemble_echo", "w and tau must be finite and >= 0"));
    }
    if n_realizations == 0 {
        return Err(Error::domain("ensemble_echo", "n_realizations must be >= 1"));
    }
    if bath.c_b == 0.0 || bath.n_b == 0 {
        return Ok(Estimate {
            mean: 1.0,
            std_error: 0.0,
        });
    }
    Ok(deterministic_average(n_realizations, |i| one_realization(bath, w, tau, i)))
}
