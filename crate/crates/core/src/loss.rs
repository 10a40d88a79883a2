//! Material and amplifier figures of merit derived from echo parameters:
//! loss tangent, dipole moment, TLS density, per-cell attenuation, the cell
//! noise cascade and the resulting quantum efficiency.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{si_to_debye, EPSILON0, HBAR, TWO_PI};
use crate::error::{Error, Result};

/// Default relative permittivity of the junction dielectric (assumed).
pub const DEFAULT_EPSILON_R: f64 = 2.5;
/// Default shunt capacitance per cell, F (assumed).
pub const DEFAULT_CAPACITANCE: f64 = 39e-15;
/// Default line impedance, Ω (assumed).
pub const DEFAULT_Z0: f64 = 50.0;
/// Default evaluation frequency, rad/s (assumed).
pub const DEFAULT_OMEGA: f64 = TWO_PI * 7e9;
/// Capacitance range for the efficiency sensitivity band, F.
pub const CAPACITANCE_BAND: (f64, f64) = (20e-15, 60e-15);
/// Largest c·ω·Z₀·tan δ for which the linearized attenuation is accepted.
pub const ATTENUATION_VALIDITY_LIMIT: f64 = 0.1;

fn require(func: &'static str, name: &str, v: f64, ok: bool) -> Result<()> {
    if v.is_finite() && ok {
        Ok(())
    } else {
        Err(Error::domain(func, format!("invalid {name}: {v}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DielectricSpec {
    pub epsilon_r: f64,
    /// Ratio of the bath spectral width γ_B to ω_B.
    pub gamma_b_over_omega_b: f64,
}

impl Default for DielectricSpec {
    fn default() -> Self {
        DielectricSpec {
            epsilon_r: DEFAULT_EPSILON_R,
            gamma_b_over_omega_b: 1.0,
        }
    }
}

impl DielectricSpec {
    pub fn validate(&self) -> Result<()> {
        require("DielectricSpec", "epsilon_r", self.epsilon_r, self.epsilon_r >= 1.0)?;
        require(
            "DielectricSpec",
            "gamma_b_over_omega_b",
            self.gamma_b_over_omega_b,
            self.gamma_b_over_omega_b > 0.0,
        )
    }

    /// Absolute permittivity, F/m.
    pub fn permittivity(&self) -> f64 {
        self.epsilon_r * EPSILON0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplifierChainSpec {
    pub n_cells: u32,
    /// Net power gain of the whole chain.
    pub total_gain: f64,
    /// Shunt capacitance per cell, F.
    pub capacitance: f64,
    /// Ω.
    pub z0: f64,
    /// rad/s.
    pub omega: f64,
    /// Vacuum noise, photons.
    pub quantum_noise: f64,
}

impl Default for AmplifierChainSpec {
    fn default() -> Self {
        AmplifierChainSpec {
            n_cells: 2037,
            total_gain: 120.3,
            capacitance: DEFAULT_CAPACITANCE,
            z0: DEFAULT_Z0,
            omega: DEFAULT_OMEGA,
            quantum_noise: 0.5,
        }
    }
}

impl AmplifierChainSpec {
    pub fn validate(&self) -> Result<()> {
        let f = "AmplifierChainSpec";
        if self.n_cells == 0 {
            return Err(Error::domain(f, "n_cells must be >= 1"));
        }
        require(f, "total_gain", self.total_gain, self.total_gain >= 1.0)?;
        require(f, "capacitance", self.capacitance, self.capacitance > 0.0)?;
        require(f, "z0", self.z0, self.z0 > 0.0)?;
        require(f, "omega", self.omega, self.omega > 0.0)?;
        require(f, "quantum_noise", self.quantum_noise, self.quantum_noise >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoCalibration {
    /// Drive power at the device, W.
    pub p_in: f64,
    /// rad/s.
    pub omega_d: f64,
    /// Pulse length, s.
    pub theta: f64,
    /// Dielectric volume, m³.
    pub volume: f64,
    /// Emitted echo amplitude, √(photons/s).
    pub alpha_out: f64,
    /// Driving field per √W of input power, (V/m)/√W.
    pub field_per_sqrt_watt: f64,
}

impl EchoCalibration {
    /// Driving field E_d at `p_in`, V/m.
    pub fn e_field(&self) -> f64 {
        self.field_per_sqrt_watt * self.p_in.sqrt()
    }

    /// Probed bandwidth γ_A = 2π/θ, rad/s.
    pub fn gamma_a(&self) -> f64 {
        TWO_PI / self.theta
    }
}

/// tan δ = 6√3π·Γ_sd⁰/γ_B with γ_B = `ratio`·ω_B.
pub fn tan_delta_from_spectral_diffusion(gamma_sd0: f64, omega_b: f64, ratio: f64) -> Result<f64> {
    let f = "tan_delta_from_spectral_diffusion";
    require(f, "gamma_sd0", gamma_sd0, gamma_sd0 >= 0.0)?;
    require(f, "omega_b", omega_b, omega_b > 0.0)?;
    require(f, "ratio", ratio, ratio > 0.0)?;
    Ok(6.0 * 3f64.sqrt() * PI * gamma_sd0 / (ratio * omega_b))
}

/// tan δ = (4π²/3ε)·N₀·d_A², with N₀ in 1/(J·m³) and d_A in C·m.
pub fn tan_delta_from_density(n0: f64, d_a: f64, dielectric: &DielectricSpec) -> Result<f64> {
    let f = "tan_delta_from_density";
    require(f, "n0", n0, n0 >= 0.0)?;
    require(f, "d_a", d_a, d_a >= 0.0)?;
    dielectric.validate()?;
    Ok(4.0 * PI * PI / (3.0 * dielectric.permittivity()) * n0 * d_a * d_a)
}

/// Rabi frequency Ω = 2√(Γ_R·P_in/(ħω_d)), rad/s.
pub fn rabi_rate(gamma_r: f64, p_in: f64, omega_d: f64) -> Result<f64> {
    let f = "rabi_rate";
    require(f, "gamma_r", gamma_r, gamma_r >= 0.0)?;
    require(f, "p_in", p_in, p_in >= 0.0)?;
    require(f, "omega_d", omega_d, omega_d > 0.0)?;
    Ok(2.0 * (gamma_r * p_in / (HBAR * omega_d)).sqrt())
}

/// Radiative rate Γ_R that makes a pulse of length `theta` at `p_in` a π pulse.
pub fn gamma_r_from_pi_pulse(theta: f64, p_in: f64, omega_d: f64) -> Result<f64> {
    let f = "gamma_r_from_pi_pulse";
    require(f, "theta", theta, theta > 0.0)?;
    require(f, "p_in", p_in, p_in > 0.0)?;
    require(f, "omega_d", omega_d, omega_d > 0.0)?;
    Ok((PI / theta).powi(2) * HBAR * omega_d / (4.0 * p_in))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dipole {
    /// C·m.
    pub si: f64,
    pub debye: f64,
}

/// d_A = ħΩ/E_d.
pub fn dipole_from_rabi(omega_rabi: f64, e_field: f64) -> Result<Dipole> {
    require("dipole_from_rabi", "omega_rabi", omega_rabi, omega_rabi >= 0.0)?;
    require("dipole_from_rabi", "e_field", e_field, e_field > 0.0)?;
    let si = HBAR * omega_rabi / e_field;
    Ok(Dipole {
        si,
        debye: si_to_debye(si),
    })
}

/// N₀ = α_out/(V·γ_A·√Γ_R), 1/(J·m³).
pub fn density_from_echo(cal: &EchoCalibration, gamma_r: f64) -> Result<f64> {
    let f = "density_from_echo";
    require(f, "alpha_out", cal.alpha_out, cal.alpha_out >= 0.0)?;
    require(f, "volume", cal.volume, cal.volume > 0.0)?;
    require(f, "theta", cal.theta, cal.theta > 0.0)?;
    require(f, "gamma_r", gamma_r, gamma_r > 0.0)?;
    Ok(cal.alpha_out / (cal.volume * cal.gamma_a() * gamma_r.sqrt()))
}

/// Per-cell amplitude transmission a ≈ 1 − c·ω·Z₀·tan δ.
pub fn cell_attenuation(chain: &AmplifierChainSpec, tan_delta: f64) -> Result<f64> {
    chain.validate()?;
    require("cell_attenuation", "tan_delta", tan_delta, tan_delta >= 0.0)?;
    let x = chain.capacitance * chain.omega * chain.z0 * tan_delta;
    if x >= ATTENUATION_VALIDITY_LIMIT {
        return Err(Error::Validity(format!(
            "c·ω·Z₀·tan δ = {x:.4} is not small (limit {ATTENUATION_VALIDITY_LIMIT})"
        )));
    }
    Ok(1.0 - x)
}

/// η = (a·g − 1)/(g − 1).
pub fn quantum_efficiency(a: f64, g: f64) -> Result<f64> {
    let f = "quantum_efficiency";
    require(f, "g", g, g > 1.0)?;
    require(f, "a", a, a > 0.0 && a <= 1.0)?;
    if a * g <= 1.0 {
        return Err(Error::domain(
            f,
            format!("a·g = {} <= 1: net-lossy cell, efficiency undefined", a * g),
        ));
    }
    Ok((a * g - 1.0) / (g - 1.0))
}

/// Per-cell power gain g = G^(1/n).
pub fn per_cell_gain(chain: &AmplifierChainSpec) -> Result<f64> {
    chain.validate()?;
    Ok((chain.total_gain.ln() / chain.n_cells as f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeResult {
    /// Output noise from the closed form, photons.
    pub closed_form: f64,
    /// Output noise from stepping through every cell, photons.
    pub iterated: f64,
    /// Net transmission T = (g·a)^n.
    pub net_gain: f64,
}

/// Output noise of `chain.n_cells` identical cells with attenuation `a` and
/// gain `g`, starting from `n_input` photons.
pub fn noise_cascade(chain: &AmplifierChainSpec, a: f64, g: f64, n_input: f64) -> Result<CascadeResult> {
    chain.validate()?;
    let f = "noise_cascade";
    require(f, "a", a, a > 0.0 && a <= 1.0)?;
    require(f, "g", g, g >= 1.0)?;
    require(f, "n_input", n_input, n_input >= 0.0)?;
    let nq = chain.quantum_noise;
    let n = chain.n_cells;
    let t = g * a;
    let chi = (2.0 * g - t - 1.0) * nq;

    let mut iterated = n_input;
    for _ in 0..n {
        iterated = t * iterated + g * (1.0 - a) * nq + (g - 1.0) * nq;
    }

    let tm1 = t - 1.0;
    let log_t = tm1.ln_1p();
    let net_gain = (n as f64 * log_t).exp();
    let geometric = if tm1 == 0.0 {
        n as f64
    } else {
        (n as f64 * log_t).exp_m1() / tm1
    };
    Ok(CascadeResult {
        closed_form: net_gain * n_input + chi * geometric,
        iterated,
        net_gain,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyBand {
    pub capacitance_min: f64,
    pub capacitance_max: f64,
    /// η at the smallest capacitance (highest efficiency); `None` if the cell is net lossy.
    pub eta_at_min: Option<f64>,
    pub eta_at_max: Option<f64>,
}

/// η at the ends of a capacitance range with everything else fixed.
pub fn efficiency_band(chain: &AmplifierChainSpec, tan_delta: f64, range: (f64, f64)) -> Result<EfficiencyBand> {
    let g = per_cell_gain(chain)?;
    let eta_at = |c: f64| -> Result<Option<f64>> {
        let spec = AmplifierChainSpec {
            capacitance: c,
            ..*chain
        };
        let a = cell_attenuation(&spec, tan_delta)?;
        Ok(quantum_efficiency(a, g).ok())
    };
    Ok(EfficiencyBand {
        capacitance_min: range.0,
        capacitance_max: range.1,
        eta_at_min: eta_at(range.0)?,
        eta_at_max: eta_at(range.1)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{angular_from_hz, dbm_to_watts, debye_to_si};
    use proptest::prelude::*;

    #[test]
    fn tan_delta_from_table_values() {
        let d2 = tan_delta_from_spectral_diffusion(angular_from_hz(743e3), angular_from_hz(1.9e9), 1.0).unwrap();
        let d3 = tan_delta_from_spectral_diffusion(angular_from_hz(831e3), angular_from_hz(2.0e9), 1.0).unwrap();
        assert!((d2 - 0.0128).abs() < 5e-5, "{d2}");
        assert!((d3 - 0.0136).abs() < 5e-5, "{d3}");
        assert!((d2 - 0.012).abs() <= 0.001 && (d3 - 0.014).abs() <= 0.001);
        assert_eq!(tan_delta_from_spectral_diffusion(0.0, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn tan_delta_from_density_example() {
        let spec = DielectricSpec::default();
        let d = debye_to_si(3.0);
        let td = tan_delta_from_density(3e43, d, &spec).unwrap();
        assert!((td - 1.79e-3).abs() < 0.01e-3, "{td}");
        let doubled = tan_delta_from_density(3e43, 2.0 * d, &spec).unwrap();
        assert!((doubled / td - 4.0).abs() < 1e-12);
        assert_eq!(tan_delta_from_density(0.0, d, &spec).unwrap(), 0.0);
    }

    #[test]
    fn rabi_rate_cases() {
        assert_eq!(rabi_rate(1.0, 0.0, 1.0).unwrap(), 0.0);
        assert!((rabi_rate(1.0, HBAR * 3.0, 3.0).unwrap() - 2.0).abs() < 1e-12);
        let p = dbm_to_watts(-81.0);
        let gr = gamma_r_from_pi_pulse(100e-9, p, angular_from_hz(7e9)).unwrap();
        assert!((gr - 1.4e2).abs() < 0.1e2, "{gr}");
        let omega = rabi_rate(gr, p, angular_from_hz(7e9)).unwrap();
        assert!((omega * 100e-9 - PI).abs() < 1e-9);
    }

    #[test]
    fn dipole_cases() {
        assert_eq!(dipole_from_rabi(0.0, 1.0).unwrap().si, 0.0);
        let d = dipole_from_rabi(1.0007e-29 / HBAR, 1.0).unwrap();
        assert!((d.debye - 3.0).abs() < 1e-3);
        let half = dipole_from_rabi(1.0007e-29 / HBAR, 2.0).unwrap();
        assert!((half.si * 2.0 - d.si).abs() < 1e-40);
        assert!(dipole_from_rabi(1.0, 0.0).is_err());
    }

    #[test]
    fn density_round_trip() {
        let gamma_r = 140.0;
        let mut cal = EchoCalibration {
            p_in: 1e-11,
            omega_d: angular_from_hz(7e9),
            theta: 100e-9,
            volume: 1.5e-13,
            alpha_out: 0.0,
            field_per_sqrt_watt: 1.0,
        };
        assert_eq!(density_from_echo(&cal, gamma_r).unwrap(), 0.0);
        cal.alpha_out = 3e43 * cal.volume * cal.gamma_a() * gamma_r.sqrt();
        let n0 = density_from_echo(&cal, gamma_r).unwrap();
        assert!((n0 / 3e43 - 1.0).abs() < 1e-12);
        let short = EchoCalibration { theta: 50e-9, ..cal };
        assert!((density_from_echo(&short, gamma_r).unwrap() / n0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn attenuation_and_efficiency() {
        let chain = AmplifierChainSpec::default();
        assert_eq!(cell_attenuation(&chain, 0.0).unwrap(), 1.0);
        let a = cell_attenuation(&chain, 0.012).unwrap();
        assert!((a - 0.998971).abs() < 1e-6, "{a}");
        let g = per_cell_gain(&chain).unwrap();
        assert!((g - 1.0023543).abs() < 1e-7, "{g}");
        let eta = quantum_efficiency(a, g).unwrap();
        assert!((eta - 0.56).abs() < 0.005, "{eta}");
        assert!(cell_attenuation(&chain, 10.0).is_err());
        assert!(quantum_efficiency(0.99, 1.001).is_err());
        assert_eq!(quantum_efficiency(1.0, 1.3).unwrap(), 1.0);
        assert!((quantum_efficiency(0.9, 1e12).unwrap() - 0.9).abs() < 1e-9);
    }

    #[test]
    fn per_cell_gain_inverts() {
        let chain = AmplifierChainSpec::default();
        let g = per_cell_gain(&chain).unwrap();
        assert!((g.powi(2037) / 120.3 - 1.0).abs() < 1e-12);
        let unit = AmplifierChainSpec {
            total_gain: 1.0,
            ..chain
        };
        assert_eq!(per_cell_gain(&unit).unwrap(), 1.0);
    }

    #[test]
    fn cascade_simple_cases() {
        let one = AmplifierChainSpec {
            n_cells: 1,
            ..Default::default()
        };
        let c = noise_cascade(&one, 1.0, 2.0, 0.5).unwrap();
        assert!((c.iterated - 1.5).abs() < 1e-15 && (c.closed_form - 1.5).abs() < 1e-15);
        let c = noise_cascade(&AmplifierChainSpec::default(), 1.0, 1.0, 0.7).unwrap();
        assert_eq!(c.iterated, 0.7);
        assert_eq!(c.closed_form, 0.7);
    }

    #[test]
    fn cascade_reproduces_efficiency_at_high_gain() {
        let chain = AmplifierChainSpec {
            n_cells: 20_000,
            ..Default::default()
        };
        let (a, g) = (0.998971, 1.0023543);
        let c = noise_cascade(&chain, a, g, 0.5).unwrap();
        let eta = quantum_efficiency(a, g).unwrap();
        assert!((c.net_gain / c.closed_form - eta).abs() < 1e-3);
    }

    #[test]
    fn efficiency_band_brackets_nominal() {
        let chain = AmplifierChainSpec::default();
        let band = efficiency_band(&chain, 0.0128, CAPACITANCE_BAND).unwrap();
        let g = per_cell_gain(&chain).unwrap();
        let eta = quantum_efficiency(cell_attenuation(&chain, 0.0128).unwrap(), g).unwrap();
        assert!(band.eta_at_min.unwrap() > eta);
        assert!(band.eta_at_max.unwrap() < eta);
    }

    proptest! {
        #[test]
        fn cascade_forms_agree(t in 0.5f64..1.5, a in 0.5f64..1.0, n in 1u32..10_000) {
            let g = (t / a).max(1.0);
            prop_assume!(n as f64 * (g * a).ln() < 700.0);
            let chain = AmplifierChainSpec { n_cells: n, ..Default::default() };
            let c = noise_cascade(&chain, a, g, 0.5).unwrap();
            prop_assert!(((c.closed_form - c.iterated) / c.iterated).abs() < 1e-12);
        }

        #[test]
        fn efficiency_monotone(a1 in 0.99f64..1.0, da in 0.0f64..0.001, g in 1.02f64..2.0, dg in 0.0f64..0.5) {
            // η = a − (1 − a)/(g − 1): rises with a, and with g towards its asymptote a.
            let e = quantum_efficiency(a1, g).unwrap();
            prop_assert!(quantum_efficiency((a1 + da).min(1.0), g).unwrap() >= e - 1e-15);
            prop_assert!(quantum_efficiency(a1, g + dg).unwrap() >= e - 1e-15);
            prop_assert!(quantum_efficiency(a1, g + dg).unwrap() <= a1);
        }

        #[test]
        fn tan_delta_scale_invariant(gsd in 1e3f64..1e8, wb in 1e8f64..1e11, k in 0.01f64..100.0) {
            let a = tan_delta_from_spectral_diffusion(gsd, wb, 1.0).unwrap();
            let b = tan_delta_from_spectral_diffusion(gsd * k, wb * k, 1.0).unwrap();
            prop_assert!(((a - b) / a).abs() < 1e-13);
        }
    }
}
