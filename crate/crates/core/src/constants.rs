//! CODATA physical constants and the unit conversions shared across modules.

/// Physical constants in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Vacuum permittivity, F/m.
    pub epsilon0: f64,
    /// One debye in C·m.
    pub debye: f64,
}

impl PhysicalConstants {
    pub const CODATA: PhysicalConstants = PhysicalConstants {
        hbar: HBAR,
        k_b: K_B,
        epsilon0: EPSILON0,
        debye: DEBYE,
    };
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA
    }
}

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;
pub const EPSILON0: f64 = 8.854_187_812_8e-12;
pub const DEBYE: f64 = 3.335_641e-30;

pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Converts a value quoted as X/(2π) in Hz into an angular rate in rad/s.
pub fn angular_from_hz(hz: f64) -> f64 {
    TWO_PI * hz
}

/// Inverse of [`angular_from_hz`].
pub fn hz_from_angular(omega: f64) -> f64 {
    omega / TWO_PI
}

pub fn debye_to_si(d: f64) -> f64 {
    d * DEBYE
}

pub fn si_to_debye(d: f64) -> f64 {
    d / DEBYE
}

/// Power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}
