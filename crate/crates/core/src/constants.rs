//! Physical constants (CODATA 2018).

use std::f64::consts::PI;

/// Planck constant, J·s (exact in SI 2019).
const PLANCK: f64 = 6.626_070_15e-34;

/// The constant set used by every formula in the crate.
///
/// All values are SI. `h` and `hbar` are stored so that `h = 2π·hbar`
/// holds to the last bit the two roundings allow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Planck constant, J·s.
    pub h: f64,
    /// Bohr magneton, J/T.
    pub mu_b: f64,
    /// Vacuum permeability, H/m.
    pub mu_0: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
}

/// CODATA 2018 recommended values.
pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
    hbar: PLANCK / (2.0 * PI),
    h: PLANCK,
    mu_b: 9.274_010_078_3e-24,
    mu_0: 1.256_637_062_12e-6,
    k_b: 1.380_649e-23,
};

impl PhysicalConstants {
    pub fn codata2018() -> Self {
        CODATA_2018
    }

    /// Gyromagnetic ratio `g_s·μ_B/ħ` in rad/(s·T).
    pub fn gyromagnetic_ratio(&self, g_s: f64) -> f64 {
        g_s * self.mu_b / self.hbar
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        CODATA_2018
    }
}
