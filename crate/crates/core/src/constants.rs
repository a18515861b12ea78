//! Physical constants (SI, CODATA exact values where defined).

use std::f64::consts::PI;

/// Speed of light in vacuum [m/s].
pub const C0: f64 = 299_792_458.0;
/// Planck constant [J s].
pub const H_PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant [J/K].
pub const K_B: f64 = 1.380_649e-23;
/// Stefan-Boltzmann constant [W/(m² K⁴)].
pub const SIGMA_B: f64 = 5.670_374_419e-8;
/// Molar gas constant [J/(mol K)].
pub const R_GAS: f64 = 8.314_462_618;
/// Standard gravity [m/s²].
pub const G_N: f64 = 9.806_65;
/// Vacuum permittivity [F/m].
pub const EPS0: f64 = 8.854_187_8128e-12;
/// Vacuum permeability [H/m].
pub const MU0: f64 = 1.256_637_062_12e-6;

/// Pressure conversion: 1 mbar in Pa.
pub const MBAR: f64 = 100.0;

/// Stefan-Boltzmann constant evaluated from h, c0 and k_B.
pub fn sigma_from_fundamentals() -> f64 {
    2.0 * PI.powi(5) * K_B.powi(4) / (15.0 * H_PLANCK.powi(3) * C0 * C0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_consistent() {
        assert!((sigma_from_fundamentals() / SIGMA_B - 1.0).abs() < 1e-9);
    }
}
