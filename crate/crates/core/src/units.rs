//! Physical constants (SI 2019 exact values) and unit conventions.
//!
//! Convention: energies are stored as frequencies E/h in GHz, rates in Hz,
//! times in seconds, magnetic flux in units of Phi0, island charge in
//! Cooper pairs.

/// Planck constant, J s.
pub const PLANCK_H: f64 = 6.62607015e-34;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = PLANCK_H / (2.0 * std::f64::consts::PI);
/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;
/// Boltzmann constant, J/K.
pub const BOLTZMANN_KB: f64 = 1.380649e-23;
/// Superconducting flux quantum h/2e, Wb.
pub const FLUX_QUANTUM: f64 = PLANCK_H / (2.0 * ELEMENTARY_CHARGE);
/// Reduced flux quantum Phi0/2pi, Wb.
pub const REDUCED_FLUX_QUANTUM: f64 = FLUX_QUANTUM / (2.0 * std::f64::consts::PI);

/// kT/h in GHz for a temperature in kelvin.
pub fn thermal_freq_ghz(temperature_k: f64) -> f64 {
    BOLTZMANN_KB * temperature_k / PLANCK_H / 1e9
}

/// Junction capacitance in farads from a charging energy E_C in GHz,
/// C = e^2 / (2 h E_C).
pub fn capacitance_from_ec(ec_ghz: f64) -> f64 {
    ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * PLANCK_H * ec_ghz * 1e9)
}

/// Junction critical current in amperes from a Josephson energy in GHz,
/// I_c = 2 pi E_J / Phi0.
pub fn critical_current_from_ej(ej_ghz: f64) -> f64 {
    2.0 * std::f64::consts::PI * PLANCK_H * ej_ghz * 1e9 / FLUX_QUANTUM
}

/// Josephson inductance in henries from a Josephson energy in GHz,
/// L_J = phi0^2 / E_J.
pub fn josephson_inductance_from_ej(ej_ghz: f64) -> f64 {
    REDUCED_FLUX_QUANTUM * REDUCED_FLUX_QUANTUM / (PLANCK_H * ej_ghz * 1e9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacitance_convention() {
        // E_C = 5 GHz -> C ~ 3.87 fF
        let c = capacitance_from_ec(5.0);
        assert!((c - 3.873e-15).abs() < 0.01e-15, "C = {c}");
    }

    #[test]
    fn critical_current_scale() {
        // 5 GHz junction -> ~10 nA
        let ic = critical_current_from_ej(5.0);
        assert!((ic - 1.0067e-8).abs() < 1e-11, "Ic = {ic}");
    }

    #[test]
    fn josephson_inductance_scale() {
        // 5 GHz junction -> ~33 nH
        let lj = josephson_inductance_from_ej(5.0);
        assert!((lj * 1e9 - 32.7).abs() < 0.1, "L_J = {lj}");
    }
}
