//! Physical constants (CODATA 2018 exact/recommended values) and unit converters.
//!
//! Every energy inside the crate is carried in joules; these helpers are the
//! only place conversions to and from hertz, electronvolts and debye happen.

use core::f64::consts::PI;

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Bohr magneton, J/T.
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Elementary charge, C (also the joules per electronvolt).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// One debye in C·m (1e-21 / c).
pub const DEBYE: f64 = 3.335_640_951_981_52e-30;
/// Relative permittivity of silicon used as the default dielectric constant.
pub const SILICON_EPSILON_R: f64 = 11.7;

/// A named entry of the constants table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant {
    pub name: &'static str,
    pub value: f64,
    pub unit: &'static str,
}

/// The full constants table, exported for documentation and cross-checking.
pub const TABLE: [Constant; 8] = [
    Constant {
        name: "planck",
        value: PLANCK,
        unit: "J s",
    },
    Constant {
        name: "hbar",
        value: HBAR,
        unit: "J s",
    },
    Constant {
        name: "boltzmann",
        value: BOLTZMANN,
        unit: "J/K",
    },
    Constant {
        name: "bohr_magneton",
        value: BOHR_MAGNETON,
        unit: "J/T",
    },
    Constant {
        name: "vacuum_permittivity",
        value: VACUUM_PERMITTIVITY,
        unit: "F/m",
    },
    Constant {
        name: "electron_volt",
        value: ELEMENTARY_CHARGE,
        unit: "J",
    },
    Constant {
        name: "debye",
        value: DEBYE,
        unit: "C m",
    },
    Constant {
        name: "silicon_epsilon_r",
        value: SILICON_EPSILON_R,
        unit: "1",
    },
];

#[inline]
pub fn joules_to_hz(e: f64) -> f64 {
    e / PLANCK
}

#[inline]
pub fn hz_to_joules(f: f64) -> f64 {
    f * PLANCK
}

#[inline]
pub fn ev_to_joules(e: f64) -> f64 {
    e * ELEMENTARY_CHARGE
}

#[inline]
pub fn joules_to_ev(e: f64) -> f64 {
    e / ELEMENTARY_CHARGE
}

#[inline]
pub fn debye_to_coulomb_meter(d: f64) -> f64 {
    d * DEBYE
}

/// Number density in cm⁻³ to m⁻³.
#[inline]
pub fn per_cm3_to_per_m3(n: f64) -> f64 {
    n * 1e6
}

/// Power in dBm to watts.
#[inline]
pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    1e-3 * 10f64.powf(p_dbm / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hbar_consistent() {
        assert!((HBAR - 1.054_571_817e-34).abs() < 1e-42);
    }

    #[test]
    fn dbm_reference_points() {
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
        assert!((dbm_to_watts(-120.0) / 1e-15 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ev_hz_round_trip() {
        let e = ev_to_joules(2.84e-5);
        assert!((joules_to_ev(e) - 2.84e-5).abs() < 1e-18);
        assert!((hz_to_joules(joules_to_hz(e)) / e - 1.0).abs() < 1e-15);
    }
}
