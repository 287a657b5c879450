use std::f64::consts::PI;

/// SI constants used to turn laboratory parameters into rotor frequencies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalConstants {
    /// J s
    pub planck: f64,
    /// J/T
    pub nuclear_magneton: f64,
    /// F/m
    pub vacuum_permittivity: f64,
    /// m/s
    pub speed_of_light: f64,
}

/// CODATA 2018 recommended values.
pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
    planck: 6.626_070_15e-34,
    nuclear_magneton: 5.050_783_746_1e-27,
    vacuum_permittivity: 8.854_187_812_8e-12,
    speed_of_light: 299_792_458.0,
};

impl PhysicalConstants {
    pub fn hbar(&self) -> f64 {
        self.planck / (2.0 * PI)
    }

    /// μ_N/h in Hz per tesla.
    pub fn nuclear_magneton_over_h(&self) -> f64 {
        self.nuclear_magneton / self.planck
    }

    /// Polarizability volume in Å³ to SI polarizability (C m²/V): 4πε₀ × 10⁻³⁰.
    pub fn polarizability_to_si(&self, volume_a3: f64) -> f64 {
        4.0 * PI * self.vacuum_permittivity * 1e-30 * volume_a3
    }

    /// Peak field squared E₀² (V²/m²) of a beam with cycle-averaged intensity
    /// `I = ½ c ε₀ E₀²` given in W/cm².
    pub fn field_squared_from_intensity(&self, intensity_w_cm2: f64) -> f64 {
        2.0 * intensity_w_cm2 * 1e4 / (self.speed_of_light * self.vacuum_permittivity)
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        CODATA_2018
    }
}
