use crate::scalar::{lit, Real};

/// CODATA 2018 values in SI units.
pub mod codata {
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const PLANCK: f64 = 6.626_070_15e-34;
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
    pub const BOLTZMANN: f64 = 1.380_649e-23;
    pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
    pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    /// h·c in eV·nm.
    pub const HC_EV_NM: f64 = PLANCK * SPEED_OF_LIGHT / ELEMENTARY_CHARGE * 1e9;
    /// ⁹Be⁺ mass in atomic mass units.
    pub const BERYLLIUM_ION_MASS_U: f64 = 9.012;
}

/// Physical constants materialized in the working scalar type.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constants<T: Real = f64> {
    pub hbar: T,
    pub e: T,
    pub eps0: T,
    pub kb: T,
    pub m_e: T,
    pub u: T,
    pub hc_ev_nm: T,
}

impl<T: Real> Constants<T> {
    pub fn get() -> Self {
        Self {
            hbar: lit(codata::HBAR),
            e: lit(codata::ELEMENTARY_CHARGE),
            eps0: lit(codata::VACUUM_PERMITTIVITY),
            kb: lit(codata::BOLTZMANN),
            m_e: lit(codata::ELECTRON_MASS),
            u: lit(codata::ATOMIC_MASS_UNIT),
            hc_ev_nm: lit(codata::HC_EV_NM),
        }
    }

    /// Coulomb constant times e², `e²/(4πε₀)` in J·m.
    pub fn coulomb_k(&self) -> T {
        // e²/(4πε₀) evaluated as (e/ε₀)·e/(4π) keeps intermediates inside f32 range.
        (self.e / self.eps0) * self.e / (lit::<T>(4.0) * T::pi())
    }

    pub fn beryllium_ion_mass(&self) -> T {
        lit::<T>(codata::BERYLLIUM_ION_MASS_U) * self.u
    }
}
