use serde::{Deserialize, Serialize};

use super::constants::Constants;
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Electron–cavity–transmon parameters, all in rad/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams<T: Real = f64> {
    /// Electron secular (phonon) frequency.
    pub omega_e: T,
    /// Readout cavity mode.
    pub omega_mw: T,
    /// Transmon transition.
    pub omega_q: T,
    pub g_ec: T,
    pub g_sc: T,
}

impl<T: Real> CircuitParams<T> {
    pub fn new(omega_e: T, omega_mw: T, omega_q: T, g_ec: T, g_sc: T) -> Result<Self> {
        let p = Self { omega_e, omega_mw, omega_q, g_ec, g_sc };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let z = T::zero();
        if !(self.omega_e > z && self.omega_mw > z && self.omega_q > z) {
            return Err(Error::Contract("circuit frequencies must be positive".into()));
        }
        if !(self.g_ec >= z && self.g_sc >= z) {
            return Err(Error::Contract("couplings must be non-negative".into()));
        }
        Ok(())
    }

    /// Reference circuit: ω_MW/2π = 1 GHz, ω_q/2π = 4 GHz, g_ec/2π = 33 kHz, g_sc/2π = 200 MHz.
    pub fn table1(omega_e: T) -> Self {
        let tau = T::two_pi();
        Self {
            omega_e,
            omega_mw: tau * lit(1e9),
            omega_q: tau * lit(4e9),
            g_ec: tau * lit(33e3),
            g_sc: tau * lit(200e6),
        }
    }

    pub fn with_omega_e(self, omega_e: T) -> Self {
        Self { omega_e, ..self }
    }

    /// Δ_sc = ω_MW − ω_q.
    pub fn delta_sc(&self) -> T {
        self.omega_mw - self.omega_q
    }

    /// Δ_ec = ω_MW − ω_e.
    pub fn delta_ec(&self) -> T {
        self.omega_mw - self.omega_e
    }

    /// χ = g_sc²/Δ_sc.
    pub fn chi(&self) -> T {
        self.g_sc * self.g_sc / self.delta_sc()
    }

    /// δ = Δ_ec − g_sc²/Δ_sc.
    pub fn delta(&self) -> T {
        self.delta_ec() - self.chi()
    }

    /// |Δ_sc| ≥ 10·g_sc.
    pub fn is_dispersive(&self) -> bool {
        self.delta_sc().abs() >= lit::<T>(10.0) * self.g_sc
    }
}

/// Electron–ion pair. Frequencies in rad/s, masses in kg, separation in m.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElectronIonParams<T: Real = f64> {
    pub omega_e: T,
    pub omega_i: T,
    pub m_e: T,
    pub m_i: T,
    /// Separation L between the two trap centres.
    pub separation: T,
    /// Second-order nonlinearity of the electron trap (rad/s per unit amplitude).
    pub beta: T,
    /// Third-order nonlinearity of the electron trap (rad/s).
    pub alpha_k: T,
}

impl<T: Real> ElectronIonParams<T> {
    /// Electron paired with ⁹Be⁺, β = α_K = 0.
    pub fn beryllium(omega_e: T, omega_i: T, separation: T) -> Self {
        let k = Constants::<T>::get();
        Self {
            omega_e,
            omega_i,
            m_e: k.m_e,
            m_i: k.beryllium_ion_mass(),
            separation,
            beta: T::zero(),
            alpha_k: T::zero(),
        }
    }

    /// √(ħ/2m_eω_e).
    pub fn x_zpf(&self) -> T {
        zero_point(self.m_e, self.omega_e)
    }

    /// √(ħ/2m_iω_i).
    pub fn y_zpf(&self) -> T {
        zero_point(self.m_i, self.omega_i)
    }

    pub fn validate(&self) -> Result<()> {
        let z = T::zero();
        if !(self.separation > z) {
            return Err(Error::Contract("separation must be positive".into()));
        }
        if !(self.omega_e > z && self.omega_i > z && self.m_e > z && self.m_i > z) {
            return Err(Error::Contract("frequencies and masses must be positive".into()));
        }
        if self.omega_e == self.omega_i {
            return Err(Error::Contract("electron and ion frequencies must differ".into()));
        }
        let limit = self.separation / lit(10.0);
        if !(self.x_zpf() < limit && self.y_zpf() < limit) {
            return Err(Error::Contract(format!(
                "zero-point amplitudes ({:e}, {:e}) m not small against L/10",
                crate::scalar::to_f64(self.x_zpf()),
                crate::scalar::to_f64(self.y_zpf())
            )));
        }
        Ok(())
    }
}

/// Ground-state spread √(ħ/2mω).
pub fn zero_point<T: Real>(mass: T, omega: T) -> T {
    let k = Constants::<T>::get();
    // ħ/m first: ħ alone times anything small underflows f32.
    (k.hbar / mass / (lit::<T>(2.0) * omega)).sqrt()
}

/// Bath temperature and rates seen by a motional mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalEnv<T: Real = f64> {
    /// Temperature (K).
    pub temperature: T,
    /// Bath coupling rate (1/s).
    pub gamma_th: T,
    /// Anomalous heating (quanta/s).
    pub heating: T,
}

impl<T: Real> ThermalEnv<T> {
    pub fn new(temperature: T, gamma_th: T, heating: T) -> Result<Self> {
        let z = T::zero();
        if !(temperature >= z && gamma_th >= z && heating >= z) {
            return Err(Error::Contract("temperature and rates must be non-negative".into()));
        }
        Ok(Self { temperature, gamma_th, heating })
    }
}
