//! Thermal occupations and the three cooling routes: cavity-assisted,
//! measurement-based with a transmon, and sympathetic via a co-trapped ion.

mod protocol;

pub use protocol::{
    run_cooling_protocol, steady_state_occupation, write_trajectory_csv, CoolingCycle, CoolingProtocolParams,
    PopulationState, QubitLevel,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonians::{Constants, ThermalEnv};
use crate::scalar::{lit, Real};

/// Bose–Einstein occupation `1/(exp(ħω/k_BT) − 1)`; zero at T = 0.
pub fn bose_einstein<T: Real>(omega: T, temperature: T) -> T {
    if temperature <= T::zero() {
        return T::zero();
    }
    let k = Constants::<T>::get();
    // ħ/k_B first keeps the exponent argument inside f32 range.
    let x = (k.hbar / k.kb) * omega / temperature;
    T::one() / x.exp_m1()
}

/// Phonon occupation when a cooling channel of rate `gamma_c` competes with
/// anomalous heating: `(Γ_c·n_BE + Λ_heat)/Γ_c`.
pub fn cavity_cooling_equilibrium<T: Real>(gamma_c: T, env: &ThermalEnv<T>, omega: T) -> Result<T> {
    if !(gamma_c > T::zero()) {
        return Err(Error::Divergent("cooling rate must be positive".into()));
    }
    Ok((gamma_c * bose_einstein(omega, env.temperature) + env.heating) / gamma_c)
}

/// Inputs for the ion-mediated (beam-splitter) cooling estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SympatheticParams<T: Real = f64> {
    /// Linearized coupling g = g₀√n_d (rad/s).
    pub g: T,
    /// Ion cooling rate Γ_i (1/s).
    pub gamma_i: T,
    /// Electron–bath coupling Γ_th^e (1/s).
    pub gamma_th_e: T,
    /// Bath occupation of the electron mode.
    pub n_th: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SympatheticResult<T: Real = f64> {
    pub n_e: T,
    /// Γ↓ = 4g²/Γ_i.
    pub cooling_rate: T,
    /// Γ' = Γ_th^e + Γ_i.
    pub gamma_prime: T,
    /// Γ_i > g; the rate formula assumes it.
    pub weak_coupling_valid: bool,
}

pub fn sympathetic_steady_state<T: Real>(p: &SympatheticParams<T>) -> Result<SympatheticResult<T>> {
    let z = T::zero();
    if !(p.g >= z && p.gamma_i >= z && p.gamma_th_e >= z && p.n_th >= z) {
        return Err(Error::Contract("sympathetic cooling inputs must be non-negative".into()));
    }
    if p.gamma_i == z {
        return Err(Error::Divergent("ion cooling rate Γ_i = 0".into()));
    }
    let cooling_rate = lit::<T>(4.0) * p.g * p.g / p.gamma_i;
    let gamma_prime = p.gamma_th_e + p.gamma_i;
    Ok(SympatheticResult {
        n_e: p.n_th * gamma_prime / (cooling_rate + gamma_prime),
        cooling_rate,
        gamma_prime,
        weak_coupling_valid: p.gamma_i > p.g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    #[test]
    fn bose_einstein_values() {
        // Oracle: direct evaluation with ħ/k_B = 7.638232577e-12 K·s.
        let x = 7.638_232_577e-12 * TAU * 1e9 / 0.3;
        let oracle = 1.0 / (x.exp() - 1.0);
        let n = bose_einstein(TAU * 1e9, 0.3);
        assert!((n - oracle).abs() < 1e-8);
        assert!((n - 5.76).abs() < 0.01, "{n}");
        assert!((bose_einstein(TAU * 500e6, 0.3) - 12.0).abs() < 0.05);
        assert_eq!(bose_einstein(TAU * 1e9, 0.0), 0.0);
        assert!((bose_einstein(std::f32::consts::TAU * 500e6, 0.3_f32) - 12.0).abs() < 0.05);
    }

    #[test]
    fn cavity_cooling() {
        let env = ThermalEnv { temperature: 0.3, gamma_th: 0.0, heating: 140.0 };
        let gc = TAU * 33e3;
        let n = cavity_cooling_equilibrium(gc, &env, TAU * 1e9).unwrap();
        let bath = bose_einstein(TAU * 1e9, 0.3);
        assert!((n - bath - 140.0 / gc).abs() < 1e-12);
        assert!((n - 5.76).abs() < 0.01);

        let quiet = ThermalEnv { heating: 0.0, ..env };
        assert_eq!(cavity_cooling_equilibrium(gc, &quiet, TAU * 1e9).unwrap(), bath);
        let fast = cavity_cooling_equilibrium(1e15, &env, TAU * 1e9).unwrap();
        assert!((fast - bath).abs() < 1e-12);
        assert!(matches!(cavity_cooling_equilibrium(0.0, &env, TAU * 1e9), Err(Error::Divergent(_))));
    }

    fn row1(g: f64) -> SympatheticParams<f64> {
        SympatheticParams { g, gamma_i: TAU * 10e3, gamma_th_e: 10.0, n_th: bose_einstein(TAU * 800e6, 0.3) }
    }

    #[test]
    fn sympathetic_uncoupled() {
        let r = sympathetic_steady_state(&row1(0.0)).unwrap();
        assert_eq!(r.n_e, row1(0.0).n_th);
    }

    #[test]
    fn sympathetic_row1() {
        let r = sympathetic_steady_state(&row1(TAU * 33e3)).unwrap();
        assert!((r.n_e - 0.165).abs() < 0.002, "{}", r.n_e);
        assert!(!r.weak_coupling_valid);
    }

    #[test]
    fn sympathetic_strong_cooling_limit() {
        let p = row1(TAU * 10e6);
        let r = sympathetic_steady_state(&p).unwrap();
        let asym = p.n_th * r.gamma_prime / r.cooling_rate;
        assert!((r.n_e / asym - 1.0).abs() < 1e-3);
    }

    #[test]
    fn sympathetic_rejects_zero_ion_rate() {
        let p = SympatheticParams { gamma_i: 0.0, ..row1(1.0) };
        assert!(matches!(sympathetic_steady_state(&p), Err(Error::Divergent(_))));
    }

    proptest! {
        #[test]
        fn sympathetic_monotone(g in 0.0..1e6f64, dg in 1.0..1e5f64, n in 0.1..20.0f64, dn in 0.01..5.0f64) {
            let base = SympatheticParams { g, gamma_i: 6e4, gamma_th_e: 10.0, n_th: n };
            let r0 = sympathetic_steady_state(&base).unwrap().n_e;
            let rg = sympathetic_steady_state(&SympatheticParams { g: g + dg, ..base }).unwrap().n_e;
            let rn = sympathetic_steady_state(&SympatheticParams { n_th: n + dn, ..base }).unwrap().n_e;
            prop_assert!(rg < r0);
            prop_assert!(rn > r0);
        }
    }
}
