//! Parameter records, physical constants and Hamiltonian builders.
//!
//! Every builder returns an [`Operator`] in angular-frequency units (H/ħ), with
//! counter-rotating terms dropped.

mod constants;
mod params;

pub use constants::{codata, Constants};
pub use params::{zero_point, CircuitParams, ElectronIonParams, ThermalEnv};

use crate::error::{Error, Result};
use crate::qcore::{embed, embed_product, ladder, number, sigma_minus, sigma_plus, sigma_z, Operator};
use crate::scalar::{lit, Real};

fn check_truncation(name: &str, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!("{name} truncation must be >= 2, got {n}")));
    }
    Ok(())
}

/// Electron phonon coupled to the readout cavity by a beam-splitter term.
///
/// `ω_e a†a + ω_MW b†b + g_ec (a†b + a b†)` on dims `[n_fock_e, n_fock_mw]`.
pub fn build_h_ec<T: Real>(p: &CircuitParams<T>, n_fock_e: usize, n_fock_mw: usize) -> Result<Operator<T>> {
    check_truncation("phonon", n_fock_e)?;
    check_truncation("cavity", n_fock_mw)?;
    let dims = [n_fock_e, n_fock_mw];
    let (a, adag) = ladder::<T>(n_fock_e)?;
    let (b, bdag) = ladder::<T>(n_fock_mw)?;

    let hop = embed_product(&[(&adag, 0), (&b, 1)], &dims)?.add(&embed_product(&[(&a, 0), (&bdag, 1)], &dims)?)?;
    embed(&number(n_fock_e)?, 0, &dims)?
        .scale(p.omega_e)
        .add(&embed(&number(n_fock_mw)?, 1, &dims)?.scale(p.omega_mw))?
        .add(&hop.scale(p.g_ec))
}

/// Readout Hamiltonian: phonon + cavity + two-level transmon.
///
/// Dims `[n_fock_e, n_fock_mw, 2]`; the qubit factor uses index 0 = g, 1 = e.
pub fn build_h_read<T: Real>(p: &CircuitParams<T>, n_fock_e: usize, n_fock_mw: usize) -> Result<Operator<T>> {
    check_truncation("phonon", n_fock_e)?;
    check_truncation("cavity", n_fock_mw)?;
    let dims = [n_fock_e, n_fock_mw, 2];
    let (a, adag) = ladder::<T>(n_fock_e)?;
    let (b, bdag) = ladder::<T>(n_fock_mw)?;
    let (sm, sp) = (sigma_minus::<T>(), sigma_plus::<T>());
    let pair = |x: &Operator<T>, i: usize, y: &Operator<T>, j: usize| embed_product(&[(x, i), (y, j)], &dims);

    let h_ec = embed(&number(n_fock_e)?, 0, &dims)?
        .scale(p.omega_e)
        .add(&pair(&adag, 0, &b, 1)?.add(&pair(&a, 0, &bdag, 1)?)?.scale(p.g_ec))?;
    let h_sc = embed(&number(n_fock_mw)?, 1, &dims)?
        .scale(p.omega_mw)
        .add(&embed(&sigma_z::<T>(), 2, &dims)?.scale(p.omega_q * lit(0.5)))?
        .add(&pair(&bdag, 1, &sm, 2)?.add(&pair(&b, 1, &sp, 2)?)?.scale(p.g_sc))?;
    h_ec.add(&h_sc)
}

/// Total excitation number `a†a + b†b + (σz + 1)/2` conserved by [`build_h_read`].
pub fn excitation_number_read<T: Real>(n_fock_e: usize, n_fock_mw: usize) -> Result<Operator<T>> {
    let dims = [n_fock_e, n_fock_mw, 2];
    let na = embed(&number::<T>(n_fock_e)?, 0, &dims)?;
    let nb = embed(&number::<T>(n_fock_mw)?, 1, &dims)?;
    let qe = embed(&Operator::from_diagonal(&[T::zero(), T::one()]), 2, &dims)?;
    na.add(&nb)?.add(&qe)
}

/// Electron–ion Hamiltonian with optomechanical-type coupling and self-Kerr term.
///
/// `ω_e a†a + ω_i c†c − g₀ a†a (c† + c) − (α/2) a†a†aa` on dims `[n_e, n_i]`.
pub fn build_h_electron_ion<T: Real>(
    p: &ElectronIonParams<T>,
    g0: T,
    alpha: T,
    n_e: usize,
    n_i: usize,
) -> Result<Operator<T>> {
    check_truncation("electron", n_e)?;
    check_truncation("ion", n_i)?;
    let dims = [n_e, n_i];
    let (a, adag) = ladder::<T>(n_e)?;
    let (c, cdag) = ladder::<T>(n_i)?;
    let n = number::<T>(n_e)?;
    let kerr = adag.matmul(&adag)?.matmul(&a)?.matmul(&a)?;

    embed(&n, 0, &dims)?
        .scale(p.omega_e)
        .add(&embed(&number(n_i)?, 1, &dims)?.scale(p.omega_i))?
        .sub(&embed_product(&[(&n, 0), (&cdag.add(&c)?, 1)], &dims)?.scale(g0))?
        .sub(&embed(&kerr, 0, &dims)?.scale(alpha * lit(0.5)))
}

/// Ionization threshold from the ¹P₁ level of calcium (m).
pub const CALCIUM_1P1_THRESHOLD_M: f64 = 389.81e-9;

/// Excess photon energy `hc/λ_L − hc/λ_th` in joules; negative below threshold.
pub fn photoionization_excess_energy<T: Real>(lambda_l: T) -> Result<T> {
    if !(lambda_l > T::zero()) {
        return Err(Error::Contract("wavelength must be positive".into()));
    }
    let k = Constants::<T>::get();
    let to_nm = lit::<T>(1e9);
    let ev = k.hc_ev_nm / (lambda_l * to_nm) - k.hc_ev_nm / (lit::<T>(CALCIUM_1P1_THRESHOLD_M) * to_nm);
    Ok(ev * k.e)
}

/// Same as [`photoionization_excess_energy`], in meV.
pub fn photoionization_excess_mev<T: Real>(lambda_l: T) -> Result<T> {
    let k = Constants::<T>::get();
    Ok(photoionization_excess_energy(lambda_l)? / k.e * lit(1e3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{eig_hermitian, product_basis};
    use std::f64::consts::TAU;

    fn spectrum(h: &Operator<f64>) -> Vec<f64> {
        eig_hermitian(h, &product_basis(h.dims())).unwrap().eigenvalues
    }

    #[test]
    fn h_ec_decoupled_spectrum() {
        let p = CircuitParams { g_ec: 0.0, ..CircuitParams::table1(TAU * 0.9e9) };
        let h = build_h_ec(&p, 3, 3).unwrap();
        assert!(h.is_hermitian());
        let mut expect: Vec<f64> = (0..3)
            .flat_map(|n| (0..3).map(move |m| p.omega_e * n as f64 + p.omega_mw * m as f64))
            .collect();
        expect.sort_by(f64::total_cmp);
        for (e, x) in spectrum(&h).iter().zip(expect) {
            assert!((e - x).abs() <= 1e-12 * x.abs().max(1.0) * 1e3);
        }
    }

    #[test]
    fn h_ec_resonant_normal_modes() {
        let p = CircuitParams::table1(TAU * 1e9);
        let h = build_h_ec(&p, 2, 2).unwrap();
        let e = spectrum(&h);
        // single-excitation pair at ω ± g_ec
        let lo = (e[1] - p.omega_mw) / TAU;
        let hi = (e[2] - p.omega_mw) / TAU;
        assert!((lo + 33e3).abs() < 1e-3, "{lo}");
        assert!((hi - 33e3).abs() < 1e-3, "{hi}");
    }

    #[test]
    fn h_read_conserves_excitations() {
        let p = CircuitParams::table1(TAU * 986e6);
        let h = build_h_read(&p, 4, 4).unwrap();
        assert!(h.is_hermitian());
        let n = excitation_number_read::<f64>(4, 4).unwrap();
        let comm = h.commutator(&n).unwrap();
        assert!(comm.max_abs() <= 1e-10 * h.max_abs());
    }

    #[test]
    fn h_read_separable_without_coupling() {
        let p = CircuitParams { g_ec: 0.0, g_sc: 0.0, ..CircuitParams::table1(TAU * 0.9e9) };
        let h = build_h_read(&p, 2, 2, ).unwrap();
        let m = h.matrix();
        for i in 0..h.dim() {
            for j in 0..h.dim() {
                if i != j {
                    assert_eq!(m[(i, j)].norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn h_read_dispersive_cavity_shift() {
        // Qubit-conditioned cavity frequency differs by ±χ from ω_MW.
        let p = CircuitParams { g_ec: 0.0, ..CircuitParams::table1(TAU * 0.8e9) };
        let dims = [2, 3, 2];
        let h = build_h_read(&p, 2, 3).unwrap();
        let res = eig_hermitian(&h, &product_basis(&dims)).unwrap();
        let e = |l: [usize; 3]| res.energy_of(&l).unwrap().0;
        let cav_g = (e([0, 1, 0]) - e([0, 0, 0]) - p.omega_mw) / TAU;
        let cav_e = (e([0, 1, 1]) - e([0, 0, 1]) - p.omega_mw) / TAU;
        let chi = p.chi() / TAU;
        assert!((chi + 13.333e6).abs() < 1e3);
        // Magnitude matches |χ| to leading order in (g/Δ)²; signs are opposite per qubit state.
        assert!((cav_g.abs() / chi.abs() - 1.0).abs() < 0.02, "{cav_g}");
        assert!((cav_e.abs() / chi.abs() - 1.0).abs() < 0.02, "{cav_e}");
        assert!(cav_g * cav_e < 0.0);
    }

    fn electron_ion() -> ElectronIonParams<f64> {
        ElectronIonParams::beryllium(TAU * 800e6, TAU * 2e6, 10e-6)
    }

    #[test]
    fn electron_ion_decoupled() {
        let p = electron_ion();
        let h = build_h_electron_ion(&p, 0.0, 0.0, 3, 3).unwrap();
        let m = h.matrix();
        assert!((0..9).all(|i| (0..9).all(|j| i == j || m[(i, j)].norm() == 0.0)));
    }

    #[test]
    fn electron_ion_conserves_electron_number() {
        let p = electron_ion();
        let h = build_h_electron_ion(&p, TAU * 40e3, TAU * 5e3, 4, 6).unwrap();
        assert!(h.is_hermitian());
        let na = embed(&number::<f64>(4).unwrap(), 0, &[4, 6]).unwrap();
        assert!(h.commutator(&na).unwrap().max_abs() <= 1e-10 * h.max_abs());
    }

    #[test]
    fn kerr_ladder() {
        let p = electron_ion();
        let alpha = TAU * 33e3;
        let h = build_h_electron_ion(&p, 0.0, alpha, 4, 2).unwrap();
        let res = eig_hermitian(&h, &product_basis(&[4, 2])).unwrap();
        let e = |n: usize| res.energy_of(&[n, 0]).unwrap().0;
        let anh = e(2) - 2.0 * e(1) + e(0);
        assert!((anh + alpha).abs() <= 1e-9 * p.omega_e);
    }

    #[test]
    fn polaron_shift_matches_displaced_oscillator() {
        // Oracle: in sector n the ion is displaced by g₀n/ω_i and its ground energy drops by g₀²n²/ω_i.
        let mut p = electron_ion();
        p.omega_e = TAU * 50e6;
        p.omega_i = TAU * 2e6;
        let g0 = 0.1 * p.omega_i;
        let h = build_h_electron_ion(&p, g0, 0.0, 3, 30).unwrap();
        let res = eig_hermitian(&h, &product_basis(&[3, 30])).unwrap();
        for n in 1..3usize {
            let e = res.energy_of(&[n, 0]).unwrap().0 - n as f64 * p.omega_e;
            let expect = -(g0 * g0 / p.omega_i) * (n * n) as f64;
            assert!((e / expect - 1.0).abs() < 0.01, "n={n}: {e} vs {expect}");
        }
    }

    #[test]
    fn rejects_small_truncation() {
        let p = CircuitParams::table1(TAU * 1e9);
        assert!(matches!(build_h_read(&p, 1, 4), Err(Error::InvalidDimension(_))));
        assert!(matches!(build_h_ec(&p, 3, 1), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn photoionization_threshold() {
        assert!(photoionization_excess_energy(389.81e-9_f64).unwrap().abs() < 1e-30);
        let mev = photoionization_excess_mev(389.5e-9_f64).unwrap();
        // Oracle: 1239.84198 eV·nm × (1/389.5 − 1/389.81) nm⁻¹.
        let oracle = 1239.841_984 * (1.0 / 389.5 - 1.0 / 389.81) * 1e3;
        assert!((mev - oracle).abs() < 1e-6);
        assert!((mev - 2.53).abs() < 0.01);
        assert!(photoionization_excess_mev(390.5e-9_f64).unwrap() < 0.0);
        assert!(photoionization_excess_energy(0.0_f64).is_err());
    }

    #[test]
    fn zero_point_of_800mhz_electron() {
        let x = electron_ion().x_zpf();
        assert!((x / 1.07e-7 - 1.0).abs() < 0.01, "{x}");
    }

    #[test]
    fn table1_detunings() {
        let p = CircuitParams::table1(TAU * 986e6);
        assert!((p.delta_ec() / TAU - 14e6).abs() < 1.0);
        assert!((p.delta_sc() / TAU + 3e9).abs() < 1.0);
        assert!(p.is_dispersive());
    }

    #[test]
    fn f32_builders() {
        let p = CircuitParams::<f32>::table1(std::f32::consts::TAU * 0.9e9);
        let h = build_h_read(&p, 3, 3).unwrap();
        assert!(h.is_hermitian());
        let k = Constants::<f32>::get();
        assert!(k.coulomb_k().is_finite() && k.coulomb_k() > 0.0);
    }
}
