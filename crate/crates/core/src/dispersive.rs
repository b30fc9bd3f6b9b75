//! Phonon–transmon dispersive coupling ζ and the electrical-readout link budget.
//!
//! ζ follows the closed-form normalization: it is the difference between the
//! phonon transition frequencies with the transmon in |e⟩ and in |g⟩. The
//! coefficient of `a†a σz` in the effective Hamiltonian is ζ/2.

use std::io::Write;

use nalgebra::ComplexField;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonians::{build_h_read, CircuitParams, Constants};
use crate::qcore::{eig_hermitian, product_basis, Operator};
use crate::report::fmt_sig;
use crate::scalar::{lit, to_f64, Real};

/// Default Fock truncation per bosonic mode.
pub const DEFAULT_FOCK: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Dispersive,
    NearResonant,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Dispersive => "dispersive",
            Regime::NearResonant => "near-resonant",
        }
    }
}

/// One point of a ζ sweep. `None` marks a singular closed form at that point.
#[derive(Clone, Debug, PartialEq)]
pub struct ZetaPoint<T: Real = f64> {
    pub omega_e: T,
    pub zeta_analytic: Option<T>,
    pub zeta_approx: Option<T>,
    pub zeta_numeric: Option<T>,
    pub regime: Regime,
    /// Set when the +2 truncation check moved ζ_numeric by 1% or more.
    pub truncation_warning: bool,
}

fn poles_message<T: Real>(p: &CircuitParams<T>) -> String {
    let chi = to_f64(p.chi()).abs();
    let w_mw = to_f64(p.omega_mw);
    let tau = std::f64::consts::TAU;
    format!(
        "on pole Δ_ec = ±g_sc²/|Δ_sc|: ω_e/2π = {:.6e} Hz or {:.6e} Hz",
        (w_mw - chi) / tau,
        (w_mw + chi) / tau
    )
}

/// Closed-form ζ = 2 g_ec² g_sc² Δ_sc / (g_sc⁴ − Δ_ec² Δ_sc²).
pub fn zeta_analytic<T: Real>(p: &CircuitParams<T>) -> Result<T> {
    if p.g_ec == T::zero() {
        return Ok(T::zero());
    }
    // Divided through by Δ_sc² so nothing exceeds (rad/s)² in magnitude.
    let chi = p.chi();
    let dec = p.delta_ec();
    let denom = chi * chi - dec * dec;
    let scale = (chi * chi).max(dec * dec);
    if denom.abs() <= lit::<T>(1e-9) * scale {
        return Err(Error::Singular(poles_message(p)));
    }
    Ok(lit::<T>(2.0) * p.g_ec * p.g_ec * chi / denom)
}

/// Near-pole form ζ ≈ −g_ec²/δ.
pub fn zeta_approx<T: Real>(p: &CircuitParams<T>) -> Result<T> {
    if p.g_ec == T::zero() {
        return Ok(T::zero());
    }
    let delta = p.delta();
    if delta == T::zero() {
        return Err(Error::Singular("δ = 0".into()));
    }
    Ok(-p.g_ec * p.g_ec / delta)
}

struct Dressed<T: Real> {
    zeta: T,
    shift_g: T,
    shift_e: T,
    ambiguous: bool,
    resolution: T,
}

/// Bare states sharing total excitation `n_e + n_mw + q` (conserved by the
/// readout Hamiltonian).
fn excitation_block(labels: &[Vec<usize>], n: usize) -> Vec<usize> {
    (0..labels.len()).filter(|&i| labels[i].iter().sum::<usize>() == n).collect()
}

/// Dressed energies of |0/1 phonon, 0 photons, g/e⟩.
///
/// Only the blocks with at most two excitations are diagonalized; entries
/// between blocks are checked to vanish first.
fn dressed_energies<T: Real>(h: &Operator<T>, omega_e: T) -> Result<Dressed<T>> {
    let labels = product_basis(h.dims());
    let charge: Vec<usize> = labels.iter().map(|l| l.iter().sum()).collect();
    let leak = (0..h.dim())
        .flat_map(|r| (0..h.dim()).map(move |c| (r, c)))
        .filter(|&(r, c)| charge[r] != charge[c])
        .fold(T::zero(), |m, (r, c)| m.max(ComplexField::modulus(h.get(r, c))));
    let eps = lit::<T>(64.0) * T::default_epsilon() * h.max_abs();
    if leak > eps {
        return Err(Error::Contract(format!("Hamiltonian mixes excitation numbers: {:e}", to_f64(leak))));
    }

    let mut ambiguous = false;
    let mut energies = std::collections::HashMap::new();
    for n in 0..=2 {
        let idx = excitation_block(&labels, n);
        let sub_labels: Vec<Vec<usize>> = idx.iter().map(|&i| labels[i].clone()).collect();
        let res = eig_hermitian(&h.restrict(&idx)?, &sub_labels)?;
        for a in &res.assignments {
            energies.insert(a.label.clone(), (res.eigenvalues[a.index], a.ambiguous));
        }
    }
    let mut e = |n_e: usize, q: usize| -> Result<T> {
        let &(en, amb) = energies.get(&vec![n_e, 0, q]).ok_or_else(|| Error::Shape("missing bare label".into()))?;
        ambiguous |= amb;
        Ok(en)
    };
    let (g0, g1, e0, e1) = (e(0, 0)?, e(1, 0)?, e(0, 1)?, e(1, 1)?);
    Ok(Dressed {
        zeta: (e1 - e0) - (g1 - g0),
        shift_g: g1 - g0 - omega_e,
        shift_e: e1 - e0 - omega_e,
        ambiguous,
        resolution: eps,
    })
}

fn check_fock(n_fock: usize) -> Result<()> {
    if n_fock < 4 {
        return Err(Error::InvalidDimension(format!("n_fock must be >= 4, got {n_fock}")));
    }
    Ok(())
}

/// ζ from exact diagonalization of the readout Hamiltonian.
///
/// Dressed states are matched to bare `|n_e, 0 photons, q⟩` by maximal overlap and
/// ζ = [E(e,1) − E(e,0)] − [E(g,1) − E(g,0)]. The value is recomputed at
/// `n_fock + 2` and a truncation warning is raised if it moves by 1% or more.
pub fn zeta_numeric<T: Real>(p: &CircuitParams<T>, n_fock: usize) -> Result<ZetaPoint<T>> {
    zeta_numeric_offset(p, n_fock, T::zero())
}

/// [`zeta_numeric`] with `offset·I` added to the Hamiltonian before diagonalizing.
pub fn zeta_numeric_offset<T: Real>(p: &CircuitParams<T>, n_fock: usize, offset: T) -> Result<ZetaPoint<T>> {
    check_fock(n_fock)?;
    let h = build_h_read(p, n_fock, n_fock)?.shift(offset);
    let d = dressed_energies(&h, p.omega_e)?;
    let h2 = build_h_read(p, n_fock + 2, n_fock + 2)?.shift(offset);
    let d2 = dressed_energies(&h2, p.omega_e)?;

    // A decoupled electron has ζ = 0 exactly; the eigensolver only adds roundoff.
    if p.g_ec == T::zero() {
        return Ok(ZetaPoint {
            omega_e: p.omega_e,
            zeta_analytic: zeta_analytic(p).ok(),
            zeta_approx: zeta_approx(p).ok(),
            zeta_numeric: Some(T::zero()),
            regime: Regime::Dispersive,
            truncation_warning: false,
        });
    }
    let change = (d2.zeta - d.zeta).abs();
    let floor = d.resolution.max(d2.resolution);
    let truncation_warning = change > lit::<T>(0.01) * d.zeta.abs() && change > floor;

    let near = d.ambiguous || p.delta().abs() < lit::<T>(3.0) * p.g_ec;
    Ok(ZetaPoint {
        omega_e: p.omega_e,
        zeta_analytic: zeta_analytic(p).ok(),
        zeta_approx: zeta_approx(p).ok(),
        zeta_numeric: Some(d.zeta),
        regime: if near { Regime::NearResonant } else { Regime::Dispersive },
        truncation_warning,
    })
}

/// Shift of the phonon transition `E(q,1) − E(q,0) − ω_e` for transmon level `q`
/// (0 = g, 1 = e).
pub fn phonon_shift_numeric<T: Real>(p: &CircuitParams<T>, n_fock: usize, qubit: usize) -> Result<T> {
    check_fock(n_fock)?;
    let h = build_h_read(p, n_fock, n_fock)?;
    let d = dressed_energies(&h, p.omega_e)?;
    match qubit {
        0 => Ok(d.shift_g),
        1 => Ok(d.shift_e),
        q => Err(Error::InvalidDimension(format!("qubit level {q} outside two-level model"))),
    }
}

/// Evaluates every ζ estimate on a strictly increasing grid of ω_e (rad/s).
///
/// Points run in parallel; output order follows the grid.
pub fn zeta_sweep<T: Real>(p: &CircuitParams<T>, omega_e_grid: &[T], n_fock: usize) -> Result<Vec<ZetaPoint<T>>> {
    if omega_e_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Contract("ω_e grid must be strictly increasing".into()));
    }
    check_fock(n_fock)?;
    omega_e_grid
        .par_iter()
        .map(|&w| {
            let q = p.with_omega_e(w);
            q.validate()?;
            zeta_numeric(&q, n_fock)
        })
        .collect()
}

/// Uniform grid of `n` points in ω_e/2π ∈ [f_lo, f_hi] (Hz), returned in rad/s.
pub fn frequency_grid(f_lo: f64, f_hi: f64, n: usize) -> Vec<f64> {
    let tau = std::f64::consts::TAU;
    if n == 1 {
        return vec![tau * f_lo];
    }
    (0..n).map(|k| tau * (f_lo + (f_hi - f_lo) * k as f64 / (n - 1) as f64)).collect()
}

fn opt_hz(x: Option<f64>) -> String {
    match x {
        Some(v) => fmt_sig(v / std::f64::consts::TAU),
        None => "nan".to_string(),
    }
}

/// Writes the sweep CSV with a `#` parameter echo.
pub fn write_sweep_csv<W: Write>(out: &mut W, p: &CircuitParams<f64>, n_fock: usize, points: &[ZetaPoint<f64>]) -> Result<()> {
    let tau = std::f64::consts::TAU;
    writeln!(
        out,
        "# omega_mw_hz={} omega_q_hz={} g_ec_hz={} g_sc_hz={} n_fock={}",
        fmt_sig(p.omega_mw / tau),
        fmt_sig(p.omega_q / tau),
        fmt_sig(p.g_ec / tau),
        fmt_sig(p.g_sc / tau),
        n_fock
    )?;
    writeln!(out, "omega_e_hz,zeta_analytic_hz,zeta_approx_hz,zeta_numeric_hz,regime")?;
    for pt in points {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_sig(pt.omega_e / tau),
            opt_hz(pt.zeta_analytic),
            opt_hz(pt.zeta_approx),
            opt_hz(pt.zeta_numeric),
            pt.regime.as_str()
        )?;
    }
    Ok(())
}

/// Electrical readout link budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReadoutBudget<T: Real = f64> {
    /// k_B·T_N (W/Hz).
    pub noise_density_w_per_hz: T,
    pub noise_density_dbm_per_hz: T,
    pub noise_temperature_k: T,
    /// Cavity-enhanced emission 4g_ec²/κ (1/s).
    pub emission_rate: T,
    /// κ_ext/κ.
    pub extraction_efficiency: T,
    /// Phonon number giving unit signal-to-noise.
    pub n_min: T,
}

/// Amplifier noise temperature equivalent to −195 dBm/Hz.
pub const DEFAULT_NOISE_TEMPERATURE_K: f64 = 2.29;
/// Intrinsic quality factor assumed for the readout mode.
pub const DEFAULT_READOUT_Q: f64 = 1e5;

/// Noise temperature whose k_B·T equals `dbm_per_hz`.
pub fn noise_temperature_for_dbm<T: Real>(dbm_per_hz: T) -> T {
    let k = Constants::<T>::get();
    let watts = lit::<T>(1e-3) * lit::<T>(10.0).powf(dbm_per_hz / lit(10.0));
    watts / k.kb
}

pub fn readout_budget<T: Real>(omega_mw: T, g_ec: T, kappa_int: T, kappa_ext: T, noise_temperature: T) -> Result<ReadoutBudget<T>> {
    let z = T::zero();
    if !(omega_mw > z && kappa_int >= z && kappa_ext >= z && kappa_int + kappa_ext > z && noise_temperature > z) {
        return Err(Error::Contract("readout budget needs positive rates and temperature".into()));
    }
    let k = Constants::<T>::get();
    let kappa = kappa_int + kappa_ext;
    let eta = kappa_ext / kappa;
    let density = k.kb * noise_temperature;
    let dbm = lit::<T>(10.0) * (density / lit(1e-3)).log10();
    // η → 0 leaves nothing to detect.
    let n_min = if eta > z { density / (k.hbar * omega_mw * eta) } else { T::max_value().unwrap() };
    Ok(ReadoutBudget {
        noise_density_w_per_hz: density,
        noise_density_dbm_per_hz: dbm,
        noise_temperature_k: noise_temperature,
        emission_rate: lit::<T>(4.0) * g_ec * g_ec / kappa,
        extraction_efficiency: eta,
        n_min,
    })
}

/// Ratio of |ζ| to the fastest decoherence rate among phonon, cavity and qubit.
/// Values above one mean phonon-number-resolved readout.
pub fn strong_dispersive_ratio<T: Real>(zeta: T, phonon_coherence_s: T, qubit_coherence_s: T, cavity_decay_rate: T) -> T {
    let worst = (T::one() / phonon_coherence_s).max(T::one() / qubit_coherence_s).max(cavity_decay_rate);
    zeta.abs() / worst
}
