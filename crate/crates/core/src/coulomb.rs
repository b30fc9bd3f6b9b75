//! Electron–ion Coulomb expansion and the optomechanical-like coupling constants.
//!
//! `V(x, y) = −k/(L − y + x)` with `k = e²/4πε₀`, `x` the electron and `y` the ion
//! displacement. Expanding in `x/L`, `y/L` gives
//! `c[i][j] = −(k/L^{i+j+1})·C(i+j, i)·(−1)^i`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::cooling::{bose_einstein, sympathetic_steady_state, SympatheticParams};
use crate::error::{Error, Result};
use crate::hamiltonians::{Constants, ElectronIonParams};
use crate::report::fmt_sig;
use crate::scalar::{lit, to_f64, Real};

/// Expansion order used throughout; matches the x⁴, y⁴ truncation.
pub const DEFAULT_ORDER: usize = 4;

/// Taylor coefficients of `V` about the trap centres, `c[i][j]` multiplying `xⁱyʲ` (J/mⁱ⁺ʲ).
#[derive(Clone, Debug, PartialEq)]
pub struct TaylorCoeffs<T: Real = f64> {
    pub order: usize,
    c: Vec<Vec<T>>,
}

impl<T: Real> TaylorCoeffs<T> {
    /// Coefficient of `xⁱyʲ`; `None` beyond the expansion order.
    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        if i + j > self.order {
            return None;
        }
        Some(self.c[i][j])
    }

    fn at(&self, i: usize, j: usize) -> T {
        self.c[i][j]
    }

    /// Largest relative deviation from `other` over all shared entries.
    pub fn max_rel_diff(&self, other: &Self) -> T {
        let n = self.order.min(other.order);
        let mut worst = T::zero();
        for i in 0..=n {
            for j in 0..=(n - i) {
                let (a, b) = (self.at(i, j), other.at(i, j));
                let d = (a - b).abs() / b.abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, m| acc * (n - m) as f64 / (m + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, m| acc * m as f64)
}

fn check_order(order: usize) -> Result<()> {
    if order < DEFAULT_ORDER {
        return Err(Error::Contract(format!("expansion order {order} below {DEFAULT_ORDER}")));
    }
    Ok(())
}

/// `k/L^{n+1}` for n = 0..=order, rejecting non-finite results.
fn scales<T: Real>(separation: T, order: usize) -> Result<Vec<T>> {
    let k = Constants::<T>::get().coulomb_k();
    let mut out = Vec::with_capacity(order + 1);
    let mut s = k / separation;
    for _ in 0..=order {
        if !s.is_finite() || s == T::zero() {
            return Err(Error::StepSize(format!(
                "k/L^n leaves the representable range at L = {:e} m",
                to_f64(separation)
            )));
        }
        out.push(s);
        s /= separation;
    }
    Ok(out)
}

/// Closed-form coefficients.
pub fn analytic_coefficients<T: Real>(p: &ElectronIonParams<T>, order: usize) -> Result<TaylorCoeffs<T>> {
    check_order(order)?;
    if !(p.separation > T::zero()) {
        return Err(Error::Contract("separation must be positive".into()));
    }
    let sc = scales(p.separation, order)?;
    let c = (0..=order)
        .map(|i| {
            (0..=(order - i))
                .map(|j| {
                    let sign = if i % 2 == 0 { -1.0 } else { 1.0 };
                    sc[i + j] * lit(sign * binomial(i + j, i))
                })
                .collect()
        })
        .collect();
    Ok(TaylorCoeffs { order, c })
}

/// Scaled potential `V·L/k = −1/(1 + s − t)`, with `s = x/L`, `t = y/L`.
fn scaled_potential<T: Real>(s: T, t: T) -> T {
    -T::one() / (T::one() + s - t)
}

/// Weights and offsets (in units of h) of the central difference `δᵐ`.
fn central_stencil(m: usize) -> Vec<(f64, f64)> {
    (0..=m)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            (sign * binomial(m, k), m as f64 / 2.0 - k as f64)
        })
        .collect()
}

/// `∂ⁱ_s ∂ʲ_t` of the scaled potential at the origin, second-order accurate in h.
fn mixed_difference<T: Real>(i: usize, j: usize, h: T) -> Result<T> {
    let (si, sj) = (central_stencil(i), central_stencil(j));
    let mut acc = T::zero();
    for &(wi, oi) in &si {
        for &(wj, oj) in &sj {
            let v = scaled_potential(lit::<T>(oi) * h, lit::<T>(oj) * h);
            if !v.is_finite() {
                return Err(Error::StepSize(format!("stencil value not finite at order ({i}, {j})")));
            }
            acc += lit::<T>(wi * wj) * v;
        }
    }
    let d = acc / h.powi((i + j) as i32);
    if !d.is_finite() {
        return Err(Error::StepSize(format!("difference quotient not finite at order ({i}, {j})")));
    }
    Ok(d)
}

/// Relative step for a derivative of total order `n`: balances rounding `ε/hⁿ`
/// against the `h⁴` error left after one Richardson step.
pub fn oracle_step<T: Real>(n: usize) -> T {
    T::default_epsilon().powf(lit(1.0 / (n as f64 + 4.0)))
}

/// Brute-force coefficients from central finite differences of `V`, one
/// Richardson extrapolation per entry.
pub fn taylor_oracle<T: Real>(p: &ElectronIonParams<T>, order: usize) -> Result<TaylorCoeffs<T>> {
    check_order(order)?;
    if !(p.separation > T::zero()) {
        return Err(Error::Contract("separation must be positive".into()));
    }
    let sc = scales(p.separation, order)?;
    let mut c = Vec::with_capacity(order + 1);
    for i in 0..=order {
        let mut row = Vec::with_capacity(order + 1 - i);
        for j in 0..=(order - i) {
            let n = i + j;
            let h = oracle_step::<T>(n);
            let coarse = mixed_difference(i, j, h)?;
            let fine = mixed_difference(i, j, h / lit(2.0))?;
            let d = (lit::<T>(4.0) * fine - coarse) / lit(3.0);
            row.push(sc[n] * d / lit(factorial(i) * factorial(j)));
        }
        c.push(row);
    }
    Ok(TaylorCoeffs { order, c })
}

/// Where a coupling value came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Provenance {
    ClosedForm,
    Oracle,
    /// Combines closed-form and oracle inputs.
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CouplingSources {
    pub g0: Provenance,
    pub g_c: Provenance,
    pub alpha: Provenance,
    pub alpha_c: Provenance,
    pub g_max: Provenance,
}

/// Coupling constants of the electron–ion Hamiltonian (rad/s) and the zero-point lengths (m).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CouplingSet<T: Real = f64> {
    pub g0: T,
    /// Coulomb part of g₀ alone.
    pub g0_coulomb: T,
    pub g_c: T,
    pub alpha: T,
    pub alpha_c: T,
    pub g_max: T,
    pub x_zpf: T,
    pub y_zpf: T,
    pub sources: CouplingSources,
}

/// `g₀ = 6k x²y/(ħL⁴) − 2g_Cβ/(ω_e − ω_i)`, `α = α_C + α_K − 6β²/ω_e`,
/// `α_C = 12k x⁴/(ħL⁵)`, `g_max = g₀²/|α|`.
pub fn coupling_constants<T: Real>(p: &ElectronIonParams<T>) -> Result<CouplingSet<T>> {
    p.validate()?;
    let hbar = Constants::<T>::get().hbar;
    let (x, y) = (p.x_zpf(), p.y_zpf());
    let closed = analytic_coefficients(p, DEFAULT_ORDER)?;
    let oracle = taylor_oracle(p, DEFAULT_ORDER)?;

    let g0_coulomb = lit::<T>(-2.0) * closed.at(2, 1) * x * x * y / hbar;
    let alpha_c = lit::<T>(-12.0) * closed.at(4, 0) * x * x * x * x / hbar;
    let g_c = oracle.at(1, 1) * x * y / hbar;

    let g0 = g0_coulomb - lit::<T>(2.0) * g_c * p.beta / (p.omega_e - p.omega_i);
    let alpha = alpha_c + p.alpha_k - lit::<T>(6.0) * p.beta * p.beta / p.omega_e;
    if alpha == T::zero() {
        return Err(Error::Singular("α = 0 leaves g_max undefined".into()));
    }
    let g_max = g0 * g0 / alpha.abs();

    let beta_used = p.beta != T::zero();
    Ok(CouplingSet {
        g0,
        g0_coulomb,
        g_c,
        alpha,
        alpha_c,
        g_max,
        x_zpf: x,
        y_zpf: y,
        sources: CouplingSources {
            g0: if beta_used { Provenance::Mixed } else { Provenance::ClosedForm },
            g_c: Provenance::Oracle,
            alpha: Provenance::ClosedForm,
            alpha_c: Provenance::ClosedForm,
            g_max: if beta_used { Provenance::Mixed } else { Provenance::ClosedForm },
        },
    })
}

/// Solves the β term of g₀ for a requested total g₀ (rad/s). Returns β in rad/s.
pub fn calibrate_beta<T: Real>(p: &ElectronIonParams<T>, target_g0: T) -> Result<T> {
    let base = coupling_constants(&ElectronIonParams { beta: T::zero(), ..*p })?;
    if base.g_c == T::zero() {
        return Err(Error::Singular("g_C = 0; β does not enter g₀".into()));
    }
    Ok((base.g0_coulomb - target_g0) * (p.omega_e - p.omega_i) / (lit::<T>(2.0) * base.g_c))
}

/// Which sideband the electron drive addresses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SidebandMode {
    /// Drive at ω_e + ω_i, giving `g(â†ĉ† + âĉ)`.
    TwoModeSqueeze,
    /// Drive at ω_e − ω_i, giving `g(â†ĉ + âĉ†)`.
    BeamSplitter,
}

impl SidebandMode {
    pub fn drive_frequency<T: Real>(self, omega_e: T, omega_i: T) -> T {
        match self {
            SidebandMode::TwoModeSqueeze => omega_e + omega_i,
            SidebandMode::BeamSplitter => omega_e - omega_i,
        }
    }
}

/// `g = g₀√n_d`. The mode only tags the sideband; the magnitude is the same.
pub fn linearized_coupling<T: Real>(g0: T, n_d: T, _mode: SidebandMode) -> Result<T> {
    if !(n_d >= T::zero()) {
        return Err(Error::Contract("drive occupation n_d must be non-negative".into()));
    }
    Ok(g0 * n_d.sqrt())
}

/// Drive occupation at which `g₀√n_d` reaches `g_max`.
pub fn saturation_drive<T: Real>(g0: T, g_max: T) -> Result<T> {
    if g0 == T::zero() {
        return Err(Error::Singular("g₀ = 0".into()));
    }
    Ok((g_max / g0) * (g_max / g0))
}

/// Published coupling table row. Frequencies in rad/s, L in m.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PublishedRow {
    pub omega_e: f64,
    pub separation: f64,
    pub g0: f64,
    pub alpha: f64,
    pub n_e: f64,
}

/// The four published rows, ω_i/2π = 2 MHz for all.
pub fn published_rows() -> [PublishedRow; 4] {
    let tau = std::f64::consts::TAU;
    let row = |fe_mhz: f64, l_um: f64, g0_khz: f64, alpha_khz: f64, n_e: f64| PublishedRow {
        omega_e: tau * fe_mhz * 1e6,
        separation: l_um * 1e-6,
        g0: tau * g0_khz * 1e3,
        alpha: tau * alpha_khz * 1e3,
        n_e,
    };
    [
        row(800.0, 10.0, 33.0, -33.0, 5.3e-2),
        row(800.0, 50.0, 0.39, -34.0, 5.9),
        row(500.0, 10.0, 39.0, -2.6e3, 3.8e-2),
        row(500.0, 7.0, 1.6e3, -2.5e3, 2.2e-3),
    ]
}

/// Inputs shared by all table rows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TableSettings {
    pub omega_i: f64,
    /// Ion cooling rate Γ_i (1/s).
    pub gamma_i: f64,
    /// Electron–bath coupling Γ_th^e (1/s).
    pub gamma_th_e: f64,
    pub temperature: f64,
    pub beta: f64,
    pub alpha_k: f64,
}

impl Default for TableSettings {
    fn default() -> Self {
        let tau = std::f64::consts::TAU;
        Self {
            omega_i: tau * 2e6,
            gamma_i: tau * 10e3,
            gamma_th_e: 10.0,
            temperature: 0.3,
            beta: 0.0,
            alpha_k: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TableLine {
    pub published: PublishedRow,
    pub couplings: CouplingSet<f64>,
    /// Drive occupation, capped at one phonon.
    pub n_d: f64,
    /// Linearized beam-splitter coupling used for cooling (rad/s).
    pub g: f64,
    pub n_th: f64,
    pub n_e: f64,
    pub weak_coupling_valid: bool,
    /// `g₀²/|α|` from the published g₀ and α (rad/s).
    pub g_max_published: f64,
}

/// Computes each row with `settings` and pairs it with the published values.
///
/// The drive is `n_d = min(1, (g_max/g₀)²)`, i.e. at most one phonon and never
/// past the Kerr saturation.
pub fn table2_report(rows: &[PublishedRow], settings: &TableSettings) -> Result<Vec<TableLine>> {
    rows.par_iter()
        .map(|row| {
            let p = ElectronIonParams {
                beta: settings.beta,
                alpha_k: settings.alpha_k,
                ..ElectronIonParams::beryllium(row.omega_e, settings.omega_i, row.separation)
            };
            let couplings = coupling_constants(&p)?;
            let n_d = saturation_drive(couplings.g0, couplings.g_max)?.min(1.0);
            let g = linearized_coupling(couplings.g0, n_d, SidebandMode::BeamSplitter)?;
            let n_th = bose_einstein(row.omega_e, settings.temperature);
            let sym = sympathetic_steady_state(&SympatheticParams {
                g: g.abs(),
                gamma_i: settings.gamma_i,
                gamma_th_e: settings.gamma_th_e,
                n_th,
            })?;
            Ok(TableLine {
                published: *row,
                couplings,
                n_d,
                g,
                n_th,
                n_e: sym.n_e,
                weak_coupling_valid: sym.weak_coupling_valid,
                g_max_published: row.g0 * row.g0 / row.alpha.abs(),
            })
        })
        .collect()
}

/// Table CSV: `omega_e_hz, L_um, g0_calc_khz, g0_paper_khz, alpha_calc_khz,
/// alpha_paper_khz, gmax_khz, ne_calc, ne_paper`.
pub fn write_table_csv<W: Write>(out: &mut W, settings: &TableSettings, lines: &[TableLine]) -> Result<()> {
    let tau = std::f64::consts::TAU;
    let khz = |w: f64| fmt_sig(w / tau / 1e3);
    writeln!(
        out,
        "# omega_i_hz={} gamma_i_per_s={} gamma_th_e_per_s={} temperature_k={} beta_rad_s={} alpha_k_rad_s={}",
        fmt_sig(settings.omega_i / tau),
        fmt_sig(settings.gamma_i),
        fmt_sig(settings.gamma_th_e),
        fmt_sig(settings.temperature),
        fmt_sig(settings.beta),
        fmt_sig(settings.alpha_k)
    )?;
    writeln!(out, "omega_e_hz,L_um,g0_calc_khz,g0_paper_khz,alpha_calc_khz,alpha_paper_khz,gmax_khz,ne_calc,ne_paper")?;
    for l in lines {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt_sig(l.published.omega_e / tau),
            fmt_sig(l.published.separation * 1e6),
            khz(l.couplings.g0),
            khz(l.published.g0),
            khz(l.couplings.alpha),
            khz(l.published.alpha),
            khz(l.couplings.g_max),
            fmt_sig(l.n_e),
            fmt_sig(l.published.n_e)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn row1() -> ElectronIonParams {
        ElectronIonParams::beryllium(TAU * 800e6, TAU * 2e6, 10e-6)
    }

    #[test]
    fn named_coefficients() {
        let p = row1();
        let k = Constants::<f64>::get().coulomb_k();
        let l = p.separation;
        let c = analytic_coefficients(&p, 4).unwrap();
        assert_eq!(c.get(1, 0).unwrap(), k / (l * l));
        assert!((c.get(1, 1).unwrap() / (2.0 * k / l.powi(3)) - 1.0).abs() < 1e-14);
        assert!((c.get(2, 1).unwrap() / (-3.0 * k / l.powi(4)) - 1.0).abs() < 1e-14);
        assert!((c.get(4, 0).unwrap() / (-k / l.powi(5)) - 1.0).abs() < 1e-14);
        assert!(c.get(3, 2).is_none());
    }

    #[test]
    fn oracle_matches_closed_form() {
        for l_um in [7.0, 10.0, 50.0] {
            let p = ElectronIonParams { separation: l_um * 1e-6, ..row1() };
            let a = analytic_coefficients(&p, 4).unwrap();
            let o = taylor_oracle(&p, 4).unwrap();
            let d = o.max_rel_diff(&a);
            assert!(d < 1e-7, "L = {l_um} µm: {d:e}");
        }
    }

    #[test]
    fn oracle_rejects_low_order() {
        assert!(matches!(taylor_oracle(&row1(), 3), Err(Error::Contract(_))));
    }

    #[test]
    fn oracle_flags_overflow() {
        let p = ElectronIonParams { separation: 1e-300, ..row1() };
        assert!(matches!(taylor_oracle(&p, 4), Err(Error::StepSize(_))));
    }

    #[test]
    fn row1_values() {
        let c = coupling_constants(&row1()).unwrap();
        assert!((c.x_zpf - 1.073e-7).abs() < 1e-9, "{}", c.x_zpf);
        assert!((c.y_zpf - 1.674e-8).abs() < 2e-10, "{}", c.y_zpf);
        assert!((c.g0 / TAU / 1e3 - 40.3).abs() < 0.1, "{}", c.g0 / TAU);
        assert!((c.alpha_c / TAU / 1e3 - 5.54).abs() < 0.02, "{}", c.alpha_c / TAU);
        assert!(c.alpha_c > 0.0 && c.g0_coulomb > 0.0);
        assert!((c.g_max - c.g0 * c.g0 / c.alpha.abs()).abs() <= 1e-12 * c.g_max);
        assert_eq!(c.sources.g_c, Provenance::Oracle);
    }

    #[test]
    fn beta_calibration_roundtrip() {
        let p = row1();
        let target = TAU * 33e3;
        let beta = calibrate_beta(&p, target).unwrap();
        let c = coupling_constants(&ElectronIonParams { beta, ..p }).unwrap();
        assert!((c.g0 / target - 1.0).abs() < 1e-12);
        assert_eq!(c.sources.g0, Provenance::Mixed);
        assert!(c.alpha < c.alpha_c);
    }

    #[test]
    fn zero_alpha_is_singular() {
        let p = row1();
        let c = coupling_constants(&p).unwrap();
        let p = ElectronIonParams { alpha_k: -c.alpha_c, ..p };
        assert!(matches!(coupling_constants(&p), Err(Error::Singular(_))));
    }

    #[test]
    fn linearized_limits() {
        let g0 = TAU * 39e3;
        assert_eq!(linearized_coupling(g0, 0.0, SidebandMode::BeamSplitter).unwrap(), 0.0);
        assert_eq!(linearized_coupling(g0, 1.0, SidebandMode::TwoModeSqueeze).unwrap(), g0);
        let gmax = TAU * 1.0e3;
        let nd = saturation_drive(g0, gmax).unwrap();
        let g = linearized_coupling(g0, nd, SidebandMode::BeamSplitter).unwrap();
        assert!((g / gmax - 1.0).abs() < 1e-12);
        assert!(linearized_coupling(g0, -1.0, SidebandMode::BeamSplitter).is_err());
        assert_eq!(SidebandMode::BeamSplitter.drive_frequency(5.0, 2.0), 3.0);
    }

    #[test]
    fn published_gmax_row4() {
        let r = published_rows()[3];
        let gmax = r.g0 * r.g0 / r.alpha.abs();
        assert!((gmax / TAU / 1e3 - 1024.0).abs() < 1e-9);
    }

    #[test]
    fn table_has_four_rows() {
        let lines = table2_report(&published_rows(), &TableSettings::default()).unwrap();
        assert_eq!(lines.len(), 4);
        for l in &lines {
            assert!(l.n_d <= 1.0 && l.n_e > 0.0 && l.n_e <= l.n_th);
        }
        let mut buf = Vec::new();
        write_table_csv(&mut buf, &TableSettings::default(), &lines).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn f32_closed_form() {
        let p = ElectronIonParams::<f32>::beryllium(TAU as f32 * 800e6, TAU as f32 * 2e6, 10e-6);
        let c = coupling_constants(&p).unwrap();
        assert!((c.g0 / TAU as f32 / 1e3 - 40.28).abs() < 0.1);
    }
}
