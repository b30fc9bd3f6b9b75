//! Measurement-based cooling of the readout mode with a three-level transmon.
//!
//! Each cycle: sideband π pulse |g,n⟩↔|f,n−1⟩, π pulse |f,n⟩↔|e,n⟩, projective
//! qubit readout with conditional reset |e,n⟩→|g,n⟩, then thermal refill of the
//! cavity for the duration of the cycle. Only diagonal populations are tracked.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use super::bose_einstein;
use crate::error::{Error, Result};
use crate::hamiltonians::ThermalEnv;
use crate::report::fmt_sig;
use crate::scalar::{lit, to_f64, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QubitLevel {
    G = 0,
    E = 1,
    F = 2,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoolingProtocolParams<T: Real = f64> {
    /// Rabi frequency of |g,1⟩↔|f,0⟩ (rad/s).
    pub rabi_gf: T,
    /// Rabi frequency of |e,0⟩↔|f,0⟩ (rad/s).
    pub rabi_ef: T,
    /// Rabi frequency of the |e,0⟩→|g,0⟩ reset (rad/s).
    pub rabi_ge: T,
    /// Failure probability of each π pulse.
    pub pulse_error: T,
    pub t_meas: T,
    /// Probability of reporting the wrong qubit state.
    pub readout_error: T,
    pub n_cavity_max: usize,
    /// Cavity frequency setting the refill target (rad/s).
    pub cavity_omega: T,
    /// Bath for the refill step; `gamma_th = 0` disables it.
    pub refill: ThermalEnv<T>,
    /// Apply the sideband pulse to every |g,n⟩↔|f,n−1⟩ pair, not only n = 1.
    pub ladder: bool,
}

impl<T: Real> CoolingProtocolParams<T> {
    /// A few MHz on the f-transitions, 10 MHz reset, 1 µs readout, 1% errors,
    /// refill from a 300 mK bath into a Q = 10⁶ mode at 1 GHz.
    pub fn defaults() -> Self {
        let tau = T::two_pi();
        let omega = tau * lit(1e9);
        Self {
            rabi_gf: tau * lit(3e6),
            rabi_ef: tau * lit(3e6),
            rabi_ge: tau * lit(10e6),
            pulse_error: lit(0.01),
            t_meas: lit(1e-6),
            readout_error: lit(0.01),
            n_cavity_max: 40,
            cavity_omega: omega,
            refill: ThermalEnv { temperature: lit(0.3), gamma_th: omega / lit(1e6), heating: T::zero() },
            ladder: true,
        }
    }

    /// Perfect pulses and readout, no refill.
    pub fn ideal(n_cavity_max: usize) -> Self {
        Self {
            pulse_error: T::zero(),
            readout_error: T::zero(),
            n_cavity_max,
            refill: ThermalEnv { temperature: T::zero(), gamma_th: T::zero(), heating: T::zero() },
            ..Self::defaults()
        }
    }

    /// π/Ω_gf + π/Ω_ef + t_meas + π/Ω_ge.
    pub fn cycle_time(&self) -> T {
        let pi = T::pi();
        pi / self.rabi_gf + pi / self.rabi_ef + self.t_meas + pi / self.rabi_ge
    }

    pub fn validate(&self) -> Result<()> {
        let (z, one) = (T::zero(), T::one());
        if !(self.rabi_gf > z && self.rabi_ef > z && self.rabi_ge > z && self.t_meas >= z) {
            return Err(Error::Contract("Rabi frequencies must be positive".into()));
        }
        if !(self.pulse_error >= z && self.pulse_error < one && self.readout_error >= z && self.readout_error < one) {
            return Err(Error::Contract("error probabilities must lie in [0, 1)".into()));
        }
        if self.n_cavity_max < 1 {
            return Err(Error::InvalidDimension("n_cavity_max must be >= 1".into()));
        }
        if !(self.cycle_time() > z) {
            return Err(Error::Contract("cycle time must be positive".into()));
        }
        Ok(())
    }
}

/// Populations `p[ξ][n]` over qubit level ξ ∈ {g, e, f} and cavity Fock number n.
#[derive(Clone, Debug, PartialEq)]
pub struct PopulationState<T: Real = f64> {
    pub p: [Vec<T>; 3],
    pub time: T,
}

impl<T: Real> PopulationState<T> {
    pub fn ground(n_cavity_max: usize) -> Self {
        let mut g = vec![T::zero(); n_cavity_max + 1];
        g[0] = T::one();
        Self { p: [g, vec![T::zero(); n_cavity_max + 1], vec![T::zero(); n_cavity_max + 1]], time: T::zero() }
    }

    /// Qubit in g, cavity in a thermal state of mean `n_mean` truncated at `n_cavity_max`.
    pub fn thermal(n_mean: T, n_cavity_max: usize) -> Self {
        let mut s = Self::ground(n_cavity_max);
        let r = n_mean / (n_mean + T::one());
        let mut w = T::one();
        for n in 0..=n_cavity_max {
            s.p[0][n] = w;
            w *= r;
        }
        s.normalize();
        s
    }

    pub fn n_cavity_max(&self) -> usize {
        self.p[0].len() - 1
    }

    pub fn get(&self, level: QubitLevel, n: usize) -> T {
        self.p[level as usize][n]
    }

    pub fn total(&self) -> T {
        self.p.iter().flatten().fold(T::zero(), |a, &b| a + b)
    }

    pub fn normalize(&mut self) {
        let t = self.total();
        for v in self.p.iter_mut().flatten() {
            *v /= t;
        }
    }

    pub fn mean_cavity(&self) -> T {
        self.p
            .iter()
            .flat_map(|level| level.iter().enumerate())
            .fold(T::zero(), |acc, (n, &v)| acc + lit::<T>(n as f64) * v)
    }

    /// Cavity Fock distribution traced over the qubit.
    pub fn cavity_distribution(&self) -> Vec<T> {
        (0..=self.n_cavity_max()).map(|n| self.p[0][n] + self.p[1][n] + self.p[2][n]).collect()
    }

    pub fn p_g0(&self) -> T {
        self.p[0][0]
    }

    /// Σp², a purity proxy for the diagonal state.
    pub fn purity_proxy(&self) -> T {
        self.p.iter().flatten().fold(T::zero(), |a, &b| a + b * b)
    }

    fn check_normalized(&self) -> Result<()> {
        if self.p.iter().flatten().any(|&v| v < T::zero()) {
            return Err(Error::Contract("negative population".into()));
        }
        let dev = (self.total() - T::one()).abs();
        if dev > lit::<T>(1e-9).max(T::exact_tol()) {
            return Err(Error::Contract(format!("populations sum to 1 {:+e}", to_f64(dev))));
        }
        Ok(())
    }
}

/// Partial population transfer between two slots with success probability `s`.
fn swap<T: Real>(a: &mut T, b: &mut T, s: T) {
    let (x, y) = (*a, *b);
    *a = x + s * (y - x);
    *b = y + s * (x - y);
}

/// One protocol cycle with its refill propagator precomputed.
#[derive(Clone, Debug)]
pub struct CoolingCycle<T: Real = f64> {
    params: CoolingProtocolParams<T>,
    refill: Option<DMatrix<T>>,
}

impl<T: Real> CoolingCycle<T> {
    pub fn new(params: CoolingProtocolParams<T>) -> Result<Self> {
        params.validate()?;
        let refill = if params.refill.gamma_th > T::zero() || params.refill.heating > T::zero() {
            Some(refill_propagator(&params, params.cycle_time()))
        } else {
            None
        };
        Ok(Self { params, refill })
    }

    pub fn params(&self) -> &CoolingProtocolParams<T> {
        &self.params
    }

    fn success(&self) -> T {
        T::one() - self.params.pulse_error
    }

    /// (i) |g,n⟩ ↔ |f,n−1⟩.
    pub fn sideband_pulse(&self, s: &mut PopulationState<T>) {
        let ok = self.success();
        let top = if self.params.ladder { s.n_cavity_max() } else { 1.min(s.n_cavity_max()) };
        let [g, _, f] = &mut s.p;
        for n in 1..=top {
            swap(&mut g[n], &mut f[n - 1], ok);
        }
    }

    /// (ii) |f,n⟩ ↔ |e,n⟩.
    pub fn ef_pulse(&self, s: &mut PopulationState<T>) {
        let ok = self.success();
        let [_, e, f] = &mut s.p;
        for n in 0..e.len() {
            swap(&mut e[n], &mut f[n], ok);
        }
    }

    /// (iii) Readout; an "e" outcome triggers the |e,n⟩→|g,n⟩ reset pulse.
    pub fn measure_and_reset(&self, s: &mut PopulationState<T>) {
        let ok = self.success();
        let r = self.params.readout_error;
        let [g, e, _] = &mut s.p;
        for n in 0..g.len() {
            // Reset fires for true e with prob 1−r and for g misread as e with prob r.
            let from_e = e[n] * (T::one() - r) * ok;
            let from_g = g[n] * r * ok;
            e[n] = e[n] - from_e + from_g;
            g[n] = g[n] - from_g + from_e;
        }
    }

    /// (iv) Thermal refill of the cavity over one cycle.
    pub fn refill(&self, s: &mut PopulationState<T>) {
        if let Some(prop) = &self.refill {
            for level in s.p.iter_mut() {
                let v = DVector::from_column_slice(level);
                let out = prop * v;
                level.copy_from_slice(out.as_slice());
            }
        }
    }

    pub fn step(&self, s: &mut PopulationState<T>) {
        self.sideband_pulse(s);
        s.normalize();
        self.ef_pulse(s);
        s.normalize();
        self.measure_and_reset(s);
        s.normalize();
        self.refill(s);
        s.normalize();
        s.time += self.params.cycle_time();
    }
}

/// Evolves cavity populations under the thermal rate equation for `duration`.
///
/// Up rate `(Γn̄ + Λ)(n+1)`, down rate `(Γ(n̄+1) + Λ)n`, reflecting at the truncation.
pub fn refill_propagator<T: Real>(p: &CoolingProtocolParams<T>, duration: T) -> DMatrix<T> {
    let m = p.n_cavity_max + 1;
    let nbar = bose_einstein(p.cavity_omega, p.refill.temperature);
    let up = p.refill.gamma_th * nbar + p.refill.heating;
    let down = p.refill.gamma_th * (nbar + T::one()) + p.refill.heating;
    let mut w = DMatrix::<T>::zeros(m, m);
    for n in 0..m {
        let nf = lit::<T>(n as f64);
        if n + 1 < m {
            let rate = up * (nf + T::one());
            w[(n + 1, n)] += rate;
            w[(n, n)] -= rate;
        }
        if n > 0 {
            let rate = down * nf;
            w[(n - 1, n)] += rate;
            w[(n, n)] -= rate;
        }
    }
    (w * duration).exp()
}

/// Runs `n_cycles` cycles; the returned trajectory starts with `init`.
pub fn run_cooling_protocol<T: Real>(
    params: &CoolingProtocolParams<T>,
    init: &PopulationState<T>,
    n_cycles: usize,
) -> Result<Vec<PopulationState<T>>> {
    init.check_normalized()?;
    if init.n_cavity_max() != params.n_cavity_max {
        return Err(Error::Shape(format!(
            "state truncated at {} but protocol expects {}",
            init.n_cavity_max(),
            params.n_cavity_max
        )));
    }
    let cycle = CoolingCycle::new(*params)?;
    let mut traj = Vec::with_capacity(n_cycles + 1);
    let mut s = init.clone();
    traj.push(s.clone());
    for _ in 0..n_cycles {
        cycle.step(&mut s);
        traj.push(s.clone());
    }
    Ok(traj)
}

/// End-of-cycle cavity occupation once successive cycles agree to `tol`.
pub fn steady_state_occupation<T: Real>(params: &CoolingProtocolParams<T>, tol: T, max_cycles: usize) -> Result<T> {
    let cycle = CoolingCycle::new(*params)?;
    let mut s = PopulationState::thermal(bose_einstein(params.cavity_omega, params.refill.temperature), params.n_cavity_max);
    let mut last = s.mean_cavity();
    for _ in 0..max_cycles {
        cycle.step(&mut s);
        let now = s.mean_cavity();
        if (now - last).abs() < tol {
            return Ok(now);
        }
        last = now;
    }
    Err(Error::NoConvergence(format!("steady state not reached in {max_cycles} cycles")))
}

/// Trajectory CSV: `cycle, time_s, mean_n_cavity, p_g0, purity_proxy`.
pub fn write_trajectory_csv<W: Write>(out: &mut W, params: &CoolingProtocolParams<f64>, traj: &[PopulationState<f64>]) -> Result<()> {
    writeln!(
        out,
        "# cycle_time_s={} pulse_error={} readout_error={} n_cavity_max={} refill_rate={} temperature_k={}",
        fmt_sig(params.cycle_time()),
        fmt_sig(params.pulse_error),
        fmt_sig(params.readout_error),
        params.n_cavity_max,
        fmt_sig(params.refill.gamma_th),
        fmt_sig(params.refill.temperature)
    )?;
    writeln!(out, "cycle,time_s,mean_n_cavity,p_g0,purity_proxy")?;
    for (k, s) in traj.iter().enumerate() {
        writeln!(
            out,
            "{k},{},{},{},{}",
            fmt_sig(s.time),
            fmt_sig(s.mean_cavity()),
            fmt_sig(s.p_g0()),
            fmt_sig(s.purity_proxy())
        )?;
    }
    Ok(())
}
