//! Lorentzian fits of two-port transmission magnitudes and the Q_int/Q_ext split.
//!
//! Power transmission is modelled as
//! `|S21|² = P·(κ/2)²/((f − f₀)² + (κ/2)²) + b`, with the trace normalized so a
//! lossless symmetric two-port would reach unity. Then `√P = κ_ext/κ`.

use std::io::{BufRead, Write};

use nalgebra::{Matrix4, Vector4};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::report::fmt_sig;

pub const MIN_SAMPLES: usize = 16;
pub const MAX_ITERATIONS: usize = 200;
pub const STEP_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MagnitudeUnits {
    /// |S21|.
    Linear,
    /// 20·log₁₀|S21|.
    Db,
}

impl MagnitudeUnits {
    pub fn as_str(self) -> &'static str {
        match self {
            MagnitudeUnits::Linear => "linear",
            MagnitudeUnits::Db => "db",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumTrace {
    pub freq: Vec<f64>,
    pub mag: Vec<f64>,
    pub units: MagnitudeUnits,
}

impl SpectrumTrace {
    pub fn new(freq: Vec<f64>, mag: Vec<f64>, units: MagnitudeUnits) -> Result<Self> {
        if freq.len() != mag.len() {
            return Err(Error::Shape(format!("{} frequencies but {} magnitudes", freq.len(), mag.len())));
        }
        if freq.len() < MIN_SAMPLES {
            return Err(Error::Contract(format!("trace needs at least {MIN_SAMPLES} samples, has {}", freq.len())));
        }
        if freq.iter().chain(&mag).any(|v| !v.is_finite()) {
            return Err(Error::Contract("trace contains non-finite samples".into()));
        }
        if freq.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Contract("frequencies must be strictly increasing".into()));
        }
        Ok(Self { freq, mag, units })
    }

    /// |S21|² per sample.
    pub fn power(&self) -> Vec<f64> {
        match self.units {
            MagnitudeUnits::Linear => self.mag.iter().map(|m| m * m).collect(),
            MagnitudeUnits::Db => self.mag.iter().map(|d| 10f64.powf(d / 10.0)).collect(),
        }
    }

    pub fn to_db(&self) -> Self {
        match self.units {
            MagnitudeUnits::Db => self.clone(),
            MagnitudeUnits::Linear => Self {
                freq: self.freq.clone(),
                mag: self.mag.iter().map(|m| 20.0 * m.abs().log10()).collect(),
                units: MagnitudeUnits::Db,
            },
        }
    }

    pub fn to_linear(&self) -> Self {
        match self.units {
            MagnitudeUnits::Linear => self.clone(),
            MagnitudeUnits::Db => Self {
                freq: self.freq.clone(),
                mag: self.mag.iter().map(|d| 10f64.powf(d / 20.0)).collect(),
                units: MagnitudeUnits::Linear,
            },
        }
    }
}

/// Noiseless |S21| of a symmetric two-port resonator.
pub fn synthetic_trace(f0: f64, q_int: f64, q_ext: f64, freq: Vec<f64>) -> Result<SpectrumTrace> {
    let q_tot = 1.0 / (1.0 / q_int + 1.0 / q_ext);
    let ratio = q_tot / q_ext;
    let half = f0 / q_tot / 2.0;
    let mag = freq.iter().map(|f| ratio * half / ((f - f0).powi(2) + half * half).sqrt()).collect();
    SpectrumTrace::new(freq, mag, MagnitudeUnits::Linear)
}

/// Fit parameters: centre, FWHM, peak power, baseline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LorentzianParams {
    pub f0: f64,
    pub kappa: f64,
    pub peak: f64,
    pub baseline: f64,
}

impl LorentzianParams {
    pub fn eval(&self, f: f64) -> f64 {
        let w = self.kappa / 2.0;
        let d = f - self.f0;
        self.peak * w * w / (d * d + w * w) + self.baseline
    }

    /// Gradient with respect to (f₀, κ, P, b).
    fn gradient(&self, f: f64) -> Vector4<f64> {
        let w = self.kappa / 2.0;
        let d = f - self.f0;
        let den = d * d + w * w;
        Vector4::new(
            self.peak * w * w * 2.0 * d / (den * den),
            self.peak * w * d * d / (den * den),
            w * w / den,
            1.0,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LorentzianFit {
    pub f0_hz: f64,
    /// Full width at half maximum (Hz).
    pub kappa_hz: f64,
    pub q_tot: f64,
    pub q_int: f64,
    pub q_ext: f64,
    /// Peak power transmission P = (κ_ext/κ)².
    pub amplitude: f64,
    pub baseline: f64,
    pub residual_rms: f64,
    /// One-sigma errors of (f₀, κ, P, b) from the residual-scaled inverse normal matrix.
    pub std_errors: [f64; 4],
    pub iterations: usize,
    pub warnings: Vec<String>,
}

/// Output record with the published field names only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitRecord {
    pub f0_hz: f64,
    pub q_tot: f64,
    pub q_int: f64,
    pub q_ext: f64,
    pub kappa_hz: f64,
    pub residual_rms: f64,
}

impl LorentzianFit {
    pub fn params(&self) -> LorentzianParams {
        LorentzianParams { f0: self.f0_hz, kappa: self.kappa_hz, peak: self.amplitude, baseline: self.baseline }
    }

    pub fn record(&self) -> FitRecord {
        FitRecord {
            f0_hz: self.f0_hz,
            q_tot: self.q_tot,
            q_int: self.q_int,
            q_ext: self.q_ext,
            kappa_hz: self.kappa_hz,
            residual_rms: self.residual_rms,
        }
    }
}

/// Peak location, half-maximum width and baseline estimate.
fn seed(freq: &[f64], y: &[f64]) -> Result<(LorentzianParams, Vec<String>)> {
    let (imax, &ymax) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty trace");
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let peak = ymax - ymin;
    let mut warnings = Vec::new();
    if !(peak > 1e-12 * ymax.abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::NoConvergence("trace is flat; no peak to fit".into()));
    }
    let half = ymin + peak / 2.0;
    let cross = |range: &mut dyn Iterator<Item = usize>, step: isize| -> Option<f64> {
        for i in range {
            let j = (i as isize + step) as usize;
            if y[j] < half {
                let t = (y[i] - half) / (y[i] - y[j]);
                return Some(freq[i] + t * (freq[j] - freq[i]));
            }
        }
        None
    };
    let left = cross(&mut (1..=imax).rev(), -1);
    let right = cross(&mut (imax..y.len() - 1), 1);
    let kappa = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (freq[imax] - l),
        (None, Some(r)) => 2.0 * (r - freq[imax]),
        (None, None) => return Err(Error::NoConvergence("no half-maximum crossing on either side of the peak".into())),
    };
    if left.is_none() || right.is_none() {
        warnings.push("peak lies near the trace boundary".into());
    }
    Ok((LorentzianParams { f0: freq[imax], kappa, peak, baseline: ymin }, warnings))
}

/// Least-squares Lorentzian fit (Levenberg–Marquardt, analytic Jacobian).
pub fn fit_lorentzian(trace: &SpectrumTrace, init: Option<LorentzianParams>) -> Result<LorentzianFit> {
    let freq = &trace.freq;
    let y = trace.power();
    let (start, mut warnings) = match init {
        Some(p) => (p, Vec::new()),
        None => seed(freq, &y)?,
    };
    if !(start.kappa > 0.0 && start.peak > 0.0) {
        return Err(Error::Contract("seed needs positive width and peak".into()));
    }
    // Scaled unknowns: centre offset and width in seed widths, powers in seed peaks.
    let sf = start.kappa;
    let sy = start.peak;
    let to_params = |t: &Vector4<f64>| LorentzianParams {
        f0: start.f0 + t[0] * sf,
        kappa: t[1] * sf,
        peak: t[2] * sy,
        baseline: t[3] * sy,
    };
    let scale = Vector4::new(sf, sf, sy, sy);
    let cost = |p: &LorentzianParams| -> f64 { freq.iter().zip(&y).map(|(f, v)| (p.eval(*f) - v).powi(2)).sum() };
    let normal = |p: &LorentzianParams| -> (Matrix4<f64>, Vector4<f64>) {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (f, v) in freq.iter().zip(&y) {
            let g = p.gradient(*f).component_mul(&scale);
            let r = p.eval(*f) - v;
            jtj += g * g.transpose();
            jtr += g * r;
        }
        (jtj, jtr)
    };

    let mut theta = Vector4::new(0.0, 1.0, 1.0, start.baseline / sy);
    let mut p = to_params(&theta);
    let mut c = cost(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = normal(&p);
        let mut stepped = false;
        for _ in 0..40 {
            let mut a = jtj;
            for k in 0..4 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(delta) = a.cholesky().map(|ch| -ch.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = theta + delta;
            let tp = to_params(&trial);
            let tc = cost(&tp);
            if tp.kappa > 0.0 && tc <= c {
                let small = (0..4).all(|k| delta[k].abs() <= STEP_TOL * trial[k].abs().max(1.0));
                theta = trial;
                p = tp;
                c = tc;
                lambda = (lambda / 10.0).max(1e-12);
                stepped = true;
                converged = small;
                break;
            }
            lambda *= 10.0;
        }
        if !stepped {
            // Every damped step raised the cost: already at the floor.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(format!(
            "{MAX_ITERATIONS} iterations without converging; last iterate f0 = {:e} Hz, kappa = {:e} Hz",
            p.f0, p.kappa
        )));
    }
    if !(p.kappa > 0.0 && p.peak > 0.0) {
        return Err(Error::NoConvergence(format!("fit collapsed to kappa = {:e}, peak = {:e}", p.kappa, p.peak)));
    }
    let (lo, hi) = (freq[0], freq[freq.len() - 1]);
    if !(p.f0 > lo && p.f0 < hi) {
        return Err(Error::NoConvergence(format!("fitted centre {:e} Hz lies outside the trace", p.f0)));
    }
    if p.f0 - 1.5 * p.kappa < lo || p.f0 + 1.5 * p.kappa > hi {
        warnings.push("trace spans fewer than 3 linewidths around the peak".into());
    }

    let n = freq.len();
    let residual_rms = (c / n as f64).sqrt();
    let (jtj, _) = normal(&p);
    let s2 = c / (n.saturating_sub(4).max(1)) as f64;
    let cov = jtj.try_inverse().unwrap_or_else(|| Matrix4::from_element(f64::NAN));
    let std_errors = [0, 1, 2, 3].map(|k| (cov[(k, k)] * s2).sqrt() * scale[k]);

    let q_tot = p.f0 / p.kappa;
    let ratio = p.peak.sqrt();
    let q_ext = q_tot / ratio;
    let inv_int = 1.0 / q_tot - 1.0 / q_ext;
    if !(inv_int > 0.0) {
        warnings.push("peak transmission at or above unity; internal loss not resolved".into());
    }
    Ok(LorentzianFit {
        f0_hz: p.f0,
        kappa_hz: p.kappa,
        q_tot,
        q_int: if inv_int > 0.0 { 1.0 / inv_int } else { f64::INFINITY },
        q_ext,
        amplitude: p.peak,
        baseline: p.baseline,
        residual_rms,
        std_errors,
        iterations,
        warnings,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModeCandidate {
    pub freq_hz: f64,
    /// Peak value in trace units.
    pub height: f64,
    pub prominence: f64,
    /// Guess n for a (2n+1)λ/4 resonance.
    pub harmonic: usize,
}

/// Local maxima above `threshold` (trace units), most prominent first.
///
/// The harmonic guess takes the nearest odd multiple of `base_hz`, or of the
/// lowest candidate when no base is given.
pub fn find_modes(trace: &SpectrumTrace, threshold: f64, base_hz: Option<f64>) -> Vec<ModeCandidate> {
    let m = &trace.mag;
    let n = m.len();
    let peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = i == 0 || m[i] > m[i - 1];
            let right = i + 1 == n || m[i] >= m[i + 1];
            left && right && m[i] > threshold
        })
        .collect();
    let floor = m.iter().copied().fold(f64::INFINITY, f64::min);
    let prominence = |i: usize| {
        // Lowest point on each side before reaching higher ground.
        let side = |range: &mut dyn Iterator<Item = usize>| {
            let mut low = m[i];
            for j in range {
                if m[j] > m[i] {
                    return Some(low);
                }
                low = low.min(m[j]);
            }
            None
        };
        let l = side(&mut (0..i).rev());
        let r = side(&mut (i + 1..n));
        let base = match (l, r) {
            (Some(a), Some(b)) => a.max(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => floor,
        };
        m[i] - base
    };
    let base = base_hz.or_else(|| peaks.first().map(|&i| trace.freq[i]));
    let mut out: Vec<ModeCandidate> = peaks
        .iter()
        .map(|&i| {
            let f = trace.freq[i];
            let harmonic = base.map_or(0, |b| ((f / b - 1.0) / 2.0).round().max(0.0) as usize);
            ModeCandidate { freq_hz: f, height: m[i], prominence: prominence(i), harmonic }
        })
        .collect();
    out.sort_by(|a, b| b.prominence.total_cmp(&a.prominence).then(a.freq_hz.total_cmp(&b.freq_hz)));
    out
}

/// Reads a `freq_hz,mag` trace; a `# units=db|linear` comment sets the units
/// (linear when absent).
pub fn read_trace_csv<R: BufRead>(reader: R) -> Result<SpectrumTrace> {
    let mut units = MagnitudeUnits::Linear;
    let mut header_seen = false;
    let (mut freq, mut mag) = (Vec::new(), Vec::new());
    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(c) = t.strip_prefix('#') {
            if let Some(v) = c.trim().strip_prefix("units=") {
                units = match v.trim() {
                    "db" => MagnitudeUnits::Db,
                    "linear" => MagnitudeUnits::Linear,
                    other => return Err(Error::Parse { line: lineno, msg: format!("unknown units {other:?}") }),
                };
            }
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = t.split(',').map(str::trim).collect();
            if cols != ["freq_hz", "mag"] {
                return Err(Error::Parse { line: lineno, msg: "expected header freq_hz,mag".into() });
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = t.split(',').map(str::trim).collect();
        if cols.len() != 2 {
            return Err(Error::Parse { line: lineno, msg: format!("expected 2 columns, found {}", cols.len()) });
        }
        let parse = |s: &str| -> Result<f64> {
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse { line: lineno, msg: format!("not a finite number: {s:?}") }),
            }
        };
        freq.push(parse(cols[0])?);
        mag.push(parse(cols[1])?);
    }
    if !header_seen {
        return Err(Error::Parse { line: 1, msg: "missing header freq_hz,mag".into() });
    }
    SpectrumTrace::new(freq, mag, units)
}

pub fn write_trace_csv<W: Write>(out: &mut W, trace: &SpectrumTrace) -> Result<()> {
    writeln!(out, "# units={}", trace.units.as_str())?;
    writeln!(out, "freq_hz,mag")?;
    for (f, m) in trace.freq.iter().zip(&trace.mag) {
        writeln!(out, "{},{}", fmt_sig(*f), fmt_sig(*m))?;
    }
    Ok(())
}

/// Fits several traces in parallel.
pub fn fit_many(traces: &[SpectrumTrace]) -> Vec<Result<LorentzianFit>> {
    use rayon::prelude::*;
    traces.par_iter().map(|t| fit_lorentzian(t, None)).collect()
}

/// Frequencies spanning `f0 ± half_span`, evenly spaced.
pub fn frequency_axis(f0: f64, half_span: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| f0 - half_span + 2.0 * half_span * i as f64 / (n - 1) as f64).collect()
}
