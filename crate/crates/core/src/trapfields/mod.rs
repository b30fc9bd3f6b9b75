//! Pseudopotential traps: strip electrodes in a gapless plane, ingested field
//! maps, and extraction of secular frequencies, depth and stability parameters.

mod characterize;
mod fieldmap;

pub use characterize::{
    characterize_layout, characterize_map, characterize_trap, AnalysisGrid, TrapCharacter, TrapOutcome, TrapSource,
    Q_VALIDITY_LIMIT,
};
pub use fieldmap::{
    ingest_field_map, parse_field_map, quadrupole_map, sample_layout, write_field_map_csv, FieldMap, FIELD_MAP_HEADER,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::codata;
use crate::scalar::{lit, Real};

/// Which drive an electrode carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriveRole {
    Rf,
    Mw,
    Gnd,
    Dc,
}

impl DriveRole {
    pub fn as_str(self) -> &'static str {
        match self {
            DriveRole::Rf => "rf",
            DriveRole::Mw => "mw",
            DriveRole::Gnd => "gnd",
            DriveRole::Dc => "dc",
        }
    }
}

/// Electrode occupying `x_min..x_max` of the plane z = 0, driven at amplitude `voltage`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    pub x_min: f64,
    pub x_max: f64,
    pub voltage: f64,
    pub role: DriveRole,
}

/// Cross-section of a surface trap. The plane outside all strips is grounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeLayout {
    pub strips: Vec<Strip>,
    /// RF drive (rad/s).
    pub omega_rf: f64,
    /// Microwave drive (rad/s).
    pub omega_mw: f64,
    /// Grounded ceiling height (m). Not supported by the analytic field.
    pub ceiling: Option<f64>,
}

impl ElectrodeLayout {
    pub fn validate(&self) -> Result<()> {
        if self.strips.is_empty() {
            return Err(Error::Contract("layout has no electrodes".into()));
        }
        for s in &self.strips {
            if !(s.x_max > s.x_min) || !s.voltage.is_finite() {
                return Err(Error::Contract(format!("strip [{:e}, {:e}] has non-positive width", s.x_min, s.x_max)));
            }
        }
        let mut sorted: Vec<&Strip> = self.strips.iter().collect();
        sorted.sort_by(|a, b| a.x_min.total_cmp(&b.x_min));
        for w in sorted.windows(2) {
            if w[1].x_min < w[0].x_max {
                return Err(Error::Contract(format!("strips overlap near x = {:e} m", w[1].x_min)));
            }
        }
        if let Some(h) = self.ceiling {
            if !(h > 0.0) {
                return Err(Error::Contract("ceiling height must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn drive_frequency(&self, role: DriveRole) -> Result<f64> {
        match role {
            DriveRole::Rf => Ok(self.omega_rf),
            DriveRole::Mw => Ok(self.omega_mw),
            DriveRole::Gnd | DriveRole::Dc => Err(Error::Contract(format!("{} electrodes carry no AC drive", role.as_str()))),
        }
    }

    /// Lateral extent `(x_lo, x_hi)` of all strips.
    pub fn extent(&self) -> (f64, f64) {
        let lo = self.strips.iter().map(|s| s.x_min).fold(f64::INFINITY, f64::min);
        let hi = self.strips.iter().map(|s| s.x_max).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub fn translated(&self, dx: f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.strips {
            s.x_min += dx;
            s.x_max += dx;
        }
        out
    }

    /// Multiplies every strip voltage of `role` by `factor`.
    pub fn scale_voltage(&mut self, role: DriveRole, factor: f64) {
        for s in self.strips.iter_mut().filter(|s| s.role == role) {
            s.voltage *= factor;
        }
    }

    fn check_point(&self, z: f64) -> Result<()> {
        if self.ceiling.is_some() {
            return Err(Error::OutOfDomain("grounded ceiling is not modelled by the analytic strip field".into()));
        }
        if !(z > 0.0) {
            return Err(Error::OutOfDomain(format!("z = {z:e} m must lie above the electrode plane")));
        }
        Ok(())
    }

    /// Potential amplitude of the `role` electrodes at `(x, z)`.
    pub fn potential(&self, role: DriveRole, x: f64, z: f64) -> Result<f64> {
        self.check_point(z)?;
        Ok(self.strips.iter().filter(|s| s.role == role).map(|s| strip_potential(s.x_min, s.x_max, s.voltage, x, z)).sum())
    }

    /// Field amplitude `(E_x, E_z)` of the `role` electrodes at `(x, z)`.
    pub fn field(&self, role: DriveRole, x: f64, z: f64) -> Result<[f64; 2]> {
        self.check_point(z)?;
        Ok(self.strips.iter().filter(|s| s.role == role).fold([0.0, 0.0], |acc, s| {
            let e = strip_field(s.x_min, s.x_max, s.voltage, x, z);
            [acc[0] + e[0], acc[1] + e[1]]
        }))
    }

    /// Five-rail surface trap cross-section: RF rails of 80 µm outside a 160 µm
    /// ground rail, with two 30 µm MW strips cut into the ground rail.
    pub fn five_rail() -> Self {
        let um = 1e-6;
        let tau = std::f64::consts::TAU;
        let strip = |a: f64, b: f64, v: f64, role| Strip { x_min: a * um, x_max: b * um, voltage: v, role };
        Self {
            strips: vec![
                strip(-160.0, -80.0, 30.0, DriveRole::Rf),
                strip(-80.0, -70.0, 0.0, DriveRole::Gnd),
                strip(-70.0, -40.0, 20.0, DriveRole::Mw),
                strip(-40.0, 40.0, 0.0, DriveRole::Gnd),
                strip(40.0, 70.0, 20.0, DriveRole::Mw),
                strip(70.0, 80.0, 0.0, DriveRole::Gnd),
                strip(80.0, 160.0, 30.0, DriveRole::Rf),
            ],
            omega_rf: tau * 40e6,
            omega_mw: tau * 4e9,
            ceiling: None,
        }
    }
}

/// `Φ = (V/π)[atan((b−x)/z) − atan((a−x)/z)]` for a strip `[a, b]` at amplitude V.
pub fn strip_potential<T: Real>(a: T, b: T, v: T, x: T, z: T) -> T {
    v / T::pi() * (((b - x) / z).atan() - ((a - x) / z).atan())
}

/// `−∇Φ` of [`strip_potential`], as `[E_x, E_z]`.
pub fn strip_field<T: Real>(a: T, b: T, v: T, x: T, z: T) -> [T; 2] {
    let (ub, ua) = (b - x, a - x);
    let (rb, ra) = (ub * ub + z * z, ua * ua + z * z);
    let k = v / T::pi();
    let ex = -k * (-z / rb + z / ra);
    let ez = -k * (-ub / rb + ua / ra);
    [ex, ez]
}

/// Trapped particle: mass (kg), charge (C), and which drive confines it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub mass: f64,
    pub charge: f64,
    pub drive: DriveRole,
}

impl Species {
    pub fn electron() -> Self {
        Self { mass: codata::ELECTRON_MASS, charge: -codata::ELEMENTARY_CHARGE, drive: DriveRole::Mw }
    }

    pub fn beryllium_ion() -> Self {
        Self {
            mass: codata::BERYLLIUM_ION_MASS_U * codata::ATOMIC_MASS_UNIT,
            charge: codata::ELEMENTARY_CHARGE,
            drive: DriveRole::Rf,
        }
    }
}

/// `q²|E|²/(4mΩ²)` in joules for field amplitude `e_amp` (V/m).
pub fn pseudopotential<T: Real>(e_amp: T, mass: T, omega: T, charge: T) -> Result<T> {
    if omega == T::zero() {
        return Err(Error::Divergent("drive frequency Ω = 0".into()));
    }
    if !(mass > T::zero()) {
        return Err(Error::Contract("mass must be positive".into()));
    }
    let qe = charge * e_amp;
    Ok(qe * qe / (lit::<T>(4.0) * mass * omega * omega))
}

pub fn joules_to_ev(x: f64) -> f64 {
    x / codata::ELEMENTARY_CHARGE
}

/// Mathieu stability parameter estimate `2√2·ω/Ω`.
pub fn stability_q(omega_sec: f64, omega_drive: f64) -> f64 {
    2.0 * std::f64::consts::SQRT_2 * omega_sec / omega_drive
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn symmetric_point_potential() {
        let (w, z, v) = (30e-6, 17e-6, 20.0);
        let phi = strip_potential(-w / 2.0, w / 2.0, v, 0.0, z);
        assert!((phi - v / PI * 2.0 * (w / (2.0 * z)).atan()).abs() < 1e-12 * v);
    }

    #[test]
    fn wide_strip_is_equipotential() {
        let phi: f64 = strip_potential(-1.0, 1.0, 5.0, 3e-6, 1e-6);
        assert!((phi - 5.0).abs() < 1e-5);
    }

    #[test]
    fn field_is_negative_gradient() {
        let (a, b, v) = (-20e-6, 35e-6, 7.0);
        for &(x, z) in &[(0.0, 10e-6), (50e-6, 3e-6), (-80e-6, 120e-6)] {
            let h = 1e-9;
            let ex = -(strip_potential(a, b, v, x + h, z) - strip_potential(a, b, v, x - h, z)) / (2.0 * h);
            let ez = -(strip_potential(a, b, v, x, z + h) - strip_potential(a, b, v, x, z - h)) / (2.0 * h);
            let e: [f64; 2] = strip_field(a, b, v, x, z);
            assert!((e[0] - ex).abs() < 1e-6 * e[0].abs().max(1.0), "{} {}", e[0], ex);
            assert!((e[1] - ez).abs() < 1e-6 * e[1].abs().max(1.0), "{} {}", e[1], ez);
        }
    }

    #[test]
    fn potential_is_harmonic() {
        let lay = ElectrodeLayout::five_rail();
        for i in 0..5 {
            for j in 1..5 {
                let (x, z) = (-200e-6 + 90e-6 * i as f64, 25e-6 * j as f64);
                let h = 2e-4 * z;
                let f = |x: f64, z: f64| lay.potential(DriveRole::Rf, x, z).unwrap();
                let c = f(x, z);
                let lap = (f(x + h, z) + f(x - h, z) + f(x, z + h) + f(x, z - h) - 4.0 * c) / (h * h);
                assert!(lap.abs() <= 1e-6 * c.abs() / (z * z), "({x}, {z}): {lap}");
            }
        }
    }

    #[test]
    fn rejects_bad_points_and_layouts() {
        let lay = ElectrodeLayout::five_rail();
        assert!(matches!(lay.field(DriveRole::Mw, 0.0, 0.0), Err(Error::OutOfDomain(_))));
        let mut roof = lay.clone();
        roof.ceiling = Some(100e-6);
        assert!(matches!(roof.field(DriveRole::Mw, 0.0, 1e-5), Err(Error::OutOfDomain(_))));
        let mut bad = lay.clone();
        bad.strips[1].x_min = -90e-6;
        assert!(bad.validate().is_err());
        assert!(lay.validate().is_ok());
    }

    #[test]
    fn pseudopotential_ratio() {
        let e = Species::electron();
        let ion = Species::beryllium_ion();
        let (w_rf, w_mw) = (2.0 * PI * 40e6, 2.0 * PI * 4e9);
        let ue = pseudopotential(1e3, e.mass, w_mw, e.charge).unwrap();
        let ui = pseudopotential(1e3, ion.mass, w_rf, ion.charge).unwrap();
        let expect = (ion.mass / e.mass) * (w_rf / w_mw).powi(2);
        assert!((ue / ui / expect - 1.0).abs() < 1e-12);
        assert_eq!(pseudopotential(0.0, e.mass, w_mw, e.charge).unwrap(), 0.0);
        assert!(matches!(pseudopotential(1.0, e.mass, 0.0, e.charge), Err(Error::Divergent(_))));
    }

    #[test]
    fn coax_stability() {
        let q = stability_q(1.2e9, 6.0e9);
        assert!((q - 0.5657).abs() < 1e-4);
    }
}
