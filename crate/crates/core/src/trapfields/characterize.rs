use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use super::{joules_to_ev, pseudopotential, stability_q, ElectrodeLayout, FieldMap, Species};
use crate::error::{Error, Result};

/// Above this q the pseudopotential picture gets rough; results carry a note.
pub const Q_VALIDITY_LIMIT: f64 = 0.4;

/// Sampling window for analytic layouts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalysisGrid {
    pub nx: usize,
    pub nz: usize,
    /// Window width as a multiple of the electrode span, centred on the electrodes.
    pub lateral_factor: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for AnalysisGrid {
    fn default() -> Self {
        Self { nx: 201, nz: 201, lateral_factor: 4.0, z_min: 2e-6, z_max: 400e-6 }
    }
}

pub enum TrapSource<'a> {
    Layout(&'a ElectrodeLayout, AnalysisGrid),
    FieldMap(&'a FieldMap),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrapCharacter {
    /// `[x, y, z]` of the pseudopotential minimum.
    pub min_position_m: Vec<f64>,
    /// Secular frequencies ω/2π, ascending.
    pub secular_freq_hz: Vec<f64>,
    pub depth_ev: f64,
    pub q: Vec<f64>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub secular_omega: Vec<f64>,
    /// Principal axes in `[x, y, z]`, matching `secular_omega`.
    #[serde(skip)]
    pub axes: Vec<[f64; 3]>,
    /// Hessian of the energy surface over the analysed coordinates (J/m²).
    #[serde(skip)]
    pub hessian: DMatrix<f64>,
    #[serde(skip)]
    pub min_energy_j: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrapOutcome {
    Trapped(TrapCharacter),
    NoTrap(String),
}

impl TrapOutcome {
    pub fn trapped(self) -> Option<TrapCharacter> {
        match self {
            TrapOutcome::Trapped(t) => Some(t),
            TrapOutcome::NoTrap(_) => None,
        }
    }
}

pub fn characterize_trap(source: TrapSource<'_>, species: &Species) -> Result<TrapOutcome> {
    match source {
        TrapSource::Layout(l, g) => characterize_layout(l, species, &g),
        TrapSource::FieldMap(m) => characterize_map(m, species),
    }
}

/// Energy samples on a rectilinear grid over the active coordinates, row-major.
struct Landscape {
    coords: Vec<Vec<f64>>,
    u: Vec<f64>,
}

impl Landscape {
    fn shape(&self) -> Vec<usize> {
        self.coords.iter().map(Vec::len).collect()
    }

    fn unflatten(&self, mut idx: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut out = vec![0; shape.len()];
        for d in (0..shape.len()).rev() {
            out[d] = idx % shape[d];
            idx /= shape[d];
        }
        out
    }

    fn flatten(&self, pos: &[usize]) -> usize {
        self.shape().iter().zip(pos).fold(0, |acc, (&n, &p)| acc * n + p)
    }

    fn on_boundary(&self, pos: &[usize]) -> bool {
        pos.iter().zip(self.shape()).any(|(&p, n)| p == 0 || p + 1 == n)
    }

    fn face_neighbors(&self, pos: &[usize]) -> Vec<usize> {
        let shape = self.shape();
        let mut out = Vec::with_capacity(2 * shape.len());
        for d in 0..shape.len() {
            for delta in [-1i64, 1] {
                let p = pos[d] as i64 + delta;
                if p >= 0 && (p as usize) < shape[d] {
                    let mut q = pos.to_vec();
                    q[d] = p as usize;
                    out.push(self.flatten(&q));
                }
            }
        }
        out
    }

    /// Nodes of the 3^d block centred on `pos`, which must be interior.
    fn block(&self, pos: &[usize]) -> Vec<Vec<usize>> {
        let d = pos.len();
        (0..3usize.pow(d as u32))
            .map(|c| (0..d).map(|k| pos[k] + (c / 3usize.pow(k as u32)) % 3 - 1).collect())
            .collect()
    }

    /// Lowest interior node that is below every neighbour in its 3^d block.
    fn interior_minimum(&self) -> Option<usize> {
        (0..self.u.len())
            .filter(|&i| {
                let pos = self.unflatten(i);
                !self.on_boundary(&pos)
                    && self.block(&pos).iter().all(|q| {
                        let j = self.flatten(q);
                        j == i || self.u[j] > self.u[i]
                    })
            })
            .min_by(|&a, &b| self.u[a].total_cmp(&self.u[b]))
    }

    /// Lowest level at which the basin of `start` connects to the grid boundary.
    fn escape_level(&self, start: usize) -> f64 {
        #[derive(PartialEq)]
        struct Item(f64, usize);
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Item {
            fn cmp(&self, other: &Self) -> Ordering {
                other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
            }
        }
        let mut seen = vec![false; self.u.len()];
        let mut heap = BinaryHeap::new();
        heap.push(Item(self.u[start], start));
        seen[start] = true;
        while let Some(Item(level, i)) = heap.pop() {
            let pos = self.unflatten(i);
            if self.on_boundary(&pos) {
                return level;
            }
            for j in self.face_neighbors(&pos) {
                if !seen[j] {
                    seen[j] = true;
                    heap.push(Item(level.max(self.u[j]), j));
                }
            }
        }
        f64::INFINITY
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Central-difference Hessian with per-axis steps.
fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: &[f64]) -> DMatrix<f64> {
    let d = x.len();
    let at = |shift: &[(usize, f64)]| {
        let mut p = x.to_vec();
        for &(k, s) in shift {
            p[k] += s;
        }
        f(&p)
    };
    let f0 = f(x);
    let mut hm = DMatrix::zeros(d, d);
    for i in 0..d {
        hm[(i, i)] = (at(&[(i, h[i])]) - 2.0 * f0 + at(&[(i, -h[i])])) / (h[i] * h[i]);
        for j in 0..i {
            let v = (at(&[(i, h[i]), (j, h[j])]) - at(&[(i, h[i]), (j, -h[j])]) - at(&[(i, -h[i]), (j, h[j])])
                + at(&[(i, -h[i]), (j, -h[j])]))
                / (4.0 * h[i] * h[j]);
            hm[(i, j)] = v;
            hm[(j, i)] = v;
        }
    }
    hm
}

fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|k| {
            let (mut a, mut b) = (x.to_vec(), x.to_vec());
            a[k] += h[k];
            b[k] -= h[k];
            (f(&a) - f(&b)) / (2.0 * h[k])
        }),
    )
}

/// Damped Newton polish of a grid minimum, each step kept within one cell.
fn newton_refine(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], cell: &[f64]) -> Vec<f64> {
    let h: Vec<f64> = cell.iter().map(|c| 1e-3 * c).collect();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    for _ in 0..60 {
        let g = fd_gradient(f, &x, &h);
        let hm = fd_hessian(f, &x, &h);
        let Some(chol) = hm.cholesky() else { break };
        let mut s = -chol.solve(&g);
        let scale = s.iter().zip(cell).map(|(v, c)| v.abs() / c).fold(0.0, f64::max);
        if scale > 1.0 {
            s /= scale;
        }
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = x.iter().zip(s.iter()).map(|(a, b)| a + b).collect();
            let ft = f(&trial);
            if ft <= fx {
                x = trial;
                fx = ft;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        let small = s.iter().zip(cell).all(|(v, c)| v.abs() < 1e-10 * c);
        if !accepted || small {
            break;
        }
    }
    x
}

fn finish(
    pos3: [f64; 3],
    hessian: DMatrix<f64>,
    active: &[usize],
    u_min: f64,
    escape: f64,
    species: &Species,
    omega: f64,
) -> TrapOutcome {
    let asym = (&hessian - hessian.transpose()).amax();
    debug_assert!(asym <= 1e-6 * hessian.amax());
    let eig = SymmetricEigen::new(hessian.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return TrapOutcome::NoTrap("pseudopotential stationary point is not a minimum".into());
    }
    let mut modes: Vec<(f64, [f64; 3])> = (0..active.len())
        .map(|k| {
            let mut axis = [0.0; 3];
            for (r, &a) in active.iter().enumerate() {
                axis[a] = eig.eigenvectors[(r, k)];
            }
            ((eig.eigenvalues[k] / species.mass).sqrt(), axis)
        })
        .collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tau = std::f64::consts::TAU;
    let q: Vec<f64> = modes.iter().map(|m| stability_q(m.0, omega)).collect();
    let mut notes = Vec::new();
    for (k, &qk) in q.iter().enumerate() {
        if qk > Q_VALIDITY_LIMIT {
            notes.push(format!("q[{k}] = {qk:.3} exceeds {Q_VALIDITY_LIMIT}; pseudopotential estimate is rough"));
        }
    }
    if !escape.is_finite() {
        notes.push("basin never reaches the window boundary".into());
    }
    TrapOutcome::Trapped(TrapCharacter {
        min_position_m: pos3.to_vec(),
        secular_freq_hz: modes.iter().map(|m| m.0 / tau).collect(),
        depth_ev: joules_to_ev((escape - u_min).max(0.0)),
        q,
        notes,
        secular_omega: modes.iter().map(|m| m.0).collect(),
        axes: modes.iter().map(|m| m.1).collect(),
        hessian,
        min_energy_j: u_min,
    })
}

/// Scans the (x, z) cross-section of `layout` for the pseudopotential minimum
/// seen by `species` and characterizes it.
pub fn characterize_layout(layout: &ElectrodeLayout, species: &Species, grid: &AnalysisGrid) -> Result<TrapOutcome> {
    layout.validate()?;
    if grid.nx < 5 || grid.nz < 5 || !(grid.z_max > grid.z_min && grid.z_min > 0.0) || !(grid.lateral_factor > 0.0) {
        return Err(Error::Contract("analysis grid needs ≥ 5 points per axis and 0 < z_min < z_max".into()));
    }
    let omega = layout.drive_frequency(species.drive)?;
    if !layout.strips.iter().any(|s| s.role == species.drive && s.voltage != 0.0) {
        return Ok(TrapOutcome::NoTrap(format!("no driven {} electrodes", species.drive.as_str())));
    }
    let (lo, hi) = layout.extent();
    let (mid, span) = ((lo + hi) / 2.0, hi - lo);
    let half = grid.lateral_factor * span / 2.0;
    let xs = linspace(mid - half, mid + half, grid.nx);
    let zs = linspace(grid.z_min, grid.z_max, grid.nz);

    let energy = |x: f64, z: f64| -> Result<f64> {
        let e = layout.field(species.drive, x, z)?;
        pseudopotential(e[0].hypot(e[1]), species.mass, omega, species.charge)
    };
    let u = xs
        .par_iter()
        .flat_map_iter(|&x| zs.iter().map(move |&z| (x, z)))
        .map(|(x, z)| energy(x, z))
        .collect::<Result<Vec<_>>>()?;
    let land = Landscape { coords: vec![xs.clone(), zs.clone()], u };
    let Some(node) = land.interior_minimum() else {
        return Ok(TrapOutcome::NoTrap("no interior pseudopotential minimum in the analysis window".into()));
    };
    let escape = land.escape_level(node);

    let pos = land.unflatten(node);
    let cell = [xs[1] - xs[0], zs[1] - zs[0]];
    let bounds = [(xs[0], xs[grid.nx - 1]), (zs[0], zs[grid.nz - 1])];
    let f = |p: &[f64]| {
        if p.iter().zip(&bounds).any(|(v, b)| *v < b.0 || *v > b.1) {
            return f64::INFINITY;
        }
        energy(p[0], p[1]).unwrap_or(f64::INFINITY)
    };
    let x = newton_refine(&f, &[xs[pos[0]], zs[pos[1]]], &cell);
    let u_min = f(&x);

    // Step 1e-3 of the window span per axis, one Richardson step.
    let h: Vec<f64> = bounds.iter().map(|b| 1e-3 * (b.1 - b.0)).collect();
    let h2: Vec<f64> = h.iter().map(|v| v / 2.0).collect();
    if x[1] - h[1] <= 0.0 {
        return Ok(TrapOutcome::NoTrap("minimum lies on the electrode plane".into()));
    }
    let hessian = (fd_hessian(&f, &x, &h2) * 4.0 - fd_hessian(&f, &x, &h)) / 3.0;
    Ok(finish([x[0], 0.0, x[1]], hessian, &[0, 2], u_min, escape, species, omega))
}

/// Least-squares quadratic over the 3^d block around `pos`, in cell units.
/// Returns (Hessian in J/m², stationary offset in m, value there).
fn quadratic_fit(land: &Landscape, pos: &[usize]) -> Option<(DMatrix<f64>, Vec<f64>, f64)> {
    let d = pos.len();
    let cell: Vec<f64> =
        (0..d).map(|k| (land.coords[k][pos[k] + 1] - land.coords[k][pos[k] - 1]) / 2.0).collect();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    let n_par = 1 + d + pairs.len();
    let block = land.block(pos);
    let mut a = DMatrix::zeros(block.len(), n_par);
    let mut b = DVector::zeros(block.len());
    for (r, q) in block.iter().enumerate() {
        let u: Vec<f64> = (0..d).map(|k| (land.coords[k][q[k]] - land.coords[k][pos[k]]) / cell[k]).collect();
        a[(r, 0)] = 1.0;
        for k in 0..d {
            a[(r, 1 + k)] = u[k];
        }
        for (c, &(i, j)) in pairs.iter().enumerate() {
            a[(r, 1 + d + c)] = u[i] * u[j];
        }
        b[r] = land.u[land.flatten(q)];
    }
    let coef = a.svd(true, true).solve(&b, 1e-14).ok()?;
    let mut hu = DMatrix::zeros(d, d);
    for (c, &(i, j)) in pairs.iter().enumerate() {
        let v = coef[1 + d + c];
        if i == j {
            hu[(i, i)] = 2.0 * v;
        } else {
            hu[(i, j)] = v;
            hu[(j, i)] = v;
        }
    }
    let g = DVector::from_iterator(d, (0..d).map(|k| coef[1 + k]));
    let step = hu.clone().cholesky().map(|c| -c.solve(&g)).unwrap_or_else(|| DVector::zeros(d));
    let step: Vec<f64> = step.iter().map(|s| s.clamp(-1.0, 1.0)).collect();
    let sv = DVector::from_column_slice(&step);
    let value = coef[0] + g.dot(&sv) + 0.5 * (sv.transpose() * &hu * &sv)[(0, 0)];
    let hessian = DMatrix::from_fn(d, d, |i, j| hu[(i, j)] / (cell[i] * cell[j]));
    let offset = step.iter().zip(&cell).map(|(s, c)| s * c).collect();
    Some((hessian, offset, value))
}

/// Characterizes an ingested field map. Curvature comes from a quadratic fit of
/// the node energies around the lowest interior node.
pub fn characterize_map(map: &FieldMap, species: &Species) -> Result<TrapOutcome> {
    map.validate()?;
    let active: Vec<usize> = (0..3).filter(|&k| map.axes[k].len() > 1).collect();
    if active.iter().any(|&k| map.axes[k].len() < 3) {
        return Ok(TrapOutcome::NoTrap("field map needs at least 3 samples per varying axis".into()));
    }
    let u = map
        .field
        .par_iter()
        .map(|e| pseudopotential((e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt(), species.mass, map.omega, species.charge))
        .collect::<Result<Vec<_>>>()?;
    let land = Landscape { coords: active.iter().map(|&k| map.axes[k].clone()).collect(), u };
    let Some(node) = land.interior_minimum() else {
        return Ok(TrapOutcome::NoTrap("no interior pseudopotential minimum in the field map".into()));
    };
    let escape = land.escape_level(node);
    let pos = land.unflatten(node);
    let Some((hessian, offset, value)) = quadratic_fit(&land, &pos) else {
        return Err(Error::Singular("quadratic fit around the minimum failed".into()));
    };
    let mut pos3 = [map.axes[0][0], map.axes[1][0], map.axes[2][0]];
    for (r, &k) in active.iter().enumerate() {
        pos3[k] = land.coords[r][pos[r]] + offset[r];
    }
    let u_min = value.max(0.0).min(land.u[node]);
    Ok(finish(pos3, hessian, &active, u_min, escape, species, map.omega))
}

#[cfg(test)]
mod tests {
    use super::super::{quadrupole_map, DriveRole};
    use super::*;
    use std::f64::consts::{SQRT_2, TAU};

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        linspace(lo, hi, n)
    }

    #[test]
    fn quadrupole_map_frequency() {
        let e = Species::electron();
        let omega = TAU * 6e9;
        let target = TAU * 1.2e9;
        let g = SQRT_2 * e.mass * omega * target / e.charge.abs();
        let map = quadrupole_map(
            [axis(-50e-6, 50e-6, 41), vec![0.0], axis(0.0, 100e-6, 41)],
            [1.3e-6, 0.0, 51.1e-6],
            g,
            omega,
        )
        .unwrap();
        let t = characterize_map(&map, &e).unwrap().trapped().unwrap();
        for w in &t.secular_omega {
            assert!((w / target - 1.0).abs() < 5e-3, "{w}");
        }
        assert!((t.min_position_m[0] - 1.3e-6).abs() < 1e-9);
        assert!((t.min_position_m[2] - 51.1e-6).abs() < 1e-9);
        assert!((t.q[0] - 2.0 * SQRT_2 * 1.2 / 6.0).abs() < 3e-3);
        assert!(t.notes.iter().any(|n| n.contains("exceeds")));
        assert!(t.depth_ev > 0.0);
    }

    #[test]
    fn three_d_quadrupole() {
        let e = Species::electron();
        let omega = TAU * 6e9;
        let g = 3e6;
        let ax = axis(-20e-6, 20e-6, 21);
        let map = quadrupole_map([ax.clone(), ax.clone(), ax], [0.0; 3], g, omega).unwrap();
        let t = characterize_map(&map, &e).unwrap().trapped().unwrap();
        let w0 = e.charge.abs() * g / (SQRT_2 * e.mass * omega);
        assert_eq!(t.secular_omega.len(), 3);
        assert!((t.secular_omega[0] / w0 - 1.0).abs() < 5e-3);
        assert!((t.secular_omega[2] / (2.0 * w0) - 1.0).abs() < 5e-3);
    }

    #[test]
    fn uniform_field_has_no_trap() {
        let ax = axis(0.0, 1e-5, 7);
        let map = FieldMap::new([ax.clone(), vec![0.0], ax], vec![[1.0, 0.0, 0.0]; 49], 1e9).unwrap();
        assert!(matches!(characterize_map(&map, &Species::electron()).unwrap(), TrapOutcome::NoTrap(_)));
    }

    #[test]
    fn five_rail_electron_and_ion() {
        let lay = ElectrodeLayout::five_rail();
        let grid = AnalysisGrid::default();
        let e = characterize_layout(&lay, &Species::electron(), &grid).unwrap().trapped().unwrap();
        let f = e.secular_freq_hz[0];
        assert!(f > 800e6 / 3.0 && f < 2400e6, "{f}");
        assert!(e.depth_ev > 0.04 / 3.0 && e.depth_ev < 0.12, "{}", e.depth_ev);
        let ion = characterize_layout(&lay, &Species::beryllium_ion(), &grid).unwrap().trapped().unwrap();
        assert!(ion.secular_freq_hz[0] > 1e6 && ion.secular_freq_hz[0] < 9e6);
        assert!(ion.depth_ev > 0.02 / 3.0, "{}", ion.depth_ev);
        // The ion sits above the electron.
        assert!(ion.min_position_m[2] > e.min_position_m[2]);
        let asym = (&e.hessian - e.hessian.transpose()).amax();
        assert!(asym <= 1e-6 * e.hessian.amax());
    }

    #[test]
    fn layout_without_drive_is_no_trap() {
        let mut lay = ElectrodeLayout::five_rail();
        lay.scale_voltage(DriveRole::Mw, 0.0);
        let out = characterize_layout(&lay, &Species::electron(), &AnalysisGrid::default()).unwrap();
        assert!(matches!(out, TrapOutcome::NoTrap(_)));
    }
}
