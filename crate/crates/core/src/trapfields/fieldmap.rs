use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use super::{DriveRole, ElectrodeLayout};
use crate::error::{Error, Result};
use crate::report::fmt_sig;

pub const FIELD_MAP_HEADER: [&str; 6] = ["x_m", "y_m", "z_m", "Ex_Vpm", "Ey_Vpm", "Ez_Vpm"];

/// Field amplitudes sampled on a rectilinear grid, stored x-major, z fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldMap {
    pub axes: [Vec<f64>; 3],
    pub field: Vec<[f64; 3]>,
    /// Drive frequency of the sampled field (rad/s).
    pub omega: f64,
}

impl FieldMap {
    pub fn new(axes: [Vec<f64>; 3], field: Vec<[f64; 3]>, omega: f64) -> Result<Self> {
        let m = Self { axes, field, omega };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, ax) in self.axes.iter().enumerate() {
            if ax.is_empty() {
                return Err(Error::Schema(format!("axis {} is empty", FIELD_MAP_HEADER[k])));
            }
            if ax.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Schema(format!("axis {} is not strictly increasing", FIELD_MAP_HEADER[k])));
            }
        }
        if self.field.len() != self.shape().iter().product::<usize>() {
            return Err(Error::Schema("field sample count does not match grid".into()));
        }
        if self.field.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Schema("field contains non-finite samples".into()));
        }
        if self.dimensionality() < 2 {
            return Err(Error::Schema("field map must vary along at least two axes".into()));
        }
        if !(self.omega > 0.0) {
            return Err(Error::Contract("drive frequency must be positive".into()));
        }
        Ok(())
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.axes[0].len(), self.axes[1].len(), self.axes[2].len()]
    }

    /// Number of axes with more than one sample.
    pub fn dimensionality(&self) -> usize {
        self.axes.iter().filter(|a| a.len() > 1).count()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let [_, ny, nz] = self.shape();
        (i * ny + j) * nz + k
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.axes[0][i], self.axes[1][j], self.axes[2][k]]
    }

    pub fn translated(&self, d: [f64; 3]) -> Self {
        let mut out = self.clone();
        for (ax, dk) in out.axes.iter_mut().zip(d) {
            ax.iter_mut().for_each(|v| *v += dk);
        }
        out
    }
}

/// Reads a field-map CSV. Row order must be lexicographic in (x, y, z).
pub fn parse_field_map<R: Read>(reader: R, omega: f64) -> Result<FieldMap> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?.clone();
    if header.iter().collect::<Vec<_>>() != FIELD_MAP_HEADER {
        let line = header.position().map_or(1, |p| p.line() as usize);
        return Err(Error::Parse { line, msg: format!("expected header {}", FIELD_MAP_HEADER.join(",")) });
    }
    let mut rows: Vec<(usize, [f64; 6])> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 6 {
            return Err(Error::Parse { line, msg: format!("expected 6 columns, found {}", rec.len()) });
        }
        let mut vals = [0.0; 6];
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse { line, msg: format!("column {} is not a number: {field:?}", FIELD_MAP_HEADER[k]) })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, msg: format!("column {} is not finite", FIELD_MAP_HEADER[k]) });
            }
            vals[k] = v;
        }
        rows.push((line, vals));
    }
    if rows.is_empty() {
        return Err(Error::Schema("field map has no data rows".into()));
    }

    let mut axes: [Vec<f64>; 3] = Default::default();
    for (k, ax) in axes.iter_mut().enumerate() {
        let mut v: Vec<f64> = rows.iter().map(|r| r.1[k]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        *ax = v;
    }
    let [nx, ny, nz] = [axes[0].len(), axes[1].len(), axes[2].len()];
    if nx * ny * nz != rows.len() {
        return Err(Error::Schema(format!(
            "{} rows do not form a rectilinear {nx}×{ny}×{nz} grid",
            rows.len()
        )));
    }
    let mut field = Vec::with_capacity(rows.len());
    for (r, (line, vals)) in rows.iter().enumerate() {
        let (i, j, k) = (r / (ny * nz), (r / nz) % ny, r % nz);
        if [vals[0], vals[1], vals[2]] != [axes[0][i], axes[1][j], axes[2][k]] {
            return Err(Error::Schema(format!("line {line}: row out of lexicographic grid order")));
        }
        field.push([vals[3], vals[4], vals[5]]);
    }
    FieldMap::new(axes, field, omega)
}

pub fn ingest_field_map(path: &Path, omega: f64) -> Result<FieldMap> {
    parse_field_map(File::open(path)?, omega)
}

pub fn write_field_map_csv<W: Write>(out: &mut W, map: &FieldMap) -> Result<()> {
    writeln!(out, "# omega_hz={}", fmt_sig(map.omega / std::f64::consts::TAU))?;
    writeln!(out, "{}", FIELD_MAP_HEADER.join(","))?;
    let [nx, ny, nz] = map.shape();
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                let p = map.point(i, j, k);
                let e = map.field[map.index(i, j, k)];
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    fmt_sig(p[0]),
                    fmt_sig(p[1]),
                    fmt_sig(p[2]),
                    fmt_sig(e[0]),
                    fmt_sig(e[1]),
                    fmt_sig(e[2])
                )?;
            }
        }
    }
    Ok(())
}

/// Samples the `role` field of a layout on an (x, z) grid at y = 0.
pub fn sample_layout(layout: &ElectrodeLayout, role: DriveRole, xs: &[f64], zs: &[f64]) -> Result<FieldMap> {
    layout.validate()?;
    let omega = layout.drive_frequency(role)?;
    let field = xs
        .par_iter()
        .flat_map_iter(|&x| zs.iter().map(move |&z| (x, z)))
        .map(|(x, z)| layout.field(role, x, z).map(|e| [e[0], 0.0, e[1]]))
        .collect::<Result<Vec<_>>>()?;
    FieldMap::new([xs.to_vec(), vec![0.0], zs.to_vec()], field, omega)
}

/// Ideal quadrupole `E = G·(x−x₀, 0, −(z−z₀))` in 2D, or `G·(x, y, −2z)` about the
/// centre in 3D when `axes[1]` has more than one sample.
pub fn quadrupole_map(axes: [Vec<f64>; 3], center: [f64; 3], gradient: f64, omega: f64) -> Result<FieldMap> {
    let three_d = axes[1].len() > 1;
    let mut field = Vec::with_capacity(axes.iter().map(Vec::len).product());
    for &x in &axes[0] {
        for &y in &axes[1] {
            for &z in &axes[2] {
                let (dx, dy, dz) = (x - center[0], y - center[1], z - center[2]);
                field.push(if three_d {
                    [gradient * dx, gradient * dy, -2.0 * gradient * dz]
                } else {
                    [gradient * dx, 0.0, -gradient * dz]
                });
            }
        }
    }
    FieldMap::new(axes, field, omega)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_two_by_two() {
        let text = "x_m,y_m,z_m,Ex_Vpm,Ey_Vpm,Ez_Vpm\n0,0,0,1,0,0\n0,0,1,1,0,0\n1,0,0,1,0,0\n1,0,1,1,0,0\n";
        let m = parse_field_map(text.as_bytes(), 1.0).unwrap();
        assert_eq!(m.dimensionality(), 2);
        assert_eq!(m.shape(), [2, 1, 2]);
    }

    #[test]
    fn nan_names_line() {
        let text = "# map\nx_m,y_m,z_m,Ex_Vpm,Ey_Vpm,Ez_Vpm\n0,0,0,1,0,0\n0,0,1,NaN,0,0\n1,0,0,1,0,0\n1,0,1,1,0,0\n";
        match parse_field_map(text.as_bytes(), 1.0) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_non_rectilinear() {
        let text = "x_m,y_m,z_m,Ex_Vpm,Ey_Vpm,Ez_Vpm\n0,0,0,1,0,0\n0,0,1,1,0,0\n1,0,0,1,0,0\n1,0,2,1,0,0\n";
        assert!(matches!(parse_field_map(text.as_bytes(), 1.0), Err(Error::Schema(_))));
        let swapped = "x_m,y_m,z_m,Ex_Vpm,Ey_Vpm,Ez_Vpm\n0,0,1,1,0,0\n0,0,0,1,0,0\n1,0,0,1,0,0\n1,0,1,1,0,0\n";
        assert!(matches!(parse_field_map(swapped.as_bytes(), 1.0), Err(Error::Schema(_))));
    }

    #[test]
    fn rejects_bad_header_and_text() {
        assert!(matches!(parse_field_map("x,y,z,a,b,c\n".as_bytes(), 1.0), Err(Error::Parse { line: 1, .. })));
        let text = "x_m,y_m,z_m,Ex_Vpm,Ey_Vpm,Ez_Vpm\n0,0,0,abc,0,0\n";
        assert!(matches!(parse_field_map(text.as_bytes(), 1.0), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn csv_roundtrip() {
        let ax = |n: usize| (0..n).map(|i| i as f64 * 1e-6).collect::<Vec<_>>();
        let m = quadrupole_map([ax(4), vec![0.0], ax(5)], [1.5e-6, 0.0, 2.5e-6], 3.3e7, 6.0).unwrap();
        let mut buf = Vec::new();
        write_field_map_csv(&mut buf, &m).unwrap();
        let back = parse_field_map(buf.as_slice(), 6.0).unwrap();
        assert_eq!(back.shape(), m.shape());
        for (a, b) in back.field.iter().zip(&m.field) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() <= 1e-10 * b[k].abs().max(1.0));
            }
        }
    }
}
