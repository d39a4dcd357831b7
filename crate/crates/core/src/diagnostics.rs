//! Conserved and monitored functionals: total energy, potential enstrophy
//! (the discrete Casimir), mass, and lat-lon projections for snapshots.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{from_lat_lon, Vec3};
use crate::mesh::Mesh;
use crate::ops::{edge_mean_depth, grad_t, CellField, DualField, EdgeField};
use crate::rsw::{checked_dual_depth, potential_vorticity, PhysParams, State};

/// One row of the diagnostics time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub enstrophy: f64,
    pub mass: f64,
}

pub const CSV_HEADER: &str = "step,time,energy,enstrophy,mass";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsSeries {
    pub records: Vec<DiagnosticsRecord>,
}

impl DiagnosticsSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, r: DiagnosticsRecord) {
        self.records.push(r);
    }

    /// `(E(t) − E(0)) / E(0)` per record.
    pub fn relative_energy(&self) -> Vec<f64> {
        let Some(e0) = self.records.first().map(|r| r.energy) else {
            return Vec::new();
        };
        self.records.iter().map(|r| (r.energy - e0) / e0).collect()
    }

    pub fn relative_enstrophy(&self) -> Vec<f64> {
        let Some(c0) = self.records.first().map(|r| r.enstrophy) else {
            return Vec::new();
        };
        self.records.iter().map(|r| (r.enstrophy - c0) / c0).collect()
    }

    /// Record closest to model time `t`.
    pub fn at_time(&self, t: f64) -> Option<&DiagnosticsRecord> {
        self.records.iter().min_by(|a, b| {
            (a.time - t).abs().total_cmp(&(b.time - t).abs())
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.step, r.time, r.energy, r.enstrophy, r.mass
            ));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            return Err(Error::Config("diagnostics CSV header mismatch".into()));
        }
        let bad = |l: &str| Error::Config(format!("malformed diagnostics row `{l}`"));
        let mut out = DiagnosticsSeries::default();
        for l in lines.filter(|l| !l.is_empty()) {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(bad(l));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(l));
            out.push(DiagnosticsRecord {
                step: f[0].parse().map_err(|_| bad(l))?,
                time: num(f[1])?,
                energy: num(f[2])?,
                enstrophy: num(f[3])?,
                mass: num(f[4])?,
            });
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// `½ Σ_e |e||ẽ| h̄ V² + ½ g Σ_i (h_i + η_b,i)² Ω_i`
pub fn total_energy(m: &Mesh, s: &State, p: &PhysParams) -> f64 {
    kinetic_energy(m, s) + potential_energy(m, s, p)
}

pub fn kinetic_energy(m: &Mesh, s: &State) -> f64 {
    let hb = edge_mean_depth(m, &s.h);
    0.5 * (0..m.n_edges())
        .map(|e| m.primal_edge_len[e] * m.dual_edge_len[e] * hb[e] * s.v[e] * s.v[e])
        .sum::<f64>()
}

pub fn potential_energy(m: &Mesh, s: &State, p: &PhysParams) -> f64 {
    0.5 * p.g
        * (0..m.n_cells())
            .map(|c| {
                let d = s.h[c] + p.eta_b[c];
                d * d * m.cell_area[c]
            })
            .sum::<f64>()
}

/// Exact partial derivatives `(∂E/∂V_e, ∂E/∂h_i)` of [`total_energy`].
pub fn energy_gradient(m: &Mesh, s: &State, p: &PhysParams) -> (EdgeField, CellField) {
    let hb = edge_mean_depth(m, &s.h);
    let dv = EdgeField::from_fn(m.n_edges(), |e| {
        m.primal_edge_len[e] * m.dual_edge_len[e] * hb[e] * s.v[e]
    });
    let dh = CellField::from_fn(m.n_cells(), |c| {
        let mut k = 0.0;
        for &e in &m.cell_edges[c] {
            k += m.primal_edge_len[e] * m.dual_edge_len[e] * s.v[e] * s.v[e];
        }
        0.25 * k + p.g * (s.h[c] + p.eta_b[c]) * m.cell_area[c]
    });
    (dv, dh)
}

/// `½ Σ_ζ h_ζ q_ζ² |ζ|`
pub fn potential_enstrophy(m: &Mesh, s: &State, p: &PhysParams) -> Result<f64> {
    let q = potential_vorticity(m, s, p)?;
    let hz = checked_dual_depth(m, &s.h, p.depth_threshold)?;
    Ok(0.5
        * (0..m.n_duals())
            .map(|z| hz[z] * q[z] * q[z] * m.dual_area[z])
            .sum::<f64>())
}

/// Exact partial derivatives `(∂C/∂V_e, ∂C/∂h_i)` of
/// [`potential_enstrophy`]; the velocity part is `|e||ẽ| (Grad_t q)_e`.
pub fn enstrophy_gradient(m: &Mesh, s: &State, p: &PhysParams) -> Result<(EdgeField, CellField)> {
    let q = potential_vorticity(m, s, p)?;
    let gt = grad_t(m, &q);
    let dv = EdgeField::from_fn(m.n_edges(), |e| {
        m.primal_edge_len[e] * m.dual_edge_len[e] * gt[e]
    });
    let mut dh = CellField::zeros(m.n_cells());
    for z in 0..m.n_duals() {
        for (&c, &o) in m.dual_cells[z].iter().zip(&m.dual_overlap[z]) {
            dh[c] -= 0.5 * o * q[z] * q[z];
        }
    }
    Ok((dv, dh))
}

/// `Σ_i h_i Ω_i`
pub fn total_mass(m: &Mesh, h: &CellField) -> f64 {
    (0..m.n_cells()).map(|c| h[c] * m.cell_area[c]).sum()
}

pub fn record(m: &Mesh, s: &State, p: &PhysParams, step: usize, time: f64) -> Result<DiagnosticsRecord> {
    Ok(DiagnosticsRecord {
        step,
        time,
        energy: total_energy(m, s, p),
        enstrophy: potential_enstrophy(m, s, p)?,
        mass: total_mass(m, &s.h),
    })
}

/// Field to project onto a lat-lon grid.
#[derive(Debug, Clone, Copy)]
pub enum MeshField<'a> {
    Cell(&'a CellField),
    Dual(&'a DualField),
}

/// Regular lat-lon raster, rows ordered south to north.
#[derive(Debug, Clone, PartialEq)]
pub struct LatLonGrid {
    pub nlat: usize,
    pub nlon: usize,
    pub values: Vec<f64>,
}

impl LatLonGrid {
    pub fn latitude(&self, row: usize) -> f64 {
        -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * (row as f64 + 0.5) / self.nlat as f64
    }

    pub fn longitude(&self, col: usize) -> f64 {
        -std::f64::consts::PI + 2.0 * std::f64::consts::PI * col as f64 / self.nlon as f64
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.nlon + col]
    }

    /// Plain-text snapshot: one header line, then `nlat` rows south→north.
    pub fn write_text(&self, w: &mut impl Write, name: &str, day: f64) -> std::io::Result<()> {
        writeln!(w, "{name} {day:.6} {} {}", self.nlat, self.nlon)?;
        for r in 0..self.nlat {
            let row: Vec<String> = (0..self.nlon)
                .map(|c| format!("{:.9e}", self.get(r, c)))
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Locates the triangle containing a unit vector by walking across edges,
/// starting from `hint`.
pub fn locate_cell(m: &Mesh, p: &Vec3, hint: usize) -> usize {
    let inside_edge = |c: usize, k: usize| {
        let a = m.vertices[m.cells[c][k]];
        let b = m.vertices[m.cells[c][(k + 1) % 3]];
        p.dot(&a.cross(&b)) >= 0.0
    };
    let mut c = hint.min(m.n_cells() - 1);
    for _ in 0..4 * m.n_cells() {
        match (0..3).find(|&k| !inside_edge(c, k)) {
            None => return c,
            Some(k) => {
                let e = m.cell_edges[c][k];
                let [i, j] = m.edge_cells[e];
                c = if i == c { j } else { i };
            }
        }
    }
    // degenerate walk; fall back to the nearest circumcentre
    (0..m.n_cells())
        .min_by(|&a, &b| {
            (m.cell_center[a].normalize() - p)
                .norm()
                .total_cmp(&(m.cell_center[b].normalize() - p).norm())
        })
        .unwrap()
}

/// Samples a cell or dual field at the nodes of a lat-lon grid by
/// point location (containing triangle, or containing dual cell).
pub fn project_to_latlon(m: &Mesh, field: MeshField<'_>, nlat: usize, nlon: usize) -> Result<LatLonGrid> {
    if nlat < 2 || nlon < 2 {
        return Err(Error::InvalidArgument(format!(
            "lat-lon grid must be at least 2x2, got {nlat}x{nlon}"
        )));
    }
    let mut grid = LatLonGrid {
        nlat,
        nlon,
        values: vec![0.0; nlat * nlon],
    };
    let mut hint = 0;
    for r in 0..nlat {
        let lat = grid.latitude(r);
        for col in 0..nlon {
            let p = from_lat_lon(lat, grid.longitude(col));
            let c = locate_cell(m, &p, hint);
            hint = c;
            grid.values[r * nlon + col] = match field {
                MeshField::Cell(f) => f[c],
                MeshField::Dual(f) => {
                    // the kite of corner k is the part of T closest to that corner
                    let v = m.cells[c]
                        .iter()
                        .copied()
                        .min_by(|&a, &b| {
                            (m.vertices[a].normalize() - p)
                                .norm()
                                .total_cmp(&(m.vertices[b].normalize() - p).norm())
                        })
                        .unwrap();
                    f[v]
                }
            };
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn resting_energy_closed_form() {
        let m = Mesh::icosahedral(2, 1.0).unwrap();
        let p = PhysParams::new(&m, 9.81, 0.0);
        let s = State::rest(&m, 3.0);
        let e = total_energy(&m, &s, &p);
        let expect = 0.5 * 9.81 * 9.0 * 4.0 * PI;
        assert!((e - expect).abs() / expect < 1e-13);
    }

    #[test]
    fn energy_at_rest_matches_loop_and_sign_flip() {
        let m = Mesh::icosahedral(2, 1.0).unwrap();
        let p = PhysParams::new(&m, 2.0, 0.0);
        let mut s = State::rest(&m, 0.0);
        for c in 0..m.n_cells() {
            s.h[c] = 1.0 + (c % 5) as f64;
        }
        let direct: f64 = (0..m.n_cells()).map(|c| 0.5 * 2.0 * s.h[c].powi(2) * m.cell_area[c]).sum();
        assert!((total_energy(&m, &s, &p) - direct).abs() < 1e-12 * direct);
        for e in 0..m.n_edges() {
            s.v[e] = (e % 3) as f64 - 1.0;
        }
        let e1 = total_energy(&m, &s, &p);
        s.v = s.v.scaled(-1.0);
        assert_eq!(e1, total_energy(&m, &s, &p));
    }

    #[test]
    fn enstrophy_closed_form_and_scaling() {
        let r = 2.0;
        let m = Mesh::icosahedral(2, r).unwrap();
        let p = PhysParams::with_constant_coriolis(&m, 9.81, 1e-4);
        let s = State::rest(&m, 10.0);
        let c = potential_enstrophy(&m, &s, &p).unwrap();
        let expect = 0.5 * (1e-4f64.powi(2) / 10.0) * 4.0 * PI * r * r;
        assert!((c - expect).abs() / expect < 1e-12);
        let p2 = PhysParams::with_constant_coriolis(&m, 9.81, 2e-4);
        let c2 = potential_enstrophy(&m, &s, &p2).unwrap();
        assert!((c2 / c - 4.0).abs() < 1e-12);
    }

    #[test]
    fn mass_closed_form() {
        let m = Mesh::icosahedral(3, 5.0).unwrap();
        let mass = total_mass(&m, &CellField::constant(m.n_cells(), 2.0));
        assert!((mass - 2.0 * 4.0 * PI * 25.0).abs() < 1e-11 * mass);
        assert_eq!(total_mass(&m, &CellField::zeros(m.n_cells())), 0.0);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut s = DiagnosticsSeries::default();
        s.push(DiagnosticsRecord { step: 0, time: 0.0, energy: 1.0 / 3.0, enstrophy: 2e-17, mass: 5.1e18 });
        s.push(DiagnosticsRecord { step: 5, time: 3600.5, energy: 0.1 + 0.2, enstrophy: 7.0, mass: -0.0 });
        let text = s.to_csv();
        assert!(text.starts_with("step,time,energy,enstrophy,mass\n"));
        assert_eq!(DiagnosticsSeries::from_csv(&text).unwrap(), s);
    }

    #[test]
    fn latlon_projection_of_constant_and_hemispheres() {
        let m = Mesh::icosahedral(3, 1.0).unwrap();
        let g = project_to_latlon(&m, MeshField::Cell(&CellField::constant(m.n_cells(), 4.0)), 8, 16).unwrap();
        assert!(g.values.iter().all(|&v| v == 4.0));

        let ind = CellField::from_fn(m.n_cells(), |c| m.cell_center[c].z.signum());
        let g = project_to_latlon(&m, MeshField::Cell(&ind), 36, 72).unwrap();
        for r in 0..g.nlat {
            let lat = g.latitude(r);
            if lat.abs() < 0.2 {
                continue;
            }
            for c in 0..g.nlon {
                assert_eq!(g.get(r, c), lat.signum());
            }
        }
        assert!(project_to_latlon(&m, MeshField::Cell(&ind), 1, 4).is_err());
    }

    #[test]
    fn located_cell_contains_point() {
        let m = Mesh::icosahedral(4, 1.0).unwrap();
        for k in 0..200 {
            let p = from_lat_lon((k as f64 * 0.37).sin() * 1.5, k as f64 * 0.91);
            let c = locate_cell(&m, &p, (k * 97) % m.n_cells());
            for j in 0..3 {
                let a = m.vertices[m.cells[c][j]];
                let b = m.vertices[m.cells[c][(j + 1) % 3]];
                assert!(p.dot(&a.cross(&b)) >= 0.0);
            }
        }
    }
}
