//! Icosahedral triangular mesh on the sphere with its circumcentric dual.
//!
//! Primal cells are the spherical triangles obtained by recursive edge
//! bisection of the regular icosahedron. Dual cells are centred on the primal
//! vertices and bounded by great-circle arcs joining the circumcentres of the
//! surrounding triangles. Every primal edge `e_ij` carries
//!
//! * its two cells `(i, j)` with `i < j`; the unit normal `n_ij` points from
//!   `T_i` towards `T_j`,
//! * its two dual cells `(ζ+, ζ−)` ordered so that `(n_ij, ζ+→ζ−, r̂)` is
//!   right-handed; the unit tangent `t_ij = r̂ × n_ij` points from `ζ+` to `ζ−`.
//!
//! Numbering is canonical: children of a triangle are stored consecutively
//! in subdivision order, edges in order of first appearance while sweeping
//! the cells, vertices in order of creation.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geom::{arc_angle, spherical_circumcenter, spherical_triangle_area, Vec3};

pub const DEFAULT_MAX_LEVEL: u32 = 8;
pub const MESH_MAGIC: &str = "SPHEROMESH v1";

/// One of the four edges adjacent to an edge through a shared triangle and
/// a shared dual vertex (`i−`, `i+`, `j−`, `j+` in the usual stencil).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wing {
    /// Index of the neighbouring edge.
    pub edge: usize,
    /// Multiplies the stored value of `edge` to orient it outward from the
    /// owning triangle.
    pub sign: f64,
    /// Cell on the far side of `edge`, seen from the owning triangle.
    pub far_cell: usize,
    /// `|ζ ∩ T|` for the shared dual cell and the owning triangle.
    pub overlap: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub level: u32,
    pub radius: f64,

    /// Primal vertices (= dual cell centres) on the sphere [m].
    pub vertices: Vec<Vec3>,

    /// Vertex indices of each triangle, counter-clockwise seen from outside.
    pub cells: Vec<[usize; 3]>,
    /// `cell_edges[c][k]` joins `cells[c][k]` and `cells[c][(k+1)%3]`.
    pub cell_edges: Vec<[usize; 3]>,
    /// +1 where the edge normal points out of the cell, −1 otherwise.
    pub cell_edge_sign: Vec<[f64; 3]>,
    pub cell_area: Vec<f64>,
    /// Spherical circumcentres (= dual vertices) [m].
    pub cell_center: Vec<Vec3>,
    /// `|ζ_v ∩ T|` for each corner vertex `v = cells[c][k]`.
    pub corner_overlap: Vec<[f64; 3]>,

    pub edge_cells: Vec<[usize; 2]>,
    /// `[ζ+, ζ−]` as vertex indices.
    pub edge_duals: Vec<[usize; 2]>,
    pub primal_edge_len: Vec<f64>,
    pub dual_edge_len: Vec<f64>,
    pub edge_midpoint: Vec<Vec3>,
    pub edge_normal: Vec<Vec3>,
    pub edge_tangent: Vec<Vec3>,
    /// `[i−, i+, j−, j+]`.
    pub wings: Vec<[Wing; 4]>,

    pub dual_area: Vec<f64>,
    pub dual_edges: Vec<Vec<usize>>,
    /// +1 where a positive edge value circulates counter-clockwise around
    /// the dual cell.
    pub dual_edge_sign: Vec<Vec<f64>>,
    pub dual_cells: Vec<Vec<usize>>,
    /// `|ζ ∩ T_i|`, aligned with `dual_cells`.
    pub dual_overlap: Vec<Vec<f64>>,
    /// Least-squares weights, aligned with `dual_cells`, that interpolate
    /// circumcentre values to the dual centre exactly for functions linear
    /// in the tangent plane. They sum to one.
    pub dual_interp: Vec<Vec<f64>>,
}

impl Mesh {
    /// Builds the level-`level` mesh, refusing anything above
    /// [`DEFAULT_MAX_LEVEL`].
    pub fn icosahedral(level: u32, radius: f64) -> Result<Self> {
        Self::icosahedral_with_limit(level, radius, DEFAULT_MAX_LEVEL)
    }

    pub fn icosahedral_with_limit(level: u32, radius: f64, max_level: u32) -> Result<Self> {
        if level > max_level {
            return Err(Error::ResourceExhausted {
                level,
                max: max_level,
            });
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        let (verts, tris) = subdivide(level);
        Ok(assemble(level, radius, verts, tris))
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edge_cells.len()
    }

    pub fn n_duals(&self) -> usize {
        self.vertices.len()
    }

    /// Cells sharing an edge with `c`, in `cell_edges` order.
    pub fn cell_neighbors(&self, c: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for (k, &e) in self.cell_edges[c].iter().enumerate() {
            let [a, b] = self.edge_cells[e];
            out[k] = if a == c { b } else { a };
        }
        out
    }

    pub fn sphere_area(&self) -> f64 {
        4.0 * PI * self.radius * self.radius
    }

    /// Outward unit radial at a point of the sphere.
    pub fn radial(&self, p: &Vec3) -> Vec3 {
        p / self.radius
    }

    pub fn min_dual_edge_len(&self) -> f64 {
        self.dual_edge_len.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean_primal_edge_len(&self) -> f64 {
        self.primal_edge_len.iter().sum::<f64>() / self.n_edges() as f64
    }

    /// Writes the plain-text dump described in `docs/formats.md`.
    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.dump_to(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn dump_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{MESH_MAGIC}")?;
        writeln!(w, "level {}", self.level)?;
        writeln!(w, "radius {:.17e}", self.radius)?;
        writeln!(
            w,
            "counts {} {} {}",
            self.n_cells(),
            self.n_edges(),
            self.n_duals()
        )?;
        writeln!(w, "[vertices]")?;
        for (v, a) in self.vertices.iter().zip(&self.dual_area) {
            writeln!(w, "{:.17e} {:.17e} {:.17e} {:.17e}", v.x, v.y, v.z, a)?;
        }
        writeln!(w, "[cells]")?;
        for c in 0..self.n_cells() {
            let [a, b, d] = self.cells[c];
            let [e0, e1, e2] = self.cell_edges[c];
            let p = self.cell_center[c];
            writeln!(
                w,
                "{a} {b} {d} {e0} {e1} {e2} {:.17e} {:.17e} {:.17e} {:.17e}",
                self.cell_area[c], p.x, p.y, p.z
            )?;
        }
        writeln!(w, "[edges]")?;
        for e in 0..self.n_edges() {
            let [i, j] = self.edge_cells[e];
            let [zp, zm] = self.edge_duals[e];
            let n = self.edge_normal[e];
            writeln!(
                w,
                "{i} {j} {zp} {zm} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
                self.primal_edge_len[e], self.dual_edge_len[e], n.x, n.y, n.z
            )?;
        }
        writeln!(w, "end")
    }
}

fn icosahedron() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut raw = Vec::with_capacity(12);
    for &(s1, s2) in &[(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        raw.push(Vec3::new(0.0, s1, s2 * phi));
    }
    for &(s1, s2) in &[(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        raw.push(Vec3::new(s1, s2 * phi, 0.0));
    }
    for &(s1, s2) in &[(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        raw.push(Vec3::new(s2 * phi, 0.0, s1));
    }
    // Rotate about x so that the first vertex sits on the north pole.
    let alpha = (1.0 / phi).atan();
    let (s, c) = alpha.sin_cos();
    let verts: Vec<Vec3> = raw
        .iter()
        .map(|v| Vec3::new(v.x, v.y * c - v.z * s, v.y * s + v.z * c).normalize())
        .collect();

    let mut faces = Vec::with_capacity(20);
    let edge2 = 4.0 / (1.0 + phi * phi);
    let adjacent = |a: usize, b: usize| ((verts[a] - verts[b]).norm_squared() - edge2).abs() < 1e-9;
    for i in 0..12 {
        for j in i + 1..12 {
            if !adjacent(i, j) {
                continue;
            }
            for k in j + 1..12 {
                if adjacent(i, k) && adjacent(j, k) {
                    let outward = (verts[j] - verts[i])
                        .cross(&(verts[k] - verts[i]))
                        .dot(&verts[i])
                        > 0.0;
                    faces.push(if outward { [i, j, k] } else { [i, k, j] });
                }
            }
        }
    }
    debug_assert_eq!(faces.len(), 20);
    (verts, faces)
}

fn subdivide(level: u32) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let (mut verts, mut tris) = icosahedron();
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::with_capacity(tris.len() * 2);
        let mut next = Vec::with_capacity(tris.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                verts.push((verts[a] + verts[b]).normalize());
                verts.len() - 1
            })
        };
        for &[a, b, c] in &tris {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.push([a, ab, ca]);
            next.push([ab, b, bc]);
            next.push([ca, bc, c]);
            next.push([ab, bc, ca]);
        }
        tris = next;
    }
    (verts, tris)
}

fn assemble(level: u32, radius: f64, unit_verts: Vec<Vec3>, cells: Vec<[usize; 3]>) -> Mesh {
    let nc = cells.len();
    let nv = unit_verts.len();
    let r2 = radius * radius;

    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::with_capacity(nc * 2);
    let mut edge_verts: Vec<[usize; 2]> = Vec::with_capacity(nc * 3 / 2);
    let mut edge_cell_list: Vec<Vec<usize>> = Vec::with_capacity(nc * 3 / 2);
    let mut cell_edges = vec![[0usize; 3]; nc];
    for (c, tri) in cells.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let e = *edge_index.entry(key).or_insert_with(|| {
                edge_verts.push([key.0, key.1]);
                edge_cell_list.push(Vec::with_capacity(2));
                edge_verts.len() - 1
            });
            edge_cell_list[e].push(c);
            cell_edges[c][k] = e;
        }
    }
    let ne = edge_verts.len();

    let unit_center: Vec<Vec3> = cells
        .iter()
        .map(|&[a, b, c]| spherical_circumcenter(&unit_verts[a], &unit_verts[b], &unit_verts[c]))
        .collect();
    let cell_area: Vec<f64> = cells
        .iter()
        .map(|&[a, b, c]| r2 * spherical_triangle_area(&unit_verts[a], &unit_verts[b], &unit_verts[c]))
        .collect();

    let mut edge_cells = vec![[0usize; 2]; ne];
    let mut edge_duals = vec![[0usize; 2]; ne];
    let mut primal_edge_len = vec![0.0; ne];
    let mut dual_edge_len = vec![0.0; ne];
    let mut edge_midpoint = vec![Vec3::zeros(); ne];
    let mut edge_normal = vec![Vec3::zeros(); ne];
    let mut edge_tangent = vec![Vec3::zeros(); ne];
    let mut unit_mid = vec![Vec3::zeros(); ne];
    for e in 0..ne {
        let cl = &edge_cell_list[e];
        assert_eq!(cl.len(), 2, "edge {e} is not shared by exactly two cells");
        let (i, j) = (cl[0].min(cl[1]), cl[0].max(cl[1]));
        edge_cells[e] = [i, j];
        let [a, b] = edge_verts[e];
        let (pa, pb) = (unit_verts[a], unit_verts[b]);
        let m = (pa + pb).normalize();
        let mut n = m.cross(&(pb - pa)).normalize();
        let opp = |c: usize| -> Vec3 {
            let v = cells[c].iter().copied().find(|&v| v != a && v != b).unwrap();
            unit_verts[v]
        };
        if n.dot(&(opp(j) - opp(i))) < 0.0 {
            n = -n;
        }
        let t = m.cross(&n);
        edge_duals[e] = if t.dot(&(pb - pa)) > 0.0 { [a, b] } else { [b, a] };
        primal_edge_len[e] = radius * arc_angle(&pa, &pb);
        dual_edge_len[e] = radius * arc_angle(&unit_center[i], &unit_center[j]);
        unit_mid[e] = m;
        edge_midpoint[e] = m * radius;
        edge_normal[e] = n;
        edge_tangent[e] = t;
    }

    let mut cell_edge_sign = vec![[0.0; 3]; nc];
    let mut corner_overlap = vec![[0.0; 3]; nc];
    for c in 0..nc {
        for k in 0..3 {
            let e = cell_edges[c][k];
            cell_edge_sign[c][k] = if edge_cells[e][0] == c { 1.0 } else { -1.0 };
            // kite at corner k: vertex, midpoint of the outgoing edge,
            // circumcentre, midpoint of the incoming edge
            let v = unit_verts[cells[c][k]];
            let m_out = unit_mid[cell_edges[c][k]];
            let m_in = unit_mid[cell_edges[c][(k + 2) % 3]];
            let o = unit_center[c];
            corner_overlap[c][k] = r2
                * (spherical_triangle_area(&v, &m_out, &o) + spherical_triangle_area(&v, &o, &m_in));
        }
    }

    let mut dual_edges = vec![Vec::with_capacity(6); nv];
    let mut dual_edge_sign = vec![Vec::with_capacity(6); nv];
    for e in 0..ne {
        let [zp, zm] = edge_duals[e];
        dual_edges[zp].push(e);
        dual_edge_sign[zp].push(-1.0);
        dual_edges[zm].push(e);
        dual_edge_sign[zm].push(1.0);
    }
    let mut dual_cells = vec![Vec::with_capacity(6); nv];
    let mut dual_overlap = vec![Vec::with_capacity(6); nv];
    let mut dual_area = vec![0.0; nv];
    for c in 0..nc {
        for k in 0..3 {
            let v = cells[c][k];
            dual_cells[v].push(c);
            dual_overlap[v].push(corner_overlap[c][k]);
        }
    }
    // the kites tile the circumcentre polygon with the edge midpoints as
    // extra vertices; summing them keeps the partition exact at fine levels
    for v in 0..nv {
        dual_area[v] = dual_overlap[v].iter().sum();
    }

    let dual_interp = (0..nv)
        .map(|v| linear_interpolation_weights(&unit_verts[v], dual_cells[v].iter().map(|&c| unit_center[c])))
        .collect();

    let overlap_of = |c: usize, v: usize| -> f64 {
        let k = cells[c].iter().position(|&x| x == v).expect("vertex not in cell");
        corner_overlap[c][k]
    };
    let wing = |owner: usize, e: usize, zeta: usize| -> Wing {
        let k = (0..3)
            .find(|&k| {
                let w = cell_edges[owner][k];
                w != e && edge_verts[w].contains(&zeta)
            })
            .expect("wing edge missing");
        let w = cell_edges[owner][k];
        let [a, b] = edge_cells[w];
        Wing {
            edge: w,
            sign: if a == owner { 1.0 } else { -1.0 },
            far_cell: if a == owner { b } else { a },
            overlap: overlap_of(owner, zeta),
        }
    };
    let wings: Vec<[Wing; 4]> = (0..ne)
        .map(|e| {
            let [i, j] = edge_cells[e];
            let [zp, zm] = edge_duals[e];
            [wing(i, e, zm), wing(i, e, zp), wing(j, e, zm), wing(j, e, zp)]
        })
        .collect();

    Mesh {
        level,
        radius,
        vertices: unit_verts.iter().map(|v| v * radius).collect(),
        cells,
        cell_edges,
        cell_edge_sign,
        cell_area,
        cell_center: unit_center.iter().map(|v| v * radius).collect(),
        corner_overlap,
        edge_cells,
        edge_duals,
        primal_edge_len,
        dual_edge_len,
        edge_midpoint,
        edge_normal,
        edge_tangent,
        wings,
        dual_area,
        dual_edges,
        dual_edge_sign,
        dual_cells,
        dual_overlap,
        dual_interp,
    }
}

/// Intercept row of the least-squares fit `f ≈ a + b·(p − x)` in the tangent
/// plane at `x`.
fn linear_interpolation_weights(x: &Vec3, pts: impl Iterator<Item = Vec3>) -> Vec<f64> {
    let axis = if x.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
    let e1 = axis.cross(x).normalize();
    let e2 = x.cross(&e1);
    let rows: Vec<Vector3<f64>> = pts
        .map(|p| {
            let d = p - x;
            Vector3::new(1.0, d.dot(&e1), d.dot(&e2))
        })
        .collect();
    let ata = rows.iter().fold(Matrix3::zeros(), |a, r| a + r * r.transpose());
    let inv = ata.try_inverse().expect("degenerate dual stencil");
    let first = inv.row(0).transpose();
    rows.iter().map(|r| first.dot(r)).collect()
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst-case residual found (meaning depends on the check).
    pub worst: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<4} {:<28} worst={:.3e} tol={:.1e}",
                if c.passed { "ok" } else { "FAIL" },
                c.name,
                c.worst,
                c.tolerance
            )?;
        }
        Ok(())
    }
}

/// Runs every structural and geometric invariant check on a mesh.
pub fn validate_mesh(m: &Mesh) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |name, worst: f64, tolerance: f64| {
        checks.push(Check {
            name,
            passed: worst <= tolerance,
            worst,
            tolerance,
        })
    };

    let p = 4u64.pow(m.level) as usize;
    let count_err = (m.n_cells() != 20 * p) as u8 as f64
        + (m.n_edges() != 30 * p) as u8 as f64
        + (m.n_duals() != 10 * p + 2) as u8 as f64;
    push("entity counts", count_err, 0.0);
    let euler = m.n_cells() as i64 - m.n_edges() as i64 + m.n_duals() as i64 - 2;
    push("euler characteristic", euler.abs() as f64, 0.0);

    let sphere = m.sphere_area();
    let cell_sum: f64 = m.cell_area.iter().sum();
    push("cell area partition", ((cell_sum - sphere) / sphere).abs(), 1e-12);
    let dual_sum: f64 = m.dual_area.iter().sum();
    push("dual area partition", ((dual_sum - sphere) / sphere).abs(), 1e-12);

    let dual_overlap_err = (0..m.n_duals())
        .map(|z| {
            let s: f64 = m.dual_overlap[z].iter().sum();
            ((s - m.dual_area[z]) / m.dual_area[z]).abs()
        })
        .fold(0.0, f64::max);
    push("dual overlap partition", dual_overlap_err, 1e-12);
    let cell_overlap_err = (0..m.n_cells())
        .map(|c| {
            let s: f64 = m.corner_overlap[c].iter().sum();
            ((s - m.cell_area[c]) / m.cell_area[c]).abs()
        })
        .fold(0.0, f64::max);
    push("cell overlap partition", cell_overlap_err, 1e-12);

    let mut incidence = 0.0;
    let mut orientation: f64 = 0.0;
    let mut handedness: f64 = 0.0;
    let mut unit: f64 = 0.0;
    let mut ortho: f64 = 0.0;
    for e in 0..m.n_edges() {
        let [i, j] = m.edge_cells[e];
        let [zp, zm] = m.edge_duals[e];
        if i >= j || zp == zm || !m.cell_edges[i].contains(&e) || !m.cell_edges[j].contains(&e) {
            incidence += 1.0;
        }
        let (n, t) = (m.edge_normal[e], m.edge_tangent[e]);
        let r = m.radial(&m.edge_midpoint[e]);
        // a non-positive projection counts as a full violation
        let towards = n.dot(&(m.cell_center[j] - m.cell_center[i]));
        if towards <= 0.0 {
            orientation += 1.0;
        }
        if t.dot(&(m.vertices[zm] - m.vertices[zp])) <= 0.0 || n.cross(&t).dot(&r) <= 0.0 {
            handedness += 1.0;
        }
        unit = unit.max((n.norm() - 1.0).abs()).max((t.norm() - 1.0).abs());
        ortho = ortho
            .max(n.dot(&t).abs())
            .max(n.dot(&r).abs())
            .max(t.dot(&r).abs());
    }
    for c in 0..m.n_cells() {
        for k in 0..3 {
            let e = m.cell_edges[c][k];
            let expect = if m.edge_cells[e][0] == c { 1.0 } else { -1.0 };
            if m.cell_edge_sign[c][k] != expect {
                incidence += 1.0;
            }
        }
    }
    push("edge incidence", incidence, 0.0);
    push("normal towards T_j", orientation, 0.0);
    push("dual ordering handedness", handedness, 0.0);
    push("unit normal/tangent", unit, 1e-14);
    push("normal/tangent orthogonality", ortho, 1e-12);

    let (lo, hi) = m
        .primal_edge_len
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &l| (lo.min(l), hi.max(l)));
    push("edge length ratio", hi / lo, 1.3);

    ValidationReport { checks }
}
