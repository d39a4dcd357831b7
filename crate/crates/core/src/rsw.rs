//! Deterministic rotating shallow water tendencies of the variational
//! discretisation: momentum (`det`), continuity and potential vorticity.

use crate::error::{Error, Result};
use crate::geom::lat_lon;
use crate::mesh::Mesh;
use crate::ops::{curl, div, dual_average_cell_scalar, edge_mean_depth, grad_n, CellField, DualField, EdgeField};

pub const DEFAULT_DEPTH_THRESHOLD: f64 = 1e-6;

/// Prognostic variables: normal velocity on edges [m/s], depth on cells [m].
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub v: EdgeField,
    pub h: CellField,
}

impl State {
    pub fn rest(m: &Mesh, depth: f64) -> Self {
        State {
            v: EdgeField::zeros(m.n_edges()),
            h: CellField::constant(m.n_cells(), depth),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.h.is_finite()
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &State) {
        self.v.axpy(a, &other.v);
        self.h.axpy(a, &other.h);
    }

    /// `a * x + b * y`
    pub fn lincomb(a: f64, x: &State, b: f64, y: &State) -> State {
        let mut out = x.clone();
        for (o, yv) in out.v.iter_mut().zip(y.v.iter()) {
            *o = a * *o + b * yv;
        }
        for (o, yh) in out.h.iter_mut().zip(y.h.iter()) {
            *o = a * *o + b * yh;
        }
        out
    }
}

/// Physical constants and the derived Coriolis parameter at dual vertices.
#[derive(Debug, Clone)]
pub struct PhysParams {
    pub g: f64,
    pub planet_rotation: f64,
    /// `f = 2Ω sin(lat)` per dual cell [1/s].
    pub coriolis: DualField,
    /// Bottom topography per cell [m].
    pub eta_b: CellField,
    pub depth_threshold: f64,
}

impl PhysParams {
    pub fn new(m: &Mesh, g: f64, planet_rotation: f64) -> Self {
        let coriolis = DualField::from_fn(m.n_duals(), |z| {
            2.0 * planet_rotation * lat_lon(&m.vertices[z]).0.sin()
        });
        PhysParams {
            g,
            planet_rotation,
            coriolis,
            eta_b: CellField::zeros(m.n_cells()),
            depth_threshold: DEFAULT_DEPTH_THRESHOLD,
        }
    }

    /// Same gravity and rotation with a spatially uniform Coriolis parameter.
    pub fn with_constant_coriolis(m: &Mesh, g: f64, f0: f64) -> Self {
        PhysParams {
            g,
            planet_rotation: 0.0,
            coriolis: DualField::constant(m.n_duals(), f0),
            eta_b: CellField::zeros(m.n_cells()),
            depth_threshold: DEFAULT_DEPTH_THRESHOLD,
        }
    }
}

pub(crate) fn checked_dual_depth(m: &Mesh, h: &CellField, threshold: f64) -> Result<DualField> {
    let hz = dual_average_cell_scalar(m, h);
    if let Some((z, &d)) = hz
        .iter()
        .enumerate()
        .find(|(_, &d)| !(d > threshold))
    {
        return Err(Error::DegenerateDepth {
            entity: "dual cell",
            index: z,
            depth: d,
            threshold,
        });
    }
    Ok(hz)
}

pub(crate) fn check_cell_depth(h: &CellField, threshold: f64) -> Result<()> {
    match h.iter().enumerate().find(|(_, &d)| !(d > threshold)) {
        Some((c, &d)) => Err(Error::DegenerateDepth {
            entity: "cell",
            index: c,
            depth: d,
            threshold,
        }),
        None => Ok(()),
    }
}

/// `q_ζ = ((Curl V)_ζ + f_ζ) / h_ζ`
pub fn potential_vorticity(m: &Mesh, s: &State, p: &PhysParams) -> Result<DualField> {
    let hz = checked_dual_depth(m, &s.h, p.depth_threshold)?;
    let zeta = curl(m, &s.v);
    Ok(DualField::from_fn(m.n_duals(), |z| (zeta[z] + p.coriolis[z]) / hz[z]))
}

/// Absolute vorticity `(Curl V)_ζ + f_ζ`.
pub fn absolute_vorticity(m: &Mesh, v: &EdgeField, p: &PhysParams) -> DualField {
    let mut zeta = curl(m, v);
    for (z, f) in zeta.iter_mut().zip(p.coriolis.iter()) {
        *z += f;
    }
    zeta
}

/// The two vorticity-flux groups shared by the momentum tendency and the
/// Casimir dissipation, with `circulation` standing in for `(Curl V + f)`:
///
/// `C_ζ−/(h̄|ẽ|) (w_i− h̄_{j,i−} |e_{ii−}| V_{ii−} + w_j− h̄_{i,j−} |e_{jj−}| V_{jj−})
///  −C_ζ+/(h̄|ẽ|) (same over i+, j+)`
///
/// with `w = |ζ ∩ T|/(2Ω_T)` and the paired depth `h̄_{a,b} = (h_a + h_b)/2`
/// taken across the two outer cells of the triangle pair, which makes the
/// pairing symmetric and the groups do no work. For uniform `C` and `h` this
/// approximates `−C (k × u)·n = C u·t`.
pub fn vorticity_flux(m: &Mesh, v: &EdgeField, h: &CellField, circulation: &DualField) -> EdgeField {
    let hb = edge_mean_depth(m, h);
    EdgeField::from_fn(m.n_edges(), |e| {
        let [i, j] = m.edge_cells[e];
        let [zp, zm] = m.edge_duals[e];
        let w = &m.wings[e];
        let arm = |k: usize, owner: usize, partner: usize| {
            let wing = &w[k];
            let hbar = 0.5 * (h[partner] + h[wing.far_cell]);
            wing.overlap / (2.0 * m.cell_area[owner])
                * hbar
                * m.primal_edge_len[wing.edge]
                * wing.sign
                * v[wing.edge]
        };
        let minus = arm(0, i, j) + arm(2, j, i);
        let plus = arm(1, i, j) + arm(3, j, i);
        (circulation[zm] * minus - circulation[zp] * plus) / (hb[e] * m.dual_edge_len[e])
    })
}

/// `Σ_k |ẽ_ik||e_ik| a_ik b_ik / (2Ω_i)` per cell; with `a = b = V` this is
/// twice the cell kinetic energy density.
pub fn cell_edge_product(m: &Mesh, a: &EdgeField, b: &EdgeField) -> CellField {
    CellField::from_fn(m.n_cells(), |c| {
        let mut s = 0.0;
        for &e in &m.cell_edges[c] {
            s += m.dual_edge_len[e] * m.primal_edge_len[e] * a[e] * b[e];
        }
        s / (2.0 * m.cell_area[c])
    })
}

/// Momentum tendency: vorticity flux, Bernoulli gradient and pressure
/// gradient, so that `∂_t V = det` in the absence of other terms.
pub fn det_tendency(m: &Mesh, s: &State, p: &PhysParams) -> Result<EdgeField> {
    check_cell_depth(&s.h, p.depth_threshold)?;
    let q = absolute_vorticity(m, &s.v, p);
    let mut out = vorticity_flux(m, &s.v, &s.h, &q);
    let kin = grad_n(m, &cell_edge_product(m, &s.v, &s.v));
    let geo = CellField::from_fn(m.n_cells(), |c| s.h[c] + p.eta_b[c]);
    let pres = grad_n(m, &geo);
    for e in 0..m.n_edges() {
        out[e] += -0.5 * kin[e] - p.g * pres[e];
    }
    Ok(out)
}

/// Mass flux `h̄ V` per edge.
pub fn mass_flux(m: &Mesh, s: &State) -> EdgeField {
    let hb = edge_mean_depth(m, &s.h);
    EdgeField::from_fn(m.n_edges(), |e| hb[e] * s.v[e])
}

/// `−Div(h̄ V)`
pub fn continuity_tendency(m: &Mesh, s: &State) -> CellField {
    let d = div(m, &mass_flux(m, s));
    d.scaled(-1.0)
}
