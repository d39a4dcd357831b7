//! Discrete fields and the mimetic finite-difference operators acting on
//! them.
//!
//! Edge values are stored for the orientation `i → j` of
//! [`Mesh::edge_cells`]; the reversed value is the negative and is never
//! stored. Every operator is matrix-free and sums in a fixed order, so
//! results are bitwise reproducible.

use std::ops::{Deref, DerefMut};

use crate::geom::{tangent_part, Vec3};
use crate::mesh::Mesh;

macro_rules! scalar_field {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct $name(pub Vec<f64>);

        impl $name {
            pub fn zeros(n: usize) -> Self {
                Self(vec![0.0; n])
            }

            pub fn constant(n: usize, value: f64) -> Self {
                Self(vec![value; n])
            }

            pub fn from_fn(n: usize, f: impl FnMut(usize) -> f64) -> Self {
                Self((0..n).map(f).collect())
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }

            pub fn max_abs(&self) -> f64 {
                self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
            }

            /// `self += a * other`
            pub fn axpy(&mut self, a: f64, other: &Self) {
                for (x, y) in self.0.iter_mut().zip(&other.0) {
                    *x += a * y;
                }
            }

            pub fn scaled(&self, a: f64) -> Self {
                Self(self.0.iter().map(|v| a * v).collect())
            }
        }

        impl Deref for $name {
            type Target = Vec<f64>;
            fn deref(&self) -> &Vec<f64> {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut Vec<f64> {
                &mut self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }
    };
}

scalar_field!(
    /// Piecewise-constant function on the primal triangles.
    CellField
);
scalar_field!(
    /// Oriented coefficient per primal edge (e.g. normal velocity `V_ij`).
    EdgeField
);
scalar_field!(
    /// Value per dual cell, located at the primal vertex.
    DualField
);

/// Tangent 3-vector per cell, located at the circumcentre.
pub type CellVectorField = Vec<Vec3>;
/// Tangent 3-vector per dual cell, located at the primal vertex.
pub type DualVectorField = Vec<Vec3>;

/// `(F_j − F_i) / |ẽ_ij|`
pub fn grad_n(m: &Mesh, f: &CellField) -> EdgeField {
    EdgeField::from_fn(m.n_edges(), |e| {
        let [i, j] = m.edge_cells[e];
        (f[j] - f[i]) / m.dual_edge_len[e]
    })
}

/// `(G_ζ− − G_ζ+) / |e_ij|`
pub fn grad_t(m: &Mesh, g: &DualField) -> EdgeField {
    EdgeField::from_fn(m.n_edges(), |e| {
        let [zp, zm] = m.edge_duals[e];
        (g[zm] - g[zp]) / m.primal_edge_len[e]
    })
}

/// Outward flux divergence per triangle.
pub fn div(m: &Mesh, v: &EdgeField) -> CellField {
    CellField::from_fn(m.n_cells(), |c| {
        let mut s = 0.0;
        for k in 0..3 {
            let e = m.cell_edges[c][k];
            s += m.cell_edge_sign[c][k] * m.primal_edge_len[e] * v[e];
        }
        s / m.cell_area[c]
    })
}

/// Counter-clockwise circulation per dual cell divided by its area.
pub fn curl(m: &Mesh, v: &EdgeField) -> DualField {
    DualField::from_fn(m.n_duals(), |z| {
        let mut s = 0.0;
        for (&e, &sg) in m.dual_edges[z].iter().zip(&m.dual_edge_sign[z]) {
            s += sg * m.dual_edge_len[e] * v[e];
        }
        s / m.dual_area[z]
    })
}

/// Cell velocity `u_i = Ω_i⁻¹ Σ_k |e_ik| (x_e − x_T) V_ik`, projected onto
/// the tangent plane at the circumcentre.
pub fn reconstruct_velocity(m: &Mesh, v: &EdgeField) -> CellVectorField {
    (0..m.n_cells())
        .map(|c| {
            let xc = m.cell_center[c];
            let mut u = Vec3::zeros();
            for k in 0..3 {
                let e = m.cell_edges[c][k];
                let flux = m.cell_edge_sign[c][k] * m.primal_edge_len[e] * v[e];
                u += (m.edge_midpoint[e] - xc) * flux;
            }
            tangent_part(&(u / m.cell_area[c]), &m.radial(&xc))
        })
        .collect()
}

/// Area-weighted average `h_ζ = Σ |T_i ∩ ζ|/|ζ| h_i`.
///
/// Evaluated as an anchored sum `h_a + Σ w (h_i − h_a)` so that constant
/// inputs are reproduced exactly.
pub fn dual_average_cell_scalar(m: &Mesh, h: &CellField) -> DualField {
    DualField::from_fn(m.n_duals(), |z| {
        let cells = &m.dual_cells[z];
        let anchor = h[cells[0]];
        let mut s = 0.0;
        for (&c, &w) in cells.iter().zip(&m.dual_overlap[z]) {
            s += w * (h[c] - anchor);
        }
        anchor + s / m.dual_area[z]
    })
}

/// Area-weighted average of cell vectors at each dual cell, projected onto
/// the tangent plane at the primal vertex.
pub fn dual_average_vector(m: &Mesh, u: &[Vec3]) -> DualVectorField {
    (0..m.n_duals())
        .map(|z| {
            let mut s = Vec3::zeros();
            for (&c, &w) in m.dual_cells[z].iter().zip(&m.dual_overlap[z]) {
                s += u[c] * w;
            }
            tangent_part(&(s / m.dual_area[z]), &m.radial(&m.vertices[z]))
        })
        .collect()
}

/// Symmetric edge mean `h̄_ij = (h_i + h_j)/2`.
pub fn edge_mean_depth(m: &Mesh, h: &CellField) -> EdgeField {
    EdgeField::from_fn(m.n_edges(), |e| {
        let [i, j] = m.edge_cells[e];
        0.5 * (h[i] + h[j])
    })
}

/// Cartesian partial derivatives at edge midpoints assembled from the normal
/// and tangential differences: `∂_m F = (Grad_n F) n^m + (Grad_t F) t^m`.
pub fn edge_partial_derivatives(m: &Mesh, gn: &EdgeField, gt: &EdgeField) -> [EdgeField; 3] {
    let g = edge_gradient_vectors(m, gn, gt);
    [0, 1, 2].map(|k| EdgeField::from_fn(m.n_edges(), |e| g[e][k]))
}

/// Same as [`edge_partial_derivatives`] but as one 3-vector per edge.
pub fn edge_gradient_vectors(m: &Mesh, gn: &EdgeField, gt: &EdgeField) -> Vec<Vec3> {
    (0..m.n_edges())
        .map(|e| m.edge_normal[e] * gn[e] + m.edge_tangent[e] * gt[e])
        .collect()
}

/// Circumcentre values interpolated to the dual centres with
/// [`Mesh::dual_interp`], anchored like [`dual_average_cell_scalar`].
///
/// Unlike the area average this is exact for linear functions, which keeps
/// tangential differences of smooth fields consistent.
pub fn dual_interpolate_cell_scalar(m: &Mesh, f: &CellField) -> DualField {
    DualField::from_fn(m.n_duals(), |z| {
        let cells = &m.dual_cells[z];
        let anchor = f[cells[0]];
        let mut s = 0.0;
        for (&c, &w) in cells.iter().zip(&m.dual_interp[z]) {
            s += w * (f[c] - anchor);
        }
        anchor + s
    })
}

/// Tangential gradient at edges of a cell scalar: normal part from the
/// cell values, tangential part from their dual interpolants.
pub fn cell_scalar_gradient(m: &Mesh, f: &CellField) -> Vec<Vec3> {
    let gn = grad_n(m, f);
    let gt = grad_t(m, &dual_interpolate_cell_scalar(m, f));
    edge_gradient_vectors(m, &gn, &gt)
}

/// Samples the normal component of a tangent vector field at edge midpoints.
pub fn sample_normal(m: &Mesh, u: impl Fn(&Vec3) -> Vec3) -> EdgeField {
    EdgeField::from_fn(m.n_edges(), |e| u(&m.edge_midpoint[e]).dot(&m.edge_normal[e]))
}

/// `Σ |e||ẽ| a b`: the edge quadrature compatible with [`div`] and [`grad_n`].
pub fn edge_inner(m: &Mesh, a: &EdgeField, b: &EdgeField) -> f64 {
    (0..m.n_edges())
        .map(|e| m.primal_edge_len[e] * m.dual_edge_len[e] * a[e] * b[e])
        .sum()
}

pub fn cell_inner(m: &Mesh, a: &CellField, b: &CellField) -> f64 {
    (0..m.n_cells()).map(|c| m.cell_area[c] * a[c] * b[c]).sum()
}

pub fn dual_inner(m: &Mesh, a: &DualField, b: &DualField) -> f64 {
    (0..m.n_duals()).map(|z| m.dual_area[z] * a[z] * b[z]).sum()
}
