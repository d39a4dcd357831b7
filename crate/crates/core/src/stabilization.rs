//! Scale-selective stabilisation of the momentum equation: Casimir
//! (potential-enstrophy) dissipation, which leaves the total energy
//! untouched, and biharmonic diffusion.

use log::warn;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::Mesh;
use crate::ops::{
    curl, div, dual_average_vector, edge_mean_depth, grad_n, grad_t, reconstruct_velocity,
    DualField, EdgeField,
};
use crate::rsw::{cell_edge_product, mass_flux, potential_vorticity, vorticity_flux, PhysParams, State};

/// Coefficients of the two stabilisers: `θ` [m⁵ s] for Casimir dissipation,
/// `ν` [m⁴/s] for biharmonic diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StabilizationParams {
    pub theta: f64,
    pub nu: f64,
}

impl StabilizationParams {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            errs.push(format!("stabilization.theta: must be finite and >= 0, got {}", self.theta));
        }
        if !(self.nu.is_finite() && self.nu >= 0.0) {
            errs.push(format!("stabilization.nu: must be finite and >= 0, got {}", self.nu));
        }
        if !errs.is_empty() {
            return Err(Error::Validation(errs));
        }
        if self.theta > 0.0 && self.nu > 0.0 {
            warn!("both Casimir (theta) and biharmonic (nu) stabilisation are active");
        }
        Ok(())
    }
}

/// Edge representative `W^C = 2 (Grad_t q) / h̄` of the Casimir derivative;
/// it enters every downstream operator exactly like `V`.
pub fn casimir_derivative_field(m: &Mesh, s: &State, p: &PhysParams) -> Result<EdgeField> {
    let q = potential_vorticity(m, s, p)?;
    let gt = grad_t(m, &q);
    let hb = edge_mean_depth(m, &s.h);
    Ok(EdgeField::from_fn(m.n_edges(), |e| 2.0 * gt[e] / hb[e]))
}

/// Discrete bracket of the Casimir derivative with the velocity:
///
/// `W̃ = W^C (Div V)‾ − V (Div W^C)‾ − Grad_t((w_ζ × u_ζ)·k_ζ)`
///
/// where `(·)‾` is the mean over the two cells of the edge and `w_ζ`, `u_ζ`
/// are dual-averaged reconstructions of `W^C` and `V`. The result is taken to
/// the antisymmetric-matrix representation by the edge factor
/// `|e| / (Ω_i + Ω_j)`, which is `|e| / (2Ω)` on a uniform mesh.
pub fn w_tilde(m: &Mesh, s: &State, p: &PhysParams) -> Result<EdgeField> {
    let wc = casimir_derivative_field(m, s, p)?;
    let mut wt = w_tilde_from(m, &s.v, &wc);
    for e in 0..m.n_edges() {
        let [i, j] = m.edge_cells[e];
        wt[e] *= m.primal_edge_len[e] / (m.cell_area[i] + m.cell_area[j]);
    }
    Ok(wt)
}

pub(crate) fn w_tilde_from(m: &Mesh, v: &EdgeField, wc: &EdgeField) -> EdgeField {
    let div_v = div(m, v);
    let div_w = div(m, wc);
    let wz = dual_average_vector(m, &reconstruct_velocity(m, wc));
    let uz = dual_average_vector(m, &reconstruct_velocity(m, v));
    let cross = DualField::from_fn(m.n_duals(), |z| {
        let k: Vec3 = m.radial(&m.vertices[z]);
        wz[z].cross(&uz[z]).dot(&k)
    });
    let gt = grad_t(m, &cross);
    EdgeField::from_fn(m.n_edges(), |e| {
        let [i, j] = m.edge_cells[e];
        wc[e] * 0.5 * (div_v[i] + div_v[j]) - v[e] * 0.5 * (div_w[i] + div_w[j]) - gt[e]
    })
}

/// Groups of the Casimir dissipation tendency for a given `W̃`.
pub(crate) struct CdGroups {
    pub vorticity: EdgeField,
    pub stretching: EdgeField,
    pub gradient: EdgeField,
}

pub(crate) fn cd_groups(m: &Mesh, s: &State, wt: &EdgeField) -> CdGroups {
    let circ = curl(m, wt);
    let vorticity = vorticity_flux(m, &s.v, &s.h, &circ);
    let hb = edge_mean_depth(m, &s.h);
    let dflux = div(m, &mass_flux(m, s));
    let stretching = EdgeField::from_fn(m.n_edges(), |e| {
        let [i, j] = m.edge_cells[e];
        wt[e] / hb[e] * 0.5 * (dflux[i] + dflux[j])
    });
    // ½ Grad_n(Σ |ẽ||e| V W̃ / Ω) = Grad_n of the cell product with 1/(2Ω)
    let gradient = grad_n(m, &cell_edge_product(m, &s.v, wt));
    CdGroups {
        vorticity,
        stretching,
        gradient,
    }
}

/// Casimir dissipation tendency `diff^CD`, entering the momentum equation as
/// `∂_t V = … − θ diff^CD`.
///
/// `diff^CD = −vort(Curl W̃) + (W̃/h̄) (Div(h̄V))‾ + ½ Grad_n(Σ_k |ẽ||e| V W̃ / Ω)`
///
/// The stretching and gradient groups carry equal weight so that their
/// energy pairings cancel, and the vorticity groups do no work; the overall
/// sign makes `−θ diff^CD` lower the potential enstrophy.
pub fn cd_tendency(m: &Mesh, s: &State, p: &PhysParams) -> Result<EdgeField> {
    let wt = w_tilde(m, s, p)?;
    let g = cd_groups(m, s, &wt);
    Ok(EdgeField::from_fn(m.n_edges(), |e| {
        -g.vorticity[e] + g.stretching[e] + g.gradient[e]
    }))
}

/// `Lap(V) = Grad_n(Div V) − Grad_t(Curl V)`
pub fn vector_laplacian(m: &Mesh, v: &EdgeField) -> EdgeField {
    let a = grad_n(m, &div(m, v));
    let b = grad_t(m, &curl(m, v));
    EdgeField::from_fn(m.n_edges(), |e| a[e] - b[e])
}

/// Biharmonic diffusion `diff^BD = Lap(Lap(V))`, entering as `− ν diff^BD`.
pub fn bd_tendency(m: &Mesh, v: &EdgeField) -> EdgeField {
    vector_laplacian(m, &vector_laplacian(m, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{energy_gradient, enstrophy_gradient};
    use crate::ops::sample_normal;
    use crate::testing::{admissible_state, rng, Pairing, EARTH_RADIUS, EARTH_ROTATION, GRAVITY};

    fn params(m: &Mesh) -> PhysParams {
        PhysParams::new(m, GRAVITY, EARTH_ROTATION)
    }

    fn energy_pairing(m: &Mesh, s: &State, p: &PhysParams, d: &EdgeField) -> Pairing {
        let (dv, _) = energy_gradient(m, s, p);
        Pairing::of(&dv, d)
    }

    #[test]
    fn casimir_derivative_vanishes_for_uniform_pv() {
        let m = Mesh::icosahedral(2, EARTH_RADIUS).unwrap();
        let s = State::rest(&m, 1e4);
        let p = PhysParams::with_constant_coriolis(&m, GRAVITY, 1e-4);
        assert_eq!(casimir_derivative_field(&m, &s, &p).unwrap().max_abs(), 0.0);
        assert_eq!(cd_tendency(&m, &s, &p).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn casimir_derivative_matches_hand_value() {
        let m = Mesh::icosahedral(1, 1.0).unwrap();
        let s = State::rest(&m, 1.0);
        let mut p = PhysParams::with_constant_coriolis(&m, 1.0, 0.0);
        let e = 0;
        let [zp, zm] = m.edge_duals[e];
        p.coriolis[zm] = 4.0;
        let wc = casimir_derivative_field(&m, &s, &p).unwrap();
        // q jumps by 4 over the edge; W = 2 * 4 / |e| / h
        let want = 2.0 * 4.0 / m.primal_edge_len[e];
        assert!((wc[e] - want).abs() < 1e-12 * want);
        p.coriolis[zm] = 0.0;
        p.coriolis[zp] = 4.0;
        let wc = casimir_derivative_field(&m, &s, &p).unwrap();
        assert!((wc[e] + want).abs() < 1e-12 * want);
    }

    #[test]
    fn w_tilde_vanishes_when_either_argument_does() {
        let m = Mesh::icosahedral(2, 1.0).unwrap();
        let mut r = rng(3);
        let s = admissible_state(&m, &mut r);
        let zero = EdgeField::zeros(m.n_edges());
        assert_eq!(w_tilde_from(&m, &s.v, &zero).max_abs(), 0.0);
        assert_eq!(w_tilde_from(&m, &zero, &s.v).max_abs(), 0.0);
        // antisymmetric in its arguments
        let a = w_tilde_from(&m, &s.v, &s.v);
        assert!(a.max_abs() < 1e-12 * s.v.max_abs().powi(2));
    }

    #[test]
    fn w_tilde_matches_naive_loops() {
        let m = Mesh::icosahedral(2, 1.0).unwrap();
        let mut r = rng(5);
        let v = admissible_state(&m, &mut r).v;
        let w = admissible_state(&m, &mut r).v;
        let got = w_tilde_from(&m, &v, &w);

        let cell_div = |f: &EdgeField, c: usize| -> f64 {
            (0..3)
                .map(|k| {
                    let e = m.cell_edges[c][k];
                    m.cell_edge_sign[c][k] * m.primal_edge_len[e] * f[e]
                })
                .sum::<f64>()
                / m.cell_area[c]
        };
        let recon = |f: &EdgeField, c: usize| -> Vec3 {
            let x = m.cell_center[c];
            let mut u = Vec3::zeros();
            for k in 0..3 {
                let e = m.cell_edges[c][k];
                let s = m.cell_edge_sign[c][k];
                u += s * m.primal_edge_len[e] * f[e] * (m.edge_midpoint[e] - x);
            }
            let u = u / m.cell_area[c];
            let k = x.normalize();
            u - k * k.dot(&u)
        };
        let dual_vec = |f: &EdgeField, z: usize| -> Vec3 {
            let mut acc = Vec3::zeros();
            let mut area = 0.0;
            for (&c, &o) in m.dual_cells[z].iter().zip(&m.dual_overlap[z]) {
                acc += o * recon(f, c);
                area += o;
            }
            acc / area
        };
        for e in 0..m.n_edges() {
            let [i, j] = m.edge_cells[e];
            let [zp, zm] = m.edge_duals[e];
            let g = |z: usize| {
                let k = m.vertices[z].normalize();
                dual_vec(&w, z).cross(&dual_vec(&v, z)).dot(&k)
            };
            let want = w[e] * 0.5 * (cell_div(&v, i) + cell_div(&v, j))
                - v[e] * 0.5 * (cell_div(&w, i) + cell_div(&w, j))
                - (g(zm) - g(zp)) / m.primal_edge_len[e];
            assert!((got[e] - want).abs() < 1e-9 * (1.0 + want.abs()), "edge {e}: {} vs {want}", got[e]);
        }
    }

    #[test]
    fn cd_conserves_energy_and_dissipates_enstrophy() {
        let m = Mesh::icosahedral(3, EARTH_RADIUS).unwrap();
        let p = params(&m);
        let mut r = rng(11);
        for _ in 0..20 {
            let s = admissible_state(&m, &mut r);
            let d = cd_tendency(&m, &s, &p).unwrap();
            let rel = energy_pairing(&m, &s, &p, &d).relative();
            assert!(rel < 1e-9, "energy pairing {rel:e}");
            let (cv, _) = enstrophy_gradient(&m, &s, &p).unwrap();
            // dC/dt = -θ <dC/dV, diff>
            let dc = -Pairing::of(&cv, &d).sum;
            assert!(dc <= 0.0, "enstrophy rate {dc:e}");
        }
    }

    #[test]
    fn cd_gradient_group_does_no_enstrophy_work() {
        let m = Mesh::icosahedral(2, EARTH_RADIUS).unwrap();
        let p = params(&m);
        let s = admissible_state(&m, &mut rng(2));
        let wt = w_tilde(&m, &s, &p).unwrap();
        let g = cd_groups(&m, &s, &wt);
        let (cv, _) = enstrophy_gradient(&m, &s, &p).unwrap();
        assert!(Pairing::of(&cv, &g.gradient).relative() < 1e-9);
    }

    #[test]
    fn laplacian_of_gradient_is_gradient_of_laplacian() {
        let m = Mesh::icosahedral(3, 1.0).unwrap();
        let f = crate::ops::CellField::from_fn(m.n_cells(), |c| {
            let x = m.cell_center[c];
            x.x * x.y + x.z.powi(3)
        });
        let lhs = vector_laplacian(&m, &grad_n(&m, &f));
        let rhs = grad_n(&m, &div(&m, &grad_n(&m, &f)));
        for e in 0..m.n_edges() {
            assert!((lhs[e] - rhs[e]).abs() < 1e-10 * (1.0 + rhs[e].abs()));
        }
    }

    #[test]
    fn rigid_rotation_laplacian_converges() {
        // solid-body rotation on the unit sphere: Lap u = -2u
        let mut errs = Vec::new();
        for level in [3, 4, 5] {
            let m = Mesh::icosahedral(level, 1.0).unwrap();
            let axis = Vec3::new(0.3, -0.2, 0.9).normalize();
            let v = sample_normal(&m, |x| axis.cross(x));
            let l = vector_laplacian(&m, &v);
            let mut num = 0.0;
            let mut den = 0.0;
            for e in 0..m.n_edges() {
                let want = -2.0 * v[e];
                num += (l[e] - want).powi(2) * m.primal_edge_len[e] * m.dual_edge_len[e];
                den += want.powi(2) * m.primal_edge_len[e] * m.dual_edge_len[e];
            }
            errs.push((num / den).sqrt());
        }
        assert!(errs[2] < errs[0], "{errs:?}");
        assert!(errs[2] < 0.05, "{errs:?}");
    }

    #[test]
    fn biharmonic_diffusion_dissipates_kinetic_energy() {
        let m = Mesh::icosahedral(3, EARTH_RADIUS).unwrap();
        let p = params(&m);
        let mut r = rng(17);
        for _ in 0..10 {
            let s = State {
                h: crate::ops::CellField::constant(m.n_cells(), 1e4),
                ..admissible_state(&m, &mut r)
            };
            let d = bd_tendency(&m, &s.v);
            assert!(-energy_pairing(&m, &s, &p, &d).sum <= 0.0);
        }
    }

    #[test]
    fn biharmonic_is_linear() {
        let m = Mesh::icosahedral(2, 1.0).unwrap();
        let mut r = rng(23);
        let a = admissible_state(&m, &mut r).v;
        let b = admissible_state(&m, &mut r).v;
        let mut ab = a.clone();
        ab.axpy(-2.5, &b);
        let lhs = bd_tendency(&m, &ab);
        let (la, lb) = (bd_tendency(&m, &a), bd_tendency(&m, &b));
        let scale = la.max_abs() + lb.max_abs();
        for e in 0..m.n_edges() {
            assert!((lhs[e] - (la[e] - 2.5 * lb[e])).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn validate_rejects_negative_coefficients() {
        assert!(StabilizationParams::none().validate().is_ok());
        let bad = StabilizationParams { theta: -1.0, nu: f64::NAN };
        match bad.validate() {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
    }
}
