use std::sync::OnceLock;

use proptest::collection::vec;
use proptest::prelude::*;

use rswlu::diagnostics::{energy_gradient, enstrophy_gradient, total_energy};
use rswlu::ops::{curl, div, grad_n, grad_t, CellField, DualField, EdgeField};
use rswlu::rsw::{continuity_tendency, det_tendency, PhysParams, State};
use rswlu::stabilization::{bd_tendency, cd_tendency};
use rswlu::stochastic::{build_noise_basis, member_rng, sample_increment, sto_h, sto_v, NoiseConfig, NoiseModel};
use rswlu::testing::{EARTH_RADIUS, EARTH_ROTATION, GRAVITY};
use rswlu::Mesh;

fn mesh() -> &'static Mesh {
    static M: OnceLock<Mesh> = OnceLock::new();
    M.get_or_init(|| Mesh::icosahedral(2, EARTH_RADIUS).unwrap())
}

fn phys() -> &'static PhysParams {
    static P: OnceLock<PhysParams> = OnceLock::new();
    P.get_or_init(|| PhysParams::new(mesh(), GRAVITY, EARTH_ROTATION))
}

fn edge_field() -> impl Strategy<Value = EdgeField> {
    vec(-20.0..20.0f64, mesh().n_edges()).prop_map(EdgeField)
}

fn cell_field() -> impl Strategy<Value = CellField> {
    vec(-1.0..1.0f64, mesh().n_cells()).prop_map(CellField)
}

fn dual_field() -> impl Strategy<Value = DualField> {
    vec(-1.0..1.0f64, mesh().n_duals()).prop_map(DualField)
}

fn state() -> impl Strategy<Value = State> {
    (edge_field(), vec(9e3..11e3f64, mesh().n_cells())).prop_map(|(v, h)| State { v, h: CellField(h) })
}

fn pairing(a: &[f64], b: &[f64]) -> (f64, f64) {
    a.iter().zip(b).fold((0.0, 0.0), |(s, m), (x, y)| (s + x * y, m + (x * y).abs()))
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn euler_relation_holds(level in 0u32..=5) {
        let m = Mesh::icosahedral(level, 1.0).unwrap();
        prop_assert_eq!(m.n_cells() as i64 - m.n_edges() as i64 + m.n_duals() as i64, 2);
    }

    #[test]
    fn mesh_build_is_deterministic(level in 0u32..=3) {
        let a = Mesh::icosahedral(level, EARTH_RADIUS).unwrap();
        let b = Mesh::icosahedral(level, EARTH_RADIUS).unwrap();
        prop_assert_eq!(&a.vertices, &b.vertices);
        prop_assert_eq!(&a.cell_area, &b.cell_area);
        prop_assert_eq!(&a.dual_edge_len, &b.dual_edge_len);
    }

    #[test]
    fn curl_grad_and_div_grad_t_vanish(f in cell_field(), g in dual_field()) {
        let m = mesh();
        let gn = grad_n(m, &f);
        let gt = grad_t(m, &g);
        let scale_c = max_abs(&gn) * m.dual_edge_len.iter().cloned().fold(0.0, f64::max)
            / m.dual_area.iter().cloned().fold(f64::INFINITY, f64::min);
        let scale_d = max_abs(&gt) * m.primal_edge_len.iter().cloned().fold(0.0, f64::max)
            / m.cell_area.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(max_abs(&curl(m, &gn)) < 1e-12 * scale_c);
        prop_assert!(max_abs(&div(m, &gt)) < 1e-12 * scale_d);
    }

    #[test]
    fn divergence_and_curl_integrate_to_zero(v in edge_field()) {
        let m = mesh();
        let d = div(m, &v);
        let c = curl(m, &v);
        let (sd, md) = pairing(&d, &m.cell_area);
        let (sc, mc) = pairing(&c, &m.dual_area);
        prop_assert!(sd.abs() <= 1e-12 * md);
        prop_assert!(sc.abs() <= 1e-12 * mc);
    }

    #[test]
    fn grad_n_is_minus_adjoint_of_div(f in cell_field(), v in edge_field()) {
        let m = mesh();
        let gn = grad_n(m, &f);
        let w: Vec<f64> = (0..m.n_edges()).map(|e| m.primal_edge_len[e] * m.dual_edge_len[e] * v[e]).collect();
        let (lhs, ml) = pairing(&gn, &w);
        let dv = div(m, &v);
        let fw: Vec<f64> = (0..m.n_cells()).map(|c| f[c] * m.cell_area[c]).collect();
        let (rhs, mr) = pairing(&fw, &dv);
        prop_assert!((lhs + rhs).abs() <= 1e-12 * (ml + mr));
    }

    #[test]
    fn operators_are_linear(a in edge_field(), b in edge_field(), x in -3.0..3.0f64, y in -3.0..3.0f64) {
        let m = mesh();
        let ab = EdgeField::from_fn(m.n_edges(), |e| x * a[e] + y * b[e]);
        let (da, db, dab) = (div(m, &a), div(m, &b), div(m, &ab));
        let (ca, cb, cab) = (curl(m, &a), curl(m, &b), curl(m, &ab));
        let tol = 1e-12 * (max_abs(&da) + max_abs(&db) + max_abs(&ca) + max_abs(&cb)) * 6.0;
        for c in 0..m.n_cells() {
            prop_assert!((dab[c] - x * da[c] - y * db[c]).abs() <= tol);
        }
        for z in 0..m.n_duals() {
            prop_assert!((cab[z] - x * ca[z] - y * cb[z]).abs() <= tol);
        }
    }

    #[test]
    fn continuity_conserves_mass(s in state()) {
        let m = mesh();
        let dh = continuity_tendency(m, &s);
        let (sum, mag) = pairing(&dh, &m.cell_area);
        prop_assert!(sum.abs() <= 1e-12 * mag);
    }

    #[test]
    fn deterministic_core_conserves_energy(s in state()) {
        let (m, p) = (mesh(), phys());
        let (ev, eh) = energy_gradient(m, &s, p);
        let (a, am) = pairing(&ev, &det_tendency(m, &s, p).unwrap());
        let (b, bm) = pairing(&eh, &continuity_tendency(m, &s));
        prop_assert!((a + b).abs() < 1e-10 * (am + bm));
    }

    #[test]
    fn energy_is_even_in_velocity(s in state()) {
        let (m, p) = (mesh(), phys());
        let mut flipped = s.clone();
        flipped.v.iter_mut().for_each(|x| *x = -*x);
        prop_assert_eq!(total_energy(m, &s, p), total_energy(m, &flipped, p));
        prop_assert!(total_energy(m, &s, p) > 0.0);
    }

    #[test]
    fn casimir_dissipation_is_energy_neutral_and_enstrophy_decreasing(s in state()) {
        let (m, p) = (mesh(), phys());
        let d = cd_tendency(m, &s, p).unwrap();
        let (ev, _) = energy_gradient(m, &s, p);
        let (e, em) = pairing(&ev, &d);
        prop_assert!(e.abs() < 1e-9 * em);
        let (cv, _) = enstrophy_gradient(m, &s, p).unwrap();
        let (dc, _) = pairing(&cv, &d);
        // dC/dt = −θ ⟨∂C/∂V, diff^CD⟩
        prop_assert!(-dc <= 1e-12);
    }

    #[test]
    fn biharmonic_diffusion_dissipates_energy(s in state()) {
        let (m, p) = (mesh(), phys());
        let (ev, _) = energy_gradient(m, &s, p);
        let (e, _) = pairing(&ev, &bd_tendency(m, &s.v));
        prop_assert!(-e <= 0.0);
    }

    #[test]
    fn increments_are_determined_by_seed_and_member(seed in any::<u64>(), member in 0u64..64, steps in 1usize..20) {
        let draw = || {
            let mut r = member_rng(seed, member);
            (0..steps).map(|_| sample_increment(&mut r, 60.0, 4)).collect::<Vec<_>>()
        };
        prop_assert_eq!(draw(), draw());
    }

    #[test]
    fn zero_amplitude_noise_vanishes(s in state(), seed in any::<u64>()) {
        let m = mesh();
        let nm = build_noise_basis(&NoiseConfig::homogeneous(8, 2, 0.0), m).unwrap();
        let inc = sample_increment(&mut member_rng(seed, 0), 60.0, nm.n_modes());
        prop_assert_eq!(max_abs(&sto_v(m, &s, &nm, &inc, 60.0).unwrap()), 0.0);
        prop_assert_eq!(max_abs(&sto_h(m, &s, &nm, &inc, 60.0).unwrap()), 0.0);
        let none = NoiseModel::none(m);
        let inc = sample_increment(&mut member_rng(seed, 0), 60.0, 0);
        prop_assert_eq!(max_abs(&sto_v(m, &s, &none, &inc, 60.0).unwrap()), 0.0);
    }
}
