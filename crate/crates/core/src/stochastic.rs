//! Location-uncertainty transport noise: a finite basis of tangent vector
//! fields Φ_n, Brownian increments dβ_n, the variance tensor
//! `a = Σ Φ_n Φ_nᵀ`, and the stochastic increments of `V` and `h`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geom::{lat_lon, tangent_part, Vec3};
use crate::mesh::Mesh;
use crate::ops::{cell_scalar_gradient, reconstruct_velocity, CellField, EdgeField};
use crate::rsw::State;

pub const NOISE_MAGIC: &str = "SPHERONOISE v1";

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseMode {
    /// Rotational spherical-harmonic modes with uniform amplitude.
    Homogeneous,
    /// The same modes multiplied by a Gaussian latitude envelope.
    Inhomogeneous { center_lat: f64, width: f64 },
    /// Basis read from a `SPHERONOISE v1` file.
    File(std::path::PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub mode: NoiseMode,
    pub n_modes: usize,
    /// Highest spherical-harmonic degree available to the built-in modes.
    pub lmax: usize,
    /// RMS speed of each built-in mode per unit `dβ` rate [m/s].
    pub amplitude: f64,
}

impl NoiseConfig {
    pub fn homogeneous(n_modes: usize, lmax: usize, amplitude: f64) -> Self {
        NoiseConfig {
            mode: NoiseMode::Homogeneous,
            n_modes,
            lmax,
            amplitude,
        }
    }
}

/// One basis field sampled at cell circumcentres and edge midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisField {
    pub amplitude: f64,
    pub cell: Vec<Vec3>,
    /// Full tangent vector at edge midpoints: the normal component is the
    /// stored one, the tangential part comes from the two adjacent cells.
    pub edge: Vec<Vec3>,
    pub edge_normal: EdgeField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub basis: Vec<BasisField>,
    /// `a = Σ Φ Φᵀ` per cell [m²/s].
    pub variance: Vec<Matrix3<f64>>,
    pub edge_variance: Vec<Matrix3<f64>>,
    pub homogeneous: bool,
    /// `∇·a` at edges, the mean of the finite-volume cell divergences.
    div_a_edge: Vec<Vec3>,
    div_a_cell: Vec<Vec3>,
}

/// `N` draws of `Normal(0, dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianIncrement {
    pub dbeta: Vec<f64>,
}

impl BrownianIncrement {
    pub fn zeros(n: usize) -> Self {
        BrownianIncrement { dbeta: vec![0.0; n] }
    }
}

/// splitmix64 finaliser applied to the base seed and member index.
pub fn member_seed(base_seed: u64, member: u64) -> u64 {
    let mut z = base_seed ^ member.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn member_rng(base_seed: u64, member: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(member_seed(base_seed, member))
}

pub fn sample_increment(rng: &mut impl Rng, dt: f64, n: usize) -> BrownianIncrement {
    let s = dt.sqrt();
    BrownianIncrement {
        dbeta: (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                s * z
            })
            .collect(),
    }
}

/// Coefficients of the Legendre polynomial `P_l` in increasing powers.
fn legendre_coeffs(l: usize) -> Vec<f64> {
    let mut p0 = vec![1.0];
    if l == 0 {
        return p0;
    }
    let mut p1 = vec![0.0, 1.0];
    for k in 1..l {
        // (k+1) P_{k+1} = (2k+1) x P_k − k P_{k−1}
        let mut next = vec![0.0; k + 2];
        for (i, c) in p1.iter().enumerate() {
            next[i + 1] += (2 * k + 1) as f64 * c;
        }
        for (i, c) in p0.iter().enumerate() {
            next[i] -= k as f64 * c;
        }
        for c in &mut next {
            *c /= (k + 1) as f64;
        }
        p0 = p1;
        p1 = next;
    }
    p1
}

fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(i, v)| i as f64 * v).collect()
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * x + v)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Real spherical harmonic `Y_lm` written as `N (dᵐP_l/dzᵐ)(z) A_m(x, y)`
/// with `A_m = Re (x+iy)ᵐ` (cosine) or `Im (x+iy)ᵐ` (sine), orthonormal on
/// the unit sphere.
#[derive(Debug, Clone)]
struct Harmonic {
    l: usize,
    m: usize,
    sine: bool,
    norm: f64,
    dm: Vec<f64>,
    dm1: Vec<f64>,
}

impl Harmonic {
    fn new(l: usize, m: usize, sine: bool) -> Self {
        let mut d = legendre_coeffs(l);
        for _ in 0..m {
            d = derivative(&d);
        }
        let mut norm = ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI) * factorial(l - m)
            / factorial(l + m))
        .sqrt();
        if m > 0 {
            norm *= std::f64::consts::SQRT_2;
        }
        let dm1 = derivative(&d);
        Harmonic {
            l,
            m,
            sine,
            norm,
            dm: d,
            dm1,
        }
    }

    /// `(x+iy)^k` as (re, im).
    fn cpow(x: f64, y: f64, k: usize) -> (f64, f64) {
        let (mut re, mut im) = (1.0, 0.0);
        for _ in 0..k {
            (re, im) = (re * x - im * y, re * y + im * x);
        }
        (re, im)
    }

    fn azimuthal(&self, x: f64, y: f64) -> (f64, Vec3) {
        if self.m == 0 {
            return (1.0, Vec3::zeros());
        }
        let m = self.m as f64;
        let (re, im) = Self::cpow(x, y, self.m);
        let (dre, dim) = Self::cpow(x, y, self.m - 1);
        if self.sine {
            (im, Vec3::new(m * dim, m * dre, 0.0))
        } else {
            (re, Vec3::new(m * dre, -m * dim, 0.0))
        }
    }

    /// Surface gradient on the unit sphere at unit vector `p`.
    fn surface_gradient(&self, p: &Vec3) -> Vec3 {
        let (a, ga) = self.azimuthal(p.x, p.y);
        let g = Vec3::z() * (horner(&self.dm1, p.z) * a) + ga * horner(&self.dm, p.z);
        tangent_part(&(g * self.norm), p)
    }

    #[cfg(test)]
    fn value(&self, p: &Vec3) -> f64 {
        self.norm * horner(&self.dm, p.z) * self.azimuthal(p.x, p.y).0
    }
}

/// Built-in modes in the fixed order `l = 1.., m = 0..=l`, cosine before sine.
fn harmonic_sequence(lmax: usize) -> Vec<Harmonic> {
    let mut out = Vec::new();
    for l in 1..=lmax {
        out.push(Harmonic::new(l, 0, false));
        for m in 1..=l {
            out.push(Harmonic::new(l, m, false));
            out.push(Harmonic::new(l, m, true));
        }
    }
    out
}

fn validate_config(cfg: &NoiseConfig) -> Result<()> {
    if cfg.n_modes == 0 {
        return Err(Error::Config("noise.modes must be at least 1".into()));
    }
    if matches!(cfg.mode, NoiseMode::File(_)) {
        return Ok(());
    }
    let available = (cfg.lmax + 1) * (cfg.lmax + 1) - 1;
    if cfg.n_modes > available {
        return Err(Error::Config(format!(
            "noise.modes = {} exceeds the {available} rotational modes with degree <= {}",
            cfg.n_modes, cfg.lmax
        )));
    }
    if !(cfg.amplitude.is_finite() && cfg.amplitude >= 0.0) {
        return Err(Error::Config(format!(
            "noise.amplitude must be finite and >= 0, got {}",
            cfg.amplitude
        )));
    }
    if let NoiseMode::Inhomogeneous { width, .. } = cfg.mode {
        if !(width > 0.0) {
            return Err(Error::Config(format!(
                "noise.envelope_width must be > 0, got {width}"
            )));
        }
    }
    Ok(())
}

pub fn build_noise_basis(cfg: &NoiseConfig, m: &Mesh) -> Result<NoiseModel> {
    validate_config(cfg)?;
    if let NoiseMode::File(path) = &cfg.mode {
        let model = NoiseModel::read(m, path)?;
        if model.n_modes() != cfg.n_modes {
            return Err(Error::Config(format!(
                "noise.modes = {} but {} holds {} modes",
                cfg.n_modes,
                path.display(),
                model.n_modes()
            )));
        }
        return Ok(model);
    }
    let envelope = |p: &Vec3| match cfg.mode {
        NoiseMode::Inhomogeneous { center_lat, width } => {
            let (lat, _) = lat_lon(p);
            (-((lat - center_lat) / width).powi(2)).exp()
        }
        _ => 1.0,
    };
    let homogeneous = matches!(cfg.mode, NoiseMode::Homogeneous);
    let shapes = harmonic_sequence(cfg.lmax)
        .into_iter()
        .take(cfg.n_modes)
        .map(|y| {
            let amp = cfg.amplitude * (4.0 * std::f64::consts::PI / (y.l * (y.l + 1)) as f64).sqrt();
            let phi = move |p: &Vec3| {
                let r = p.normalize();
                r.cross(&y.surface_gradient(&r)) * envelope(&r)
            };
            let cell: Vec<Vec3> = m.cell_center.iter().map(&phi).collect();
            let normal = EdgeField::from_fn(m.n_edges(), |e| phi(&m.edge_midpoint[e]).dot(&m.edge_normal[e]));
            (amp, cell, normal)
        })
        .collect();
    Ok(NoiseModel::from_shapes(m, shapes, homogeneous))
}

impl NoiseModel {
    /// No modes; every stochastic increment is exactly zero.
    pub fn none(m: &Mesh) -> Self {
        NoiseModel::from_shapes(m, Vec::new(), true)
    }

    pub fn n_modes(&self) -> usize {
        self.basis.len()
    }

    /// Builds a model from unscaled shapes `(amplitude, cell vectors, edge
    /// normal components)`; each basis field is the shape times its amplitude.
    pub fn from_shapes(m: &Mesh, shapes: Vec<(f64, Vec<Vec3>, EdgeField)>, homogeneous: bool) -> Self {
        let basis: Vec<BasisField> = shapes
            .into_iter()
            .map(|(amp, cell, normal)| {
                let cell: Vec<Vec3> = cell
                    .iter()
                    .zip(&m.cell_center)
                    .map(|(v, x)| tangent_part(&(v * amp), &m.radial(x)))
                    .collect();
                let edge_normal = normal.scaled(amp);
                let edge = (0..m.n_edges())
                    .map(|e| {
                        let [i, j] = m.edge_cells[e];
                        let t = m.edge_tangent[e];
                        let mean = (cell[i] + cell[j]) * 0.5;
                        m.edge_normal[e] * edge_normal[e] + t * t.dot(&mean)
                    })
                    .collect();
                BasisField {
                    amplitude: amp,
                    cell,
                    edge,
                    edge_normal,
                }
            })
            .collect();
        let outer = |vs: &mut dyn Iterator<Item = Vec3>| vs.fold(Matrix3::zeros(), |a, v| a + v * v.transpose());
        let variance = (0..m.n_cells())
            .map(|c| outer(&mut basis.iter().map(|b| b.cell[c])))
            .collect();
        let edge_variance: Vec<Matrix3<f64>> = (0..m.n_edges())
            .map(|e| outer(&mut basis.iter().map(|b| b.edge[e])))
            .collect();
        // finite-volume divergence of each column of a, then edge means
        let div_a_cell: Vec<Vec3> = (0..m.n_cells())
            .map(|c| {
                let mut s = Vec3::zeros();
                for k in 0..3 {
                    let e = m.cell_edges[c][k];
                    let flux = edge_variance[e].transpose() * m.edge_normal[e];
                    s += flux * (m.cell_edge_sign[c][k] * m.primal_edge_len[e]);
                }
                s / m.cell_area[c]
            })
            .collect();
        let div_a_edge = (0..m.n_edges())
            .map(|e| {
                let [i, j] = m.edge_cells[e];
                (div_a_cell[i] + div_a_cell[j]) * 0.5
            })
            .collect();
        NoiseModel {
            basis,
            variance,
            edge_variance,
            homogeneous,
            div_a_edge,
            div_a_cell,
        }
    }

    /// `σ dB = Σ Φ_n dβ_n` at cells.
    pub fn cell_noise(&self, inc: &BrownianIncrement) -> Vec<Vec3> {
        let n = self.variance.len();
        (0..n)
            .map(|c| {
                self.basis
                    .iter()
                    .zip(&inc.dbeta)
                    .fold(Vec3::zeros(), |s, (b, d)| s + b.cell[c] * *d)
            })
            .collect()
    }

    /// `σ dB = Σ Φ_n dβ_n` at edge midpoints.
    pub fn edge_noise(&self, inc: &BrownianIncrement) -> Vec<Vec3> {
        let n = self.edge_variance.len();
        (0..n)
            .map(|e| {
                self.basis
                    .iter()
                    .zip(&inc.dbeta)
                    .fold(Vec3::zeros(), |s, (b, d)| s + b.edge[e] * *d)
            })
            .collect()
    }

    fn check(&self, inc: &BrownianIncrement) -> Result<()> {
        if inc.dbeta.len() != self.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_modes(),
                got: inc.dbeta.len(),
            });
        }
        Ok(())
    }

    pub fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        let mut s = String::new();
        let ne = self.edge_variance.len();
        let nc = self.variance.len();
        writeln!(s, "{NOISE_MAGIC}").unwrap();
        writeln!(s, "modes {}", self.n_modes()).unwrap();
        writeln!(s, "counts {nc} {ne}").unwrap();
        for b in &self.basis {
            // shapes are stored unscaled
            let inv = if b.amplitude == 0.0 { 0.0 } else { 1.0 / b.amplitude };
            writeln!(s, "amplitude {:.17e}", b.amplitude).unwrap();
            for v in &b.cell {
                writeln!(s, "{:.17e} {:.17e} {:.17e}", v.x * inv, v.y * inv, v.z * inv).unwrap();
            }
            for v in b.edge_normal.iter() {
                writeln!(s, "{:.17e}", v * inv).unwrap();
            }
        }
        w.write_all(s.as_bytes())
    }

    pub fn read(m: &Mesh, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(m, &text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn parse(m: &Mesh, text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| lines.next().ok_or_else(|| format!("unexpected end of file, expected {what}"));
        let (_, magic) = next("magic")?;
        if magic.trim() != NOISE_MAGIC {
            return Err(format!("line 1: expected `{NOISE_MAGIC}`"));
        }
        let keyed = |(n, l): (usize, &str), key: &str| -> std::result::Result<Vec<f64>, String> {
            let mut it = l.split_whitespace();
            if it.next() != Some(key) {
                return Err(format!("line {}: expected `{key}`", n + 1));
            }
            it.map(|t| t.parse::<f64>().map_err(|e| format!("line {}: {e}", n + 1))).collect()
        };
        let numbers = |(n, l): (usize, &str), count: usize| -> std::result::Result<Vec<f64>, String> {
            let v: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| format!("line {}: {e}", n + 1)))
                .collect::<std::result::Result<_, _>>()?;
            if v.len() != count {
                return Err(format!("line {}: expected {count} values, got {}", n + 1, v.len()));
            }
            Ok(v)
        };
        let modes = keyed(next("modes")?, "modes")?;
        let counts = keyed(next("counts")?, "counts")?;
        if modes.len() != 1 || counts.len() != 2 {
            return Err("malformed header".into());
        }
        let (nc, ne) = (counts[0] as usize, counts[1] as usize);
        if nc != m.n_cells() || ne != m.n_edges() {
            return Err(format!(
                "file is for {nc} cells/{ne} edges, mesh has {}/{}",
                m.n_cells(),
                m.n_edges()
            ));
        }
        let mut shapes = Vec::new();
        for _ in 0..modes[0] as usize {
            let amp = keyed(next("amplitude")?, "amplitude")?;
            if amp.len() != 1 {
                return Err("malformed amplitude line".into());
            }
            let mut cell = Vec::with_capacity(nc);
            for _ in 0..nc {
                let v = numbers(next("cell vector")?, 3)?;
                cell.push(Vec3::new(v[0], v[1], v[2]));
            }
            let mut normal = EdgeField::zeros(ne);
            for e in 0..ne {
                normal[e] = numbers(next("edge value")?, 1)?[0];
            }
            shapes.push((amp[0], cell, normal));
        }
        if let Some((n, _)) = lines.next() {
            return Err(format!("line {}: trailing data", n + 1));
        }
        Ok(NoiseModel::from_shapes(m, shapes, false))
    }
}

fn cell_flux_divergence(m: &Mesh, flux: &[Vec3]) -> CellField {
    CellField::from_fn(m.n_cells(), |c| {
        let mut s = 0.0;
        for k in 0..3 {
            let e = m.cell_edges[c][k];
            s += m.cell_edge_sign[c][k] * m.primal_edge_len[e] * flux[e].dot(&m.edge_normal[e]);
        }
        s / m.cell_area[c]
    })
}

/// Edge values of `−σdB·∇f + ½[(∇·a)·∇f + ∇·(a∇f)] dt` for a cell scalar `f`.
fn transport_at_edges(m: &Mesh, nm: &NoiseModel, noise: &[Vec3], f: &CellField, dt: f64) -> EdgeField {
    let g = cell_scalar_gradient(m, f);
    let ag: Vec<Vec3> = (0..m.n_edges()).map(|e| nm.edge_variance[e] * g[e]).collect();
    let d = cell_flux_divergence(m, &ag);
    EdgeField::from_fn(m.n_edges(), |e| {
        let [i, j] = m.edge_cells[e];
        let corr = nm.div_a_edge[e].dot(&g[e]) + 0.5 * (d[i] + d[j]);
        -noise[e].dot(&g[e]) + 0.5 * corr * dt
    })
}

/// Stochastic momentum increment over one step, per edge.
///
/// Each Cartesian component of the reconstructed velocity is transported as
/// a scalar; the resulting 3-vector is projected onto the edge normal.
pub fn sto_v(m: &Mesh, s: &State, nm: &NoiseModel, inc: &BrownianIncrement, dt: f64) -> Result<EdgeField> {
    nm.check(inc)?;
    let mut out = EdgeField::zeros(m.n_edges());
    if nm.n_modes() == 0 {
        return Ok(out);
    }
    let u = reconstruct_velocity(m, &s.v);
    let noise = nm.edge_noise(inc);
    for k in 0..3 {
        let comp = CellField::from_fn(m.n_cells(), |c| u[c][k]);
        let inc_k = transport_at_edges(m, nm, &noise, &comp, dt);
        for e in 0..m.n_edges() {
            out[e] += inc_k[e] * m.edge_normal[e][k];
        }
    }
    Ok(out)
}

/// Stochastic depth increment over one step, per cell.
pub fn sto_h(m: &Mesh, s: &State, nm: &NoiseModel, inc: &BrownianIncrement, dt: f64) -> Result<CellField> {
    nm.check(inc)?;
    if nm.n_modes() == 0 {
        return Ok(CellField::zeros(m.n_cells()));
    }
    let noise = nm.edge_noise(inc);
    let g = cell_scalar_gradient(m, &s.h);
    let ag: Vec<Vec3> = (0..m.n_edges()).map(|e| nm.edge_variance[e] * g[e]).collect();
    let d = cell_flux_divergence(m, &ag);
    Ok(CellField::from_fn(m.n_cells(), |c| {
        let mut num = 0.0;
        let mut den = 0.0;
        for &e in &m.cell_edges[c] {
            let w = m.primal_edge_len[e] * m.dual_edge_len[e];
            num += w * (-noise[e].dot(&g[e]) + 0.5 * dt * nm.div_a_edge[e].dot(&g[e]));
            den += w;
        }
        num / den + 0.5 * dt * d[c]
    }))
}
