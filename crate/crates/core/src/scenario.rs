//! Galewsky barotropically unstable jet and the experiment presets.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geom::{east, lat_lon};
use crate::mesh::Mesh;
use crate::ops::{sample_normal, CellField};
use crate::rsw::{PhysParams, State};
use crate::stabilization::StabilizationParams;

pub const BALANCE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GalewskyParams {
    pub u_max: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub mean_depth: f64,
    pub h_hat: f64,
    pub alpha: f64,
    pub beta: f64,
    pub phi2: f64,
    pub perturbation_enabled: bool,
}

impl Default for GalewskyParams {
    fn default() -> Self {
        GalewskyParams {
            u_max: 80.0,
            phi0: PI / 7.0,
            phi1: PI / 2.0 - PI / 7.0,
            mean_depth: 1e4,
            h_hat: 120.0,
            alpha: 1.0 / 3.0,
            beta: 1.0 / 15.0,
            phi2: PI / 4.0,
            perturbation_enabled: true,
        }
    }
}

impl GalewskyParams {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.phi0 < self.phi1) {
            errs.push(format!("galewsky.phi0: must be below galewsky.phi1, got {} >= {}", self.phi0, self.phi1));
        }
        if !(self.u_max >= 0.0 && self.u_max.is_finite()) {
            errs.push(format!("galewsky.u_max: must be finite and >= 0, got {}", self.u_max));
        }
        if !(self.mean_depth > 0.0 && self.mean_depth.is_finite()) {
            errs.push(format!("galewsky.mean_depth: must be positive, got {}", self.mean_depth));
        }
        if !(self.alpha > 0.0) {
            errs.push(format!("galewsky.alpha: must be positive, got {}", self.alpha));
        }
        if !(self.beta > 0.0) {
            errs.push(format!("galewsky.beta: must be positive, got {}", self.beta));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// Zonal wind `u(φ)`: a smooth bump between `φ0` and `φ1`, zero outside.
    pub fn zonal_wind(&self, phi: f64) -> f64 {
        if phi <= self.phi0 || phi >= self.phi1 || self.u_max == 0.0 {
            return 0.0;
        }
        let en = (-4.0 / (self.phi1 - self.phi0).powi(2)).exp();
        self.u_max / en * (1.0 / ((phi - self.phi0) * (phi - self.phi1))).exp()
    }

    /// `ĥ cos φ exp(−(λ/α)²) exp(−((φ₂−φ)/β)²)` with `λ ∈ (−π, π]`.
    pub fn perturbation(&self, lat: f64, lon: f64) -> f64 {
        self.h_hat * lat.cos() * (-(lon / self.alpha).powi(2)).exp() * (-((self.phi2 - lat) / self.beta).powi(2)).exp()
    }
}

/// Geopotential deficit `∫_{φ0}^{φ} a u (f + tan φ' u / a) dφ'` for each
/// requested latitude, accumulated over the sorted unique latitudes.
fn balance_integrals(gp: &GalewskyParams, radius: f64, rotation: f64, lats: &[f64]) -> Result<Vec<f64>> {
    let integrand = |phi: f64| {
        let u = gp.zonal_wind(phi);
        radius * u * (2.0 * rotation * phi.sin() + phi.tan() * u / radius)
    };
    let mut sorted: Vec<f64> = lats.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let scale = radius * gp.u_max.max(1e-300) * (2.0 * rotation + gp.u_max / radius);
    let mut cumulative = Vec::with_capacity(sorted.len());
    let mut acc = 0.0;
    let mut prev = gp.phi0;
    for &phi in &sorted {
        let b = phi.clamp(gp.phi0, gp.phi1);
        if b > prev {
            let target = BALANCE_TOLERANCE * scale * (b - prev);
            let out = quadrature::integrate(integrand, prev, b, target);
            if !(out.error_estimate <= target) || !out.integral.is_finite() {
                return Err(Error::QuadratureFailure(format!(
                    "interval [{prev}, {b}]: error estimate {:e} above {target:e}",
                    out.error_estimate
                )));
            }
            acc += out.integral;
            prev = b;
        }
        cumulative.push(acc);
    }
    Ok(lats
        .iter()
        .map(|phi| {
            let k = sorted.binary_search_by(|x| x.total_cmp(phi)).expect("latitude present");
            cumulative[k]
        })
        .collect())
}

/// Balanced jet, optionally with the localized height bump.
pub fn galewsky_init(m: &Mesh, p: &PhysParams, gp: &GalewskyParams) -> Result<State> {
    gp.validate()?;
    let v = sample_normal(m, |x| east(x) * gp.zonal_wind(lat_lon(x).0));
    let lats: Vec<f64> = m.cell_center.iter().map(|x| lat_lon(x).0).collect();
    let deficit = balance_integrals(gp, m.radius, p.planet_rotation, &lats)?;
    let raw = CellField::from_fn(m.n_cells(), |c| -deficit[c] / p.g);
    let area: f64 = m.cell_area.iter().sum();
    let mean_raw = (0..m.n_cells()).map(|c| raw[c] * m.cell_area[c]).sum::<f64>() / area;
    let shift = gp.mean_depth - mean_raw;
    let mut h = CellField::from_fn(m.n_cells(), |c| raw[c] + shift);
    if gp.perturbation_enabled {
        for c in 0..m.n_cells() {
            let (lat, lon) = lat_lon(&m.cell_center[c]);
            h[c] += gp.perturbation(lat, lon);
        }
    }
    Ok(State { v, h })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    NoDiff,
    Cd,
    Bd,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::NoDiff, Preset::Cd, Preset::Bd];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::NoDiff => "no_diff",
            Preset::Cd => "cd",
            Preset::Bd => "bd",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no_diff" => Ok(Preset::NoDiff),
            "cd" => Ok(Preset::Cd),
            "bd" => Ok(Preset::Bd),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub const CD_THETA: f64 = 5e21;
pub const BD_NU: f64 = 3.1e16;
pub const PRESET_LEVEL: u32 = 5;

/// Grid-spacing exponents used when moving the coefficients off the
/// preset level: `θ ∝ Δx^THETA_EXPONENT`, `ν ∝ Δx^NU_EXPONENT`. Both keep the
/// damping time of grid-scale modes fixed.
pub const THETA_EXPONENT: i32 = 5;
pub const NU_EXPONENT: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentPreset {
    pub preset: Preset,
    pub stab: StabilizationParams,
    pub level: u32,
    pub members: usize,
    pub noise: bool,
    pub days: f64,
}

pub fn experiment_preset(name: &str) -> Result<ExperimentPreset> {
    let preset: Preset = name.parse()?;
    let stab = match preset {
        Preset::NoDiff => StabilizationParams::none(),
        Preset::Cd => StabilizationParams { theta: CD_THETA, nu: 0.0 },
        Preset::Bd => StabilizationParams { theta: 0.0, nu: BD_NU },
    };
    Ok(ExperimentPreset {
        preset,
        stab,
        level: PRESET_LEVEL,
        members: 20,
        noise: true,
        days: 12.0,
    })
}

/// Coefficients for `level`, scaled from the preset level by powers of the
/// grid-spacing ratio `2^(level_preset − level)`.
pub fn rescale_to_level(stab: StabilizationParams, level: u32) -> StabilizationParams {
    let ratio = 2f64.powi(PRESET_LEVEL as i32 - level as i32);
    StabilizationParams {
        theta: stab.theta * ratio.powi(THETA_EXPONENT),
        nu: stab.nu * ratio.powi(NU_EXPONENT),
    }
}
