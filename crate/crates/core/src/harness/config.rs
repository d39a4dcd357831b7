//! Run configuration: TOML with dotted sections, versioned by `schema = 1`.
//!
//! Values are resolved in three layers: built-in defaults, then the preset
//! named by `preset` (if any), then every key present in the file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::integrator::{Scheme, DEFAULT_CFL_GUARD};
use crate::mesh::DEFAULT_MAX_LEVEL;
use crate::rsw::DEFAULT_DEPTH_THRESHOLD;
use crate::scenario::{experiment_preset, rescale_to_level, GalewskyParams, Preset};
use crate::stabilization::StabilizationParams;
use crate::stochastic::{NoiseConfig, NoiseMode};

pub const SCHEMA_VERSION: i64 = 1;

pub const DEFAULT_RADIUS: f64 = 6.371229e6;
pub const DEFAULT_GRAVITY: f64 = 9.80616;
pub const DEFAULT_ROTATION: f64 = 7.292e-5;
pub const DEFAULT_NOISE_MODES: usize = 15;
pub const DEFAULT_NOISE_LMAX: usize = 3;
pub const DEFAULT_NOISE_AMPLITUDE: f64 = 10.0;

/// A float that also accepts TOML integers (`theta = 5000`).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Real(f64);

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Real;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number")
            }
            fn visit_f64<E>(self, v: f64) -> std::result::Result<Real, E> {
                Ok(Real(v))
            }
            fn visit_i64<E>(self, v: i64) -> std::result::Result<Real, E> {
                Ok(Real(v as f64))
            }
            fn visit_u64<E>(self, v: u64) -> std::result::Result<Real, E> {
                Ok(Real(v as f64))
            }
            fn visit_i128<E>(self, v: i128) -> std::result::Result<Real, E> {
                Ok(Real(v as f64))
            }
            fn visit_u128<E>(self, v: u128) -> std::result::Result<Real, E> {
                Ok(Real(v as f64))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    schema: Option<i64>,
    preset: Option<String>,
    mesh: RawMesh,
    physics: RawPhysics,
    stabilization: RawStabilization,
    noise: RawNoise,
    integrator: RawIntegrator,
    ensemble: RawEnsemble,
    output: RawOutput,
    galewsky: RawGalewsky,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawMesh {
    level: Option<i64>,
    radius: Option<Real>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawPhysics {
    gravity: Option<Real>,
    rotation: Option<Real>,
    depth_threshold: Option<Real>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawStabilization {
    theta: Option<Real>,
    nu: Option<Real>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawNoise {
    enabled: Option<bool>,
    mode: Option<String>,
    modes: Option<i64>,
    lmax: Option<i64>,
    amplitude: Option<Real>,
    envelope_center: Option<Real>,
    envelope_width: Option<Real>,
    file: Option<PathBuf>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawIntegrator {
    dt: Option<Real>,
    scheme: Option<String>,
    days: Option<Real>,
    cfl_guard: Option<Real>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawEnsemble {
    members: Option<i64>,
    seed: Option<u64>,
    workers: Option<i64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawOutput {
    dir: Option<PathBuf>,
    diag_every_hours: Option<Real>,
    snapshot_every_days: Option<Real>,
    nlat: Option<i64>,
    nlon: Option<i64>,
    fields: Option<Vec<String>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawGalewsky {
    u_max: Option<Real>,
    phi0: Option<Real>,
    phi1: Option<Real>,
    mean_depth: Option<Real>,
    h_hat: Option<Real>,
    alpha: Option<Real>,
    beta: Option<Real>,
    phi2: Option<Real>,
    perturbation: Option<bool>,
}

/// Field written to lat-lon snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SnapshotField {
    /// Potential vorticity on dual cells.
    Pv,
    /// Relative vorticity on dual cells.
    Vorticity,
    /// Depth on cells.
    Depth,
}

impl SnapshotField {
    pub fn name(&self) -> &'static str {
        match self {
            SnapshotField::Pv => "pv",
            SnapshotField::Vorticity => "vorticity",
            SnapshotField::Depth => "h",
        }
    }
}

impl FromStr for SnapshotField {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pv" => Ok(SnapshotField::Pv),
            "vorticity" => Ok(SnapshotField::Vorticity),
            "h" => Ok(SnapshotField::Depth),
            other => Err(format!("unknown field `{other}` (expected pv, vorticity or h)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshConfig {
    pub level: u32,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsConfig {
    pub gravity: f64,
    pub rotation: f64,
    pub depth_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSettings {
    pub enabled: bool,
    pub config: NoiseConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    /// `None` derives the step from the CFL guard.
    pub dt: Option<f64>,
    pub scheme: Scheme,
    pub days: f64,
    pub cfl_guard: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub members: usize,
    pub seed: u64,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub diag_every_hours: f64,
    /// 0 disables snapshots.
    pub snapshot_every_days: f64,
    pub nlat: usize,
    pub nlon: usize,
    pub fields: Vec<SnapshotField>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub mesh: MeshConfig,
    pub physics: PhysicsConfig,
    pub stabilization: StabilizationParams,
    pub noise: NoiseSettings,
    pub integrator: IntegratorConfig,
    pub ensemble: EnsembleConfig,
    pub output: OutputConfig,
    pub galewsky: GalewskyParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            preset: None,
            mesh: MeshConfig {
                level: 4,
                radius: DEFAULT_RADIUS,
            },
            physics: PhysicsConfig {
                gravity: DEFAULT_GRAVITY,
                rotation: DEFAULT_ROTATION,
                depth_threshold: DEFAULT_DEPTH_THRESHOLD,
            },
            stabilization: StabilizationParams::none(),
            noise: NoiseSettings {
                enabled: false,
                config: NoiseConfig::homogeneous(DEFAULT_NOISE_MODES, DEFAULT_NOISE_LMAX, DEFAULT_NOISE_AMPLITUDE),
            },
            integrator: IntegratorConfig {
                dt: None,
                scheme: Scheme::DeterministicRk3,
                days: 1.0,
                cfl_guard: DEFAULT_CFL_GUARD,
            },
            ensemble: EnsembleConfig {
                members: 1,
                seed: 0,
                workers: 0,
            },
            output: OutputConfig {
                dir: PathBuf::from("out"),
                diag_every_hours: 1.0,
                snapshot_every_days: 1.0,
                nlat: 90,
                nlon: 180,
                fields: vec![SnapshotField::Pv],
            },
            galewsky: GalewskyParams::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub members: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults with a preset applied: its coefficients, ensemble size,
    /// horizon and noise switch.
    pub fn from_preset(preset: Preset) -> Self {
        let p = experiment_preset(preset.name()).expect("built-in preset");
        let mut cfg = RunConfig::default();
        cfg.preset = Some(preset);
        cfg.mesh.level = p.level;
        cfg.stabilization = p.stab;
        cfg.ensemble.members = p.members;
        cfg.integrator.days = p.days;
        cfg.noise.enabled = p.noise;
        cfg.integrator.scheme = scheme_for(p.noise);
        cfg
    }

    pub fn noise_active(&self) -> bool {
        self.noise.enabled && self.integrator.scheme == Scheme::EulerMaruyamaSplit
    }
}

fn scheme_for(noise: bool) -> Scheme {
    if noise {
        Scheme::EulerMaruyamaSplit
    } else {
        Scheme::DeterministicRk3
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    load_config_with(path, &Overrides::default())
}

pub fn load_config_with(path: &Path, ov: &Overrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text, path, ov)?;
    if let Some(dir) = &ov.out {
        cfg.output.dir = dir.clone();
    } else if cfg.output.dir.is_relative() {
        if let Some(base) = path.parent() {
            cfg.output.dir = base.join(&cfg.output.dir);
        }
    }
    if let NoiseMode::File(f) = &cfg.noise.config.mode {
        if f.is_relative() {
            if let Some(base) = path.parent() {
                cfg.noise.config.mode = NoiseMode::File(base.join(f));
            }
        }
    }
    Ok(cfg)
}

/// Parses and validates configuration text; `origin` only labels errors.
pub fn parse_config(text: &str, origin: &Path, ov: &Overrides) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string().trim_end().to_string(),
    })?;
    resolve(raw, ov)
}

fn resolve(raw: RawConfig, ov: &Overrides) -> Result<RunConfig> {
    let mut errs: Vec<String> = Vec::new();
    match raw.schema {
        Some(SCHEMA_VERSION) => {}
        Some(v) => errs.push(format!("schema: unsupported version {v} (expected {SCHEMA_VERSION})")),
        None => errs.push(format!("schema: missing (expected `schema = {SCHEMA_VERSION}`)")),
    }

    let preset_name = ov.preset.clone().or(raw.preset.clone());
    let mut cfg = match preset_name.as_deref().map(Preset::from_str) {
        None => RunConfig::default(),
        Some(Ok(p)) => RunConfig::from_preset(p),
        Some(Err(e)) => {
            errs.push(format!("preset: {e}"));
            RunConfig::default()
        }
    };

    let mut count = |key: &str, v: Option<i64>, min: i64| -> Option<usize> {
        let v = v?;
        if v < min {
            errs.push(format!("{key}: must be >= {min}, got {v}"));
            None
        } else {
            Some(v as usize)
        }
    };
    let level = count("mesh.level", raw.mesh.level, 0);
    let modes = count("noise.modes", raw.noise.modes, 1);
    let lmax = count("noise.lmax", raw.noise.lmax, 1);
    let members = count("ensemble.members", raw.ensemble.members, 1);
    let workers = count("ensemble.workers", raw.ensemble.workers, 0);
    let nlat = count("output.nlat", raw.output.nlat, 2);
    let nlon = count("output.nlon", raw.output.nlon, 2);

    if let Some(l) = level {
        cfg.mesh.level = l as u32;
    }
    set_real(&mut cfg.mesh.radius, raw.mesh.radius);

    set_real(&mut cfg.physics.gravity, raw.physics.gravity);
    set_real(&mut cfg.physics.rotation, raw.physics.rotation);
    set_real(&mut cfg.physics.depth_threshold, raw.physics.depth_threshold);

    let explicit_stab = raw.stabilization.theta.is_some() || raw.stabilization.nu.is_some();
    if cfg.preset.is_some() && !explicit_stab && cfg.mesh.level != crate::scenario::PRESET_LEVEL {
        cfg.stabilization = rescale_to_level(cfg.stabilization, cfg.mesh.level);
    }
    set_real(&mut cfg.stabilization.theta, raw.stabilization.theta);
    set_real(&mut cfg.stabilization.nu, raw.stabilization.nu);

    let n = &raw.noise;
    if let Some(e) = n.enabled {
        cfg.noise.enabled = e;
        cfg.integrator.scheme = scheme_for(e);
    }
    if let Some(m) = modes {
        cfg.noise.config.n_modes = m;
    }
    if let Some(l) = lmax {
        cfg.noise.config.lmax = l;
    }
    set_real(&mut cfg.noise.config.amplitude, n.amplitude);
    match n.mode.as_deref() {
        None | Some("homogeneous") => {
            if n.envelope_center.is_some() || n.envelope_width.is_some() {
                errs.push("noise.envelope_center/envelope_width: only valid with mode = \"inhomogeneous\"".into());
            }
        }
        Some("inhomogeneous") => {
            cfg.noise.config.mode = NoiseMode::Inhomogeneous {
                center_lat: n.envelope_center.map_or(std::f64::consts::FRAC_PI_4, |r| r.0),
                width: n.envelope_width.map_or(0.2, |r| r.0),
            };
        }
        Some("file") => match &n.file {
            Some(f) => cfg.noise.config.mode = NoiseMode::File(f.clone()),
            None => errs.push("noise.file: required with mode = \"file\"".into()),
        },
        Some(other) => errs.push(format!(
            "noise.mode: unknown mode `{other}` (expected homogeneous, inhomogeneous or file)"
        )),
    }
    if n.file.is_some() && n.mode.as_deref() != Some("file") {
        errs.push("noise.file: only valid with mode = \"file\"".into());
    }

    let it = &raw.integrator;
    if let Some(dt) = it.dt {
        cfg.integrator.dt = Some(dt.0);
    }
    if let Some(s) = &it.scheme {
        match s.parse::<Scheme>() {
            Ok(s) => cfg.integrator.scheme = s,
            Err(e) => errs.push(format!("integrator.scheme: {e}")),
        }
    }
    set_real(&mut cfg.integrator.days, it.days);
    set_real(&mut cfg.integrator.cfl_guard, it.cfl_guard);

    if let Some(m) = members {
        cfg.ensemble.members = m;
    }
    if let Some(s) = raw.ensemble.seed {
        cfg.ensemble.seed = s;
    }
    if let Some(w) = workers {
        cfg.ensemble.workers = w;
    }

    let o = &raw.output;
    if let Some(d) = &o.dir {
        cfg.output.dir = d.clone();
    }
    set_real(&mut cfg.output.diag_every_hours, o.diag_every_hours);
    set_real(&mut cfg.output.snapshot_every_days, o.snapshot_every_days);
    if let Some(v) = nlat {
        cfg.output.nlat = v;
    }
    if let Some(v) = nlon {
        cfg.output.nlon = v;
    }
    if let Some(fields) = &o.fields {
        cfg.output.fields.clear();
        for f in fields {
            match f.parse::<SnapshotField>() {
                Ok(f) if !cfg.output.fields.contains(&f) => cfg.output.fields.push(f),
                Ok(_) => errs.push(format!("output.fields: `{f}` listed twice")),
                Err(e) => errs.push(format!("output.fields: {e}")),
            }
        }
    }

    let g = &raw.galewsky;
    let gp = &mut cfg.galewsky;
    set_real(&mut gp.u_max, g.u_max);
    set_real(&mut gp.phi0, g.phi0);
    set_real(&mut gp.phi1, g.phi1);
    set_real(&mut gp.mean_depth, g.mean_depth);
    set_real(&mut gp.h_hat, g.h_hat);
    set_real(&mut gp.alpha, g.alpha);
    set_real(&mut gp.beta, g.beta);
    set_real(&mut gp.phi2, g.phi2);
    set(&mut gp.perturbation_enabled, g.perturbation);

    if let Some(m) = ov.members {
        cfg.ensemble.members = m;
    }
    if let Some(s) = ov.seed {
        cfg.ensemble.seed = s;
    }
    if let Some(d) = &ov.out {
        cfg.output.dir = d.clone();
    }

    errs.extend(cfg.violations());
    if errs.is_empty() {
        if cfg.noise.enabled && cfg.integrator.scheme == Scheme::DeterministicRk3 {
            warn!("noise.enabled is set but integrator.scheme is deterministic_rk3; noise is ignored");
        }
        Ok(cfg)
    } else {
        Err(Error::Validation(errs))
    }
}

fn set<T: Copy>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_real(slot: &mut f64, v: Option<Real>) {
    set(slot, v.map(|r| r.0));
}

impl RunConfig {
    /// Every violated invariant, each prefixed with its key path.
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut need = |ok: bool, key: &str, what: &str, v: f64| {
            if !ok {
                errs.push(format!("{key}: must be {what}, got {v}"));
            }
        };
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        need(
            self.mesh.level <= DEFAULT_MAX_LEVEL,
            "mesh.level",
            &format!("<= {DEFAULT_MAX_LEVEL}"),
            self.mesh.level as f64,
        );
        need(pos(self.mesh.radius), "mesh.radius", "positive", self.mesh.radius);
        need(pos(self.physics.gravity), "physics.gravity", "positive", self.physics.gravity);
        need(self.physics.rotation.is_finite(), "physics.rotation", "finite", self.physics.rotation);
        need(
            pos(self.physics.depth_threshold),
            "physics.depth_threshold",
            "positive",
            self.physics.depth_threshold,
        );
        need(nonneg(self.stabilization.theta), "stabilization.theta", "finite and >= 0", self.stabilization.theta);
        need(nonneg(self.stabilization.nu), "stabilization.nu", "finite and >= 0", self.stabilization.nu);
        let nc = &self.noise.config;
        need(nonneg(nc.amplitude), "noise.amplitude", "finite and >= 0", nc.amplitude);
        if !matches!(nc.mode, NoiseMode::File(_)) {
            let available = (nc.lmax + 1) * (nc.lmax + 1) - 1;
            need(
                nc.n_modes <= available,
                "noise.modes",
                &format!("<= {available} for noise.lmax = {}", nc.lmax),
                nc.n_modes as f64,
            );
        }
        if let NoiseMode::Inhomogeneous { center_lat, width } = nc.mode {
            need(pos(width), "noise.envelope_width", "positive", width);
            need(center_lat.abs() <= std::f64::consts::FRAC_PI_2, "noise.envelope_center", "a latitude in radians", center_lat);
        }
        if let Some(dt) = self.integrator.dt {
            need(pos(dt), "integrator.dt", "positive", dt);
        }
        need(pos(self.integrator.days), "integrator.days", "positive", self.integrator.days);
        need(
            pos(self.integrator.cfl_guard) && self.integrator.cfl_guard <= 1.0,
            "integrator.cfl_guard",
            "in (0, 1]",
            self.integrator.cfl_guard,
        );
        need(self.ensemble.members >= 1, "ensemble.members", ">= 1", self.ensemble.members as f64);
        need(
            pos(self.output.diag_every_hours),
            "output.diag_every_hours",
            "positive",
            self.output.diag_every_hours,
        );
        need(
            nonneg(self.output.snapshot_every_days),
            "output.snapshot_every_days",
            "finite and >= 0",
            self.output.snapshot_every_days,
        );
        need(self.output.nlat >= 2, "output.nlat", ">= 2", self.output.nlat as f64);
        need(self.output.nlon >= 2, "output.nlon", ">= 2", self.output.nlon as f64);
        if let Err(Error::Validation(g)) = self.galewsky.validate() {
            errs.extend(g);
        }
        errs
    }
}
