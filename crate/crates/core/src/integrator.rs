//! Time stepping: a strong-stability-preserving RK3 step for the drift,
//! followed by one Euler–Maruyama application of the stochastic increments.

use log::warn;
use rand::Rng;

use crate::diagnostics::{record, DiagnosticsSeries};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::rsw::{continuity_tendency, det_tendency, PhysParams, State};
use crate::stabilization::{bd_tendency, cd_tendency, StabilizationParams};
use crate::stochastic::{sample_increment, sto_h, sto_v, BrownianIncrement, NoiseModel};

pub const DEFAULT_CFL_GUARD: f64 = 0.5;
pub const DEFAULT_MAX_SPEED: f64 = 500.0;
pub const DEFAULT_MAX_DEPTH: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    DeterministicRk3,
    EulerMaruyamaSplit,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic_rk3" => Ok(Scheme::DeterministicRk3),
            "euler_maruyama_split" => Ok(Scheme::EulerMaruyamaSplit),
            other => Err(Error::Config(format!(
                "unknown scheme `{other}` (expected deterministic_rk3 or euler_maruyama_split)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub cfl_guard: f64,
    /// Blow-up bounds: `|V| < max_speed`, `0 < h < max_depth`.
    pub max_speed: f64,
    pub max_depth: f64,
}

impl StepConfig {
    pub fn new(dt: f64, scheme: Scheme) -> Self {
        StepConfig {
            dt,
            scheme,
            cfl_guard: DEFAULT_CFL_GUARD,
            max_speed: DEFAULT_MAX_SPEED,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.cfl_guard > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cfl_guard must be positive, got {}",
                self.cfl_guard
            )));
        }
        Ok(())
    }
}

/// `guard · Δx_min / √(g h_max)` with `Δx_min` the shortest dual edge.
pub fn cfl_time_step(m: &Mesh, g: f64, h_max: f64, guard: f64) -> f64 {
    guard * m.min_dual_edge_len() / (g * h_max).sqrt()
}

/// Everything a member needs besides its state and random stream. Immutable
/// and shared by all members.
#[derive(Debug, Clone)]
pub struct Model {
    pub mesh: Mesh,
    pub phys: PhysParams,
    pub stab: StabilizationParams,
    pub noise: NoiseModel,
}

impl Model {
    /// Drift `(∂_t V, ∂_t h) = (det − θ diff^CD − ν diff^BD, −Div(h̄V))`.
    pub fn drift(&self, s: &State) -> Result<State> {
        let m = &self.mesh;
        let mut v = det_tendency(m, s, &self.phys)?;
        if self.stab.theta != 0.0 {
            v.axpy(-self.stab.theta, &cd_tendency(m, s, &self.phys)?);
        }
        if self.stab.nu != 0.0 {
            v.axpy(-self.stab.nu, &bd_tendency(m, &s.v));
        }
        Ok(State {
            v,
            h: continuity_tendency(m, s),
        })
    }

    fn rk3(&self, s: &State, dt: f64) -> Result<State> {
        let mut s1 = s.clone();
        s1.axpy(dt, &self.drift(s)?);
        let mut s2 = s1.clone();
        s2.axpy(dt, &self.drift(&s1)?);
        let s2 = State::lincomb(0.75, s, 0.25, &s2);
        let mut s3 = s2.clone();
        s3.axpy(dt, &self.drift(&s2)?);
        Ok(State::lincomb(1.0 / 3.0, s, 2.0 / 3.0, &s3))
    }

    /// One step. With `EulerMaruyamaSplit` and `inc` given, the noise is
    /// evaluated at the pre-step state and added after the drift.
    pub fn step(&self, s: &State, cfg: &StepConfig, inc: Option<&BrownianIncrement>) -> Result<State> {
        let mut next = self.rk3(s, cfg.dt)?;
        if let (Scheme::EulerMaruyamaSplit, Some(inc)) = (cfg.scheme, inc) {
            if self.noise.n_modes() > 0 {
                let dv = sto_v(&self.mesh, s, &self.noise, inc, cfg.dt)?;
                let dh = sto_h(&self.mesh, s, &self.noise, inc, cfg.dt)?;
                next.v.axpy(1.0, &dv);
                next.h.axpy(1.0, &dh);
            }
        }
        Ok(next)
    }

    fn uses_noise(&self, cfg: &StepConfig) -> bool {
        cfg.scheme == Scheme::EulerMaruyamaSplit && self.noise.n_modes() > 0
    }
}

pub fn check_bounds(s: &State, cfg: &StepConfig, step: usize) -> Result<()> {
    let blow = |reason: String| Err(Error::BlowUp { step, reason });
    for (e, &v) in s.v.iter().enumerate() {
        if !v.is_finite() || v.abs() >= cfg.max_speed {
            return blow(format!("|V| = {v:e} m/s on edge {e} (bound {})", cfg.max_speed));
        }
    }
    for (c, &h) in s.h.iter().enumerate() {
        if !h.is_finite() || h <= 0.0 || h >= cfg.max_depth {
            return blow(format!("h = {h:e} m in cell {c} (bounds 0..{})", cfg.max_depth));
        }
    }
    Ok(())
}

/// Outcome of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: State,
    pub series: DiagnosticsSeries,
}

/// Advances `n_steps` steps. Diagnostics are recorded at step 0 and every
/// `diag_every` steps; `hook` sees every state including the initial one.
/// Increments are drawn from `rng` once per step, in step order.
pub fn run<R: Rng>(
    model: &Model,
    initial: &State,
    n_steps: usize,
    cfg: &StepConfig,
    diag_every: usize,
    mut rng: Option<&mut R>,
    mut hook: impl FnMut(usize, f64, &State) -> Result<()>,
) -> Result<RunOutput> {
    cfg.validate()?;
    let mut series = DiagnosticsSeries::default();
    if n_steps == 0 {
        return Ok(RunOutput {
            state: initial.clone(),
            series,
        });
    }
    let m = &model.mesh;
    let h_max = initial.h.iter().fold(0.0f64, |a, &b| a.max(b));
    let limit = cfl_time_step(m, model.phys.g, h_max, cfg.cfl_guard);
    if cfg.dt > limit {
        warn!("dt = {} s exceeds the CFL guard limit {:.1} s", cfg.dt, limit);
    }
    let every = diag_every.max(1);
    let noisy = model.uses_noise(cfg);
    if noisy && rng.is_none() {
        return Err(Error::InvalidArgument("stochastic scheme needs a random stream".into()));
    }
    let mut s = initial.clone();
    series.push(record(m, &s, &model.phys, 0, 0.0)?);
    hook(0, 0.0, &s)?;
    for k in 1..=n_steps {
        let inc = match (&mut rng, noisy) {
            (Some(r), true) => Some(sample_increment(*r, cfg.dt, model.noise.n_modes())),
            _ => None,
        };
        s = model.step(&s, cfg, inc.as_ref()).map_err(|e| e.at_step(k))?;
        check_bounds(&s, cfg, k)?;
        let t = k as f64 * cfg.dt;
        if k % every == 0 {
            series.push(record(m, &s, &model.phys, k, t).map_err(|e| e.at_step(k))?);
        }
        hook(k, t, &s)?;
    }
    Ok(RunOutput { state: s, series })
}
