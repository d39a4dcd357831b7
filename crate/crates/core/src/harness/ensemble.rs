//! Ensemble orchestration: member runs, snapshots, ensemble means and the
//! run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::diagnostics::{project_to_latlon, DiagnosticsSeries, LatLonGrid, MeshField};
use crate::error::{Error, Result};
use crate::harness::config::{RunConfig, SnapshotField};
use crate::integrator::{cfl_time_step, run, Model, StepConfig};
use crate::mesh::Mesh;
use crate::ops::curl;
use crate::rsw::{potential_vorticity, PhysParams, State};
use crate::scenario::galewsky_init;
use crate::stochastic::{build_noise_basis, member_rng, member_seed, NoiseModel};

pub const MANIFEST_NAME: &str = "manifest.csv";
pub const DIAGNOSTICS_NAME: &str = "diagnostics.csv";
pub const FAILURE_NAME: &str = "FAILED";

/// Everything derived from a [`RunConfig`] before any member starts.
#[derive(Debug, Clone)]
pub struct Setup {
    pub model: Model,
    pub initial: State,
    pub step: StepConfig,
    pub n_steps: usize,
    pub diag_every: usize,
    /// `None` when snapshots are disabled.
    pub snapshot_every: Option<usize>,
}

impl Setup {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let mesh = Mesh::icosahedral(cfg.mesh.level, cfg.mesh.radius)?;
        let mut phys = PhysParams::new(&mesh, cfg.physics.gravity, cfg.physics.rotation);
        phys.depth_threshold = cfg.physics.depth_threshold;
        let noise = if cfg.noise_active() {
            build_noise_basis(&cfg.noise.config, &mesh)?
        } else {
            NoiseModel::none(&mesh)
        };
        let initial = galewsky_init(&mesh, &phys, &cfg.galewsky)?;

        let cadence = cfg.output.diag_every_hours * 3600.0;
        let (dt, diag_every) = match cfg.integrator.dt {
            Some(dt) => (dt, ((cadence / dt).round() as usize).max(1)),
            None => {
                let h_max = initial.h.iter().fold(0.0f64, |a, &b| a.max(b));
                let limit = cfl_time_step(&mesh, phys.g, h_max, cfg.integrator.cfl_guard);
                let k = (cadence / limit).ceil().max(1.0);
                (cadence / k, k as usize)
            }
        };
        let n_steps = (cfg.integrator.days * 86400.0 / dt).round() as usize;
        let snapshot_every = (cfg.output.snapshot_every_days > 0.0)
            .then(|| ((cfg.output.snapshot_every_days * 86400.0 / dt).round() as usize).max(1));
        let mut step = StepConfig::new(dt, cfg.integrator.scheme);
        step.cfl_guard = cfg.integrator.cfl_guard;
        let model = Model {
            mesh,
            phys,
            stab: cfg.stabilization,
            noise,
        };
        Ok(Setup {
            model,
            initial,
            step,
            n_steps,
            diag_every,
            snapshot_every,
        })
    }

    fn wants_snapshot(&self, k: usize) -> bool {
        match self.snapshot_every {
            Some(every) => k % every == 0 || k == self.n_steps,
            None => false,
        }
    }
}

/// One projected field at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: SnapshotField,
    pub step: usize,
    pub day: f64,
    pub grid: LatLonGrid,
}

impl Snapshot {
    pub fn file_name(&self) -> String {
        format!("{}_day{:07.3}.txt", self.field.name(), self.day)
    }

    pub fn to_text(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.grid
            .write_text(&mut buf, self.field.name(), self.day)
            .expect("writing to memory");
        buf
    }
}

#[derive(Debug, Clone)]
pub struct MemberOutcome {
    pub index: usize,
    pub seed: u64,
    /// Diagnostics of a completed member, or the error that stopped it.
    pub result: std::result::Result<DiagnosticsSeries, String>,
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone)]
pub struct EnsembleSummary {
    pub dir: PathBuf,
    pub members: Vec<MemberOutcome>,
    /// Ensemble means over the completed members.
    pub means: Vec<Snapshot>,
    pub manifest: Vec<ManifestEntry>,
}

impl EnsembleSummary {
    pub fn completed(&self) -> impl Iterator<Item = (&MemberOutcome, &DiagnosticsSeries)> {
        self.members
            .iter()
            .filter_map(|m| m.result.as_ref().ok().map(|s| (m, s)))
    }

    pub fn n_failed(&self) -> usize {
        self.members.iter().filter(|m| m.result.is_err()).count()
    }
}

pub fn member_dir_name(index: usize) -> String {
    format!("member_{index:03}")
}

fn snapshot_fields(setup: &Setup, fields: &[SnapshotField], s: &State, nlat: usize, nlon: usize, k: usize) -> Result<Vec<Snapshot>> {
    let m = &setup.model.mesh;
    let day = k as f64 * setup.step.dt / 86400.0;
    fields
        .iter()
        .map(|&field| {
            let grid = match field {
                SnapshotField::Pv => {
                    let q = potential_vorticity(m, s, &setup.model.phys)?;
                    project_to_latlon(m, MeshField::Dual(&q), nlat, nlon)?
                }
                SnapshotField::Vorticity => project_to_latlon(m, MeshField::Dual(&curl(m, &s.v)), nlat, nlon)?,
                SnapshotField::Depth => project_to_latlon(m, MeshField::Cell(&s.h), nlat, nlon)?,
            };
            Ok(Snapshot {
                field,
                step: k,
                day,
                grid,
            })
        })
        .collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Runs one member from `setup`, writing its files under `dir` when given.
pub fn run_member(setup: &Setup, cfg: &RunConfig, index: usize, dir: Option<&Path>) -> Result<MemberOutcome> {
    let seed = member_seed(cfg.ensemble.seed, index as u64);
    let mut rng = member_rng(cfg.ensemble.seed, index as u64);
    let mdir = dir.map(|d| d.join(member_dir_name(index)));
    if let Some(d) = &mdir {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut snapshots = Vec::new();
    let (nlat, nlon) = (cfg.output.nlat, cfg.output.nlon);
    let out = run(
        &setup.model,
        &setup.initial,
        setup.n_steps,
        &setup.step,
        setup.diag_every,
        Some(&mut rng),
        |k, _, s| {
            if setup.wants_snapshot(k) {
                for snap in snapshot_fields(setup, &cfg.output.fields, s, nlat, nlon, k)? {
                    if let Some(d) = &mdir {
                        write_file(&d.join(snap.file_name()), &snap.to_text())?;
                    }
                    snapshots.push(snap);
                }
            }
            Ok(())
        },
    );
    let result = match out {
        Ok(out) => {
            if let Some(d) = &mdir {
                out.series.write_csv(&d.join(DIAGNOSTICS_NAME))?;
            }
            Ok(out.series)
        }
        Err(e) => {
            warn!("member {index} failed: {e}");
            if let Some(d) = &mdir {
                write_file(&d.join(FAILURE_NAME), format!("{e}\n").as_bytes())?;
            }
            Err(e.to_string())
        }
    };
    Ok(MemberOutcome {
        index,
        seed,
        result,
        snapshots,
    })
}

/// Element-wise running mean; identical inputs reproduce themselves exactly.
fn ensemble_mean<'a>(grids: impl Iterator<Item = &'a LatLonGrid>) -> Option<LatLonGrid> {
    let mut mean: Option<LatLonGrid> = None;
    for (n, g) in grids.enumerate() {
        match &mut mean {
            None => mean = Some(g.clone()),
            Some(acc) => {
                let w = 1.0 / (n + 1) as f64;
                for (a, &x) in acc.values.iter_mut().zip(&g.values) {
                    *a += (x - *a) * w;
                }
            }
        }
    }
    mean
}

fn mean_snapshots(members: &[MemberOutcome]) -> Vec<Snapshot> {
    let done: Vec<&MemberOutcome> = members.iter().filter(|m| m.result.is_ok()).collect();
    let Some(first) = done.first() else {
        return Vec::new();
    };
    first
        .snapshots
        .iter()
        .enumerate()
        .filter_map(|(i, s)| {
            let grid = ensemble_mean(done.iter().map(|m| &m.snapshots[i].grid))?;
            Some(Snapshot {
                field: s.field,
                step: s.step,
                day: s.day,
                grid,
            })
        })
        .collect()
}

fn collect_manifest(root: &Path) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(&path, e.into())
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(root).expect("inside root");
        let name: Vec<String> = rel.iter().map(|c| c.to_string_lossy().into_owned()).collect();
        let name = name.join("/");
        if name == MANIFEST_NAME {
            continue;
        }
        let bytes = fs::read(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
        out.push(ManifestEntry {
            path: name,
            sha256: hex::encode(Sha256::digest(&bytes)),
            bytes: bytes.len() as u64,
        });
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

pub fn write_manifest(root: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let path = root.join(MANIFEST_NAME);
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    for e in entries {
        writeln!(f, "{},{},{}", e.path, e.sha256, e.bytes).map_err(|err| Error::io(&path, err))?;
    }
    Ok(())
}

pub fn read_manifest(root: &Path) -> Result<Vec<ManifestEntry>> {
    let path = root.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    text.lines()
        .enumerate()
        .map(|(n, line)| {
            let bad = || Error::Parse {
                path: path.clone(),
                message: format!("line {}: expected `path,sha256,bytes`", n + 1),
            };
            let mut it = line.rsplitn(3, ',');
            let bytes = it.next().and_then(|b| b.parse().ok()).ok_or_else(bad)?;
            let sha256 = it.next().ok_or_else(bad)?.to_string();
            let path = it.next().ok_or_else(bad)?.to_string();
            Ok(ManifestEntry { path, sha256, bytes })
        })
        .collect()
}

/// Runs every member (concurrently up to `ensemble.workers`), writes
/// per-member diagnostics and snapshots, ensemble means and the manifest
/// under `output.dir`. Fails only when no member completes.
pub fn run_ensemble(cfg: &RunConfig) -> Result<EnsembleSummary> {
    let setup = Setup::new(cfg)?;
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    info!(
        "{} members, {} steps of {:.1} s, level {}",
        cfg.ensemble.members, setup.n_steps, setup.step.dt, cfg.mesh.level
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.ensemble.workers)
        .build()
        .map_err(|e| Error::Config(format!("ensemble.workers: {e}")))?;
    let members: Vec<MemberOutcome> = pool.install(|| {
        (0..cfg.ensemble.members)
            .into_par_iter()
            .map(|i| run_member(&setup, cfg, i, Some(&dir)))
            .collect::<Result<_>>()
    })?;

    let means = mean_snapshots(&members);
    if !means.is_empty() {
        let mdir = dir.join("mean");
        fs::create_dir_all(&mdir).map_err(|e| Error::io(&mdir, e))?;
        for s in &means {
            write_file(&mdir.join(s.file_name()), &s.to_text())?;
        }
    }
    let manifest = collect_manifest(&dir)?;
    write_manifest(&dir, &manifest)?;

    let summary = EnsembleSummary {
        dir,
        members,
        means,
        manifest,
    };
    if summary.n_failed() == summary.members.len() {
        return Err(Error::EnsembleFailed(summary.members.len()));
    }
    Ok(summary)
}
