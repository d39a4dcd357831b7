//! User-facing surface: configuration, ensemble runs and file formats.

pub mod config;
pub mod ensemble;
pub mod state_io;

pub use config::{load_config, load_config_with, parse_config, Overrides, RunConfig, SnapshotField};
pub use ensemble::{
    read_manifest, run_ensemble, run_member, write_manifest, EnsembleSummary, ManifestEntry, MemberOutcome, Setup,
    Snapshot,
};
pub use state_io::StateFile;
