//! `rswlu`: run ensembles, check meshes, dump initial states, print
//! diagnostics. Exit codes: 0 success, 1 usage error, 2 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use rswlu::diagnostics::{potential_enstrophy, total_energy, total_mass};
use rswlu::harness::{load_config, load_config_with, run_ensemble, Overrides, StateFile};
use rswlu::rsw::PhysParams;
use rswlu::scenario::galewsky_init;
use rswlu::{validate_mesh, Mesh};

const EXIT_USAGE: u8 = 1;
const EXIT_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(name = "rswlu", version, about = "Stochastic rotating shallow water ensembles on the sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        members: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = ["no_diff", "cd", "bd"])]
        preset: Option<String>,
    },
    /// Build an icosahedral mesh and optionally validate it.
    Mesh {
        #[arg(long)]
        level: u32,
        #[arg(long, default_value_t = 6.371229e6)]
        radius: f64,
        /// Run every invariant check and print the report.
        #[arg(long)]
        check: bool,
        /// Write the plain-text mesh dump to this file.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Write the initial state of a config to a state file.
    Init {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print energy, potential enstrophy and mass of a state file.
    Diag {
        #[arg(long)]
        state: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn execute(cmd: Command) -> rswlu::Result<ExitCode> {
    match cmd {
        Command::Run {
            config,
            members,
            seed,
            out,
            preset,
        } => {
            let ov = Overrides {
                preset,
                members,
                seed,
                out,
            };
            let cfg = load_config_with(&config, &ov)?;
            let summary = run_ensemble(&cfg)?;
            for m in &summary.members {
                match &m.result {
                    Ok(series) => info!("member {}: {} diagnostics records", m.index, series.len()),
                    Err(e) => eprintln!("member {} failed: {e}", m.index),
                }
            }
            println!(
                "{} of {} members completed; {} files listed in {}",
                summary.members.len() - summary.n_failed(),
                summary.members.len(),
                summary.manifest.len(),
                summary.dir.join(rswlu::harness::ensemble::MANIFEST_NAME).display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Mesh {
            level,
            radius,
            check,
            dump,
        } => {
            let m = Mesh::icosahedral(level, radius)?;
            println!(
                "level {level}: {} cells, {} edges, {} dual cells",
                m.n_cells(),
                m.n_edges(),
                m.n_duals()
            );
            if let Some(path) = dump {
                m.write_dump(&path)?;
            }
            if check {
                let report = validate_mesh(&m);
                print!("{report}");
                if !report.passed() {
                    eprintln!("error: mesh validation failed");
                    return Ok(ExitCode::from(EXIT_FAILURE));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Init { config, out } => {
            let cfg = load_config(&config)?;
            let m = Mesh::icosahedral(cfg.mesh.level, cfg.mesh.radius)?;
            let p = PhysParams::new(&m, cfg.physics.gravity, cfg.physics.rotation);
            let state = galewsky_init(&m, &p, &cfg.galewsky)?;
            StateFile {
                level: cfg.mesh.level,
                radius: cfg.mesh.radius,
                gravity: cfg.physics.gravity,
                rotation: cfg.physics.rotation,
                state,
            }
            .write(&out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Diag { state } => {
            let f = StateFile::read(&state)?;
            let m = Mesh::icosahedral(f.level, f.radius)?;
            if f.state.v.len() != m.n_edges() || f.state.h.len() != m.n_cells() {
                return Err(rswlu::Error::DimensionMismatch {
                    expected: m.n_edges() + m.n_cells(),
                    got: f.state.v.len() + f.state.h.len(),
                });
            }
            let p = PhysParams::new(&m, f.gravity, f.rotation);
            println!("energy {:.17e}", total_energy(&m, &f.state, &p));
            println!("enstrophy {:.17e}", potential_enstrophy(&m, &f.state, &p)?);
            println!("mass {:.17e}", total_mass(&m, &f.state.h));
            Ok(ExitCode::SUCCESS)
        }
    }
}
