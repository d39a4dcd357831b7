use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rswlu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rswlu")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn mesh_check_passes() {
    let o = rswlu(&["mesh", "--level", "2", "--check"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn mesh_dump_writes_header() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("mesh.txt");
    let o = rswlu(&["mesh", "--level", "1", "--dump", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("SPHEROMESH v1\nlevel 1\n"));
    assert!(text.contains("counts 80 120 42"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(rswlu(&["mesh", "--level", "2", "--bogus"]).status.code(), Some(1));
    assert_eq!(rswlu(&["run", "--config", "x.toml", "--preset", "xyz"]).status.code(), Some(1));
    assert_eq!(rswlu(&[]).status.code(), Some(1));
    assert_eq!(rswlu(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_config_exits_two_naming_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "schema = 1\n[stabilization]\ntheta = -1.0\n");
    let o = rswlu(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stabilization.theta"));
}

#[test]
fn run_writes_member_diagnostics_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "schema = 1\n[mesh]\nlevel = 3\n[noise]\nenabled = true\n[integrator]\ndays = 1.0\n\
         [output]\ndir = \"out\"\nsnapshot_every_days = 0.0\n",
    );
    let o = rswlu(&["run", "--config", &cfg, "--members", "2", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("out");
    for m in ["member_000", "member_001"] {
        let csv = fs::read_to_string(out.join(m).join("diagnostics.csv")).unwrap();
        assert!(csv.starts_with("step,time,energy,enstrophy,mass\n"));
        assert_eq!(csv.lines().count(), 26);
    }
    let manifest = fs::read_to_string(out.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 2);
    assert!(manifest.starts_with("member_000/diagnostics.csv,"));
}

#[test]
fn preset_runs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "schema = 1\n[mesh]\nlevel = 2\n[integrator]\ndays = 0.5\n[ensemble]\nmembers = 2\n\
         [output]\nsnapshot_every_days = 0.25\nnlat = 10\nnlon = 20\n",
    );
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = rswlu(&["run", "--config", &cfg, "--preset", "cd", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(out.join("manifest.csv")).unwrap()
    };
    let a = run("a");
    assert!(a.contains("pv_day000.250.txt"));
    assert_eq!(a, run("b"));
}

#[test]
fn init_then_diag_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "schema = 1\n[mesh]\nlevel = 2\n");
    let state = tmp.path().join("state.txt");
    let o = rswlu(&["init", "--config", &cfg, "--out", state.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(&state).unwrap().starts_with("SPHEROSTATE v1\n"));
    let o = rswlu(&["diag", "--state", state.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for key in ["energy", "enstrophy", "mass"] {
        let line = text.lines().find(|l| l.starts_with(key)).unwrap();
        let value: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
        assert!(value > 0.0, "{line}");
    }
}

#[test]
fn diag_rejects_missing_state() {
    let o = rswlu(&["diag", "--state", "/nonexistent/state.txt"]);
    assert_eq!(o.status.code(), Some(2));
}
