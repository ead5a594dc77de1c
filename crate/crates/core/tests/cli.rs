use std::path::Path;
use std::process::Command;

use hardphase::cli_io::Table;
use hardphase::spectrum::spectrum_at;
use hardphase::{EosSpec, SteadyConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hardphase"))
}

fn run(dir: &Path, args: &[&str]) -> std::process::Output {
    bin().args(args).arg("--out").arg(dir).output().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn spectrum_row_matches_library_call() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["spectrum", "--kappa", "12", "--grid", "4096"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = Table::parse(&read(tmp.path(), "spectrum.csv")).unwrap();
    let (_, _, sr) = spectrum_at(&EosSpec::hard_phase(), 12.0, 4096, &SteadyConfig::default()).unwrap();
    assert_eq!(t.floats("nu_star").unwrap(), &[sr.nu_star]);
    assert!(read(tmp.path(), "spectrum.csv").contains(",Unstable"));
}

#[test]
fn usage_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        &["spectrum", "--kappa", "-1"][..],
        &["spectrum", "--grid", "10"],
        &["nonsense"],
        &["spectrum", "--set", "nokey=1"],
        &["phase", "--eps", "0"],
        &[],
    ] {
        let o = run(tmp.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn numerical_failure_exits_one_with_report() {
    let tmp = tempfile::tempdir().unwrap();
    // Newton cannot meet a tolerance below rounding
    let o = run(tmp.path(), &["profile", "--kappa", "0.01", "--set", "boundary_tol=1e-300"]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let e: serde_json::Value = serde_json::from_str(&read(tmp.path(), "error.json")).unwrap();
    assert_eq!(e["command"], "profile");
    assert!(e["kind"].is_string() && e["message"].is_string());
}

#[test]
fn phase_smoke_with_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["phase", "--eps", "1e-8", "--tau-max", "30", "--plot"]);
    assert_eq!(o.status.code(), Some(0));
    let t = Table::parse(&read(tmp.path(), "trajectory.csv")).unwrap();
    assert!(t.rows() > 10);
    let svg = read(tmp.path(), "phase.svg");
    assert!(svg.starts_with("<svg") && svg.contains("<polygon"));
}

#[test]
fn rerun_from_config_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(run(d, &["family", "--kappa-list", "0.1,1,5", "--grid", "1024", "--plot"]).status.code(), Some(0));
    let names: Vec<String> = serde_json::from_str::<serde_json::Value>(&read(d, "manifest.json")).unwrap()["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let before: Vec<Vec<u8>> = names.iter().map(|n| std::fs::read(d.join(n)).unwrap()).collect();
    let o = bin().arg("--config").arg(d.join("config.txt")).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    for (n, b) in names.iter().zip(before) {
        assert_eq!(std::fs::read(d.join(n)).unwrap(), b, "{n}");
    }
}

#[test]
fn cli_flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = d.join("run.txt");
    std::fs::write(&cfg, "# test\ncommand = profile\nkappa = 5\ngrid_size = 512\n").unwrap();
    let o = bin().arg("--config").arg(&cfg).args(["--kappa", "0.1", "--out"]).arg(d).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_str(&read(d, "manifest.json")).unwrap();
    assert_eq!(m["config"]["kappa"], 0.1);
    assert_eq!(m["config"]["grid_size"], 512);
    let t = Table::parse(&read(d, "profile.csv")).unwrap();
    assert_eq!(t.rows(), 513);
    assert_eq!(t.columns.iter().map(|c| c.0.as_str()).collect::<Vec<_>>(), ["r", "ybar", "rho", "p", "m", "lambda", "mu"]);
}
