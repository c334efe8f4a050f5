use std::path::Path;
use std::process::Command;

use bec_josephson::cli::{execute, RunConfig, Subcommand};
use bec_josephson::table::Table;

fn config(overrides: &[&str]) -> RunConfig {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    RunConfig::load(None, &o).unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn symmetric_traps_report_zero_rate_and_infinite_tau() {
    let dir = tempfile::tempdir().unwrap();
    let o = execute(Subcommand::Dephasing, &config(&[]), dir.path()).unwrap();
    assert_eq!(o.value("rate_total"), Some(0.0));
    assert_eq!(o.value("rate_imbalance"), Some(0.0));
    assert_eq!(o.value("tau_d_total"), Some(f64::INFINITY));
    let t = Table::from_csv(&read(&dir.path().join("dephasing.csv"))).unwrap();
    assert_eq!(t.column("tau_d_total").unwrap(), vec![f64::INFINITY]);
}

#[test]
fn sweep_rates_follow_square_of_asymmetry() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&[
        "sweep.subcommand=dephasing",
        "sweep.parameter=params.delta_omega_sq",
        "sweep.values=0.001,0.002,0.004",
        "dephasing.fit=false",
        "sweep.threads=3",
    ]);
    execute(Subcommand::Sweep, &cfg, dir.path()).unwrap();
    let t = Table::from_csv(&read(&dir.path().join("sweep.csv"))).unwrap();
    let rates = t.column("rate_total").unwrap();
    assert_eq!(rates.len(), 3);
    assert!((rates[1] / rates[0] - 4.0).abs() < 1e-9, "{rates:?}");
    assert!((rates[2] / rates[0] - 16.0).abs() < 1e-9, "{rates:?}");
    for i in 0..3 {
        assert!(dir
            .path()
            .join(format!("run_{i:03}/dephasing.csv"))
            .exists());
    }
}

#[test]
fn two_parameter_sweep_covers_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&[
        "sweep.subcommand=two-mode",
        "sweep.parameter=params.lambda_coupling",
        "sweep.values=1,2",
        "sweep.parameter2=scenario.delta_phi0",
        "sweep.values2=0,0.5,1",
        "solver.periods=1",
    ]);
    execute(Subcommand::Sweep, &cfg, dir.path()).unwrap();
    let t = Table::from_csv(&read(&dir.path().join("sweep.csv"))).unwrap();
    assert_eq!(t.rows.len(), 6);
    assert_eq!(
        t.column("scenario.delta_phi0").unwrap(),
        vec![0.0, 0.5, 1.0, 0.0, 0.5, 1.0]
    );
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = config(&[
        "grid.n_points=201",
        "solver.periods=1",
        "solver.basis=both",
        "params.n_atoms=20000",
    ]);
    for (sub, files) in [
        (Subcommand::Gpe, &["gpe_ab.csv", "gpe_pm.csv"][..]),
        (Subcommand::TwoMode, &["two_mode.csv"][..]),
        (Subcommand::Moments, &["moments.csv"][..]),
    ] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        execute(sub, &cfg, a.path()).unwrap();
        execute(sub, &cfg, b.path()).unwrap();
        for f in files {
            assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
        }
    }
}

#[test]
fn manifest_reproduces_the_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config(&[
        "params.v=0.05",
        "dephasing.periods=40",
        "scenario.name=round-trip",
    ]);
    execute(Subcommand::Dephasing, &cfg, a.path()).unwrap();
    let again = RunConfig::load(Some(&read(&a.path().join("manifest.ini"))), &[]).unwrap();
    execute(Subcommand::Dephasing, &again, b.path()).unwrap();
    for f in ["dephasing.csv", "dephasing_trajectory.csv", "manifest.ini"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
}

#[test]
fn two_mode_csv_matches_closed_form_column() {
    let dir = tempfile::tempdir().unwrap();
    execute(
        Subcommand::TwoMode,
        &config(&["scenario.delta_phi0=0.3"]),
        dir.path(),
    )
    .unwrap();
    let t = Table::from_csv(&read(&dir.path().join("two_mode.csv"))).unwrap();
    let a = t.column("delta_n").unwrap();
    let b = t.column("delta_n_closed_form").unwrap();
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-6 * scale);
    }
}

#[test]
fn svg_flag_writes_plots() {
    let dir = tempfile::tempdir().unwrap();
    execute(
        Subcommand::Oracle,
        &config(&["output.emit_svg=true", "oracle.n_atoms=50"]),
        dir.path(),
    )
    .unwrap();
    let svg = read(&dir.path().join("oracle.svg"));
    assert!(svg.contains("<polyline"));
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bec-josephson"))
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let ok = binary()
        .args(["two-mode", "--set", "solver.periods=1", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(out.join("two_mode.csv").exists());

    let unknown = binary()
        .args(["two-mode", "--set", "params.nope=1"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("params.nope"));

    let cfg = dir.path().join("bad.ini");
    std::fs::write(&cfg, "[solver]\nbasis = diagonal\n").unwrap();
    let bad = binary()
        .args(["gpe", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));

    let collapse = binary()
        .args(["hydro", "--set", "scenario.r0_factor=1e-6", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(
        collapse.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&collapse.stderr)
    );
}

#[test]
fn plot_subcommand_reports_missing_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    std::fs::write(&csv, "t [s],x [1]\n0e0,1e0\n1e0,2e0\n").unwrap();
    let svg = dir.path().join("t.svg");
    let bad = binary()
        .args(["plot", "--y", "y", "-o"])
        .arg(&svg)
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("available: t, x"));
    assert!(!svg.exists());
    let good = binary()
        .args(["plot", "--y", "x", "-o"])
        .arg(&svg)
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(good.status.code(), Some(0));
    let first = read(&svg);
    binary()
        .args(["plot", "--y", "x", "-o"])
        .arg(&svg)
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(first, read(&svg));
}
