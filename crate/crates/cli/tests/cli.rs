use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

fn fluxon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluxon")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Parses a CSV table: schema line, header, rows.
fn table(text: &str) -> (String, Vec<String>, Vec<Vec<String>>) {
    let (schema, rest) = text.split_once('\n').unwrap();
    let mut reader = csv::Reader::from_reader(rest.as_bytes());
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (schema.to_string(), header, rows)
}

fn column(header: &[String], row: &[String], name: &str) -> f64 {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    row[i].parse().unwrap()
}

#[test]
fn sphere_eval_has_no_asymmetric_term() {
    let out = fluxon(&["eval", "--surface", "sphere:a=1", "--point", "0,0,-0.5", "--phi0", "1", "--nu", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (schema, header, rows) = table(&stdout(&out));
    assert!(schema.starts_with("#schema=1"));
    assert_eq!(rows.len(), 1);
    assert_eq!(column(&header, &rows[0], "psi1r"), 0.0);
    assert_eq!(rows[0][header.iter().position(|h| h == "psi1r").unwrap()], "0.0000000000000000e0");
    // psi0 = 1/(2 pi r) at r = 1/2
    let psi0 = column(&header, &rows[0], "psi0");
    assert!((psi0 - 1.0 / PI).abs() < 1e-15);
}

#[test]
fn planar_eval_is_the_monopole() {
    let out = fluxon(&["eval", "--surface", "plane", "--point", "0,0,-2"]);
    assert!(out.status.success());
    let (_, header, rows) = table(&stdout(&out));
    let total = column(&header, &rows[0], "total");
    let psi0 = column(&header, &rows[0], "psi0");
    assert_eq!(total, psi0);
    assert!((total - 1.0 / (4.0 * PI)).abs() < 1e-16);
}

#[test]
fn negative_charge_and_repeated_points() {
    let out = fluxon(&["eval", "--nu", "-1", "--surface", "paraboloid:kx=1,ky=0.2", "--point", "0.1,-0.2,-0.3", "--point", "-0.1,0.2,-0.3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, header, rows) = table(&stdout(&out));
    assert_eq!(rows.len(), 2);
    // point reflection through the axis leaves every term unchanged
    for name in ["psi0", "psi1s", "psi1r", "total"] {
        assert_eq!(column(&header, &rows[0], name), column(&header, &rows[1], name));
    }
    assert!(column(&header, &rows[0], "psi0") < 0.0);
}

#[test]
fn hankel_check_passes() {
    let out = fluxon(&["check", "hankel"]);
    assert_eq!(out.status.code(), Some(0));
    let (_, header, rows) = table(&stdout(&out));
    for row in &rows {
        assert!(column(&header, row, "max_residual") < 1e-8);
        assert_eq!(row[header.iter().position(|h| h == "passed").unwrap()], "true");
    }
}

#[test]
fn failed_check_exits_one_and_names_the_worst_point() {
    // the symmetric term's boundary residual decays at second order, outside
    // the first-order window the suite asks for
    let out = fluxon(&["check", "boundary"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("worst point"), "{err}");
    assert!(!out.stdout.is_empty());
}

#[test]
fn usage_errors_exit_two() {
    let cases: &[&[&str]] = &[
        &["frobnicate"],
        &["check", "nonsense"],
        &["eval"],
        &["eval", "--point", "0,0"],
        &["eval", "--point", "0,0,1"],
        &["eval", "--point", "0,0,-1", "--nu", "3"],
        &["eval", "--point", "0,0,-1", "--units", "si", "--phi0", "1"],
        &["eval", "--point", "0,0,-1", "--surface", "torus:a=1"],
        &["sphere-compare", "--surface", "plane"],
        &["smear", "--width", "-1", "--point", "0,0,0"],
    ];
    for args in cases {
        let out = fluxon(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn thread_count_must_be_positive() {
    let out = Command::new(env!("CARGO_BIN_EXE_fluxon"))
        .args(["check", "rhs"])
        .env("FLUXON_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

fn run_to_file(dir: &Path, name: &str, threads: &str, args: &[&str]) -> Vec<u8> {
    let path = dir.join(name);
    let status = Command::new(env!("CARGO_BIN_EXE_fluxon"))
        .args(args)
        .arg("--output")
        .arg(&path)
        .env("FLUXON_THREADS", threads)
        .status()
        .unwrap();
    assert!(status.success(), "{args:?}");
    std::fs::read(path).unwrap()
}

#[test]
fn identical_configs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let runs: &[&[&str]] = &[
        &["smear", "--width", "1e-3", "--point", "0,0,0", "--point", "0.003,0.001,-0.002", "--format", "json"],
        &["check", "rhs", "--surface", "paraboloid:kx=1,ky=-0.4"],
        &["sphere-compare", "--n", "5"],
    ];
    for (i, args) in runs.iter().enumerate() {
        let a = run_to_file(dir.path(), &format!("a{i}"), "1", args);
        let b = run_to_file(dir.path(), &format!("b{i}"), "4", args);
        assert!(!a.is_empty());
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn printed_config_replays_to_the_same_output() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["field", "--surface", "cylinder:a=2", "--d", "0.5", "--point", "0.01,-0.02,-0.005", "--format", "json"];
    let cfg = fluxon(&[&args[..], &["--print-config"]].concat());
    assert!(cfg.status.success());
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, &cfg.stdout).unwrap();

    let direct = fluxon(&args);
    let replay = fluxon(&["run", "--config", cfg_path.to_str().unwrap()]);
    assert!(replay.status.success(), "{}", String::from_utf8_lossy(&replay.stderr));
    assert_eq!(direct.stdout, replay.stdout);

    // the printed configuration is itself a fixed point
    let again = fluxon(&["run", "--config", cfg_path.to_str().unwrap(), "--print-config"]);
    assert_eq!(again.stdout, cfg.stdout);
}

#[test]
fn si_units_use_the_flux_quantum() {
    let out = fluxon(&["eval", "--surface", "plane", "--units", "si", "--point", "0,0,-1", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let phi0 = 6.626_070_15e-34 / (2.0 * 1.602_176_634e-19);
    assert_eq!(v["phi0"].as_f64().unwrap(), phi0);
    let psi0 = v["rows"][0]["psi0"].as_f64().unwrap();
    assert!((psi0 - phi0 / (2.0 * PI)).abs() < 1e-15 * psi0);
}
