use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mcf-qkd"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn csv_rows(stdout: &[u8]) -> Vec<Vec<String>> {
    let text = String::from_utf8(stdout.to_vec()).unwrap();
    text.lines().filter(|l| !l.starts_with('#')).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = rows[0].iter().position(|c| c == name).unwrap();
    rows[1..].iter().map(|r| r[i].clone()).collect()
}

#[test]
fn reports_are_byte_identical_across_runs() {
    for (cmd, file) in [
        ("leakage", "nt-far.toml"),
        ("keyrate", "ta-far.toml"),
        ("sweep-distance", "nt-near-distance.toml"),
        ("sweep-wavelength", "nt-wavelength.toml"),
        ("plan", "plan-nt.toml"),
    ] {
        for format in ["csv", "json", "table"] {
            let path = scenario(file);
            let args = [cmd, "--scenario", path.to_str().unwrap(), "--format", format];
            let a = run(&args);
            let b = run(&args);
            assert!(a.status.success(), "{cmd} {format}: {}", String::from_utf8_lossy(&a.stderr));
            assert_eq!(a.stdout, b.stdout, "{cmd} {format}");
            assert!(!a.stdout.contains(&b'\r'));
        }
    }
}

#[test]
fn csv_has_metadata_and_fixed_keyrate_columns() {
    let out = run(&["keyrate", "--scenario", scenario("ta-far.toml").to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# tool: mcf-qkd "));
    assert!(text.contains("# fiber_preset: ta-mcf-2018\n"));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("length_km,eta,Y0,Q_mu,E_mu,Q1,e1,R_per_gate,R_bps"));
}

#[test]
fn json_output_parses() {
    let out = run(&["plan", "--scenario", scenario("plan-ta.toml").to_str().unwrap(), "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["metadata"]["command"], "plan");
    assert_eq!(v["plan"]["grid"].as_array().unwrap().len(), 7);
    assert!(v["plan"]["achieved_key_rate_bps"].as_f64().unwrap() >= 2000.0);
    assert_eq!(v["scenario"]["fiber"]["preset"], "ta-mcf-2018");
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("r.csv");
    let out = run(&[
        "sweep-distance",
        "--scenario",
        scenario("smf-baseline.toml").to_str().unwrap(),
        "--out",
        target.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert!(std::fs::read_to_string(target).unwrap().contains("R_bps"));
}

#[test]
fn smf_baseline_sweep_is_monotone() {
    let out = run(&["sweep-distance", "--scenario", scenario("smf-baseline.toml").to_str().unwrap()]);
    let rows = csv_rows(&out.stdout);
    let r: Vec<f64> = column(&rows, "R_bps").iter().map(|s| s.parse().unwrap()).collect();
    assert!(r.len() >= 5);
    assert!(r.windows(2).all(|w| w[1] <= w[0]), "{r:?}");
    assert!(r[0] > 0.0);
}

#[test]
fn near_wavelength_collapses_before_five_km() {
    let out = run(&["sweep-distance", "--scenario", scenario("nt-near-distance.toml").to_str().unwrap()]);
    let rows = csv_rows(&out.stdout);
    let lens = column(&rows, "length_km");
    let status = column(&rows, "status");
    let first_zero = lens.iter().zip(&status).find(|(_, s)| *s == "no_key").map(|(l, _)| l.parse::<f64>().unwrap());
    assert!(first_zero.unwrap() <= 5.0);
}

#[test]
fn saturated_points_are_labelled() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    std::fs::write(
        &path,
        "[fiber]\npreset = \"smf-baseline\"\n[[allocation.channels]]\ncore = 0\nwavelength_nm = 1552.0\nlaunch_dbm = -3.0\n\
         [sweep]\ndistances_km = [1.0, 2.0]\n",
    )
    .unwrap();
    let out = run(&["sweep-distance", "--scenario", path.to_str().unwrap()]);
    assert!(out.status.success());
    let rows = csv_rows(&out.stdout);
    assert_eq!(column(&rows, "status"), ["saturated", "saturated"]);
    assert_eq!(column(&rows, "R_bps"), ["0.0", "0.0"]);
    // a single keyrate evaluation that saturates is a model error
    let out = run(&["keyrate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let bad_field = write("a.toml", "[fiber]\npreset = \"nt-mcf-2018\"\nbogus = 1\n");
    let quantum = write(
        "b.toml",
        "[fiber]\npreset = \"nt-mcf-2018\"\n[[allocation.channels]]\ncore = 0\nwavelength_nm = 1550.0\nlaunch_dbm = -4.0\n",
    );
    let no_budget = write("c.toml", "[fiber]\npreset = \"nt-mcf-2018\"\n[planning]\nmin_key_rate_bps = 1e6\n");
    let ok = scenario("ta-far.toml");

    let code = |args: &[&str]| run(args).status.code();
    assert_eq!(code(&["keyrate", "--scenario", ok.to_str().unwrap()]), Some(0));
    assert_eq!(code(&["keyrate", "--scenario", bad_field.to_str().unwrap()]), Some(2));
    let out = run(&["keyrate", "--scenario", quantum.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("allocation.channels[0]"));
    assert_eq!(code(&["plan", "--scenario", no_budget.to_str().unwrap()]), Some(3));
    assert_eq!(code(&["sweep-distance", "--scenario", ok.to_str().unwrap()]), Some(2));
    assert_eq!(code(&["keyrate", "--scenario", "/nonexistent/s.toml"]), Some(4));
    assert_eq!(code(&["keyrate", "--scenario", ok.to_str().unwrap(), "--format", "xml"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(code(&["--version"]), Some(0));
}

fn temp_scenario(dir: &tempfile::TempDir, text: &str) -> PathBuf {
    let p = dir.path().join("s.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn plan_defers_near_wavelength_slots() {
    let dir = tempfile::tempdir().unwrap();
    let path = temp_scenario(
        &dir,
        "[fiber]\npreset = \"nt-mcf-2018\"\n[link]\ncalibration = \"mcf-2018\"\n[planning]\nmin_key_rate_bps = 4000.0\n",
    );
    let out = run(&["plan", "--scenario", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&out.stdout);
    let cores = column(&rows, "core");
    let wls = column(&rows, "wavelength_nm");
    let selected = column(&rows, "selected");
    let side: Vec<(bool, bool)> = cores
        .iter()
        .zip(&wls)
        .zip(&selected)
        .filter(|((c, _), _)| *c != "0")
        .map(|((_, w), s)| (w == "1552.0", s == "yes"))
        .collect();
    let last_far = side.iter().rposition(|(near, _)| !near).unwrap();
    let first_near = side.iter().position(|(near, _)| *near).unwrap();
    assert!(last_far < first_near);
    // the floor forces some near slots out while every far side-core slot stays
    assert!(side.iter().filter(|(near, _)| !near).all(|(_, s)| *s));
    assert!(side.iter().any(|(near, s)| *near && !s));
}

#[test]
fn ta_near_wavelength_leakage_is_twenty_db_below_nt() {
    let dir = tempfile::tempdir().unwrap();
    let total = |preset: &str| {
        let path = temp_scenario(
            &dir,
            &format!(
                "[fiber]\npreset = \"{preset}\"\n[link]\ncalibration = \"mcf-2018\"\n[allocation]\nlayout = \"side-cores\"\n\
                 wavelengths_nm = [1552.0]\nlaunch_dbm = -4.0\n"
            ),
        );
        let rows = csv_rows(&run(&["leakage", "--scenario", path.to_str().unwrap()]).stdout);
        let kinds = column(&rows, "kind");
        let hz = column(&rows, "detected_hz");
        let i = kinds.iter().position(|k| k == "total").unwrap();
        hz[i].parse::<f64>().unwrap() - 13.0
    };
    let (ta, nt) = (total("ta-mcf-2018"), total("nt-mcf-2018"));
    assert!(((nt / ta) - 100.0).abs() < 1e-6, "NT {nt} Hz, TA {ta} Hz");
}
