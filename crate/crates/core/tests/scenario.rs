use std::path::Path;

use mcf_qkd::calibration::Calibration;
use mcf_qkd::fiber::FiberVariant;
use mcf_qkd::qkd::MuPolicy;
use mcf_qkd::scenario::{OutputFormat, Scenario, ScenarioError};

fn invalid_path(text: &str) -> String {
    match Scenario::parse(text) {
        Err(ScenarioError::Invalid { path, .. }) => path,
        other => panic!("expected a field error, got {other:?}"),
    }
}

#[test]
fn minimal_scenario_takes_defaults() {
    let s = Scenario::parse("[fiber]\npreset = \"nt-mcf-2018\"\n").unwrap();
    assert_eq!(s.link.fiber.variant, FiberVariant::NonTrench);
    assert_eq!(s.link.fiber.length_km, 2.5);
    assert_eq!(s.presets.detector.as_deref(), Some("detector-id210"));
    assert_eq!(s.link.qkd.mu, 0.5);
    assert_eq!(s.link.filter.knee_db(), Some(30.0));
    assert_eq!(s.link.extra_path_loss_db.0, 0.0);
    assert!(s.link.allocation.data_channels.is_empty());
    assert_eq!(s.output.format, OutputFormat::Csv);
    assert!(s.planning.is_none());
}

#[test]
fn calibration_then_explicit_fields() {
    let cal = Calibration::mcf_2018();
    let s = Scenario::parse("[fiber]\npreset = \"ta-mcf-2018\"\n[link]\ncalibration = \"mcf-2018\"\n").unwrap();
    assert_eq!(s.link.extra_loss_db.0, cal.extra_loss_db);
    assert_eq!(s.link.qkd.mu, cal.mu);
    assert_eq!(s.link.filter.knee_db(), Some(cal.knee_rejection_db));

    let s = Scenario::parse(
        "[fiber]\npreset = \"ta-mcf-2018\"\nlength_km = 10.0\n[link]\ncalibration = \"mcf-2018\"\nextra_loss_db = 1.5\n\
         [qkd]\nmu = 0.3\n[filter]\nknee_rejection_db = 40.0\n",
    )
    .unwrap();
    assert_eq!(s.link.fiber.length_km, 10.0);
    assert_eq!(s.link.fiber.xt_adjacent_db, 65.0);
    assert_eq!(s.link.extra_loss_db.0, 1.5);
    assert_eq!(s.link.extra_path_loss_db.0, cal.extra_path_loss_db);
    assert_eq!(s.link.qkd.mu, 0.3);
    assert_eq!(s.link.filter.knee_db(), Some(40.0));
}

#[test]
fn field_errors_name_their_path() {
    let q = "[fiber]\npreset = \"nt-mcf-2018\"\n[[allocation.channels]]\ncore = 0\nwavelength_nm = 1550.0\nlaunch_dbm = -4.0\n";
    assert_eq!(invalid_path(q), "allocation.channels[0]");
    assert_eq!(invalid_path("[fiber]\npreset = \"xx\"\n"), "fiber.preset");
    assert_eq!(invalid_path("[fiber]\nvariant = \"non-trench\"\n"), "fiber.length_km");
    assert_eq!(invalid_path("[detector]\n"), "fiber");
    assert_eq!(
        invalid_path("[fiber]\npreset = \"nt-mcf-2018\"\n[link]\ncalibration = \"nope\"\n"),
        "link.calibration"
    );
    assert_eq!(
        invalid_path("[fiber]\npreset = \"nt-mcf-2018\"\n[sweep]\ndistances_km = [2.0, 1.0]\n"),
        "sweep.distances_km"
    );
    assert_eq!(
        invalid_path("[fiber]\npreset = \"nt-mcf-2018\"\n[qkd]\nmu_search = [0.1, 1.0]\n"),
        "qkd.mu_search"
    );
    assert_eq!(
        invalid_path("[fiber]\npreset = \"nt-mcf-2018\"\n[allocation]\nlayout = \"side-cores\"\nlaunch_dbm = -4.0\n"),
        "allocation.wavelengths_nm"
    );
    assert_eq!(
        invalid_path("[fiber]\npreset = \"smf-baseline\"\n[[allocation.channels]]\ncore = 3\nwavelength_nm = 1530.0\nlaunch_dbm = -4.0\n"),
        "allocation"
    );
    assert_eq!(invalid_path("[fiber]\npreset = \"nt-mcf-2018\"\n[planning]\n"), "planning.min_key_rate_bps");
}

#[test]
fn unknown_fields_are_syntax_errors() {
    for text in ["[fiber]\npreset = \"nt-mcf-2018\"\ncolour = 1\n", "[fibre]\n", "not toml ["] {
        assert!(matches!(Scenario::parse(text), Err(ScenarioError::Syntax(_))), "{text}");
    }
}

#[test]
fn layouts_expand_and_merge_with_explicit_channels() {
    let s = Scenario::parse(
        "[fiber]\npreset = \"nt-mcf-2018\"\n[allocation]\nlayout = \"all-cores\"\nwavelengths_nm = [1530.0, 1550.0]\n\
         launch_dbm = -4.0\n[[allocation.channels]]\ncore = 2\nwavelength_nm = 1560.0\nlaunch_dbm = -6.0\n",
    )
    .unwrap();
    // 7 cores x 2 wavelengths, minus the quantum slot, plus one explicit channel
    assert_eq!(s.link.allocation.data_channels.len(), 14);
}

#[test]
fn optimize_mu_policy() {
    let s = Scenario::parse("[fiber]\npreset = \"nt-mcf-2018\"\n[qkd]\noptimize_mu = true\n").unwrap();
    assert_eq!(s.link.mu_policy, MuPolicy::Optimize { lo: 0.01, hi: 2.0 });
}

#[test]
fn planning_grid_excludes_quantum_slot() {
    let s = Scenario::parse("[fiber]\npreset = \"ta-mcf-2018\"\n[planning]\nmin_key_rate_bps = 1000.0\n").unwrap();
    // the default grid does not contain 1550 nm, so all 7 x 8 slots are candidates
    assert_eq!(s.planning.unwrap().candidates.len(), 56);
    let s = Scenario::parse(
        "[fiber]\npreset = \"ta-mcf-2018\"\n[planning]\nmin_key_rate_bps = 1.0\ncores = [0, 1]\nwavelengths_nm = [1550.0, 1552.0]\n",
    )
    .unwrap();
    assert_eq!(s.planning.unwrap().candidates.len(), 3);
}

#[test]
fn emit_then_parse_is_identity() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let s = Scenario::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let emitted = s.to_toml();
        let again = Scenario::parse(&emitted).unwrap_or_else(|e| panic!("{}: {e}\n{emitted}", path.display()));
        assert_eq!(again, s, "{}", path.display());
        assert_eq!(again.to_toml(), emitted);
        n += 1;
    }
    assert!(n >= 5);
}

#[test]
fn isolation_matrix_round_trips_with_inf() {
    let mut rows = Vec::new();
    for i in 0..7 {
        let row: Vec<String> =
            (0..7).map(|j| if i == j || (i > 0 && j > 0) { "inf".into() } else { "50.0".to_string() }).collect();
        rows.push(format!("[{}]", row.join(", ")));
    }
    let text = format!("[fiber]\npreset = \"nt-mcf-2018\"\nisolation_matrix_db = [{}]\n", rows.join(", "));
    let s = Scenario::parse(&text).unwrap();
    assert!(s.link.fiber.isolation_override.is_some());
    assert_eq!(Scenario::parse(&s.to_toml()).unwrap(), s);
}
