//! End-to-end runs of the scenario harness.

use std::fs;
use std::path::Path;

use slabscalar::harness::{check_experiment, parse_scenario, run_experiment, Scenario};

fn scenario(text: &str) -> Scenario {
    parse_scenario(text).unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    rdr.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect()
}

const RANDOM_RIGID: &str = r#"{
    "name": "det",
    "grid": { "n1": 8, "n2": 4, "nz": 17 },
    "physics": { "beta_plus": 1.0, "beta_minus": "inf", "theta_bar": 1.0 },
    "velocity": { "family": "cellular", "amplitude": 0.5, "decay_rate": 1.0 },
    "initial": { "preset": "random_band_limited" },
    "run": { "t_end": 0.1, "dt": 0.001, "stride": 2 },
    "seed": 42
}"#;

#[test]
fn identical_seeds_give_identical_files() {
    let s = scenario(RANDOM_RIGID);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&s, Some(a.path())).unwrap();
    run_experiment(&s, Some(b.path())).unwrap();
    for f in ["trajectory.csv", "final_state.csv", "config.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn different_seeds_give_different_data() {
    let mut s = scenario(RANDOM_RIGID);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&s, Some(a.path())).unwrap();
    s.seed = 43;
    run_experiment(&s, Some(b.path())).unwrap();
    assert_ne!(fs::read(a.path().join("final_state.csv")).unwrap(), fs::read(b.path().join("final_state.csv")).unwrap());
}

#[test]
fn outputs_embed_resolved_config() {
    let s = scenario(RANDOM_RIGID);
    let dir = tempfile::tempdir().unwrap();
    let sum = run_experiment(&s, Some(dir.path())).unwrap();
    let first = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap().lines().next().unwrap().to_string();
    assert_eq!(first, format!("# config: {}", s.resolved_json()));
    for f in &sum.files {
        assert!(dir.path().join(f).exists(), "{f} listed but missing");
    }
}

#[test]
fn check_writes_nothing_and_matches_run() {
    let s = scenario(RANDOM_RIGID);
    let dir = tempfile::tempdir().unwrap();
    let run = run_experiment(&s, Some(dir.path())).unwrap();
    let check = check_experiment(&s).unwrap();
    assert_eq!(run.pass, check.pass);
    assert!(check.files.is_empty());
}

#[test]
fn eigenmode_trajectory_decays_at_principal_rate() {
    let s = scenario(
        r#"{"grid": {"n1": 4, "n2": 2, "nz": 129},
            "physics": {"beta_plus": "inf", "beta_minus": "inf"},
            "initial": {"preset": "vertical_eigenmode"},
            "run": {"t_end": 0.5, "dt": 0.0005}}"#,
    );
    let sum = check_experiment(&s).unwrap();
    assert!(sum.pass);
    let rate = sum.metrics["fitted_rate"];
    assert!((rate - std::f64::consts::PI.powi(2)).abs() < 1e-3 * rate, "rate {rate}");
}

#[test]
fn eigen_sweep_is_monotone_in_each_coefficient() {
    let s = scenario(
        r#"{"experiment": {"kind": "eigen_sweep", "beta_plus": [0, 0.5, 2, 8, "inf"], "beta_minus": [0.25, 4, "inf"], "dense_nz": 401}}"#,
    );
    let dir = tempfile::tempdir().unwrap();
    let sum = run_experiment(&s, Some(dir.path())).unwrap();
    assert!(sum.pass && sum.flags["monotone"] && sum.flags["above_lower_bound"]);
    let rows = read_csv(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 15);
    let mu = |bp: &str, bm: &str| -> f64 {
        rows.iter().find(|r| r[0] == bp && r[1] == bm).unwrap()[2].parse().unwrap()
    };
    for bm in ["0.25", "4", "inf"] {
        let seq: Vec<f64> = ["0", "0.5", "2", "8", "inf"].iter().map(|bp| mu(bp, bm)).collect();
        assert!(seq.windows(2).all(|w| w[1] >= w[0]), "{bm}: {seq:?}");
    }
}

#[test]
fn moving_insulated_run_conserves_weighted_mean() {
    let s = scenario(
        r#"{"grid": {"n1": 16, "n2": 2, "nz": 33},
            "regime": "moving",
            "velocity": {"family": "manufactured", "amplitude": 0.03, "decay_rate": 2.0, "c": 0.2},
            "surface": {"amplitude": 0.01},
            "initial": {"preset": "random_band_limited", "horizontal_modes": 1},
            "run": {"t_end": 0.3, "dt": 0.001},
            "seed": 3}"#,
    );
    let sum = check_experiment(&s).unwrap();
    assert!(sum.metrics["mean_drift"] < 1e-12, "drift {}", sum.metrics["mean_drift"]);
    let env = sum.envelope.expect("insulated moving runs carry an envelope");
    assert!(env.pass, "{env:?}");
    assert!(sum.pass);
}

#[test]
fn audit_reports_every_trial() {
    let s = scenario(
        r#"{"grid": {"n1": 8, "n2": 4, "nz": 17}, "physics": {"beta_plus": 0, "beta_minus": 0},
            "experiment": {"kind": "coercivity_audit", "trials": 6}, "seed": 9}"#,
    );
    let dir = tempfile::tempdir().unwrap();
    let sum = run_experiment(&s, Some(dir.path())).unwrap();
    assert!(sum.pass);
    assert_eq!(read_csv(&dir.path().join("audit.csv")).len(), 6);
}
