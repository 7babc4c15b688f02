use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use railsim::commands::sweep_header;
use railsim::config::{parse_config, parse_config_str, SimConfig};
use railsim::output::{read_series_csv, series_csv_bytes, SERIES_HEADER};
use railsim::vehicle::VehicleParams;
use railsim::{integrate_fixed, StateVector, TrackInput, TrackProfile, VehicleSystem};

fn railsim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_railsim"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path, config: &SimConfig) -> PathBuf {
    let path = dir.join("cfg.json");
    std::fs::write(&path, config.to_json()).unwrap();
    path
}

#[test]
fn simulate_defaults_writes_10001_rows() {
    let dir = tempfile::tempdir().unwrap();
    ok(&railsim(
        &["simulate", "--engine", "seq", "--output", "a.csv"],
        dir.path(),
    ));
    let text = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], SERIES_HEADER);
    assert_eq!(lines.len() - 1, 10001);
    assert!(lines.last().unwrap().starts_with("10,"));
}

#[test]
fn simulate_zero_track_stays_at_rest() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = SimConfig::default();
    config.track.amp1 = 0.0;
    config.track.amp2 = 0.0;
    config.simulation.t1 = 1.0;
    write_config(dir.path(), &config);
    ok(&railsim(
        &["simulate", "--config", "cfg.json", "--output", "z.csv"],
        dir.path(),
    ));
    let series =
        read_series_csv(&std::fs::read_to_string(dir.path().join("z.csv")).unwrap()).unwrap();
    assert_eq!(series.len(), 1001);
    assert!(series.states.iter().all(|x| x.0.iter().all(|&v| v == 0.0)));
}

#[test]
fn simulate_engines_write_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = SimConfig::default();
    config.simulation.t1 = 2.0;
    write_config(dir.path(), &config);
    for engine in ["seq", "par"] {
        let name = format!("{engine}.csv");
        ok(&railsim(
            &[
                "simulate", "--config", "cfg.json", "--engine", engine, "--output", &name,
            ],
            dir.path(),
        ));
    }
    let seq = std::fs::read(dir.path().join("seq.csv")).unwrap();
    let par = std::fs::read(dir.path().join("par.csv")).unwrap();
    assert_eq!(seq, par);
}

#[test]
fn csv_round_trips_bit_for_bit() {
    let params = VehicleParams::default();
    let system = VehicleSystem::new(
        &params,
        TrackInput::new(&params, &TrackProfile::default()).unwrap(),
    )
    .unwrap();
    let series = integrate_fixed(&system, &StateVector::ZERO, 0.0, 1.0, 1e-3, 7).unwrap();
    let text = String::from_utf8(series_csv_bytes(&series)).unwrap();
    let back = read_series_csv(&text).unwrap();
    assert_eq!(back.times.len(), series.times.len());
    for (a, b) in back.times.iter().zip(&series.times) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    for (a, b) in back.states.iter().zip(&series.states) {
        for i in 0..8 {
            assert_eq!(a.0[i].to_bits(), b.0[i].to_bits());
        }
    }
    for (a, b) in back.forcings.iter().zip(&series.forcings) {
        assert_eq!(a.eta, b.eta);
    }
}

#[test]
fn simulate_emits_plot_scripts() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = SimConfig::default();
    config.simulation.t1 = 0.5;
    write_config(dir.path(), &config);
    for kind in ["timeseries", "phase"] {
        ok(&railsim(
            &[
                "simulate", "--config", "cfg.json", "--plot", kind, "--output", "run.csv",
            ],
            dir.path(),
        ));
        let script = std::fs::read_to_string(dir.path().join(format!("run-{kind}.gp"))).unwrap();
        assert!(script.contains("'run.csv'"));
        for colour in ["red", "blue", "green"] {
            assert!(script.contains(colour));
        }
    }
}

fn sweep_rows(dir: &Path, name: &str) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(dir.join(name)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), sweep_header());
    lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn sweep_grid_has_zero_engine_differences() {
    let dir = tempfile::tempdir().unwrap();
    let out = railsim(
        &["sweep", "--speeds", "20,60,100,150", "--output", "s.csv"],
        dir.path(),
    );
    ok(&out);
    let rows = sweep_rows(dir.path(), "s.csv");
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert_eq!(row[3], "0");
        assert!(row[4].parse::<f64>().unwrap() <= 0.01);
        assert_eq!(row.last().unwrap(), "ok");
    }
}

#[test]
fn sweep_at_72_kmh_reports_nominal_frequency() {
    let dir = tempfile::tempdir().unwrap();
    ok(&railsim(
        &["sweep", "--speeds", "72", "--output", "s.csv"],
        dir.path(),
    ));
    let rows = sweep_rows(dir.path(), "s.csv");
    assert_eq!(rows.len(), 1);
    let omega: f64 = rows[0][2].parse().unwrap();
    assert!((omega - 5.0265).abs() <= 1e-3, "{omega}");
}

#[test]
fn sweep_without_speeds_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    ok(&railsim(&["sweep", "--output", "s.csv"], dir.path()));
    assert!(sweep_rows(dir.path(), "s.csv").is_empty());
}

#[test]
fn sweep_marks_failed_rows_and_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = railsim(
        &["sweep", "--speeds", "20,-5", "--output", "s.csv"],
        dir.path(),
    );
    assert!(!out.status.success());
    let rows = sweep_rows(dir.path(), "s.csv");
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].last().unwrap(), "ok");
    assert!(rows[1].last().unwrap().starts_with("error"));
}

#[test]
fn bench_reports_five_samples_and_median() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = SimConfig::default();
    config.simulation.t1 = 0.5;
    write_config(dir.path(), &config);
    ok(&railsim(
        &[
            "bench",
            "--config",
            "cfg.json",
            "--reps",
            "5",
            "--report",
            "bench.json",
        ],
        dir.path(),
    ));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("bench.json")).unwrap())
            .unwrap();
    assert_eq!(report["repetitions"], 5);
    let seq = &report["sequential"];
    let mut samples: Vec<f64> = seq["samples"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(samples.len(), 5);
    samples.sort_by(f64::total_cmp);
    assert_eq!(seq["median"].as_f64().unwrap(), samples[2]);
    for plan in report["plans"].as_array().unwrap() {
        assert_eq!(plan["accounting_ok"], true);
        assert_eq!(plan["bit_identical"], true);
        let workers = plan["per_worker"].as_array().unwrap();
        if plan["workers"] == 1 {
            assert_eq!(workers[0]["wait_fraction"]["median"].as_f64().unwrap(), 0.0);
        }
        let steps = workers[0]["steps"].clone();
        assert!(workers.iter().all(|w| w["steps"] == steps));
    }
}

#[test]
fn bad_config_names_offending_key() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"track": {"speed": -1}}"#).unwrap();
    let out = railsim(&["simulate", "--config", "bad.json"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("track.speed"));

    std::fs::write(dir.path().join("bad.json"), r#"{"track": {"sped": 1}}"#).unwrap();
    let out = railsim(&["simulate", "--config", "bad.json"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("sped"));
}

#[test]
fn config_round_trips() {
    let mut config = parse_config_str("{}").unwrap();
    assert_eq!(config, SimConfig::default());
    config.track.speed = 33.0;
    config.simulation.step = 5e-4;
    assert_eq!(parse_config_str(&config.to_json()).unwrap(), config);
}

#[test]
fn shipped_config_matches_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
    let config = parse_config(&path).unwrap();
    assert_eq!(config, SimConfig::default());
    assert_eq!(config.track.speed, 20.0);
    assert_eq!(config.track.wavelength, 25.0);
    assert_eq!(config.vehicle.wagon_mass, 57.0);
}

#[test]
fn validate_command_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = railsim(&["validate"], dir.path());
    ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("[PASS]").count(), 8, "{stdout}");
}
