use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use apstab_core::model::{ActivationSpec, NetworkModel, QuasiPeriodicSignal};
use apstab_core::presets;
use serde_json::Value;

fn apstab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apstab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_model(dir: &Path, model: &NetworkModel) -> PathBuf {
    let path = dir.join(format!("{}.json", model.name));
    fs::write(&path, serde_json::to_string_pretty(model).unwrap()).unwrap();
    path
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn run_cmd(cmd: &str, model: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--model", model.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    apstab(&args)
}

#[test]
fn certify_scalar_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), &presets::scalar_atom(0.0));
    let out = run_cmd("certify", &model, dir.path(), &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cert = read_json(dir.path().join("scalar-atom.certificate.json"));
    assert_eq!(cert["feasible"], true);
    assert!((cert["beta"].as_f64().unwrap() - 1.0).abs() < 1e-5);
    assert_eq!(cert["method"], "spectral");
    assert_eq!(cert["pointwise_checked"], true);
    assert!(cert["pointwise_min_slack"].as_f64().is_some());
    assert_eq!(cert["xi"].as_array().unwrap().len(), 1);
}

#[test]
fn certify_reports_infeasible_model() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = presets::scalar_atom(0.0);
    m.a[0][0] = QuasiPeriodicSignal::constant(3.0);
    let model = write_model(dir.path(), &m);
    let out = run_cmd("certify", &model, dir.path(), &[]);
    assert_eq!(code(&out), 2);
    let cert = read_json(dir.path().join("scalar-atom.certificate.json"));
    assert_eq!(cert["feasible"], false);
    assert!(cert["spectral_radius_at_zero"].as_f64().unwrap() > 1.0);
}

#[test]
fn malformed_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = serde_json::to_string(&presets::scalar_atom(0.0)).unwrap();
    let truncated = dir.path().join("truncated.json");
    fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    assert_eq!(code(&run_cmd("certify", &truncated, dir.path(), &[])), 1);

    let mut value: Value = serde_json::from_str(&text).unwrap();
    value["d"][0]["offset"] = Value::String("two".into());
    let wrong = dir.path().join("wrong.json");
    fs::write(&wrong, value.to_string()).unwrap();
    let out = run_cmd("certify", &wrong, dir.path(), &[]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("d[0].offset"));

    let missing = dir.path().join("absent.json");
    assert_eq!(code(&run_cmd("simulate", &missing, dir.path(), &[])), 1);
}

#[test]
fn assumption_failure_exits_one_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = presets::scalar_atom(0.0);
    m.d[0] = QuasiPeriodicSignal::constant(-1.0);
    let model = write_model(dir.path(), &m);
    let out = run_cmd("certify", &model, dir.path(), &[]);
    assert_eq!(code(&out), 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("positive self-inhibition"), "{stderr}");
    assert_eq!(code(&run_cmd("simulate", &model, dir.path(), &[])), 1);
}

#[test]
fn simulate_writes_two_trajectories_with_expected_rows() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), &presets::scalar_atom(0.0));
    let out = run_cmd(
        "simulate",
        &model,
        dir.path(),
        &["--horizon", "1", "--step", "0.01", "--stride", "2"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["scalar-atom.trajectory.csv", "scalar-atom.trajectory-alt.csv"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert_eq!(text.lines().count(), 1 + 1 + 50);
        assert!(text.starts_with("t,u_1,du_1\n"));
    }
    let meta = read_json(dir.path().join("scalar-atom.simulation.json"));
    assert_eq!(meta["rows"], 51);
    assert!(meta["blow_up"].is_null());
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), &presets::periodic_network());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        for cmd in ["certify", "simulate"] {
            assert_eq!(code(&run_cmd(cmd, &model, out, &["--horizon", "5", "--seed", "7"])), 0);
        }
    }
    for name in [
        "periodic.certificate.json",
        "periodic.trajectory.csv",
        "periodic.trajectory-alt.csv",
        "periodic.simulation.json",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let other = dir.path().join("c");
    run_cmd("simulate", &model, &other, &["--horizon", "5", "--seed", "8"]);
    assert_ne!(
        fs::read(a.join("periodic.trajectory-alt.csv")).unwrap(),
        fs::read(other.join("periodic.trajectory-alt.csv")).unwrap()
    );
}

#[test]
fn diverging_model_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = presets::scalar_atom(0.0);
    m.d[0] = QuasiPeriodicSignal::constant(1.0);
    m.a[0][0] = QuasiPeriodicSignal::constant(3.0);
    m.activations.g[0] = ActivationSpec::identity();
    m.history = apstab_core::integrator::HistoryFunction::constant(vec![1.0]);
    let model = write_model(dir.path(), &m);
    let out = run_cmd("simulate", &model, dir.path(), &["--horizon", "30"]);
    assert_eq!(code(&out), 3);
    let meta = read_json(dir.path().join("scalar-atom.simulation.json"));
    let t = meta["blow_up"]["time"].as_f64().unwrap();
    // u grows like e^{2t} from 1 past 1e12
    assert!((t - 1e12f64.ln() / 2.0).abs() < 0.1, "{t}");
}

#[test]
fn analyze_certified_pair() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), &presets::scalar_atom(0.0));
    assert_eq!(code(&run_cmd("analyze", &model, dir.path(), &[])), 1);
    assert_eq!(code(&run_cmd("certify", &model, dir.path(), &[])), 0);
    assert_eq!(
        code(&run_cmd(
            "simulate",
            &model,
            dir.path(),
            &["--horizon", "12", "--seed", "3"]
        )),
        0
    );
    let out = run_cmd("analyze", &model, dir.path(), &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let report = read_json(dir.path().join("scalar-atom.report.json"));
    let rate = report["decay"]["fit"]["rate"].as_f64().unwrap();
    assert!(rate >= 0.9 * report["beta"].as_f64().unwrap());
    assert!(report["almost_period"].is_null());
    let distance = fs::read_to_string(dir.path().join("scalar-atom.distance.csv")).unwrap();
    assert!(distance.starts_with("t,distance\n"));

    assert_eq!(
        code(&run_cmd("analyze", &model, dir.path(), &["--rate-factor", "2"])),
        4
    );
    let report = read_json(dir.path().join("scalar-atom.report.json"));
    assert_eq!(report["passed"], false);
}

#[test]
fn analyze_constant_model_reports_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), &presets::constant_network());
    for cmd in ["certify", "simulate", "analyze"] {
        assert_eq!(code(&run_cmd(cmd, &model, dir.path(), &[])), 0, "{cmd}");
    }
    let report = read_json(dir.path().join("constant.report.json"));
    assert!(report["equilibrium"]["final_residual"].as_f64().unwrap() < 1e-8);
    assert!(report["equilibrium"]["newton_residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn demo_runs_all_three_models() {
    let dir = tempfile::tempdir().unwrap();
    let out = apstab(&["demo", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    for name in ["constant", "periodic", "quasi-periodic"] {
        let report = read_json(dir.path().join(format!("{name}.report.json")));
        assert_eq!(report["passed"], true, "{name}");
        assert!(dir.path().join(format!("{name}.model.json")).exists());
    }
    let periodic = read_json(dir.path().join("periodic.report.json"));
    assert_eq!(periodic["almost_period"]["evaluated"], true);
    let best = periodic["almost_period"]["best_omega"].as_f64().unwrap();
    assert!((best - std::f64::consts::TAU).abs() < 1e-3);
    assert!(periodic["almost_period"]["best_defect"].as_f64().unwrap() < 1e-3);
}
