use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use acceptorloss::config::ConfigTree;
use acceptorloss::formats::parse_s21_csv;
use acceptorloss_core::resonator::{
    photon_number, saturation_model, thermal_factor, SaturationFitParams,
};
use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn cli(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acceptorloss"))
        .current_dir(root())
        .env("ACCEPTORLOSS_OUT", out)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> Value {
    let o = cli(out, args);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    let command = args
        .iter()
        .find(|a| a.parse::<acceptorloss::commands::Command>().is_ok())
        .unwrap();
    read_json(&out.join(format!("{command}.json")))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn num(record: &Value, key: &str) -> f64 {
    record["outputs"][key]
        .as_f64()
        .unwrap_or_else(|| panic!("output {key} missing"))
}

#[test]
fn readme_examples_run() {
    let readme = fs::read_to_string(root().join("README.md")).unwrap();
    let mut in_block = false;
    let mut ran = 0;
    for line in readme.lines() {
        if line.starts_with("```") {
            in_block = line == "```sh";
            continue;
        }
        let Some(rest) = line.strip_prefix("acceptorloss ").filter(|_| in_block) else {
            continue;
        };
        let dir = tempfile::tempdir().unwrap();
        let args: Vec<&str> = rest.split_whitespace().collect();
        let o = cli(dir.path(), &args);
        assert!(
            o.status.success(),
            "`{line}` failed: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        ran += 1;
    }
    assert!(ran >= 10, "only {ran} examples found");
}

#[test]
fn undriven_steady_state() {
    let dir = tempfile::tempdir().unwrap();
    let r = ok(
        dir.path(),
        &[
            "--config",
            "configs/simulate_steady.toml",
            "simulate-steady",
        ],
    );
    for (k, want) in [
        ("rho11", 0.5),
        ("rho22", 0.5),
        ("rho33", 0.0),
        ("rho44", 0.0),
    ] {
        assert!((num(&r, k) - want).abs() < 1e-12, "{k}");
    }
}

#[test]
fn loss_estimate_reference_q() {
    let dir = tempfile::tempdir().unwrap();
    let r = ok(
        dir.path(),
        &["--config", "configs/loss_estimate.toml", "loss-estimate"],
    );
    assert!((num(&r, "q") / 1.16e6 - 1.0).abs() < 0.01);
}

#[test]
fn flags_override_file() {
    let dir = tempfile::tempdir().unwrap();
    let base = ok(
        dir.path(),
        &["--config", "configs/loss_estimate.toml", "loss-estimate"],
    );
    let doubled = ok(
        dir.path(),
        &[
            "--config",
            "configs/loss_estimate.toml",
            "loss-estimate",
            "--p-per-ghz",
            "0.06",
        ],
    );
    assert!((num(&base, "q") / num(&doubled, "q") - 2.0).abs() < 1e-12);
    let set = ok(
        dir.path(),
        &[
            "--config",
            "configs/loss_estimate.toml",
            "--set",
            "loss.p_per_ghz=0.06",
            "loss-estimate",
        ],
    );
    assert_eq!(num(&set, "q"), num(&doubled, "q"));
}

#[test]
fn field_power_sweep() {
    let one = tempfile::tempdir().unwrap();
    let many = tempfile::tempdir().unwrap();
    let args = ["--config", "configs/sweep_field_power.toml", "sweep"];
    assert!(cli(one.path(), &[&args[..], &["--workers", "1"]].concat())
        .status
        .success());
    assert!(cli(many.path(), &[&args[..], &["--workers", "8"]].concat())
        .status
        .success());
    let a = fs::read(one.path().join("sweep.json")).unwrap();
    assert_eq!(a, fs::read(many.path().join("sweep.json")).unwrap());
    assert_eq!(
        fs::read(one.path().join("sweep.csv")).unwrap(),
        fs::read(many.path().join("sweep.csv")).unwrap()
    );

    let records: Vec<Value> = serde_json::from_slice(&a).unwrap();
    assert_eq!(records.len(), 40);
    for (i, r) in records.iter().enumerate() {
        let p = &r["sweep_point"];
        assert_eq!(p["index"], i);
        assert_eq!(
            p["coordinates"]["lindblad.field_gauss"],
            if i < 20 { 0.0 } else { 30.0 }
        );
        let pin = p["coordinates"]["resonator.pin_dbm"].as_f64().unwrap();
        assert!((pin - (-140.0 + 80.0 * (i % 20) as f64 / 19.0)).abs() < 1e-9);
        assert!(r.get("error").is_none());
        let total: f64 = ["rho11", "rho22", "rho33", "rho44"]
            .iter()
            .map(|k| num(r, k))
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
    // in field the loss falls with power; at zero field it stays put
    assert!(num(&records[39], "relative_loss") < 0.5);
    assert!(num(&records[19], "relative_loss") > 0.99);
}

#[test]
fn logspace_sweep_follows_saturation_model() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cli(
        dir.path(),
        &["--config", "configs/sweep_saturation.toml", "sweep"]
    )
    .status
    .success());
    let records: Vec<Value> =
        serde_json::from_slice(&fs::read(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(records.len(), 25);
    let p = SaturationFitParams {
        tan_delta0: 1e-6,
        n_c: 30.0,
        beta: 0.6,
        a_t: thermal_factor(6e9, 0.02).unwrap(),
    };
    let mut last = f64::INFINITY;
    for r in &records {
        let pin_w = r["sweep_point"]["coordinates"]["resonator.pin_w"]
            .as_f64()
            .unwrap();
        let n = photon_number(pin_w * 10f64.powf(-8.5), 6e9, 2e5, 3e5).unwrap();
        let tan = num(r, "tan_delta");
        assert!((tan / saturation_model(n, &p) - 1.0).abs() < 1e-9);
        assert!(tan < last);
        last = tan;
    }
}

#[test]
fn sweep_keeps_failed_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "schema_version = 1\n[sweep]\ncommand = \"saturation-ratio\"\n\
         [[sweep.axes]]\nkey = \"lindblad.nbar\"\nvalues = [0.1, -1.0, 0.5, 1.0, 2.0]\n",
    )
    .unwrap();
    let o = cli(dir.path(), &["--config", cfg.to_str().unwrap(), "sweep"]);
    assert!(o.status.success());
    let records: Vec<Value> =
        serde_json::from_slice(&fs::read(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(records.len(), 5);
    assert_eq!(records[1]["error"]["kind"], "validation");
    for k in [0, 2, 3, 4] {
        assert!(records[k].get("error").is_none());
        assert!(num(&records[k], "ratio") > 1.0);
    }
}

#[test]
fn identical_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["--config", "configs/spectrum_build.toml", "spectrum-build"];
    assert!(cli(a.path(), &args).status.success());
    assert!(cli(b.path(), &[&args[..], &["--workers", "3"]].concat())
        .status
        .success());
    for f in ["spectrum-build.json", "spectrum-build_spectrum.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn spectrum_from_strain_file() {
    let dir = tempfile::tempdir().unwrap();
    let r = ok(
        dir.path(),
        &[
            "spectrum-build",
            "--strain-map",
            "configs/data/strain_map.csv",
        ],
    );
    assert_eq!(r["outputs"]["strain_source"], "file");
    assert!((num(&r, "total_bulk_participation") - 0.92).abs() < 1e-12);
    assert!((num(&r, "binned_weight") - 0.92).abs() < 1e-9);
    let curve = fs::read_to_string(dir.path().join("spectrum-build_spectrum.csv")).unwrap();
    assert!(curve.starts_with("bin_center_hz,p_per_hz\n"));
    assert_eq!(curve.lines().count(), 301);
}

#[test]
fn fit_from_file_recovers_trace_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let r = ok(dir.path(), &["--config", "configs/fit_s21.toml", "fit-s21"]);
    assert!((num(&r, "f0_hz") / 6e9 - 1.0).abs() < 1e-8);
    assert!((num(&r, "q") / 2e5 - 1.0).abs() < 0.01);
    assert!((num(&r, "qc") / 3e5 - 1.0).abs() < 0.01);
    assert_eq!(num(&r, "power_dbm_at_device"), -150.0);
    assert_eq!(r["curves"][0], "fit-s21_model.csv");
}

#[test]
fn polar_and_cartesian_traces_agree() {
    let cart = parse_s21_csv(&root().join("configs/data/s21_trace.csv")).unwrap();
    let polar = parse_s21_csv(&root().join("configs/data/s21_trace_polar.csv")).unwrap();
    assert_eq!(cart.frequencies_hz, polar.frequencies_hz);
    for (a, b) in cart.values.iter().zip(&polar.values) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn canonical_config_is_idempotent() {
    for name in [
        "sweep_field_power.toml",
        "loss_estimate.toml",
        "spectrum_build.toml",
        "sweep_saturation.toml",
    ] {
        let cfg = ConfigTree::load(&root().join("configs").join(name))
            .unwrap()
            .resolve()
            .unwrap();
        let text = cfg.canonical();
        let again = ConfigTree::parse(&text).unwrap().resolve().unwrap();
        assert_eq!(again, cfg, "{name}");
        assert_eq!(again.canonical(), text, "{name}");
        assert_eq!(again.hash(), cfg.hash());
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(dir.path(), &["--set", "dopant.bogus=1", "loss-estimate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cli(dir.path(), &["fit-s21", "--input", "configs/data/nope.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let one = dir.path().join("one.csv");
    fs::write(&one, "concentration_cm3,q\n1e11,1e8\n").unwrap();
    let o = cli(
        dir.path(),
        &["doping-fit", "--input", one.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(3));
    let r = read_json(&dir.path().join("doping-fit.json"));
    assert_eq!(r["error"]["kind"], "numerical");
}
