use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lqskin_core::geometry::CellId;
use lqskin_core::io::{from_versioned_json, network_from_json, read_series_csv, to_versioned_json};
use lqskin_core::logic::{GateOutputs, LogicAsset};
use lqskin_core::stimulus::{NoiseSettings, PerturbCoeffs, Press, Scenario};
use serde_json::Value;
use tempfile::TempDir;

fn lqskin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lqskin")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = lqskin(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = lqskin(args);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn write_scenario(path: &str, scenario: &Scenario) {
    fs::write(path, to_versioned_json(scenario).unwrap()).unwrap();
}

#[test]
fn gen_network_is_byte_identical() {
    let d = TempDir::new().unwrap();
    let (a, b) = (p(&d, "a.json"), p(&d, "b.json"));
    ok(&["gen-network", "--seed", "7", "--count", "25", "--out", &a]);
    ok(&["gen-network", "--seed", "7", "--count", "25", "--out", &b, "--svg", &p(&d, "n.svg")]);
    let (ta, tb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let net = network_from_json(std::str::from_utf8(&ta).unwrap()).unwrap();
    assert_eq!(net.nodes.len(), 25);
    assert!(fs::read_to_string(p(&d, "n.svg")).unwrap().starts_with("<svg"));
    let other = ok(&["gen-network", "--seed", "8", "--count", "25"]);
    assert_ne!(other.as_bytes(), &ta[..]);
}

#[test]
fn no_press_simulation_has_constant_resistance() {
    let d = TempDir::new().unwrap();
    let sc = p(&d, "scenario.json");
    write_scenario(&sc, &Scenario::default());
    let csv = p(&d, "s.csv");
    ok(&["simulate", "--scenario", &sc, "--csv", &csv, "--svg", &p(&d, "s.svg")]);
    let series = read_series_csv(fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(series.len(), 51);
    let r = series.resistance();
    assert!(r.iter().all(|&x| x == r[0]));
}

#[test]
fn simulate_then_localize_finds_the_cell() {
    let d = TempDir::new().unwrap();
    let sc = p(&d, "scenario.json");
    let cell: CellId = "I4".parse().unwrap();
    write_scenario(
        &sc,
        &Scenario {
            presses: vec![Press::new(cell, 100.0, 3.0, 8.0).unwrap()],
            duration_s: 14.0,
            noise: NoiseSettings::default(),
            seed: 9,
            ..Scenario::default()
        },
    );
    let csv = p(&d, "s.csv");
    ok(&["simulate", "--scenario", &sc, "--csv", &csv]);
    let report = p(&d, "r.json");
    let svg = p(&d, "heat.svg");
    ok(&["localize", "--series", &csv, "--baseline", "0:3,10:14", "--out", &report, "--svg", &svg]);
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let events = v["events"].as_array().unwrap();
    assert_eq!(events.len(), 1);
    let loc = &events[0]["localization"];
    assert_eq!(loc["family"], "BLUE");
    let top: Vec<&str> = loc["candidates"].as_array().unwrap().iter().take(3).map(|c| c["cell"].as_str().unwrap()).collect();
    assert!(top.contains(&"I4"), "{top:?}");
    assert!(fs::read_to_string(&svg).unwrap().contains("BLUE event"));
}

#[test]
fn logic_with_bundled_asset_reports_reference_gates() {
    let d = TempDir::new().unwrap();
    let out = p(&d, "gate.json");
    let stdout = ok(&["logic", "--threshold", "0.13", "--threshold", "5.79", "--out", &out]);
    assert!(stdout.contains("f = y"));
    assert!(stdout.contains("f = AND"));
    assert!(stdout.contains("x=1    0   1"));
    let v: Value = from_versioned_json(&fs::read_to_string(&out).unwrap()).unwrap();
    let t = v["thresholds"].as_array().unwrap();
    assert_eq!(t[0]["gate"], "y");
    assert_eq!(t[0]["truthTable"], serde_json::json!([false, true, false, true]));
    assert_eq!(t[1]["gate"], "AND");
    assert_eq!(t[1]["truthTable"], serde_json::json!([false, false, false, true]));
    let o: GateOutputs = serde_json::from_value(v["outputs"].clone()).unwrap();
    assert!(o.max_abs_difference(&GateOutputs::reference_levels()) < 0.05);
    assert_eq!(v["realizable"], serde_json::json!(["const-0", "AND", "y", "OR", "const-1"]));
}

#[test]
fn calibrate_writes_an_asset_logic_can_read() {
    let d = TempDir::new().unwrap();
    let asset = p(&d, "asset.json");
    ok(&[
        "calibrate",
        "--cell-a",
        "F6",
        "--cell-b",
        "I4",
        "--target",
        "-1.03,5.79,0.13,8.03",
        "--params",
        "inductanceFactor,footprintInductanceFactor,residualFraction,coupling",
        "--tolerance",
        "0.01",
        "--out",
        &asset,
    ]);
    let a: LogicAsset = from_versioned_json(&fs::read_to_string(&asset).unwrap()).unwrap();
    assert_eq!(a.cell_a.to_string(), "F6");
    let out = p(&d, "gate.json");
    ok(&["logic", "--asset", &asset, "--out", &out]);
    let v: Value = from_versioned_json(&fs::read_to_string(&out).unwrap()).unwrap();
    let o: GateOutputs = serde_json::from_value(v["outputs"].clone()).unwrap();
    assert!(o.max_abs_difference(&GateOutputs::reference_levels()) < 0.01);
}

#[test]
fn sweep_and_family_outputs() {
    let d = TempDir::new().unwrap();
    let csv = p(&d, "sweep.csv");
    ok(&["sweep", "--csv", &csv, "--svg", &p(&d, "sweep.svg"), "--iv-csv", &p(&d, "iv.csv")]);
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "freq_hz,R_ohm,X_ohm,Zmod_ohm,Zphase_deg");
    assert_eq!(lines.count(), 50);
    assert!(fs::read_to_string(p(&d, "iv.csv")).unwrap().starts_with("v_volt,i_amp"));

    let svg = p(&d, "fam.svg");
    let json = p(&d, "fam.json");
    ok(&["show-families", "--pair", "C-TR", "--out", &svg, "--json", &json]);
    assert!(fs::read_to_string(&svg).unwrap().contains("<svg"));
    let v: Value = from_versioned_json(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["pair"], "C-TR");
    assert_eq!(v["cells"].as_array().unwrap().len(), 320);
}

#[test]
fn malformed_files_name_the_field() {
    let d = TempDir::new().unwrap();
    let sc = p(&d, "bad.json");
    fs::write(&sc, r#"{"schemaVersion": 1, "presses": [], "durationSeconds": 3}"#).unwrap();
    let err = fails(&["simulate", "--scenario", &sc]);
    assert!(err.contains("durationSeconds"), "{err}");

    let mut good: Value = serde_json::from_str(&to_versioned_json(&Scenario::default()).unwrap()).unwrap();
    good["samplePeriodS"] = Value::from(-1.0);
    fs::write(&sc, good.to_string()).unwrap();
    let err = fails(&["simulate", "--scenario", &sc]);
    assert!(err.contains("samplePeriodS"), "{err}");

    let coeffs = p(&d, "coeffs.json");
    let mut c: Value = serde_json::from_str(&to_versioned_json(&PerturbCoeffs::default()).unwrap()).unwrap();
    c.as_object_mut().unwrap().remove("coupling");
    fs::write(&coeffs, c.to_string()).unwrap();
    let err = fails(&["logic", "--coeffs", &coeffs]);
    assert!(err.contains("coupling"), "{err}");

    let cfg = p(&d, "config.json");
    fs::write(&cfg, r#"{"schemaVersion": 1, "prot": 80}"#).unwrap();
    let err = fails(&["--config", &cfg, "sweep"]);
    assert!(err.contains("prot"), "{err}");

    let err = fails(&["simulate", "--scenario", &p(&d, "missing.json")]);
    assert!(err.contains("missing.json"), "{err}");
}

#[test]
fn unknown_subcommand_fails() {
    let err = fails(&["transmogrify"]);
    assert!(err.contains("transmogrify"));
    fails(&["logic", "--cell-a", "Q1", "--cell-b", "A1"]);
}

#[test]
fn config_file_supplies_defaults() {
    let d = TempDir::new().unwrap();
    let net = p(&d, "net.json");
    ok(&["gen-network", "--seed", "3", "--count", "20", "--out", &net]);
    let cfg = p(&d, "config.json");
    fs::write(&cfg, format!(r#"{{"schemaVersion": 1, "network": {net:?}, "electrodePair": "BL-TR"}}"#)).unwrap();
    let json = p(&d, "fam.json");
    ok(&["--config", &cfg, "show-families", "--out", &p(&d, "f.svg"), "--json", &json]);
    let v: Value = from_versioned_json(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["pair"], "BL-TR");
}

fn round_trip<T: serde::Serialize + serde::de::DeserializeOwned>(value: &T) {
    let first = to_versioned_json(value).unwrap();
    let back: T = from_versioned_json(&first).unwrap();
    assert_eq!(first, to_versioned_json(&back).unwrap());
}

#[test]
fn documents_round_trip_byte_identically() {
    round_trip(&PerturbCoeffs::default());
    round_trip(&Scenario {
        presses: vec![Press::new("L9".parse().unwrap(), 150.0, 1.5, 4.25).unwrap()],
        noise: NoiseSettings::default(),
        seed: 77,
        ..Scenario::default()
    });
    round_trip(&lqskin_core::logic::reference_levels_asset());
    let d = TempDir::new().unwrap();
    let net = p(&d, "net.json");
    ok(&["gen-network", "--seed", "11", "--out", &net]);
    let text = fs::read_to_string(&net).unwrap();
    let again = lqskin_core::io::network_to_json(&network_from_json(&text).unwrap()).unwrap();
    assert_eq!(text, again);
    assert!(Path::new(&net).exists());
}
