use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sdwave::io::{config_hash, read_csv};
use serde_json::Value;

const VDP: &str = r#"{
  "domain": {"dim": 1},
  "modes": 32,
  "gamma": 1.0,
  "nonlinearity": "van_der_pol",
  "forcing": "sine1",
  "initial": {"u": [1.5, -0.09375, 0.0185185, -0.005859375], "ut": [1.0, 0.0625, 0.0123457, 0.00390625]},
  "time": {"T": 10.0, "dt": 1e-3, "record_every": 100},
  "output": {"run_id": "vdp"}
}"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn sdwave(args: &[&str], cfg: Option<&Path>, out: Option<&Path>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sdwave"));
    c.args(args).env_remove("SDWAVE_OUT");
    if let Some(cfg) = cfg {
        c.arg("--config").arg(cfg);
    }
    if let Some(out) = out {
        c.arg("--out").arg(out);
    }
    c.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_writes_fixed_schema_with_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "vdp.json", VDP);
    let o = sdwave(&["simulate"], Some(&cfg), Some(dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = String::from_utf8_lossy(&o.stdout);
    assert!(summary.contains("final_e1=") && summary.contains("max|res_energy|="), "{summary}");

    let (hash, table) = read_csv(&dir.path().join("vdp.trajectory.csv")).unwrap();
    assert_eq!(hash, config_hash(VDP.as_bytes()));
    assert_eq!(
        table.columns,
        ["t", "E", "v2", "Eu", "l2_u", "h1_u", "h2_u", "l2_ut", "h1_ut", "e1", "res_energy", "res_mult", "res_18"]
    );
    assert_eq!(table.rows.len(), 101);
    assert!(table.rows.iter().all(|r| r.len() == 13 && r.iter().all(|v| v.is_finite())));
    assert_eq!(table.rows.last().unwrap()[0], 10.0);

    let state: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("vdp.final_state.json")).unwrap()).unwrap();
    assert_eq!(state["config_sha256"], Value::String(hash));
    assert_eq!(state["final_state"]["u"].as_array().unwrap().len(), 32);
}

#[test]
fn diagnose_rerun_is_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "vdp.json", VDP);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = sdwave(&["diagnose"], Some(&cfg), Some(d));
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["vdp.diagnostics.csv", "vdp.diagnostics.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let j: Value = serde_json::from_slice(&fs::read(a.join("vdp.diagnostics.json")).unwrap()).unwrap();
    let max = j["max_abs_residuals"]["energy"].as_f64().unwrap();
    assert!(max < 1e-4, "{max}");
    assert!(j["equivalence"]["alpha"].as_f64().unwrap() > 0.0);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ens.json",
        r#"{"domain": {"dim": 1}, "modes": 16, "gamma": 1.0, "nonlinearity": "van_der_pol", "forcing": "sine1",
            "initial": {"ensemble": {"seed": 11, "scales": [1.0, 4.0], "per_scale": 2, "normalize_e1": true}},
            "time": {"T": 4.0, "dt": 2e-3, "record_every": 50},
            "attractor": {"T_transient": 3.0, "T_sample": 1.0, "stride": 100}}"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let oa = sdwave(&["attractor", "--threads", "1"], Some(&cfg), Some(&a));
    let ob = sdwave(&["attractor", "--threads", "3"], Some(&cfg), Some(&b));
    assert!(oa.status.success() && ob.status.success(), "{}", stderr(&oa));
    for f in ["ens.envelope.csv", "ens.attractor.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let s1 = sdwave(&["simulate", "--threads", "1"], Some(&cfg), Some(&a));
    let s4 = sdwave(&["simulate", "--threads", "4"], Some(&cfg), Some(&b));
    assert!(s1.status.success() && s4.status.success());
    for m in 0..4 {
        let f = format!("ens.m{m}.trajectory.csv");
        assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap(), "{f}");
    }
}

#[test]
fn env_var_overrides_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "short.json",
        r#"{"domain": {"dim": 1}, "modes": 8, "gamma": 1.0, "nonlinearity": "fhn_cubic",
            "initial": {"u": [0.2]}, "time": {"T": 0.1, "dt": 0.01}, "output": {"formats": ["csv"]}}"#,
    );
    let env_dir = dir.path().join("env");
    let flag_dir = dir.path().join("flag");
    let o = Command::new(env!("CARGO_BIN_EXE_sdwave"))
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&flag_dir)
        .env("SDWAVE_OUT", &env_dir)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(env_dir.join("short.trajectory.csv").exists());
    assert!(!env_dir.join("short.final_state.json").exists());
    assert!(!flag_dir.exists());
}

#[test]
fn config_errors_name_path_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(
        dir.path(),
        "unknown.json",
        r#"{"domain": {"dim": 1, "size": 3}, "modes": 8, "gamma": 1.0, "nonlinearity": "van_der_pol",
            "initial": {"u": [0.2]}, "time": {"T": 0.1, "dt": 0.01}}"#,
    );
    let o = sdwave(&["simulate"], Some(&unknown), Some(dir.path()));
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("unknown.json") && e.contains("domain") && e.contains("size"), "{e}");

    let seedless = write_config(
        dir.path(),
        "seedless.json",
        r#"{"domain": {"dim": 1}, "modes": 8, "gamma": 1.0, "nonlinearity": "van_der_pol",
            "initial": {"ensemble": {"scales": [1.0]}}, "time": {"T": 0.1, "dt": 0.01}}"#,
    );
    let o = sdwave(&["simulate"], Some(&seedless), Some(dir.path()));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));

    let bad_dt = write_config(
        dir.path(),
        "dt.json",
        r#"{"domain": {"dim": 1}, "modes": 8, "gamma": 1.0, "nonlinearity": "van_der_pol",
            "initial": {"u": [0.2]}, "time": {"T": 0.1, "dt": -1}}"#,
    );
    let o = sdwave(&["simulate"], Some(&bad_dt), Some(dir.path()));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`time.dt`"), "{}", stderr(&o));

    let o = sdwave(&["simulate"], Some(&dir.path().join("missing.json")), Some(dir.path()));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sign_condition_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "neg.json",
        r#"{"domain": {"dim": 1}, "modes": 8, "gamma": 1.0, "nonlinearity": {"f": [1.0], "g": [0.0, 0.0, 0.0, -1.0]},
            "initial": {"u": [0.2]}, "time": {"T": 0.1, "dt": 0.01}}"#,
    );
    let o = sdwave(&["diagnose"], Some(&cfg), Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("g'(u)"), "{}", stderr(&o));

    let fhn = write_config(
        dir.path(),
        "fhn_linear.json",
        r#"{"domain": {"dim": 1}, "modes": 8, "gamma": 1.0, "nonlinearity": "fhn_cubic",
            "initial": {"u": [0.2]}, "time": {"T": 0.1, "dt": 0.01}, "fhn": {"phi": [0.0, 1.0], "u0": [0.5]}}"#,
    );
    let o = sdwave(&["fhn"], Some(&fhn), Some(dir.path()));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fhn.phi") && stderr(&o).contains("p+q>0"), "{}", stderr(&o));
}

#[test]
fn unstable_step_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "blow.json",
        r#"{"domain": {"dim": 1}, "modes": 16, "gamma": 1.0, "nonlinearity": "van_der_pol",
            "initial": {"u": [20, 20, 20]}, "time": {"T": 5.0, "dt": 0.5}}"#,
    );
    let o = sdwave(&["simulate"], Some(&cfg), Some(dir.path()));
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("blow-up"));
    assert!(dir.path().join("blow.trajectory.csv").exists());
}

#[test]
fn fhn_and_decompose_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "fhn.json",
        r#"{"domain": {"dim": 1}, "modes": 16, "gamma": 1.0, "nonlinearity": "van_der_pol", "forcing": "sine1",
            "initial": {"u": [0.5, 0.1], "ut": [0.2]}, "time": {"T": 2.0, "dt": 1e-3, "record_every": 100},
            "fhn": {"phi": [0.0, -1.0, 0.0, 1.0], "u0": [0.5]}}"#,
    );
    let o = sdwave(&["fhn"], Some(&cfg), Some(dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    let j: Value = serde_json::from_slice(&fs::read(dir.path().join("fhn.fhn.json")).unwrap()).unwrap();
    assert!(j["sup_error"].as_f64().unwrap() < 1e-6);
    assert_eq!(j["N"], 16);
    assert_eq!(j["per_record_errors"].as_array().unwrap().len(), 21);

    let o = sdwave(&["decompose"], Some(&cfg), Some(dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    let j: Value = serde_json::from_slice(&fs::read(dir.path().join("fhn.decay.json")).unwrap()).unwrap();
    assert!(j["max_reconstruction_error"].as_f64().unwrap() < 1e-10);
    assert!(j["decay_fit"]["predicted_rate"].as_f64().unwrap() > 0.0);
    let (_, t) = read_csv(&dir.path().join("fhn.decomposition.csv")).unwrap();
    assert_eq!(t.columns[1], "recon_err");
    assert_eq!(t.rows.len(), 21);
}

#[test]
fn verify_suites() {
    let o = sdwave(&["verify", "nonsense"], None, None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown suite"));

    let o = sdwave(&["verify", "fhn"], None, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.lines().count(), 1);
    assert!(out.starts_with("PASS [11]"), "{out}");

    assert_eq!(sdwave(&["--help"], None, None).status.code(), Some(0));
    assert_eq!(sdwave(&["frobnicate"], None, None).status.code(), Some(1));
}
