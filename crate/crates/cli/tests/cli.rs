use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dqmap::errormap::{chi_full, gate_error, GateModel};
use dqmap::filters::ou_closed_form;
use dqmap::io::write_counts_csv;
use dqmap::tomography::{born_probs, CountRecord, TomographySetup};

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("dqmap-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn dqmap(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dqmap")).args(args).current_dir(cwd).output().unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn zero_noise_gives_zero_error() {
    let d = scratch("zero");
    write(&d.join("c.json"), r#"{"noise": {"dephasing": {"kind": "zero"}}, "drive": {"n_times": 20}}"#);
    let out = dqmap(&["predict", "--config", "c.json", "--out", "o"], &d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = table(&d.join("o/errors.csv"));
    assert_eq!(header, ["t", "D", "NC", "NM", "PT"]);
    for r in rows {
        assert!(r[1..].iter().all(|e| e.abs() < 1e-15), "{r:?}");
    }
}

#[test]
fn depolarizing_dominates_for_ou() {
    let d = scratch("ou");
    let out = dqmap(&["predict", "--out", "o"], &d);
    assert!(out.status.success());
    let (_, rows) = table(&d.join("o/errors.csv"));
    assert!(rows.iter().all(|r| r[1] > r[3]));
}

#[test]
fn validation_errors_exit_2() {
    let d = scratch("bad");
    write(&d.join("bad.json"), r#"{"drive": {"times": [2e-5, 1e-5]}}"#);
    assert_eq!(dqmap(&["predict", "--config", "bad.json"], &d).status.code(), Some(2));
    write(&d.join("typo.json"), r#"{"drive": {"omgea": 1.0}}"#);
    assert_eq!(dqmap(&["predict", "--config", "typo.json"], &d).status.code(), Some(2));
    write(&d.join("missing.json"), r#"{"tomography": {"counts": "nope.csv"}}"#);
    assert_eq!(dqmap(&["tomography", "--config", "missing.json"], &d).status.code(), Some(2));

    write(&d.join("counts.csv"), "state,basis,time_s,n_plus,n_minus\n0,x,1e-5,50,50\n0,y,1e-5,50,50\n");
    write(&d.join("partial.json"), r#"{"tomography": {"counts": "counts.csv"}}"#);
    let out = dqmap(&["tomography", "--config", "partial.json"], &d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing state/basis"));
}

#[test]
fn numerical_failure_exits_3() {
    let d = scratch("num");
    // Fully depolarized pulses leave no decay to fit.
    write(&d.join("c.json"), r#"{"rb": {"noise": {"kind": "depolarizing", "p": 0.75}, "n_seq": 5, "max_length": 8}}"#);
    assert_eq!(dqmap(&["rb", "--config", "c.json"], &d).status.code(), Some(3));
}

#[test]
fn identical_seeds_give_identical_bytes() {
    let d = scratch("det");
    write(&d.join("c.json"), r#"{"simulation": {"m_mc": 300, "n_haar": 50}, "drive": {"n_times": 10}}"#);
    for dir in ["a", "b"] {
        assert!(dqmap(&["validate", "--config", "c.json", "--out", dir, "--seed", "9"], &d).status.success());
        assert!(dqmap(&["rb", "--config", "c.json", "--out", dir, "--seed", "9", "--threads", "1"], &d).status.success());
    }
    for f in ["validate.csv", "validate.json", "rb.csv", "rb_fit.json"] {
        assert_eq!(std::fs::read(d.join("a").join(f)).unwrap(), std::fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

fn synthetic_psd(dir: &Path) {
    let mut text = String::from("freq_hz,psd_one_sided\n");
    for k in 0..120 {
        let f = 100.0 * 1.08f64.powi(k);
        let line = if (4.9e3..5.1e3).contains(&f) { 1e3 } else { 0.0 };
        text.push_str(&format!("{f:.12e},{:.12e}\n", 3e3 / f + 0.2 + line));
    }
    write(&dir.join("psd.csv"), &text);
    write(
        &dir.join("psd.json"),
        r#"{"low_plateau": 30.0, "high_plateau": 0.2, "excluded_bands": [[4.8e3, 5.2e3]], "units": "one_sided_hz"}"#,
    );
}

#[test]
fn ingested_psd_is_continuous_and_unit_invariant() {
    let d = scratch("psd");
    synthetic_psd(&d);
    let out = dqmap(&["ingest-psd", "--csv", "psd.csv", "--sidecar", "psd.json", "--out", "ing"], &d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("ing/ingest.json")).unwrap()).unwrap();
    assert!(summary["max_edge_jump"].as_f64().unwrap() < 1.01);

    let grid = "[6283.185307179586, 31415.926535897932, 125663.70614359173, 628318.5307179586]";
    let cfg = |csv: &str, side: &str| {
        format!(
            r#"{{"noise": {{"dephasing": {{"kind": "tabulated", "csv": "{csv}", "sidecar": "{side}"}}}},
                "drive": {{"n_times": 5, "omega_grid": {grid}}}}}"#
        )
    };
    write(&d.join("hz.json"), &cfg("psd.csv", "psd.json"));
    write(&d.join("rad.json"), &cfg("ing/psd_two_sided.csv", "ing/psd_two_sided.json"));
    assert!(dqmap(&["predict", "--config", "hz.json", "--out", "hz"], &d).status.success());
    assert!(dqmap(&["predict", "--config", "rad.json", "--out", "rad"], &d).status.success());
    let (_, a) = table(&d.join("hz/pi_pulse.csv"));
    let (_, b) = table(&d.join("rad/pi_pulse.csv"));
    for (ra, rb) in a.iter().zip(&b) {
        for (x, y) in ra.iter().zip(rb) {
            assert!((x - y).abs() <= 1e-10 * x.abs(), "{x} vs {y}");
        }
    }
    // Falling PSD: faster π pulses pick up less error.
    for k in 1..4 {
        assert!(a.windows(2).all(|w| w[1][k] < w[0][k]));
    }
}

#[test]
fn non_monotone_psd_rejected() {
    let d = scratch("psdbad");
    write(&d.join("p.csv"), "freq_hz,psd_one_sided\n1,1\n3,1\n2,1\n");
    write(&d.join("p.json"), r#"{"low_plateau": 1.0, "high_plateau": 0.0}"#);
    assert_eq!(dqmap(&["ingest-psd", "--csv", "p.csv", "--sidecar", "p.json"], &d).status.code(), Some(2));
}

#[test]
fn exact_counts_recover_model_error() {
    let d = scratch("tomo");
    let (c, tau, rabi) = (1.6e9, 5e-4, 2.0 / 5e-4);
    let setup = TomographySetup::new();
    let times = [0.3 * tau, 1.1 * tau];
    let mut recs = Vec::new();
    for &t in &times {
        let probs = born_probs(&chi_full(&ou_closed_form(c, tau, rabi, t), false), &setup);
        let mut rec = CountRecord { time: t, counts: [[(0, 0); 3]; 4] };
        for s in 0..4 {
            for b in 0..3 {
                let n = |p: f64| (3e13 * p).round() as u64;
                rec.counts[s][b] = (n(probs[s][2 * b]), n(probs[s][2 * b + 1]));
            }
        }
        recs.push(rec);
    }
    let mut f = std::fs::File::create(d.join("counts.csv")).unwrap();
    write_counts_csv(&mut f, &recs).unwrap();
    write(
        &d.join("c.json"),
        &format!(r#"{{"drive": {{"omega": {rabi}}}, "tomography": {{"counts": "counts.csv", "chain_steps": 200}}}}"#),
    );
    let out = dqmap(&["tomography", "--config", "c.json", "--out", "o"], &d);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("o/tomography.json")).unwrap()).unwrap();
    for (k, &t) in times.iter().enumerate() {
        let expect = gate_error(&ou_closed_form(c, tau, rabi, t), GateModel::NM);
        let got = res[k]["mle"]["gate_error"].as_f64().unwrap();
        assert!((got - expect).abs() < 1e-7, "{got} vs {expect}");
    }
}

#[test]
fn dump_config_is_complete() {
    let d = scratch("dump");
    let out = dqmap(&["predict", "--dump-config", "--seed", "4"], &d);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["simulation"]["seed"], 4);
    assert_eq!(v["noise"]["dephasing"]["kind"], "ou");
    assert!(v["tomography"]["shots"].is_u64());
}
