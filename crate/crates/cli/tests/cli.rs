//! End-to-end tests of the command-line surface, driving the built binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cardiokey"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cardiokey_cli_{name}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Little-endian f32 cvol with `t` copies of the same frame.
fn write_static_cvol(dir: &Path, t: usize, ny: usize, nx: usize) {
    fs::create_dir_all(dir).unwrap();
    let header = format!(
        r#"{{"dims": [{t}, {ny}, {nx}], "spacing_mm": [1.0, 1.0], "dtype": "f32le", "order": "t-major, then z, y, x"}}"#
    );
    fs::write(dir.join("header.json"), header).unwrap();
    let mut raw = Vec::with_capacity(t * ny * nx * 4);
    for _ in 0..t {
        for y in 0..ny {
            for x in 0..nx {
                let dy = y as f32 - ny as f32 / 2.0;
                let dx = x as f32 - nx as f32 / 2.0;
                let v = 0.2 + (-(dy * dy + dx * dx) / 30.0).exp();
                raw.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    fs::write(dir.join("data.raw"), raw).unwrap();
}

#[test]
fn phantom_runs_are_bit_identical() {
    let dir = workdir("phantom_bits");
    let a = dir.join("a");
    let b = dir.join("b");
    for out in [&a, &b] {
        let res = run(&[
            "phantom",
            "--out",
            out.to_str().unwrap(),
            "--profile",
            "normal",
            "--t",
            "40",
            "--dims",
            "64x64",
            "--seed",
            "7",
            "--noise-sigma",
            "0.01",
        ]);
        assert_success(&res);
    }
    for file in ["header.json", "data.raw", "truth.json"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file} differs between identical phantom runs"
        );
    }
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn phantom_rejects_short_sequences() {
    let dir = workdir("phantom_short");
    let res = run(&["phantom", "--out", dir.join("p").to_str().unwrap(), "--t", "5"]);
    assert!(!res.status.success());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn phantom_rejects_unknown_profile() {
    let dir = workdir("phantom_prof");
    let res = run(&[
        "phantom",
        "--out",
        dir.join("p").to_str().unwrap(),
        "--profile",
        "bogus",
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("bogus"));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn no_md_peak_truth_marks_md_coincident_with_pf() {
    let dir = workdir("phantom_nomd");
    let out = dir.join("p");
    let res = run(&[
        "phantom",
        "--out",
        out.to_str().unwrap(),
        "--profile",
        "no-md-peak",
        "--t",
        "30",
    ]);
    assert_success(&res);
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("truth.json")).unwrap()).unwrap();
    let kf = &truth["keyframes"];
    assert_eq!(kf["MD"]["index"], kf["PF"]["index"]);
    assert_eq!(kf["MD"]["status"], "fallback");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn malformed_header_names_the_offending_key() {
    let dir = workdir("badheader");
    let vol = dir.join("vol");
    fs::create_dir_all(&vol).unwrap();
    fs::write(
        vol.join("header.json"),
        r#"{"spacing_mm": [1.0, 1.0], "dtype": "f32le", "order": "t-major, then z, y, x"}"#,
    )
    .unwrap();
    fs::write(vol.join("data.raw"), []).unwrap();
    let res = run(&[
        "detect",
        "--input",
        vol.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&res.stderr).contains("dims"),
        "stderr must name the missing key: {}",
        String::from_utf8_lossy(&res.stderr)
    );
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn static_sequence_exits_with_degenerate_mask_code() {
    let dir = workdir("static");
    let vol = dir.join("vol");
    write_static_cvol(&vol, 6, 24, 24);
    let res = run(&[
        "detect",
        "--input",
        vol.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
        "--target-spacing",
        "1.0",
    ]);
    assert_eq!(res.status.code(), Some(3), "degenerate mask is exit 3");
    assert!(String::from_utf8_lossy(&res.stderr).contains("direction-change"));
    fs::remove_dir_all(&dir).unwrap();
}

fn quick_phantom(dir: &Path, seed: u64) -> PathBuf {
    let out = dir.join(format!("ph{seed}"));
    let res = run(&[
        "phantom",
        "--out",
        out.to_str().unwrap(),
        "--t",
        "25",
        "--dims",
        "48x48",
        "--seed",
        &seed.to_string(),
        "--spacing",
        "2.5",
        "--emit-fields",
    ]);
    assert_success(&res);
    out
}

#[test]
fn focus_choices_are_recorded_in_the_output() {
    let dir = workdir("focus");
    let ph = quick_phantom(&dir, 3);
    for focus in ["vol", "mse"] {
        let out = dir.join(format!("det_{focus}"));
        let res = run(&[
            "detect",
            "--fields",
            ph.join("fields").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--focus",
            focus,
        ]);
        assert_success(&res);
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("keyframes.json")).unwrap())
                .unwrap();
        assert_eq!(json["focus"]["kind"], focus);
        assert!(json["focus"]["coords"].as_array().unwrap().len() == 2);
        assert!(json["config"]["registration"]["lambda_smooth"] == 0.001);
    }
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn describe_emits_descriptor_artifacts() {
    let dir = workdir("describe");
    let ph = quick_phantom(&dir, 4);
    let out = dir.join("desc");
    let res = run(&[
        "describe",
        "--fields",
        ph.join("fields").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--focus",
        "explicit:23.5,23.5",
    ]);
    assert_success(&res);
    let csv = fs::read_to_string(out.join("descriptor.csv")).unwrap();
    assert!(csv.starts_with("frame,alpha_raw,alpha,magnitude,magnitude_normalized\n"));
    assert_eq!(csv.lines().count(), 26, "25 frames plus header");
    assert!(out.join("mask").join("data.raw").exists());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn detect_from_fields_matches_detect_from_volume() {
    let dir = workdir("fieldpath");
    let ph = quick_phantom(&dir, 5);
    let from_fields = dir.join("via_fields");
    let res = run(&[
        "detect",
        "--fields",
        ph.join("fields").to_str().unwrap(),
        "--out",
        from_fields.to_str().unwrap(),
    ]);
    assert_success(&res);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(from_fields.join("keyframes.json")).unwrap())
            .unwrap();
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ph.join("truth.json")).unwrap()).unwrap();
    // analytic fields recover the truth closely
    for name in ["ED", "MS", "ES", "PF", "MD"] {
        let got = json["keyframes"][name]["index"].as_i64().unwrap();
        let want = truth["keyframes"][name]["index"].as_i64().unwrap();
        let t = 25i64;
        let d = (got - want).rem_euclid(t).min((want - got).rem_euclid(t));
        assert!(d <= 1, "{name}: {got} vs {want}");
    }
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn detect_recovers_phantom_truth_through_registration() {
    let dir = workdir("detect_truth");
    let ph = quick_phantom(&dir, 9);
    let out = dir.join("det");
    let res = run(&[
        "detect",
        "--input",
        ph.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--view",
        "sax",
        "--emit-intermediates",
    ]);
    assert_success(&res);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("keyframes.json")).unwrap()).unwrap();
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ph.join("truth.json")).unwrap()).unwrap();
    for name in ["ED", "MS", "ES", "PF", "MD"] {
        let got = json["keyframes"][name]["index"].as_i64().unwrap();
        let want = truth["keyframes"][name]["index"].as_i64().unwrap();
        let t = 25i64;
        let d = (got - want).rem_euclid(t).min((want - got).rem_euclid(t));
        assert!(d <= 2, "{name}: detected {got}, truth {want}");
    }
    // intermediates exist
    assert!(out.join("fields").join("fields.json").exists());
    assert!(out.join("loss_trace.csv").exists());
    assert!(out.join("resampled").join("data.raw").exists());
    fs::remove_dir_all(&dir).unwrap();
}

fn truth_as_reference(truth_path: &Path, id: &str) -> serde_json::Value {
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(truth_path).unwrap()).unwrap();
    serde_json::json!({
        "cases": {
            id: {"T": truth["T"], "keyframes": truth["keyframes"]}
        }
    })
}

#[test]
fn evaluate_identity_gives_zero_table() {
    let dir = workdir("eval_zero");
    let ph = quick_phantom(&dir, 6);
    let preds = dir.join("preds");
    fs::create_dir_all(&preds).unwrap();
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ph.join("truth.json")).unwrap()).unwrap();
    fs::write(
        preds.join("c0.json"),
        serde_json::to_string(&serde_json::json!({
            "T": truth["T"], "keyframes": truth["keyframes"]
        }))
        .unwrap(),
    )
    .unwrap();
    let refs = dir.join("refs.json");
    fs::write(
        &refs,
        serde_json::to_string(&truth_as_reference(&ph.join("truth.json"), "c0")).unwrap(),
    )
    .unwrap();
    let out = dir.join("eval.csv");
    let res = run(&[
        "evaluate",
        "--predictions",
        preds.to_str().unwrap(),
        "--references",
        refs.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&res);
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.contains("all,5,0,0"), "pooled row must be zero: {csv}");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn evaluate_scores_the_cyclic_wrap() {
    let dir = workdir("eval_wrap");
    let preds = dir.join("preds");
    fs::create_dir_all(&preds).unwrap();
    let mk = |i: u64| {
        serde_json::json!({"index": i, "status": "detected"})
    };
    // prediction at frame 1, reference at T-1 = 29: cyclic distance 2
    let pred = serde_json::json!({
        "T": 30,
        "keyframes": {"ED": mk(1), "MS": mk(8), "ES": mk(12), "PF": mk(16), "MD": mk(24)}
    });
    let mut rf = pred.clone();
    rf["keyframes"]["ED"] = serde_json::json!({"index": 29, "status": "detected"});
    fs::write(preds.join("w.json"), serde_json::to_string(&pred).unwrap()).unwrap();
    let refs = dir.join("refs.json");
    fs::write(
        &refs,
        serde_json::to_string(&serde_json::json!({"cases": {"w": rf}})).unwrap(),
    )
    .unwrap();
    let out = dir.join("eval.csv");
    let res = run(&[
        "evaluate",
        "--predictions",
        preds.to_str().unwrap(),
        "--references",
        refs.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_success(&res);
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.contains("w,ED,29,1,2"), "wrap row missing: {csv}");
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn evaluate_rejects_missing_references_and_empty_dirs() {
    let dir = workdir("eval_missing");
    let preds = dir.join("preds");
    fs::create_dir_all(&preds).unwrap();
    let refs = dir.join("refs.json");
    fs::write(&refs, r#"{"cases": {}}"#).unwrap();
    // empty predictions dir
    let res = run(&[
        "evaluate",
        "--predictions",
        preds.to_str().unwrap(),
        "--references",
        refs.to_str().unwrap(),
        "--out",
        dir.join("eval.csv").to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    // prediction without a reference: the id must appear in the error
    fs::write(
        preds.join("orphan.json"),
        r#"{"T": 30, "keyframes": {
            "ED": {"index": 0, "status": "detected"},
            "MS": {"index": 8, "status": "detected"},
            "ES": {"index": 12, "status": "detected"},
            "PF": {"index": 16, "status": "detected"},
            "MD": {"index": 24, "status": "detected"}}}"#,
    )
    .unwrap();
    let res = run(&[
        "evaluate",
        "--predictions",
        preds.to_str().unwrap(),
        "--references",
        refs.to_str().unwrap(),
        "--out",
        dir.join("eval.csv").to_str().unwrap(),
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("orphan"));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = workdir("config_prec");
    let ph = quick_phantom(&dir, 8);
    let cfg = dir.join("cfg.json");
    fs::write(&cfg, r#"{"view": "fourch", "t_delta_alpha": 0.4, "sigma": 1.0}"#).unwrap();
    let out = dir.join("out");
    let res = run(&[
        "detect",
        "--fields",
        ph.join("fields").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--sigma",
        "2.0",
    ]);
    assert_success(&res);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("keyframes.json")).unwrap()).unwrap();
    // file overrides the fourch preset, flag overrides the file
    assert_eq!(json["config"]["view"], "fourch");
    assert_eq!(json["config"]["descriptor"]["t_delta_alpha"], 0.4);
    assert_eq!(json["config"]["descriptor"]["gaussian_sigma"], 2.0);
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = workdir("config_bad");
    let cfg = dir.join("cfg.json");
    fs::write(&cfg, r#"{"lambdaa": 0.1}"#).unwrap();
    let res = run(&[
        "describe",
        "--fields",
        dir.join("nofields").to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("lambdaa"));
    fs::remove_dir_all(&dir).unwrap();
}
