//! Acceptance criterion 8: detect is deterministic — identical config and
//! seed give bit-identical outputs, and the worker-thread count has no
//! effect on the bytes.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cardiokey"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cardiokey_acc_{name}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn acceptance_8_determinism() {
    let dir = workdir("determinism");
    let ph = dir.join("ph");
    let status = bin()
        .args([
            "phantom",
            "--out",
            ph.to_str().unwrap(),
            "--t",
            "20",
            "--dims",
            "48x48",
            "--seed",
            "11",
            "--noise-sigma",
            "0.02",
            "--spacing",
            "2.5",
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let mut outputs = Vec::new();
    for (label, threads) in [("repeat_a", "2"), ("repeat_b", "2"), ("one", "1"), ("eight", "8")] {
        let out = dir.join(label);
        let status = bin()
            .args([
                "detect",
                "--input",
                ph.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--view",
                "sax",
                "--seed",
                "11",
                "--threads",
                threads,
            ])
            .status()
            .unwrap();
        assert!(status.success(), "detect run {label} failed");
        outputs.push(out);
    }
    let reference_json = fs::read(outputs[0].join("keyframes.json")).unwrap();
    let reference_csv = fs::read(outputs[0].join("descriptor.csv")).unwrap();
    for out in &outputs[1..] {
        assert_eq!(
            fs::read(out.join("keyframes.json")).unwrap(),
            reference_json,
            "keyframes.json differs for {out:?}"
        );
        assert_eq!(
            fs::read(out.join("descriptor.csv")).unwrap(),
            reference_csv,
            "descriptor.csv differs for {out:?}"
        );
    }
    fs::remove_dir_all(&dir).unwrap();
    println!("acceptance 8 (determinism incl. --threads 1 vs 8): pass");
}
