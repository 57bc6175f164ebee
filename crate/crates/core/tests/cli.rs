//! Stage contracts of the `faceparts` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use faceparts::pipeline::{self, dirs};
use faceparts::synth::{write_dataset, SynthParams};
use faceparts::Manifest;

fn faceparts(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_faceparts"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files_in(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

/// Two-subject dataset written once per test.
fn dataset(dir: &Path, keep: usize) -> PathBuf {
    let mut m = write_dataset(&dir.join("data"), 2, 5, &SynthParams::default()).unwrap();
    m.records.truncate(keep);
    let path = dir.join("data/subset.csv");
    m.write(&path).unwrap();
    path
}

#[test]
fn empty_manifest_gives_empty_output() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tmp.path().join("empty.csv");
    std::fs::write(&manifest, "subject_id,expression,intensity,texture_path,depth_path,landmarks_path\n").unwrap();
    let out = tmp.path().join("aligned");
    let r = faceparts(&["align", "--manifest", s(&manifest), "--out", s(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(files_in(&out).is_empty());
}

#[test]
fn one_sample_aligns_to_three_files() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = dataset(tmp.path(), 1);
    let out = tmp.path().join("aligned");
    let r = faceparts(&["align", "--manifest", s(&manifest), "--out", s(&out), "--jobs", "1", "--seed", "3"]);
    assert!(r.status.success());
    let names: Vec<String> = files_in(&out).iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["S001_angry_3_depth.pgm", "S001_angry_3_landmarks.txt", "S001_angry_3_texture.ppm"]);
}

#[test]
fn corrupt_landmarks_fail_only_their_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest_path = dataset(tmp.path(), 4);
    let manifest = Manifest::read(&manifest_path).unwrap();
    std::fs::write(&manifest.records[1].landmarks_path, "1 2\nthree 4\n").unwrap();
    let out = tmp.path().join("aligned");
    let r = faceparts(&["align", "--manifest", s(&manifest_path), "--out", s(&out)]);
    assert!(!r.status.success());
    let stderr = String::from_utf8_lossy(&r.stderr);
    assert!(stderr.contains(&manifest.records[1].sample_id()), "{stderr}");
    assert!(stderr.contains("3 processed, 1 failed"), "{stderr}");
    assert_eq!(files_in(&out).len(), 9);
}

#[test]
fn missing_stage_output_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = dataset(tmp.path(), 2);
    let aligned = tmp.path().join("aligned");
    std::fs::create_dir_all(&aligned).unwrap();
    let r = faceparts(&["parts", "--manifest", s(&manifest), "--in", s(&aligned), "--out", s(&tmp.path().join("parts"))]);
    assert!(!r.status.success());
    let expected = pipeline::aligned_texture(&aligned, "S001_angry_3");
    assert!(String::from_utf8_lossy(&r.stderr).contains(s(&expected)));

    let nowhere = tmp.path().join("nowhere");
    let r = faceparts(&["evaluate", "--manifest", s(&manifest), "--in", s(&nowhere), "--out", s(&tmp.path().join("r"))]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains(s(&nowhere)));
}

#[test]
fn stages_are_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = dataset(tmp.path(), 3);
    let run = |tag: &str| {
        let d = |n: &str| tmp.path().join(format!("{tag}_{n}"));
        for (cmd, input, out) in [("parts", d(dirs::ALIGNED), d(dirs::PARTS)), ("features", d(dirs::PARTS), d(dirs::FEATURES))] {
            if cmd == "parts" {
                assert!(faceparts(&["align", "--manifest", s(&manifest), "--out", s(&input), "--seed", "9"]).status.success());
            }
            assert!(faceparts(&[cmd, "--manifest", s(&manifest), "--in", s(&input), "--out", s(&out), "--seed", "9"]).status.success());
        }
        [dirs::ALIGNED, dirs::PARTS, dirs::FEATURES]
            .iter()
            .flat_map(|n| files_in(&d(n)))
            .map(|p| (p.file_name().unwrap().to_owned(), std::fs::read(&p).unwrap()))
            .collect::<Vec<_>>()
    };
    let (a, b) = (run("a"), run("b"));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn hog_source_bypasses_the_fusion_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let m = write_dataset(&tmp.path().join("data"), 4, 1, &SynthParams::default()).unwrap();
    let manifest = tmp.path().join("data/manifest.csv");
    let d = |n: &str| tmp.path().join(n);
    assert_eq!(m.records.len(), 52);
    assert!(faceparts(&["align", "--manifest", s(&manifest), "--out", s(&d("al"))]).status.success());
    assert!(faceparts(&["parts", "--manifest", s(&manifest), "--in", s(&d("al")), "--out", s(&d("pa"))]).status.success());
    let hog = ["--feature-source", "hog"];
    let r = faceparts(&[&["features", "--manifest", s(&manifest), "--in", s(&d("pa")), "--out", s(&d("hog"))][..], &hog].concat());
    assert!(r.status.success());
    assert!(d("hog").join(pipeline::SPLIT_FILE).exists());

    let r = faceparts(&[&["train-fusion", "--manifest", s(&manifest), "--in", s(&d("hog")), "--out", s(&d("m"))][..], &hog].concat());
    assert!(!r.status.success());

    let config = tmp.path().join("cfg.toml");
    std::fs::write(&config, "[protocol]\nn_tests = 3\nn_folds = 2\n").unwrap();
    let r = faceparts(&["evaluate", "--manifest", s(&manifest), "--in", s(&d("hog")), "--out", s(&d("rep")), "--config", s(&config)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stdout).contains("mean accuracy over 3 tests"));
    assert!(d("rep").join(pipeline::REPORT_JSON).exists());

    for (cmd, input, out) in [("pca", "hog", "pca"), ("svm", "pca", "svm")] {
        let r = faceparts(&[cmd, "--manifest", s(&manifest), "--in", s(&d(input)), "--out", s(&d(out)), "--config", s(&config)]);
        assert!(r.status.success(), "{cmd}: {}", String::from_utf8_lossy(&r.stderr));
    }
    assert!(d("svm").join("svm.fpt").exists());
}

#[test]
fn synth_and_ref_distance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("synth");
    let r = faceparts(&["synth", "--out", s(&out), "--subjects", "2", "--seed", "4"]);
    assert!(r.status.success());
    assert!(String::from_utf8_lossy(&r.stdout).contains("wrote 26 samples"));
    let r = faceparts(&["ref-distance", "--manifest", s(&out.join("manifest.csv")), "--batch", "10", "--seed", "1"]);
    assert!(r.status.success());
    let d: f64 = String::from_utf8_lossy(&r.stdout).trim().parse().unwrap();
    assert!((25.0..50.0).contains(&d), "{d}");
}

#[test]
fn bad_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("cfg.toml");
    std::fs::write(&config, "[parts]\npadd = 3\n").unwrap();
    let r = faceparts(&["synth", "--out", s(&tmp.path().join("x")), "--config", s(&config)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("padd"));
}
