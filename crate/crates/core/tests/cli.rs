use std::path::Path;
use std::process::{Command, Output};

use dr_blend::feature_store::{read_fvec, write_fvec, LabeledFeatureSet};
use dr_blend::fusion::{blend_dataset, BlendConfig};

fn drblend(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drblend"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(dir: &Path, separation: &str) {
    let out = drblend(&[
        "fixture",
        "--out",
        s(dir),
        "--n-per-class",
        "12",
        "--classes",
        "3",
        "--dims",
        "16,16,8",
        "--separation",
        separation,
        "--seed",
        "2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn fuse_matches_library_blend() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), "4");
    let out_path = dir.path().join("blend.fvec");
    let out = drblend(&[
        "fuse",
        "--fc1",
        s(&dir.path().join("fc1.fvec")),
        "--fc2",
        s(&dir.path().join("fc2.fvec")),
        "--third",
        s(&dir.path().join("third.fvec")),
        "--modes",
        "max,avg,avg",
        "--out",
        s(&out_path),
    ]);
    assert!(out.status.success());
    let fused = read_fvec(&out_path).unwrap();
    let expected = blend_dataset(
        &read_fvec(dir.path().join("fc1.fvec")).unwrap(),
        &read_fvec(dir.path().join("fc2.fvec")).unwrap(),
        &read_fvec(dir.path().join("third.fvec")).unwrap(),
        &BlendConfig::default(),
    )
    .unwrap();
    assert_eq!(fused, expected);
    assert_eq!(fused.dim(), 8);
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), "10");
    let model = dir.path().join("m.mlp");
    let data = dir.path().join("third.fvec");
    let out = drblend(&[
        "train",
        "--data",
        s(&data),
        "--out",
        s(&model),
        "-s",
        "dnn.hidden=16",
        "-s",
        "train.max_epochs=40",
        "-s",
        "train.lr=0.01",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = dir.path().join("eval.csv");
    let out = drblend(&[
        "eval",
        "--model",
        s(&model),
        "--data",
        s(&data),
        "--format",
        "csv",
        "--out",
        s(&csv),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let row = dr_blend::experiment::parse_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert!(row.accuracy > 90.0, "{}", row.accuracy);
    assert_eq!(row.confusion.len(), 3);
}

#[test]
fn experiment_writes_reports_and_report_verb_tabulates() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), "10");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "features.fc1 = fc1.fvec\nfeatures.fc2 = fc2.fvec\nfeatures.third = third.fvec\n\
         task = severity\nmodel = knn\nknn.k = 3\nreport.csv = out/knn.csv\nreport.text = out/knn.txt\n",
    )
    .unwrap();
    let out = drblend(&["experiment", "--config", s(&cfg), "--format", "csv"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = dir.path().join("out/knn.csv");
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        std::fs::read_to_string(&csv).unwrap()
    );
    assert!(dir.path().join("out/knn.txt").exists());

    let out = drblend(&["report", s(&csv)]);
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().nth(1).unwrap().starts_with("knn"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), "1");
    let fc1 = dir.path().join("fc1.fvec");

    // config contradiction
    let out = drblend(&[
        "experiment",
        "-s",
        &format!("features.fc1={}", s(&fc1)),
        "-s",
        "modality=fc1",
        "-s",
        "model=logreg",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // unknown key
    assert_eq!(
        drblend(&["experiment", "-s", "bogus=1"]).status.code(),
        Some(2)
    );

    // label-misaligned modality
    let third = read_fvec(dir.path().join("third.fvec")).unwrap();
    let mut labels = third.labels().to_vec();
    labels.rotate_left(1);
    let bad = LabeledFeatureSet::new(third.rows().to_vec(), labels, 3).unwrap();
    let bad_path = dir.path().join("bad.fvec");
    write_fvec(&bad, &bad_path).unwrap();
    let out = drblend(&[
        "experiment",
        "-s",
        &format!("features.fc1={}", s(&fc1)),
        "-s",
        &format!("features.fc2={}", s(&dir.path().join("fc2.fvec"))),
        "-s",
        &format!("features.third={}", s(&bad_path)),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alignment"));

    // not an FVEC file
    let junk = dir.path().join("junk.fvec");
    std::fs::write(&junk, b"XXXXjunk").unwrap();
    let out = drblend(&[
        "fuse",
        "--fc1",
        s(&junk),
        "--fc2",
        s(&junk),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(3));

    // missing file
    let out = drblend(&[
        "eval",
        "--model",
        s(&dir.path().join("none.mlp")),
        "--data",
        s(&fc1),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn fixture_rejects_bad_dims() {
    let dir = tempfile::tempdir().unwrap();
    let out = drblend(&["fixture", "--out", s(dir.path()), "--dims", "16,16,6"]);
    assert_eq!(out.status.code(), Some(3));
}
