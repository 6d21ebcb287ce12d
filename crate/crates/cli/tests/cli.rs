use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ldls_core::io::{read_labels, write_calibration, write_labels, write_masks, write_point_cloud};
use ldls_core::synthetic::{render, SceneSpec, SyntheticScene};
use serde_json::Value;

fn ldls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldls"))
        .args(args)
        .output()
        .expect("binary runs")
}

struct Frame {
    _dir: tempfile::TempDir,
    root: PathBuf,
    scene: SyntheticScene,
}

impl Frame {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let scene = render(&SceneSpec::depth_step()).unwrap();
        write_point_cloud(&scene.cloud, root.join("cloud.bin")).unwrap();
        write_calibration(&scene.calib, root.join("calib.txt")).unwrap();
        write_masks(&scene.masks, root.join("masks.json")).unwrap();
        write_labels(&scene.truth, root.join("truth.txt")).unwrap();
        Frame {
            _dir: dir,
            root,
            scene,
        }
    }

    fn path(&self, name: &str) -> String {
        self.root.join(name).to_string_lossy().into_owned()
    }

    fn segment(&self, out: &str, extra: &[&str]) -> Output {
        let (cloud, calib, masks, out) = (
            self.path("cloud.bin"),
            self.path("calib.txt"),
            self.path("masks.json"),
            self.path(out),
        );
        let mut args = vec![
            "segment", "--cloud", &cloud, "--calib", &calib, "--masks", &masks, "--out", &out,
        ];
        args.extend_from_slice(extra);
        ldls(&args)
    }
}

fn evaluate_json(pred: &Path, truth: &Path, extra: &[&str]) -> Value {
    let (p, t) = (pred.to_string_lossy(), truth.to_string_lossy());
    let mut args = vec!["evaluate", "--pred", &p, "--truth", &t, "--json"];
    args.extend_from_slice(extra);
    let out = ldls(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn missing_calib_is_a_usage_error() {
    let out = ldls(&["segment", "--cloud", "a.bin", "--masks", "m.json", "--out", "o.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--calib"));
}

#[test]
fn unreadable_input_is_a_data_error() {
    let frame = Frame::new();
    let out = ldls(&[
        "segment",
        "--cloud",
        &frame.path("nope.bin"),
        "--calib",
        &frame.path("calib.txt"),
        "--masks",
        &frame.path("masks.json"),
        "--out",
        &frame.path("out.txt"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.bin"));
}

#[test]
fn identical_files_score_perfectly() {
    let frame = Frame::new();
    let truth = frame.root.join("truth.txt");
    let report = evaluate_json(&truth, &truth, &[]);
    for c in report["semantic"]["classes"].as_array().unwrap() {
        for key in ["precision", "recall", "iou"] {
            assert_eq!(c[key], 1.0);
        }
    }
    let instance = report["instance"].as_array().unwrap();
    let thresholds: Vec<f64> = instance.iter().map(|r| r["threshold"].as_f64().unwrap()).collect();
    assert_eq!(thresholds, vec![0.5, 0.7]);
    for r in instance {
        for row in r["rows"].as_array().unwrap() {
            assert_eq!(row["precision"], 1.0);
            assert_eq!(row["recall"], 1.0);
            assert_eq!(row["fn"], 0);
        }
    }
}

#[test]
fn direct_projection_labels_the_bleed() {
    let frame = Frame::new();
    let out = frame.segment("direct.txt", &["--direct-projection"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = frame.segment("full.txt", &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let n = frame.scene.cloud.len();
    let direct = read_labels(frame.root.join("direct.txt"), Some(n)).unwrap();
    let full = read_labels(frame.root.join("full.txt"), Some(n)).unwrap();
    // wall point just left of the object, inside the two-pixel mask bleed
    let wall = 20 * 64 + 21;
    assert_eq!(frame.scene.truth.instance_ids()[wall], 0);
    assert_eq!(direct.instance_ids()[wall], 1);
    assert_eq!(full.instance_ids()[wall], 0);
    assert_eq!(full.instance_ids(), frame.scene.truth.instance_ids());
}

#[test]
fn timing_lists_stages() {
    let frame = Frame::new();
    let out = frame.segment("out.txt", &["--timing", "--k", "6", "--box", "3"]);
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    for stage in ["read", "knn_graph", "pixel_graph", "diffuse", "outlier_removal", "write", "total"] {
        assert!(err.contains(stage), "missing {stage} in\n{err}");
    }
}

#[test]
fn bad_parameters_are_data_errors() {
    let frame = Frame::new();
    let out = frame.segment("out.txt", &["--box", "4"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn classes_by_name_and_custom_thresholds() {
    let frame = Frame::new();
    frame.segment("direct.txt", &["--direct-projection"]);
    let report = evaluate_json(
        &frame.root.join("direct.txt"),
        &frame.root.join("truth.txt"),
        &["--classes", "car", "--iou-threshold", "0.6"],
    );
    let classes = report["semantic"]["classes"].as_array().unwrap();
    assert_eq!(classes.len(), 1);
    assert_eq!(classes[0]["class_id"], 3);
    // 360 object points inside a 22 x 24 mask footprint
    let iou = classes[0]["iou"].as_f64().unwrap();
    assert!((iou - 360.0 / 528.0).abs() < 1e-12);
    let instance = report["instance"].as_array().unwrap();
    assert_eq!(instance.len(), 1);
    assert_eq!(instance[0]["rows"][0]["tp"], 1);
}

#[test]
fn evaluate_rejects_mismatched_clouds() {
    let frame = Frame::new();
    std::fs::write(frame.root.join("short.txt"), "0,0\n0,0\n").unwrap();
    let out = ldls(&[
        "evaluate",
        "--pred",
        &frame.path("short.txt"),
        "--truth",
        &frame.path("truth.txt"),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn table_output_marks_undefined_ratios() {
    let frame = Frame::new();
    let dir = &frame.root;
    std::fs::write(dir.join("bg.txt"), "0,0\n0,0\n0,0\n").unwrap();
    std::fs::write(dir.join("one.txt"), "# instance 1 2 1 pedestrian\n1,2\n0,0\n0,0\n").unwrap();
    let out = ldls(&[
        "evaluate",
        "--pred",
        &frame.path("bg.txt"),
        "--truth",
        &frame.path("one.txt"),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    // nothing predicted: precision undefined, recall 0
    let row = text.lines().find(|l| l.starts_with('2')).unwrap();
    assert!(row.contains(" - "), "{row}");
    assert!(row.contains("0.0000"), "{row}");
}

#[test]
fn hand_built_three_instance_files() {
    let dir = tempfile::tempdir().unwrap();
    // truth: two cars of 5 points; pred: 4 of the first, 3 of the second, 2 stray
    let truth = "# instance 1 1 5 car\n# instance 2 1 5 car\n".to_string()
        + &"1,1\n".repeat(5)
        + &"2,1\n".repeat(5)
        + &"0,0\n".repeat(2);
    let pred = "# instance 1 1 4 car\n# instance 2 1 3 car\n# instance 3 1 2 car\n".to_string()
        + &"1,1\n".repeat(4)
        + "0,0\n"
        + &"2,1\n".repeat(3)
        + &"0,0\n".repeat(2)
        + &"3,1\n".repeat(2);
    std::fs::write(dir.path().join("truth.txt"), truth).unwrap();
    std::fs::write(dir.path().join("pred.txt"), pred).unwrap();
    let report = evaluate_json(
        &dir.path().join("pred.txt"),
        &dir.path().join("truth.txt"),
        &["--iou-threshold", "0.7"],
    );
    let pairs = report["matching"]["pairs"].as_array().unwrap();
    let ious: Vec<f64> = pairs.iter().map(|p| p["iou"].as_f64().unwrap()).collect();
    assert_eq!(ious, vec![0.8, 0.6]);
    let row = &report["instance"][0]["rows"][0];
    assert_eq!((row["tp"].as_u64(), row["fp"].as_u64(), row["fn"].as_u64()), (Some(1), Some(2), Some(1)));
    assert_eq!(row["precision"].as_f64().unwrap(), 1.0 / 3.0);
    assert_eq!(row["recall"].as_f64().unwrap(), 0.5);
    // semantic: 9 predicted car points, 10 true, 7 shared
    let car = &report["semantic"]["classes"][0];
    assert_eq!(car["iou"].as_f64().unwrap(), 7.0 / 12.0);
}
