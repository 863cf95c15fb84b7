use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gridfuse::npy;
use serde_json::Value;
use tempfile::TempDir;

const WIDTH: usize = 64;
const HEIGHT: usize = 48;
const CLASSES: usize = 3;

fn gridfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridfuse"))
        .args(args)
        .env_remove("GRIDFUSE_THREADS")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = gridfuse(args);
    assert!(
        out.status.success(),
        "gridfuse {args:?} exited {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn manifest(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Two nadir cameras 100 m above a flat patch of ground, a grid of ground
/// points, and per-camera score images whose class depends on the column.
struct Scene {
    dir: TempDir,
}

impl Scene {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let cam = |id: &str, x: f64| {
            format!(
                r#"{{"id": "{id}", "width": {WIDTH}, "height": {HEIGHT}, "f": 100.0, "cx": 0.0, "cy": 0.0,
                "b1": 0.0, "b2": 0.0, "k1": 0.0, "k2": 0.0, "k3": 0.0, "k4": 0.0, "k5": 0.0,
                "p1": 0.0, "p2": 0.0, "p3": 0.0, "p4": 0.0, "x": {x}, "y": 0.0, "z": 100.0,
                "omega": 0.0, "phi": 0.0, "kappa": 0.0}}"#
            )
        };
        fs::write(dir.path().join("cameras.json"), format!("[{}, {}]", cam("left", -2.0), cam("right", 2.0))).unwrap();

        let mut xyz = Vec::new();
        for i in 0..15 {
            for j in 0..11 {
                xyz.extend_from_slice(&[-14.0 + 2.0 * i as f64, -10.0 + 2.0 * j as f64, 0.0]);
            }
        }
        npy::write_file_f64(&dir.path().join("cloud.npy"), &[xyz.len() / 3, 3], &xyz).unwrap();

        fs::create_dir(dir.path().join("logits")).unwrap();
        for id in ["left", "right"] {
            let mut data = Vec::with_capacity(WIDTH * HEIGHT * CLASSES);
            for _v in 0..HEIGHT {
                for u in 0..WIDTH {
                    let class = u * CLASSES / WIDTH;
                    for c in 0..CLASSES {
                        data.push(if c == class { 2.0f32 } else { 0.0 });
                    }
                }
            }
            npy::write_file_f32(&dir.path().join("logits").join(format!("{id}.npy")), &[HEIGHT, WIDTH, CLASSES], &data)
                .unwrap();
        }
        Scene { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn transfer(&self, out: &str, extra: &[&str]) -> String {
        let (cams, cloud, logits, out) = (self.path("cameras.json"), self.path("cloud.npy"), self.path("logits"), self.path(out));
        let mut args = vec!["transfer", "--cameras", s(&cams), "--cloud", s(&cloud), "--logits", s(&logits), "--out", s(&out)];
        args.extend_from_slice(extra);
        ok(&args)
    }
}

#[test]
fn stats_from_count_table_reports_test_share() {
    let out = ok(&["stats", "--counts", s(&fixture("split_counts_train_test.csv"))]);
    assert!(out.contains("31.0"), "missing test share in:\n{out}");
    assert!(out.lines().count() > CLASSES, "{out}");
}

#[test]
fn stats_writes_csv_and_manifest() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("table.csv");
    ok(&["stats", "--counts", s(&fixture("split_counts_train_val.csv")), "--out", s(&csv)]);
    assert!(fs::read_to_string(&csv).unwrap().starts_with("class"));
    let m = manifest(&dir.path().join("table.csv.manifest.json"));
    assert_eq!(m["subcommand"], "stats");
    assert_eq!(m["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn stats_from_label_directory() {
    let dir = TempDir::new().unwrap();
    let labels = dir.path().join("labels");
    fs::create_dir(&labels).unwrap();
    npy::write_file_u8(&labels.join("a.npy"), &[4], &[0, 0, 1, 1]).unwrap();
    npy::write_file_u8(&labels.join("b.npy"), &[2], &[1, 1]).unwrap();
    let splits = dir.path().join("splits.txt");
    fs::write(&splits, "a train\nb test\n").unwrap();
    let out = ok(&["stats", "--labels", s(&labels), "--splits", s(&splits), "--classes", "2"]);
    // Class 1 has 2 training and 2 test points, so the test share is 50.0 %.
    assert!(out.contains("50.0"), "{out}");
}

#[test]
fn plan_writes_csv_and_manifest() {
    let dir = TempDir::new().unwrap();
    let pylons = dir.path().join("pylons.csv");
    fs::write(&pylons, "id,x,y,z_top\nP1,0,0,30\nP2,100,0,30\nP3,200,20,32\n").unwrap();
    let out = dir.path().join("plan.csv");
    let summary = ok(&["plan", "--pylons", s(&pylons), "--out", s(&out)]);
    assert!(summary.contains("3 pylons"), "{summary}");

    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,z,speed,heading,pass"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.len() > 20);
    for pass in ["forward", "turn", "backward"] {
        assert!(rows.iter().any(|r| r[5].eq_ignore_ascii_case(pass)), "no {pass} rows");
    }
    for r in &rows {
        let speed: f64 = r[3].parse().unwrap();
        assert!((2.0 - 1e-9..=10.0 + 1e-9).contains(&speed), "speed {speed}");
    }

    let m = manifest(&dir.path().join("plan.csv.manifest.json"));
    assert_eq!(m["subcommand"], "plan");
    assert_eq!(m["inputs"].as_array().unwrap().len(), 1);
    assert_eq!(m["results"]["waypoints"].as_u64().unwrap() as usize, rows.len());
}

#[test]
fn transfer_labels_points_and_writes_manifest() {
    let scene = Scene::new();
    let summary = scene.transfer("out", &["--scores"]);
    assert!(summary.contains("165 points"), "{summary}");

    let labels = npy::read_file(&scene.path("out/labels.npy")).unwrap().to_labels().unwrap();
    assert_eq!(labels.len(), 165);
    assert!(labels.iter().all(|&l| (l as usize) < CLASSES), "every ground point is seen: {labels:?}");
    // Points at the far left of the patch land in the left third of both
    // images; points at the far right land in the right third.
    assert_eq!(labels[0], 0);
    assert_eq!(labels[164], 2);

    let counts = npy::read_file(&scene.path("out/view_counts.npy")).unwrap();
    assert_eq!(counts.shape, vec![165]);
    let scores = npy::read_file(&scene.path("out/scores.npy")).unwrap();
    assert_eq!(scores.shape, vec![165, CLASSES]);

    let m = manifest(&scene.path("out/manifest.json"));
    assert_eq!(m["subcommand"], "transfer");
    assert_eq!(m["parameters"]["tau"], 0.15);
    assert_eq!(m["parameters"]["buffer"], 2);
    assert_eq!(m["inputs"].as_array().unwrap().len(), 4);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn transfer_is_byte_identical_across_runs_and_thread_counts() {
    let scene = Scene::new();
    scene.transfer("one", &["--threads", "1", "--scores", "--sampling", "bilinear", "--weighting", "inverse-distance"]);
    scene.transfer("four", &["--threads", "4", "--scores", "--sampling", "bilinear", "--weighting", "inverse-distance"]);
    scene.transfer("again", &["--threads", "4", "--scores", "--sampling", "bilinear", "--weighting", "inverse-distance"]);
    for f in ["labels.npy", "view_counts.npy", "scores.npy"] {
        let a = fs::read(scene.path("one").join(f)).unwrap();
        assert_eq!(a, fs::read(scene.path("four").join(f)).unwrap(), "{f} differs between 1 and 4 threads");
        assert_eq!(a, fs::read(scene.path("again").join(f)).unwrap(), "{f} differs between runs");
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_override_it() {
    let scene = Scene::new();
    fs::write(scene.path("cfg.json"), r#"{"tau": 0.4, "buffer": 1}"#).unwrap();
    let cfg = scene.path("cfg.json");
    scene.transfer("from_cfg", &["--config", s(&cfg)]);
    let m = manifest(&scene.path("from_cfg/manifest.json"));
    assert_eq!(m["parameters"]["tau"], 0.4);
    assert_eq!(m["parameters"]["buffer"], 1);

    scene.transfer("flag", &["--config", s(&cfg), "--tau", "0.3"]);
    let m = manifest(&scene.path("flag/manifest.json"));
    assert_eq!(m["parameters"]["tau"], 0.3);
    assert_eq!(m["parameters"]["buffer"], 1);
}

#[test]
fn custom_weights_are_read_from_json() {
    let scene = Scene::new();
    fs::write(scene.path("w.json"), r#"{"left": 1.0, "right": 3.0}"#).unwrap();
    let w = scene.path("w.json");
    scene.transfer("custom", &["--weighting", "custom", "--weights", s(&w)]);
    let m = manifest(&scene.path("custom/manifest.json"));
    assert_eq!(m["parameters"]["weighting"], "custom");

    fs::write(scene.path("bad.json"), r#"{"left": 1.0}"#).unwrap();
    let bad = scene.path("bad.json");
    let (cams, cloud, logits, out) = (scene.path("cameras.json"), scene.path("cloud.npy"), scene.path("logits"), scene.path("x"));
    let r = gridfuse(&[
        "transfer", "--cameras", s(&cams), "--cloud", s(&cloud), "--logits", s(&logits), "--out", s(&out),
        "--weighting", "custom", "--weights", s(&bad),
    ]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("right"));
}

#[test]
fn depthmap_and_project_outputs() {
    let scene = Scene::new();
    let (cams, cloud) = (scene.path("cameras.json"), scene.path("cloud.npy"));
    let dm = scene.path("depth");
    ok(&["depthmap", "--cameras", s(&cams), "--cloud", s(&cloud), "--out", s(&dm)]);
    for id in ["left", "right"] {
        let a = npy::read_file(&dm.join(format!("{id}.npy"))).unwrap();
        assert_eq!(a.shape, vec![HEIGHT, WIDTH]);
        let d = a.to_f64();
        let filled: Vec<f64> = d.iter().copied().filter(|v| v.is_finite()).collect();
        assert!(!filled.is_empty());
        assert!(filled.iter().all(|&v| (v - 100.0).abs() < 1e-4), "flat ground 100 m below the camera");
    }
    assert!(dm.join("manifest.json").exists());

    let csv = scene.path("proj.csv");
    ok(&["project", "--cameras", s(&cams), "--cloud", s(&cloud), "--out", s(&csv)]);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("point,camera,u,v,depth\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 165);
}

fn write_zone_dir(dir: &Path, zones: &[(&str, &[u8])]) {
    fs::create_dir_all(dir).unwrap();
    for (z, l) in zones {
        npy::write_file_u8(&dir.join(format!("{z}.npy")), &[l.len()], l).unwrap();
    }
}

#[test]
fn eval_prints_miou_and_writes_report() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt.npy");
    let pred = dir.path().join("pred.npy");
    npy::write_file_u8(&gt, &[6], &[0, 0, 1, 1, 2, 255]).unwrap();
    npy::write_file_u8(&pred, &[6], &[0, 1, 1, 1, 2, 0]).unwrap();
    let report = dir.path().join("report.json");
    let out = ok(&["eval", "--pred", s(&pred), "--gt", s(&gt), "--classes", "3", "--out", s(&report)]);
    // IoU: class 0 = 1/2, class 1 = 2/3, class 2 = 1.
    assert!(out.contains("mIoU: 72.22 %"), "{out}");
    let r = manifest(&report);
    assert!((r["miou"].as_f64().unwrap() - (0.5 + 2.0 / 3.0 + 1.0) / 3.0).abs() < 1e-12);
    assert!(dir.path().join("report.json.manifest.json").exists());
}

#[test]
fn submit_then_eval_round_trip() {
    let dir = TempDir::new().unwrap();
    let splits = dir.path().join("splits.txt");
    fs::write(&splits, "za train\nzb test\nzc test\n").unwrap();
    let pred = dir.path().join("pred");
    write_zone_dir(&pred, &[("zb", &[0, 1, 2, 3]), ("zc", &[4, 4])]);
    let gt = dir.path().join("gt");
    write_zone_dir(&gt, &[("zb", &[0, 1, 2, 3]), ("zc", &[4, 4])]);

    let zip = dir.path().join("sub.zip");
    ok(&["submit", "--pred", s(&pred), "--splits", s(&splits), "--out", s(&zip)]);
    let first = fs::read(&zip).unwrap();
    ok(&["submit", "--pred", s(&pred), "--splits", s(&splits), "--out", s(&zip)]);
    assert_eq!(first, fs::read(&zip).unwrap(), "archive bytes must be reproducible");

    let out = ok(&["eval", "--pred", s(&zip), "--gt", s(&gt), "--classes", "5"]);
    assert!(out.contains("mIoU: 100.00 %"), "{out}");

    // A zone missing from the predictions is a data error.
    let partial = dir.path().join("partial");
    write_zone_dir(&partial, &[("zb", &[0, 1, 2, 3])]);
    let r = gridfuse(&["submit", "--pred", s(&partial), "--splits", s(&splits), "--out", s(&zip)]);
    assert_eq!(r.status.code(), Some(3));
}

fn write_scores(path: &Path, rows: &[[f32; 2]]) {
    let flat: Vec<f32> = rows.iter().flatten().copied().collect();
    npy::write_file_f32(path, &[rows.len(), 2], &flat).unwrap();
}

#[test]
fn fuse_train_then_predict() {
    let dir = TempDir::new().unwrap();
    let n = 60;
    let mut img = Vec::new();
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let c = (i % 2) as u8;
        let sgn = if c == 0 { 1.0 } else { -1.0 };
        img.push([sgn * (1.0 + (i % 5) as f32 * 0.1), 0.0]);
        pts.push([0.0, -sgn * 0.5]);
        labels.push(c);
    }
    labels[7] = 255;
    let (ip, pp, lp) = (dir.path().join("img.npy"), dir.path().join("pts.npy"), dir.path().join("labels.npy"));
    write_scores(&ip, &img);
    write_scores(&pp, &pts);
    npy::write_file_u8(&lp, &[n], &labels).unwrap();

    let model = dir.path().join("model.bin");
    let train = ["fuse-train", "--image-logits", s(&ip), "--point-logits", s(&pp), "--labels", s(&lp)];
    let extra = ["--hidden", "8,8", "--epochs", "60", "--learning-rate", "0.05", "--seed", "3", "--out", s(&model)];
    let summary = ok(&[&train[..], &extra[..]].concat());
    assert!(summary.contains("59 samples (1 ignored)"), "{summary}");
    let first = fs::read(&model).unwrap();
    ok(&[&train[..], &extra[..]].concat());
    assert_eq!(first, fs::read(&model).unwrap(), "training is deterministic for a fixed seed");
    let m = manifest(&dir.path().join("model.bin.manifest.json"));
    // The history starts with the loss before the first epoch.
    assert_eq!(m["results"]["loss_history"].as_array().unwrap().len(), 61);

    let pred = dir.path().join("pred.npy");
    let probs = dir.path().join("probs.npy");
    ok(&[
        "fuse-predict", "--model", s(&model), "--image-logits", s(&ip), "--point-logits", s(&pp),
        "--out", s(&pred), "--probabilities", s(&probs),
    ]);
    let got = npy::read_file(&pred).unwrap().to_labels().unwrap();
    for (i, (&g, &l)) in got.iter().zip(&labels).enumerate() {
        if l != 255 {
            assert_eq!(g, l, "sample {i}");
        }
    }
    let p = npy::read_file(&probs).unwrap();
    assert_eq!(p.shape, vec![n, 2]);
    for row in p.to_f64().chunks(2) {
        assert!((row[0] + row[1] - 1.0).abs() < 1e-9);
    }
}

#[test]
fn c2c_summary_and_distances() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.npy"), dir.path().join("b.npy"));
    npy::write_file_f64(&a, &[3, 3], &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 5.0, 0.0, 0.0]).unwrap();
    npy::write_file_f64(&b, &[2, 3], &[0.0, 0.0, 1.0, 5.0, 0.0, 2.0]).unwrap();
    let d = dir.path().join("d.npy");
    let out = ok(&["c2c", "--a", s(&a), "--b", s(&b), "--out", s(&d)]);
    assert!(out.contains("points  3"), "{out}");
    assert!(out.contains("max     2.000000"), "{out}");
    let dist = npy::read_file(&d).unwrap().to_f64();
    assert!((dist[0] - 1.0).abs() < 1e-12);
    assert!((dist[1] - 2f64.sqrt()).abs() < 1e-12);
    assert!((dist[2] - 2.0).abs() < 1e-12);
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["bogus"][..],
        &["stats"][..],
        &["plan", "--pylons", "p.csv"][..],
        &["transfer", "--cameras", "c", "--cloud", "p", "--logits", "l", "--out", "o", "--tau", "-1"][..],
        &["--threads", "0", "plan", "--pylons", "p.csv", "--out", "o.csv"][..],
    ] {
        let r = gridfuse(args);
        assert_eq!(r.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&r.stderr));
    }
}

#[test]
fn data_errors_exit_3_and_name_the_file() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let r = gridfuse(&["plan", "--pylons", s(&missing), "--out", s(&dir.path().join("o.csv"))]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("nope.csv"));

    let one = dir.path().join("one.csv");
    fs::write(&one, "id,x,y,z_top\nP1,0,0,30\n").unwrap();
    let r = gridfuse(&["plan", "--pylons", s(&one), "--out", s(&dir.path().join("o.csv"))]);
    assert_eq!(r.status.code(), Some(3));

    let bad = dir.path().join("bad.npy");
    fs::write(&bad, b"not an npy file").unwrap();
    let r = gridfuse(&["eval", "--pred", s(&bad), "--gt", s(&bad)]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("bad.npy"));
}

#[test]
fn help_lists_defaults() {
    let out = ok(&["transfer", "--help"]);
    assert!(out.contains("[default: 0.15]"), "{out}");
    assert!(out.contains("[default: 2]"), "{out}");
    let out = ok(&["plan", "--help"]);
    assert!(out.contains("[default: 25]"), "{out}");
    assert!(ok(&["--version"]).starts_with("gridfuse "));
}
