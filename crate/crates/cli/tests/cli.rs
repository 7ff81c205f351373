use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use herdtrack_core::io::{FramesFile, TracksFile};
use herdtrack_core::mask::BitMask;
use herdtrack_core::track::Track;

fn herdtrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_herdtrack"))
        .args(args)
        .env("HERDTRACK_LOG", "error")
        .output()
        .expect("spawn herdtrack")
}

fn ok(args: &[&str]) {
    let out = herdtrack(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_tracks(path: &Path, tracks: &[Track]) {
    std::fs::write(path, serde_json::to_string(&TracksFile::from_tracks(tracks)).unwrap()).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn evaluate(dir: &TempDir, pred: &[Track], gt: &[Track]) -> Value {
    let (p, g, o) = (dir.path().join("pred.json"), dir.path().join("gt.json"), dir.path().join("eval.json"));
    write_tracks(&p, pred);
    write_tracks(&g, gt);
    ok(&["evaluate", "--input", s(&p), "--gt", s(&g), "--out", s(&o)]);
    read(&o)
}

/// Two well separated squares per frame.
fn object(k: u32) -> BitMask {
    BitMask::rect(40, 20, 2 + 20 * k, 4, 10, 10)
}

#[test]
fn published_counts_fixture() {
    // 653 frames x 2 objects = 1306 ground-truth objects, 13 of them missed
    let dir = TempDir::new().unwrap();
    let mut gt = vec![Track::new(1), Track::new(2)];
    let mut pred = vec![Track::new(1), Track::new(2)];
    for f in 0..653u64 {
        for k in 0..2 {
            gt[k].insert(f, object(k as u32));
            if !(k == 1 && f < 13) {
                pred[k].insert(f, object(k as u32));
            }
        }
    }
    let v = evaluate(&dir, &pred, &gt);
    let t = &v["tracking"];
    assert_eq!(t["GT"], 1306);
    assert_eq!(t["FN"], 13);
    assert_eq!(t["FP"], 0);
    assert_eq!(t["IDSW"], 0);
    let mota = t["MOTA"].as_f64().unwrap();
    assert!((mota - 0.9900).abs() < 1e-4, "{mota}");
    assert!(v["provenance"]["inputs_sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn swap_fixture() {
    let dir = TempDir::new().unwrap();
    let mut gt = vec![Track::new(1), Track::new(2)];
    let mut pred = vec![Track::new(1), Track::new(2)];
    for f in 0..3u64 {
        for k in 0..2u32 {
            gt[k as usize].insert(f, object(k));
            // predicted labels swap after the first frame
            let shown = if f == 0 { k } else { 1 - k };
            pred[k as usize].insert(f, object(shown));
        }
    }
    let v = evaluate(&dir, &pred, &gt);
    assert_eq!(v["tracking"]["IDSW"], 2);
    let mota = v["tracking"]["MOTA"].as_f64().unwrap();
    assert!((mota - 0.6667).abs() < 1e-4, "{mota}");
}

#[test]
fn perfect_match_scores_one() {
    let dir = TempDir::new().unwrap();
    let mut gt = vec![Track::new(1), Track::new(2)];
    for f in 0..5u64 {
        for k in 0..2u32 {
            gt[k as usize].insert(f, object(k).translate(f as i64, 0));
        }
    }
    let v = evaluate(&dir, &gt, &gt);
    for key in ["MOTA", "MOTP"] {
        assert_eq!(v["tracking"][key], 1.0);
    }
    for key in ["J", "F", "JF"] {
        assert_eq!(v["segmentation"][key], 1.0);
    }
    for key in ["precision", "recall", "f1"] {
        assert_eq!(v["detection"][key], 1.0);
    }
}

fn simulate(dir: &Path, spec: &str) -> PathBuf {
    let spec_path = dir.join("spec.json");
    std::fs::write(&spec_path, spec).unwrap();
    let sim = dir.join("sim");
    ok(&["simulate", "--input", s(&spec_path), "--out", s(&sim), "--no-images"]);
    sim
}

#[test]
fn simulate_track_evaluate() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), r#"{"seed": 3, "n_clips": 2, "frames_per_clip": 30}"#);
    let tracks = dir.path().join("tracks.json");
    let (c0, c1, pen) = (sim.join("clip_0.json"), sim.join("clip_1.json"), sim.join("pen.json"));
    let args = ["track", "--input", s(&c0), "--input", s(&c1), "--pen", s(&pen), "--out", s(&tracks)];
    ok(&args);
    let first = std::fs::read(&tracks).unwrap();
    ok(&args);
    assert_eq!(first, std::fs::read(&tracks).unwrap(), "track output is not reproducible");

    let v = read(&tracks);
    assert_eq!(v["provenance"]["config"]["pipeline"]["scan_stride"], 10);
    let eval = dir.path().join("eval.json");
    ok(&["evaluate", "--input", s(&tracks), "--gt", s(&sim.join("gt.json")), "--out", s(&eval)]);
    let e = read(&eval);
    assert_eq!(e["tracking"]["MOTA"], 1.0);
    assert_eq!(e["tracking"]["IDSW"], 0);
    assert_eq!(e["segmentation"]["J"], 1.0);

    let qc = dir.path().join("qc.json");
    ok(&["qc-report", "--input", s(&tracks), "--out", s(&qc)]);
    assert_eq!(read(&qc)["flags"].as_array().unwrap().len(), 0);

    let sweep = dir.path().join("sweep.json");
    ok(&["sweep", "--input", s(&sim.join("clip_0.json")), "--gt", s(&sim.join("gt.json")), "--out", s(&sweep)]);
    let rows = read(&sweep)["sweep"]["rows"].as_array().unwrap().len();
    assert_eq!(rows, 60);
}

#[test]
fn missing_pen_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), r#"{"n_agents": 2, "n_clips": 1, "frames_per_clip": 5}"#);
    let out = herdtrack(&["track", "--input", s(&sim.join("clip_0.json")), "--out", s(&dir.path().join("t.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("t.json").exists());
}

#[test]
fn schema_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), r#"{"n_agents": 2, "n_clips": 1, "frames_per_clip": 5}"#);
    let clip = s(&sim.join("clip_0.json")).to_string();
    let pen = s(&sim.join("pen.json")).to_string();
    let out = dir.path().join("t.json");

    let unknown = herdtrack(&["track", "--input", &clip, "--pen", &pen, "--out", s(&out), "--set", "refine.nope=1"]);
    assert_eq!(unknown.status.code(), Some(2));

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"pipeline": {"scan_stride": 5}, "colour": "red"}"#).unwrap();
    let bad_cfg = herdtrack(&["track", "--config", s(&cfg), "--input", &clip, "--pen", &pen, "--out", s(&out)]);
    assert_eq!(bad_cfg.status.code(), Some(2));

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, r#"{"clip_index": 0, "width": 4}"#).unwrap();
    let bad_frames = herdtrack(&["track", "--input", s(&broken), "--pen", &pen, "--out", s(&out)]);
    assert_eq!(bad_frames.status.code(), Some(2));

    assert_eq!(herdtrack(&["evaluate"]).status.code(), Some(2));
}

#[test]
fn blank_clip_is_logged_and_run_continues() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), r#"{"seed": 1, "n_clips": 3, "frames_per_clip": 20}"#);
    let path = sim.join("clip_1.json");
    let mut clip: FramesFile = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for f in &mut clip.frames {
        f.foreground_rle = None;
        f.detections.clear();
    }
    std::fs::write(&path, serde_json::to_string(&clip).unwrap()).unwrap();

    let (tracks, report) = (dir.path().join("tracks.json"), dir.path().join("run.json"));
    let mut args = vec!["track".to_string()];
    for k in 0..3 {
        args.extend(["--input".into(), s(&sim.join(format!("clip_{k}.json"))).to_string()]);
    }
    for (flag, p) in [("--pen", sim.join("pen.json")), ("--out", tracks.clone()), ("--report", report.clone())] {
        args.extend([flag.to_string(), s(&p).to_string()]);
    }
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(&args);
    let r = read(&report);
    let statuses: Vec<&str> = r["report"]["clips"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["status"].as_str().unwrap())
        .collect();
    assert_eq!(statuses, ["tracked", "irrecoverable", "tracked"]);
    assert!(!r["report"]["events"].as_array().unwrap().is_empty());
}

fn ppm_pixels(path: &Path) -> (usize, usize, Vec<[u8; 3]>) {
    let bytes = std::fs::read(path).unwrap();
    let text = String::from_utf8_lossy(&bytes[..20]).to_string();
    let mut it = text.split_whitespace();
    assert_eq!(it.next(), Some("P6"));
    let w: usize = it.next().unwrap().parse().unwrap();
    let h: usize = it.next().unwrap().parse().unwrap();
    let body = &bytes[bytes.len() - w * h * 3..];
    (w, h, body.chunks(3).map(|c| [c[0], c[1], c[2]]).collect())
}

#[test]
fn render_overlays() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(dir.path(), r#"{"n_agents": 2, "n_clips": 1, "frames_per_clip": 3, "frame_size": [120, 80]}"#);
    let frames = s(&sim.join("clip_0.json")).to_string();

    let empty = dir.path().join("empty.json");
    write_tracks(&empty, &[]);
    ok(&["render", "--input", s(&empty), "--frames", &frames, "--out", s(&dir.path().join("r0"))]);
    let (w, h, px) = ppm_pixels(&dir.path().join("r0/frame_000000.ppm"));
    assert_eq!((w, h), (120, 80));
    assert!(px.iter().all(|p| *p == [0, 0, 0]), "frames without images render as black background");

    let mut file = TracksFile::from_tracks(&[]);
    file.qc = serde_json::from_str(r#"[{"frame": 1, "reason": "overlap", "identities": [1, 2], "value": 0.5}]"#).unwrap();
    let flagged = dir.path().join("flagged.json");
    std::fs::write(&flagged, serde_json::to_string(&file).unwrap()).unwrap();
    ok(&["render", "--input", s(&flagged), "--frames", &frames, "--out", s(&dir.path().join("r1"))]);
    let (_, _, plain) = ppm_pixels(&dir.path().join("r1/frame_000000.ppm"));
    let (_, _, marked) = ppm_pixels(&dir.path().join("r1/frame_000001.ppm"));
    assert_eq!(plain[0], [0, 0, 0]);
    assert_eq!(marked[0], [255, 0, 0]);
}
