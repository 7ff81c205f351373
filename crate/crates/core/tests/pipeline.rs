use std::path::Path;

use herdtrack_core::io::{FramesFile, TracksFile};
use herdtrack_core::metrics::{evaluate, MetricsConfig};
use herdtrack_core::pipeline::{
    run_long_term, Backends, ClipStatus, ReferenceDetector, ReferencePropagator, RunResult, TrackingConfig,
};
use herdtrack_core::pipeline::Clip;
use herdtrack_core::filters::PenRegion;
use herdtrack_core::reid::ReferenceEmbedder;
use herdtrack_core::simgen::{generate_scenario, ScenarioSpec};

fn run(clips: &[Clip], pen: &PenRegion) -> RunResult {
    let b = Backends {
        detector: &ReferenceDetector::default(),
        propagator: &ReferencePropagator::default(),
        embedder: &ReferenceEmbedder,
    };
    run_long_term(clips, &b, pen, &TrackingConfig::default()).unwrap()
}

fn small() -> ScenarioSpec {
    ScenarioSpec {
        seed: 2,
        n_clips: 3,
        frames_per_clip: 40,
        ..Default::default()
    }
}

#[test]
fn blank_clip_is_reported_and_skipped() {
    let mut s = generate_scenario(&small()).unwrap();
    for f in &mut s.clips[1].frames {
        f.foreground = None;
        f.detections.clear();
        f.image = Default::default();
    }
    let r = run(&s.clips, &s.pen);
    let statuses: Vec<ClipStatus> = r.report.clips.iter().map(|c| c.status).collect();
    assert_eq!(statuses, [ClipStatus::Tracked, ClipStatus::Irrecoverable, ClipStatus::Tracked]);
    assert!(r.report.events.iter().any(|e| e.clip == 1));
    // the blank clip contributes no entries
    assert!(r.tracks.iter().all(|t| t.entries.range(40..80).next().is_none()));
    assert_eq!(r.tracks.len(), 10);
}

#[test]
fn tracking_from_json_frames_without_images() {
    let s = generate_scenario(&small()).unwrap();
    let loaded: Vec<Clip> = s
        .clips
        .iter()
        .map(|c| {
            let text = serde_json::to_string(&FramesFile::from_clip(c, |_| None)).unwrap();
            serde_json::from_str::<FramesFile>(&text)
                .unwrap()
                .into_clip(Path::new("."))
                .unwrap()
        })
        .collect();
    let r = run(&loaded, &s.pen);
    let e = evaluate(&r.tracks, &s.gt, &MetricsConfig::default()).unwrap();
    assert_eq!(e.tracking.mota, 1.0);
    assert_eq!(e.tracking.idsw, 0);

    let gt_text = serde_json::to_string(&TracksFile::from_tracks(&s.gt)).unwrap();
    let gt_back = serde_json::from_str::<TracksFile>(&gt_text).unwrap().to_tracks().unwrap();
    assert_eq!(gt_back, s.gt);
}
