//! Detection, segmentation and tracking scores.

mod detection;
mod mot;
mod segmentation;

pub use detection::{
    counts_from_boxes, match_boxes, match_detections, precision_recall_f1, sweep_thresholds,
    threshold_range, DetectionCounts, Prf, ScoredBox, SweepImage, SweepRow, SweepTable,
};
pub use mot::{mot_evaluate, mota_from_counts, motp_from_counts, FrameMotCounts, MotSummary};
pub use segmentation::{
    boundary_f, default_boundary_tolerance, jaccard, jf_mean, jf_series, FrameSegScore,
    IdentityMatching, IdentityScore, SegOptions, SegScore,
};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::track::{frames_of, visible_at, Track};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub iou_threshold: f64,
    pub identity_matching: IdentityMatching,
    /// `None` uses the diagonal-based default.
    pub boundary_tolerance: Option<u32>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            identity_matching: IdentityMatching::Optimal,
            boundary_tolerance: None,
        }
    }
}

impl MetricsConfig {
    pub fn segmentation(&self) -> SegOptions {
        SegOptions {
            matching: self.identity_matching,
            boundary_tolerance: self.boundary_tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSection {
    #[serde(flatten)]
    pub counts: DetectionCounts,
    #[serde(flatten)]
    pub prf: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationSection {
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "JF")]
    pub jf: f64,
    pub per_id: Vec<IdentityScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingSection {
    #[serde(rename = "MOTA")]
    pub mota: f64,
    #[serde(rename = "MOTP")]
    pub motp: f64,
    #[serde(rename = "IDSW")]
    pub idsw: u64,
    #[serde(rename = "FN")]
    pub fn_: u64,
    #[serde(rename = "FP")]
    pub fp: u64,
    #[serde(rename = "GT")]
    pub gt: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub detection: DetectionSection,
    pub segmentation: SegmentationSection,
    pub tracking: TrackingSection,
    #[serde(skip)]
    pub per_frame_seg: Vec<FrameSegScore>,
    #[serde(skip)]
    pub per_frame_mot: Vec<FrameMotCounts>,
}

/// Scores predicted tracks against ground-truth tracks. Detection counts use
/// the boxes of visible masks per frame.
pub fn evaluate(pred: &[Track], gt: &[Track], cfg: &MetricsConfig) -> Result<EvalReport> {
    let mut counts = DetectionCounts::default();
    for frame in frames_of(gt) {
        let pb: Vec<_> = visible_at(pred, frame).iter().filter_map(|(_, m)| m.bbox()).collect();
        let gb: Vec<_> = visible_at(gt, frame).iter().filter_map(|(_, m)| m.bbox()).collect();
        counts += counts_from_boxes(&pb, &gb, cfg.iou_threshold);
    }
    let seg = jf_series(pred, gt, &cfg.segmentation())?;
    let mot = mot_evaluate(pred, gt, cfg.iou_threshold)?;
    Ok(EvalReport {
        detection: DetectionSection {
            counts,
            prf: precision_recall_f1(counts),
        },
        segmentation: SegmentationSection {
            j: seg.j,
            f: seg.f,
            jf: seg.jf,
            per_id: seg.per_identity,
        },
        tracking: TrackingSection {
            mota: mot.mota,
            motp: mot.motp,
            idsw: mot.idsw,
            fn_: mot.fn_,
            fp: mot.fp,
            gt: mot.gt,
        },
        per_frame_seg: seg.per_frame,
        per_frame_mot: mot.per_frame,
    })
}

impl EvalReport {
    /// One line per frame: segmentation scores (blank on frames without
    /// ground truth) followed by the CLEAR-MOT counts.
    pub fn per_frame_csv(&self) -> String {
        let seg: BTreeMap<u64, &FrameSegScore> =
            self.per_frame_seg.iter().map(|s| (s.frame, s)).collect();
        let mut out = String::from("frame,J,F,JF,gt,fn,fp,idsw,matches,motp\n");
        for m in &self.per_frame_mot {
            let (j, f, jf) = match seg.get(&m.frame) {
                Some(s) => (
                    format!("{:.6}", s.j),
                    format!("{:.6}", s.f),
                    format!("{:.6}", jf_mean(s.j, s.f)),
                ),
                None => Default::default(),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{:.6}",
                m.frame,
                j,
                f,
                jf,
                m.gt,
                m.fn_,
                m.fp,
                m.idsw,
                m.matches,
                motp_from_counts(m.matched_iou_sum, m.matches)
            );
        }
        out
    }
}
