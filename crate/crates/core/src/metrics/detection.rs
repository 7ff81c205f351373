use serde::{Deserialize, Serialize};

use crate::assign::hungarian;
use crate::filters::Instance;
use crate::mask::BBox;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl std::ops::AddAssign for DetectionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Pairs `(pred, gt)` of an optimal one-to-one box matching. Among matchings
/// with the most pairs at or above `iou_threshold`, the one with the largest
/// summed IoU is chosen.
pub fn match_boxes(preds: &[BBox], gts: &[BBox], iou_threshold: f64) -> Vec<(usize, usize, f64)> {
    if preds.is_empty() || gts.is_empty() {
        return Vec::new();
    }
    // every admissible pair is worth more than any IoU total, so the
    // optimiser first maximises the pair count and then the overlap
    let bonus = (preds.len().min(gts.len()) + 1) as f64;
    let ious: Vec<Vec<f64>> = preds
        .iter()
        .map(|p| gts.iter().map(|g| p.iou(g)).collect())
        .collect();
    let cost: Vec<Vec<f64>> = ious
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| if v >= iou_threshold { -(bonus + v) } else { 0.0 })
                .collect()
        })
        .collect();
    let res = hungarian(&cost).expect("IoU costs are finite");
    res.pairs
        .into_iter()
        .filter(|&(i, j, _)| ious[i][j] >= iou_threshold)
        .map(|(i, j, _)| (i, j, ious[i][j]))
        .collect()
}

pub fn match_detections(preds: &[Instance], gts: &[Instance], iou_threshold: f64) -> DetectionCounts {
    let p: Vec<BBox> = preds.iter().map(|i| i.bbox).collect();
    let g: Vec<BBox> = gts.iter().map(|i| i.bbox).collect();
    counts_from_boxes(&p, &g, iou_threshold)
}

pub fn counts_from_boxes(preds: &[BBox], gts: &[BBox], iou_threshold: f64) -> DetectionCounts {
    let tp = match_boxes(preds, gts, iou_threshold).len() as u64;
    DetectionCounts {
        tp,
        fp: preds.len() as u64 - tp,
        fn_: gts.len() as u64 - tp,
    }
}

pub fn precision_recall_f1(c: DetectionCounts) -> Prf {
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf {
        precision,
        recall,
        f1,
    }
}

/// A detection box with its confidence score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    pub bbox: BBox,
    pub confidence: f64,
}

/// Predictions and ground truth for one image.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepImage {
    pub preds: Vec<ScoredBox>,
    pub gts: Vec<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    #[serde(flatten)]
    pub counts: DetectionCounts,
    #[serde(flatten)]
    pub prf: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Threshold with the highest F1; the lowest such threshold on ties.
    pub best_threshold: Option<f64>,
}

pub fn sweep_thresholds(images: &[SweepImage], thresholds: &[f64], iou_threshold: f64) -> SweepTable {
    let mut rows = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let mut counts = DetectionCounts::default();
        for img in images {
            let kept: Vec<BBox> = img
                .preds
                .iter()
                .filter(|p| p.confidence >= t)
                .map(|p| p.bbox)
                .collect();
            counts += counts_from_boxes(&kept, &img.gts, iou_threshold);
        }
        rows.push(SweepRow {
            threshold: t,
            counts,
            prf: precision_recall_f1(counts),
        });
    }
    let mut best: Option<&SweepRow> = None;
    for r in &rows {
        if best.is_none_or(|b| r.prf.f1 > b.prf.f1) {
            best = Some(r);
        }
    }
    SweepTable {
        best_threshold: best.map(|r| r.threshold),
        rows,
    }
}

/// Thresholds from `start` to `end` inclusive in steps of `step`, rounded to
/// six decimals.
pub fn threshold_range(start: f64, end: f64, step: f64) -> Vec<f64> {
    if step <= 0.0 || end < start {
        return vec![start];
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|k| ((start + k as f64 * step) * 1e6).round() / 1e6)
        .collect()
}
