//! CLEAR-MOT accuracy and precision with sticky correspondences.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assign::hungarian;
use crate::error::Result;
use crate::mask::mask_iou;
use crate::track::{frames_of, visible_at, Track};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameMotCounts {
    pub frame: u64,
    pub gt: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub idsw: u64,
    pub matched_iou_sum: f64,
    pub matches: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotSummary {
    pub mota: f64,
    pub motp: f64,
    pub gt: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub idsw: u64,
    pub matches: u64,
    pub matched_iou_sum: f64,
    pub per_frame: Vec<FrameMotCounts>,
}

/// `1 - (FN + FP + IDSW) / GT`; a run without ground truth divides by one.
pub fn mota_from_counts(fn_: u64, fp: u64, idsw: u64, gt: u64) -> f64 {
    1.0 - (fn_ + fp + idsw) as f64 / gt.max(1) as f64
}

/// Mean IoU over matched pairs, zero when nothing matched.
pub fn motp_from_counts(matched_iou_sum: f64, matches: u64) -> f64 {
    if matches == 0 {
        0.0
    } else {
        matched_iou_sum / matches as f64
    }
}

/// Evaluates `pred` against `gt` on the union of their frames. Only visible
/// entries count as objects.
pub fn mot_evaluate(pred: &[Track], gt: &[Track], iou_threshold: f64) -> Result<MotSummary> {
    let mut frames = frames_of(gt);
    frames.extend(frames_of(pred));

    // gt id -> pred id of the most recent match (survives gaps)
    let mut last_match: BTreeMap<u32, u32> = BTreeMap::new();
    // correspondences from the previous frame only
    let mut active: BTreeMap<u32, u32> = BTreeMap::new();
    let mut per_frame = Vec::with_capacity(frames.len());

    for frame in frames {
        let g = visible_at(gt, frame);
        let p = visible_at(pred, frame);
        let mut g_used = vec![false; g.len()];
        let mut p_used = vec![false; p.len()];
        let mut pairs: Vec<(usize, usize, f64)> = Vec::new();

        for (gi, (gid, gm)) in g.iter().enumerate() {
            let Some(pid) = active.get(gid) else { continue };
            let Some(pi) = p.iter().position(|(id, _)| id == pid) else { continue };
            if p_used[pi] {
                continue;
            }
            let iou = mask_iou(gm, p[pi].1)?;
            if iou >= iou_threshold {
                g_used[gi] = true;
                p_used[pi] = true;
                pairs.push((gi, pi, iou));
            }
        }

        let free_g: Vec<usize> = (0..g.len()).filter(|&i| !g_used[i]).collect();
        let free_p: Vec<usize> = (0..p.len()).filter(|&i| !p_used[i]).collect();
        if !free_g.is_empty() && !free_p.is_empty() {
            let mut ious = Vec::with_capacity(free_g.len());
            for &gi in &free_g {
                let mut row = Vec::with_capacity(free_p.len());
                for &pi in &free_p {
                    row.push(mask_iou(g[gi].1, p[pi].1)?);
                }
                ious.push(row);
            }
            let bonus = (free_g.len().min(free_p.len()) + 1) as f64;
            let cost: Vec<Vec<f64>> = ious
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|&v| if v >= iou_threshold { -(bonus + v) } else { 0.0 })
                        .collect()
                })
                .collect();
            for (a, b, _) in hungarian(&cost)?.pairs {
                let v = ious[a][b];
                if v >= iou_threshold {
                    pairs.push((free_g[a], free_p[b], v));
                }
            }
        }

        let mut counts = FrameMotCounts {
            frame,
            gt: g.len() as u64,
            ..Default::default()
        };
        active.clear();
        for &(gi, pi, iou) in &pairs {
            let (gid, pid) = (g[gi].0, p[pi].0);
            if last_match.get(&gid).is_some_and(|&prev| prev != pid) {
                counts.idsw += 1;
            }
            last_match.insert(gid, pid);
            active.insert(gid, pid);
            counts.matched_iou_sum += iou;
        }
        counts.matches = pairs.len() as u64;
        counts.fn_ = counts.gt - counts.matches;
        counts.fp = p.len() as u64 - counts.matches;
        per_frame.push(counts);
    }

    let mut s = MotSummary {
        mota: 0.0,
        motp: 0.0,
        gt: 0,
        fn_: 0,
        fp: 0,
        idsw: 0,
        matches: 0,
        matched_iou_sum: 0.0,
        per_frame,
    };
    for c in &s.per_frame {
        s.gt += c.gt;
        s.fn_ += c.fn_;
        s.fp += c.fp;
        s.idsw += c.idsw;
        s.matches += c.matches;
        s.matched_iou_sum += c.matched_iou_sum;
    }
    s.mota = mota_from_counts(s.fn_, s.fp, s.idsw, s.gt);
    s.motp = motp_from_counts(s.matched_iou_sum, s.matches);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::BitMask;

    #[test]
    fn count_arithmetic() {
        assert!((mota_from_counts(13, 0, 0, 1306) - 0.9900).abs() < 1e-4);
        assert_eq!(mota_from_counts(0, 0, 0, 0), 1.0);
        assert_eq!(motp_from_counts(0.0, 0), 0.0);
    }

    #[test]
    fn swap_costs_two_switches() {
        let a = BitMask::rect(20, 20, 0, 0, 5, 5);
        let b = BitMask::rect(20, 20, 10, 10, 5, 5);
        let mut g1 = Track::new(1);
        let mut g2 = Track::new(2);
        let mut p1 = Track::new(1);
        let mut p2 = Track::new(2);
        for f in 0..3 {
            g1.insert(f, a.clone());
            g2.insert(f, b.clone());
            if f == 0 {
                p1.insert(f, a.clone());
                p2.insert(f, b.clone());
            } else {
                p1.insert(f, b.clone());
                p2.insert(f, a.clone());
            }
        }
        let s = mot_evaluate(&[p1, p2], &[g1, g2], 0.5).unwrap();
        assert_eq!(s.idsw, 2);
        assert!((s.mota - (1.0 - 2.0 / 6.0)).abs() < 1e-12);
        assert_eq!(s.motp, 1.0);
    }

    #[test]
    fn perfect_and_missing_frames() {
        let a = BitMask::rect(20, 20, 0, 0, 5, 5);
        let mut g = Track::new(3);
        let mut p = Track::new(8);
        for f in 0..4 {
            g.insert(f, a.clone());
            if f != 2 {
                p.insert(f, a.clone());
            }
        }
        let s = mot_evaluate(&[p], &[g.clone()], 0.5).unwrap();
        assert_eq!((s.fn_, s.fp, s.idsw), (1, 0, 0));
        let s = mot_evaluate(&[g.clone()], &[g], 0.5).unwrap();
        assert_eq!((s.mota, s.motp), (1.0, 1.0));
    }
}
