use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mask::{centroid, mask_iou};
use crate::track::{frames_of, visible_at, Track};

use super::PipelineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QcReason {
    Overlap,
    NearZeroArea,
    Teleport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcFlag {
    pub frame: u64,
    pub reason: QcReason,
    pub identities: Vec<u32>,
    /// IoU, area in pixels, or centroid jump in pixels.
    pub value: f64,
}

/// Inclusive frame range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameSpan {
    pub start: u64,
    pub end: u64,
}

impl FrameSpan {
    pub fn contains(&self, frame: u64) -> bool {
        (self.start..=self.end).contains(&frame)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QcReport {
    pub flags: Vec<QcFlag>,
    pub error_spans: Vec<FrameSpan>,
}

pub fn post_qc(tracks: &[Track], cfg: &PipelineConfig) -> Result<QcReport> {
    let mut flags = Vec::new();

    for frame in frames_of(tracks) {
        let vis = visible_at(tracks, frame);
        for (i, (ia, ma)) in vis.iter().enumerate() {
            for (ib, mb) in &vis[i + 1..] {
                let iou = mask_iou(ma, mb)?;
                if iou > cfg.qc_overlap_threshold {
                    flags.push(QcFlag {
                        frame,
                        reason: QcReason::Overlap,
                        identities: vec![*ia, *ib],
                        value: iou,
                    });
                }
            }
        }
        for (id, m) in &vis {
            if m.area() < cfg.qc_min_area {
                flags.push(QcFlag {
                    frame,
                    reason: QcReason::NearZeroArea,
                    identities: vec![*id],
                    value: m.area() as f64,
                });
            }
        }
    }

    for t in tracks {
        let mut prev = None;
        for (&frame, e) in &t.entries {
            if !e.visible || e.mask.is_empty() {
                continue;
            }
            let c = centroid(&e.mask)?;
            if let Some(p) = prev {
                let d = c.distance(&p);
                if d > cfg.qc_teleport_dist {
                    flags.push(QcFlag {
                        frame,
                        reason: QcReason::Teleport,
                        identities: vec![t.identity],
                        value: d,
                    });
                }
            }
            prev = Some(c);
        }
    }

    flags.sort_by(|a, b| {
        (a.frame, a.reason, &a.identities).cmp(&(b.frame, b.reason, &b.identities))
    });
    let flagged: BTreeSet<u64> = flags.iter().map(|f| f.frame).collect();
    Ok(QcReport {
        error_spans: coalesce(&flagged),
        flags,
    })
}

fn coalesce(frames: &BTreeSet<u64>) -> Vec<FrameSpan> {
    let mut spans: Vec<FrameSpan> = Vec::new();
    for &f in frames {
        match spans.last_mut() {
            Some(s) if s.end + 1 == f => s.end = f,
            _ => spans.push(FrameSpan { start: f, end: f }),
        }
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::BitMask;

    fn tracks() -> Vec<Track> {
        let mut a = Track::new(1);
        let mut b = Track::new(2);
        for f in 0..20u64 {
            a.insert(f, BitMask::rect(400, 100, 10 + f as u32, 10, 10, 10));
            b.insert(f, BitMask::rect(400, 100, 60, 50, 10, 10));
        }
        vec![a, b]
    }

    #[test]
    fn clean_tracks_have_no_flags() {
        let r = post_qc(&tracks(), &PipelineConfig::default()).unwrap();
        assert!(r.flags.is_empty());
        assert!(r.error_spans.is_empty());
    }

    #[test]
    fn each_defect_is_flagged() {
        let cfg = PipelineConfig::default();
        let mut t = tracks();
        let dup = t[0].mask_at(12).unwrap().clone();
        t[1].insert(12, dup);
        t[0].insert(3, BitMask::rect(400, 100, 0, 0, 1, 3));
        t[1].insert(16, BitMask::rect(400, 100, 300, 50, 10, 10));
        let r = post_qc(&t, &cfg).unwrap();
        let at = |f: u64, why: QcReason| r.flags.iter().any(|x| x.frame == f && x.reason == why);
        assert!(at(12, QcReason::Overlap));
        assert!(at(3, QcReason::NearZeroArea));
        assert!(at(16, QcReason::Teleport));
        assert!(at(17, QcReason::Teleport));
        assert_eq!(
            r.error_spans,
            vec![
                FrameSpan { start: 3, end: 3 },
                FrameSpan { start: 12, end: 12 },
                FrameSpan { start: 16, end: 17 }
            ]
        );
    }
}
