use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assign::hungarian;
use crate::error::{Error, Result};
use crate::mask::{contour_pixels, mask_iou, BitMask};
use crate::track::{frames_of, Track};

pub fn jaccard(pred: &BitMask, gt: &BitMask) -> Result<f64> {
    mask_iou(pred, gt)
}

/// `ceil(0.8% of the image diagonal)`, at least one pixel.
pub fn default_boundary_tolerance(width: u32, height: u32) -> u32 {
    let d = ((width as f64).powi(2) + (height as f64).powi(2)).sqrt();
    ((0.008 * d).ceil() as u32).max(1)
}

/// Fraction of `from` pixels lying within `tol` (Euclidean) of a pixel of
/// the `to` raster.
fn covered_fraction(from: &[(u32, u32)], to: &BitMask, tol: u32) -> f64 {
    let t = tol as i64;
    let r2 = t * t;
    let (w, h) = (to.width() as i64, to.height() as i64);
    let hit = from
        .iter()
        .filter(|&&(x, y)| {
            for dy in -t..=t {
                for dx in -t..=t {
                    if dx * dx + dy * dy > r2 {
                        continue;
                    }
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx >= 0 && ny >= 0 && nx < w && ny < h && to.get(nx as u32, ny as u32) {
                        return true;
                    }
                }
            }
            false
        })
        .count();
    hit as f64 / from.len() as f64
}

pub fn boundary_f(pred: &BitMask, gt: &BitMask, tolerance: u32) -> Result<f64> {
    if pred.dims() != gt.dims() {
        let (a, b) = (pred.dims(), gt.dims());
        return Err(Error::DimensionMismatch(a.0, a.1, b.0, b.1));
    }
    let pc = contour_pixels(pred);
    let gc = contour_pixels(gt);
    match (pc.is_empty(), gc.is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let (w, h) = pred.dims();
    let g_boundary = BitMask::from_pixels(w, h, gc.iter().copied());
    let p_boundary = BitMask::from_pixels(w, h, pc.iter().copied());
    let precision = covered_fraction(&pc, &g_boundary, tolerance);
    let recall = covered_fraction(&gc, &p_boundary, tolerance);
    if precision + recall == 0.0 {
        Ok(0.0)
    } else {
        Ok(2.0 * precision * recall / (precision + recall))
    }
}

/// How predicted identities are paired with ground-truth identities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityMatching {
    /// Assignment maximising summed J over the annotated frames.
    #[default]
    Optimal,
    /// Same numeric identity.
    ById,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityScore {
    pub gt_id: u32,
    pub pred_id: Option<u32>,
    pub j: f64,
    pub f: f64,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSegScore {
    pub frame: u64,
    pub j: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegScore {
    pub j: f64,
    pub f: f64,
    pub jf: f64,
    pub per_identity: Vec<IdentityScore>,
    pub per_frame: Vec<FrameSegScore>,
}

pub fn jf_mean(j: f64, f: f64) -> f64 {
    (j + f) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegOptions {
    pub matching: IdentityMatching,
    /// `None` uses the diagonal-based default.
    pub boundary_tolerance: Option<u32>,
}

impl Default for SegOptions {
    fn default() -> Self {
        Self {
            matching: IdentityMatching::Optimal,
            boundary_tolerance: None,
        }
    }
}

fn pair_scores(pred: Option<&Track>, gt: &Track, tol: Option<u32>) -> Result<BTreeMap<u64, (f64, f64)>> {
    let mut out = BTreeMap::new();
    for (&frame, g) in &gt.entries {
        let score = match pred.and_then(|p| p.entries.get(&frame)) {
            None => (0.0, 0.0),
            Some(p) => {
                let (w, h) = g.mask.dims();
                let t = tol.unwrap_or_else(|| default_boundary_tolerance(w, h));
                (jaccard(&p.mask, &g.mask)?, boundary_f(&p.mask, &g.mask, t)?)
            }
        };
        out.insert(frame, score);
    }
    Ok(out)
}

/// Per-identity and overall J, F and their mean over every ground-truth
/// entry. A gt frame without a prediction scores zero; an invisible gt
/// entry matched by an empty prediction scores one.
pub fn jf_series(pred: &[Track], gt: &[Track], opts: &SegOptions) -> Result<SegScore> {
    let tol = opts.boundary_tolerance;
    let pairing: Vec<Option<usize>> = match opts.matching {
        IdentityMatching::ById => gt
            .iter()
            .map(|g| pred.iter().position(|p| p.identity == g.identity))
            .collect(),
        IdentityMatching::Optimal => {
            if pred.is_empty() {
                vec![None; gt.len()]
            } else {
                let mut cost = Vec::with_capacity(gt.len());
                for g in gt {
                    let mut row = Vec::with_capacity(pred.len());
                    for p in pred {
                        let mut total = 0.0;
                        for (&frame, ge) in &g.entries {
                            if let Some(pe) = p.entries.get(&frame) {
                                total += jaccard(&pe.mask, &ge.mask)?;
                            }
                        }
                        row.push(-total);
                    }
                    cost.push(row);
                }
                hungarian(&cost)?.mapping
            }
        }
    };

    let mut per_identity = Vec::with_capacity(gt.len());
    let mut frame_acc: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for (g, m) in gt.iter().zip(&pairing) {
        let p = m.map(|k| &pred[k]);
        let scores = pair_scores(p, g, tol)?;
        let n = scores.len();
        let (sj, sf) = scores.values().fold((0.0, 0.0), |a, s| (a.0 + s.0, a.1 + s.1));
        for (&frame, s) in &scores {
            let e = frame_acc.entry(frame).or_insert((0.0, 0.0, 0));
            e.0 += s.0;
            e.1 += s.1;
            e.2 += 1;
        }
        let (j, f) = if n == 0 { (0.0, 0.0) } else { (sj / n as f64, sf / n as f64) };
        per_identity.push(IdentityScore {
            gt_id: g.identity,
            pred_id: p.map(|t| t.identity),
            j,
            f,
            frames: n,
        });
    }
    let scored: Vec<&IdentityScore> = per_identity.iter().filter(|s| s.frames > 0).collect();
    let (j, f) = if scored.is_empty() {
        (0.0, 0.0)
    } else {
        let k = scored.len() as f64;
        (
            scored.iter().map(|s| s.j).sum::<f64>() / k,
            scored.iter().map(|s| s.f).sum::<f64>() / k,
        )
    };
    debug_assert!(frames_of(gt).len() == frame_acc.len());
    let per_frame = frame_acc
        .into_iter()
        .map(|(frame, (sj, sf, n))| FrameSegScore {
            frame,
            j: sj / n as f64,
            f: sf / n as f64,
        })
        .collect();
    Ok(SegScore {
        j,
        f,
        jf: jf_mean(j, f),
        per_identity,
        per_frame,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_examples() {
        let a = BitMask::rect(40, 40, 5, 5, 10, 10);
        assert_eq!(boundary_f(&a, &a, 2).unwrap(), 1.0);
        let far = BitMask::rect(40, 40, 28, 28, 6, 6);
        assert_eq!(boundary_f(&a, &far, 2).unwrap(), 0.0);
        let shifted = a.translate(1, 0);
        assert_eq!(boundary_f(&a, &shifted, 2).unwrap(), 1.0);
        let e = BitMask::new(40, 40);
        assert_eq!(boundary_f(&e, &e, 2).unwrap(), 1.0);
        assert_eq!(boundary_f(&a, &e, 2).unwrap(), 0.0);
        assert!(boundary_f(&a, &BitMask::new(41, 40), 2).is_err());
    }

    #[test]
    fn tolerance_default() {
        // diagonal of 480x360 is 600 px
        assert_eq!(default_boundary_tolerance(480, 360), 5);
    }

    fn track(id: u32, masks: &[BitMask]) -> Track {
        let mut t = Track::new(id);
        for (i, m) in masks.iter().enumerate() {
            t.insert(i as u64, m.clone());
        }
        t
    }

    #[test]
    fn perfect_and_missing() {
        let a = BitMask::rect(30, 30, 2, 2, 6, 6);
        let b = BitMask::rect(30, 30, 15, 15, 6, 6);
        let gt = vec![track(1, &[a.clone(), a.clone()]), track(2, &[b.clone(), b.clone()])];
        let s = jf_series(&gt, &gt, &SegOptions::default()).unwrap();
        assert_eq!((s.j, s.f, s.jf), (1.0, 1.0, 1.0));

        let only_a = vec![track(1, &[a.clone(), a])];
        let s = jf_series(&only_a, &gt, &SegOptions::default()).unwrap();
        assert_eq!(s.per_identity[1].j, 0.0);
        assert_eq!(s.j, 0.5);
        assert_eq!(s.jf, 0.5);
    }

    #[test]
    fn optimal_pairing_ignores_labels() {
        let a = BitMask::rect(30, 30, 2, 2, 6, 6);
        let b = BitMask::rect(30, 30, 15, 15, 6, 6);
        let gt = vec![track(1, std::slice::from_ref(&a)), track(2, std::slice::from_ref(&b))];
        let pred = vec![track(7, &[b]), track(9, &[a])];
        let s = jf_series(&pred, &gt, &SegOptions::default()).unwrap();
        assert_eq!(s.j, 1.0);
        assert_eq!(s.per_identity[0].pred_id, Some(9));
        let by_id = SegOptions {
            matching: IdentityMatching::ById,
            ..Default::default()
        };
        assert_eq!(jf_series(&pred, &gt, &by_id).unwrap().j, 0.0);
    }

    #[test]
    fn reported_mean() {
        assert!((jf_mean(0.83, 0.92) - 0.875).abs() < 1e-12);
    }
}
