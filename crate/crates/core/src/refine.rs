//! Rule-based per-frame mask refinement.
//!
//! The mask is clipped to the pen and split into blobs. A main blob is chosen
//! (nearest to the previously tracked centroid, or the largest one on the
//! first frame) and every other blob survives only if it is large enough
//! relative to the main blob, close enough to it, and close enough to the
//! previous centroid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{clip_mask_to_pen, PenRegion};
use crate::mask::{centroid, connected_components, contour_distance, BitMask, Blob, Connectivity, Point};

/// How the distance from a blob to the previous centroid is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrevDistance {
    #[default]
    Centroid,
    /// Nearest contour pixel of the blob.
    Contour,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub min_area_ratio: f64,
    /// `[for main blobs at or above the cutoff, for smaller main blobs]`
    pub max_distance_ratios: [f64; 2],
    pub max_prev_dist: f64,
    pub large_blob_cutoff: f64,
    pub connectivity: Connectivity,
    pub prev_distance: PrevDistance,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            min_area_ratio: 0.30,
            max_distance_ratios: [0.5, 1.5],
            max_prev_dist: 200.0,
            large_blob_cutoff: 1000.0,
            connectivity: Connectivity::Eight,
            prev_distance: PrevDistance::Centroid,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.min_area_ratio,
            self.max_distance_ratios[0],
            self.max_distance_ratios[1],
            self.max_prev_dist,
            self.large_blob_cutoff,
        ];
        if positive.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Config("refine parameters must be positive".into()));
        }
        if self.max_distance_ratios[0] > self.max_distance_ratios[1] {
            return Err(Error::Config(
                "max_distance_ratios must be ordered [small, large]".into(),
            ));
        }
        Ok(())
    }
}

/// Per-track memory carried between frames.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineState {
    pub prev_centroid: Option<Point>,
    pub is_first_frame: bool,
}

impl Default for RefineState {
    fn default() -> Self {
        Self {
            prev_centroid: None,
            is_first_frame: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlobVerdict {
    Main,
    Kept,
    TooSmall,
    TooFarFromMain,
    TooFarFromPrevious,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlobDecision {
    pub area: usize,
    pub centroid: Point,
    pub main_distance: f64,
    pub prev_distance: Option<f64>,
    pub verdict: BlobVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineOutcome {
    /// At least one blob survived.
    Cleaned,
    /// Nothing survived on the first frame; the unrefined mask is returned.
    OriginalFallback,
    /// Nothing survived on a later frame.
    Emptied,
}

/// Full account of one refinement step.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineTrace {
    pub cleaned: BitMask,
    pub state: RefineState,
    pub outcome: RefineOutcome,
    pub min_area: Option<f64>,
    pub max_main_distance: Option<f64>,
    pub decisions: Vec<BlobDecision>,
}

pub fn refine_mask(
    mask: &BitMask,
    pen: &PenRegion,
    state: &RefineState,
    cfg: &RefineConfig,
) -> Result<(BitMask, RefineState)> {
    let t = refine_mask_traced(mask, pen, state, cfg)?;
    Ok((t.cleaned, t.state))
}

pub fn refine_mask_traced(
    mask: &BitMask,
    pen: &PenRegion,
    state: &RefineState,
    cfg: &RefineConfig,
) -> Result<RefineTrace> {
    let clipped = clip_mask_to_pen(mask, pen)?;
    let blobs = connected_components(&clipped, cfg.connectivity);

    let mut decisions = Vec::with_capacity(blobs.len());
    let mut min_area = None;
    let mut max_main_distance = None;
    let mut kept: Vec<&Blob> = Vec::new();

    if !blobs.is_empty() {
        let main_idx = match state.prev_centroid {
            Some(prev) => {
                let mut best = 0;
                for (i, b) in blobs.iter().enumerate() {
                    if b.centroid.distance(&prev) < blobs[best].centroid.distance(&prev) {
                        best = i;
                    }
                }
                best
            }
            None => 0,
        };
        let main = &blobs[main_idx];
        let main_area = main.area as f64;
        let radius = (main_area / std::f64::consts::PI).sqrt();
        let a_min = cfg.min_area_ratio * main_area;
        let d_max = if main_area >= cfg.large_blob_cutoff {
            cfg.max_distance_ratios[0] * radius
        } else {
            cfg.max_distance_ratios[1] * radius
        };
        min_area = Some(a_min);
        max_main_distance = Some(d_max);

        for (i, blob) in blobs.iter().enumerate() {
            let main_distance = contour_distance(blob, main)?;
            let prev_distance = state.prev_centroid.map(|p| match cfg.prev_distance {
                PrevDistance::Centroid => blob.centroid.distance(&p),
                PrevDistance::Contour => blob
                    .contour
                    .iter()
                    .map(|&(x, y)| Point::new(x as f64, y as f64).distance(&p))
                    .fold(f64::INFINITY, f64::min),
            });
            let verdict = if i == main_idx {
                BlobVerdict::Main
            } else if (blob.area as f64) < a_min {
                BlobVerdict::TooSmall
            } else if main_distance > d_max {
                BlobVerdict::TooFarFromMain
            } else if prev_distance.is_some_and(|d| d > cfg.max_prev_dist) {
                BlobVerdict::TooFarFromPrevious
            } else {
                BlobVerdict::Kept
            };
            if matches!(verdict, BlobVerdict::Main | BlobVerdict::Kept) {
                kept.push(blob);
            }
            decisions.push(BlobDecision {
                area: blob.area,
                centroid: blob.centroid,
                main_distance,
                prev_distance,
                verdict,
            });
        }
    }

    let (width, height) = mask.dims();
    let (cleaned, outcome) = if !kept.is_empty() {
        let union = BitMask::from_pixels(width, height, kept.iter().flat_map(|b| b.mask.pixels()));
        (union, RefineOutcome::Cleaned)
    } else if state.is_first_frame {
        (mask.clone(), RefineOutcome::OriginalFallback)
    } else {
        (BitMask::new(width, height), RefineOutcome::Emptied)
    };

    let prev_centroid = if cleaned.is_empty() {
        state.prev_centroid
    } else {
        Some(centroid(&cleaned)?)
    };
    Ok(RefineTrace {
        cleaned,
        state: RefineState {
            prev_centroid,
            is_first_frame: false,
        },
        outcome,
        min_area,
        max_main_distance,
        decisions,
    })
}
