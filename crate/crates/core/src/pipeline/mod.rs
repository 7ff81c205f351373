//! Long-term tracking over consecutive clips.
//!
//! Each clip is initialised from a clean anchor frame, tracked in both
//! directions from it, and linked to the previous clip either by carrying
//! masks over the boundary or by re-identification. A final quality pass
//! flags suspicious frames and re-tracks them once.

mod contracts;
mod driver;
mod init;
mod matcher;
mod qc;
mod tracker;

pub use contracts::{Detector, Propagator, ReferenceDetector, ReferencePropagator};
pub use driver::{
    run_long_term, ClipReport, ClipStatus, ExcludedSpan, RunEvent, RunReport, RunResult, TrackingConfig,
};
pub use init::{find_anchor, find_reference_frame, Anchor};
pub use matcher::{
    adaptive_count, match_clips, AdaptiveCount, Backends, InitPath, MatchOutcome, Roster, RosterEntry,
};
pub use qc::{post_qc, FrameSpan, QcFlag, QcReason, QcReport};
pub use tracker::{bidirectional_track, propagate, Direction, TrackedClip};

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::Instance;
use crate::image::GrayImage;
use crate::mask::BitMask;

/// Where a frame's pixels come from.
#[derive(Clone, Default)]
pub enum ImageRef {
    #[default]
    None,
    Path(PathBuf),
    Memory(Arc<GrayImage>),
    /// Rendered on demand.
    Lazy(Arc<dyn Fn() -> GrayImage + Send + Sync>),
}

impl fmt::Debug for ImageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageRef::None => f.write_str("None"),
            ImageRef::Path(p) => write!(f, "Path({})", p.display()),
            ImageRef::Memory(_) => f.write_str("Memory"),
            ImageRef::Lazy(_) => f.write_str("Lazy"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrameRecord {
    /// Global frame index.
    pub index: u64,
    pub image: ImageRef,
    pub foreground: Option<BitMask>,
    pub detections: Vec<Instance>,
}

impl FrameRecord {
    pub fn load_image(&self) -> Result<Option<GrayImage>> {
        Ok(match &self.image {
            ImageRef::None => None,
            ImageRef::Path(p) => Some(GrayImage::load_pgm(p)?),
            ImageRef::Memory(img) => Some((**img).clone()),
            ImageRef::Lazy(f) => Some(f()),
        })
    }

    /// The frame image, or when none is attached, the foreground (or the
    /// union of the detections) painted white on black.
    pub fn appearance(&self, width: u32, height: u32) -> Result<GrayImage> {
        if let Some(img) = self.load_image()? {
            return Ok(img);
        }
        let mut img = GrayImage::new(width, height);
        match &self.foreground {
            Some(fg) => fg.pixels().for_each(|(x, y)| img.put(x, y, 1.0)),
            None => self
                .detections
                .iter()
                .flat_map(|d| d.mask.pixels())
                .for_each(|(x, y)| img.put(x, y, 1.0)),
        }
        Ok(img)
    }
}

#[derive(Debug, Clone)]
pub struct Clip {
    pub index: u32,
    pub width: u32,
    pub height: u32,
    pub frames: Vec<FrameRecord>,
}

impl Clip {
    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::Invalid(format!("clip {} has no frames", self.index)));
        }
        for w in self.frames.windows(2) {
            if w[1].index <= w[0].index {
                return Err(Error::Invalid(format!(
                    "clip {}: frame indices not strictly increasing at {}",
                    self.index, w[1].index
                )));
            }
        }
        for f in &self.frames {
            let masks = f.foreground.iter().chain(f.detections.iter().map(|d| &d.mask));
            for m in masks {
                if m.dims() != (self.width, self.height) {
                    let (w, h) = m.dims();
                    return Err(Error::DimensionMismatch(w, h, self.width, self.height));
                }
            }
        }
        Ok(())
    }

    pub fn first_frame(&self) -> u64 {
        self.frames.first().map_or(0, |f| f.index)
    }

    pub fn last_frame(&self) -> u64 {
        self.frames.last().map_or(0, |f| f.index)
    }

    pub fn position_of(&self, frame: u64) -> Option<usize> {
        self.frames.binary_search_by_key(&frame, |f| f.index).ok()
    }

    /// Frames from `start` (inclusive) to the end, as a new clip.
    pub fn tail_from(&self, start: usize) -> Clip {
        Clip {
            index: self.index,
            width: self.width,
            height: self.height,
            frames: self.frames[start..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub scan_stride: usize,
    pub expected_count: usize,
    /// Look-back, in frames, when carrying masks across a clip boundary.
    pub anchor_window: usize,
    pub detection_threshold: f64,
    pub qc_overlap_threshold: f64,
    pub qc_min_area: usize,
    pub qc_teleport_dist: f64,
    /// Trailing frames without a visible mask after which an identity is
    /// dropped from the expected count.
    pub visibility_window: usize,
    pub pen_min_fraction: f64,
    pub nms_threshold: f64,
    pub top_k_trigger: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scan_stride: 10,
            expected_count: 10,
            anchor_window: 10,
            detection_threshold: 0.24,
            qc_overlap_threshold: 0.08,
            qc_min_area: 25,
            qc_teleport_dist: 200.0,
            visibility_window: 600,
            pen_min_fraction: 0.40,
            nms_threshold: 0.08,
            top_k_trigger: 15,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("scan_stride", self.scan_stride),
            ("expected_count", self.expected_count),
            ("anchor_window", self.anchor_window),
            ("qc_min_area", self.qc_min_area),
            ("visibility_window", self.visibility_window),
            ("top_k_trigger", self.top_k_trigger),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let ratios = [
            ("detection_threshold", self.detection_threshold),
            ("qc_overlap_threshold", self.qc_overlap_threshold),
            ("pen_min_fraction", self.pen_min_fraction),
            ("nms_threshold", self.nms_threshold),
        ];
        for (name, v) in ratios {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1]")));
            }
        }
        if !(self.qc_teleport_dist.is_finite() && self.qc_teleport_dist > 0.0) {
            return Err(Error::Config("qc_teleport_dist must be positive".into()));
        }
        if self.top_k_trigger < self.expected_count {
            return Err(Error::Config("top_k_trigger must be at least expected_count".into()));
        }
        Ok(())
    }
}
