use crate::error::Result;
use crate::filters::{mask_nms, pen_filter, pen_inside_fraction, select_top_k, Instance, OverlapMeasure, PenRegion};
use crate::mask::mask_iou;

use super::{Clip, Detector, PipelineConfig};

/// A frame with a complete, clean set of instances.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    /// Position of the frame inside its clip.
    pub position: usize,
    /// Global frame index.
    pub frame: u64,
    pub instances: Vec<Instance>,
}

/// Scans every `scan_stride`-th frame from the clip start for a frame with
/// exactly `expected_count` clean instances.
pub fn find_reference_frame(
    clip: &Clip,
    detector: &dyn Detector,
    pen: &PenRegion,
    cfg: &PipelineConfig,
) -> Result<Option<Anchor>> {
    find_anchor(clip, detector, pen, cfg, cfg.expected_count, 0, cfg.scan_stride)
}

/// [`find_reference_frame`] with an explicit count, start position and stride.
pub fn find_anchor(
    clip: &Clip,
    detector: &dyn Detector,
    pen: &PenRegion,
    cfg: &PipelineConfig,
    expected: usize,
    start: usize,
    stride: usize,
) -> Result<Option<Anchor>> {
    if expected == 0 {
        return Ok(None);
    }
    let stride = stride.max(1);
    for position in (start..clip.frames.len()).step_by(stride) {
        let frame = &clip.frames[position];
        let raw = detector.detect(frame)?;
        let inside = pen_filter(raw, pen, cfg.pen_min_fraction);
        let kept = mask_nms(inside, cfg.nms_threshold, OverlapMeasure::Iou)?;
        let dets = select_top_k(kept, expected, cfg.top_k_trigger);
        if is_clean(&dets, pen, expected, cfg.qc_overlap_threshold)? {
            log::debug!("clip {}: anchor at frame {}", clip.index, frame.index);
            return Ok(Some(Anchor {
                position,
                frame: frame.index,
                instances: dets,
            }));
        }
    }
    Ok(None)
}

fn is_clean(dets: &[Instance], pen: &PenRegion, expected: usize, max_iou: f64) -> Result<bool> {
    if dets.len() != expected {
        return Ok(false);
    }
    for d in dets {
        if pen_inside_fraction(&d.mask, pen)? < 1.0 {
            return Ok(false);
        }
    }
    for (i, a) in dets.iter().enumerate() {
        for b in &dets[i + 1..] {
            if mask_iou(&a.mask, &b.mask)? > max_iou {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
