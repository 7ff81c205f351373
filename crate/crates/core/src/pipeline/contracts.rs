use crate::error::{Error, Result};
use crate::filters::Instance;
use crate::mask::{connected_components, mask_iou, BitMask, Connectivity};

use super::FrameRecord;

/// Produces candidate instances for one frame.
pub trait Detector: Send + Sync {
    fn detect(&self, frame: &FrameRecord) -> Result<Vec<Instance>>;
}

/// Carries identity masks from one frame to the next.
///
/// `memory` holds each identity's most recent nonempty mask. The result has
/// one mask per memory entry, in the same order; an empty mask means the
/// identity is not visible in `frame`.
pub trait Propagator: Send + Sync {
    fn propagate(&self, memory: &[(u32, BitMask)], frame: &FrameRecord) -> Result<Vec<BitMask>>;
}

/// Returns the precomputed detections of a frame at or above a confidence
/// threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceDetector {
    pub threshold: f64,
}

impl Default for ReferenceDetector {
    fn default() -> Self {
        Self { threshold: 0.24 }
    }
}

impl Detector for ReferenceDetector {
    fn detect(&self, frame: &FrameRecord) -> Result<Vec<Instance>> {
        Ok(frame
            .detections
            .iter()
            .filter(|d| d.confidence >= self.threshold)
            .cloned()
            .collect())
    }
}

/// Greedy overlap tracker on the frame's foreground components.
///
/// Identities are served largest remembered mask first; each takes the
/// unclaimed component with the highest IoU against its memory, provided the
/// IoU is positive.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ReferencePropagator {
    pub connectivity: Connectivity,
}

impl Propagator for ReferencePropagator {
    fn propagate(&self, memory: &[(u32, BitMask)], frame: &FrameRecord) -> Result<Vec<BitMask>> {
        let fg = frame.foreground.as_ref().ok_or_else(|| Error::Propagator {
            frame: frame.index,
            reason: "frame has no foreground mask".into(),
        })?;
        let (w, h) = fg.dims();
        let components = connected_components(fg, self.connectivity);
        let mut taken = vec![false; components.len()];

        let mut order: Vec<usize> = (0..memory.len()).collect();
        // stable sort keeps input order among equal areas
        order.sort_by_key(|&i| std::cmp::Reverse(memory[i].1.area()));

        let mut out = vec![BitMask::new(w, h); memory.len()];
        for i in order {
            let prev = &memory[i].1;
            if prev.dims() != (w, h) {
                return Err(Error::Propagator {
                    frame: frame.index,
                    reason: format!("memory mask of identity {} has wrong size", memory[i].0),
                });
            }
            let mut best: Option<(usize, f64)> = None;
            for (k, c) in components.iter().enumerate() {
                if taken[k] {
                    continue;
                }
                let iou = mask_iou(prev, &c.mask)?;
                if iou > 0.0 && best.is_none_or(|(_, b)| iou > b) {
                    best = Some((k, iou));
                }
            }
            if let Some((k, _)) = best {
                taken[k] = true;
                out[i] = components[k].mask.clone();
            }
        }
        Ok(out)
    }
}
