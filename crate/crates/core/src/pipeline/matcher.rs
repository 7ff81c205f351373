//! Linking identities across a clip boundary.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{Instance, PenRegion};
use crate::mask::{centroid, mask_iou, BitMask};
use crate::reid::{candidate, instance_feature, reidentify_candidates, Embedder, FeatureVector, ReidCandidate, ReidConfig};
use crate::track::{frames_of, Track};

use super::{find_anchor, Anchor, Clip, Detector, PipelineConfig, Propagator};

/// How a clip obtained its initial masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPath {
    /// Anchor detected in the clip itself with fresh identities.
    Reference,
    /// Masks carried over from the end of the previous clip.
    Transfer,
    /// Anchor detected in the clip, identities restored by re-identification.
    Redetect,
    /// As `Transfer`, after dropping identities that were long invisible.
    ReducedTransfer,
    /// As `Redetect`, after dropping identities that were long invisible.
    ReducedRedetect,
}

/// Last visible appearance of one identity.
#[derive(Debug, Clone)]
pub struct RosterEntry {
    pub frame: u64,
    pub mask: BitMask,
    pub feature: FeatureVector,
}

/// Every identity seen so far with its most recent appearance.
#[derive(Debug, Clone, Default)]
pub struct Roster {
    pub entries: BTreeMap<u32, RosterEntry>,
}

impl Roster {
    pub fn ids(&self) -> Vec<u32> {
        self.entries.keys().copied().collect()
    }

    pub fn next_fresh(&self) -> u32 {
        self.entries.keys().next_back().map_or(1, |m| m + 1)
    }

    /// Records the last visible mask of each track within `clip`.
    pub fn update(
        &mut self,
        tracks: &[Track],
        clip: &Clip,
        cfg: &ReidConfig,
        embedder: &dyn Embedder,
    ) -> Result<()> {
        let (first, last) = (clip.first_frame(), clip.last_frame());
        let mut by_frame: BTreeMap<u64, Vec<(u32, BitMask)>> = BTreeMap::new();
        for t in tracks {
            if let Some((f, m)) = t.last_visible_before(last) {
                if f >= first {
                    by_frame.entry(f).or_default().push((t.identity, m.clone()));
                }
            }
        }
        for (frame, items) in by_frame {
            let Some(pos) = clip.position_of(frame) else { continue };
            let image = clip.frames[pos].appearance(clip.width, clip.height)?;
            for (id, mask) in items {
                let inst = Instance::from_mask(mask.clone(), 1.0)?;
                let feature = instance_feature(&inst, &image, cfg, embedder)?;
                self.entries.insert(id, RosterEntry { frame, mask, feature });
            }
        }
        Ok(())
    }

    fn candidates(&self, ids: &[u32]) -> Result<(Vec<ReidCandidate>, Vec<u32>)> {
        let mut out = Vec::new();
        let mut out_ids = Vec::new();
        for id in ids {
            if let Some(e) = self.entries.get(id) {
                out.push(ReidCandidate {
                    mask: e.mask.clone(),
                    centroid: centroid(&e.mask)?,
                    feature: e.feature.clone(),
                });
                out_ids.push(*id);
            }
        }
        Ok((out, out_ids))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptiveCount {
    pub expected: usize,
    pub excluded: Vec<u32>,
}

/// Drops identities with no visible mask in the last `window` frames of
/// `prev`.
pub fn adaptive_count(prev: &[Track], window: usize) -> AdaptiveCount {
    let Some(&last) = frames_of(prev).iter().next_back() else {
        return AdaptiveCount {
            expected: 0,
            excluded: Vec::new(),
        };
    };
    let start = (last + 1).saturating_sub(window as u64);
    let excluded: Vec<u32> = prev
        .iter()
        .filter(|t| !t.entries.range(start..=last).any(|(_, e)| e.visible))
        .map(|t| t.identity)
        .collect();
    AdaptiveCount {
        expected: prev.len() - excluded.len(),
        excluded,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    /// Anchor in the next clip with identities assigned.
    pub anchor: Anchor,
    pub path: InitPath,
    /// Identities left out of the next clip.
    pub excluded: Vec<u32>,
}

/// Models the matcher needs.
pub struct Backends<'a> {
    pub detector: &'a dyn Detector,
    pub propagator: &'a dyn Propagator,
    pub embedder: &'a dyn Embedder,
}

/// Initialises `next` from the end of the previous clip.
///
/// Tried in order: carrying clean masks from the last `anchor_window`
/// frames of `prev` into the first frame of `next`; detecting an anchor in
/// `next` and restoring identities against the roster; and both again
/// after dropping identities that stayed invisible for `visibility_window`
/// frames.
#[allow(clippy::too_many_arguments)]
pub fn match_clips(
    prev: &[Track],
    roster: &Roster,
    next: &Clip,
    backends: &Backends,
    pen: &PenRegion,
    cfg: &PipelineConfig,
    reid_cfg: &ReidConfig,
) -> Result<MatchOutcome> {
    if prev.is_empty() {
        return Err(Error::Invalid("matching needs tracks from the previous clip".into()));
    }
    let all: Vec<u32> = roster.ids();
    if let Some(anchor) = transfer(prev, &all, next, backends.propagator, cfg)? {
        return Ok(MatchOutcome {
            anchor,
            path: InitPath::Transfer,
            excluded: Vec::new(),
        });
    }
    if let Some(anchor) = redetect(roster, &all, next, backends, pen, cfg, reid_cfg)? {
        return Ok(MatchOutcome {
            anchor,
            path: InitPath::Redetect,
            excluded: Vec::new(),
        });
    }

    let counted = adaptive_count(prev, cfg.visibility_window);
    let dropped: BTreeSet<u32> = counted
        .excluded
        .iter()
        .copied()
        .chain(all.iter().copied().filter(|id| !prev.iter().any(|t| t.identity == *id)))
        .collect();
    let reduced: Vec<u32> = all.iter().copied().filter(|id| !dropped.contains(id)).collect();
    log::info!(
        "clip {}: expected count reduced to {} (dropped {:?})",
        next.index,
        reduced.len(),
        dropped
    );
    let excluded: Vec<u32> = dropped.into_iter().collect();
    if reduced.is_empty() || reduced.len() == all.len() {
        return Err(Error::Irrecoverable(next.index));
    }
    if let Some(anchor) = transfer(prev, &reduced, next, backends.propagator, cfg)? {
        return Ok(MatchOutcome {
            anchor,
            path: InitPath::ReducedTransfer,
            excluded,
        });
    }
    if let Some(anchor) = redetect(roster, &reduced, next, backends, pen, cfg, reid_cfg)? {
        return Ok(MatchOutcome {
            anchor,
            path: InitPath::ReducedRedetect,
            excluded,
        });
    }
    Err(Error::Irrecoverable(next.index))
}

fn transfer(
    prev: &[Track],
    ids: &[u32],
    next: &Clip,
    propagator: &dyn Propagator,
    cfg: &PipelineConfig,
) -> Result<Option<Anchor>> {
    let Some(first) = next.frames.first() else {
        return Ok(None);
    };
    let mut chosen: Vec<&Track> = Vec::with_capacity(ids.len());
    for id in ids {
        match prev.iter().find(|t| t.identity == *id) {
            Some(t) => chosen.push(t),
            None => return Ok(None),
        }
    }
    let frames: Vec<u64> = frames_of(prev).into_iter().rev().take(cfg.anchor_window).collect();
    'frames: for frame in frames {
        let mut masks = Vec::with_capacity(chosen.len());
        for t in &chosen {
            match t.entries.get(&frame) {
                Some(e) if e.visible && e.mask.area() >= cfg.qc_min_area => masks.push(&e.mask),
                _ => continue 'frames,
            }
        }
        for i in 0..masks.len() {
            for j in i + 1..masks.len() {
                if mask_iou(masks[i], masks[j])? > cfg.qc_overlap_threshold {
                    continue 'frames;
                }
            }
        }
        let memory: Vec<(u32, BitMask)> = ids.iter().copied().zip(masks.into_iter().cloned()).collect();
        let carried = match propagator.propagate(&memory, first) {
            Ok(m) if m.len() == memory.len() => m,
            Ok(_) => continue,
            Err(e) => {
                log::warn!("clip {}: transfer from frame {frame} failed: {e}", next.index);
                continue;
            }
        };
        if carried.iter().any(|m| m.area() < cfg.qc_min_area) {
            continue;
        }
        let instances = carried
            .into_iter()
            .zip(ids)
            .map(|(m, &id)| Instance::from_mask(m, 1.0).map(|i| i.with_identity(id)))
            .collect::<Result<Vec<_>>>()?;
        log::debug!("clip {}: masks carried over from frame {frame}", next.index);
        return Ok(Some(Anchor {
            position: 0,
            frame: first.index,
            instances,
        }));
    }
    Ok(None)
}

fn redetect(
    roster: &Roster,
    ids: &[u32],
    next: &Clip,
    backends: &Backends,
    pen: &PenRegion,
    cfg: &PipelineConfig,
    reid_cfg: &ReidConfig,
) -> Result<Option<Anchor>> {
    let found = find_anchor(next, backends.detector, pen, cfg, ids.len(), 0, cfg.scan_stride)?;
    let Some(mut anchor) = found else {
        return Ok(None);
    };
    let image = next.frames[anchor.position].appearance(next.width, next.height)?;
    let new: Vec<ReidCandidate> = anchor
        .instances
        .iter()
        .map(|i| candidate(i, &image, reid_cfg, backends.embedder))
        .collect::<Result<_>>()?;
    let (old, old_ids) = roster.candidates(ids)?;
    let outcome = reidentify_candidates(&new, &old, &old_ids, reid_cfg, roster.next_fresh())?;
    if !outcome.fresh.is_empty() {
        log::info!("clip {}: new identities {:?}", next.index, outcome.fresh);
    }
    for (inst, id) in anchor.instances.iter_mut().zip(outcome.identities) {
        inst.identity = Some(id);
    }
    Ok(Some(anchor))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn visibility(id: u32, visible: &[bool]) -> Track {
        let mut t = Track::new(id);
        for (f, &v) in visible.iter().enumerate() {
            let m = if v {
                BitMask::rect(20, 20, 1, 1, 3, 3)
            } else {
                BitMask::new(20, 20)
            };
            t.insert(f as u64, m);
        }
        t
    }

    #[test]
    fn adaptive_examples() {
        let mut tracks: Vec<Track> = (1..=10).map(|id| visibility(id, &[true; 8])).collect();
        assert_eq!(
            adaptive_count(&tracks, 5),
            AdaptiveCount { expected: 10, excluded: vec![] }
        );
        tracks[6] = visibility(7, &[true, true, true, false, false, false, false, false]);
        assert_eq!(
            adaptive_count(&tracks, 5),
            AdaptiveCount { expected: 9, excluded: vec![7] }
        );
        // one visible frame inside the window keeps it
        assert_eq!(adaptive_count(&tracks, 6).expected, 10);
        let none: Vec<Track> = (1..=3).map(|id| visibility(id, &[false; 4])).collect();
        assert_eq!(
            adaptive_count(&none, 4),
            AdaptiveCount { expected: 0, excluded: vec![1, 2, 3] }
        );
    }
}
