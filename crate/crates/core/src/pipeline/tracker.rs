use crate::error::{Error, Result};
use crate::filters::PenRegion;
use crate::mask::BitMask;
use crate::refine::{refine_mask, RefineConfig, RefineState};
use crate::track::Track;

use super::{Anchor, Clip, Propagator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Tracks for one clip plus the frames on which the propagator failed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedClip {
    pub tracks: Vec<Track>,
    pub failed_frames: Vec<u64>,
}

struct Refiner<'a> {
    pen: &'a PenRegion,
    cfg: &'a RefineConfig,
}

fn anchor_ids(anchor: &Anchor) -> Result<Vec<u32>> {
    anchor
        .instances
        .iter()
        .map(|i| {
            i.identity
                .ok_or_else(|| Error::Invalid("anchor instance without identity".into()))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_direction(
    clip: &Clip,
    anchor_pos: usize,
    seeds: &[BitMask],
    direction: Direction,
    propagator: &dyn Propagator,
    refiner: Option<&Refiner>,
    states: &mut [RefineState],
    tracks: &mut [Track],
    failed: &mut Vec<u64>,
) -> Result<()> {
    let positions: Box<dyn Iterator<Item = usize>> = match direction {
        Direction::Forward => Box::new(anchor_pos + 1..clip.frames.len()),
        Direction::Backward => Box::new((0..anchor_pos).rev()),
    };
    let mut memory: Vec<(u32, BitMask)> = tracks
        .iter()
        .zip(seeds)
        .map(|(t, m)| (t.identity, m.clone()))
        .collect();

    for pos in positions {
        let frame = &clip.frames[pos];
        let emitted = match propagator.propagate(&memory, frame) {
            Ok(masks) if masks.len() == memory.len() => masks,
            Ok(masks) => {
                log::warn!(
                    "frame {}: propagator returned {} masks for {} identities",
                    frame.index,
                    masks.len(),
                    memory.len()
                );
                failed.push(frame.index);
                vec![BitMask::new(clip.width, clip.height); memory.len()]
            }
            Err(e) => {
                log::warn!("frame {}: {e}", frame.index);
                failed.push(frame.index);
                vec![BitMask::new(clip.width, clip.height); memory.len()]
            }
        };
        for (k, mask) in emitted.into_iter().enumerate() {
            let mask = match refiner {
                Some(r) => {
                    let (cleaned, next) = refine_mask(&mask, r.pen, &states[k], r.cfg)?;
                    states[k] = next;
                    cleaned
                }
                None => mask,
            };
            if !mask.is_empty() {
                memory[k].1 = mask.clone();
            }
            tracks[k].insert(frame.index, mask);
        }
    }
    Ok(())
}

/// Unrefined propagation from the anchor in one direction. The anchor frame
/// itself is included.
pub fn propagate(
    anchor: &Anchor,
    clip: &Clip,
    direction: Direction,
    propagator: &dyn Propagator,
) -> Result<TrackedClip> {
    let ids = anchor_ids(anchor)?;
    let seeds: Vec<BitMask> = anchor.instances.iter().map(|i| i.mask.clone()).collect();
    let mut tracks: Vec<Track> = ids.iter().map(|&id| Track::new(id)).collect();
    for (t, m) in tracks.iter_mut().zip(&seeds) {
        t.insert(anchor.frame, m.clone());
    }
    let mut states = vec![RefineState::default(); ids.len()];
    let mut failed = Vec::new();
    run_direction(
        clip,
        anchor.position,
        &seeds,
        direction,
        propagator,
        None,
        &mut states,
        &mut tracks,
        &mut failed,
    )?;
    Ok(TrackedClip {
        tracks,
        failed_frames: failed,
    })
}

/// Propagates forward to the clip end and backward to the clip start,
/// refining every mask on the way. Every clip frame gets exactly one entry
/// per identity.
pub fn bidirectional_track(
    clip: &Clip,
    anchor: &Anchor,
    propagator: &dyn Propagator,
    pen: &PenRegion,
    refine_cfg: &RefineConfig,
) -> Result<TrackedClip> {
    let ids = anchor_ids(anchor)?;
    if anchor.position >= clip.frames.len() || clip.frames[anchor.position].index != anchor.frame {
        return Err(Error::Invalid(format!(
            "anchor frame {} is not at position {} of clip {}",
            anchor.frame, anchor.position, clip.index
        )));
    }
    let refiner = Refiner { pen, cfg: refine_cfg };
    let mut tracks: Vec<Track> = ids.iter().map(|&id| Track::new(id)).collect();
    let mut anchor_states = Vec::with_capacity(ids.len());
    let mut seeds = Vec::with_capacity(ids.len());
    for (t, inst) in tracks.iter_mut().zip(&anchor.instances) {
        let (cleaned, st) = refine_mask(&inst.mask, pen, &RefineState::default(), refine_cfg)?;
        t.insert(anchor.frame, cleaned.clone());
        seeds.push(if cleaned.is_empty() { inst.mask.clone() } else { cleaned });
        anchor_states.push(st);
    }

    let mut failed = Vec::new();
    let mut forward_states = anchor_states.clone();
    run_direction(
        clip,
        anchor.position,
        &seeds,
        Direction::Forward,
        propagator,
        Some(&refiner),
        &mut forward_states,
        &mut tracks,
        &mut failed,
    )?;
    let mut backward_states = anchor_states;
    run_direction(
        clip,
        anchor.position,
        &seeds,
        Direction::Backward,
        propagator,
        Some(&refiner),
        &mut backward_states,
        &mut tracks,
        &mut failed,
    )?;
    for (t, st) in tracks.iter_mut().zip(forward_states) {
        t.refine_state = st;
    }
    failed.sort_unstable();
    Ok(TrackedClip {
        tracks,
        failed_frames: failed,
    })
}
