use std::collections::{BTreeMap, BTreeSet};

use crate::mask::BitMask;
use crate::refine::RefineState;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackEntry {
    pub mask: BitMask,
    pub visible: bool,
}

impl TrackEntry {
    pub fn new(mask: BitMask) -> Self {
        let visible = !mask.is_empty();
        Self { mask, visible }
    }

    pub fn hidden(width: u32, height: u32) -> Self {
        Self {
            mask: BitMask::new(width, height),
            visible: false,
        }
    }
}

/// One identity's masks keyed by global frame index.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub identity: u32,
    pub entries: BTreeMap<u64, TrackEntry>,
    pub refine_state: RefineState,
}

impl Track {
    pub fn new(identity: u32) -> Self {
        Self {
            identity,
            entries: BTreeMap::new(),
            refine_state: RefineState::default(),
        }
    }

    pub fn insert(&mut self, frame: u64, mask: BitMask) {
        self.entries.insert(frame, TrackEntry::new(mask));
    }

    pub fn mask_at(&self, frame: u64) -> Option<&BitMask> {
        self.entries.get(&frame).map(|e| &e.mask)
    }

    pub fn visible_at(&self, frame: u64) -> bool {
        self.entries.get(&frame).is_some_and(|e| e.visible)
    }

    /// Most recent visible entry at or before `frame`.
    pub fn last_visible_before(&self, frame: u64) -> Option<(u64, &BitMask)> {
        self.entries
            .range(..=frame)
            .rev()
            .find(|(_, e)| e.visible)
            .map(|(&f, e)| (f, &e.mask))
    }
}

/// Sorted union of the frames referenced by any track.
pub fn frames_of(tracks: &[Track]) -> BTreeSet<u64> {
    tracks
        .iter()
        .flat_map(|t| t.entries.keys().copied())
        .collect()
}

/// Visible masks at `frame`, by identity.
pub fn visible_at(tracks: &[Track], frame: u64) -> Vec<(u32, &BitMask)> {
    tracks
        .iter()
        .filter_map(|t| {
            t.entries
                .get(&frame)
                .filter(|e| e.visible)
                .map(|e| (t.identity, &e.mask))
        })
        .collect()
}
