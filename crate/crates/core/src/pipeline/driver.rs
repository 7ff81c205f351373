use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{Instance, PenRegion};
use crate::mask::centroid;
use crate::refine::RefineConfig;
use crate::reid::{candidate, instance_feature, reidentify_candidates, ReidCandidate, ReidConfig};
use crate::track::{Track, TrackEntry};

use super::matcher::{match_clips, Backends, InitPath, Roster};
use super::{bidirectional_track, find_anchor, find_reference_frame, post_qc, Anchor, Clip, FrameSpan, PipelineConfig, QcReport};

/// Every tunable of a tracking run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingConfig {
    pub pipeline: PipelineConfig,
    pub refine: RefineConfig,
    pub reid: ReidConfig,
}

impl TrackingConfig {
    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.refine.validate()?;
        self.reid.normalized()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipStatus {
    Tracked,
    Irrecoverable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipReport {
    pub index: u32,
    pub first_frame: u64,
    pub last_frame: u64,
    pub status: ClipStatus,
    pub path: Option<InitPath>,
    pub anchor_frame: Option<u64>,
    /// Identities tracked in this clip.
    pub identities: Vec<u32>,
    /// Known identities left out of this clip.
    pub excluded: Vec<u32>,
    pub propagation_failures: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEvent {
    pub clip: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedSpan {
    pub span: FrameSpan,
    pub identities: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub clips: Vec<ClipReport>,
    /// Quality check before re-tracking.
    pub qc: QcReport,
    /// Spans that were re-tracked.
    pub retracked: Vec<FrameSpan>,
    /// Spans still flagged after re-tracking, with their masks cleared.
    pub excluded_spans: Vec<ExcludedSpan>,
    /// Quality check of the returned tracks.
    pub final_qc: QcReport,
    pub events: Vec<RunEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub tracks: Vec<Track>,
    pub report: RunReport,
}

struct Run<'a> {
    clips: &'a [Clip],
    backends: &'a Backends<'a>,
    pen: &'a PenRegion,
    cfg: &'a TrackingConfig,
    tracks: BTreeMap<u32, Track>,
    events: Vec<RunEvent>,
}

/// Tracks identities through consecutive clips, then checks the result and
/// re-tracks each flagged span once. Clips that cannot be initialised are
/// reported and skipped.
pub fn run_long_term(
    clips: &[Clip],
    backends: &Backends,
    pen: &PenRegion,
    cfg: &TrackingConfig,
) -> Result<RunResult> {
    cfg.validate()?;
    let mut run = Run {
        clips,
        backends,
        pen,
        cfg,
        tracks: BTreeMap::new(),
        events: Vec::new(),
    };
    let mut roster = Roster::default();
    let mut reports = Vec::with_capacity(clips.len());
    let mut last_good: Option<usize> = None;

    for (ci, clip) in clips.iter().enumerate() {
        let mut report = ClipReport {
            index: clip.index,
            first_frame: clip.first_frame(),
            last_frame: clip.last_frame(),
            status: ClipStatus::Irrecoverable,
            path: None,
            anchor_frame: None,
            identities: Vec::new(),
            excluded: Vec::new(),
            propagation_failures: Vec::new(),
        };
        match run.track_clip(ci, last_good, &mut roster) {
            Ok((path, anchor, failures)) => {
                let ids: BTreeSet<u32> = anchor.instances.iter().filter_map(|i| i.identity).collect();
                report.status = ClipStatus::Tracked;
                report.path = Some(path);
                report.anchor_frame = Some(anchor.frame);
                report.excluded = roster.ids().into_iter().filter(|id| !ids.contains(id)).collect();
                report.identities = ids.into_iter().collect();
                report.propagation_failures = failures;
                last_good = Some(ci);
            }
            Err(e) => {
                log::warn!("clip {}: skipped: {e}", clip.index);
                run.event(clip.index, format!("clip skipped: {e}"));
            }
        }
        reports.push(report);
    }

    let qc = post_qc(&run.track_list(), &cfg.pipeline)?;
    let mut retracked = Vec::new();
    for span in &qc.error_spans {
        for (ci, part) in split_by_clip(clips, *span) {
            if reports[ci].status != ClipStatus::Tracked {
                continue;
            }
            match run.retrack(ci, part.start, &reports[ci].identities) {
                Ok(true) => retracked.push(part),
                Ok(false) => run.event(clips[ci].index, format!("no anchor to re-track frames {}..={}", part.start, part.end)),
                Err(e) => run.event(clips[ci].index, format!("re-tracking from frame {} failed: {e}", part.start)),
            }
        }
    }

    let after = post_qc(&run.track_list(), &cfg.pipeline)?;
    let mut excluded_spans = Vec::new();
    for span in &after.error_spans {
        let ids: BTreeSet<u32> = after
            .flags
            .iter()
            .filter(|f| span.contains(f.frame))
            .flat_map(|f| f.identities.iter().copied())
            .collect();
        for id in &ids {
            if let Some(t) = run.tracks.get_mut(id) {
                for (_, e) in t.entries.range_mut(span.start..=span.end) {
                    let (w, h) = e.mask.dims();
                    *e = TrackEntry::hidden(w, h);
                }
            }
        }
        log::info!("frames {}..={} excluded for {:?}", span.start, span.end, ids);
        excluded_spans.push(ExcludedSpan {
            span: *span,
            identities: ids.into_iter().collect(),
        });
    }

    let tracks = run.track_list();
    let final_qc = post_qc(&tracks, &cfg.pipeline)?;
    Ok(RunResult {
        tracks,
        report: RunReport {
            clips: reports,
            qc,
            retracked,
            excluded_spans,
            final_qc,
            events: run.events,
        },
    })
}

/// Parts of `span` falling in each clip, by clip position.
fn split_by_clip(clips: &[Clip], span: FrameSpan) -> Vec<(usize, FrameSpan)> {
    clips
        .iter()
        .enumerate()
        .filter_map(|(ci, c)| {
            let start = span.start.max(c.first_frame());
            let end = span.end.min(c.last_frame());
            (start <= end && !c.frames.is_empty()).then_some((ci, FrameSpan { start, end }))
        })
        .collect()
}

impl Run<'_> {
    fn event(&mut self, clip: u32, message: String) {
        self.events.push(RunEvent { clip, message });
    }

    fn track_list(&self) -> Vec<Track> {
        self.tracks.values().cloned().collect()
    }

    fn tracks_within(&self, clip: &Clip) -> Vec<Track> {
        let (a, b) = (clip.first_frame(), clip.last_frame());
        self.tracks
            .values()
            .map(|t| {
                let mut c = Track::new(t.identity);
                c.entries = t.entries.range(a..=b).map(|(k, v)| (*k, v.clone())).collect();
                c.refine_state = t.refine_state.clone();
                c
            })
            .filter(|t| !t.entries.is_empty())
            .collect()
    }

    fn track_clip(
        &mut self,
        ci: usize,
        last_good: Option<usize>,
        roster: &mut Roster,
    ) -> Result<(InitPath, Anchor, Vec<u64>)> {
        let clip = &self.clips[ci];
        clip.validate()?;
        let pcfg = &self.cfg.pipeline;
        let (anchor, path) = match last_good {
            None => {
                let mut anchor = find_reference_frame(clip, self.backends.detector, self.pen, pcfg)?
                    .ok_or(Error::Irrecoverable(clip.index))?;
                for (id, inst) in (roster.next_fresh()..).zip(anchor.instances.iter_mut()) {
                    inst.identity = Some(id);
                }
                (anchor, InitPath::Reference)
            }
            Some(prev) => {
                let prev_tracks = self.tracks_within(&self.clips[prev]);
                let m = match_clips(&prev_tracks, roster, clip, self.backends, self.pen, pcfg, &self.cfg.reid)?;
                (m.anchor, m.path)
            }
        };
        log::info!(
            "clip {}: initialised via {:?} at frame {} with {} identities",
            clip.index,
            path,
            anchor.frame,
            anchor.instances.len()
        );
        let tracked = bidirectional_track(clip, &anchor, self.backends.propagator, self.pen, &self.cfg.refine)?;
        for f in &tracked.failed_frames {
            self.event(clip.index, format!("propagation failed on frame {f}"));
        }
        roster.update(&tracked.tracks, clip, &self.cfg.reid, self.backends.embedder)?;
        for t in tracked.tracks {
            let slot = self.tracks.entry(t.identity).or_insert_with(|| Track::new(t.identity));
            slot.entries.extend(t.entries);
            slot.refine_state = t.refine_state;
        }
        for id in roster.ids() {
            let slot = self.tracks.entry(id).or_insert_with(|| Track::new(id));
            for f in &clip.frames {
                slot.entries
                    .entry(f.index)
                    .or_insert_with(|| TrackEntry::hidden(clip.width, clip.height));
            }
        }
        Ok((path, anchor, tracked.failed_frames))
    }

    /// Re-tracks `ids` in clip `ci` from frame `start` to the clip end.
    /// Returns false when no clean anchor exists in that range.
    fn retrack(&mut self, ci: usize, start: u64, ids: &[u32]) -> Result<bool> {
        let clip = &self.clips[ci];
        let Some(pos) = clip.position_of(start) else {
            return Ok(false);
        };
        let tail = clip.tail_from(pos);
        let pcfg = &self.cfg.pipeline;
        let Some(mut anchor) = find_anchor(&tail, self.backends.detector, self.pen, pcfg, ids.len(), 0, 1)? else {
            return Ok(false);
        };

        // identities as they were just before the span
        let mut old = Vec::new();
        let mut old_ids = Vec::new();
        for &id in ids {
            let Some(t) = self.tracks.get(&id) else { continue };
            let Some((f, mask)) = start.checked_sub(1).and_then(|s| t.last_visible_before(s)) else {
                continue;
            };
            let image = self.frame_image(f)?;
            let inst = Instance::from_mask(mask.clone(), 1.0)?;
            old.push(ReidCandidate {
                mask: mask.clone(),
                centroid: centroid(mask)?,
                feature: instance_feature(&inst, &image, &self.cfg.reid, self.backends.embedder)?,
            });
            old_ids.push(id);
        }
        let image = tail.frames[anchor.position].appearance(clip.width, clip.height)?;
        let new: Vec<ReidCandidate> = anchor
            .instances
            .iter()
            .map(|i| candidate(i, &image, &self.cfg.reid, self.backends.embedder))
            .collect::<Result<_>>()?;
        let next_fresh = self.tracks.keys().next_back().map_or(1, |m| m + 1);
        let outcome = reidentify_candidates(&new, &old, &old_ids, &self.cfg.reid, next_fresh)?;
        for (inst, id) in anchor.instances.iter_mut().zip(outcome.identities) {
            inst.identity = Some(id);
        }
        let tracked = bidirectional_track(&tail, &anchor, self.backends.propagator, self.pen, &self.cfg.refine)?;
        let end = clip.last_frame();
        for &id in ids {
            if let Some(t) = self.tracks.get_mut(&id) {
                for (_, e) in t.entries.range_mut(start..=end) {
                    let (w, h) = e.mask.dims();
                    *e = TrackEntry::hidden(w, h);
                }
            }
        }
        for t in tracked.tracks {
            let slot = self.tracks.entry(t.identity).or_insert_with(|| Track::new(t.identity));
            slot.entries.extend(t.entries);
        }
        log::info!("clip {}: re-tracked from frame {start} (anchor {})", clip.index, anchor.frame);
        Ok(true)
    }

    fn frame_image(&self, frame: u64) -> Result<crate::image::GrayImage> {
        for c in self.clips {
            if let Some(p) = c.position_of(frame) {
                return c.frames[p].appearance(c.width, c.height);
            }
        }
        Err(Error::Invalid(format!("frame {frame} not found")))
    }
}
