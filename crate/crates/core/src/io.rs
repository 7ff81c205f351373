//! On-disk JSON schemas for frames, tracks and pens.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{Instance, PenConfig};
use crate::mask::{rle_decode, rle_encode, BBox, RleMask};
use crate::pipeline::{Clip, ExcludedSpan, FrameRecord, ImageRef, QcFlag};
use crate::reid::FeatureVector;
use crate::track::{Track, TrackEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionJson {
    pub confidence: f64,
    pub bbox: BBox,
    pub rle: RleMask,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<FeatureVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameJson {
    pub index: u64,
    pub image: Option<String>,
    #[serde(default)]
    pub foreground_rle: Option<RleMask>,
    #[serde(default)]
    pub detections: Vec<DetectionJson>,
}

/// One clip of input frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramesFile {
    pub clip_index: u32,
    pub width: u32,
    pub height: u32,
    pub frames: Vec<FrameJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

fn decode_sized(rle: &RleMask, width: u32, height: u32, what: &str) -> Result<crate::mask::BitMask> {
    if rle.size != [height, width] {
        return Err(Error::Invalid(format!(
            "{what}: mask size {:?} differs from frame size [{height}, {width}]",
            rle.size
        )));
    }
    rle_decode(rle)
}

impl FramesFile {
    /// Builds a clip; relative image paths resolve against `base_dir`.
    pub fn into_clip(self, base_dir: &Path) -> Result<Clip> {
        let (w, h) = (self.width, self.height);
        let mut frames = Vec::with_capacity(self.frames.len());
        for f in self.frames {
            let image = match f.image {
                None => ImageRef::None,
                Some(p) => {
                    let p = PathBuf::from(p);
                    ImageRef::Path(if p.is_absolute() { p } else { base_dir.join(p) })
                }
            };
            let foreground = f
                .foreground_rle
                .as_ref()
                .map(|r| decode_sized(r, w, h, &format!("frame {} foreground", f.index)))
                .transpose()?;
            let mut detections = Vec::with_capacity(f.detections.len());
            for (k, d) in f.detections.into_iter().enumerate() {
                let what = format!("frame {} detection {k}", f.index);
                let mask = decode_sized(&d.rle, w, h, &what)?;
                if mask.is_empty() {
                    return Err(Error::Invalid(format!("{what}: empty mask")));
                }
                let mut inst = Instance::from_mask(mask, d.confidence)
                    .map_err(|e| Error::Invalid(format!("{what}: {e}")))?;
                inst.bbox = d.bbox;
                inst.embedding = d.embedding;
                detections.push(inst);
            }
            frames.push(FrameRecord {
                index: f.index,
                image,
                foreground,
                detections,
            });
        }
        let clip = Clip {
            index: self.clip_index,
            width: w,
            height: h,
            frames,
        };
        clip.validate()?;
        Ok(clip)
    }

    /// Serialisable form of a clip. `image_path` names the image of each
    /// frame, or `None` to leave it out.
    pub fn from_clip(clip: &Clip, image_path: impl Fn(&FrameRecord) -> Option<String>) -> Self {
        FramesFile {
            clip_index: clip.index,
            width: clip.width,
            height: clip.height,
            frames: clip
                .frames
                .iter()
                .map(|f| FrameJson {
                    index: f.index,
                    image: image_path(f),
                    foreground_rle: f.foreground.as_ref().map(rle_encode),
                    detections: f
                        .detections
                        .iter()
                        .map(|d| DetectionJson {
                            confidence: d.confidence,
                            bbox: d.bbox,
                            rle: rle_encode(&d.mask),
                            embedding: d.embedding.clone(),
                        })
                        .collect(),
                })
                .collect(),
            provenance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryJson {
    pub frame: u64,
    pub rle: RleMask,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackJson {
    pub id: u32,
    pub entries: Vec<EntryJson>,
}

/// Tracks with their quality flags. Also used for ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TracksFile {
    pub tracks: Vec<TrackJson>,
    #[serde(default)]
    pub qc: Vec<QcFlag>,
    #[serde(default)]
    pub excluded_spans: Vec<ExcludedSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl TracksFile {
    pub fn from_tracks(tracks: &[Track]) -> Self {
        TracksFile {
            tracks: tracks
                .iter()
                .map(|t| TrackJson {
                    id: t.identity,
                    entries: t
                        .entries
                        .iter()
                        .map(|(&frame, e)| EntryJson {
                            frame,
                            rle: rle_encode(&e.mask),
                            visible: e.visible,
                        })
                        .collect(),
                })
                .collect(),
            qc: Vec::new(),
            excluded_spans: Vec::new(),
            provenance: None,
        }
    }

    pub fn to_tracks(&self) -> Result<Vec<Track>> {
        let mut out: Vec<Track> = Vec::with_capacity(self.tracks.len());
        for tj in &self.tracks {
            if out.iter().any(|t| t.identity == tj.id) {
                return Err(Error::Invalid(format!("duplicate track id {}", tj.id)));
            }
            let mut t = Track::new(tj.id);
            for e in &tj.entries {
                let mask = rle_decode(&e.rle)?;
                let visible = e.visible && !mask.is_empty();
                if t.entries.insert(e.frame, TrackEntry { mask, visible }).is_some() {
                    return Err(Error::Invalid(format!(
                        "track {} has two entries for frame {}",
                        tj.id, e.frame
                    )));
                }
            }
            out.push(t);
        }
        out.sort_by_key(|t| t.identity);
        Ok(out)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

pub fn load_clip(path: &Path) -> Result<Clip> {
    let file: FramesFile = read_json(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    file.into_clip(base)
}

pub fn load_tracks(path: &Path) -> Result<Vec<Track>> {
    read_json::<TracksFile>(path)?.to_tracks()
}

pub fn load_pen(path: &Path) -> Result<PenConfig> {
    read_json(path)
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Invalid(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::BitMask;

    #[test]
    fn tracks_round_trip() {
        let mut t = Track::new(4);
        t.insert(0, BitMask::rect(20, 10, 2, 2, 4, 3));
        t.insert(1, BitMask::new(20, 10));
        let file = TracksFile::from_tracks(&[t.clone()]);
        let text = serde_json::to_string(&file).unwrap();
        let back: TracksFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_tracks().unwrap(), vec![t]);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn frames_schema() {
        let text = r#"{"clip_index":0,"width":3,"height":2,"frames":[
            {"index":5,"image":null,"foreground_rle":{"size":[2,3],"counts":[2,2,2]},
             "detections":[{"confidence":0.9,"bbox":[1,0,1,2],"rle":{"size":[2,3],"counts":[2,2,2]}}]}]}"#;
        let f: FramesFile = serde_json::from_str(text).unwrap();
        let clip = f.clone().into_clip(Path::new(".")).unwrap();
        assert_eq!(clip.frames[0].detections[0].mask.area(), 2);
        let again = FramesFile::from_clip(&clip, |_| None);
        assert_eq!(again, f);

        let bad = text.replace("\"width\":3", "\"width\":3,\"extra\":1");
        assert!(serde_json::from_str::<FramesFile>(&bad).is_err());
        let wrong_size = text.replace("\"width\":3", "\"width\":4");
        let f: FramesFile = serde_json::from_str(&wrong_size).unwrap();
        assert!(f.into_clip(Path::new(".")).is_err());
    }
}
