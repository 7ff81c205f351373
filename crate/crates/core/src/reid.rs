//! Feature- and location-aware re-identification.
//!
//! Each masked crop is contrast enhanced and embedded; new and old objects are
//! compared through appearance (cosine), overlap (mask IoU) and centroid
//! proximity, and the weighted cost matrix is solved with the Hungarian
//! algorithm.

use serde::{Deserialize, Serialize};

use crate::assign::{hungarian, AssignmentResult};
use crate::error::{Error, Result};
use crate::filters::Instance;
use crate::image::{crop, GrayImage};
use crate::mask::{mask_iou, BitMask, Point};

/// Fixed-length appearance descriptor with its cached Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    norm: f64,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite feature entry".into()));
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(Self { values, norm })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * k).collect())
    }
}

impl Serialize for FeatureVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.values.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FeatureVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        FeatureVector::new(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReidConfig {
    /// appearance weight
    pub alpha: f64,
    /// mask overlap weight
    pub beta: f64,
    /// centroid proximity weight
    pub gamma_w: f64,
    /// Centroid normaliser in pixels; the frame diagonal when unset.
    pub d_max: Option<f64>,
    pub gamma_correction: f64,
    pub crop_pad: u32,
}

impl Default for ReidConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.3,
            gamma_w: 0.2,
            d_max: None,
            gamma_correction: 0.6,
            crop_pad: 4,
        }
    }
}

impl ReidConfig {
    /// Validates and rescales the three weights to sum to one.
    pub fn normalized(&self) -> Result<Self> {
        let w = [self.alpha, self.beta, self.gamma_w];
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("reid weights must be non-negative".into()));
        }
        let sum: f64 = w.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Config("reid weights sum to zero".into()));
        }
        if let Some(d) = self.d_max {
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::Config("d_max must be positive".into()));
            }
        }
        if !self.gamma_correction.is_finite() || self.gamma_correction <= 0.0 {
            return Err(Error::Config("gamma_correction must be positive".into()));
        }
        Ok(Self {
            alpha: self.alpha / sum,
            beta: self.beta / sum,
            gamma_w: self.gamma_w / sum,
            ..self.clone()
        })
    }

    fn d_max_for(&self, width: u32, height: u32) -> f64 {
        self.d_max
            .unwrap_or_else(|| (width as f64).hypot(height as f64))
    }
}

/// `v ← v^gamma` on every pixel.
pub fn gamma_correct(img: &GrayImage, gamma: f64) -> GrayImage {
    GrayImage::from_fn(img.width(), img.height(), |x, y| {
        (img.get(x, y).clamp(0.0, 1.0) as f64).powf(gamma) as f32
    })
}

/// Global histogram equalisation over the nonzero (in-mask) pixels on 256
/// levels. Each level maps to its cumulative share of the in-mask pixels, so
/// an already uniform histogram is a fixed point. A single-level histogram is
/// returned unchanged.
pub fn equalize_histogram(img: &GrayImage) -> GrayImage {
    let quant = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as usize;
    let mut hist = [0usize; 256];
    for &v in img.data() {
        if v > 0.0 {
            hist[quant(v)] += 1;
        }
    }
    let occupied = hist.iter().filter(|&&c| c > 0).count();
    if occupied <= 1 {
        return img.clone();
    }
    let total: usize = hist.iter().sum();
    let mut cdf = [0f32; 256];
    let mut acc = 0usize;
    for (q, &c) in hist.iter().enumerate() {
        acc += c;
        cdf[q] = acc as f32 / total as f32;
    }
    GrayImage::from_fn(img.width(), img.height(), |x, y| {
        let v = img.get(x, y);
        if v > 0.0 {
            cdf[quant(v)]
        } else {
            0.0
        }
    })
}

pub fn enhance_crop(crop: &GrayImage, cfg: &ReidConfig) -> GrayImage {
    equalize_histogram(&gamma_correct(crop, cfg.gamma_correction))
}

/// Appearance embedding contract. Implementations must be deterministic and
/// return vectors of length [`Embedder::dim`].
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, crop: &GrayImage) -> Result<FeatureVector>;
}

/// Reference embedder: the crop resampled to 32×32 by area averaging,
/// followed by a 16-bin intensity histogram. Histogram bins hold pixel shares
/// scaled by 32 so that both halves carry comparable weight.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceEmbedder;

pub const REFERENCE_SIDE: u32 = 32;
pub const REFERENCE_BINS: usize = 16;

impl Embedder for ReferenceEmbedder {
    fn dim(&self) -> usize {
        (REFERENCE_SIDE * REFERENCE_SIDE) as usize + REFERENCE_BINS
    }

    fn embed(&self, crop: &GrayImage) -> Result<FeatureVector> {
        if crop.is_empty() {
            return Err(Error::EmptyMask);
        }
        let resized = resize_area(crop, REFERENCE_SIDE, REFERENCE_SIDE);
        let mut values: Vec<f64> = resized.data().iter().map(|&v| v as f64).collect();
        let mut hist = [0f64; REFERENCE_BINS];
        for &v in crop.data() {
            let b = ((v.clamp(0.0, 1.0) * REFERENCE_BINS as f32) as usize).min(REFERENCE_BINS - 1);
            hist[b] += 1.0;
        }
        let n = crop.data().len() as f64;
        values.extend(hist.iter().map(|c| c / n * REFERENCE_SIDE as f64));
        FeatureVector::new(values)
    }
}

/// Area-averaging resample: each output pixel is the coverage-weighted mean of
/// the source pixels under its footprint.
pub fn resize_area(img: &GrayImage, out_w: u32, out_h: u32) -> GrayImage {
    fn weights(src: u32, dst: u32) -> Vec<Vec<(u32, f64)>> {
        let scale = src as f64 / dst as f64;
        (0..dst)
            .map(|o| {
                let (lo, hi) = (o as f64 * scale, (o + 1) as f64 * scale);
                let mut w = Vec::new();
                let mut s = lo.floor() as u32;
                while (s as f64) < hi && s < src {
                    let overlap = (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0);
                    if overlap > 0.0 {
                        w.push((s, overlap / scale));
                    }
                    s += 1;
                }
                w
            })
            .collect()
    }
    let wx = weights(img.width(), out_w);
    let wy = weights(img.height(), out_h);
    GrayImage::from_fn(out_w, out_h, |x, y| {
        let mut acc = 0.0;
        for &(sy, fy) in &wy[y as usize] {
            for &(sx, fx) in &wx[x as usize] {
                acc += img.get(sx, sy) as f64 * fx * fy;
            }
        }
        acc as f32
    })
}

pub fn cosine_similarity(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::FeatureLength(a.len(), b.len()));
    }
    if a.norm == 0.0 || b.norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok((dot / (a.norm * b.norm)).clamp(-1.0, 1.0))
}

/// `1 - distance / d_max`, floored at zero.
pub fn centroid_similarity(c_new: &Point, c_old: &Point, d_max: f64) -> f64 {
    (1.0 - c_new.distance(c_old) / d_max).max(0.0)
}

/// Everything the cost matrix needs about one object.
#[derive(Debug, Clone)]
pub struct ReidCandidate {
    pub mask: BitMask,
    pub centroid: Point,
    pub feature: FeatureVector,
}

/// `1 - (alpha·S_cos + beta·S_iou + gamma·S_centroid)` with normalised
/// weights. Negative cosine similarity counts as zero so costs stay in [0, 1].
pub fn weighted_cost(s_cos: f64, s_iou: f64, s_cent: f64, cfg: &ReidConfig) -> f64 {
    let c = 1.0 - (cfg.alpha * s_cos.max(0.0) + cfg.beta * s_iou + cfg.gamma_w * s_cent);
    c.clamp(0.0, 1.0)
}

pub fn build_cost_matrix(
    new: &[ReidCandidate],
    old: &[ReidCandidate],
    cfg: &ReidConfig,
) -> Result<Vec<Vec<f64>>> {
    let cfg = cfg.normalized()?;
    let mut rows = Vec::with_capacity(new.len());
    for n in new {
        let d_max = cfg.d_max_for(n.mask.width(), n.mask.height());
        let mut row = Vec::with_capacity(old.len());
        for o in old {
            let s_cos = cosine_similarity(&n.feature, &o.feature)?;
            let s_iou = mask_iou(&n.mask, &o.mask)?;
            let s_cent = centroid_similarity(&n.centroid, &o.centroid, d_max);
            row.push(weighted_cost(s_cos, s_iou, s_cent, &cfg));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Appearance feature for an instance: the supplied embedding if present,
/// otherwise crop → enhance → embed.
pub fn instance_feature(
    inst: &Instance,
    image: &GrayImage,
    cfg: &ReidConfig,
    embedder: &dyn Embedder,
) -> Result<FeatureVector> {
    if let Some(e) = &inst.embedding {
        return Ok(e.clone());
    }
    let c = crop(image, &inst.mask, cfg.crop_pad)?;
    embedder.embed(&enhance_crop(&c, cfg))
}

pub fn candidate(
    inst: &Instance,
    image: &GrayImage,
    cfg: &ReidConfig,
    embedder: &dyn Embedder,
) -> Result<ReidCandidate> {
    Ok(ReidCandidate {
        mask: inst.mask.clone(),
        centroid: inst.centroid,
        feature: instance_feature(inst, image, cfg, embedder)?,
    })
}

/// Identity assignment for the new frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ReidOutcome {
    pub assignment: AssignmentResult,
    /// Identity given to each new instance, in input order.
    pub identities: Vec<u32>,
    /// Old identities with no new counterpart.
    pub missing: Vec<u32>,
    /// Identities created for unmatched new instances.
    pub fresh: Vec<u32>,
}

/// Matches new candidates to old identities; unmatched new candidates get
/// consecutive identities starting at `next_fresh`.
pub fn reidentify_candidates(
    new: &[ReidCandidate],
    old: &[ReidCandidate],
    old_ids: &[u32],
    cfg: &ReidConfig,
    next_fresh: u32,
) -> Result<ReidOutcome> {
    if old.len() != old_ids.len() {
        return Err(Error::Invalid("one identity per old candidate required".into()));
    }
    let cost = build_cost_matrix(new, old, cfg)?;
    let assignment = if old.is_empty() {
        AssignmentResult::empty(new.len())
    } else {
        hungarian(&cost)?
    };
    let mut next = next_fresh;
    let mut fresh = Vec::new();
    let identities = assignment
        .mapping
        .iter()
        .map(|m| match m {
            Some(j) => old_ids[*j],
            None => {
                let id = next;
                next += 1;
                fresh.push(id);
                id
            }
        })
        .collect();
    let missing = old_ids
        .iter()
        .enumerate()
        .filter(|(j, _)| assignment.row_for(*j).is_none())
        .map(|(_, &id)| id)
        .collect();
    Ok(ReidOutcome {
        assignment,
        identities,
        missing,
        fresh,
    })
}

/// Relabels `new_frame` against the identities of `old_frame`.
pub fn reidentify(
    new_frame: &[Instance],
    old_frame: &[Instance],
    images: (&GrayImage, &GrayImage),
    cfg: &ReidConfig,
    embedder: &dyn Embedder,
) -> Result<ReidOutcome> {
    let cfg = cfg.normalized()?;
    let old_ids: Vec<u32> = old_frame
        .iter()
        .map(|o| {
            o.identity
                .ok_or_else(|| Error::Invalid("old instance without identity".into()))
        })
        .collect::<Result<_>>()?;
    let new_c: Vec<ReidCandidate> = new_frame
        .iter()
        .map(|i| candidate(i, images.0, &cfg, embedder))
        .collect::<Result<_>>()?;
    let old_c: Vec<ReidCandidate> = old_frame
        .iter()
        .map(|i| candidate(i, images.1, &cfg, embedder))
        .collect::<Result<_>>()?;
    let next_fresh = old_ids.iter().max().map_or(0, |m| m + 1);
    reidentify_candidates(&new_c, &old_c, &old_ids, &cfg, next_fresh)
}
