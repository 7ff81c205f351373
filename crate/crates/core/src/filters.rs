//! Detection-level filtering applied before tracking: pen boundary,
//! mask-level non-maximum suppression and top-k selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{centroid, mask_iou, BBox, BitMask, Point};
use crate::reid::FeatureVector;

/// One detected or segmented object in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub identity: Option<u32>,
    pub mask: BitMask,
    pub bbox: BBox,
    pub confidence: f64,
    pub centroid: Point,
    /// Externally supplied appearance feature; bypasses the embedder.
    pub embedding: Option<FeatureVector>,
}

impl Instance {
    /// Derives the box and centroid from a nonempty mask.
    pub fn from_mask(mask: BitMask, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Invalid(format!("confidence {confidence} outside [0,1]")));
        }
        let centroid = centroid(&mask)?;
        let bbox = mask.bbox().ok_or(Error::EmptyMask)?;
        Ok(Self {
            identity: None,
            mask,
            bbox,
            confidence,
            centroid,
            embedding: None,
        })
    }

    pub fn with_identity(mut self, id: u32) -> Self {
        self.identity = Some(id);
        self
    }
}

/// On-disk pen description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenConfig {
    pub camera_id: String,
    pub polygon: Vec<[f64; 2]>,
    /// `[width, height]`
    pub frame_size: [u32; 2],
}

/// Enclosure polygon with its raster at frame resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PenRegion {
    polygon: Vec<[f64; 2]>,
    raster: BitMask,
}

impl PenRegion {
    pub fn new(polygon: Vec<[f64; 2]>, width: u32, height: u32) -> Result<Self> {
        if polygon.len() < 3 {
            return Err(Error::Pen(format!("{} vertices, need at least 3", polygon.len())));
        }
        if polygon.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Pen("non-finite vertex".into()));
        }
        if self_intersects(&polygon) {
            return Err(Error::Pen("polygon edges cross".into()));
        }
        let raster = BitMask::from_fn(width, height, |x, y| {
            point_in_polygon(x as f64 + 0.5, y as f64 + 0.5, &polygon)
        });
        if raster.is_empty() {
            return Err(Error::Pen("polygon covers no pixel centre".into()));
        }
        Ok(Self { polygon, raster })
    }

    /// Axis-aligned rectangular pen.
    pub fn rect(width: u32, height: u32, x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]], width, height)
    }

    pub fn from_config(cfg: &PenConfig) -> Result<Self> {
        Self::new(cfg.polygon.clone(), cfg.frame_size[0], cfg.frame_size[1])
    }

    pub fn polygon(&self) -> &[[f64; 2]] {
        &self.polygon
    }

    pub fn raster(&self) -> &BitMask {
        &self.raster
    }
}

/// Even-odd rule.
fn point_in_polygon(px: f64, py: f64, poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let [xi, yi] = poly[i];
        let [xj, yj] = poly[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn self_intersects(poly: &[[f64; 2]]) -> bool {
    fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    }
    fn cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
        let d1 = orient(q1, q2, p1);
        let d2 = orient(q1, q2, p2);
        let d3 = orient(p1, p2, q1);
        let d4 = orient(p1, p2, q2);
        ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
            && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    }
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            // adjacent edges share a vertex
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

/// Share of the mask's pixels lying inside the pen.
pub fn pen_inside_fraction(mask: &BitMask, pen: &PenRegion) -> Result<f64> {
    let area = mask.area();
    if area == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(mask.intersection_area(&pen.raster)? as f64 / area as f64)
}

/// Keeps instances with at least `min_fraction` of their area inside the pen.
pub fn pen_filter(instances: Vec<Instance>, pen: &PenRegion, min_fraction: f64) -> Vec<Instance> {
    instances
        .into_iter()
        .filter(|inst| {
            pen_inside_fraction(&inst.mask, pen).is_ok_and(|f| f >= min_fraction)
        })
        .collect()
}

pub fn clip_mask_to_pen(mask: &BitMask, pen: &PenRegion) -> Result<BitMask> {
    mask.and(&pen.raster)
}

/// Denominator used when comparing two masks for suppression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMeasure {
    #[default]
    Iou,
    /// Intersection over the smaller mask's area.
    OverSmaller,
}

pub fn mask_overlap(a: &BitMask, b: &BitMask, measure: OverlapMeasure) -> Result<f64> {
    match measure {
        OverlapMeasure::Iou => mask_iou(a, b),
        OverlapMeasure::OverSmaller => {
            let inter = a.intersection_area(b)?;
            let smaller = a.area().min(b.area());
            if smaller == 0 {
                return Ok(0.0);
            }
            Ok(inter as f64 / smaller as f64)
        }
    }
}

/// Confidence order, earlier position first among equal confidences.
fn confidence_order(instances: &[Instance]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.sort_by(|&a, &b| {
        instances[b]
            .confidence
            .total_cmp(&instances[a].confidence)
            .then(a.cmp(&b))
    });
    order
}

/// Greedy mask-level NMS. An instance is dropped when its overlap with an
/// already kept, more confident instance is strictly above `threshold`.
/// Survivors are returned in confidence-descending order.
pub fn mask_nms(
    instances: Vec<Instance>,
    threshold: f64,
    measure: OverlapMeasure,
) -> Result<Vec<Instance>> {
    let order = confidence_order(&instances);
    let mut keep: Vec<usize> = Vec::new();
    for i in order {
        let mut suppressed = false;
        for &k in &keep {
            if mask_overlap(&instances[i].mask, &instances[k].mask, measure)? > threshold {
                suppressed = true;
                break;
            }
        }
        if !suppressed {
            keep.push(i);
        }
    }
    let mut slots: Vec<Option<Instance>> = instances.into_iter().map(Some).collect();
    Ok(keep.into_iter().filter_map(|i| slots[i].take()).collect())
}

/// When more than `trigger` detections are present keep only the `expected`
/// most confident ones (in their original order).
pub fn select_top_k(detections: Vec<Instance>, expected: usize, trigger: usize) -> Vec<Instance> {
    if detections.len() <= trigger {
        return detections;
    }
    let mut chosen = confidence_order(&detections);
    chosen.truncate(expected);
    chosen.sort_unstable();
    let mut slots: Vec<Option<Instance>> = detections.into_iter().map(Some).collect();
    chosen.into_iter().filter_map(|i| slots[i].take()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(mask: BitMask, conf: f64) -> Instance {
        Instance::from_mask(mask, conf).unwrap()
    }

    fn pen8() -> PenRegion {
        PenRegion::rect(8, 8, 0.0, 0.0, 4.0, 8.0).unwrap()
    }

    #[test]
    fn inside_fraction() {
        let pen = pen8();
        assert_eq!(pen.raster().area(), 32);
        assert_eq!(pen_inside_fraction(&BitMask::rect(8, 8, 0, 0, 2, 2), &pen).unwrap(), 1.0);
        assert_eq!(pen_inside_fraction(&BitMask::rect(8, 8, 5, 0, 2, 2), &pen).unwrap(), 0.0);
        let ten = BitMask::rect(8, 8, 2, 0, 4, 2).or(&BitMask::rect(8, 8, 2, 2, 1, 2)).unwrap();
        assert_eq!(ten.area(), 10);
        assert_eq!(pen_inside_fraction(&ten, &pen).unwrap(), 0.6);
        let five = BitMask::rect(8, 8, 1, 0, 5, 2);
        assert_eq!(five.area(), 10);
        assert_eq!(pen_inside_fraction(&five, &pen).unwrap(), 0.6);
        let half = BitMask::rect(8, 8, 2, 0, 4, 1).or(&BitMask::rect(8, 8, 1, 5, 6, 1)).unwrap();
        assert_eq!(half.area(), 10);
        assert_eq!(pen_inside_fraction(&half, &pen).unwrap(), 0.5);
        assert!(matches!(
            pen_inside_fraction(&BitMask::new(8, 8), &pen),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn pen_filter_boundary() {
        // 100-pixel pen raster at x < 10 on a 20x10 frame
        let pen = PenRegion::rect(20, 10, 0.0, 0.0, 10.0, 10.0).unwrap();
        // 100 px masks with 39 and 40 pixels inside
        let split = |inside: u32| {
            BitMask::from_fn(20, 10, move |x, y| {
                if x < 10 {
                    y * 10 + x < inside
                } else {
                    y * 10 + x - 10 < 100 - inside
                }
            })
        };
        let (m39, m40) = (split(39), split(40));
        assert_eq!((m39.area(), m40.area()), (100, 100));
        let a = inst(m39, 0.9);
        let b = inst(m40, 0.8);
        let inside = inst(BitMask::rect(20, 10, 0, 0, 3, 3), 0.5);
        let kept = pen_filter(vec![a, b.clone(), inside.clone()], &pen, 0.40);
        assert_eq!(kept, vec![b, inside]);
        assert!(pen_filter(vec![], &pen, 0.4).is_empty());
    }

    #[test]
    fn clip_examples() {
        let pen = pen8();
        let inside = BitMask::rect(8, 8, 1, 1, 2, 2);
        assert_eq!(clip_mask_to_pen(&inside, &pen).unwrap(), inside);
        assert!(clip_mask_to_pen(&BitMask::rect(8, 8, 5, 5, 2, 2), &pen).unwrap().is_empty());
        let straddle = BitMask::rect(8, 8, 2, 2, 4, 2);
        assert_eq!(
            clip_mask_to_pen(&straddle, &pen).unwrap(),
            BitMask::rect(8, 8, 2, 2, 2, 2)
        );
    }

    #[test]
    fn pen_validation() {
        assert!(PenRegion::new(vec![[0.0, 0.0], [5.0, 0.0]], 8, 8).is_err());
        // bow-tie
        let bow = vec![[0.0, 0.0], [8.0, 8.0], [8.0, 0.0], [0.0, 8.0]];
        assert!(matches!(PenRegion::new(bow, 8, 8), Err(Error::Pen(_))));
        // polygon smaller than a pixel centre
        let tiny = vec![[0.0, 0.0], [0.2, 0.0], [0.2, 0.2]];
        assert!(PenRegion::new(tiny, 8, 8).is_err());
    }

    #[test]
    fn nms_examples() {
        // two 10x10 squares sharing a 2x10 strip: IoU 20/180
        let a = BitMask::rect(30, 30, 0, 0, 10, 10);
        let b = BitMask::rect(30, 30, 8, 0, 10, 10);
        assert!(mask_iou(&a, &b).unwrap() > 0.08);
        let out = mask_nms(vec![inst(b.clone(), 0.7), inst(a.clone(), 0.9)], 0.08, OverlapMeasure::Iou).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].confidence, 0.9);

        // exactly 0.08: inter 4, union 50 (two 27-px masks sharing 4 px)
        let c = BitMask::rect(30, 30, 0, 20, 9, 3);
        let d = BitMask::rect(30, 30, 7, 20, 2, 2)
            .or(&BitMask::rect(30, 30, 0, 25, 23, 1))
            .unwrap();
        assert_eq!((c.area(), d.area(), c.intersection_area(&d).unwrap()), (27, 27, 4));
        assert!((mask_iou(&c, &d).unwrap() - 0.08).abs() < 1e-15);
        let out = mask_nms(vec![inst(c, 0.9), inst(d, 0.8)], 0.08, OverlapMeasure::Iou).unwrap();
        assert_eq!(out.len(), 2);

        let e = BitMask::rect(30, 30, 20, 20, 3, 3);
        let out = mask_nms(vec![inst(a, 0.2), inst(e, 0.3)], 0.08, OverlapMeasure::Iou).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].confidence, 0.3);
    }

    #[test]
    fn nms_over_smaller() {
        let big = BitMask::rect(20, 20, 0, 0, 10, 10);
        let small = BitMask::rect(20, 20, 0, 0, 2, 2);
        // IoU 0.04 keeps both; over-smaller 1.0 suppresses the small one
        let v = vec![inst(big.clone(), 0.9), inst(small.clone(), 0.5)];
        assert_eq!(mask_nms(v.clone(), 0.08, OverlapMeasure::Iou).unwrap().len(), 2);
        assert_eq!(mask_nms(v, 0.08, OverlapMeasure::OverSmaller).unwrap().len(), 1);
    }

    #[test]
    fn top_k() {
        let mk = |n: usize| -> Vec<Instance> {
            (0..n)
                .map(|i| inst(BitMask::rect(40, 40, i as u32, 0, 1, 1), (i as f64 + 1.0) / 100.0))
                .collect()
        };
        assert_eq!(select_top_k(mk(12), 10, 15).len(), 12);
        let top = select_top_k(mk(16), 10, 15);
        assert_eq!(top.len(), 10);
        assert!(top.iter().all(|d| d.confidence >= 0.07));
        assert!(select_top_k(vec![], 10, 15).is_empty());
    }
}
