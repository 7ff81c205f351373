use super::{BitMask, Point};
use crate::error::{Error, Result};

/// Pixel adjacency used for component labelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(i32, i32)] {
        const FOUR: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        const EIGHT: [(i32, i32); 8] = [
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// One connected component of a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub mask: BitMask,
    pub area: usize,
    pub centroid: Point,
    /// Boundary pixels in row-major order.
    pub contour: Vec<(u32, u32)>,
}

impl Blob {
    /// Wraps a nonempty mask, computing its area, centroid and contour.
    pub fn from_mask(mask: BitMask) -> Result<Self> {
        let centroid = centroid(&mask)?;
        Ok(Self {
            area: mask.area(),
            contour: contour_pixels(&mask),
            centroid,
            mask,
        })
    }
}

/// Splits a mask into connected components, largest first. Equal areas are
/// ordered by the topmost, then leftmost, corner of their bounding boxes.
pub fn connected_components(mask: &BitMask, connectivity: Connectivity) -> Vec<Blob> {
    let Some((x0, y0, x1, y1)) = mask.pixel_bbox() else {
        return Vec::new();
    };
    let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
    let mut labels = vec![0u32; (w * h) as usize];
    let mut components: Vec<Vec<(u32, u32)>> = Vec::new();
    let mut stack = Vec::new();

    for (sx, sy) in mask.pixels() {
        let si = ((sy - y0) * w + (sx - x0)) as usize;
        if labels[si] != 0 {
            continue;
        }
        let label = components.len() as u32 + 1;
        labels[si] = label;
        stack.push((sx, sy));
        let mut pixels = Vec::new();
        while let Some((x, y)) = stack.pop() {
            pixels.push((x, y));
            for &(dx, dy) in connectivity.offsets() {
                let nx = x as i64 + dx as i64;
                let ny = y as i64 + dy as i64;
                if nx < x0 as i64 || ny < y0 as i64 || nx > x1 as i64 || ny > y1 as i64 {
                    continue;
                }
                let (nx, ny) = (nx as u32, ny as u32);
                let ni = ((ny - y0) * w + (nx - x0)) as usize;
                if labels[ni] == 0 && mask.get(nx, ny) {
                    labels[ni] = label;
                    stack.push((nx, ny));
                }
            }
        }
        components.push(pixels);
    }

    let (width, height) = mask.dims();
    let mut blobs: Vec<Blob> = components
        .into_iter()
        .map(|px| {
            Blob::from_mask(BitMask::from_pixels(width, height, px))
                .expect("components are nonempty")
        })
        .collect();
    blobs.sort_by(|a, b| {
        let ka = a.mask.pixel_bbox().unwrap();
        let kb = b.mask.pixel_bbox().unwrap();
        b.area
            .cmp(&a.area)
            .then(ka.1.cmp(&kb.1))
            .then(ka.0.cmp(&kb.0))
            .then_with(|| a.mask.pixels().next().cmp(&b.mask.pixels().next()))
    });
    blobs
}

/// First-order image moments: `(M10 / M00, M01 / M00)`.
pub fn centroid(mask: &BitMask) -> Result<Point> {
    let (mut m00, mut m10, mut m01) = (0u64, 0u64, 0u64);
    for (x, y) in mask.pixels() {
        m00 += 1;
        m10 += x as u64;
        m01 += y as u64;
    }
    if m00 == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(Point::new(m10 as f64 / m00 as f64, m01 as f64 / m00 as f64))
}

/// Set pixels with at least one unset 4-neighbour or lying on the raster edge.
pub fn contour_pixels(mask: &BitMask) -> Vec<(u32, u32)> {
    let (w, h) = mask.dims();
    mask.pixels()
        .filter(|&(x, y)| {
            x == 0
                || y == 0
                || x + 1 == w
                || y + 1 == h
                || !mask.get(x - 1, y)
                || !mask.get(x + 1, y)
                || !mask.get(x, y - 1)
                || !mask.get(x, y + 1)
        })
        .collect()
}

pub fn contour(blob: &Blob) -> Vec<Point> {
    blob.contour
        .iter()
        .map(|&(x, y)| Point::new(x as f64, y as f64))
        .collect()
}

/// Smallest Euclidean distance between the two contours. Blobs that overlap
/// or touch (8-adjacent pixels) are at distance 0.
pub fn contour_distance(a: &Blob, b: &Blob) -> Result<f64> {
    if a.contour.is_empty() || b.contour.is_empty() {
        return Err(Error::EmptyMask);
    }
    if a.mask.intersects(&b.mask)? {
        return Ok(0.0);
    }
    let mut best = i64::MAX;
    for &(ax, ay) in &a.contour {
        for &(bx, by) in &b.contour {
            let dx = ax as i64 - bx as i64;
            let dy = ay as i64 - by as i64;
            best = best.min(dx * dx + dy * dy);
        }
        if best <= 2 {
            return Ok(0.0);
        }
    }
    Ok((best as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(w: u32, h: u32, px: &[(u32, u32)]) -> Blob {
        Blob::from_mask(BitMask::from_pixels(w, h, px.iter().copied())).unwrap()
    }

    #[test]
    fn components_examples() {
        assert!(connected_components(&BitMask::new(5, 5), Connectivity::Eight).is_empty());

        let rect = BitMask::rect(10, 10, 2, 3, 4, 5);
        let blobs = connected_components(&rect, Connectivity::Eight);
        assert_eq!(blobs.len(), 1);
        assert_eq!(blobs[0].area, 20);

        let diag = BitMask::from_pixels(2, 2, [(0, 0), (1, 1)]);
        assert_eq!(connected_components(&diag, Connectivity::Eight).len(), 1);
        assert_eq!(connected_components(&diag, Connectivity::Four).len(), 2);
    }

    #[test]
    fn components_ordering() {
        // two equal blobs: the upper one first, then a left/right tie on the same row
        let m = BitMask::from_pixels(10, 10, [(5, 5), (6, 5), (1, 1), (2, 1), (8, 8), (8, 1)]);
        let blobs = connected_components(&m, Connectivity::Four);
        let corners: Vec<_> = blobs
            .iter()
            .map(|b| {
                let (x, y, _, _) = b.mask.pixel_bbox().unwrap();
                (b.area, x, y)
            })
            .collect();
        assert_eq!(corners, vec![(2, 1, 1), (2, 5, 5), (1, 8, 1), (1, 8, 8)]);
    }

    #[test]
    fn centroid_examples() {
        let p = centroid(&BitMask::from_pixels(10, 10, [(3, 5)])).unwrap();
        assert_eq!((p.x, p.y), (3.0, 5.0));
        let p = centroid(&BitMask::rect(4, 4, 0, 0, 2, 2)).unwrap();
        assert_eq!((p.x, p.y), (0.5, 0.5));
        let cross = BitMask::from_fn(9, 9, |x, y| (x == 4 && (2..=6).contains(&y)) || (y == 4 && (2..=6).contains(&x)));
        let p = centroid(&cross).unwrap();
        assert_eq!((p.x, p.y), (4.0, 4.0));
        assert!(matches!(centroid(&BitMask::new(3, 3)), Err(Error::EmptyMask)));
    }

    #[test]
    fn contour_examples() {
        assert_eq!(contour(&blob(5, 5, &[(2, 2)])), vec![Point::new(2.0, 2.0)]);
        let block = Blob::from_mask(BitMask::rect(7, 7, 2, 2, 3, 3)).unwrap();
        assert_eq!(block.contour.len(), 8);
        assert!(!block.contour.contains(&(3, 3)));
        let line = Blob::from_mask(BitMask::rect(9, 9, 1, 4, 6, 1)).unwrap();
        assert_eq!(line.contour.len(), 6);
        // pixels on the raster edge count as boundary
        let full = Blob::from_mask(BitMask::full(3, 3)).unwrap();
        assert_eq!(full.contour.len(), 8);
    }

    #[test]
    fn contour_distance_examples() {
        let a = blob(10, 10, &[(0, 0)]);
        let b = blob(10, 10, &[(3, 4)]);
        assert!((contour_distance(&a, &b).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(contour_distance(&a, &a).unwrap(), 0.0);
        let left = Blob::from_mask(BitMask::rect(10, 10, 0, 0, 3, 3)).unwrap();
        let right = Blob::from_mask(BitMask::rect(10, 10, 3, 0, 3, 3)).unwrap();
        assert_eq!(contour_distance(&left, &right).unwrap(), 0.0);
        let diag = blob(10, 10, &[(1, 1)]);
        assert_eq!(contour_distance(&a, &diag).unwrap(), 0.0);
        let gap = Blob::from_mask(BitMask::rect(10, 10, 5, 0, 3, 3)).unwrap();
        assert_eq!(contour_distance(&left, &gap).unwrap(), 3.0);
    }
}
