//! Binary instance masks and the geometry built on them.
//!
//! A [`BitMask`] is a logical `width × height` raster. Storage only covers the
//! tight bounding box of the set pixels, so a frame-sized mask of a single
//! animal costs a few kilobytes instead of one byte per frame pixel. The
//! window is kept canonical (always the tight box, empty masks hold nothing),
//! which makes structural equality the same as pixelwise equality.

mod blob;
mod rle;

pub use blob::{
    centroid, connected_components, contour, contour_distance, contour_pixels, Blob,
    Connectivity,
};
pub use rle::{rle_decode, rle_encode, RleMask};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sub-pixel image position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned box `(x, y, w, h)` in pixels. A mask's tight box covers
/// pixels `x..x+w` so a single pixel has `w = h = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        let inter = ix.max(0.0) * iy.max(0.0);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            return 0.0;
        }
        inter / union
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl Serialize for BBox {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        <[f64; 4]>::deserialize(d).map(BBox::from_array)
    }
}

/// Binary raster of one instance.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMask {
    width: u32,
    height: u32,
    x0: u32,
    y0: u32,
    win_w: u32,
    win_h: u32,
    // row-major over the window
    bits: Vec<bool>,
}

impl std::fmt::Debug for BitMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BitMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.area())
            .field("bbox", &self.pixel_bbox())
            .finish()
    }
}

impl BitMask {
    /// An empty mask.
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            x0: 0,
            y0: 0,
            win_w: 0,
            win_h: 0,
            bits: Vec::new(),
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self::rect(width, height, 0, 0, width, height)
    }

    /// Filled rectangle, clipped to the raster.
    pub fn rect(width: u32, height: u32, x: u32, y: u32, w: u32, h: u32) -> Self {
        let x1 = x.saturating_add(w).min(width);
        let y1 = y.saturating_add(h).min(height);
        if x >= x1 || y >= y1 {
            return Self::new(width, height);
        }
        let (ww, wh) = (x1 - x, y1 - y);
        Self {
            width,
            height,
            x0: x,
            y0: y,
            win_w: ww,
            win_h: wh,
            bits: vec![true; (ww * wh) as usize],
        }
    }

    /// Builds a mask from a full row-major raster.
    pub fn from_dense(width: u32, height: u32, bits: &[bool]) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::Invalid(format!(
                "raster of {} bits for a {}x{} mask",
                bits.len(),
                width,
                height
            )));
        }
        Ok(Self::from_fn(width, height, |x, y| {
            bits[y as usize * width as usize + x as usize]
        }))
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let mut pixels = Vec::new();
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    pixels.push((x, y));
                }
            }
        }
        Self::from_pixels(width, height, pixels)
    }

    /// Builds a mask from set-pixel coordinates. Pixels outside the raster are
    /// ignored.
    pub fn from_pixels(
        width: u32,
        height: u32,
        pixels: impl IntoIterator<Item = (u32, u32)>,
    ) -> Self {
        let pixels: Vec<(u32, u32)> = pixels
            .into_iter()
            .filter(|&(x, y)| x < width && y < height)
            .collect();
        if pixels.is_empty() {
            return Self::new(width, height);
        }
        let (mut xmin, mut ymin, mut xmax, mut ymax) = (u32::MAX, u32::MAX, 0, 0);
        for &(x, y) in &pixels {
            xmin = xmin.min(x);
            ymin = ymin.min(y);
            xmax = xmax.max(x);
            ymax = ymax.max(y);
        }
        let (ww, wh) = (xmax - xmin + 1, ymax - ymin + 1);
        let mut bits = vec![false; (ww * wh) as usize];
        for (x, y) in pixels {
            bits[((y - ymin) * ww + (x - xmin)) as usize] = true;
        }
        Self {
            width,
            height,
            x0: xmin,
            y0: ymin,
            win_w: ww,
            win_h: wh,
            bits,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        if x < self.x0 || y < self.y0 || x >= self.x0 + self.win_w || y >= self.y0 + self.win_h {
            return false;
        }
        self.bits[((y - self.y0) * self.win_w + (x - self.x0)) as usize]
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Inclusive pixel bounds `(xmin, ymin, xmax, ymax)` of the set pixels.
    pub fn pixel_bbox(&self) -> Option<(u32, u32, u32, u32)> {
        if self.is_empty() {
            return None;
        }
        Some((
            self.x0,
            self.y0,
            self.x0 + self.win_w - 1,
            self.y0 + self.win_h - 1,
        ))
    }

    /// Tight bounding box as `(x, y, w, h)`.
    pub fn bbox(&self) -> Option<BBox> {
        self.pixel_bbox().map(|(x0, y0, x1, y1)| {
            BBox::new(
                x0 as f64,
                y0 as f64,
                (x1 - x0 + 1) as f64,
                (y1 - y0 + 1) as f64,
            )
        })
    }

    /// Set pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let (x0, y0, w) = (self.x0, self.y0, self.win_w);
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (x0 + i as u32 % w, y0 + i as u32 / w))
    }

    pub fn to_dense(&self) -> Vec<bool> {
        let mut out = vec![false; self.width as usize * self.height as usize];
        for (x, y) in self.pixels() {
            out[y as usize * self.width as usize + x as usize] = true;
        }
        out
    }

    fn check_dims(&self, other: &BitMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    pub fn intersection_area(&self, other: &BitMask) -> Result<usize> {
        self.check_dims(other)?;
        if self.is_empty() || other.is_empty() {
            return Ok(0);
        }
        let xa = self.x0.max(other.x0);
        let ya = self.y0.max(other.y0);
        let xb = (self.x0 + self.win_w).min(other.x0 + other.win_w);
        let yb = (self.y0 + self.win_h).min(other.y0 + other.win_h);
        let mut n = 0;
        for y in ya..yb {
            for x in xa..xb {
                if self.get(x, y) && other.get(x, y) {
                    n += 1;
                }
            }
        }
        Ok(n)
    }

    pub fn intersects(&self, other: &BitMask) -> Result<bool> {
        Ok(self.intersection_area(other)? > 0)
    }

    pub fn and(&self, other: &BitMask) -> Result<BitMask> {
        self.check_dims(other)?;
        Ok(BitMask::from_pixels(
            self.width,
            self.height,
            self.pixels().filter(|&(x, y)| other.get(x, y)),
        ))
    }

    pub fn or(&self, other: &BitMask) -> Result<BitMask> {
        self.check_dims(other)?;
        Ok(BitMask::from_pixels(
            self.width,
            self.height,
            self.pixels().chain(other.pixels()),
        ))
    }

    pub fn and_not(&self, other: &BitMask) -> Result<BitMask> {
        self.check_dims(other)?;
        Ok(BitMask::from_pixels(
            self.width,
            self.height,
            self.pixels().filter(|&(x, y)| !other.get(x, y)),
        ))
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BitMask) -> Result<bool> {
        self.check_dims(other)?;
        Ok(self.pixels().all(|(x, y)| other.get(x, y)))
    }

    /// Shifts the mask, dropping pixels that leave the raster.
    pub fn translate(&self, dx: i64, dy: i64) -> BitMask {
        BitMask::from_pixels(
            self.width,
            self.height,
            self.pixels().filter_map(|(x, y)| {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                (nx >= 0 && ny >= 0).then_some((nx as u32, ny as u32))
            }),
        )
    }
}

/// Intersection over union; two empty masks compare as identical (1.0).
pub fn mask_iou(a: &BitMask, b: &BitMask) -> Result<f64> {
    let inter = a.intersection_area(b)?;
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_examples() {
        let a = BitMask::rect(4, 4, 0, 0, 2, 2);
        let b = BitMask::rect(4, 4, 1, 0, 2, 2);
        assert!((mask_iou(&a, &b).unwrap() - 2.0 / 6.0).abs() < 1e-12);
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        let far = BitMask::rect(4, 4, 2, 2, 2, 2);
        assert_eq!(mask_iou(&a, &far).unwrap(), 0.0);
        let e = BitMask::new(4, 4);
        assert_eq!(mask_iou(&e, &e).unwrap(), 1.0);
        assert_eq!(mask_iou(&a, &e).unwrap(), 0.0);
    }

    #[test]
    fn iou_dimension_mismatch() {
        let a = BitMask::new(4, 4);
        let b = BitMask::new(4, 5);
        assert!(matches!(
            mask_iou(&a, &b),
            Err(Error::DimensionMismatch(4, 4, 4, 5))
        ));
    }

    #[test]
    fn canonical_window() {
        let a = BitMask::rect(8, 8, 2, 2, 3, 3);
        let b = BitMask::from_fn(8, 8, |x, y| (2..5).contains(&x) && (2..5).contains(&y));
        assert_eq!(a, b);
        let cleared = a.and_not(&b).unwrap();
        assert_eq!(cleared, BitMask::new(8, 8));
        assert_eq!(a.bbox(), Some(BBox::new(2.0, 2.0, 3.0, 3.0)));
    }

    #[test]
    fn dense_round_trip() {
        let bits = [true, false, false, true, true, false];
        let m = BitMask::from_dense(3, 2, &bits).unwrap();
        assert_eq!(m.to_dense(), bits);
        assert_eq!(m.area(), 3);
        assert!(BitMask::from_dense(3, 3, &bits).is_err());
    }

    #[test]
    fn translate_clips() {
        let m = BitMask::rect(4, 4, 0, 0, 2, 2);
        assert_eq!(m.translate(3, 0).area(), 2);
        assert_eq!(m.translate(-2, 0).area(), 0);
    }

    #[test]
    fn box_iou() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        let b = BBox::new(5.0, 0.0, 10.0, 10.0);
        assert!((a.iou(&b) - 50.0 / 150.0).abs() < 1e-12);
    }
}
