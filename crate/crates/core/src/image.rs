//! Grayscale frames, masked crops and portable-anymap IO.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mask::BitMask;

/// Single-channel image with intensities on a `[0, 1]` scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> f32) -> Self {
        let mut img = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                img.put(x, y, f(x, y));
            }
        }
        img
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<f32>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::Invalid(format!(
                "{} samples for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn put(&mut self, x: u32, y: u32, v: f32) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn from_u8(width: u32, height: u32, bytes: &[u8]) -> Result<Self> {
        Self::from_raw(
            width,
            height,
            bytes.iter().map(|&b| b as f32 / 255.0).collect(),
        )
    }

    /// Binary PGM (P5, maxval 255).
    pub fn write_pgm(&self, mut w: impl Write) -> Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.to_u8())?;
        Ok(())
    }

    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_pgm(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn read_pgm(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut header = Vec::new();
        // magic, width, height, maxval; '#' comments allowed between tokens
        while header.len() < 4 {
            let mut line = String::new();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Invalid("truncated PGM header".into()));
            }
            let line = line.split('#').next().unwrap_or("");
            header.extend(line.split_whitespace().map(str::to_owned));
        }
        if header[0] != "P5" {
            return Err(Error::Invalid(format!("unsupported PGM magic {}", header[0])));
        }
        let parse = |s: &str| {
            s.parse::<u32>()
                .map_err(|_| Error::Invalid(format!("bad PGM header field {s}")))
        };
        let (w, h, maxval) = (parse(&header[1])?, parse(&header[2])?, parse(&header[3])?);
        if maxval != 255 {
            return Err(Error::Invalid(format!("unsupported PGM maxval {maxval}")));
        }
        let mut bytes = vec![0u8; w as usize * h as usize];
        r.read_exact(&mut bytes)?;
        Self::from_u8(w, h, &bytes)
    }

    pub fn load_pgm(path: &Path) -> Result<Self> {
        Self::read_pgm(std::fs::File::open(path)?)
    }
}

/// Crops the padded bounding box of `mask` (clipped to the image) and zeroes
/// every pixel outside the mask.
pub fn crop(image: &GrayImage, mask: &BitMask, pad: u32) -> Result<GrayImage> {
    if (image.width(), image.height()) != mask.dims() {
        return Err(Error::DimensionMismatch(
            image.width(),
            image.height(),
            mask.width(),
            mask.height(),
        ));
    }
    let (x0, y0, x1, y1) = mask.pixel_bbox().ok_or(Error::EmptyMask)?;
    let cx0 = x0.saturating_sub(pad);
    let cy0 = y0.saturating_sub(pad);
    let cx1 = (x1 + pad).min(image.width() - 1);
    let cy1 = (y1 + pad).min(image.height() - 1);
    Ok(GrayImage::from_fn(cx1 - cx0 + 1, cy1 - cy0 + 1, |x, y| {
        let (ix, iy) = (cx0 + x, cy0 + y);
        if mask.get(ix, iy) {
            image.get(ix, iy)
        } else {
            0.0
        }
    }))
}

/// RGB image written as binary PPM (P6).
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn from_gray(img: &GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.to_u8().into_iter().map(|v| [v, v, v]).collect(),
        }
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        Self {
            width,
            height,
            data: vec![rgb; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn put(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        self.data[y as usize * self.width as usize + x as usize] = rgb;
    }

    pub fn write_ppm(&self, mut w: impl Write) -> Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        let flat: Vec<u8> = self.data.iter().flatten().copied().collect();
        w.write_all(&flat)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: u32, h: u32) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| (x + y * w) as f32 / (w * h) as f32)
    }

    #[test]
    fn crop_full_and_single() {
        let img = ramp(4, 3);
        let full = crop(&img, &BitMask::full(4, 3), 0).unwrap();
        assert_eq!(full, img);
        let one = crop(&img, &BitMask::from_pixels(4, 3, [(2, 1)]), 0).unwrap();
        assert_eq!((one.width(), one.height()), (1, 1));
        assert_eq!(one.get(0, 0), img.get(2, 1));
    }

    #[test]
    fn crop_clips_at_corner() {
        let img = ramp(6, 6);
        let m = BitMask::rect(6, 6, 0, 0, 2, 2);
        let c = crop(&img, &m, 2).unwrap();
        // box [0,1] padded to [-2,3] then clipped to [0,3]
        assert_eq!((c.width(), c.height()), (4, 4));
        assert_eq!(c.get(1, 1), img.get(1, 1));
        assert_eq!(c.get(3, 3), 0.0);
    }

    #[test]
    fn crop_errors() {
        let img = ramp(4, 4);
        assert!(matches!(crop(&img, &BitMask::new(4, 4), 1), Err(Error::EmptyMask)));
        assert!(crop(&img, &BitMask::full(3, 4), 0).is_err());
    }

    #[test]
    fn pgm_round_trip() {
        let img = GrayImage::from_u8(3, 2, &[0, 10, 20, 30, 40, 255]).unwrap();
        let mut buf = Vec::new();
        img.write_pgm(&mut buf).unwrap();
        let back = GrayImage::read_pgm(&buf[..]).unwrap();
        assert_eq!(back, img);
    }
}
