//! Colour overlays of tracked masks.

use crate::error::Result;
use crate::image::{GrayImage, RgbImage};
use crate::mask::contour_pixels;
use crate::track::{visible_at, Track};

/// Sixteen well separated colours; identity `k` is drawn in `PALETTE[k % 16]`.
pub const PALETTE: [[u8; 3]; 16] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [220, 190, 255],
    [170, 110, 40],
    [255, 250, 200],
    [128, 0, 0],
    [170, 255, 195],
];

pub const FLAG_COLOUR: [u8; 3] = [255, 0, 0];

pub fn identity_colour(id: u32) -> [u8; 3] {
    PALETTE[id as usize % PALETTE.len()]
}

fn blend(base: [u8; 3], over: [u8; 3], alpha: f32) -> [u8; 3] {
    let mix = |a: u8, b: u8| (a as f32 * (1.0 - alpha) + b as f32 * alpha).round() as u8;
    [mix(base[0], over[0]), mix(base[1], over[1]), mix(base[2], over[2])]
}

/// Paints every visible mask of `frame` over `background`, half transparent
/// inside and solid on the contour. A flagged frame gets a 3-pixel border.
pub fn overlay(background: &GrayImage, tracks: &[Track], frame: u64, flagged: bool) -> Result<RgbImage> {
    let mut out = RgbImage::from_gray(background);
    for (id, mask) in visible_at(tracks, frame) {
        let colour = identity_colour(id);
        for (x, y) in mask.pixels() {
            if x < out.width && y < out.height {
                out.put(x, y, blend(out.get(x, y), colour, 0.5));
            }
        }
        for (x, y) in contour_pixels(mask) {
            if x < out.width && y < out.height {
                out.put(x, y, colour);
            }
        }
    }
    if flagged {
        let (w, h) = (out.width, out.height);
        let t = 3.min(w).min(h);
        for y in 0..h {
            for x in 0..w {
                if x < t || y < t || x + t >= w || y + t >= h {
                    out.put(x, y, FLAG_COLOUR);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::BitMask;
    use std::collections::BTreeSet;

    #[test]
    fn palette_is_distinct() {
        let set: BTreeSet<[u8; 3]> = PALETTE.iter().copied().collect();
        assert_eq!(set.len(), 16);
        assert!(!set.contains(&FLAG_COLOUR));
        assert_eq!(identity_colour(3), identity_colour(19));
    }

    #[test]
    fn empty_tracks_leave_background() {
        let bg = GrayImage::from_fn(8, 6, |x, _| x as f32 / 8.0);
        let img = overlay(&bg, &[], 0, false).unwrap();
        assert_eq!(img, RgbImage::from_gray(&bg));
    }

    #[test]
    fn ten_identities_ten_colours() {
        let bg = GrayImage::new(120, 20);
        let tracks: Vec<Track> = (1..=10)
            .map(|id| {
                let mut t = Track::new(id);
                for f in 0..3 {
                    t.insert(f, BitMask::rect(120, 20, (id - 1) * 12 + f as u32, 5, 6, 6));
                }
                t
            })
            .collect();
        for f in 0..3 {
            let img = overlay(&bg, &tracks, f, false).unwrap();
            let contour: BTreeSet<[u8; 3]> = (1..=10)
                .map(|id| img.get((id - 1) * 12 + f as u32, 5))
                .collect();
            assert_eq!(contour.len(), 10);
            for id in 1..=10 {
                assert_eq!(img.get((id - 1) * 12 + f as u32, 5), identity_colour(id));
            }
        }
    }

    #[test]
    fn flagged_border() {
        let bg = GrayImage::new(10, 10);
        let img = overlay(&bg, &[], 0, true).unwrap();
        assert_eq!(img.get(0, 0), FLAG_COLOUR);
        assert_eq!(img.get(9, 5), FLAG_COLOUR);
        assert_eq!(img.get(5, 5), [0, 0, 0]);
    }
}
