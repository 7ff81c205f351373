use serde::{Deserialize, Serialize};

use super::BitMask;
use crate::error::{Error, Result};

/// Uncompressed run-length encoding: column-major scan, alternating runs
/// starting with a (possibly zero-length) run of unset pixels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RleMask {
    /// `[height, width]`
    pub size: [u32; 2],
    pub counts: Vec<u64>,
}

impl RleMask {
    pub fn height(&self) -> u32 {
        self.size[0]
    }

    pub fn width(&self) -> u32 {
        self.size[1]
    }

    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).sum()
    }
}

pub fn rle_encode(mask: &BitMask) -> RleMask {
    let (w, h) = mask.dims();
    let mut counts = Vec::new();
    let mut current = false;
    let mut run: u64 = 0;
    let bounds = mask.pixel_bbox();
    for x in 0..w {
        let in_window = bounds.is_some_and(|(x0, _, x1, _)| x >= x0 && x <= x1);
        if !in_window {
            // whole column unset
            if current {
                counts.push(run);
                run = 0;
                current = false;
            }
            run += h as u64;
            continue;
        }
        for y in 0..h {
            let v = mask.get(x, y);
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    RleMask {
        size: [h, w],
        counts,
    }
}

pub fn rle_decode(rle: &RleMask) -> Result<BitMask> {
    let (h, w) = (rle.height(), rle.width());
    if h == 0 || w == 0 {
        return Err(Error::MalformedRle(format!("non-positive size {h}x{w}")));
    }
    let total: u64 = rle.counts.iter().sum();
    let expected = h as u64 * w as u64;
    if total != expected {
        return Err(Error::MalformedRle(format!(
            "counts sum to {total}, expected {expected}"
        )));
    }
    let mut pixels = Vec::new();
    let mut idx: u64 = 0;
    for (i, &c) in rle.counts.iter().enumerate() {
        if i % 2 == 1 {
            for p in idx..idx + c {
                pixels.push(((p / h as u64) as u32, (p % h as u64) as u32));
            }
        }
        idx += c;
    }
    Ok(BitMask::from_pixels(w, h, pixels))
}
