use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use herdtrack_core::image::GrayImage;
use herdtrack_core::reid::{cosine_similarity, Embedder, ReferenceEmbedder};

/// A textured ellipse on black, rendered from continuous coordinates so that
/// scale `s` is a genuine re-rendering rather than pixel replication.
fn crop(seed: u64, s: u32) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: f32 = rng.gen_range(8.0..20.0);
    let b: f32 = rng.gen_range(5.0..a);
    let base: f32 = rng.gen_range(0.2..0.8);
    let stripe: f32 = rng.gen_range(0.0..0.15);
    let period: f32 = rng.gen_range(3.0..9.0);
    let (w, h) = ((2.0 * a + 4.0) as u32, (2.0 * b + 4.0) as u32);
    let sf = s as f32;
    GrayImage::from_fn(w * s, h * s, |x, y| {
        let (u, v) = ((x as f32 + 0.5) / sf, (y as f32 + 0.5) / sf);
        let (dx, dy) = ((u - w as f32 / 2.0) / a, (v - h as f32 / 2.0) / b);
        if dx * dx + dy * dy <= 1.0 {
            base + if ((u / period) as u32).is_multiple_of(2) { stripe } else { 0.0 }
        } else {
            0.0
        }
    })
}

#[test]
fn doubling_the_crop_size_keeps_the_embedding() {
    let e = ReferenceEmbedder;
    let mut worst = 1.0f64;
    for seed in 0..20 {
        let small = e.embed(&crop(seed, 1)).unwrap();
        let large = e.embed(&crop(seed, 2)).unwrap();
        let sim = cosine_similarity(&small, &large).unwrap();
        worst = worst.min(sim);
    }
    println!("lowest similarity over 20 crops: {worst:.4}");
    assert!(worst >= 0.95, "lowest similarity {worst}");
}

#[test]
fn different_gray_levels_are_told_apart() {
    let e = ReferenceEmbedder;
    let flat = |g: f32| GrayImage::from_fn(20, 12, move |x, y| {
        let (dx, dy) = ((x as f32 - 9.5) / 9.0, (y as f32 - 5.5) / 5.0);
        if dx * dx + dy * dy <= 1.0 { g } else { 0.0 }
    });
    let same = cosine_similarity(&e.embed(&flat(0.4)).unwrap(), &e.embed(&flat(0.4)).unwrap()).unwrap();
    let other = cosine_similarity(&e.embed(&flat(0.4)).unwrap(), &e.embed(&flat(0.8)).unwrap()).unwrap();
    assert!(same > other);
}
