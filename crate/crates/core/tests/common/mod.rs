#![allow(dead_code)]

use std::path::Path;

use egc_core::ImageBuffer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_gray(w: usize, h: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageBuffer::from_fn_gray(w, h, |_, _| rng.gen())
}

/// Class C: smooth blobs. Class S: the same blobs under fine speckle.
fn synthetic_rgb(size: u32, sick: bool, rng: &mut ChaCha8Rng) -> image::RgbImage {
    let fx: f64 = rng.gen_range(0.05..0.15);
    let fy: f64 = rng.gen_range(0.05..0.15);
    let phase: f64 = rng.gen_range(0.0..6.28);
    let speckle = if sick { 70.0 } else { 12.0 };
    image::RgbImage::from_fn(size, size, |x, y| {
        let base = 128.0 + 60.0 * ((x as f64 * fx + phase).sin() + (y as f64 * fy).cos()) / 2.0;
        let noise: f64 = rng.gen_range(-1.0..1.0) * speckle;
        let v = (base + noise).clamp(0.0, 255.0) as u8;
        image::Rgb([v, v.saturating_sub(20), v / 2 + 40])
    })
}

/// Writes `<root>/<name>/{C,S}/*.png`.
pub fn write_dataset(root: &Path, name: &str, control: usize, sick: usize, size: u32, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (class, count, is_sick) in [("C", control, false), ("S", sick, true)] {
        let dir = root.join(name).join(class);
        std::fs::create_dir_all(&dir).unwrap();
        for i in 0..count {
            synthetic_rgb(size, is_sick, &mut rng)
                .save(dir.join(format!("{class}_{i:03}.png")))
                .unwrap();
        }
    }
}
