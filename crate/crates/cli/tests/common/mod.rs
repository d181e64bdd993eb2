//! Shared fixtures: a three-class digit-style IDX image set and a
//! smooth three-class UCR-format series set, both rendered deterministically
//! so tests never depend on external downloads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use snsgan_core::datasets::{synth_make, write_mnist_idx, write_ucr_tsv, SyntheticSpec};
use std::path::{Path, PathBuf};

fn dist_to_segment(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { ((px - ax) * dx + (py - ay) * dy) / len2 } else { 0.0 };
    let t = t.clamp(0.0, 1.0);
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

/// Renders one 28x28 glyph: 0 = ellipse ring, 1 = tilted vertical stroke,
/// 2 = arc over a diagonal with a base bar. Gaussian falloff around the
/// skeleton gives smooth strokes; jitter varies geometry per sample.
pub fn render_digit(class: usize, rng: &mut ChaCha12Rng) -> Vec<u8> {
    let jitter = |rng: &mut ChaCha12Rng, lo: f64, hi: f64| rng.random_range(lo..hi);
    let mut skeleton: Vec<(f64, f64, f64, f64)> = Vec::new(); // segments
    let mut ellipse: Option<(f64, f64, f64, f64)> = None; // cx, cy, rx, ry
    let thickness = jitter(rng, 1.3, 2.1);
    match class {
        0 => {
            let cx = 13.5 + jitter(rng, -1.5, 1.5);
            let cy = 13.5 + jitter(rng, -1.5, 1.5);
            let rx = jitter(rng, 6.0, 8.5);
            let ry = jitter(rng, 7.0, 9.5);
            ellipse = Some((cx, cy, rx, ry));
        }
        1 => {
            let top_x = 13.5 + jitter(rng, -3.0, 3.0);
            let lean = jitter(rng, -2.0, 2.0);
            skeleton.push((top_x, 4.5, top_x + lean, 23.5));
            // serif flag
            skeleton.push((top_x, 4.5, top_x - jitter(rng, 2.0, 4.0), 7.5));
        }
        _ => {
            let cx = 13.5 + jitter(rng, -1.5, 1.5);
            let top_y = 7.0 + jitter(rng, -1.0, 1.0);
            let r = jitter(rng, 4.0, 5.5);
            // approximate the top arc with chords
            let mut prev: Option<(f64, f64)> = None;
            for k in 0..=6 {
                let ang = std::f64::consts::PI * (1.0 - k as f64 / 6.0 * 1.25);
                let (x, y) = (cx + r * ang.cos(), top_y - r * ang.sin() + r);
                if let Some((px, py)) = prev {
                    skeleton.push((px, py, x, y));
                }
                prev = Some((x, y));
            }
            let (ex, ey) = prev.unwrap();
            let base_y = 22.5 + jitter(rng, -1.0, 1.0);
            let base_x0 = cx - r - jitter(rng, 0.0, 1.5);
            skeleton.push((ex, ey, base_x0, base_y));
            skeleton.push((base_x0, base_y, cx + r + jitter(rng, 0.0, 1.5), base_y));
        }
    }

    let mut pixels = vec![0u8; 28 * 28];
    for y in 0..28 {
        for x in 0..28 {
            let (px, py) = (x as f64, y as f64);
            let d = if let Some((cx, cy, rx, ry)) = ellipse {
                let u = ((px - cx) / rx).powi(2) + ((py - cy) / ry).powi(2);
                (u.sqrt() - 1.0).abs() * ((rx + ry) / 2.0)
            } else {
                skeleton
                    .iter()
                    .map(|&(ax, ay, bx, by)| dist_to_segment(px, py, ax, ay, bx, by))
                    .fold(f64::INFINITY, f64::min)
            };
            let v = 255.0 * (-d * d / (2.0 * thickness * thickness)).exp();
            pixels[y * 28 + x] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    pixels
}

/// Writes a balanced three-class digit-style IDX pair and returns
/// (images_path, labels_path).
pub fn write_digits_idx(dir: &Path, name: &str, count: usize, seed: u64) -> (PathBuf, PathBuf) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut pixels = Vec::with_capacity(count * 28 * 28);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let class = i % 3;
        labels.push(class as u8);
        pixels.extend(render_digit(class, &mut rng));
    }
    let images_path = dir.join(format!("{name}-images.idx"));
    let labels_path = dir.join(format!("{name}-labels.idx"));
    write_mnist_idx(&pixels, &labels, 28, 28, &images_path, &labels_path).unwrap();
    (images_path, labels_path)
}

/// Writes a smooth 3-class, length-15, 150-row series file in the UCR
/// format, plus a 150-row test split; returns (train_path, test_path).
pub fn write_smooth_series(dir: &Path, seed: u64) -> (PathBuf, PathBuf) {
    let spec = SyntheticSpec::new(3, 15, 150);
    let train = synth_make(&spec, &mut ChaCha12Rng::seed_from_u64(seed)).unwrap();
    let test = synth_make(&spec, &mut ChaCha12Rng::seed_from_u64(seed ^ 0xFEED)).unwrap();
    let train_path = dir.join("smooth_TRAIN.tsv");
    let test_path = dir.join("smooth_TEST.tsv");
    write_ucr_tsv(&train, &train_path).unwrap();
    write_ucr_tsv(&test, &test_path).unwrap();
    (train_path, test_path)
}
