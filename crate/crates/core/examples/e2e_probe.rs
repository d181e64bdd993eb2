use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use snsgan_core::datasets::{load_mnist_idx, write_mnist_idx, DataSplit};
use snsgan_core::eval::{conditional_accuracy, train_eval_classifier_images, EvalConfig};
use snsgan_core::models::{build, DataShape, ModelVariant, VariantTag};
use snsgan_core::noise::NoiseSpec;
use snsgan_core::training::{train_gan, Callbacks, TrainConfig, TrainingSet};
use std::time::Instant;

fn dist_to_segment(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { ((px - ax) * dx + (py - ay) * dy) / len2 } else { 0.0 };
    let t = t.clamp(0.0, 1.0);
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

fn render_digit(class: usize, rng: &mut ChaCha12Rng) -> Vec<u8> {
    let jitter = |rng: &mut ChaCha12Rng, lo: f64, hi: f64| rng.random_range(lo..hi);
    let mut skeleton: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut ellipse: Option<(f64, f64, f64, f64)> = None;
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
            skeleton.push((top_x, 4.5, top_x - jitter(rng, 2.0, 4.0), 7.5));
        }
        _ => {
            let cx = 13.5 + jitter(rng, -1.5, 1.5);
            let top_y = 7.0 + jitter(rng, -1.0, 1.0);
            let r = jitter(rng, 4.0, 5.5);
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

fn write_digits(
    dir: &std::path::Path,
    name: &str,
    count: usize,
    seed: u64,
) -> (std::path::PathBuf, std::path::PathBuf) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut pixels = Vec::with_capacity(count * 28 * 28);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let class = i % 3;
        labels.push(class as u8);
        pixels.extend(render_digit(class, &mut rng));
    }
    let ip = dir.join(format!("{name}-images.idx"));
    let lp = dir.join(format!("{name}-labels.idx"));
    write_mnist_idx(&pixels, &labels, 28, 28, &ip, &lp).unwrap();
    (ip, lp)
}

fn main() {
    let dir = std::path::PathBuf::from("/tmp/c9-sweep");
    std::fs::create_dir_all(&dir).unwrap();
    let (ti, tl) = write_digits(&dir, "train", 3000, 0xC9);
    let (si, sl) = write_digits(&dir, "test", 600, 0xC9 + 1);
    let split = DataSplit {
        train: load_mnist_idx(&ti, &tl).unwrap(),
        test: load_mnist_idx(&si, &sl).unwrap(),
    };
    let eval_cfg = EvalConfig { classifier_epochs: 12, ..EvalConfig::default() };
    let t0 = Instant::now();
    let clf = train_eval_classifier_images(&split, &eval_cfg, 11).unwrap();
    println!("classifier acc {:.4} in {:.0}s", clf.test_accuracy, t0.elapsed().as_secs_f64());

    let noise = NoiseSpec::new(3, 100).unwrap();
    for seed in [9u64, 13, 17, 21, 25, 29, 33, 37] {
        let t0 = Instant::now();
        let variant = ModelVariant::new(VariantTag::SnsImage);
        let (gen, dis) = build(
            &variant,
            DataShape::Image { channels: 1, height: 28, width: 28 },
            &noise,
            &mut ChaCha12Rng::seed_from_u64(seed),
        )
        .unwrap();
        let config = TrainConfig { epochs: 10, seed: seed + 1, ..TrainConfig::default() };
        train_gan(&gen, &dis, TrainingSet::Images(&split.train), &noise, &config, Callbacks::default())
            .unwrap();
        let acc =
            conditional_accuracy(&clf, &gen, &noise, 100, &mut ChaCha12Rng::seed_from_u64(12))
                .unwrap();
        println!(
            "seed {seed}: {:.0}s cond {:.3} per-class {:?}",
            t0.elapsed().as_secs_f64(),
            acc.macro_avg,
            acc.per_class
        );
    }
}
