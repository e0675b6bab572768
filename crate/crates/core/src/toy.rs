//! Small seeded synthetic datasets used by the examples, the CLI defaults
//! and the test suites.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::embedding::{AudioEncoder, Embedding, ImageEncoder, PairedExample};
use crate::error::{Error, Result};
use crate::localizer::{pseudo_mask, BinaryMask, LocalizerExample, LogitMap};
use crate::signal_io::{mel_spectrogram, save_image, save_wav, ImageBuffer, Waveform, TARGET_SAMPLE_RATE};

pub const QUADRANT_COLORS: [[f64; 3]; 4] = [
    [0.9, 0.1, 0.1],
    [0.1, 0.8, 0.2],
    [0.15, 0.2, 0.9],
    [0.9, 0.85, 0.1],
];

/// A sine tone at half amplitude.
pub fn tone(freq_hz: f64, secs: f64) -> Waveform {
    let sr = f64::from(TARGET_SAMPLE_RATE);
    let n = (secs * sr).round() as usize;
    let samples = (0..n)
        .map(|i| 0.5 * (2.0 * std::f64::consts::PI * freq_hz * i as f64 / sr).sin())
        .collect();
    Waveform::new(samples, TARGET_SAMPLE_RATE).expect("finite samples")
}

/// Tone frequency of class `class`: half-octave steps from 220 Hz.
pub fn class_frequency(class: usize) -> f64 {
    220.0 * 2f64.powf(class as f64 * 0.5)
}

fn hsv(h: f64, s: f64, v: f64) -> [f64; 3] {
    let i = (h * 6.0).floor();
    let f = h * 6.0 - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - f * s), v * (1.0 - (1.0 - f) * s));
    match (i as i64).rem_euclid(6) {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// A striped image whose hue and stripe period identify `class`.
pub fn class_image(class: usize, n_classes: usize, size: usize, rng: &mut impl Rng) -> ImageBuffer {
    let base = hsv(class as f64 / n_classes as f64, 0.8, 0.9);
    let period = 4 + 2 * (class % 4);
    let mut px = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let stripe = if ((x + y * (class % 2)) / period).is_multiple_of(2) { 1.0 } else { 0.6 };
            for c in base {
                px.push(c * stripe + rng.random_range(-0.03..0.03));
            }
        }
    }
    ImageBuffer::from_clamped(size, size, px)
}

/// `n` paired clips: class `i mod n_classes` pairs a tone with a striped
/// image of matching hue.
pub fn paired_dataset(n: usize, n_classes: usize, seed: u64) -> Result<Vec<PairedExample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let class = i % n_classes;
            Ok(PairedExample {
                mel: mel_spectrogram(&tone(class_frequency(class), 1.0), 128)?,
                image: class_image(class, n_classes, 32, &mut rng),
            })
        })
        .collect()
}

/// Embeddings of the four class tones under `encoder`, usable as
/// quadrant conditions so a localizer can be queried with audio.
pub fn tone_conditions(encoder: &dyn AudioEncoder) -> Result<Vec<Embedding>> {
    (0..4)
        .map(|c| encoder.encode(&mel_spectrogram(&tone(class_frequency(c), 1.0), 128)?))
        .collect()
}

/// Four seeded unit vectors, one per quadrant class.
pub fn quadrant_conditions(dim: usize, seed: u64) -> Vec<Embedding> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, 1.0).expect("valid std");
    (0..4)
        .map(|_| Embedding::normalize((0..dim).map(|_| n.sample(&mut rng)).collect()).expect("nonzero"))
        .collect()
}

/// A `size × size` image whose quadrants hold the four palette colors in
/// a random order. Returns the image and the quadrant index of each class.
pub fn quadrant_image(size: usize, rng: &mut impl Rng) -> (ImageBuffer, [usize; 4]) {
    let mut perm = [0usize, 1, 2, 3];
    for i in (1..4).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    let half = size / 2;
    let mut px = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let q = usize::from(y >= half) * 2 + usize::from(x >= half);
            for c in QUADRANT_COLORS[perm[q]] {
                px.push(c + rng.random_range(-0.05..0.05));
            }
        }
    }
    let mut where_is = [0usize; 4];
    for (q, &class) in perm.iter().enumerate() {
        where_is[class] = q;
    }
    (ImageBuffer::from_clamped(size, size, px), where_is)
}

pub fn quadrant_mask(size: usize, quadrant: usize) -> BinaryMask {
    let half = size / 2;
    BinaryMask::from_fn(size, size, |y, x| {
        usize::from(y >= half) * 2 + usize::from(x >= half) == quadrant
    })
}

/// The weak-supervision toy task: each sample asks for the quadrant
/// holding one color class, identified only by its conditioning vector.
/// Classes cycle so every one is equally represented.
/// Targets go through [`pseudo_mask`] on ground-truth-derived logits, the
/// same path externally scored logits would take.
pub fn quadrant_dataset(
    n: usize,
    size: usize,
    conditions: &[Embedding],
    threshold: f64,
    seed: u64,
) -> Result<Vec<LocalizerExample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let (image, where_is) = quadrant_image(size, &mut rng);
            let class = i % 4;
            let gt = quadrant_mask(size, where_is[class]);
            let logits = LogitMap::new(
                size,
                size,
                gt.values().iter().map(|&v| if v { 6.0 } else { -6.0 }).collect(),
            )?;
            Ok(LocalizerExample {
                image,
                cond: conditions[class].clone(),
                target: pseudo_mask(&logits, threshold)?,
            })
        })
        .collect()
}

/// The seeded stylization instance: a source image, a binary foreground
/// mask and a style image.
pub struct StyleInstance {
    pub source: ImageBuffer,
    pub mask: BinaryMask,
    pub style: ImageBuffer,
}

pub fn style_instance(size: usize, seed: u64) -> StyleInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = size as f64;
    let mut src = Vec::with_capacity(size * size * 3);
    let mut style = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let (fy, fx) = (y as f64 / s, x as f64 / s);
            let r2 = (fy - 0.5).powi(2) + (fx - 0.5).powi(2);
            let disk = if r2 < 0.09 { 0.25 } else { 0.0 };
            src.extend([
                0.3 + 0.4 * fx + disk + rng.random_range(-0.02..0.02),
                0.4 + 0.3 * fy + disk + rng.random_range(-0.02..0.02),
                0.6 - 0.2 * fx + disk + rng.random_range(-0.02..0.02),
            ]);
            let wave = (0.5 + 0.5 * (fx * 24.0 + fy * 8.0).sin()).clamp(0.0, 1.0);
            style.extend([0.95, 0.35 + 0.5 * wave, 0.05 + 0.2 * wave]);
        }
    }
    let lo = size / 4;
    let hi = size - size / 4;
    StyleInstance {
        source: ImageBuffer::from_clamped(size, size, src),
        mask: BinaryMask::from_fn(size, size, |y, x| (lo..hi).contains(&y) && (lo..hi).contains(&x)),
        style: ImageBuffer::from_clamped(size, size, style),
    }
}

/// Direction from the source embedding toward the style embedding, used
/// as the target when no audio encoder is in the loop.
pub fn style_direction(encoder: &dyn ImageEncoder, inst: &StyleInstance) -> Embedding {
    let s = encoder.encode(&inst.source);
    let t = encoder.encode(&inst.style);
    Embedding::normalize(t.as_slice().iter().zip(s.as_slice()).map(|(a, b)| a - b).collect())
        .expect("distinct images")
}

/// File locations produced by [`write_assets`].
#[derive(Debug, Clone)]
pub struct ToyAssets {
    /// `<stem>.wav` / `<stem>.png` pairs for `pretrain`.
    pub pairs: PathBuf,
    /// `<stem>.png`, `<stem>.wav`, `<stem>.mask.png` triplets for `train-localizer`.
    pub localizer: PathBuf,
    /// `<stem>.pred.png` / `<stem>.gt.png` pairs for `eval`.
    pub eval: PathBuf,
    /// A quadrant scene and the tone of the class in its top-left quadrant.
    pub scene: PathBuf,
    pub query: PathBuf,
    /// A style clip outside the class tones.
    pub style: PathBuf,
}

/// Writes a small seeded set of toy inputs for every subcommand under `dir`.
pub fn write_assets(dir: impl AsRef<Path>, size: usize, seed: u64) -> Result<ToyAssets> {
    let dir = dir.as_ref();
    let assets = ToyAssets {
        pairs: dir.join("pairs"),
        localizer: dir.join("localizer"),
        eval: dir.join("eval"),
        scene: dir.join("scene.png"),
        query: dir.join("query.wav"),
        style: dir.join("style.wav"),
    };
    for d in [&assets.pairs, &assets.localizer, &assets.eval] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for class in 0..8 {
        save_wav(&tone(class_frequency(class), 1.0), assets.pairs.join(format!("c{class}.wav")))?;
        save_image(&class_image(class, 8, 32, &mut rng), assets.pairs.join(format!("c{class}.png")))?;
    }
    for i in 0..16 {
        let (image, where_is) = quadrant_image(size, &mut rng);
        let class = i % 4;
        save_image(&image, assets.localizer.join(format!("s{i:02}.png")))?;
        save_wav(&tone(class_frequency(class), 1.0), assets.localizer.join(format!("s{i:02}.wav")))?;
        quadrant_mask(size, where_is[class]).save_png(assets.localizer.join(format!("s{i:02}.mask.png")))?;
    }
    for i in 0..6 {
        let gt = quadrant_mask(size, i % 4);
        let pred = quadrant_mask(size, (i + i / 3) % 4);
        gt.save_png(assets.eval.join(format!("e{i}.gt.png")))?;
        pred.save_png(assets.eval.join(format!("e{i}.pred.png")))?;
    }
    let (scene, where_is) = quadrant_image(size, &mut rng);
    save_image(&scene, &assets.scene)?;
    let class = (0..4).find(|&c| where_is[c] == 0).expect("every quadrant holds a class");
    save_wav(&tone(class_frequency(class), 1.0), &assets.query)?;
    save_wav(&tone(1500.0, 1.0), &assets.style)?;
    Ok(assets)
}
