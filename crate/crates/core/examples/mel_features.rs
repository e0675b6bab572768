//! Turns a WAV file (or a built-in two-tone clip) into the canonical
//! log-mel grid and prints where the energy sits, then shows one
//! SpecAugment draw.
//!
//! ```text
//! cargo run --release --example mel_features -- clip.wav
//! ```

use avstyle::signal_io::{load_wav, mel_spectrogram, spec_augment, AugmentSpec, Waveform, TARGET_SAMPLE_RATE};
use avstyle::toy::tone;

fn loudest_band(values: &[f64], n_mels: usize, n_frames: usize) -> usize {
    (0..n_mels)
        .max_by(|&a, &b| {
            let sa: f64 = values[a * n_frames..(a + 1) * n_frames].iter().sum();
            let sb: f64 = values[b * n_frames..(b + 1) * n_frames].iter().sum();
            sa.total_cmp(&sb)
        })
        .unwrap_or(0)
}

fn main() -> avstyle::Result<()> {
    let wave = match std::env::args().nth(1) {
        Some(path) => load_wav(path)?,
        None => {
            let (lo, hi) = (tone(330.0, 1.0), tone(2640.0, 1.0));
            let mixed = lo.samples().iter().zip(hi.samples()).map(|(a, b)| 0.5 * (a + b)).collect();
            Waveform::new(mixed, TARGET_SAMPLE_RATE)?
        }
    };
    println!("{:.2} s at {} Hz", wave.duration_secs(), wave.sample_rate());

    let mel = mel_spectrogram(&wave, 128)?;
    let (lo, hi) = mel.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    println!("log-mel grid {}x{}, range [{lo:.2}, {hi:.2}], mean {:.3}", mel.n_mels(), mel.n_frames(), mel.mean());
    println!("loudest mel band: {}", loudest_band(mel.values(), mel.n_mels(), mel.n_frames()));

    let aug = spec_augment(&mel, &AugmentSpec { seed: 3, ..AugmentSpec::default() })?;
    let changed = mel.values().iter().zip(aug.values()).filter(|(a, b)| a != b).count();
    println!("SpecAugment replaced {changed} of {} cells with the grid mean", mel.values().len());
    Ok(())
}
