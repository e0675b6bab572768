use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};

use super::resample::{self, AxisMap};
use crate::error::{Error, Result};

/// Rate every waveform is resampled to on load.
pub const TARGET_SAMPLE_RATE: u32 = 44_100;

/// Mono audio samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("waveform contains non-finite samples".into()));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Averages interleaved channels into one.
    pub fn from_interleaved(data: &[f64], channels: usize, sample_rate: u32) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidArgument("channel count must be positive".into()));
        }
        let mono = data
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect();
        Self::new(mono, sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Linear-interpolation resampling; the duration is preserved up to one
    /// sample of rounding.
    pub fn resample(&self, rate: u32) -> Waveform {
        if rate == self.sample_rate || self.samples.is_empty() {
            return Waveform {
                samples: self.samples.clone(),
                sample_rate: rate,
            };
        }
        let n = self.samples.len();
        let out_len = ((n as f64) * f64::from(rate) / f64::from(self.sample_rate)).round() as usize;
        let step = f64::from(self.sample_rate) / f64::from(rate);
        let samples = (0..out_len)
            .map(|i| {
                let t = i as f64 * step;
                let i0 = (t.floor() as usize).min(n - 1);
                let i1 = (i0 + 1).min(n - 1);
                let frac = t - i0 as f64;
                self.samples[i0] * (1.0 - frac) + self.samples[i1] * frac
            })
            .collect();
        Waveform {
            samples,
            sample_rate: rate,
        }
    }
}

/// Reads a PCM WAV file, downmixes to mono and resamples to 44.1 kHz.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::UnsupportedAudio {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })?;
    let spec = reader.spec();
    let bad = |e: hound::Error| Error::UnsupportedAudio {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let data: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            if !matches!(spec.bits_per_sample, 8 | 16 | 24 | 32) {
                return Err(Error::UnsupportedAudio {
                    path: path.to_path_buf(),
                    reason: format!("{}-bit PCM", spec.bits_per_sample),
                });
            }
            let full_scale = f64::from(1u32 << (spec.bits_per_sample - 1));
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| (f64::from(v) / full_scale).clamp(-1.0, 1.0)))
                .collect::<std::result::Result<_, _>>()
                .map_err(bad)?
        }
        hound::SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| f64::from(v).clamp(-1.0, 1.0)))
            .collect::<std::result::Result<_, _>>()
            .map_err(bad)?,
    };
    let mono = Waveform::from_interleaved(&data, usize::from(spec.channels), spec.sample_rate)?;
    Ok(mono.resample(TARGET_SAMPLE_RATE))
}

/// Writes a mono 16-bit PCM WAV file.
pub fn save_wav(w: &Waveform, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let to_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(other)),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(to_err)?;
    for &s in &w.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(to_err)?;
    }
    writer.finalize().map_err(to_err)
}

/// STFT and filterbank settings. Only `n_mels` is user-facing; the rest are
/// pinned so features are reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct MelConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub log_floor: f64,
    /// Canonical output shape after resizing.
    pub out_mels: usize,
    pub out_frames: usize,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_fft: 2048,
            hop: 512,
            n_mels: 128,
            log_floor: 1e-5,
            out_mels: 128,
            out_frames: 512,
        }
    }
}

/// Log-magnitude mel grid stored mel-major: `values[mel * n_frames + frame]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    values: Vec<f64>,
    n_mels: usize,
    n_frames: usize,
}

impl MelSpectrogram {
    pub fn new(values: Vec<f64>, n_mels: usize, n_frames: usize) -> Result<Self> {
        if values.len() != n_mels * n_frames || n_mels == 0 || n_frames == 0 {
            return Err(Error::shape(
                format!("{n_mels}x{n_frames}"),
                format!("{} values", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("mel grid contains non-finite values".into()));
        }
        Ok(Self {
            values,
            n_mels,
            n_frames,
        })
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, mel: usize, frame: usize) -> f64 {
        self.values[mel * self.n_frames + frame]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular HTK-scale filters over `[0, sr/2]`, shape `n_mels × (n_fft/2 + 1)`.
pub fn mel_filterbank(sample_rate: u32, n_fft: usize, n_mels: usize) -> Vec<Vec<f64>> {
    let n_bins = n_fft / 2 + 1;
    let nyquist = f64::from(sample_rate) / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = |k: usize| k as f64 * f64::from(sample_rate) / n_fft as f64;
    (0..n_mels)
        .map(|m| {
            let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = bin_hz(k);
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= center {
                        (f - lo) / (center - lo)
                    } else {
                        (hi - f) / (hi - center)
                    }
                })
                .collect()
        })
        .collect()
}

/// Log-mel features resized to the canonical 128 × 512 grid.
pub fn mel_spectrogram(w: &Waveform, n_mels: usize) -> Result<MelSpectrogram> {
    mel_spectrogram_with(
        w,
        &MelConfig {
            n_mels,
            ..MelConfig::default()
        },
    )
}

pub fn mel_spectrogram_with(w: &Waveform, cfg: &MelConfig) -> Result<MelSpectrogram> {
    let samples = w.samples();
    if samples.len() < cfg.n_fft {
        return Err(Error::WaveformTooShort {
            len: samples.len(),
            window: cfg.n_fft,
        });
    }
    if cfg.n_mels == 0 {
        return Err(Error::InvalidArgument("n_mels must be positive".into()));
    }
    let n_frames = 1 + (samples.len() - cfg.n_fft) / cfg.hop;
    let window: Vec<f64> = (0..cfg.n_fft)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / cfg.n_fft as f64).cos())
        .collect();
    let bank = mel_filterbank(w.sample_rate(), cfg.n_fft, cfg.n_mels);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.n_fft);

    let mut grid = vec![0.0; cfg.n_mels * n_frames];
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.n_fft];
    let mut magnitude = vec![0.0; cfg.n_fft / 2 + 1];
    for frame in 0..n_frames {
        let start = frame * cfg.hop;
        for (b, (s, win)) in buf
            .iter_mut()
            .zip(samples[start..start + cfg.n_fft].iter().zip(&window))
        {
            *b = Complex::new(s * win, 0.0);
        }
        fft.process(&mut buf);
        for (m, c) in magnitude.iter_mut().zip(&buf) {
            *m = c.norm();
        }
        for (mel, filter) in bank.iter().enumerate() {
            let energy: f64 = filter.iter().zip(&magnitude).map(|(a, b)| a * b).sum();
            grid[mel * n_frames + frame] = energy.max(cfg.log_floor).ln();
        }
    }

    let resized = resample::apply(
        &grid,
        1,
        &AxisMap::bilinear(cfg.n_mels, cfg.out_mels),
        &AxisMap::bilinear(n_frames, cfg.out_frames),
    );
    MelSpectrogram::new(resized, cfg.out_mels, cfg.out_frames)
}

/// Frequency/time block masking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentSpec {
    pub freq_mask_ratio: f64,
    pub time_mask_ratio: f64,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            freq_mask_ratio: 0.15,
            time_mask_ratio: 0.15,
            seed: 0,
        }
    }
}

/// Replaces one frequency band and one time span with the grid mean.
/// Block extents are drawn uniformly from `0..=floor(ratio · len)`.
pub fn spec_augment(m: &MelSpectrogram, spec: &AugmentSpec) -> Result<MelSpectrogram> {
    for r in [spec.freq_mask_ratio, spec.time_mask_ratio] {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidArgument(format!("mask ratio {r} outside [0, 1]")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mean = m.mean();
    let mut out = m.clone();

    let max_f = (spec.freq_mask_ratio * m.n_mels as f64).floor() as usize;
    let height = rng.random_range(0..=max_f);
    let f0 = rng.random_range(0..=m.n_mels - height);
    let max_t = (spec.time_mask_ratio * m.n_frames as f64).floor() as usize;
    let width = rng.random_range(0..=max_t);
    let t0 = rng.random_range(0..=m.n_frames - width);

    for mel in f0..f0 + height {
        out.values[mel * m.n_frames..][..m.n_frames].fill(mean);
    }
    for mel in 0..m.n_mels {
        out.values[mel * m.n_frames + t0..][..width].fill(mean);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, secs: f64) -> Waveform {
        let n = (secs * 44_100.0) as usize;
        let s = (0..n)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / 44_100.0).sin())
            .collect();
        Waveform::new(s, 44_100).unwrap()
    }

    #[test]
    fn silence_maps_to_log_floor() {
        let w = Waveform::new(vec![0.0; 44_100], 44_100).unwrap();
        let m = mel_spectrogram(&w, 128).unwrap();
        let floor = 1e-5f64.ln();
        assert!(m.values().iter().all(|&v| (v - floor).abs() < 1e-12));
    }

    #[test]
    fn ten_second_clip_is_canonical_shape() {
        let m = mel_spectrogram(&tone(1000.0, 10.0), 128).unwrap();
        assert_eq!((m.n_mels(), m.n_frames()), (128, 512));
    }

    #[test]
    fn pure_tone_peaks_in_a_constant_band() {
        let m = mel_spectrogram(&tone(440.0, 2.0), 128).unwrap();
        let argmax = |frame: usize| {
            (0..128)
                .max_by(|&a, &b| m.get(a, frame).total_cmp(&m.get(b, frame)))
                .unwrap()
        };
        let first = argmax(0);
        assert!((0..512).all(|f| argmax(f) == first));

        // Independent oracle: the filter whose center frequency is closest to
        // 440 Hz on the HTK mel scale.
        let top = 2595.0 * (1.0 + 22_050.0f64 / 700.0).log10();
        let centers: Vec<f64> = (1..=128)
            .map(|i| 700.0 * (10f64.powf(top * i as f64 / 129.0 / 2595.0) - 1.0))
            .collect();
        let nearest = (0..128)
            .min_by(|&a, &b| (centers[a] - 440.0).abs().total_cmp(&(centers[b] - 440.0).abs()))
            .unwrap();
        assert!(first.abs_diff(nearest) <= 1, "argmax {first}, oracle {nearest}");
    }

    #[test]
    fn too_short_waveform_fails() {
        let w = Waveform::new(vec![0.1; 1000], 44_100).unwrap();
        assert!(matches!(
            mel_spectrogram(&w, 128),
            Err(Error::WaveformTooShort { len: 1000, window: 2048 })
        ));
    }

    #[test]
    fn zero_ratio_augment_is_identity() {
        let m = mel_spectrogram(&tone(300.0, 1.0), 128).unwrap();
        let spec = AugmentSpec {
            freq_mask_ratio: 0.0,
            time_mask_ratio: 0.0,
            seed: 3,
        };
        assert_eq!(spec_augment(&m, &spec).unwrap(), m);
    }

    #[test]
    fn augment_is_seeded_and_bounded() {
        let m = mel_spectrogram(&tone(300.0, 1.0), 128).unwrap();
        for seed in 0..20 {
            let spec = AugmentSpec {
                seed,
                ..AugmentSpec::default()
            };
            let a = spec_augment(&m, &spec).unwrap();
            assert_eq!(a, spec_augment(&m, &spec).unwrap());
            let mean = m.mean();
            let masked = a
                .values()
                .iter()
                .zip(m.values())
                .filter(|(x, y)| x != y || **x == mean)
                .count();
            assert!(masked as f64 <= 0.15 * 128.0 * 512.0 * 2.0);
        }
        assert!(spec_augment(
            &m,
            &AugmentSpec {
                freq_mask_ratio: 1.5,
                ..AugmentSpec::default()
            }
        )
        .is_err());
    }

    #[test]
    fn resample_preserves_duration() {
        let w = Waveform::new(vec![0.25; 22_050], 22_050).unwrap();
        let r = w.resample(44_100);
        assert_eq!(r.samples().len(), 44_100);
        assert!(r.samples().iter().all(|&s| (s - 0.25).abs() < 1e-12));
    }

    #[test]
    fn stereo_downmix_is_channel_mean() {
        let data: Vec<f64> = (0..10).flat_map(|i| [i as f64 / 10.0, -(i as f64) / 10.0]).collect();
        let w = Waveform::from_interleaved(&data, 2, 44_100).unwrap();
        assert!(w.samples().iter().all(|&s| s == 0.0));
    }
}
