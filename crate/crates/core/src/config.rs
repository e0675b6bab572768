//! `key = value` configuration files covering every tunable default.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::embedding::ContrastiveConfig;
use crate::error::{Error, Result};
use crate::localizer::{DecoderShape, LocalizerTrainConfig};
use crate::metrics::EvalConfig;
use crate::signal_io::MelConfig;
use crate::stylizer::{LossWeights, StyleConfig};

/// All settings the command-line tool reads.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub seed: u64,
    /// Seed of the reference encoders and the texture feature extractor.
    pub backend_seed: u64,
    pub mel: MelConfig,
    pub pretrain: ContrastiveConfig,
    pub decoder: DecoderShape,
    pub localizer: LocalizerTrainConfig,
    pub style: StyleConfig,
    pub weights: LossWeights,
    pub eval: EvalConfig,
    /// Samples in the built-in toy datasets.
    pub toy_samples: usize,
    /// Side length of built-in toy images.
    pub toy_size: usize,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            backend_seed: 7,
            mel: MelConfig::default(),
            pretrain: ContrastiveConfig::default(),
            decoder: DecoderShape::default(),
            localizer: LocalizerTrainConfig::default(),
            style: StyleConfig::default(),
            weights: LossWeights::default(),
            eval: EvalConfig::default(),
            toy_samples: 64,
            toy_size: 64,
        }
    }
}

/// One documented configuration key.
pub struct KeySpec {
    pub key: &'static str,
    pub doc: &'static str,
    get: fn(&CliConfig) -> String,
    set: fn(&mut CliConfig, &str) -> Result<()>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{value}`: {e}")))
}

macro_rules! keys {
    ($($key:literal, $doc:literal, |$c:ident| $place:expr;)*) => {
        &[$(KeySpec {
            key: $key,
            doc: $doc,
            get: |$c: &CliConfig| $place.to_string(),
            set: |$c: &mut CliConfig, v: &str| {
                $place = parse($key, v)?;
                Ok(())
            },
        }),*]
    };
}

/// Every accepted key, in reference-page order.
pub static KEYS: &[KeySpec] = keys! {
    "seed", "Run seed; `--seed` overrides it.", |c| c.seed;
    "backend.seed", "Seed of the reference image/audio encoders and the texture feature extractor.", |c| c.backend_seed;
    "mel.n_fft", "STFT window length (Hann) in samples.", |c| c.mel.n_fft;
    "mel.hop", "STFT hop in samples.", |c| c.mel.hop;
    "mel.n_mels", "Mel bands computed from the spectrum.", |c| c.mel.n_mels;
    "mel.log_floor", "Floor applied before the natural log.", |c| c.mel.log_floor;
    "mel.out_mels", "Mel rows after the final bilinear resize.", |c| c.mel.out_mels;
    "mel.out_frames", "Time frames after the final bilinear resize.", |c| c.mel.out_frames;
    "pretrain.temperature", "InfoNCE temperature.", |c| c.pretrain.temperature;
    "pretrain.batch_size", "Pairs per contrastive batch.", |c| c.pretrain.batch_size;
    "pretrain.epochs", "Passes over the paired data; `--iterations` overrides it.", |c| c.pretrain.epochs;
    "pretrain.learning_rate", "Adam step size for the audio head.", |c| c.pretrain.learning_rate;
    "pretrain.freq_mask_ratio", "Largest masked fraction of mel bands.", |c| c.pretrain.freq_mask_ratio;
    "pretrain.time_mask_ratio", "Largest masked fraction of time frames.", |c| c.pretrain.time_mask_ratio;
    "decoder.grid", "Cells per side of the decoder's coarse grid.", |c| c.decoder.grid;
    "decoder.sub", "Pixels per cell side in the pooled input.", |c| c.decoder.sub;
    "decoder.filters", "Fixed local filters per cell.", |c| c.decoder.filters;
    "decoder.cond_dim", "Width of the projected condition.", |c| c.decoder.cond_dim;
    "decoder.hidden", "Hidden units of the per-cell classifier.", |c| c.decoder.hidden;
    "localizer.threshold", "Probability threshold for pseudo masks (strictly greater).", |c| c.localizer.threshold;
    "localizer.epochs", "Training epochs; `--iterations` overrides it.", |c| c.localizer.epochs;
    "localizer.learning_rate", "Adam step size for the decoder.", |c| c.localizer.learning_rate;
    "localizer.batch_size", "Examples per decoder update.", |c| c.localizer.batch_size;
    "style.k", "Patches sampled per iteration.", |c| c.style.k;
    "style.size_min", "Smallest patch side before resizing.", |c| c.style.size_range.0;
    "style.size_max", "Largest patch side before resizing.", |c| c.style.size_range.1;
    "style.ohem_fraction", "Fraction of hardest patches kept by the patch loss.", |c| c.style.ohem_fraction;
    "style.iterations", "Optimization steps; `--iterations` overrides it.", |c| c.style.iterations;
    "style.learning_rate", "Adam step size for the SIREN parameters.", |c| c.style.learning_rate;
    "style.center_threshold", "Mask value a patch center must exceed.", |c| c.style.center_threshold;
    "style.augment", "Random flip and sub-crop of each patch (`true`/`false`).", |c| c.style.augment;
    "style.lambda_clip", "Weight of the directional patch loss.", |c| c.weights.lambda_clip;
    "style.lambda_reg", "Weight of the Gram-matrix regularizer.", |c| c.weights.lambda_reg;
    "style.lambda_c", "Weight of the content loss.", |c| c.weights.lambda_c;
    "inr.fourier_m", "Random Fourier frequencies; the SIREN input is twice as wide.", |c| c.style.inr.fourier_m;
    "inr.fourier_sigma", "Standard deviation of the Fourier frequency matrix.", |c| c.style.inr.fourier_sigma;
    "inr.layers", "Sine layers in the SIREN.", |c| c.style.inr.layers;
    "inr.width", "Units per sine layer.", |c| c.style.inr.width;
    "inr.omega0", "Sine frequency scale.", |c| c.style.inr.omega0;
    "eval.bin_threshold", "Prediction binarization threshold (strictly greater).", |c| c.eval.bin_threshold;
    "eval.success_threshold", "IoU at which a sample counts as localized.", |c| c.eval.success_threshold;
    "eval.n_thresholds", "IoU thresholds on the AUC curve.", |c| c.eval.n_thresholds;
    "toy.samples", "Samples in the built-in toy datasets.", |c| c.toy_samples;
    "toy.size", "Side of built-in toy images.", |c| c.toy_size;
};

impl CliConfig {
    pub fn get(&self, key: &str) -> Option<String> {
        KEYS.iter().find(|k| k.key == key).map(|k| (k.get)(self))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let spec = KEYS
            .iter()
            .find(|k| k.key == key)
            .ok_or_else(|| Error::Config(format!("unknown key `{key}`")))?;
        (spec.set)(self, value)
    }

    /// Applies `key = value` lines on top of the defaults. Blank lines and
    /// text after `#` are ignored; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: `{key}` set twice", n + 1)));
            }
            cfg.set(key, value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Every key with its current value, as a loadable file.
    pub fn to_file_string(&self) -> String {
        KEYS.iter().map(|k| format!("{} = {}\n", k.key, (k.get)(self))).collect()
    }

    /// Markdown page listing every key, its default and meaning.
    pub fn reference_page() -> String {
        let d = Self::default();
        let mut out = String::from(
            "# Configuration reference\n\n\
             Generated from the built-in defaults. Config files hold `key = value` lines; \
             `#` starts a comment and unknown keys are rejected.\n\n\
             | key | default | meaning |\n|---|---|---|\n",
        );
        for k in KEYS {
            out.push_str(&format!("| `{}` | `{}` | {} |\n", k.key, (k.get)(&d), k.doc));
        }
        out
    }
}
