//! Deterministic stand-ins for the pretrained image and audio encoders.
//!
//! Both reference encoders are small seeded affine maps over pooled inputs,
//! so every path through them has an exact, cheap gradient.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{dot, normalize_backward, Embedding, EMBED_DIM};
use crate::error::{Error, Result};
use crate::params_io::{split_exact, ParamFile};
use crate::signal_io::resample::{self, AxisMap};
use crate::signal_io::{ImageBuffer, MelSpectrogram};

/// Side length of the pooled grid the reference image encoder reads.
pub const IMAGE_GRID: usize = 8;

/// A seeded affine map `x ↦ Wᵀx + b` from `in_dim` to `out_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendParams {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `in_dim × out_dim`.
    pub projection: Vec<f64>,
    pub bias: Vec<f64>,
    pub seed: u64,
    pub trainable: bool,
}

impl BackendParams {
    /// Weights drawn from `N(0, 1/in_dim)`, biases from `N(0, 0.01²)`.
    pub fn seeded(in_dim: usize, out_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Normal::new(0.0, (1.0 / in_dim as f64).sqrt()).expect("valid std");
        let b = Normal::new(0.0, 0.01).expect("valid std");
        Self {
            in_dim,
            out_dim,
            projection: (0..in_dim * out_dim).map(|_| w.sample(&mut rng)).collect(),
            bias: (0..out_dim).map(|_| b.sample(&mut rng)).collect(),
            seed,
            trainable: false,
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.in_dim);
        affine(x, &self.projection, &self.bias)
    }

    /// Gradient with respect to the input given a gradient on the output.
    pub fn backward_input(&self, grad_out: &[f64]) -> Vec<f64> {
        self.projection
            .chunks_exact(self.out_dim)
            .map(|row| dot(row, grad_out))
            .collect()
    }
}

fn affine(x: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let mut y = bias.to_vec();
    for (xi, row) in x.iter().zip(weight.chunks_exact(bias.len())) {
        if *xi == 0.0 {
            continue;
        }
        for (yj, w) in y.iter_mut().zip(row) {
            *yj += xi * w;
        }
    }
    y
}

/// An image encoder into the shared space with a vector-Jacobian product.
pub trait ImageEncoder {
    fn dim(&self) -> usize;

    fn encode(&self, img: &ImageBuffer) -> Embedding;

    /// Pulls a gradient on the (unit) embedding back to the pixels of `img`,
    /// in the interleaved layout of [`ImageBuffer::pixels`].
    fn backward(&self, img: &ImageBuffer, grad: &[f64]) -> Vec<f64>;
}

/// Area-pools the image to an 8×8×3 grid, applies a seeded affine
/// projection and normalizes.
#[derive(Debug, Clone)]
pub struct ReferenceImageEncoder {
    params: BackendParams,
}

impl ReferenceImageEncoder {
    pub fn new(seed: u64) -> Self {
        Self::with_dim(seed, EMBED_DIM)
    }

    pub fn with_dim(seed: u64, dim: usize) -> Self {
        Self {
            params: BackendParams::seeded(IMAGE_GRID * IMAGE_GRID * 3, dim, seed),
        }
    }

    pub fn params(&self) -> &BackendParams {
        &self.params
    }

    fn pool_maps(img: &ImageBuffer) -> (AxisMap, AxisMap) {
        (
            AxisMap::area(img.height(), IMAGE_GRID),
            AxisMap::area(img.width(), IMAGE_GRID),
        )
    }

    fn raw(&self, img: &ImageBuffer) -> Vec<f64> {
        let (rows, cols) = Self::pool_maps(img);
        self.params.forward(&resample::apply(img.pixels(), 3, &rows, &cols))
    }
}

impl ImageEncoder for ReferenceImageEncoder {
    fn dim(&self) -> usize {
        self.params.out_dim
    }

    fn encode(&self, img: &ImageBuffer) -> Embedding {
        Embedding::normalize(self.raw(img)).expect("projection output is nonzero")
    }

    fn backward(&self, img: &ImageBuffer, grad: &[f64]) -> Vec<f64> {
        let raw = self.raw(img);
        let g_raw = normalize_backward(&raw, grad);
        let g_pooled = self.params.backward_input(&g_raw);
        let (rows, cols) = Self::pool_maps(img);
        resample::apply_adjoint(&g_pooled, 3, &rows, &cols)
    }
}

/// An audio encoder into the shared space.
pub trait AudioEncoder {
    fn dim(&self) -> usize;
    fn encode(&self, mel: &MelSpectrogram) -> Result<Embedding>;
}

/// The trainable affine head of the reference audio encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioHead {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `in_dim × out_dim`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub seed: u64,
}

impl AudioHead {
    pub const KIND: &'static str = "audio-head";

    pub fn seeded(in_dim: usize, out_dim: usize, seed: u64) -> Self {
        let p = BackendParams::seeded(in_dim, out_dim, seed);
        Self {
            in_dim,
            out_dim,
            weight: p.projection,
            bias: p.bias,
            seed,
        }
    }

    pub fn forward(&self, h: &[f64]) -> Vec<f64> {
        affine(h, &self.weight, &self.bias)
    }

    /// Accumulates parameter gradients for one input/output-gradient pair.
    pub fn accumulate_grad(&self, h: &[f64], grad_out: &[f64], gw: &mut [f64], gb: &mut [f64]) {
        for (hi, row) in h.iter().zip(gw.chunks_exact_mut(self.out_dim)) {
            for (g, go) in row.iter_mut().zip(grad_out) {
                *g += hi * go;
            }
        }
        for (g, go) in gb.iter_mut().zip(grad_out) {
            *g += go;
        }
    }

    pub fn to_param_file(&self) -> ParamFile {
        let mut f = ParamFile::new(Self::KIND)
            .with("shape", format!("{} {}", self.in_dim, self.out_dim))
            .with("seed", self.seed);
        f.data = self.weight.iter().chain(&self.bias).copied().collect();
        f
    }

    pub fn from_param_file(f: &ParamFile) -> Result<Self> {
        f.expect_kind(Self::KIND)?;
        let shape = f.get_list("shape")?;
        let [in_dim, out_dim] = shape[..] else {
            return Err(Error::ParamFormat(format!("bad head shape {shape:?}")));
        };
        let parts = split_exact(&f.data, &[in_dim * out_dim, out_dim])?;
        Ok(Self {
            in_dim,
            out_dim,
            weight: parts[0].to_vec(),
            bias: parts[1].to_vec(),
            seed: f.get_parsed("seed")?,
        })
    }
}

/// Pooled mel statistics through a fixed seeded projection, then the
/// trainable [`AudioHead`], then normalization.
#[derive(Debug, Clone)]
pub struct ReferenceAudioEncoder {
    pub backbone: BackendParams,
    pub head: AudioHead,
    n_mels: usize,
}

impl ReferenceAudioEncoder {
    pub const N_MELS: usize = 128;
    pub const N_FRAMES: usize = 512;
    pub const HIDDEN: usize = 128;

    pub fn new(seed: u64) -> Self {
        Self::with_dim(seed, EMBED_DIM)
    }

    pub fn with_dim(seed: u64, dim: usize) -> Self {
        let backbone = BackendParams::seeded(2 * Self::N_MELS, Self::HIDDEN, seed);
        let head = AudioHead::seeded(Self::HIDDEN, dim, seed.wrapping_add(1));
        Self {
            backbone,
            head,
            n_mels: Self::N_MELS,
        }
    }

    pub fn with_head(mut self, head: AudioHead) -> Result<Self> {
        if head.in_dim != self.backbone.out_dim {
            return Err(Error::shape(self.backbone.out_dim, head.in_dim));
        }
        self.head = head;
        Ok(self)
    }

    /// Features fed to the head: the fixed backbone applied to
    /// `[per-bin mean − overall mean, per-bin std]` over frames.
    pub fn features(&self, mel: &MelSpectrogram) -> Result<Vec<f64>> {
        if mel.n_mels() != self.n_mels || mel.n_frames() != Self::N_FRAMES {
            return Err(Error::shape(
                format!("{}x{}", self.n_mels, Self::N_FRAMES),
                format!("{}x{}", mel.n_mels(), mel.n_frames()),
            ));
        }
        let frames = mel.n_frames() as f64;
        let rows: Vec<&[f64]> = mel.values().chunks_exact(mel.n_frames()).collect();
        let means: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() / frames).collect();
        let overall = means.iter().sum::<f64>() / means.len() as f64;
        let stds = rows.iter().zip(&means).map(|(r, m)| {
            (r.iter().map(|v| (v - m).powi(2)).sum::<f64>() / frames).sqrt()
        });
        let stats: Vec<f64> = means.iter().map(|m| m - overall).chain(stds).collect();
        Ok(self.backbone.forward(&stats))
    }
}

impl AudioEncoder for ReferenceAudioEncoder {
    fn dim(&self) -> usize {
        self.head.out_dim
    }

    fn encode(&self, mel: &MelSpectrogram) -> Result<Embedding> {
        Embedding::normalize(self.head.forward(&self.features(mel)?))
    }
}
