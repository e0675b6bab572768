//! Multi-stage image features, Gram matrices and the two feature losses.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::signal_io::ImageBuffer;

/// A `C × H × W` feature grid stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 || data.len() != channels * height * width {
            return Err(Error::shape(
                format!("{channels}x{height}x{width}"),
                format!("{} values", data.len()),
            ));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros_like(other: &FeatureMap) -> Self {
        Self {
            data: vec![0.0; other.data.len()],
            ..*other
        }
    }

    /// Channel-major view of an interleaved RGB image.
    pub fn from_image(img: &ImageBuffer) -> Self {
        let (h, w) = img.shape();
        let mut data = vec![0.0; 3 * h * w];
        for (p, px) in img.pixels().chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * h * w + p] = px[c];
            }
        }
        Self {
            channels: 3,
            height: h,
            width: w,
            data,
        }
    }

    /// Inverse of [`FeatureMap::from_image`] for a 3-channel gradient.
    pub fn to_interleaved(&self) -> Vec<f64> {
        let hw = self.height * self.width;
        let mut out = vec![0.0; self.channels * hw];
        for c in 0..self.channels {
            for p in 0..hw {
                out[p * self.channels + c] = self.data[c * hw + p];
            }
        }
        out
    }

    fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }
}

/// A differentiable multi-stage image featurizer.
pub trait FeatureExtractor {
    /// Features of every stage, shallowest first.
    fn forward(&self, img: &ImageBuffer) -> Vec<FeatureMap>;

    /// Pulls per-stage feature gradients (`None` = zero) back to the
    /// interleaved pixels of `img`.
    fn backward(&self, img: &ImageBuffer, grads: &[Option<FeatureMap>]) -> Vec<f64>;

    /// Stage used by the content loss.
    fn content_stage(&self) -> usize;
}

/// One stride-2, 3×3, zero-padded convolution followed by `tanh`.
#[derive(Debug, Clone)]
struct ConvStage {
    c_in: usize,
    c_out: usize,
    /// `c_out × c_in × 3 × 3`.
    weights: Vec<f64>,
}

impl ConvStage {
    fn out_size(n: usize) -> usize {
        n.div_ceil(2)
    }

    fn pre_activation(&self, x: &FeatureMap) -> FeatureMap {
        let (h, w) = (x.height, x.width);
        let (ho, wo) = (Self::out_size(h), Self::out_size(w));
        let mut out = vec![0.0; self.c_out * ho * wo];
        for co in 0..self.c_out {
            for ci in 0..self.c_in {
                let k = &self.weights[(co * self.c_in + ci) * 9..][..9];
                let plane = &x.data[ci * h * w..][..h * w];
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = 0.0;
                        for ky in 0..3 {
                            let Some(iy) = (2 * oy + ky).checked_sub(1).filter(|&v| v < h) else {
                                continue;
                            };
                            for kx in 0..3 {
                                let Some(ix) = (2 * ox + kx).checked_sub(1).filter(|&v| v < w) else {
                                    continue;
                                };
                                acc += k[ky * 3 + kx] * plane[iy * w + ix];
                            }
                        }
                        out[(co * ho + oy) * wo + ox] += acc;
                    }
                }
            }
        }
        FeatureMap {
            channels: self.c_out,
            height: ho,
            width: wo,
            data: out,
        }
    }

    /// Gradient w.r.t. the stage input given the gradient w.r.t. its
    /// pre-activation.
    fn input_grad(&self, g: &FeatureMap, h: usize, w: usize) -> FeatureMap {
        let (ho, wo) = (g.height, g.width);
        let mut out = vec![0.0; self.c_in * h * w];
        for co in 0..self.c_out {
            for ci in 0..self.c_in {
                let k = &self.weights[(co * self.c_in + ci) * 9..][..9];
                let plane = &mut out[ci * h * w..][..h * w];
                for oy in 0..ho {
                    for ox in 0..wo {
                        let go = g.data[(co * ho + oy) * wo + ox];
                        if go == 0.0 {
                            continue;
                        }
                        for ky in 0..3 {
                            let Some(iy) = (2 * oy + ky).checked_sub(1).filter(|&v| v < h) else {
                                continue;
                            };
                            for kx in 0..3 {
                                let Some(ix) = (2 * ox + kx).checked_sub(1).filter(|&v| v < w) else {
                                    continue;
                                };
                                plane[iy * w + ix] += k[ky * 3 + kx] * go;
                            }
                        }
                    }
                }
            }
        }
        FeatureMap {
            channels: self.c_in,
            height: h,
            width: w,
            data: out,
        }
    }
}

/// Three fixed seeded conv stages (3→8→16→32 channels, each halving the
/// resolution). Inputs are centered at 0.5 before the first stage.
#[derive(Debug, Clone)]
pub struct ReferenceExtractor {
    stages: Vec<ConvStage>,
    pub seed: u64,
}

impl ReferenceExtractor {
    pub const CHANNELS: [usize; 4] = [3, 8, 16, 32];

    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stages = Self::CHANNELS
            .windows(2)
            .map(|c| {
                let std = 1.5 / ((c[0] * 9) as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("valid std");
                ConvStage {
                    c_in: c[0],
                    c_out: c[1],
                    weights: (0..c[0] * c[1] * 9).map(|_| normal.sample(&mut rng)).collect(),
                }
            })
            .collect();
        Self { stages, seed }
    }

    fn trace(&self, img: &ImageBuffer) -> Vec<FeatureMap> {
        let mut x = FeatureMap::from_image(img);
        x.data.iter_mut().for_each(|v| *v -= 0.5);
        let mut outs = Vec::with_capacity(self.stages.len() + 1);
        outs.push(x);
        for stage in &self.stages {
            let mut z = stage.pre_activation(outs.last().expect("non-empty"));
            z.data.iter_mut().for_each(|v| *v = v.tanh());
            outs.push(z);
        }
        outs
    }
}

impl FeatureExtractor for ReferenceExtractor {
    fn forward(&self, img: &ImageBuffer) -> Vec<FeatureMap> {
        self.trace(img).into_iter().skip(1).collect()
    }

    fn backward(&self, img: &ImageBuffer, grads: &[Option<FeatureMap>]) -> Vec<f64> {
        let acts = self.trace(img);
        let mut g: Option<FeatureMap> = None;
        for (s, stage) in self.stages.iter().enumerate().rev() {
            let out = &acts[s + 1];
            let mut total = grads.get(s).cloned().flatten();
            if let Some(prev) = g.take() {
                match &mut total {
                    Some(t) => t.data.iter_mut().zip(&prev.data).for_each(|(a, b)| *a += b),
                    None => total = Some(prev),
                }
            }
            let Some(mut t) = total else { continue };
            for (gv, y) in t.data.iter_mut().zip(&out.data) {
                *gv *= 1.0 - y * y;
            }
            g = Some(stage.input_grad(&t, acts[s].height, acts[s].width));
        }
        match g {
            Some(g) => g.to_interleaved(),
            None => vec![0.0; img.pixels().len()],
        }
    }

    fn content_stage(&self) -> usize {
        1
    }
}

/// A single stage that passes the image through unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityExtractor;

impl FeatureExtractor for IdentityExtractor {
    fn forward(&self, img: &ImageBuffer) -> Vec<FeatureMap> {
        vec![FeatureMap::from_image(img)]
    }

    fn backward(&self, img: &ImageBuffer, grads: &[Option<FeatureMap>]) -> Vec<f64> {
        match grads.first().cloned().flatten() {
            Some(g) => g.to_interleaved(),
            None => vec![0.0; img.pixels().len()],
        }
    }

    fn content_stage(&self) -> usize {
        0
    }
}

/// `G = F Fᵀ / (C·H·W)` with `F` the `C × HW` unfolding; row-major `C × C`.
pub fn gram_matrix(f: &FeatureMap) -> Vec<f64> {
    let c = f.channels;
    let hw = f.height * f.width;
    let norm = (c * hw) as f64;
    let mut g = vec![0.0; c * c];
    for i in 0..c {
        let fi = &f.data[i * hw..][..hw];
        for j in i..c {
            let fj = &f.data[j * hw..][..hw];
            let v = fi.iter().zip(fj).map(|(a, b)| a * b).sum::<f64>() / norm;
            g[i * c + j] = v;
            g[j * c + i] = v;
        }
    }
    g
}

/// Gradient w.r.t. `f` given a gradient on its Gram matrix.
pub fn gram_backward(f: &FeatureMap, grad_g: &[f64]) -> FeatureMap {
    let c = f.channels;
    let hw = f.height * f.width;
    let norm = (c * hw) as f64;
    let mut out = FeatureMap::zeros_like(f);
    for i in 0..c {
        for j in 0..c {
            let s = (grad_g[i * c + j] + grad_g[j * c + i]) / norm;
            if s == 0.0 {
                continue;
            }
            let fj = &f.data[j * hw..][..hw];
            let oi = &mut out.data[i * hw..][..hw];
            for (o, v) in oi.iter_mut().zip(fj) {
                *o += s * v;
            }
        }
    }
    out
}

fn check_same(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("{:?}", b.shape()), format!("{:?}", a.shape())));
    }
    Ok(())
}

/// Sum over stages of the L1 distance between Gram matrices, with the
/// gradient w.r.t. `output` (interleaved).
pub fn foreground_reg_loss(
    output: &ImageBuffer,
    source: &ImageBuffer,
    extractor: &dyn FeatureExtractor,
) -> Result<(f64, Vec<f64>)> {
    check_same(output, source)?;
    let fy = extractor.forward(output);
    let fx = extractor.forward(source);
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(fy.len());
    for (a, b) in fy.iter().zip(&fx) {
        let (ga, gb) = (gram_matrix(a), gram_matrix(b));
        let sign: Vec<f64> = ga
            .iter()
            .zip(&gb)
            .map(|(x, y)| {
                loss += (x - y).abs();
                if x > y {
                    1.0
                } else if x < y {
                    -1.0
                } else {
                    0.0
                }
            })
            .collect();
        grads.push(Some(gram_backward(a, &sign)));
    }
    Ok((loss, extractor.backward(output, &grads)))
}

/// Mean squared error between content-stage features, with the gradient
/// w.r.t. `output` (interleaved).
pub fn content_loss(
    output: &ImageBuffer,
    source: &ImageBuffer,
    extractor: &dyn FeatureExtractor,
) -> Result<(f64, Vec<f64>)> {
    check_same(output, source)?;
    let s = extractor.content_stage();
    let fy = extractor.forward(output).swap_remove(s);
    let fx = extractor.forward(source).swap_remove(s);
    let (loss, g) = feature_mse(&fy, &fx)?;
    let mut grads: Vec<Option<FeatureMap>> = vec![None; s + 1];
    grads[s] = Some(g);
    Ok((loss, extractor.backward(output, &grads)))
}

/// `mean((a − b)²)` and its gradient w.r.t. `a`.
pub fn feature_mse(a: &FeatureMap, b: &FeatureMap) -> Result<(f64, FeatureMap)> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("{:?}", b.shape()), format!("{:?}", a.shape())));
    }
    let n = a.data.len() as f64;
    let mut grad = FeatureMap::zeros_like(a);
    let mut loss = 0.0;
    for ((g, x), y) in grad.data.iter_mut().zip(&a.data).zip(&b.data) {
        let d = x - y;
        loss += d * d;
        *g = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}
