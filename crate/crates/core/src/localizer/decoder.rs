//! Audio-conditioned mask decoder.
//!
//! A fixed seeded filter bank summarizes the image on a coarse grid. The
//! conditioning embedding is projected and concatenated to every cell's
//! features, a two-layer perceptron maps each cell to a logit, and the
//! logit grid is bilinearly upsampled to the image raster.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::masks::{LogitMap, ProbabilityMask};
use crate::embedding::{Embedding, EMBED_DIM};
use crate::error::{Error, Result};
use crate::params_io::{split_exact, ParamFile};
use crate::signal_io::resample::{self, AxisMap};
use crate::signal_io::ImageBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderShape {
    /// Cells per side of the feature grid.
    pub grid: usize,
    /// Pooled samples per cell side fed to the filter bank.
    pub sub: usize,
    pub filters: usize,
    pub cond_dim: usize,
    pub hidden: usize,
    pub embed_dim: usize,
}

impl Default for DecoderShape {
    fn default() -> Self {
        Self {
            grid: 8,
            sub: 4,
            filters: 16,
            cond_dim: 16,
            hidden: 32,
            embed_dim: EMBED_DIM,
        }
    }
}

impl DecoderShape {
    fn patch_len(&self) -> usize {
        self.sub * self.sub * 3
    }

    fn cell_in(&self) -> usize {
        self.filters + self.cond_dim
    }

    fn sizes(&self) -> [usize; 6] {
        [
            self.embed_dim * self.cond_dim,
            self.cond_dim,
            self.hidden * self.cell_in(),
            self.hidden,
            self.hidden,
            1,
        ]
    }

    pub fn n_trainable(&self) -> usize {
        self.sizes().iter().sum()
    }
}

/// Decoder weights. `trainable` is laid out as
/// `[proj, proj_bias, w1, b1, w2, b2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    pub shape: DecoderShape,
    pub seed: u64,
    /// Row-major `filters × (sub·sub·3)`; never trained.
    pub filter_bank: Vec<f64>,
    pub trainable: Vec<f64>,
}

struct View<'a> {
    proj: &'a [f64],
    proj_b: &'a [f64],
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: f64,
}

/// Filter responses per grid cell, `grid² × filters`. Independent of the
/// trainable weights, so it can be computed once per image.
#[derive(Debug, Clone)]
pub struct ImageFeatures {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

/// Activations kept from the forward pass for back-propagation.
pub struct DecoderCache {
    cond_proj: Vec<f64>,
    hidden: Vec<f64>,
}

impl DecoderParams {
    pub const KIND: &'static str = "decoder";

    pub fn seeded(shape: DecoderShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = |n: usize, std: f64| -> Vec<f64> {
            let d = Normal::new(0.0, std).expect("valid std");
            (0..n).map(|_| d.sample(&mut rng)).collect()
        };
        let filter_bank = normal(shape.filters * shape.patch_len(), (2.0 / shape.patch_len() as f64).sqrt());
        let mut trainable = Vec::with_capacity(shape.n_trainable());
        trainable.extend(normal(shape.embed_dim * shape.cond_dim, 1.0));
        trainable.extend(vec![0.0; shape.cond_dim]);
        trainable.extend(normal(shape.hidden * shape.cell_in(), (1.0 / shape.cell_in() as f64).sqrt()));
        trainable.extend(vec![0.0; shape.hidden]);
        trainable.extend(normal(shape.hidden, (1.0 / shape.hidden as f64).sqrt()));
        trainable.push(0.0);
        Self {
            shape,
            seed,
            filter_bank,
            trainable,
        }
    }

    fn view(&self) -> View<'_> {
        let s = self.shape.sizes();
        let t = &self.trainable;
        let mut at = 0;
        let mut take = |n: usize| {
            let out = &t[at..at + n];
            at += n;
            out
        };
        View {
            proj: take(s[0]),
            proj_b: take(s[1]),
            w1: take(s[2]),
            b1: take(s[3]),
            w2: take(s[4]),
            b2: take(s[5])[0],
        }
    }

    pub fn image_features(&self, img: &ImageBuffer) -> ImageFeatures {
        let sh = &self.shape;
        let side = sh.grid * sh.sub;
        let pooled = resample::apply(
            img.pixels(),
            3,
            &AxisMap::area(img.height(), side),
            &AxisMap::area(img.width(), side),
        );
        let mut values = Vec::with_capacity(sh.grid * sh.grid * sh.filters);
        let mut patch = Vec::with_capacity(sh.patch_len());
        for gy in 0..sh.grid {
            for gx in 0..sh.grid {
                patch.clear();
                for sy in 0..sh.sub {
                    let row = (gy * sh.sub + sy) * side + gx * sh.sub;
                    patch.extend(pooled[row * 3..(row + sh.sub) * 3].iter().map(|v| v - 0.5));
                }
                for f in self.filter_bank.chunks_exact(sh.patch_len()) {
                    let r: f64 = f.iter().zip(&patch).map(|(a, b)| a * b).sum();
                    values.push(r.tanh());
                }
            }
        }
        ImageFeatures {
            height: img.height(),
            width: img.width(),
            values,
        }
    }

    fn upsample_maps(&self, height: usize, width: usize) -> (AxisMap, AxisMap) {
        (
            AxisMap::bilinear(self.shape.grid, height),
            AxisMap::bilinear(self.shape.grid, width),
        )
    }

    /// Per-cell logits before upsampling, with the cache for backward.
    pub fn forward_cells(&self, feats: &ImageFeatures, cond: &[f64]) -> Result<(Vec<f64>, DecoderCache)> {
        let sh = &self.shape;
        if cond.len() != sh.embed_dim {
            return Err(Error::shape(sh.embed_dim, cond.len()));
        }
        let v = self.view();
        let mut cond_proj = v.proj_b.to_vec();
        for (c, row) in cond.iter().zip(v.proj.chunks_exact(sh.cond_dim)) {
            for (p, w) in cond_proj.iter_mut().zip(row) {
                *p += c * w;
            }
        }

        let cells = sh.grid * sh.grid;
        let mut logits = Vec::with_capacity(cells);
        let mut hidden = Vec::with_capacity(cells * sh.hidden);
        for f in feats.values.chunks_exact(sh.filters) {
            let mut out = v.b2;
            for ((w_row, b), w2) in v.w1.chunks_exact(sh.cell_in()).zip(v.b1).zip(v.w2) {
                let (wf, wc) = w_row.split_at(sh.filters);
                let a = b
                    + wf.iter().zip(f).map(|(x, y)| x * y).sum::<f64>()
                    + wc.iter().zip(&cond_proj).map(|(x, y)| x * y).sum::<f64>();
                let h = a.tanh();
                hidden.push(h);
                out += w2 * h;
            }
            logits.push(out);
        }
        Ok((logits, DecoderCache { cond_proj, hidden }))
    }

    pub fn forward_features(&self, feats: &ImageFeatures, cond: &[f64]) -> Result<(LogitMap, DecoderCache)> {
        let (cells, cache) = self.forward_cells(feats, cond)?;
        let (rows, cols) = self.upsample_maps(feats.height, feats.width);
        let values = resample::apply(&cells, 1, &rows, &cols);
        Ok((LogitMap::new(feats.height, feats.width, values)?, cache))
    }

    /// Gradient of the trainable parameters given a gradient on the
    /// full-resolution logit map.
    pub fn backward(
        &self,
        feats: &ImageFeatures,
        cond: &[f64],
        cache: &DecoderCache,
        grad_logits: &[f64],
    ) -> Vec<f64> {
        let sh = &self.shape;
        let v = self.view();
        let (rows, cols) = self.upsample_maps(feats.height, feats.width);
        let g_cells = resample::apply_adjoint(grad_logits, 1, &rows, &cols);

        let s = sh.sizes();
        let mut g_proj = vec![0.0; s[0]];
        let mut g_proj_b = vec![0.0; s[1]];
        let mut g_w1 = vec![0.0; s[2]];
        let mut g_b1 = vec![0.0; s[3]];
        let mut g_w2 = vec![0.0; s[4]];
        let mut g_b2 = 0.0;

        for (cell, (&g, f)) in g_cells.iter().zip(feats.values.chunks_exact(sh.filters)).enumerate() {
            if g == 0.0 {
                continue;
            }
            g_b2 += g;
            let hid = &cache.hidden[cell * sh.hidden..][..sh.hidden];
            for k in 0..sh.hidden {
                g_w2[k] += g * hid[k];
                let ga = g * v.w2[k] * (1.0 - hid[k] * hid[k]);
                g_b1[k] += ga;
                let row = &mut g_w1[k * sh.cell_in()..][..sh.cell_in()];
                let (rf, rc) = row.split_at_mut(sh.filters);
                for (r, x) in rf.iter_mut().zip(f) {
                    *r += ga * x;
                }
                for (r, x) in rc.iter_mut().zip(&cache.cond_proj) {
                    *r += ga * x;
                }
                let w_c = &v.w1[k * sh.cell_in() + sh.filters..][..sh.cond_dim];
                for (gp, w) in g_proj_b.iter_mut().zip(w_c) {
                    *gp += ga * w;
                }
            }
        }
        for (c, row) in cond.iter().zip(g_proj.chunks_exact_mut(sh.cond_dim)) {
            for (r, gp) in row.iter_mut().zip(&g_proj_b) {
                *r = c * gp;
            }
        }

        let mut out = Vec::with_capacity(sh.n_trainable());
        out.extend(g_proj);
        out.extend(g_proj_b);
        out.extend(g_w1);
        out.extend(g_b1);
        out.extend(g_w2);
        out.push(g_b2);
        out
    }

    pub fn to_param_file(&self) -> ParamFile {
        let sh = &self.shape;
        let mut f = ParamFile::new(Self::KIND)
            .with("grid", sh.grid)
            .with("sub", sh.sub)
            .with("filters", sh.filters)
            .with("cond_dim", sh.cond_dim)
            .with("hidden", sh.hidden)
            .with("embed_dim", sh.embed_dim)
            .with("seed", self.seed);
        f.data = self.filter_bank.iter().chain(&self.trainable).copied().collect();
        f
    }

    pub fn from_param_file(f: &ParamFile) -> Result<Self> {
        f.expect_kind(Self::KIND)?;
        let shape = DecoderShape {
            grid: f.get_parsed("grid")?,
            sub: f.get_parsed("sub")?,
            filters: f.get_parsed("filters")?,
            cond_dim: f.get_parsed("cond_dim")?,
            hidden: f.get_parsed("hidden")?,
            embed_dim: f.get_parsed("embed_dim")?,
        };
        let parts = split_exact(&f.data, &[shape.filters * shape.patch_len(), shape.n_trainable()])?;
        Ok(Self {
            shape,
            seed: f.get_parsed("seed")?,
            filter_bank: parts[0].to_vec(),
            trainable: parts[1].to_vec(),
        })
    }
}

/// Logit map for `img` conditioned on `cond`.
pub fn decoder_forward(img: &ImageBuffer, cond: &Embedding, params: &DecoderParams) -> Result<LogitMap> {
    let feats = params.image_features(img);
    Ok(params.forward_features(&feats, cond.as_slice())?.0)
}

/// Sigmoid of [`decoder_forward`].
pub fn predict_mask(img: &ImageBuffer, z_a: &Embedding, params: &DecoderParams) -> Result<ProbabilityMask> {
    Ok(ProbabilityMask::from_logits(&decoder_forward(img, z_a, params)?))
}
