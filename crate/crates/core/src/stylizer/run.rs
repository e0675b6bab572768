//! Loss weighting, configuration and the stylization loop.

use std::io::Write;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::{content_loss, foreground_reg_loss, FeatureExtractor};
use super::patchclip::patchclip_loss;
use super::patches::{draw_plans, PatchPlan};
use crate::embedding::{Embedding, ImageEncoder};
use crate::error::{Error, Result};
use crate::inr::{
    composite, composite_backward, foreground, fourier_features, make_fourier_basis, siren_init, CoordGrid,
    FourierBasis, SirenConfig, SirenGrads, SirenParams,
};
use crate::localizer::ProbabilityMask;
use crate::optim::Adam;
use crate::signal_io::{resize_image, ImageBuffer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_clip: f64,
    pub lambda_reg: f64,
    pub lambda_c: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_clip: 35.0,
            lambda_reg: 0.2,
            lambda_c: 2.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_clip", self.lambda_clip),
            ("lambda_reg", self.lambda_reg),
            ("lambda_c", self.lambda_c),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossComponents {
    pub l_clip: f64,
    pub l_reg: f64,
    pub l_c: f64,
}

/// `λ_clip·L_clip + λ_reg·L_reg + λ_c·L_c`.
pub fn total_loss(c: &LossComponents, w: &LossWeights) -> f64 {
    w.lambda_clip * c.l_clip + w.lambda_reg * c.l_reg + w.lambda_c * c.l_c
}

/// Shape of the implicit representation being optimized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InrConfig {
    /// Number of Fourier frequencies `m`; the SIREN input is `2m` wide.
    pub fourier_m: usize,
    pub fourier_sigma: f64,
    pub layers: usize,
    pub width: usize,
    pub omega0: f64,
}

impl Default for InrConfig {
    fn default() -> Self {
        Self {
            fourier_m: 256,
            fourier_sigma: 1.0,
            layers: 8,
            width: 256,
            omega0: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StyleConfig {
    /// Patches per iteration.
    pub k: usize,
    /// Inclusive range of patch side lengths before resizing.
    pub size_range: (usize, usize),
    pub ohem_fraction: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub center_threshold: f64,
    pub augment: bool,
    pub seed: u64,
    pub inr: InrConfig,
}

impl Default for StyleConfig {
    fn default() -> Self {
        Self {
            k: 64,
            size_range: (64, 256),
            ohem_fraction: 0.5,
            iterations: 200,
            learning_rate: 1e-4,
            center_threshold: 0.5,
            augment: true,
            seed: 0,
            inr: InrConfig::default(),
        }
    }
}

impl StyleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.size_range.0 == 0 || self.size_range.0 > self.size_range.1 {
            return bad(format!("empty patch size range {:?}", self.size_range));
        }
        if !(self.ohem_fraction > 0.0 && self.ohem_fraction <= 1.0) {
            return bad(format!("ohem_fraction {} outside (0, 1]", self.ohem_fraction));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("invalid learning rate {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.center_threshold) {
            return bad(format!("center_threshold {} outside [0, 1)", self.center_threshold));
        }
        let inr = &self.inr;
        if inr.fourier_m == 0 || inr.layers == 0 || inr.width == 0 {
            return bad("INR sizes must be positive".into());
        }
        if !(inr.fourier_sigma > 0.0 && inr.omega0 > 0.0) {
            return bad("fourier_sigma and omega0 must be positive".into());
        }
        Ok(())
    }

    fn siren_config(&self) -> SirenConfig {
        SirenConfig {
            in_dim: 2 * self.inr.fourier_m,
            n_layers: self.inr.layers,
            width: self.inr.width,
            out_dim: 3,
            omega0: self.inr.omega0,
            seed: self.seed.wrapping_add(1),
        }
    }
}

/// The optimized representation: a coordinate basis and a SIREN.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleModel {
    pub basis: FourierBasis,
    pub siren: SirenParams,
}

impl StyleModel {
    /// Fresh basis and SIREN derived from `cfg.seed`.
    pub fn init(cfg: &StyleConfig) -> Result<Self> {
        Ok(Self {
            basis: make_fourier_basis(cfg.inr.fourier_m, cfg.inr.fourier_sigma, cfg.seed)?,
            siren: siren_init(&cfg.siren_config())?,
        })
    }

    /// Raw RGB output on an `h × w` grid, one row per pixel.
    pub fn raw(&self, height: usize, width: usize) -> Result<Array2<f64>> {
        self.siren.forward(&fourier_features(&CoordGrid::new(height, width), &self.basis))
    }

    /// Composites the representation into `source` at any resolution; the
    /// source and mask are bilinearly resampled to `height × width` first.
    pub fn render(
        &self,
        source: &ImageBuffer,
        mask: &ProbabilityMask,
        height: usize,
        width: usize,
    ) -> Result<ImageBuffer> {
        let (src, m) = if source.shape() == (height, width) && mask.shape() == (height, width) {
            (source.clone(), mask.clone())
        } else {
            (resize_image(source, height, width)?, mask.resize(height, width))
        };
        if m.values().iter().all(|&v| v == 0.0) {
            return Ok(src);
        }
        composite(&src, &m, &self.raw(height, width)?)
    }
}

/// Losses and cosine recorded at one iteration, before the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub components: LossComponents,
    pub total: f64,
    /// Mean `cos(v_k − src, a)` over all sampled patches, if any.
    pub mean_cosine: Option<f64>,
}

/// Writes the trace as CSV with columns `iter,l_clip,l_reg,l_c,total`.
pub fn write_loss_csv(trace: &[IterationRecord], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "iter,l_clip,l_reg,l_c,total")?;
    for r in trace {
        let c = &r.components;
        writeln!(out, "{},{},{},{},{}", r.iter, c.l_clip, c.l_reg, c.l_c, r.total)?;
    }
    Ok(())
}

/// Everything one loss evaluation produces.
pub struct Evaluation {
    pub components: LossComponents,
    pub total: f64,
    pub mean_cosine: Option<f64>,
    pub output: ImageBuffer,
    pub grads: SirenGrads,
}

/// A fixed stylization objective: source, mask, target direction, encoder
/// and extractor. Evaluates the total loss and its SIREN gradient for given
/// parameters and patch plans.
pub struct StyleProblem<'a> {
    source: &'a ImageBuffer,
    mask: &'a ProbabilityMask,
    features: Array2<f64>,
    src_embed: Embedding,
    target: &'a Embedding,
    encoder: &'a dyn ImageEncoder,
    extractor: &'a dyn FeatureExtractor,
    weights: LossWeights,
    ohem_fraction: f64,
}

impl<'a> StyleProblem<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        source: &'a ImageBuffer,
        mask: &'a ProbabilityMask,
        basis: &FourierBasis,
        target: &'a Embedding,
        encoder: &'a dyn ImageEncoder,
        extractor: &'a dyn FeatureExtractor,
        weights: LossWeights,
        ohem_fraction: f64,
    ) -> Result<Self> {
        if mask.shape() != source.shape() {
            return Err(Error::shape(format!("mask {:?}", source.shape()), format!("{:?}", mask.shape())));
        }
        if target.dim() != encoder.dim() {
            return Err(Error::shape(encoder.dim(), target.dim()));
        }
        weights.validate()?;
        let (h, w) = source.shape();
        Ok(Self {
            source,
            mask,
            features: fourier_features(&CoordGrid::new(h, w), basis),
            src_embed: encoder.encode(source),
            target,
            encoder,
            extractor,
            weights,
            ohem_fraction,
        })
    }

    pub fn evaluate(&self, siren: &SirenParams, plans: &[PatchPlan]) -> Result<Evaluation> {
        let (h, w) = self.source.shape();
        let (raw, tape) = siren.forward_tape(&self.features)?;
        let output = composite(self.source, self.mask, &raw)?;
        let mut grad = vec![0.0; output.pixels().len()];

        let mut components = LossComponents::default();
        let mut mean_cosine = None;
        if !plans.is_empty() {
            let fg = ImageBuffer::from_clamped(h, w, foreground(self.mask, &raw));
            let patches: Vec<ImageBuffer> = plans.iter().map(|p| p.extract(&fg)).collect();
            let clip = patchclip_loss(&patches, &self.src_embed, self.target, self.ohem_fraction, self.encoder)?;
            components.l_clip = clip.loss;
            mean_cosine = Some(clip.mean_cosine());
            for &k in &clip.kept {
                let back = plans[k].pull_back(&clip.grad_patches[k]);
                for (g, b) in grad.iter_mut().zip(&back) {
                    *g += self.weights.lambda_clip * b;
                }
            }
        }
        let (l_reg, g_reg) = foreground_reg_loss(&output, self.source, self.extractor)?;
        let (l_c, g_c) = content_loss(&output, self.source, self.extractor)?;
        components.l_reg = l_reg;
        components.l_c = l_c;
        for ((g, r), c) in grad.iter_mut().zip(&g_reg).zip(&g_c) {
            *g += self.weights.lambda_reg * r + self.weights.lambda_c * c;
        }
        let grad_raw = composite_backward(self.mask, &raw, &grad);
        Ok(Evaluation {
            total: total_loss(&components, &self.weights),
            components,
            mean_cosine,
            output,
            grads: siren.backward(&tape, &grad_raw),
        })
    }
}

#[derive(Debug, Clone)]
pub struct StyleResult {
    pub image: ImageBuffer,
    pub trace: Vec<IterationRecord>,
    pub model: StyleModel,
}

/// Optimizes a fresh representation so that patches of the masked region
/// move along `audio_embed` while keeping the source's texture statistics
/// and content. Pixels with mask 0 are copied from `source` unchanged.
/// When no mask value exceeds the center threshold the patch loss is
/// skipped and only the regularizers act.
pub fn stylize(
    source: &ImageBuffer,
    mask: &ProbabilityMask,
    audio_embed: &Embedding,
    cfg: &StyleConfig,
    weights: &LossWeights,
    encoder: &dyn ImageEncoder,
    extractor: &dyn FeatureExtractor,
) -> Result<StyleResult> {
    cfg.validate()?;
    weights.validate()?;
    let mut model = StyleModel::init(cfg)?;
    let (h, w) = source.shape();
    if mask.shape() != (h, w) {
        return Err(Error::shape(format!("mask {h}x{w}"), format!("{:?}", mask.shape())));
    }

    if mask.values().iter().all(|&m| m == 0.0) {
        let record = |iter| IterationRecord {
            iter,
            components: LossComponents::default(),
            total: 0.0,
            mean_cosine: None,
        };
        return Ok(StyleResult {
            image: source.clone(),
            trace: (0..cfg.iterations).map(record).collect(),
            model,
        });
    }

    let problem = StyleProblem::new(
        source,
        mask,
        &model.basis,
        audio_embed,
        encoder,
        extractor,
        *weights,
        cfg.ohem_fraction,
    )?;
    let has_centers = mask.values().iter().any(|&m| m > cfg.center_threshold);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let mut adam = Adam::new(cfg.learning_rate, &model.siren.param_sizes());
    let mut trace = Vec::with_capacity(cfg.iterations);
    for iter in 0..cfg.iterations {
        let plans = if has_centers {
            draw_plans(mask, cfg.k, cfg.center_threshold, cfg.size_range, cfg.augment, &mut rng)?
        } else {
            Vec::new()
        };
        let eval = problem.evaluate(&model.siren, &plans)?;
        trace.push(IterationRecord {
            iter,
            components: eval.components,
            total: eval.total,
            mean_cosine: eval.mean_cosine,
        });
        let grads: Vec<&[f64]> = eval
            .grads
            .iter()
            .flat_map(|d| {
                [
                    d.w.as_slice().expect("standard layout"),
                    d.b.as_slice().expect("standard layout"),
                ]
            })
            .collect();
        adam.step(&mut model.siren.param_slices_mut(), &grads);
    }
    let image = model.render(source, mask, h, w)?;
    Ok(StyleResult { image, trace, model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::ReferenceImageEncoder;
    use crate::stylizer::ReferenceExtractor;

    fn small_cfg(iterations: usize) -> StyleConfig {
        StyleConfig {
            k: 4,
            size_range: (6, 12),
            iterations,
            learning_rate: 1e-3,
            inr: InrConfig {
                fourier_m: 8,
                layers: 2,
                width: 8,
                ..InrConfig::default()
            },
            ..StyleConfig::default()
        }
    }

    fn scene() -> (ImageBuffer, ProbabilityMask, Embedding) {
        let px = (0..16 * 16 * 3).map(|i| ((i * 31) % 97) as f64 / 96.0).collect();
        let src = ImageBuffer::new(16, 16, px).unwrap();
        let mask = ProbabilityMask::new(16, 16, (0..256).map(|i| if (i / 16) % 16 > 7 { 1.0 } else { 0.0 }).collect())
            .unwrap();
        let target = Embedding::normalize((0..16).map(|i| (i as f64 * 0.7).cos()).collect()).unwrap();
        (src, mask, target)
    }

    #[test]
    fn total_loss_examples() {
        let w = LossWeights::default();
        assert_eq!(total_loss(&LossComponents::default(), &w), 0.0);
        let one = |a, b, c| LossComponents { l_clip: a, l_reg: b, l_c: c };
        assert_eq!(total_loss(&one(1.0, 0.0, 0.0), &w), 35.0);
        assert!((total_loss(&one(1.0, 1.0, 1.0), &w) - 37.2).abs() < 1e-12);
    }

    #[test]
    fn zero_iterations_return_fresh_composite() {
        let (src, mask, target) = scene();
        let enc = ReferenceImageEncoder::with_dim(0, 16);
        let cfg = small_cfg(0);
        let out = stylize(&src, &mask, &target, &cfg, &LossWeights::default(), &enc, &ReferenceExtractor::new(0)).unwrap();
        assert!(out.trace.is_empty());
        let fresh = StyleModel::init(&cfg).unwrap();
        let expected = composite(&src, &mask, &fresh.raw(16, 16).unwrap()).unwrap();
        assert_eq!(out.image, expected);
    }

    #[test]
    fn background_is_exact_and_runs_repeat() {
        let (src, mask, target) = scene();
        let enc = ReferenceImageEncoder::with_dim(0, 16);
        let ex = ReferenceExtractor::new(0);
        let cfg = small_cfg(5);
        let a = stylize(&src, &mask, &target, &cfg, &LossWeights::default(), &enc, &ex).unwrap();
        let b = stylize(&src, &mask, &target, &cfg, &LossWeights::default(), &enc, &ex).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.trace.len(), 5);
        for (i, &m) in mask.values().iter().enumerate() {
            if m == 0.0 {
                assert_eq!(a.image.pixels()[3 * i..3 * i + 3], src.pixels()[3 * i..3 * i + 3]);
            }
        }
    }

    #[test]
    fn empty_mask_copies_source() {
        let (src, _, target) = scene();
        let mask = ProbabilityMask::filled(16, 16, 0.0).unwrap();
        let enc = ReferenceImageEncoder::with_dim(0, 16);
        let out = stylize(&src, &mask, &target, &small_cfg(3), &LossWeights::default(), &enc, &ReferenceExtractor::new(0))
            .unwrap();
        assert_eq!(out.image, src);
    }

    #[test]
    fn csv_header_and_rows() {
        let rec = IterationRecord {
            iter: 0,
            components: LossComponents { l_clip: 0.5, l_reg: 0.25, l_c: 0.125 },
            total: 18.0,
            mean_cosine: None,
        };
        let mut buf = Vec::new();
        write_loss_csv(&[rec], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iter,l_clip,l_reg,l_c,total\n0,0.5,0.25,0.125,18\n");
    }

    #[test]
    fn render_at_other_resolution() {
        let (src, mask, _) = scene();
        let model = StyleModel::init(&small_cfg(0)).unwrap();
        let big = model.render(&src, &mask, 32, 24).unwrap();
        assert_eq!(big.shape(), (32, 24));
    }
}
