use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::decoder::{DecoderParams, DecoderShape};
use super::masks::{bce_loss, BinaryMask, ProbabilityMask};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::optim::Adam;
use crate::signal_io::ImageBuffer;

/// One weakly-labelled training triple.
#[derive(Debug, Clone)]
pub struct LocalizerExample {
    pub image: ImageBuffer,
    pub cond: Embedding,
    pub target: BinaryMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizerTrainConfig {
    /// Pseudo-mask threshold used when labels are derived from logits.
    pub threshold: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LocalizerTrainConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            epochs: 300,
            learning_rate: 1e-2,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedLocalizer {
    pub params: DecoderParams,
    pub epoch_losses: Vec<f64>,
}

/// Minimizes the mean BCE between predicted and target masks with Adam.
/// The decoder starts from `DecoderParams::seeded(shape, cfg.seed)`; each
/// epoch shuffles the data and takes one step per batch.
pub fn train_localizer(
    dataset: &[LocalizerExample],
    shape: DecoderShape,
    cfg: &LocalizerTrainConfig,
) -> Result<TrainedLocalizer> {
    train_from(dataset, DecoderParams::seeded(shape, cfg.seed), cfg)
}

pub fn train_from(
    dataset: &[LocalizerExample],
    mut params: DecoderParams,
    cfg: &LocalizerTrainConfig,
) -> Result<TrainedLocalizer> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(cfg.threshold > 0.0 && cfg.threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold {} outside (0, 1)",
            cfg.threshold
        )));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    for ex in dataset {
        if ex.image.shape() != ex.target.shape() {
            return Err(Error::shape(
                format!("{:?}", ex.image.shape()),
                format!("{:?}", ex.target.shape()),
            ));
        }
    }

    let features: Vec<_> = dataset.iter().map(|ex| params.image_features(&ex.image)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(cfg.learning_rate, &[params.trainable.len()]);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = vec![0.0; params.trainable.len()];
            for &i in batch {
                let ex = &dataset[i];
                let (logits, cache) = params.forward_features(&features[i], ex.cond.as_slice())?;
                let pred = ProbabilityMask::from_logits(&logits);
                let (loss, g_logits) = bce_loss(&pred, &ex.target)?;
                total += loss;
                let g = params.backward(&features[i], ex.cond.as_slice(), &cache, &g_logits);
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b / batch.len() as f64;
                }
            }
            opt.step(&mut [&mut params.trainable], &[&grad]);
        }
        epoch_losses.push(total / dataset.len() as f64);
    }

    Ok(TrainedLocalizer {
        params,
        epoch_losses,
    })
}
