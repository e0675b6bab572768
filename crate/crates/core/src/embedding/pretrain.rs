use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::seq::SliceRandom;

use super::{info_nce_loss, mix, normalize_backward, AudioHead, ImageEncoder, ReferenceAudioEncoder};
use crate::error::{Error, Result};
use crate::optim::Adam;
use crate::signal_io::resample::AxisMap;
use crate::signal_io::{spec_augment, AugmentSpec, ImageBuffer, MelSpectrogram};

/// One audio clip and the frame it was recorded with.
#[derive(Debug, Clone)]
pub struct PairedExample {
    pub mel: MelSpectrogram,
    pub image: ImageBuffer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveConfig {
    pub temperature: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub freq_mask_ratio: f64,
    pub time_mask_ratio: f64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        Self {
            temperature: 0.07,
            batch_size: 8,
            epochs: 200,
            learning_rate: 1e-2,
            seed: 7,
            freq_mask_ratio: 0.15,
            time_mask_ratio: 0.15,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub head: AudioHead,
    /// Mean InfoNCE loss of each epoch, in order.
    pub epoch_losses: Vec<f64>,
}

/// Random crop keeping 90% of the area, resized back, plus a random
/// horizontal flip.
pub fn augment_image(img: &ImageBuffer, rng: &mut impl Rng) -> ImageBuffer {
    let side = 0.9f64.sqrt();
    let (h, w) = img.shape();
    let ch = ((h as f64 * side).round() as usize).clamp(1, h);
    let cw = ((w as f64 * side).round() as usize).clamp(1, w);
    let y0 = rng.random_range(0..=h - ch);
    let x0 = rng.random_range(0..=w - cw);
    let rows = AxisMap::bilinear(ch, h).after(&AxisMap::crop(h, y0, ch));
    let mut cols = AxisMap::bilinear(cw, w).after(&AxisMap::crop(w, x0, cw));
    if rng.random_bool(0.5) {
        cols = AxisMap::flip(w).after(&cols);
    }
    img.map_axes(&rows, &cols)
}

/// Trains the audio head so interpolated audio/visual embeddings of the
/// same clip agree with their augmented counterparts under InfoNCE.
///
/// Every epoch shuffles the dataset and visits it in full batches of
/// `cfg.batch_size`; a trailing partial batch is dropped.
pub fn pretrain_audio_encoder(
    dataset: &[PairedExample],
    audio: &ReferenceAudioEncoder,
    image: &dyn ImageEncoder,
    cfg: &ContrastiveConfig,
) -> Result<PretrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.batch_size == 0 || dataset.len() < cfg.batch_size {
        return Err(Error::InvalidArgument(format!(
            "batch size {} needs at least that many pairs, dataset has {}",
            cfg.batch_size,
            dataset.len()
        )));
    }
    if image.dim() != audio.head.out_dim {
        return Err(Error::shape(audio.head.out_dim, image.dim()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut head = audio.head.clone();
    let mut opt = Adam::new(cfg.learning_rate, &[head.weight.len(), head.bias.len()]);

    let clean_features: Vec<Vec<f64>> = dataset
        .iter()
        .map(|ex| audio.features(&ex.mel))
        .collect::<Result<_>>()?;
    let clean_visual: Vec<Vec<f64>> = dataset
        .iter()
        .map(|ex| image.encode(&ex.image).into_vec())
        .collect();

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut batch_losses = Vec::new();
        for batch in order.chunks_exact(cfg.batch_size) {
            let mut anchors = Vec::with_capacity(batch.len());
            let mut positives = Vec::with_capacity(batch.len());
            let mut cache = Vec::with_capacity(batch.len());
            for &i in batch {
                let alpha: f64 = rng.random();
                let spec = AugmentSpec {
                    freq_mask_ratio: cfg.freq_mask_ratio,
                    time_mask_ratio: cfg.time_mask_ratio,
                    seed: rng.random(),
                };
                let aug_features = audio.features(&spec_augment(&dataset[i].mel, &spec)?)?;
                let aug_visual = image.encode(&augment_image(&dataset[i].image, &mut rng));

                let y = head.forward(&clean_features[i]);
                let y_aug = head.forward(&aug_features);
                let z_a = unit(&y);
                let z_a_aug = unit(&y_aug);
                anchors.push(mix(&z_a, &clean_visual[i], alpha));
                positives.push(mix(&z_a_aug, aug_visual.as_slice(), alpha));
                cache.push((alpha, y, y_aug, aug_features));
            }

            let out = info_nce_loss(&anchors, &positives, cfg.temperature)?;
            batch_losses.push(out.loss);

            let mut gw = vec![0.0; head.weight.len()];
            let mut gb = vec![0.0; head.bias.len()];
            for (j, &i) in batch.iter().enumerate() {
                let (alpha, y, y_aug, aug_features) = &cache[j];
                let g_za: Vec<f64> = out.grad_anchors[j].iter().map(|g| alpha * g).collect();
                let g_za_aug: Vec<f64> = out.grad_positives[j].iter().map(|g| alpha * g).collect();
                head.accumulate_grad(&clean_features[i], &normalize_backward(y, &g_za), &mut gw, &mut gb);
                head.accumulate_grad(aug_features, &normalize_backward(y_aug, &g_za_aug), &mut gw, &mut gb);
            }
            opt.step(&mut [&mut head.weight, &mut head.bias], &[&gw, &gb]);
        }
        epoch_losses.push(batch_losses.iter().sum::<f64>() / batch_losses.len() as f64);
    }

    Ok(PretrainOutcome { head, epoch_losses })
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = super::norm(v);
    v.iter().map(|x| x / n).collect()
}
