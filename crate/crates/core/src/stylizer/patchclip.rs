//! Directional patch loss with online hard example mining.

use crate::embedding::{cosine, cosine_grad, norm, Embedding, ImageEncoder};
use crate::error::{Error, Result};
use crate::signal_io::ImageBuffer;

/// Directions shorter than this count as zero: cosine 0, no gradient.
pub const MIN_DIRECTION_NORM: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PatchClipOutput {
    pub loss: f64,
    /// `cos(v_k − src, a)` for every patch.
    pub cosines: Vec<f64>,
    /// Indices of the kept (hardest) patches, hardest first.
    pub kept: Vec<usize>,
    /// Gradient w.r.t. each patch's pixels (zero for dropped patches).
    pub grad_patches: Vec<Vec<f64>>,
}

impl PatchClipOutput {
    pub fn mean_cosine(&self) -> f64 {
        self.cosines.iter().sum::<f64>() / self.cosines.len() as f64
    }
}

/// Number of patches kept out of `k` at fraction `q`.
pub fn ohem_count(k: usize, q: f64) -> usize {
    ((q * k as f64).ceil() as usize).clamp(1, k)
}

/// Indices of the `n` largest distances, ties broken by index.
pub fn hardest(distances: &[f64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[b].total_cmp(&distances[a]).then(a.cmp(&b)));
    order.truncate(n);
    order
}

/// Mean of `1 − cos(v_k − src, a)` over the hardest `⌈qK⌉` patches.
pub fn patchclip_loss(
    patches: &[ImageBuffer],
    src_embed: &Embedding,
    audio_embed: &Embedding,
    q: f64,
    encoder: &dyn ImageEncoder,
) -> Result<PatchClipOutput> {
    if patches.is_empty() {
        return Err(Error::InvalidArgument("patch loss needs at least one patch".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidArgument(format!("OHEM fraction {q} outside (0, 1]")));
    }
    let d = encoder.dim();
    if src_embed.dim() != d || audio_embed.dim() != d {
        return Err(Error::shape(d, src_embed.dim().max(audio_embed.dim())));
    }
    let a = audio_embed.as_slice();
    let deltas: Vec<Vec<f64>> = patches
        .iter()
        .map(|p| {
            let v = encoder.encode(p);
            v.as_slice().iter().zip(src_embed.as_slice()).map(|(x, s)| x - s).collect()
        })
        .collect();
    let cosines: Vec<f64> = deltas
        .iter()
        .map(|dv| if norm(dv) < MIN_DIRECTION_NORM { 0.0 } else { cosine(dv, a) })
        .collect();
    let distances: Vec<f64> = cosines.iter().map(|c| 1.0 - c).collect();
    let kept = hardest(&distances, ohem_count(patches.len(), q));
    let loss = kept.iter().map(|&k| distances[k]).sum::<f64>() / kept.len() as f64;
    let mut grad_patches: Vec<Vec<f64>> = patches.iter().map(|p| vec![0.0; p.pixels().len()]).collect();
    let scale = -1.0 / kept.len() as f64;
    for &k in &kept {
        if norm(&deltas[k]) < MIN_DIRECTION_NORM {
            continue;
        }
        let (g_dv, _) = cosine_grad(&deltas[k], a);
        let g_v: Vec<f64> = g_dv.iter().map(|g| scale * g).collect();
        grad_patches[k] = encoder.backward(&patches[k], &g_v);
    }
    Ok(PatchClipOutput {
        loss,
        cosines,
        kept,
        grad_patches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Embeds a patch as its normalized mean color; the backward pass is
    /// never exercised here.
    struct MeanColor;

    impl ImageEncoder for MeanColor {
        fn dim(&self) -> usize {
            3
        }

        fn encode(&self, img: &ImageBuffer) -> Embedding {
            let n = (img.height() * img.width()) as f64;
            let mut m = [0.0; 3];
            for px in img.pixels().chunks_exact(3) {
                for c in 0..3 {
                    m[c] += px[c] / n;
                }
            }
            Embedding::normalize(m.to_vec()).unwrap()
        }

        fn backward(&self, img: &ImageBuffer, _: &[f64]) -> Vec<f64> {
            vec![0.0; img.pixels().len()]
        }
    }

    fn e(v: [f64; 3]) -> Embedding {
        Embedding::normalize(v.to_vec()).unwrap()
    }

    #[test]
    fn parallel_and_antiparallel_directions() {
        let src = e([1.0, 0.0, 0.0]);
        let patch = ImageBuffer::filled(4, 4, [0.0, 1.0, 0.0]);
        let toward = e([-1.0, 1.0, 0.0]);
        let away = e([1.0, -1.0, 0.0]);
        let out = patchclip_loss(&[patch.clone(), patch.clone()], &src, &toward, 1.0, &MeanColor).unwrap();
        assert!(out.loss.abs() < 1e-12);
        let out = patchclip_loss(&[patch.clone(), patch], &src, &away, 1.0, &MeanColor).unwrap();
        assert!((out.loss - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ohem_keeps_the_hardest_half() {
        assert_eq!(hardest(&[0.2, 1.0], ohem_count(2, 0.5)), vec![1]);
        let d = [0.2, 1.0];
        let kept = hardest(&d, ohem_count(2, 0.5));
        let loss = kept.iter().map(|&k| d[k]).sum::<f64>() / kept.len() as f64;
        assert_eq!(loss, 1.0);
    }

    #[test]
    fn zero_direction_counts_as_distance_one() {
        let src = e([0.0, 1.0, 0.0]);
        let patch = ImageBuffer::filled(4, 4, [0.0, 0.7, 0.0]);
        let out = patchclip_loss(&[patch], &src, &e([1.0, 0.0, 0.0]), 1.0, &MeanColor).unwrap();
        assert_eq!(out.cosines, vec![0.0]);
        assert_eq!(out.loss, 1.0);
        assert!(out.grad_patches[0].iter().all(|&g| g == 0.0));
    }

    #[test]
    fn rejects_bad_fraction() {
        let patch = ImageBuffer::filled(4, 4, [0.3; 3]);
        let src = e([1.0, 0.0, 0.0]);
        assert!(patchclip_loss(std::slice::from_ref(&patch), &src, &src, 0.0, &MeanColor).is_err());
        assert!(patchclip_loss(&[patch], &src, &src, 1.5, &MeanColor).is_err());
        assert!(patchclip_loss(&[], &src, &src, 0.5, &MeanColor).is_err());
    }
}
