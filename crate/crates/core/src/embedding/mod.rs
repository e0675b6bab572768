//! The shared embedding space: unit vectors, cosine similarity,
//! modality interpolation, the InfoNCE objective, reference encoders and
//! audio-encoder pretraining.

mod backend;
mod info_nce;
mod pretrain;

pub use backend::{
    AudioEncoder, AudioHead, BackendParams, ImageEncoder, ReferenceAudioEncoder,
    ReferenceImageEncoder, IMAGE_GRID,
};
pub use info_nce::{info_nce_loss, InfoNceOutput};
pub use pretrain::{
    augment_image, pretrain_audio_encoder, ContrastiveConfig, PairedExample, PretrainOutcome,
};

use crate::error::{Error, Result};

/// Default dimensionality of the shared space.
pub const EMBED_DIM: usize = 512;

/// A unit-norm vector in the shared space.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn normalize(v: Vec<f64>) -> Result<Self> {
        let n = norm(&v);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        // Already-unit input is returned untouched so normalization is idempotent.
        if (n - 1.0).abs() <= f64::EPSILON {
            return Ok(Self(v));
        }
        Ok(Self(v.into_iter().map(|x| x / n).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Renormalized `alpha · z_a + (1 − alpha) · z_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedEmbedding {
    pub embedding: Embedding,
    pub alpha: f64,
}

impl AsRef<[f64]> for InterpolatedEmbedding {
    fn as_ref(&self) -> &[f64] {
        self.embedding.as_slice()
    }
}

pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> f64 {
    cosine(a.as_slice(), b.as_slice()).clamp(-1.0, 1.0)
}

pub fn interpolate_embeddings(
    z_a: &Embedding,
    z_v: &Embedding,
    alpha: f64,
) -> Result<InterpolatedEmbedding> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    if z_a.dim() != z_v.dim() {
        return Err(Error::shape(z_a.dim(), z_v.dim()));
    }
    let embedding = if alpha == 0.0 {
        z_v.clone()
    } else if alpha == 1.0 {
        z_a.clone()
    } else {
        Embedding::normalize(mix(z_a.as_slice(), z_v.as_slice(), alpha))?
    };
    Ok(InterpolatedEmbedding { embedding, alpha })
}

pub(crate) fn mix(a: &[f64], b: &[f64], alpha: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| alpha * x + (1.0 - alpha) * y)
        .collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine of two raw vectors; 0 if either is zero.
pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d = norm(a) * norm(b);
    if d == 0.0 {
        0.0
    } else {
        dot(a, b) / d
    }
}

/// Gradients of `cos(a, b)` with respect to `a` and `b`.
pub(crate) fn cosine_grad(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return (vec![0.0; a.len()], vec![0.0; b.len()]);
    }
    let c = dot(a, b) / (na * nb);
    let ga = a
        .iter()
        .zip(b)
        .map(|(x, y)| y / (na * nb) - c * x / (na * na))
        .collect();
    let gb = a
        .iter()
        .zip(b)
        .map(|(x, y)| x / (na * nb) - c * y / (nb * nb))
        .collect();
    (ga, gb)
}

/// Back-propagates a gradient on `v / |v|` to `v`.
pub(crate) fn normalize_backward(v: &[f64], grad_unit: &[f64]) -> Vec<f64> {
    let n = norm(v);
    let u: Vec<f64> = v.iter().map(|x| x / n).collect();
    let gu = dot(grad_unit, &u);
    grad_unit
        .iter()
        .zip(&u)
        .map(|(g, ui)| (g - gu * ui) / n)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(i: usize, d: usize) -> Embedding {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Embedding::normalize(v).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let mut v = vec![0.0; 512];
        v[0] = 3.0;
        v[1] = 4.0;
        let e = Embedding::normalize(v).unwrap();
        assert!((e.as_slice()[0] - 0.6).abs() < 1e-15);
        assert!((e.as_slice()[1] - 0.8).abs() < 1e-15);
        assert_eq!(Embedding::normalize(e.as_slice().to_vec()).unwrap(), e);

        let mut neg = vec![0.0; 512];
        neg[0] = -2.0;
        assert_eq!(Embedding::normalize(neg).unwrap().as_slice()[0], -1.0);
        assert!(matches!(
            Embedding::normalize(vec![0.0; 4]),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn cosine_examples() {
        let a = Embedding::normalize(vec![0.3, -0.2, 0.9]).unwrap();
        let neg = Embedding::normalize(a.as_slice().iter().map(|x| -x).collect()).unwrap();
        assert!((cosine_similarity(&a, &a) - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&basis(0, 3), &basis(1, 3)), 0.0);
        assert!((cosine_similarity(&a, &neg) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let (e1, e2) = (basis(0, 512), basis(1, 512));
        assert_eq!(interpolate_embeddings(&e1, &e2, 0.0).unwrap().embedding, e2);
        assert_eq!(interpolate_embeddings(&e1, &e2, 1.0).unwrap().embedding, e1);
        let mid = interpolate_embeddings(&e1, &e2, 0.5).unwrap().embedding;
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((mid.as_slice()[0] - r).abs() < 1e-15);
        assert!((mid.as_slice()[1] - r).abs() < 1e-15);
        assert!(mid.as_slice()[2..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn antipodal_midpoint_fails() {
        let a = basis(0, 4);
        let b = Embedding::normalize(vec![-1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(interpolate_embeddings(&a, &b, 0.5).is_err());
        assert!(interpolate_embeddings(&a, &b, 1.5).is_err());
    }

    #[test]
    fn interpolation_is_unit_norm() {
        let a = Embedding::normalize(vec![0.2, 0.5, -0.1, 0.7]).unwrap();
        let b = Embedding::normalize(vec![-0.4, 0.1, 0.8, 0.2]).unwrap();
        for k in 0..=20 {
            let z = interpolate_embeddings(&a, &b, k as f64 / 20.0).unwrap();
            assert!((norm(z.embedding.as_slice()) - 1.0).abs() < 1e-6);
        }
    }
}
