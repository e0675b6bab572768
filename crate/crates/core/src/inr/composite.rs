use ndarray::Array2;

use crate::error::{Error, Result};
use crate::localizer::ProbabilityMask;
use crate::signal_io::ImageBuffer;

/// Per-pixel blend `M·clamp(f) + (1 − M)·source`.
///
/// `inr_rgb` holds one row per pixel in raster order. Where `M = 0` the
/// source value is copied unchanged.
pub fn composite(source: &ImageBuffer, mask: &ProbabilityMask, inr_rgb: &Array2<f64>) -> Result<ImageBuffer> {
    check_shapes(source, mask, inr_rgb)?;
    let mut out = Vec::with_capacity(source.pixels().len());
    for ((src, &m), f) in source
        .pixels()
        .chunks_exact(3)
        .zip(mask.values())
        .zip(inr_rgb.rows())
    {
        for c in 0..3 {
            out.push(if m == 0.0 {
                src[c]
            } else {
                m * clamp_unit(f[c]) + (1.0 - m) * src[c]
            });
        }
    }
    Ok(ImageBuffer::from_clamped(source.height(), source.width(), out))
}

/// The masked INR contribution `M·clamp(f)`, interleaved like an image.
pub fn foreground(mask: &ProbabilityMask, inr_rgb: &Array2<f64>) -> Vec<f64> {
    mask.values()
        .iter()
        .zip(inr_rgb.rows())
        .flat_map(|(&m, f)| [m * clamp_unit(f[0]), m * clamp_unit(f[1]), m * clamp_unit(f[2])])
        .collect()
}

/// Pulls `∂L/∂output` (interleaved) back to the raw INR output: the mask
/// weight times the clamp subgradient (1 on `[0, 1]`, 0 outside).
pub fn composite_backward(mask: &ProbabilityMask, inr_rgb: &Array2<f64>, grad: &[f64]) -> Array2<f64> {
    let mut out = Array2::zeros(inr_rgb.raw_dim());
    for (((mut row, f), &m), g) in out
        .rows_mut()
        .into_iter()
        .zip(inr_rgb.rows())
        .zip(mask.values())
        .zip(grad.chunks_exact(3))
    {
        for c in 0..3 {
            if (0.0..=1.0).contains(&f[c]) {
                row[c] = m * g[c];
            }
        }
    }
    out
}

fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

fn check_shapes(source: &ImageBuffer, mask: &ProbabilityMask, inr_rgb: &Array2<f64>) -> Result<()> {
    let n = source.height() * source.width();
    if mask.shape() != source.shape() {
        return Err(Error::shape(
            format!("mask {:?}", source.shape()),
            format!("{:?}", mask.shape()),
        ));
    }
    if inr_rgb.nrows() != n || inr_rgb.ncols() != 3 {
        return Err(Error::shape(format!("{n}x3"), format!("{:?}", inr_rgb.shape())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src() -> ImageBuffer {
        ImageBuffer::from_clamped(2, 2, (0..12).map(|i| i as f64 / 11.0).collect())
    }

    #[test]
    fn zero_mask_returns_source() {
        let rgb = Array2::from_elem((4, 3), 0.7);
        let m = ProbabilityMask::filled(2, 2, 0.0).unwrap();
        assert_eq!(composite(&src(), &m, &rgb).unwrap(), src());
    }

    #[test]
    fn full_mask_with_zero_inr_is_black() {
        let rgb = Array2::zeros((4, 3));
        let m = ProbabilityMask::filled(2, 2, 1.0).unwrap();
        assert!(composite(&src(), &m, &rgb).unwrap().pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn half_blend_arithmetic() {
        let s = ImageBuffer::new(1, 1, vec![0.2, 0.4, 0.6]).unwrap();
        let rgb = Array2::from_shape_vec((1, 3), vec![1.0, 0.0, 0.0]).unwrap();
        let m = ProbabilityMask::filled(1, 1, 0.5).unwrap();
        let out = composite(&s, &m, &rgb).unwrap();
        for (a, b) in out.pixels().iter().zip([0.6, 0.2, 0.3]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn clamp_subgradient() {
        let rgb = Array2::from_shape_vec((1, 3), vec![-0.5, 0.5, 1.5]).unwrap();
        let m = ProbabilityMask::filled(1, 1, 0.25).unwrap();
        let g = composite_backward(&m, &rgb, &[1.0, 1.0, 1.0]);
        assert_eq!(g.row(0).to_vec(), vec![0.0, 0.25, 0.0]);
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let m = ProbabilityMask::filled(3, 2, 0.5).unwrap();
        assert!(composite(&src(), &m, &Array2::zeros((4, 3))).is_err());
        let m = ProbabilityMask::filled(2, 2, 0.5).unwrap();
        assert!(composite(&src(), &m, &Array2::zeros((5, 3))).is_err());
    }
}
