use std::path::Path;

use crate::error::{Error, Result};
use crate::signal_io::resample::{self, AxisMap};
use crate::signal_io::{load_gray_png, quantize, save_gray_png};

/// A real-valued per-pixel map, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl LogitMap {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::shape(height * width, values.len()));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }
}

/// Per-pixel sound-source probabilities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMask {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ProbabilityMask {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(Error::shape(height * width, values.len()));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("mask value {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn filled(height: usize, width: usize, p: f64) -> Result<Self> {
        Self::new(height, width, vec![p; height * width])
    }

    pub fn from_logits(logits: &LogitMap) -> Self {
        Self {
            height: logits.height,
            width: logits.width,
            values: logits.values.iter().map(|&x| sigmoid(x)).collect(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// `1` where the probability is strictly above `threshold`.
    pub fn binarize(&self, threshold: f64) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&p| p > threshold).collect(),
        }
    }

    /// Bilinear resampling to another raster.
    pub fn resize(&self, height: usize, width: usize) -> ProbabilityMask {
        let out = resample::apply(
            &self.values,
            1,
            &AxisMap::bilinear(self.height, height),
            &AxisMap::bilinear(self.width, width),
        );
        Self {
            height,
            width,
            values: out.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    /// 8-bit grayscale PNG, value `round(255 p)`.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes: Vec<u8> = self.values.iter().map(|&p| quantize(p)).collect();
        save_gray_png(path, self.height, self.width, &bytes)
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let (h, w, bytes) = load_gray_png(path)?;
        Self::new(h, w, bytes.iter().map(|&b| f64::from(b) / 255.0).collect())
    }
}

/// A `{0, 1}` mask, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    values: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, values: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(Error::shape(height * width, values.len()));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let values = (0..height)
            .flat_map(|y| (0..width).map(move |x| (y, x)))
            .map(|(y, x)| f(y, x))
            .collect();
        Self {
            height,
            width,
            values,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }

    pub fn to_probability(&self) -> ProbabilityMask {
        ProbabilityMask {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_probability().save_png(path)
    }

    /// Reads a grayscale PNG; bytes ≥ 128 are foreground.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let (h, w, bytes) = load_gray_png(path)?;
        Self::new(h, w, bytes.iter().map(|&b| b >= 128).collect())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Pseudo ground truth: `1` iff `sigmoid(logit) > threshold`, strictly.
pub fn pseudo_mask(logits: &LogitMap, threshold: f64) -> Result<BinaryMask> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} outside (0, 1)"
        )));
    }
    BinaryMask::new(
        logits.height,
        logits.width,
        logits.values.iter().map(|&x| sigmoid(x) > threshold).collect(),
    )
}

/// Clipping applied to predictions before taking logs.
pub const BCE_EPS: f64 = 1e-7;

/// Pixel-wise binary cross entropy and its gradient with respect to the
/// logits that produced `pred`.
///
/// The loss uses predictions clipped to `[ε, 1 − ε]`; the gradient is the
/// unclipped `(p − t) / (W H)` so saturated wrong predictions still move.
pub fn bce_loss(pred: &ProbabilityMask, target: &BinaryMask) -> Result<(f64, Vec<f64>)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            format!("{:?}", target.shape()),
            format!("{:?}", pred.shape()),
        ));
    }
    let n = pred.values.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .values
        .iter()
        .zip(&target.values)
        .map(|(&p, &t)| {
            let pc = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            let t = if t { 1.0 } else { 0.0 };
            loss -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
            (p - t) / n
        })
        .collect();
    Ok((loss / n, grad))
}
