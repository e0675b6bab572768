//! Localization metrics: per-sample IoU, success rate at an IoU threshold
//! and the area under the success-rate curve.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::localizer::{BinaryMask, ProbabilityMask};

/// Default number of IoU thresholds for [`auc`].
pub const AUC_THRESHOLDS: usize = 101;

/// IoU of `pred` binarized at `bin_threshold` (strictly greater) against
/// `gt`; 0 when both are empty.
pub fn ciou_sample(pred: &ProbabilityMask, gt: &BinaryMask, bin_threshold: f64) -> Result<f64> {
    if pred.shape() != gt.shape() {
        return Err(Error::shape(format!("{:?}", gt.shape()), format!("{:?}", pred.shape())));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.values().iter().zip(gt.values()) {
        let p = p > bin_threshold;
        inter += usize::from(p && g);
        union += usize::from(p || g);
    }
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

/// Fraction of samples whose IoU reaches `success_threshold`.
pub fn dataset_ciou(per_sample: &[f64], success_threshold: f64) -> Result<f64> {
    if per_sample.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hits = per_sample.iter().filter(|&&v| v >= success_threshold).count();
    Ok(hits as f64 / per_sample.len() as f64)
}

/// Trapezoidal area under the success-rate curve over `n_thresholds`
/// IoU thresholds spaced uniformly on `[0, 1]`.
pub fn auc(per_sample: &[f64], n_thresholds: usize) -> Result<f64> {
    if per_sample.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if n_thresholds < 2 {
        return Err(Error::InvalidArgument(format!("auc needs at least 2 thresholds, got {n_thresholds}")));
    }
    let intervals = (n_thresholds - 1) as f64;
    let rates: Vec<f64> = (0..n_thresholds)
        .map(|i| dataset_ciou(per_sample, i as f64 / intervals))
        .collect::<Result<_>>()?;
    let area: f64 = rates.windows(2).map(|w| w[0] + w[1]).sum();
    Ok(area / (2.0 * intervals))
}

/// Aggregate localization scores. Serializes as
/// `{"ciou": .., "auc": .., "n_samples": ..}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub ciou: f64,
    pub auc: f64,
    pub n_samples: usize,
    #[serde(skip)]
    pub per_sample: Vec<f64>,
}

/// Thresholds used to score a set of predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub bin_threshold: f64,
    pub success_threshold: f64,
    pub n_thresholds: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            bin_threshold: 0.5,
            success_threshold: 0.5,
            n_thresholds: AUC_THRESHOLDS,
        }
    }
}

impl EvalReport {
    pub fn from_scores(per_sample: Vec<f64>, cfg: &EvalConfig) -> Result<Self> {
        Ok(Self {
            ciou: dataset_ciou(&per_sample, cfg.success_threshold)?,
            auc: auc(&per_sample, cfg.n_thresholds)?,
            n_samples: per_sample.len(),
            per_sample,
        })
    }

    pub fn evaluate(pairs: &[(ProbabilityMask, BinaryMask)], cfg: &EvalConfig) -> Result<Self> {
        let scores = pairs
            .iter()
            .map(|(p, g)| ciou_sample(p, g, cfg.bin_threshold))
            .collect::<Result<_>>()?;
        Self::from_scores(scores, cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain numeric report")
    }
}

/// Stems of every `<stem>.pred.png` in `dir` that has a matching
/// `<stem>.gt.png`, sorted. A prediction without ground truth is an error.
pub fn eval_pairs(dir: impl AsRef<Path>) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut stems = Vec::new();
    for entry in entries {
        let name = entry.map_err(|e| Error::io(dir, e))?.file_name();
        if let Some(stem) = name.to_str().and_then(|n| n.strip_suffix(".pred.png")) {
            stems.push(stem.to_string());
        }
    }
    stems.sort();
    stems
        .into_iter()
        .map(|s| {
            let pred = dir.join(format!("{s}.pred.png"));
            let gt = dir.join(format!("{s}.gt.png"));
            if !gt.is_file() {
                return Err(Error::InvalidArgument(format!("missing ground truth {}", gt.display())));
            }
            Ok((s, pred, gt))
        })
        .collect()
}

/// Scores every prediction/ground-truth pair in `dir`.
pub fn evaluate_dir(dir: impl AsRef<Path>, cfg: &EvalConfig) -> Result<EvalReport> {
    let pairs = eval_pairs(dir)?
        .into_iter()
        .map(|(_, p, g)| Ok((ProbabilityMask::load_png(p)?, BinaryMask::load_png(g)?)))
        .collect::<Result<Vec<_>>>()?;
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    EvalReport::evaluate(&pairs, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(h: usize, w: usize, y0: usize, y1: usize, x0: usize, x1: usize) -> BinaryMask {
        BinaryMask::from_fn(h, w, |y, x| (y0..y1).contains(&y) && (x0..x1).contains(&x))
    }

    #[test]
    fn ciou_examples() {
        let gt = rect(4, 4, 0, 2, 0, 4);
        assert_eq!(ciou_sample(&gt.to_probability(), &gt, 0.5).unwrap(), 1.0);
        let other = rect(4, 4, 2, 4, 0, 4);
        assert_eq!(ciou_sample(&other.to_probability(), &gt, 0.5).unwrap(), 0.0);
        let half = rect(4, 4, 0, 1, 0, 4);
        assert_eq!(ciou_sample(&half.to_probability(), &gt, 0.5).unwrap(), 0.5);
        let empty = rect(4, 4, 0, 0, 0, 0);
        assert_eq!(ciou_sample(&empty.to_probability(), &empty, 0.5).unwrap(), 0.0);
        assert!(ciou_sample(&ProbabilityMask::filled(2, 2, 0.0).unwrap(), &gt, 0.5).is_err());
    }

    #[test]
    fn dataset_examples() {
        assert_eq!(dataset_ciou(&[1.0, 1.0], 0.5).unwrap(), 1.0);
        assert_eq!(dataset_ciou(&[0.0, 0.0], 0.5).unwrap(), 0.0);
        assert_eq!(dataset_ciou(&[0.6, 0.4], 0.5).unwrap(), 0.5);
        assert!(matches!(dataset_ciou(&[], 0.5), Err(Error::EmptyDataset)));
    }

    #[test]
    fn auc_examples() {
        assert!((auc(&[1.0; 5], 101).unwrap() - 1.0).abs() < 1e-12);
        assert!(auc(&[0.0; 5], 101).unwrap() <= 0.005 + 1e-12);
        assert!((auc(&[0.5], 101).unwrap() - 0.5).abs() <= 0.01);
        assert!(auc(&[], 101).is_err());
    }

    #[test]
    fn report_json_has_exactly_three_fields() {
        let r = EvalReport::from_scores(vec![1.0, 0.0], &EvalConfig::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, vec!["auc", "ciou", "n_samples"]);
        assert_eq!(v["n_samples"], 2);
    }
}
