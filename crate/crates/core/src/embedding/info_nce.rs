use super::{cosine, cosine_grad};
use crate::error::{Error, Result};

/// Loss value and exact gradients for each anchor and positive vector.
#[derive(Debug, Clone)]
pub struct InfoNceOutput {
    pub loss: f64,
    pub similarities: Vec<Vec<f64>>,
    pub grad_anchors: Vec<Vec<f64>>,
    pub grad_positives: Vec<Vec<f64>>,
}

/// Mean over anchors `i` of `-log softmax_k(s_ik / tau)[i]`, where `s_ik`
/// is the cosine between anchor `i` and positive `k`.
///
/// Similarities are cosines of the raw inputs, so the gradients stay exact
/// for vectors that are not exactly unit length.
pub fn info_nce_loss<A, P>(anchors: &[A], positives: &[P], tau: f64) -> Result<InfoNceOutput>
where
    A: AsRef<[f64]>,
    P: AsRef<[f64]>,
{
    let n = anchors.len();
    if n == 0 || positives.len() != n {
        return Err(Error::shape(
            format!("{n} anchors and {n} positives"),
            format!("{} positives", positives.len()),
        ));
    }
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::InvalidArgument(format!("temperature {tau} must be positive")));
    }
    let d = anchors[0].as_ref().len();
    if anchors.iter().any(|a| a.as_ref().len() != d) || positives.iter().any(|p| p.as_ref().len() != d) {
        return Err(Error::shape(d, "mixed vector lengths"));
    }

    let sims: Vec<Vec<f64>> = anchors
        .iter()
        .map(|a| positives.iter().map(|p| cosine(a.as_ref(), p.as_ref())).collect())
        .collect();

    let mut loss = 0.0;
    let mut grad_anchors = vec![vec![0.0; d]; n];
    let mut grad_positives = vec![vec![0.0; d]; n];
    for (i, row) in sims.iter().enumerate() {
        let logits: Vec<f64> = row.iter().map(|s| s / tau).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - logits[i];

        for (k, l) in logits.iter().enumerate() {
            let p = (l - log_z).exp();
            let target = if k == i { 1.0 } else { 0.0 };
            let ds = (p - target) / (tau * n as f64);
            if ds == 0.0 {
                continue;
            }
            let (ga, gp) = cosine_grad(anchors[i].as_ref(), positives[k].as_ref());
            for (g, v) in grad_anchors[i].iter_mut().zip(&ga) {
                *g += ds * v;
            }
            for (g, v) in grad_positives[k].iter_mut().zip(&gp) {
                *g += ds * v;
            }
        }
    }

    Ok(InfoNceOutput {
        loss: loss / n as f64,
        similarities: sims,
        grad_anchors,
        grad_positives,
    })
}
