use avstyle::localizer::{BinaryMask, ProbabilityMask};
use avstyle::metrics::{auc, ciou_sample, dataset_ciou, EvalConfig, EvalReport};
use proptest::prelude::*;

proptest! {
    #[test]
    fn auc_never_rises_when_a_score_drops(
        scores in prop::collection::vec(0.0f64..=1.0, 1..30),
        idx in 0usize..30,
        drop in 0.0f64..1.0,
    ) {
        let idx = idx % scores.len();
        let before = auc(&scores, 101).unwrap();
        let mut lower = scores.clone();
        lower[idx] = (lower[idx] - drop).max(0.0);
        prop_assert!(auc(&lower, 101).unwrap() <= before + 1e-12);
        prop_assert!((0.0..=1.0).contains(&before));
    }

    #[test]
    fn ciou_matches_pixel_counting(
        pred in prop::collection::vec(0.0f64..=1.0, 64),
        gt in prop::collection::vec(any::<bool>(), 64),
        thr in 0.0f64..1.0,
    ) {
        let inter = pred.iter().zip(&gt).filter(|(p, g)| **p > thr && **g).count();
        let union = pred.iter().zip(&gt).filter(|(p, g)| **p > thr || **g).count();
        let expected = if union == 0 { 0.0 } else { inter as f64 / union as f64 };
        let got = ciou_sample(&ProbabilityMask::new(8, 8, pred).unwrap(), &BinaryMask::new(8, 8, gt).unwrap(), thr).unwrap();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn report_ciou_is_the_success_fraction(scores in prop::collection::vec(0.0f64..=1.0, 1..40)) {
        let r = EvalReport::from_scores(scores.clone(), &EvalConfig::default()).unwrap();
        let hits = scores.iter().filter(|&&s| s >= 0.5).count();
        prop_assert_eq!(r.ciou, hits as f64 / scores.len() as f64);
        prop_assert_eq!(r.ciou, dataset_ciou(&scores, 0.5).unwrap());
        prop_assert_eq!(r.n_samples, scores.len());
    }
}

#[test]
fn single_half_score_auc_matches_enumeration() {
    let n = 101;
    let step = 1.0 / (n - 1) as f64;
    let rates: Vec<f64> = (0..n).map(|i| if 0.5 >= i as f64 * step { 1.0 } else { 0.0 }).collect();
    let brute: f64 = rates.windows(2).map(|w| (w[0] + w[1]) * step / 2.0).sum();
    let got = auc(&[0.5], n).unwrap();
    assert!((got - brute).abs() < 1e-12);
    assert!((got - 0.5).abs() <= step);
}
