//! Finite-difference gradient checks and closed-form checks, run by the
//! `selftest` subcommand.

use ndarray::Array1;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::{info_nce_loss, Embedding, ImageEncoder, ReferenceImageEncoder};
use crate::error::Result;
use crate::inr::{make_fourier_basis, siren_init, SirenConfig, SirenParams};
use crate::localizer::{bce_loss, sigmoid, BinaryMask, ProbabilityMask};
use crate::signal_io::ImageBuffer;
use crate::stylizer::{
    content_loss, foreground_reg_loss, patchclip_loss, Augmentation, LossWeights, PatchPlan, ReferenceExtractor,
    StyleProblem,
};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Largest accepted relative error.
pub const FD_TOLERANCE: f64 = 1e-4;
/// Gradients smaller than this are compared in absolute terms.
pub const FD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub probes: usize,
    /// Largest error seen; relative for gradient checks, absolute otherwise.
    pub max_error: f64,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.max_error < self.tolerance
    }
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<28} probes={:<3} max_err={:.3e} tol={:.0e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.probes,
            self.max_error,
            self.tolerance
        )
    }
}

/// `|a − n| / max(|a|, |n|, FD_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

/// Compares `analytic` with central differences of `f` at `probes`
/// randomly chosen coordinates of `x`.
pub fn check_gradient(
    name: &str,
    x: &[f64],
    analytic: &[f64],
    mut f: impl FnMut(&[f64]) -> f64,
    probes: usize,
    seed: u64,
) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = probes.min(x.len());
    let mut probe = x.to_vec();
    let mut max_error: f64 = 0.0;
    for i in sample(&mut rng, x.len(), n) {
        probe[i] = x[i] + FD_STEP;
        let up = f(&probe);
        probe[i] = x[i] - FD_STEP;
        let down = f(&probe);
        probe[i] = x[i];
        max_error = max_error.max(relative_error(analytic[i], (up - down) / (2.0 * FD_STEP)));
    }
    CheckReport {
        name: name.to_string(),
        probes: n,
        max_error,
        tolerance: FD_TOLERANCE,
    }
}

fn uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn image(rng: &mut impl Rng, h: usize, w: usize) -> ImageBuffer {
    ImageBuffer::new(h, w, uniform(rng, h * w * 3, 0.05, 0.95)).expect("in range")
}

fn unit(rng: &mut impl Rng, d: usize) -> Embedding {
    Embedding::normalize(uniform(rng, d, -1.0, 1.0)).expect("nonzero")
}

pub fn check_info_nce(probes: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, d) = (4, 6);
    let x = uniform(&mut rng, 2 * n * d, -1.0, 1.0);
    let eval = |x: &[f64]| {
        let (a, p) = x.split_at(n * d);
        let a: Vec<&[f64]> = a.chunks(d).collect();
        let p: Vec<&[f64]> = p.chunks(d).collect();
        info_nce_loss(&a, &p, 0.07)
    };
    let out = eval(&x)?;
    let analytic: Vec<f64> = out.grad_anchors.concat().into_iter().chain(out.grad_positives.concat()).collect();
    Ok(check_gradient("info_nce_loss", &x, &analytic, |x| eval(x).map(|o| o.loss).unwrap_or(f64::NAN), probes, seed))
}

pub fn check_bce(probes: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (6, 6);
    let logits = uniform(&mut rng, h * w, -3.0, 3.0);
    let target = BinaryMask::new(h, w, (0..h * w).map(|_| rng.random_bool(0.5)).collect())?;
    let eval = |z: &[f64]| {
        let p = ProbabilityMask::new(h, w, z.iter().map(|&v| sigmoid(v)).collect())?;
        bce_loss(&p, &target)
    };
    let (_, analytic) = eval(&logits)?;
    Ok(check_gradient("bce_loss", &logits, &analytic, |z| eval(z).map(|o| o.0).unwrap_or(f64::NAN), probes, seed))
}

pub fn check_patchclip(probes: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enc = ReferenceImageEncoder::with_dim(seed, 16);
    let (k, side) = (4, 16);
    let patches: Vec<ImageBuffer> = (0..k).map(|_| image(&mut rng, side, side)).collect();
    let src = enc.encode(&image(&mut rng, side, side));
    let target = unit(&mut rng, 16);
    let len = side * side * 3;
    let eval = |x: &[f64]| {
        let ps: Vec<ImageBuffer> = x
            .chunks(len)
            .map(|c| ImageBuffer::new(side, side, c.to_vec()))
            .collect::<Result<_>>()?;
        patchclip_loss(&ps, &src, &target, 0.5, &enc)
    };
    let x: Vec<f64> = patches.iter().flat_map(|p| p.pixels().to_vec()).collect();
    let analytic = eval(&x)?.grad_patches.concat();
    Ok(check_gradient("patchclip_loss", &x, &analytic, |x| eval(x).map(|o| o.loss).unwrap_or(f64::NAN), probes, seed))
}

type ImageLoss = fn(&ImageBuffer, &ImageBuffer, &dyn crate::stylizer::FeatureExtractor) -> Result<(f64, Vec<f64>)>;

fn check_image_loss(name: &str, loss: ImageLoss, probes: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ex = ReferenceExtractor::new(seed);
    let (y, x) = (image(&mut rng, 8, 8), image(&mut rng, 8, 8));
    let eval = |v: &[f64]| loss(&ImageBuffer::new(8, 8, v.to_vec())?, &x, &ex);
    let (_, analytic) = eval(y.pixels())?;
    Ok(check_gradient(name, y.pixels(), &analytic, |v| eval(v).map(|o| o.0).unwrap_or(f64::NAN), probes, seed))
}

pub fn check_reg_loss(probes: usize, seed: u64) -> Result<CheckReport> {
    check_image_loss("foreground_reg_loss", foreground_reg_loss, probes, seed)
}

pub fn check_content_loss(probes: usize, seed: u64) -> Result<CheckReport> {
    check_image_loss("content_loss", content_loss, probes, seed)
}

fn flatten(p: &SirenParams) -> Vec<f64> {
    p.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()).copied()).collect()
}

fn unflatten(p: &mut SirenParams, x: &[f64]) {
    let mut rest = x;
    for s in p.param_slices_mut() {
        let (head, tail) = rest.split_at(s.len());
        s.copy_from_slice(head);
        rest = tail;
    }
}

/// `d L_total / d θ` on a 16×16 image with a soft mask, an `m = 8` basis
/// and a SIREN of two width-8 sine layers.
pub fn check_pipeline(probes: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (16, 16);
    let source = image(&mut rng, h, w);
    let mask = ProbabilityMask::new(
        h,
        w,
        (0..h * w).map(|i| (((i / w) as f64 + 0.5) / h as f64).powi(2)).collect(),
    )?;
    let basis = make_fourier_basis(8, 1.0, seed)?;
    let mut siren = siren_init(&SirenConfig {
        in_dim: 16,
        n_layers: 2,
        width: 8,
        out_dim: 3,
        omega0: 30.0,
        seed,
    })?;
    // Center the raw output so the clamp at composite time stays inactive.
    let last = siren.layers.len() - 1;
    siren.layers[last].b = Array1::from_elem(3, 0.5);
    let enc = ReferenceImageEncoder::with_dim(seed, 16);
    let ex = ReferenceExtractor::new(seed);
    let target = unit(&mut rng, 16);
    let problem = StyleProblem::new(&source, &mask, &basis, &target, &enc, &ex, LossWeights::default(), 0.5)?;
    let plans: Vec<PatchPlan> = (0..4)
        .map(|_| {
            let c = (rng.random_range(10..h), rng.random_range(0..w));
            PatchPlan::new(c, rng.random_range(6..=12), Augmentation::random(&mut rng), h, w)
        })
        .collect();
    let eval = problem.evaluate(&siren, &plans)?;
    let analytic: Vec<f64> = eval.grads.iter().flat_map(|l| l.w.iter().chain(l.b.iter()).copied()).collect();
    let theta = flatten(&siren);
    let mut scratch = siren.clone();
    Ok(check_gradient(
        "total loss wrt SIREN params",
        &theta,
        &analytic,
        |x| {
            unflatten(&mut scratch, x);
            problem.evaluate(&scratch, &plans).map(|e| e.total).unwrap_or(f64::NAN)
        },
        probes,
        seed,
    ))
}

/// Every gradient check with `probes` coordinates each.
pub fn gradient_suite(probes: usize, seed: u64) -> Result<Vec<CheckReport>> {
    Ok(vec![
        check_info_nce(probes, seed)?,
        check_bce(probes, seed)?,
        check_patchclip(probes, seed)?,
        check_reg_loss(probes, seed)?,
        check_content_loss(probes, seed)?,
        check_pipeline(probes, seed)?,
    ])
}

fn closed_form(name: &str, value: f64, expected: f64, tolerance: f64) -> CheckReport {
    CheckReport {
        name: name.to_string(),
        probes: 1,
        max_error: (value - expected).abs(),
        tolerance,
    }
}

/// Closed-form values of the losses and the Fourier encoding.
pub fn oracle_suite(seed: u64) -> Result<Vec<CheckReport>> {
    let e = |i: usize| -> Vec<f64> { (0..4).map(|j| f64::from(u8::from(i == j))).collect() };
    let single = info_nce_loss(&[vec![0.3, -0.7, 0.2]], &[vec![-0.9, 0.1, 0.4]], 0.07)?.loss;
    let same: Vec<Vec<f64>> = vec![vec![0.5, 0.5, 0.5, 0.5]; 4];
    let identical = info_nce_loss(&same, &same, 0.07)?.loss;
    let orth = info_nce_loss(&[e(0), e(1)], &[e(0), e(1)], 1.0)?.loss;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = make_fourier_basis(16, 1.0, seed)?;
    let points: Vec<[f64; 2]> = (0..1000).map(|_| [rng.random(), rng.random()]).collect();
    let feats = crate::inr::encode_points(&points, &basis);
    let m = basis.m();
    let pythagoras = feats
        .rows()
        .into_iter()
        .flat_map(|r| (0..m).map(move |j| (r[j] * r[j] + r[m + j] * r[m + j] - 1.0).abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);

    let ones = crate::stylizer::FeatureMap::new(1, 2, 2, vec![1.0; 4])?;
    let all = crate::stylizer::LossComponents {
        l_clip: 1.0,
        l_reg: 1.0,
        l_c: 1.0,
    };
    Ok(vec![
        closed_form("info_nce N=1", single, 0.0, 1e-15),
        closed_form("info_nce identical batch", identical, 4f64.ln(), 1e-9),
        closed_form("info_nce orthogonal pair", orth, 0.3133, 1e-4),
        closed_form("fourier cos^2 + sin^2", 1.0 + pythagoras, 1.0, 1e-9),
        closed_form("gram of ones", crate::stylizer::gram_matrix(&ones)[0], 1.0, 1e-15),
        closed_form(
            "total loss at unit components",
            crate::stylizer::total_loss(&all, &LossWeights::default()),
            37.2,
            1e-12,
        ),
    ])
}
