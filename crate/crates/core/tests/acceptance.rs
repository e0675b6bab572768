//! Acceptance criteria 1-8. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use avstyle::cli::main_with_args;
use avstyle::embedding::{info_nce_loss, Embedding, ImageEncoder, ReferenceImageEncoder};
use avstyle::inr::{encode_points, make_fourier_basis, siren_bound, siren_init, SirenConfig, SirenParams};
use avstyle::localizer::{
    bce_loss, predict_mask, sigmoid, train_localizer, BinaryMask, DecoderShape, LocalizerTrainConfig,
    ProbabilityMask,
};
use avstyle::metrics::{auc, ciou_sample, dataset_ciou};
use avstyle::signal_io::{save_image, save_wav, ImageBuffer};
use avstyle::stylizer::{
    content_loss, foreground_reg_loss, patchclip_loss, stylize, Augmentation, InrConfig, LossWeights, PatchPlan,
    ReferenceExtractor, StyleConfig, StyleProblem,
};
use avstyle::toy;
use common::{max_fd_error, random_image, random_vec, rng, REL_TOL};
use ndarray::Array2;
use rand::Rng;

type Criterion = (&'static str, fn() -> Outcome);
type ArgsFor<'a> = Box<dyn Fn(&Path) -> Vec<String> + 'a>;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed < Duration::from_secs(limit_secs)
}

fn cli(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("avstyle").chain(args.iter().copied()))
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn compositing_identity() -> Outcome {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let style = dir.path().join("style.wav");
    save_wav(&toy::tone(660.0, 1.0), &style).unwrap();
    let mut r = rng(1);
    let mut identical = 0;
    for i in 0..20 {
        let (h, w) = (r.random_range(8..48), r.random_range(8..48));
        let img = random_image(&mut r, h, w);
        let src = dir.path().join(format!("src{i}.png"));
        let mask = dir.path().join(format!("mask{i}.png"));
        let out = dir.path().join(format!("out{i}.png"));
        save_image(&img, &src).unwrap();
        ProbabilityMask::filled(h, w, 0.0).unwrap().save_png(&mask).unwrap();
        let code = cli(&[
            "stylize", "--seed", &i.to_string(), "--image", &s(&src), "--mask", &s(&mask),
            "--style-audio", &s(&style), "--out", &s(&out),
        ]);
        if code == 0 && std::fs::read(&src).unwrap() == std::fs::read(&out).unwrap() {
            identical += 1;
        }
    }
    let el = t.elapsed();
    outcome(identical == 20 && within(el, 10), format!("{identical}/20 byte-identical, {el:.2?} (limit 10s)"))
}

fn info_nce_grad(r: &mut impl Rng) -> f64 {
    let (n, d) = (4, 16);
    let x = random_vec(r, 2 * n * d);
    let loss = |x: &[f64]| {
        let (a, p) = x.split_at(n * d);
        let a: Vec<&[f64]> = a.chunks(d).collect();
        let p: Vec<&[f64]> = p.chunks(d).collect();
        info_nce_loss(&a, &p, 0.07).unwrap()
    };
    let out = loss(&x);
    let g: Vec<f64> = out.grad_anchors.concat().into_iter().chain(out.grad_positives.concat()).collect();
    max_fd_error(&x, &g, |x| loss(x).loss, 24, 1)
}

fn bce_grad(r: &mut impl Rng) -> f64 {
    let z: Vec<f64> = (0..64).map(|_| r.random_range(-3.0..3.0)).collect();
    let t = BinaryMask::new(8, 8, (0..64).map(|_| r.random_bool(0.5)).collect()).unwrap();
    let loss = |z: &[f64]| bce_loss(&ProbabilityMask::new(8, 8, z.iter().map(|&v| sigmoid(v)).collect()).unwrap(), &t).unwrap();
    max_fd_error(&z, &loss(&z).1, |z| loss(z).0, 24, 2)
}

fn patchclip_grad(r: &mut impl Rng) -> f64 {
    let enc = ReferenceImageEncoder::with_dim(4, 16);
    let src = enc.encode(&random_image(r, 16, 16));
    let target = Embedding::normalize(random_vec(r, 16)).unwrap();
    let x: Vec<f64> = (0..4).flat_map(|_| random_image(r, 16, 16).into_pixels()).collect();
    let run = |x: &[f64]| {
        let ps: Vec<ImageBuffer> = x.chunks(768).map(|c| ImageBuffer::new(16, 16, c.to_vec()).unwrap()).collect();
        patchclip_loss(&ps, &src, &target, 0.5, &enc).unwrap()
    };
    max_fd_error(&x, &run(&x).grad_patches.concat(), |x| run(x).loss, 24, 3)
}

type ImageLoss = fn(
    &ImageBuffer,
    &ImageBuffer,
    &dyn avstyle::stylizer::FeatureExtractor,
) -> avstyle::Result<(f64, Vec<f64>)>;

fn image_loss_grad(r: &mut impl Rng, loss: ImageLoss) -> f64 {
    let ex = ReferenceExtractor::new(5);
    let (y, x) = (random_image(r, 8, 8), random_image(r, 8, 8));
    let run = |v: &[f64]| loss(&ImageBuffer::new(8, 8, v.to_vec()).unwrap(), &x, &ex).unwrap();
    max_fd_error(y.pixels(), &run(y.pixels()).1, |v| run(v).0, 24, 4)
}

fn flat(p: &SirenParams) -> Vec<f64> {
    p.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()).copied()).collect()
}

fn pipeline_grad(r: &mut impl Rng) -> f64 {
    let source = random_image(r, 16, 16);
    let mask = ProbabilityMask::new(16, 16, (0..256).map(|i| ((i % 16) as f64 + 0.5) / 16.0).collect()).unwrap();
    let basis = make_fourier_basis(8, 1.0, 6).unwrap();
    let mut siren = siren_init(&SirenConfig { in_dim: 16, n_layers: 2, width: 8, out_dim: 3, omega0: 30.0, seed: 6 }).unwrap();
    let last = siren.layers.len() - 1;
    siren.layers[last].b.fill(0.5);
    let enc = ReferenceImageEncoder::with_dim(6, 16);
    let ex = ReferenceExtractor::new(6);
    let target = Embedding::normalize(random_vec(r, 16)).unwrap();
    let problem = StyleProblem::new(&source, &mask, &basis, &target, &enc, &ex, LossWeights::default(), 0.5).unwrap();
    let plans: Vec<PatchPlan> = (0..4)
        .map(|_| PatchPlan::new((r.random_range(0..16), r.random_range(9..16)), r.random_range(6..=12), Augmentation::random(r), 16, 16))
        .collect();
    let eval = problem.evaluate(&siren, &plans).unwrap();
    let analytic: Vec<f64> = eval.grads.iter().flat_map(|l| l.w.iter().chain(l.b.iter()).copied()).collect();
    let theta = flat(&siren);
    let mut probe = siren.clone();
    max_fd_error(
        &theta,
        &analytic,
        |x| {
            let mut rest = x;
            for s in probe.param_slices_mut() {
                let (a, b) = rest.split_at(s.len());
                s.copy_from_slice(a);
                rest = b;
            }
            problem.evaluate(&probe, &plans).unwrap().total
        },
        24,
        5,
    )
}

fn gradient_suite() -> Outcome {
    let t = Instant::now();
    let mut r = rng(2);
    let errors = [
        ("info_nce", info_nce_grad(&mut r)),
        ("bce", bce_grad(&mut r)),
        ("patchclip", patchclip_grad(&mut r)),
        ("reg", image_loss_grad(&mut r, foreground_reg_loss)),
        ("content", image_loss_grad(&mut r, content_loss)),
        ("pipeline", pipeline_grad(&mut r)),
    ];
    let el = t.elapsed();
    let worst = errors.iter().map(|e| e.1).fold(0.0, f64::max);
    let detail: Vec<String> = errors.iter().map(|(n, e)| format!("{n}={e:.1e}")).collect();
    outcome(worst < REL_TOL && within(el, 120), format!("24 probes each, {} , {el:.2?}", detail.join(" ")))
}

fn info_nce_closed_forms() -> Outcome {
    let single = info_nce_loss(&[vec![0.2, 0.9, -0.4]], &[vec![-0.3, 0.1, 0.8]], 0.07).unwrap().loss;
    let same = vec![vec![0.1, -0.3, 0.7, 0.2]; 5];
    let identical = info_nce_loss(&same, &same, 0.07).unwrap().loss;
    let e = |i: usize| (0..3).map(|j| if i == j { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
    let orth = info_nce_loss(&[e(0), e(1)], &[e(0), e(1)], 1.0).unwrap().loss;
    let ok = single == 0.0 && (identical - 5f64.ln()).abs() < 1e-9 && (orth - 0.3133).abs() < 1e-4;
    outcome(ok, format!("N=1 {single}, identical N=5 {identical:.12} vs ln5, orthogonal {orth:.6}"))
}

fn weak_supervision() -> Outcome {
    let t = Instant::now();
    let conds = toy::quadrant_conditions(512, 11);
    let train = toy::quadrant_dataset(32, 64, &conds, 0.5, 12).unwrap();
    let held_out = toy::quadrant_dataset(32, 64, &conds, 0.5, 13).unwrap();
    let cfg = LocalizerTrainConfig { epochs: 300, batch_size: 32, seed: 14, ..LocalizerTrainConfig::default() };
    let a = train_localizer(&train, DecoderShape::default(), &cfg).unwrap();
    let b = train_localizer(&train, DecoderShape::default(), &cfg).unwrap();
    let steps = a.epoch_losses.len();
    let ious: Vec<f64> = held_out
        .iter()
        .map(|ex| ciou_sample(&predict_mask(&ex.image, &ex.cond, &a.params).unwrap(), &ex.target, 0.5).unwrap())
        .collect();
    let mean = ious.iter().sum::<f64>() / ious.len() as f64;
    let el = t.elapsed();
    let deterministic = a.params == b.params;
    outcome(
        mean >= 0.9 && deterministic && within(el, 60),
        format!("{steps} steps, held-out mean IoU {mean:.4}, deterministic {deterministic}, {el:.2?} (limit 60s)"),
    )
}

fn stylization_convergence() -> Outcome {
    let t = Instant::now();
    let inst = toy::style_instance(64, 3);
    let enc = ReferenceImageEncoder::new(3);
    let target = toy::style_direction(&enc, &inst);
    let mask = inst.mask.to_probability();
    let cfg = StyleConfig {
        k: 16,
        size_range: (8, 16),
        iterations: 200,
        learning_rate: 1e-4,
        seed: 3,
        inr: InrConfig { fourier_m: 64, layers: 4, width: 64, ..InrConfig::default() },
        ..StyleConfig::default()
    };
    let out = stylize(&inst.source, &mask, &target, &cfg, &LossWeights::default(), &enc, &ReferenceExtractor::new(3)).unwrap();
    let (first, last) = (out.trace[0], out.trace[out.trace.len() - 1]);
    let cos_gain = last.mean_cosine.unwrap() - first.mean_cosine.unwrap();
    let background_same = inst
        .mask
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &m)| !m)
        .all(|(i, _)| out.image.pixels()[3 * i..3 * i + 3] == inst.source.pixels()[3 * i..3 * i + 3]);
    let el = t.elapsed();
    outcome(
        last.total < first.total && cos_gain >= 0.3 && background_same && within(el, 120),
        format!(
            "total {:.3} -> {:.3}, mean cosine {:.3} -> {:.3} (+{cos_gain:.3}), background unchanged {background_same}, {el:.2?}",
            first.total,
            last.total,
            first.mean_cosine.unwrap(),
            last.mean_cosine.unwrap()
        ),
    )
}

fn metric_oracles() -> Outcome {
    let t = Instant::now();
    let mut r = rng(6);
    let mut scores = Vec::new();
    let mut exact = true;
    for _ in 0..50 {
        let density = r.random_range(0.1..0.9);
        let pred: Vec<f64> = (0..256).map(|_| r.random::<f64>()).collect();
        let gt: Vec<bool> = (0..256).map(|_| r.random_bool(density)).collect();
        let (mut inter, mut union) = (0u32, 0u32);
        for (p, g) in pred.iter().zip(&gt) {
            let p = *p > 0.5;
            inter += u32::from(p && *g);
            union += u32::from(p || *g);
        }
        let brute = if union == 0 { 0.0 } else { f64::from(inter) / f64::from(union) };
        let got = ciou_sample(&ProbabilityMask::new(16, 16, pred).unwrap(), &BinaryMask::new(16, 16, gt).unwrap(), 0.5).unwrap();
        exact &= got == brute;
        scores.push(got);
    }
    let mut rate_exact = true;
    for thr in [0.0, 0.1, 0.25, 0.5, 0.75, 1.0] {
        let brute = scores.iter().filter(|&&c| c >= thr).count() as f64 / 50.0;
        rate_exact &= dataset_ciou(&scores, thr).unwrap() == brute;
    }
    // The success curve is 1[c >= t], whose exact integral over [0, 1] is c.
    let area = scores.iter().sum::<f64>() / 50.0;
    let a = auc(&scores, 101).unwrap();
    let el = t.elapsed();
    outcome(
        exact && rate_exact && (a - area).abs() <= 0.01 && within(el, 10),
        format!("ciou exact {exact}, success rates exact {rate_exact}, auc {a:.5} vs integral {area:.5}, {el:.2?}"),
    )
}

fn fourier_siren_invariants() -> Outcome {
    let mut r = rng(7);
    let basis = make_fourier_basis(256, 1.0, 7).unwrap();
    let pts: Vec<[f64; 2]> = (0..1000).map(|_| [r.random(), r.random()]).collect();
    let f = encode_points(&pts, &basis);
    let mut worst: f64 = 0.0;
    for row in f.rows() {
        for k in 0..256 {
            worst = worst.max((row[k] * row[k] + row[256 + k] * row[256 + k] - 1.0).abs());
        }
    }
    let cfg = SirenConfig::default();
    let p = siren_init(&cfg).unwrap();
    let bounds_hold = p.layers.iter().enumerate().all(|(l, d)| {
        let b = siren_bound(l, d.fan_in(), cfg.omega0);
        d.w.iter().all(|w| w.abs() <= b)
    });
    let mut zero = p.clone();
    for l in &mut zero.layers {
        l.w.fill(0.0);
        l.b.fill(0.0);
    }
    let out = zero.forward(&Array2::from_shape_fn((50, 512), |(i, j)| ((i * 7 + j) as f64).sin())).unwrap();
    let zeros = out.iter().all(|&v| v == 0.0);
    outcome(
        worst < 1e-9 && bounds_hold && zeros,
        format!("max |cos^2+sin^2-1| {worst:.1e}, init bounds hold {bounds_hold}, zero params give zeros {zeros}"),
    )
}

fn run_twice(dir: &Path, name: &str, args: impl Fn(&Path) -> Vec<String>, outputs: &[&str]) -> Result<(), String> {
    let mut runs = Vec::new();
    for k in 0..2 {
        let d = dir.join(format!("{name}-{k}"));
        std::fs::create_dir_all(&d).unwrap();
        let a = args(&d);
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        if cli(&refs) != 0 {
            return Err(format!("{name} exited non-zero"));
        }
        runs.push(outputs.iter().map(|o| std::fs::read(d.join(o)).unwrap_or_default()).collect::<Vec<_>>());
    }
    if runs[0] != runs[1] || runs[0].iter().any(Vec::is_empty) {
        return Err(format!("{name} artifacts differ"));
    }
    Ok(())
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let assets = toy::write_assets(root.join("assets"), 32, 0).unwrap();
    let conf = root.join("small.conf");
    std::fs::write(&conf, "style.k = 8\nstyle.size_min = 8\nstyle.size_max = 16\ninr.fourier_m = 16\ninr.layers = 2\ninr.width = 16\ntoy.samples = 16\ntoy.size = 32\n").unwrap();
    let c = s(&conf);
    let head = root.join("pretrain-0/head.params");
    let dec = root.join("train-localizer-0/decoder.params");
    let mask = root.join("localize-0/mask.png");
    let checks: Vec<(&str, ArgsFor, Vec<&str>)> = vec![
        ("pretrain", Box::new(|d: &Path| {
            vec!["pretrain".into(), "--config".into(), c.clone(), "--seed".into(), "4".into(), "--data".into(), s(&assets.pairs),
                 "--iterations".into(), "10".into(), "--out".into(), s(&d.join("head.params"))]
        }), vec!["head.params"]),
        ("train-localizer", Box::new(|d: &Path| {
            vec!["train-localizer".into(), "--config".into(), c.clone(), "--seed".into(), "4".into(), "--head".into(), s(&head),
                 "--iterations".into(), "10".into(), "--out".into(), s(&d.join("decoder.params"))]
        }), vec!["decoder.params"]),
        ("localize", Box::new(|d: &Path| {
            vec!["localize".into(), "--image".into(), s(&assets.scene), "--audio".into(), s(&assets.query), "--head".into(), s(&head),
                 "--decoder".into(), s(&dec), "--out".into(), s(&d.join("mask.png"))]
        }), vec!["mask.png"]),
        ("stylize", Box::new(|d: &Path| {
            vec!["stylize".into(), "--config".into(), c.clone(), "--seed".into(), "4".into(), "--image".into(), s(&assets.scene),
                 "--mask".into(), s(&mask), "--style-audio".into(), s(&assets.style), "--iterations".into(), "5".into(),
                 "--out".into(), s(&d.join("out.png"))]
        }), vec!["out.png", "out.csv"]),
        ("eval", Box::new(|d: &Path| {
            vec!["eval".into(), "--data".into(), s(&assets.eval), "--out".into(), s(&d.join("report.json"))]
        }), vec!["report.json"]),
        ("selftest", Box::new(|d: &Path| {
            vec!["selftest".into(), "--seed".into(), "4".into(), "--probes".into(), "20".into(), "--out".into(), s(&d.join("report.txt"))]
        }), vec!["report.txt"]),
    ];
    let mut failures = Vec::new();
    for (name, args, outs) in &checks {
        if let Err(e) = run_twice(root, name, args, outs) {
            failures.push(e);
        }
    }
    let ok = failures.is_empty();
    outcome(ok, if ok { "6 subcommands bit-identical across two runs".into() } else { failures.join("; ") })
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("compositing identity", compositing_identity),
        ("gradient suite", gradient_suite),
        ("InfoNCE closed forms", info_nce_closed_forms),
        ("weak-supervision toy task", weak_supervision),
        ("stylization convergence", stylization_convergence),
        ("metric oracles", metric_oracles),
        ("Fourier/SIREN invariants", fourier_siren_invariants),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.passed);
        println!("criterion {} {:<27} {}  {}", i + 1, name, if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
