mod common;

use avstyle::inr::{composite, fourier_features, make_fourier_basis, siren_init, CoordGrid, SirenConfig};
use avstyle::localizer::ProbabilityMask;
use avstyle::signal_io::ImageBuffer;
use ndarray::Array2;
use proptest::prelude::*;

#[test]
fn siren_mean_output_gradient_matches_finite_differences() {
    let basis = make_fourier_basis(4, 1.0, 2).unwrap();
    let feats = fourier_features(&CoordGrid::new(4, 4), &basis);
    let cfg = SirenConfig { in_dim: 8, n_layers: 2, width: 8, out_dim: 3, omega0: 30.0, seed: 2 };
    let params = siren_init(&cfg).unwrap();
    let (out, tape) = params.forward_tape(&feats).unwrap();
    let g = Array2::from_elem(out.raw_dim(), 1.0 / out.len() as f64);
    let grads = params.backward(&tape, &g);
    let analytic: Vec<f64> = grads.iter().flat_map(|l| l.w.iter().chain(l.b.iter()).copied()).collect();
    let theta: Vec<f64> = params.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()).copied()).collect();
    let mut probe = params.clone();
    let err = common::max_fd_error(
        &theta,
        &analytic,
        |x| {
            let mut rest = x;
            for s in probe.param_slices_mut() {
                let (a, b) = rest.split_at(s.len());
                s.copy_from_slice(a);
                rest = b;
            }
            probe.forward(&feats).unwrap().mean().unwrap()
        },
        40,
        3,
    );
    assert!(err < common::REL_TOL, "{err}");
}

fn triple(seed: u64, h: usize, w: usize) -> (ImageBuffer, ProbabilityMask, Array2<f64>) {
    use rand::Rng;
    let mut r = common::rng(seed);
    let src = common::random_image(&mut r, h, w);
    let m = ProbabilityMask::new(h, w, (0..h * w).map(|_| r.random::<f64>()).collect()).unwrap();
    let x = Array2::from_shape_fn((h * w, 3), |_| r.random::<f64>());
    (src, m, x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composite_is_pixel_local(seed in any::<u64>(), y in 0usize..6, x in 0usize..5, v in 0.0f64..1.0) {
        let (src, m, f) = triple(seed, 6, 5);
        let before = composite(&src, &m, &f).unwrap();
        let mut px = src.pixels().to_vec();
        px[(y * 5 + x) * 3] = v;
        let after = composite(&ImageBuffer::new(6, 5, px).unwrap(), &m, &f).unwrap();
        for i in 0..30 {
            if i != y * 5 + x {
                prop_assert_eq!(&before.pixels()[3 * i..3 * i + 3], &after.pixels()[3 * i..3 * i + 3]);
            }
        }
    }

    #[test]
    fn composite_is_affine_in_the_inr_output(seed in any::<u64>(), t in 0.0f64..1.0) {
        let (src, m, a) = triple(seed, 4, 4);
        let (_, _, b) = triple(seed.wrapping_add(1), 4, 4);
        let mix = &a * (1.0 - t) + &b * t;
        let ca = composite(&src, &m, &a).unwrap();
        let cb = composite(&src, &m, &b).unwrap();
        let cm = composite(&src, &m, &mix).unwrap();
        for i in 0..16 {
            for c in 0..3 {
                let k = 3 * i + c;
                let expected = (1.0 - t) * ca.pixels()[k] + t * cb.pixels()[k];
                prop_assert!((cm.pixels()[k] - expected).abs() < 1e-12);
                let slope = cb.pixels()[k] - ca.pixels()[k];
                prop_assert!((slope - m.values()[i] * (b[[i, c]] - a[[i, c]])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fourier_features_are_bounded(seed in any::<u64>(), sigma in 0.1f64..20.0, h in 1usize..12, w in 1usize..12) {
        let basis = make_fourier_basis(16, sigma, seed).unwrap();
        let f = fourier_features(&CoordGrid::new(h, w), &basis);
        prop_assert!(f.iter().all(|v| (-1.0..=1.0).contains(v)));
        for row in f.rows() {
            for k in 0..16 {
                prop_assert!((row[k] * row[k] + row[16 + k] * row[16 + k] - 1.0).abs() < 1e-9);
            }
        }
    }
}
