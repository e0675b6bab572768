//! Patch sampling inside the mask, cropping and augmentation.
//!
//! Each patch is the image of the foreground under a separable linear map
//! (crop, resize, flip, sub-crop), so patch gradients are pulled back to
//! the foreground with the adjoint of the same map.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::localizer::ProbabilityMask;
use crate::signal_io::resample::{self, AxisMap};
use crate::signal_io::ImageBuffer;

/// Side length every patch is resized to before embedding.
pub const PATCH_RES: usize = 64;

/// Minimum area fraction kept by the augmentation sub-crop.
pub const MIN_SUBCROP_AREA: f64 = 0.8;

/// Cropped, resized patches with the centers and sizes they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub patches: Vec<ImageBuffer>,
    pub centers: Vec<(usize, usize)>,
    /// Requested side lengths, drawn from the size range.
    pub sizes: Vec<usize>,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

/// A square crop window, already clipped to the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropWindow {
    pub top: usize,
    pub left: usize,
    pub side: usize,
}

impl CropWindow {
    /// The window of side `min(size, h, w)` centered on `center`, shifted
    /// inward until it fits.
    pub fn around(center: (usize, usize), size: usize, height: usize, width: usize) -> Self {
        let side = size.min(height).min(width).max(1);
        let place = |c: usize, n: usize| c.saturating_sub(side / 2).min(n - side);
        Self {
            top: place(center.0, height),
            left: place(center.1, width),
            side,
        }
    }

    /// Crop followed by a bilinear resize to `PATCH_RES`.
    pub fn maps(&self, height: usize, width: usize) -> (AxisMap, AxisMap) {
        let resize = AxisMap::bilinear(self.side, PATCH_RES);
        (
            resize.after(&AxisMap::crop(height, self.top, self.side)),
            resize.after(&AxisMap::crop(width, self.left, self.side)),
        )
    }
}

/// A horizontal flip plus a square sub-crop resized back to `PATCH_RES`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Augmentation {
    pub flip: bool,
    pub top: usize,
    pub left: usize,
    pub side: usize,
}

impl Augmentation {
    pub fn identity() -> Self {
        Self {
            flip: false,
            top: 0,
            left: 0,
            side: PATCH_RES,
        }
    }

    pub fn random(rng: &mut impl Rng) -> Self {
        let flip = rng.random_bool(0.5);
        let min_side = (PATCH_RES as f64 * MIN_SUBCROP_AREA.sqrt()).ceil() as usize;
        let side = rng.random_range(min_side..=PATCH_RES);
        Self {
            flip,
            top: rng.random_range(0..=PATCH_RES - side),
            left: rng.random_range(0..=PATCH_RES - side),
            side,
        }
    }

    /// Row and column maps on a `PATCH_RES × PATCH_RES` patch.
    pub fn maps(&self) -> (AxisMap, AxisMap) {
        let resize = AxisMap::bilinear(self.side, PATCH_RES);
        let rows = resize.after(&AxisMap::crop(PATCH_RES, self.top, self.side));
        let mut cols = resize.after(&AxisMap::crop(PATCH_RES, self.left, self.side));
        if self.flip {
            cols = AxisMap::flip(PATCH_RES).after(&cols);
        }
        (rows, cols)
    }
}

/// One patch's full path from the foreground to the embedded pixels.
#[derive(Debug, Clone)]
pub struct PatchPlan {
    pub center: (usize, usize),
    pub size: usize,
    pub window: CropWindow,
    pub augmentation: Augmentation,
    rows: AxisMap,
    cols: AxisMap,
}

impl PatchPlan {
    pub fn new(
        center: (usize, usize),
        size: usize,
        augmentation: Augmentation,
        height: usize,
        width: usize,
    ) -> Self {
        let window = CropWindow::around(center, size, height, width);
        let (cr, cc) = window.maps(height, width);
        let (ar, ac) = augmentation.maps();
        Self {
            center,
            size,
            window,
            augmentation,
            rows: ar.after(&cr),
            cols: ac.after(&cc),
        }
    }

    /// The augmented patch cut from `foreground`.
    pub fn extract(&self, foreground: &ImageBuffer) -> ImageBuffer {
        foreground.map_axes(&self.rows, &self.cols)
    }

    /// Pulls a gradient on the patch back to the foreground (interleaved).
    pub fn pull_back(&self, grad: &[f64]) -> Vec<f64> {
        resample::apply_adjoint(grad, 3, &self.rows, &self.cols)
    }
}

/// Draws `k` centers uniformly, with replacement, from pixels whose mask
/// probability exceeds `threshold`.
pub fn sample_patch_centers(
    mask: &ProbabilityMask,
    k: usize,
    threshold: f64,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    sample_centers_with(mask, k, threshold, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) fn sample_centers_with(
    mask: &ProbabilityMask,
    k: usize,
    threshold: f64,
    rng: &mut impl Rng,
) -> Result<Vec<(usize, usize)>> {
    let w = mask.width();
    let pool: Vec<usize> = mask
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > threshold)
        .map(|(i, _)| i)
        .collect();
    if pool.is_empty() {
        let max = mask.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::NoQualifyingCenters { threshold, max });
    }
    Ok((0..k)
        .map(|_| {
            let i = pool[rng.random_range(0..pool.len())];
            (i / w, i % w)
        })
        .collect())
}

fn check_range(size_range: (usize, usize)) -> Result<()> {
    if size_range.0 == 0 || size_range.0 > size_range.1 {
        return Err(Error::InvalidArgument(format!(
            "patch size range [{}, {}] is empty",
            size_range.0, size_range.1
        )));
    }
    Ok(())
}

/// Crops one patch per center with a side drawn uniformly from
/// `size_range`, each resized to `PATCH_RES × PATCH_RES`.
pub fn crop_patches(
    foreground: &ImageBuffer,
    centers: &[(usize, usize)],
    size_range: (usize, usize),
    seed: u64,
) -> Result<PatchSet> {
    check_range(size_range)?;
    let (h, w) = foreground.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = PatchSet {
        patches: Vec::with_capacity(centers.len()),
        centers: centers.to_vec(),
        sizes: Vec::with_capacity(centers.len()),
    };
    for &c in centers {
        if c.0 >= h || c.1 >= w {
            return Err(Error::InvalidArgument(format!("patch center {c:?} outside {h}x{w} image")));
        }
        let size = rng.random_range(size_range.0..=size_range.1);
        let plan = PatchPlan::new(c, size, Augmentation::identity(), h, w);
        set.patches.push(plan.extract(foreground));
        set.sizes.push(size);
    }
    Ok(set)
}

/// Seeded random flip and resized sub-crop of a `PATCH_RES` patch, or the
/// patch unchanged when `enabled` is false.
pub fn augment_patch(patch: &ImageBuffer, seed: u64, enabled: bool) -> Result<ImageBuffer> {
    if patch.shape() != (PATCH_RES, PATCH_RES) {
        return Err(Error::shape(format!("{PATCH_RES}x{PATCH_RES}"), format!("{:?}", patch.shape())));
    }
    if !enabled {
        return Ok(patch.clone());
    }
    let (rows, cols) = Augmentation::random(&mut ChaCha8Rng::seed_from_u64(seed)).maps();
    Ok(patch.map_axes(&rows, &cols))
}

/// Draws a full set of patch plans: centers, sizes and augmentations.
pub(crate) fn draw_plans(
    mask: &ProbabilityMask,
    k: usize,
    threshold: f64,
    size_range: (usize, usize),
    augment: bool,
    rng: &mut impl Rng,
) -> Result<Vec<PatchPlan>> {
    check_range(size_range)?;
    let (h, w) = mask.shape();
    let centers = sample_centers_with(mask, k, threshold, rng)?;
    Ok(centers
        .into_iter()
        .map(|c| {
            let size = rng.random_range(size_range.0..=size_range.1);
            let aug = if augment { Augmentation::random(rng) } else { Augmentation::identity() };
            PatchPlan::new(c, size, aug, h, w)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_image(h: usize, w: usize) -> ImageBuffer {
        let px = (0..h * w * 3).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
        ImageBuffer::new(h, w, px).unwrap()
    }

    #[test]
    fn single_qualifying_pixel_is_always_chosen() {
        let mut v = vec![0.0; 100];
        v[37] = 0.9;
        let m = ProbabilityMask::new(10, 10, v).unwrap();
        let c = sample_patch_centers(&m, 16, 0.5, 3).unwrap();
        assert!(c.iter().all(|&p| p == (3, 7)));
    }

    #[test]
    fn sub_threshold_mask_fails() {
        let m = ProbabilityMask::filled(8, 8, 0.4).unwrap();
        assert!(matches!(
            sample_patch_centers(&m, 4, 0.5, 0),
            Err(Error::NoQualifyingCenters { .. })
        ));
    }

    #[test]
    fn centers_are_roughly_uniform() {
        let m = ProbabilityMask::filled(4, 4, 1.0).unwrap();
        let n = 16_000;
        let c = sample_patch_centers(&m, n, 0.5, 11).unwrap();
        let mut counts = [0usize; 16];
        for (y, x) in c {
            counts[y * 4 + x] += 1;
        }
        let expected = n as f64 / 16.0;
        let chi2: f64 = counts.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        // 15 degrees of freedom, 99.9% quantile is about 37.7.
        assert!(chi2 < 37.7, "chi2 = {chi2}");
    }

    #[test]
    fn fixed_size_crops_are_exact_windows() {
        let img = gradient_image(128, 128);
        let set = crop_patches(&img, &[(50, 60), (0, 0), (127, 127)], (64, 64), 1).unwrap();
        assert!(set.sizes.iter().all(|&s| s == 64));
        let win = CropWindow::around((50, 60), 64, 128, 128);
        assert_eq!((win.top, win.left), (18, 28));
        assert_eq!(set.patches[0].pixel(0, 0), img.pixel(18, 28));
        assert_eq!(set.patches[0].pixel(63, 63), img.pixel(81, 91));
    }

    #[test]
    fn corner_crops_stay_inside() {
        for &(c, size) in &[((0, 0), 40), ((31, 31), 40), ((0, 31), 100), ((16, 2), 7)] {
            let win = CropWindow::around(c, size, 32, 32);
            assert!(win.top + win.side <= 32 && win.left + win.side <= 32);
            assert_eq!(win.side, size.min(32));
        }
    }

    #[test]
    fn crops_are_deterministic() {
        let img = gradient_image(100, 90);
        let centers = [(10, 10), (50, 40), (99, 89)];
        let a = crop_patches(&img, &centers, (20, 80), 5).unwrap();
        let b = crop_patches(&img, &centers, (20, 80), 5).unwrap();
        assert_eq!(a, b);
        assert!(a.patches.iter().all(|p| p.shape() == (PATCH_RES, PATCH_RES)));
        assert!(a.sizes.iter().all(|s| (20..=80).contains(s)));
    }

    #[test]
    fn augmentation_contract() {
        let patch = gradient_image(PATCH_RES, PATCH_RES);
        assert_eq!(augment_patch(&patch, 3, false).unwrap(), patch);
        let out = augment_patch(&patch, 3, true).unwrap();
        assert_eq!(out.shape(), patch.shape());
        let flat = ImageBuffer::filled(PATCH_RES, PATCH_RES, [0.2, 0.4, 0.6]);
        let aug = augment_patch(&flat, 9, true).unwrap();
        for (a, b) in aug.pixels().iter().zip(flat.pixels()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn augmentation_keeps_enough_area() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let a = Augmentation::random(&mut rng);
            assert!((a.side * a.side) as f64 >= MIN_SUBCROP_AREA * (PATCH_RES * PATCH_RES) as f64);
            assert!(a.top + a.side <= PATCH_RES && a.left + a.side <= PATCH_RES);
        }
    }

    #[test]
    fn pull_back_is_adjoint_of_extract() {
        let img = gradient_image(40, 30);
        let plan = PatchPlan::new((20, 5), 25, Augmentation::random(&mut ChaCha8Rng::seed_from_u64(4)), 40, 30);
        let patch = plan.extract(&img);
        let g: Vec<f64> = (0..patch.pixels().len()).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let lhs: f64 = patch.pixels().iter().zip(&g).map(|(a, b)| a * b).sum();
        let back = plan.pull_back(&g);
        let rhs: f64 = img.pixels().iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
    }
}
