use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::params_io::ParamFile;

/// Frequency multiplier applied inside the sinusoids.
pub const FOURIER_SCALE: f64 = 10.0;

/// Gaussian random Fourier basis `B ∈ R^{m×2}`, entries from `N(0, σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierBasis {
    pub b: Array2<f64>,
    pub sigma: f64,
    pub scale: f64,
    pub seed: u64,
}

impl FourierBasis {
    pub const KIND: &'static str = "fourier-basis";

    pub fn m(&self) -> usize {
        self.b.nrows()
    }

    /// Width of the encoded feature vector, `2m`.
    pub fn feature_dim(&self) -> usize {
        2 * self.m()
    }

    pub fn to_param_file(&self) -> ParamFile {
        let mut f = ParamFile::new(Self::KIND)
            .with("shape", format!("{} 2", self.m()))
            .with("sigma", self.sigma)
            .with("scale", self.scale)
            .with("seed", self.seed);
        f.data = self.b.iter().copied().collect();
        f
    }

    pub fn from_param_file(f: &ParamFile) -> Result<Self> {
        f.expect_kind(Self::KIND)?;
        let shape = f.get_list("shape")?;
        let [m, 2] = shape[..] else {
            return Err(Error::ParamFormat(format!("bad basis shape {shape:?}")));
        };
        let b = Array2::from_shape_vec((m, 2), f.data.clone())
            .map_err(|e| Error::ParamFormat(e.to_string()))?;
        Ok(Self {
            b,
            sigma: f.get_parsed("sigma")?,
            scale: f.get_parsed("scale")?,
            seed: f.get_parsed("seed")?,
        })
    }
}

pub fn make_fourier_basis(m: usize, sigma: f64, seed: u64) -> Result<FourierBasis> {
    if m == 0 || sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "need m ≥ 1 and σ > 0, got m={m}, σ={sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    let b = Array2::from_shape_simple_fn((m, 2), || normal.sample(&mut rng));
    Ok(FourierBasis {
        b,
        sigma,
        scale: FOURIER_SCALE,
        seed,
    })
}

/// Pixel coordinates of an `H × W` raster normalized to `[0, 1]²`,
/// row-major, `(row, column)` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoordGrid {
    pub height: usize,
    pub width: usize,
}

impl CoordGrid {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn axis(i: usize, n: usize) -> f64 {
        if n <= 1 {
            0.0
        } else {
            i as f64 / (n - 1) as f64
        }
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (y, x)))
            .map(|(y, x)| [Self::axis(y, self.height), Self::axis(x, self.width)])
            .collect()
    }
}

/// `[cos(2π·scale·Bv), sin(2π·scale·Bv)]` for each point; one row per point.
pub fn encode_points(points: &[[f64; 2]], basis: &FourierBasis) -> Array2<f64> {
    let m = basis.m();
    let k = 2.0 * std::f64::consts::PI * basis.scale;
    let mut out = Array2::zeros((points.len(), 2 * m));
    for (mut row, p) in out.rows_mut().into_iter().zip(points) {
        for (r, bv) in basis.b.rows().into_iter().enumerate() {
            let phase = k * (bv[0] * p[0] + bv[1] * p[1]);
            row[r] = phase.cos();
            row[m + r] = phase.sin();
        }
    }
    out
}

pub fn fourier_features(coords: &CoordGrid, basis: &FourierBasis) -> Array2<f64> {
    encode_points(&coords.points(), basis)
}
