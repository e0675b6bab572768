use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::params_io::{split_exact, ParamFile};

/// One dense layer, `y = x Wᵀ + b` with `W` of shape `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn fan_in(&self) -> usize {
        self.w.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.w.nrows()
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirenConfig {
    pub in_dim: usize,
    /// Number of sine layers.
    pub n_layers: usize,
    pub width: usize,
    pub out_dim: usize,
    pub omega0: f64,
    pub seed: u64,
}

impl Default for SirenConfig {
    fn default() -> Self {
        Self {
            in_dim: 512,
            n_layers: 8,
            width: 256,
            out_dim: 3,
            omega0: 30.0,
            seed: 0,
        }
    }
}

/// A sine-activated MLP with a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SirenParams {
    /// Sine layers followed by the linear output layer.
    pub layers: Vec<Dense>,
    pub omega0: f64,
    pub seed: u64,
}

/// Init bound for a layer's weights: `1/fan_in` for the first layer and
/// `√(6/fan_in)/ω0` for every later one (output layer included).
pub fn siren_bound(layer: usize, fan_in: usize, omega0: f64) -> f64 {
    if layer == 0 {
        1.0 / fan_in as f64
    } else {
        (6.0 / fan_in as f64).sqrt() / omega0
    }
}

/// Uniform SIREN initialization. Biases of sine layers share their
/// layer's weight bound; the output bias starts at zero.
pub fn siren_init(cfg: &SirenConfig) -> Result<SirenParams> {
    if cfg.n_layers == 0 || cfg.width == 0 || cfg.in_dim == 0 || cfg.out_dim == 0 {
        return Err(Error::InvalidArgument(format!("degenerate SIREN shape {cfg:?}")));
    }
    if cfg.omega0.is_nan() || cfg.omega0 <= 0.0 {
        return Err(Error::InvalidArgument(format!("ω0 must be positive, got {}", cfg.omega0)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut layers = Vec::with_capacity(cfg.n_layers + 1);
    let mut fan_in = cfg.in_dim;
    for l in 0..=cfg.n_layers {
        let out = if l == cfg.n_layers { cfg.out_dim } else { cfg.width };
        let bound = siren_bound(l, fan_in, cfg.omega0);
        let w = Array2::from_shape_simple_fn((out, fan_in), || rng.random_range(-bound..=bound));
        let b = if l == cfg.n_layers {
            Array1::zeros(out)
        } else {
            Array1::from_shape_simple_fn(out, || rng.random_range(-bound..=bound))
        };
        layers.push(Dense { w, b });
        fan_in = out;
    }
    Ok(SirenParams {
        layers,
        omega0: cfg.omega0,
        seed: cfg.seed,
    })
}

/// Activations kept for the backward pass.
pub struct SirenTape {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// `ω0 · cos(ω0 z)` for each sine layer.
    dsin: Vec<Array2<f64>>,
}

impl SirenTape {
    /// Outputs of the sine layers, in order.
    pub fn hidden(&self) -> &[Array2<f64>] {
        &self.inputs[1..]
    }
}

/// Parameter gradients, shaped like [`SirenParams::layers`].
pub type SirenGrads = Vec<Dense>;

impl SirenParams {
    pub const KIND: &'static str = "siren";

    pub fn n_hidden(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn forward(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_tape(features)?.0)
    }

    pub fn forward_tape(&self, features: &Array2<f64>) -> Result<(Array2<f64>, SirenTape)> {
        if features.ncols() != self.in_dim() {
            return Err(Error::shape(self.in_dim(), features.ncols()));
        }
        let w0 = self.omega0;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut dsin = Vec::with_capacity(self.n_hidden());
        let mut h = features.clone();
        for layer in &self.layers[..self.n_hidden()] {
            let z = layer.forward(&h);
            dsin.push(z.mapv(|v| w0 * (w0 * v).cos()));
            inputs.push(h);
            h = z.mapv(|v| (w0 * v).sin());
        }
        let out = self.layers[self.n_hidden()].forward(&h);
        inputs.push(h);
        Ok((out, SirenTape { inputs, dsin }))
    }

    /// Gradients of all parameters given `∂L/∂output` (one row per point).
    pub fn backward(&self, tape: &SirenTape, grad_out: &Array2<f64>) -> SirenGrads {
        let mut grads = Vec::with_capacity(self.layers.len());
        let last = self.n_hidden();
        let mut g = grad_out.clone();
        for l in (0..=last).rev() {
            if l < last {
                g *= &tape.dsin[l];
            }
            let layer = &self.layers[l];
            let gw = g.t().dot(&tape.inputs[l]);
            let gb = g.sum_axis(Axis(0));
            if l > 0 {
                g = g.dot(&layer.w);
            }
            grads.push(Dense { w: gw, b: gb });
        }
        grads.reverse();
        grads
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.w.as_slice_mut().expect("standard layout"),
                    l.b.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.layers.iter().flat_map(|l| [l.w.len(), l.b.len()]).collect()
    }

    pub fn to_param_file(&self) -> ParamFile {
        let dims: Vec<String> = std::iter::once(self.in_dim())
            .chain(self.layers.iter().map(Dense::fan_out))
            .map(|d| d.to_string())
            .collect();
        let mut f = ParamFile::new(Self::KIND)
            .with("dims", dims.join(" "))
            .with("omega0", self.omega0)
            .with("seed", self.seed);
        for l in &self.layers {
            f.data.extend(l.w.iter());
            f.data.extend(l.b.iter());
        }
        f
    }

    pub fn from_param_file(f: &ParamFile) -> Result<Self> {
        f.expect_kind(Self::KIND)?;
        let dims = f.get_list("dims")?;
        if dims.len() < 3 {
            return Err(Error::ParamFormat(format!("too few layer dims {dims:?}")));
        }
        let sizes: Vec<usize> = dims
            .windows(2)
            .flat_map(|p| [p[0] * p[1], p[1]])
            .collect();
        let parts = split_exact(&f.data, &sizes)?;
        let layers = dims
            .windows(2)
            .zip(parts.chunks_exact(2))
            .map(|(d, p)| {
                Ok(Dense {
                    w: Array2::from_shape_vec((d[1], d[0]), p[0].to_vec())
                        .map_err(|e| Error::ParamFormat(e.to_string()))?,
                    b: Array1::from(p[1].to_vec()),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            layers,
            omega0: f.get_parsed("omega0")?,
            seed: f.get_parsed("seed")?,
        })
    }
}

pub fn siren_forward(params: &SirenParams, features: &Array2<f64>) -> Result<Array2<f64>> {
    params.forward(features)
}
