//! The implicit neural representation: Fourier-encoded pixel coordinates
//! fed to a SIREN, blended into the source image through the mask.

mod composite;
mod fourier;
mod siren;

pub use composite::{composite, composite_backward, foreground};
pub use fourier::{encode_points, fourier_features, make_fourier_basis, CoordGrid, FourierBasis, FOURIER_SCALE};
pub use siren::{siren_bound, siren_forward, siren_init, Dense, SirenConfig, SirenGrads, SirenParams, SirenTape};
