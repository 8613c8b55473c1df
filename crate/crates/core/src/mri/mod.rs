//! Image and k-space representations, the unitary 2-D Fourier transform,
//! sampling masks, the encoding operator `A`, and synthetic data.

mod acquisition;
mod fft;
mod grid;
pub mod io;
mod mask;
mod operator;
mod phantom;

pub use acquisition::{augment, dihedral_variants, simulate_acquisition, zero_fill_recon, Augment};
pub use fft::{dft2_unitary, fft_in_place, idft2_unitary};
pub use grid::{ComplexImage, KSpaceData};
pub use mask::{gen_poisson_mask, SamplingMask, DEFAULT_CENTER_FRACTION, FRACTION_TOLERANCE};
pub use operator::EncodingOperator;
pub use phantom::gen_phantom;
