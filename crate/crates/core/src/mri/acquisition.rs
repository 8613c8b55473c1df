use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::fft::{dft2_unitary, idft2_unitary};
use super::grid::{ComplexImage, KSpaceData};
use super::mask::SamplingMask;
use crate::error::{dim_err, Error, Result};

/// `f = M ⊙ (F m + n)` with `n` complex Gaussian, standard deviation
/// `noise_sigma` per real component.
pub fn simulate_acquisition(m: &ComplexImage, mask: &SamplingMask, noise_sigma: f64, seed: u64) -> Result<KSpaceData> {
    m.check_same_dims(mask.dims(), "image and mask")?;
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::Parameter(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    let mut k = dft2_unitary(m)?;
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("validated sigma");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for z in k.data_mut() {
            *z += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    mask.apply(&k)
}

/// Inverse transform of the (already masked) k-space data.
pub fn zero_fill_recon(f: &KSpaceData, mask: &SamplingMask) -> Result<ComplexImage> {
    f.check_same_dims(mask.dims(), "k-space and mask")?;
    idft2_unitary(f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Augment {
    Identity,
    FlipH,
    FlipV,
    Rot90,
    Rot180,
    Rot270,
}

/// Rigid transform of the pixel grid. Rotations are counter-clockwise and
/// need a square image.
pub fn augment(m: &ComplexImage, op: Augment) -> Result<ComplexImage> {
    let (h, w) = m.dims();
    let rotation = matches!(op, Augment::Rot90 | Augment::Rot180 | Augment::Rot270);
    if rotation && h != w {
        return dim_err(format!("rotation needs a square image, got {h}x{w}"));
    }
    Ok(ComplexImage::from_fn(h, w, |y, x| match op {
        Augment::Identity => m.at(y, x),
        Augment::FlipH => m.at(y, w - 1 - x),
        Augment::FlipV => m.at(h - 1 - y, x),
        Augment::Rot90 => m.at(x, w - 1 - y),
        Augment::Rot180 => m.at(h - 1 - y, w - 1 - x),
        Augment::Rot270 => m.at(h - 1 - x, y),
    }))
}

/// The eight symmetries of the square: four rotations, each optionally
/// preceded by a horizontal flip.
pub fn dihedral_variants(m: &ComplexImage) -> Result<Vec<ComplexImage>> {
    let rotations = [Augment::Identity, Augment::Rot90, Augment::Rot180, Augment::Rot270];
    let flipped = augment(m, Augment::FlipH)?;
    let mut out = Vec::with_capacity(8);
    for base in [m, &flipped] {
        for r in rotations {
            out.push(augment(base, r)?);
        }
    }
    Ok(out)
}
