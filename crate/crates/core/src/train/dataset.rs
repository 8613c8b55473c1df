use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mri::io::read_cplx;
use crate::mri::{dihedral_variants, gen_phantom, gen_poisson_mask, simulate_acquisition, ComplexImage, KSpaceData, SamplingMask};

/// One training pair: `f = mask ⊙ (F m_ref + noise)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub m_ref: ComplexImage,
    pub f: KSpaceData,
    pub mask: SamplingMask,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    /// Phantoms with seeds `seed, seed + 1, …`.
    Synthetic { count: usize, size: usize, seed: u64 },
    /// Every `*.cplx` file in the directory, in file-name order.
    Directory(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskSpec {
    pub accel: f64,
    pub center_fraction: f64,
    pub seed: u64,
}

/// Independent seed for stream `stream`, item `index`.
pub(crate) fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    // splitmix64 finalizer over a combined word
    let mut z = base ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const MASK_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

fn load_directory(dir: &Path) -> Result<Vec<ComplexImage>> {
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    let mut paths = Vec::new();
    for e in entries {
        let p = e.map_err(|source| Error::Io { path: dir.to_path_buf(), source })?.path();
        if p.extension().is_some_and(|x| x == "cplx") {
            paths.push(p);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no .cplx files in {}", dir.display())));
    }
    paths.iter().map(read_cplx).collect()
}

fn normalize(img: ComplexImage) -> Result<ComplexImage> {
    let peak = img.max_abs();
    if !(peak > 0.0) {
        return Err(Error::Config("ground-truth image is identically zero".into()));
    }
    Ok(img.scaled(1.0 / peak))
}

/// Ground truths normalized to peak magnitude 1. With `augment`, each base
/// image is followed by its 8 dihedral variants (the identity first), so
/// consecutive runs of 8 samples share one base image. Every sample draws
/// its own mask and noise.
pub fn build_dataset(source: &DataSource, mask: MaskSpec, noise_sigma: f64, augment: bool) -> Result<Vec<Sample>> {
    let bases = match source {
        DataSource::Synthetic { count, size, seed } => {
            (0..*count).map(|i| gen_phantom(*size, seed.wrapping_add(i as u64))).collect::<Result<Vec<_>>>()?
        }
        DataSource::Directory(dir) => load_directory(dir)?,
    };
    let mut images = Vec::with_capacity(bases.len() * if augment { 8 } else { 1 });
    for b in bases {
        let b = normalize(b)?;
        if augment {
            images.extend(dihedral_variants(&b)?);
        } else {
            images.push(b);
        }
    }
    images
        .into_iter()
        .enumerate()
        .map(|(i, m_ref)| {
            let (h, w) = m_ref.dims();
            let i = i as u64;
            let mask_seed = derive_seed(mask.seed, MASK_STREAM, i);
            let smask = gen_poisson_mask(h, w, mask.accel, mask.center_fraction, mask_seed)?;
            let f = simulate_acquisition(&m_ref, &smask, noise_sigma, derive_seed(mask.seed, NOISE_STREAM, i))?;
            Ok(Sample { m_ref, f, mask: smask })
        })
        .collect()
}
