use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::mri::ComplexImage;

/// Orthonormal 2-D Haar decomposition with the usual quadrant layout: after
/// each level the coarse band sits in the top-left corner.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HaarTransform {
    levels: usize,
}

impl HaarTransform {
    pub fn new(levels: usize) -> Result<Self> {
        if levels == 0 {
            return dim_err("Haar transform needs at least one level");
        }
        Ok(HaarTransform { levels })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    fn check(&self, img: &ComplexImage) -> Result<()> {
        let block = 1usize << self.levels;
        if img.height() % block != 0 || img.width() % block != 0 {
            return dim_err(format!(
                "{}x{} image is not divisible by 2^{} for a {}-level Haar transform",
                img.height(),
                img.width(),
                self.levels,
                self.levels
            ));
        }
        Ok(())
    }

    pub fn forward(&self, img: &ComplexImage) -> Result<ComplexImage> {
        self.check(img)?;
        let (h, w) = img.dims();
        let mut out = img.clone();
        let mut scratch = vec![Complex64::default(); h.max(w)];
        for level in 0..self.levels {
            let (lh, lw) = (h >> level, w >> level);
            let data = out.data_mut();
            for y in 0..lh {
                analyze(&mut data[y * w..y * w + lw], 1, lw, &mut scratch);
            }
            for x in 0..lw {
                analyze(&mut data[x..], w, lh, &mut scratch);
            }
        }
        Ok(out)
    }

    pub fn inverse(&self, coeffs: &ComplexImage) -> Result<ComplexImage> {
        self.check(coeffs)?;
        let (h, w) = coeffs.dims();
        let mut out = coeffs.clone();
        let mut scratch = vec![Complex64::default(); h.max(w)];
        for level in (0..self.levels).rev() {
            let (lh, lw) = (h >> level, w >> level);
            let data = out.data_mut();
            for x in 0..lw {
                synthesize(&mut data[x..], w, lh, &mut scratch);
            }
            for y in 0..lh {
                synthesize(&mut data[y * w..y * w + lw], 1, lw, &mut scratch);
            }
        }
        Ok(out)
    }
}

/// One analysis step on `n` strided samples: averages, then differences.
fn analyze(buf: &mut [Complex64], stride: usize, n: usize, scratch: &mut [Complex64]) {
    let half = n / 2;
    for i in 0..half {
        let a = buf[2 * i * stride];
        let b = buf[(2 * i + 1) * stride];
        scratch[i] = (a + b) * FRAC_1_SQRT_2;
        scratch[half + i] = (a - b) * FRAC_1_SQRT_2;
    }
    for i in 0..n {
        buf[i * stride] = scratch[i];
    }
}

fn synthesize(buf: &mut [Complex64], stride: usize, n: usize, scratch: &mut [Complex64]) {
    let half = n / 2;
    for i in 0..half {
        let lo = buf[i * stride];
        let hi = buf[(half + i) * stride];
        scratch[2 * i] = (lo + hi) * FRAC_1_SQRT_2;
        scratch[2 * i + 1] = (lo - hi) * FRAC_1_SQRT_2;
    }
    for i in 0..n {
        buf[i * stride] = scratch[i];
    }
}

/// The sparsifying transform `Ψ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SparseTransform {
    Identity,
    Haar(usize),
}

impl SparseTransform {
    pub fn forward(&self, img: &ComplexImage) -> Result<ComplexImage> {
        match *self {
            SparseTransform::Identity => Ok(img.clone()),
            SparseTransform::Haar(l) => HaarTransform::new(l)?.forward(img),
        }
    }

    pub fn inverse(&self, coeffs: &ComplexImage) -> Result<ComplexImage> {
        match *self {
            SparseTransform::Identity => Ok(coeffs.clone()),
            SparseTransform::Haar(l) => HaarTransform::new(l)?.inverse(coeffs),
        }
    }
}
