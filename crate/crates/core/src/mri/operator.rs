use num_complex::Complex64;

use super::fft::{check_pow2, fft2_in_place};
use super::grid::{read_planar, write_planar, ComplexImage, KSpaceData};
use super::mask::SamplingMask;
use crate::autodiff::{Direction, LinearMap};
use crate::error::Result;

/// `A = M·F`: unitary Fourier transform followed by the sampling projection.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodingOperator {
    mask: SamplingMask,
}

impl EncodingOperator {
    pub fn new(mask: SamplingMask) -> Result<Self> {
        check_pow2(mask.height(), mask.width())?;
        Ok(EncodingOperator { mask })
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn dims(&self) -> (usize, usize) {
        self.mask.dims()
    }

    fn unitary_scale(&self) -> f64 {
        let (h, w) = self.dims();
        1.0 / ((h * w) as f64).sqrt()
    }

    fn forward_raw(&self, data: &mut [Complex64]) {
        let (h, w) = self.dims();
        fft2_in_place(data, h, w, false);
        let s = self.unitary_scale();
        for (z, &m) in data.iter_mut().zip(self.mask.data()) {
            *z = if m { *z * s } else { Complex64::new(0.0, 0.0) };
        }
    }

    fn adjoint_raw(&self, data: &mut [Complex64]) {
        let (h, w) = self.dims();
        self.mask.apply_in_place(data);
        fft2_in_place(data, h, w, true);
        let s = self.unitary_scale();
        data.iter_mut().for_each(|z| *z *= s);
    }

    /// `A m`; entries outside the mask are exactly zero.
    pub fn forward(&self, m: &ComplexImage) -> Result<KSpaceData> {
        m.check_same_dims(self.dims(), "encoding operator and image")?;
        let mut data = m.data().to_vec();
        self.forward_raw(&mut data);
        KSpaceData::new(m.height(), m.width(), data)
    }

    /// `A* d = F⁻¹(M d)`.
    pub fn adjoint(&self, d: &KSpaceData) -> Result<ComplexImage> {
        d.check_same_dims(self.dims(), "encoding operator and k-space")?;
        let mut data = d.data().to_vec();
        self.adjoint_raw(&mut data);
        ComplexImage::new(d.height(), d.width(), data)
    }
}

impl LinearMap for EncodingOperator {
    fn height(&self) -> usize {
        self.mask.height()
    }

    fn width(&self) -> usize {
        self.mask.width()
    }

    fn apply(&self, dir: Direction, input: &[f64], output: &mut [f64]) {
        let mut buf = vec![Complex64::new(0.0, 0.0); input.len() / 2];
        read_planar(input, &mut buf);
        match dir {
            Direction::Forward => self.forward_raw(&mut buf),
            Direction::Adjoint => self.adjoint_raw(&mut buf),
        }
        write_planar(&buf, output);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mri::fft::dft2_unitary;
    use crate::mri::mask::gen_poisson_mask;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_c(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    #[test]
    fn full_mask_is_plain_transform_and_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = ComplexImage::from_fn(16, 16, |_, _| rand_c(&mut rng));
        let a = EncodingOperator::new(SamplingMask::full(16, 16)).unwrap();
        let k = a.forward(&m).unwrap();
        assert_eq!(k, dft2_unitary(&m).unwrap());
        let back = a.adjoint(&k).unwrap();
        for (x, y) in back.data().iter().zip(m.data()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn empty_mask_gives_zero() {
        let m = ComplexImage::from_fn(8, 8, |y, x| Complex64::new(y as f64, x as f64));
        let a = EncodingOperator::new(SamplingMask::empty(8, 8)).unwrap();
        assert!(a.forward(&m).unwrap().data().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn adjoint_identity_and_normal_operator_on_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mask = gen_poisson_mask(32, 32, 4.0, 0.125, 3).unwrap();
        let a = EncodingOperator::new(mask.clone()).unwrap();
        let m = ComplexImage::from_fn(32, 32, |_, _| rand_c(&mut rng));
        let d = KSpaceData::from_fn(32, 32, |_, _| rand_c(&mut rng));
        let lhs = a.forward(&m).unwrap().dot(&d);
        let rhs = m.dot(&a.adjoint(&d).unwrap());
        assert!((lhs - rhs).norm() < 1e-10);

        // A A* d = M d
        let aad = a.forward(&a.adjoint(&d).unwrap()).unwrap();
        for ((z, orig), &s) in aad.data().iter().zip(d.data()).zip(mask.data()) {
            if s {
                assert!((z - orig).norm() < 1e-12);
            } else {
                assert_eq!(z.norm(), 0.0);
            }
        }
    }

    #[test]
    fn planar_apply_matches_complex_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mask = gen_poisson_mask(16, 16, 2.0, 0.125, 5).unwrap();
        let a = EncodingOperator::new(mask).unwrap();
        let m = ComplexImage::from_fn(16, 16, |_, _| rand_c(&mut rng));
        let t = m.to_tensor();
        let mut out = vec![0.0; t.data().len()];
        a.apply(Direction::Forward, t.data(), &mut out);
        let via = KSpaceData::from_planar(16, 16, &out).unwrap();
        assert_eq!(via, a.forward(&m).unwrap());
        let mut back = vec![0.0; out.len()];
        a.apply(Direction::Adjoint, &out, &mut back);
        assert_eq!(ComplexImage::from_planar(16, 16, &back).unwrap(), a.adjoint(&via).unwrap());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = EncodingOperator::new(SamplingMask::full(8, 8)).unwrap();
        assert!(a.forward(&ComplexImage::zeros(8, 16)).is_err());
        assert!(a.adjoint(&KSpaceData::zeros(4, 8)).is_err());
    }
}
