//! Radix-2 FFT and the unitary 2-D transform pair.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::grid::{ComplexImage, KSpaceData};
use crate::error::{Error, Result};

pub fn check_pow2(height: usize, width: usize) -> Result<()> {
    if height.is_power_of_two() && width.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::UnsupportedSize { height, width })
    }
}

/// In-place unnormalized DFT of a power-of-two length buffer. `inverse`
/// flips the sign of the exponent.
pub fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let twiddles: Vec<Complex64> =
        (0..n / 2).map(|k| Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / n as f64)).collect();
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = buf[start + k];
                let b = buf[start + k + half] * twiddles[k * stride];
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Unnormalized 2-D transform of a row-major `h×w` buffer.
pub(crate) fn fft2_in_place(data: &mut [Complex64], h: usize, w: usize, inverse: bool) {
    for row in data.chunks_exact_mut(w) {
        fft_in_place(row, inverse);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = data[y * w + x];
        }
        fft_in_place(&mut col, inverse);
        for y in 0..h {
            data[y * w + x] = col[y];
        }
    }
}

/// Orthonormal forward transform, `1/√(HW)` scaling.
pub fn dft2_unitary(img: &ComplexImage) -> Result<KSpaceData> {
    let (h, w) = img.dims();
    check_pow2(h, w)?;
    let mut data = img.data().to_vec();
    fft2_in_place(&mut data, h, w, false);
    let s = 1.0 / ((h * w) as f64).sqrt();
    data.iter_mut().for_each(|z| *z *= s);
    KSpaceData::new(h, w, data)
}

pub fn idft2_unitary(k: &KSpaceData) -> Result<ComplexImage> {
    let (h, w) = k.dims();
    check_pow2(h, w)?;
    let mut data = k.data().to_vec();
    fft2_in_place(&mut data, h, w, true);
    let s = 1.0 / ((h * w) as f64).sqrt();
    data.iter_mut().for_each(|z| *z *= s);
    ComplexImage::new(h, w, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(h: usize, w: usize, seed: u64) -> ComplexImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexImage::from_fn(h, w, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    /// Textbook O(N²) DFT.
    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|j| x[j] * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn fft_matches_naive_dft() {
        for n in [1, 2, 4, 8, 32] {
            let x = random_image(1, n, n as u64).into_data();
            let mut y = x.clone();
            fft_in_place(&mut y, false);
            for (a, b) in y.iter().zip(naive_dft(&x)) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn delta_transforms_to_flat_quarter() {
        let mut img = ComplexImage::zeros(4, 4);
        img.data_mut()[0] = Complex64::new(1.0, 0.0);
        let k = dft2_unitary(&img).unwrap();
        for z in k.data() {
            assert!((z - Complex64::new(0.25, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn constant_image_concentrates_at_dc() {
        let c = Complex64::new(0.3, -0.7);
        let img = ComplexImage::from_fn(8, 8, |_, _| c);
        let k = dft2_unitary(&img).unwrap();
        assert!((k.at(0, 0) - c * 8.0).norm() < 1e-12);
        for z in &k.data()[1..] {
            assert!(z.norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let img = random_image(64, 64, 3);
        let k = dft2_unitary(&img).unwrap();
        assert!((k.norm() - img.norm()).abs() < 1e-12 * img.norm().max(1.0));
        let back = idft2_unitary(&k).unwrap();
        for (a, b) in back.data().iter().zip(img.data()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn rectangular_sizes_round_trip() {
        let img = random_image(8, 32, 4);
        let back = idft2_unitary(&dft2_unitary(&img).unwrap()).unwrap();
        for (a, b) in back.data().iter().zip(img.data()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn non_power_of_two_is_rejected() {
        let img = ComplexImage::zeros(48, 64);
        assert!(matches!(dft2_unitary(&img), Err(Error::UnsupportedSize { height: 48, width: 64 })));
        let k = KSpaceData::zeros(64, 12);
        assert!(idft2_unitary(&k).is_err());
    }
}
