//! Randomized ellipse phantoms with a smooth phase.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fft::check_pow2;
use super::grid::ComplexImage;
use crate::error::Result;

#[derive(Clone, Debug)]
struct Ellipse {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    angle: f64,
    intensity: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        (u / self.a).powi(2) + (v / self.b).powi(2) <= 1.0
    }
}

/// A `size×size` phantom: 5 to 12 ellipses painted in order on an outer
/// "head" ellipse, times `exp(iφ)` for a random quadratic phase `φ`, scaled
/// so the largest magnitude is exactly 1.
pub fn gen_phantom(size: usize, seed: u64) -> Result<ComplexImage> {
    check_pow2(size, size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(5..=12);
    let mut ellipses = Vec::with_capacity(count);
    ellipses.push(Ellipse {
        cx: rng.random_range(-0.05..0.05),
        cy: rng.random_range(-0.05..0.05),
        a: rng.random_range(0.6..0.85),
        b: rng.random_range(0.75..0.95),
        angle: rng.random_range(-0.3..0.3),
        intensity: rng.random_range(0.5..1.0),
    });
    for _ in 1..count {
        ellipses.push(Ellipse {
            cx: rng.random_range(-0.5..0.5),
            cy: rng.random_range(-0.55..0.55),
            a: rng.random_range(0.04..0.35),
            b: rng.random_range(0.04..0.35),
            angle: rng.random_range(0.0..PI),
            intensity: rng.random_range(0.0..=1.0),
        });
    }
    // φ = Σ c_ij xⁱ yʲ, i + j ≤ 2
    let coeffs: [f64; 6] = std::array::from_fn(|_| rng.random_range(-0.5..0.5) * PI);

    let coord = |i: usize| 2.0 * (i as f64 + 0.5) / size as f64 - 1.0;
    let mut img = ComplexImage::from_fn(size, size, |row, col| {
        let (x, y) = (coord(col), coord(row));
        let mag = ellipses
            .iter()
            .filter(|e| e.contains(x, y))
            .last()
            .map_or(0.0, |e| e.intensity);
        let phase = coeffs[0]
            + coeffs[1] * x
            + coeffs[2] * y
            + coeffs[3] * x * x
            + coeffs[4] * x * y
            + coeffs[5] * y * y;
        Complex64::from_polar(mag, phase)
    });
    let peak = img.max_abs();
    if peak > 0.0 {
        img.data_mut().iter_mut().for_each(|z| *z /= peak);
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_magnitude_is_one() {
        for seed in 0..10 {
            let p = gen_phantom(64, seed).unwrap();
            assert!((p.max_abs() - 1.0).abs() < 1e-15);
            assert!(p.is_finite());
        }
    }

    #[test]
    fn same_seed_same_phantom() {
        assert_eq!(gen_phantom(32, 7).unwrap(), gen_phantom(32, 7).unwrap());
    }

    #[test]
    fn distinct_seeds_differ() {
        for s in 0..100u64 {
            let a = gen_phantom(64, 2 * s).unwrap();
            let b = gen_phantom(64, 2 * s + 1).unwrap();
            let diff = a.lin_comb(1.0, &b, -1.0).norm() / a.norm();
            assert!(diff > 0.05, "seeds {} and {}: {diff}", 2 * s, 2 * s + 1);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(gen_phantom(48, 0).is_err());
    }
}
