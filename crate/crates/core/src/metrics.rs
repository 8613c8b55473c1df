//! Image quality metrics on magnitude images. The dynamic range is always
//! taken from the reference.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mri::ComplexImage;

const SSIM_RADIUS: usize = 5;
const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    /// `+∞` for a perfect reconstruction.
    pub psnr: f64,
    pub ssim: f64,
    pub nmse: f64,
}

impl MetricsReport {
    pub fn compute(reference: &ComplexImage, recon: &ComplexImage) -> Result<Self> {
        Ok(MetricsReport { psnr: psnr(reference, recon)?, ssim: ssim(reference, recon)?, nmse: nmse(reference, recon)? })
    }

    /// JSON object with keys `psnr`, `ssim`, `nmse`; an infinite PSNR is
    /// written as the string `"inf"`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "psnr": json_number(self.psnr),
            "ssim": json_number(self.ssim),
            "nmse": json_number(self.nmse),
        })
    }
}

pub(crate) fn json_number(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else if v.is_nan() {
        serde_json::json!("nan")
    } else if v > 0.0 {
        serde_json::json!("inf")
    } else {
        serde_json::json!("-inf")
    }
}

fn magnitudes(reference: &ComplexImage, recon: &ComplexImage) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    recon.check_same_dims(reference.dims(), "reconstruction and reference")?;
    let r = reference.magnitude();
    let peak = r.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Metric("reference image is identically zero".into()));
    }
    Ok((r, recon.magnitude(), peak))
}

/// `20·log10(max|ref| / rmse)`.
pub fn psnr(reference: &ComplexImage, recon: &ComplexImage) -> Result<f64> {
    let (r, x, peak) = magnitudes(reference, recon)?;
    let mse = r.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / r.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (peak / mse.sqrt()).log10())
}

/// `‖|recon| − |ref|‖² / ‖|ref|‖²`.
pub fn nmse(reference: &ComplexImage, recon: &ComplexImage) -> Result<f64> {
    let (r, x, _) = magnitudes(reference, recon)?;
    let num: f64 = r.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = r.iter().map(|a| a * a).sum();
    Ok(num / den)
}

/// Mean local SSIM with an 11×11 Gaussian window. Near the border the window
/// is truncated to the image and renormalized, so every pixel contributes.
pub fn ssim(reference: &ComplexImage, recon: &ComplexImage) -> Result<f64> {
    let (r, x, peak) = magnitudes(reference, recon)?;
    let (h, w) = reference.dims();
    let c1 = (K1 * peak).powi(2);
    let c2 = (K2 * peak).powi(2);
    let g: Vec<f64> = (0..=2 * SSIM_RADIUS)
        .map(|i| {
            let d = i as f64 - SSIM_RADIUS as f64;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();

    let mut total = 0.0;
    for y in 0..h {
        let y0 = y.saturating_sub(SSIM_RADIUS);
        let y1 = (y + SSIM_RADIUS).min(h - 1);
        for xc in 0..w {
            let x0 = xc.saturating_sub(SSIM_RADIUS);
            let x1 = (xc + SSIM_RADIUS).min(w - 1);
            let (mut sw, mut mr, mut mx, mut rr, mut xx, mut rx) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            for yy in y0..=y1 {
                let gy = g[yy + SSIM_RADIUS - y];
                for xi in x0..=x1 {
                    let wt = gy * g[xi + SSIM_RADIUS - xc];
                    let (a, b) = (r[yy * w + xi], x[yy * w + xi]);
                    sw += wt;
                    mr += wt * a;
                    mx += wt * b;
                    rr += wt * a * a;
                    xx += wt * b * b;
                    rx += wt * a * b;
                }
            }
            let (mr, mx) = (mr / sw, mx / sw);
            let vr = rr / sw - mr * mr;
            let vx = xx / sw - mx * mx;
            let cov = rx / sw - mr * mx;
            total += ((2.0 * mr * mx + c1) * (2.0 * cov + c2)) / ((mr * mr + mx * mx + c1) * (vr + vx + c2));
        }
    }
    Ok(total / (h * w) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn real_image(vals: &[f64], h: usize, w: usize) -> ComplexImage {
        ComplexImage::new(h, w, vals.iter().map(|&v| Complex64::new(v, 0.0)).collect()).unwrap()
    }

    fn random(h: usize, w: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..h * w).map(|_| rng.random_range(0.0..1.0)).collect()
    }

    /// Straight-line SSIM on an 8×8 array: explicit 2-D Gaussian weights per
    /// pixel over the in-bounds neighbourhood, two-pass variance.
    fn ssim_oracle(a: &[f64], b: &[f64], n: usize) -> f64 {
        let peak = a.iter().copied().fold(0.0, f64::max);
        let (c1, c2) = ((0.01 * peak).powi(2), (0.03 * peak).powi(2));
        let mut acc = 0.0;
        for y in 0..n as i64 {
            for x in 0..n as i64 {
                let mut pts = Vec::new();
                for dy in -5i64..=5 {
                    for dx in -5i64..=5 {
                        let (yy, xx) = (y + dy, x + dx);
                        if yy >= 0 && xx >= 0 && yy < n as i64 && xx < n as i64 {
                            let wt = (-((dy * dy + dx * dx) as f64) / 4.5).exp();
                            let i = (yy * n as i64 + xx) as usize;
                            pts.push((wt, a[i], b[i]));
                        }
                    }
                }
                let s: f64 = pts.iter().map(|p| p.0).sum();
                let ma = pts.iter().map(|p| p.0 * p.1).sum::<f64>() / s;
                let mb = pts.iter().map(|p| p.0 * p.2).sum::<f64>() / s;
                let va = pts.iter().map(|p| p.0 * (p.1 - ma).powi(2)).sum::<f64>() / s;
                let vb = pts.iter().map(|p| p.0 * (p.2 - mb).powi(2)).sum::<f64>() / s;
                let cv = pts.iter().map(|p| p.0 * (p.1 - ma) * (p.2 - mb)).sum::<f64>() / s;
                acc += (2.0 * ma * mb + c1) * (2.0 * cv + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
        }
        acc / (n * n) as f64
    }

    #[test]
    fn identical_images() {
        let a = real_image(&random(8, 8, 1), 8, 8);
        let m = MetricsReport::compute(&a, &a).unwrap();
        assert_eq!(m.nmse, 0.0);
        assert!((m.ssim - 1.0).abs() < 1e-12);
        assert_eq!(m.psnr, f64::INFINITY);
        assert_eq!(m.to_json()["psnr"], "inf");
    }

    #[test]
    fn zero_recon_has_unit_nmse_and_zero_reference_is_rejected() {
        let a = real_image(&random(8, 8, 2), 8, 8);
        let z = ComplexImage::zeros(8, 8);
        assert!((nmse(&a, &z).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(psnr(&z, &a), Err(Error::Metric(_))));
        assert!(ssim(&a, &ComplexImage::zeros(4, 4)).is_err());
    }

    #[test]
    fn psnr_and_ssim_match_scalar_oracle_on_8x8() {
        for seed in 0..5 {
            let ra = random(8, 8, 10 + seed);
            let rb: Vec<f64> = ra.iter().zip(random(8, 8, 20 + seed)).map(|(a, n)| a + 0.2 * (n - 0.5)).collect();
            let (a, b) = (real_image(&ra, 8, 8), real_image(&rb, 8, 8));
            let peak = ra.iter().copied().fold(0.0, f64::max);
            let mut se = 0.0;
            for i in 0..64 {
                se += (ra[i] - rb[i].abs()).powi(2);
            }
            let want = 20.0 * (peak / (se / 64.0).sqrt()).log10();
            assert!((psnr(&a, &b).unwrap() - want).abs() < 1e-9);
            let rb_mag: Vec<f64> = rb.iter().map(|v| v.abs()).collect();
            assert!((ssim(&a, &b).unwrap() - ssim_oracle(&ra, &rb_mag, 8)).abs() < 1e-9);
        }
    }

    #[test]
    fn metrics_use_magnitude_only() {
        let ra = random(8, 8, 5);
        let a = real_image(&ra, 8, 8);
        let rotated = ComplexImage::from_fn(8, 8, |y, x| Complex64::from_polar(ra[y * 8 + x], 0.3 * (x + y) as f64));
        let m = MetricsReport::compute(&a, &rotated).unwrap();
        assert!(m.nmse < 1e-28);
        assert!((m.ssim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_of_additive_noise_is_analytic() {
        let n = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base: Vec<f64> = (0..n * n).map(|i| 0.5 + 0.4 * ((i % 7) as f64 / 7.0)).collect();
        let noisy: Vec<f64> = base.iter().map(|v| v + 0.01 * (rng.random_range(0.0..1.0) - 0.5) * 12f64.sqrt()).collect();
        let rms = (base.iter().zip(&noisy).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (n * n) as f64).sqrt();
        let peak = base.iter().copied().fold(0.0, f64::max);
        let got = psnr(&real_image(&base, n, n), &real_image(&noisy, n, n)).unwrap();
        assert!((got - 20.0 * (peak / rms).log10()).abs() < 1e-9);
        assert!((got - 20.0 * (peak / 0.01).log10()).abs() < 0.2);
    }
}
