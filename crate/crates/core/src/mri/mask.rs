//! Variable-density Poisson-disk undersampling masks.
//!
//! Points are visited in a seeded random order and accepted when no earlier
//! accepted point lies closer than the local exclusion radius. The radius
//! grows linearly with distance from the k-space centre; a global scale on
//! it is bisected until the sampled fraction reaches `1/R`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::grid::KSpaceData;
use crate::error::{dim_err, Error, Result};

/// Default side of the fully sampled centre block, as a fraction of the
/// smaller image side.
pub const DEFAULT_CENTER_FRACTION: f64 = 0.0625;

/// Relative tolerance on the sampled fraction around `1/R`.
pub const FRACTION_TOLERANCE: f64 = 0.05;

const MAX_BISECTION_STEPS: usize = 40;
/// Stop bisecting once inside this relative band.
const EARLY_STOP_BAND: f64 = 0.01;
/// Exclusion radius at the edge relative to the centre.
const RADIUS_SLOPE: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
    accel: f64,
    seed: u64,
}

impl SamplingMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>, accel: f64, seed: u64) -> Result<Self> {
        if data.len() != height * width {
            return dim_err(format!("{height}x{width} mask needs {} entries, got {}", height * width, data.len()));
        }
        Ok(SamplingMask { height, width, data, accel, seed })
    }

    pub fn full(height: usize, width: usize) -> Self {
        SamplingMask { height, width, data: vec![true; height * width], accel: 1.0, seed: 0 }
    }

    pub fn empty(height: usize, width: usize) -> Self {
        SamplingMask { height, width, data: vec![false; height * width], accel: f64::INFINITY, seed: 0 }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn accel(&self) -> f64 {
        self.accel
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn sampled_count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn sampled_fraction(&self) -> f64 {
        self.sampled_count() as f64 / self.data.len() as f64
    }

    /// `mask ⊙ k`.
    pub fn apply(&self, k: &KSpaceData) -> Result<KSpaceData> {
        k.check_same_dims(self.dims(), "mask and k-space")?;
        let data = k
            .data()
            .iter()
            .zip(&self.data)
            .map(|(z, &m)| if m { *z } else { Default::default() })
            .collect();
        KSpaceData::new(self.height, self.width, data)
    }

    pub(crate) fn apply_in_place(&self, buf: &mut [num_complex::Complex64]) {
        for (z, &m) in buf.iter_mut().zip(&self.data) {
            if !m {
                *z = Default::default();
            }
        }
    }
}

/// Geometry shared by every trial scale of one generation run.
struct DiskSampler {
    h: usize,
    w: usize,
    /// Storage indices in visiting order, centre block excluded.
    order: Vec<usize>,
    /// Radius at scale 1 for every storage index.
    base_radius: Vec<f64>,
    center: Vec<bool>,
}

impl DiskSampler {
    fn new(h: usize, w: usize, center_side: usize, seed: u64) -> Self {
        let (ch, cw) = (h as f64 / 2.0, w as f64 / 2.0);
        let mut base_radius = vec![0.0; h * w];
        let mut center = vec![false; h * w];
        let (by, bx) = (h / 2 - center_side / 2, w / 2 - center_side / 2);
        for yc in 0..h {
            for xc in 0..w {
                // Centred coordinates to DC-at-origin storage.
                let idx = ((yc + h / 2) % h) * w + (xc + w / 2) % w;
                let dy = (yc as f64 - ch) / ch;
                let dx = (xc as f64 - cw) / cw;
                let rho = ((dy * dy + dx * dx) / 2.0).sqrt();
                base_radius[idx] = 1.0 + RADIUS_SLOPE * rho;
                center[idx] = (by..by + center_side).contains(&yc) && (bx..bx + center_side).contains(&xc);
            }
        }
        let mut order: Vec<usize> = (0..h * w).filter(|&i| !center[i]).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        DiskSampler { h, w, order, base_radius, center }
    }

    /// Distances are measured on the centred (unwrapped) grid. A candidate is
    /// rejected if any accepted point lies strictly within its radius.
    fn sample(&self, scale: f64) -> Vec<bool> {
        self.sample_with(scale, None)
    }

    /// `force_list` pins the neighbour search strategy; both give the same mask.
    fn sample_with(&self, scale: f64, force_list: Option<bool>) -> Vec<bool> {
        let (h, w) = (self.h, self.w);
        let mut taken = self.center.clone();
        let to_centred = |i: usize| ((((i / w) + h / 2) % h) as isize, (((i % w) + w / 2) % w) as isize);
        let to_storage = |yc: usize, xc: usize| ((yc + h / 2) % h) * w + (xc + w / 2) % w;
        let mut accepted: Vec<(isize, isize)> = (0..h * w).filter(|&i| taken[i]).map(to_centred).collect();
        for &i in &self.order {
            let r = scale * self.base_radius[i];
            let r2 = r * r;
            let reach = r.ceil() as isize;
            let (yc, xc) = to_centred(i);
            let window = (2 * reach + 1) * (2 * reach + 1);
            let blocked = if force_list.unwrap_or((accepted.len() as isize) < window) {
                accepted.iter().any(|&(y, x)| (((y - yc) * (y - yc) + (x - xc) * (x - xc)) as f64) < r2)
            } else {
                let mut hit = false;
                'scan: for dy in -reach..=reach {
                    let y = yc + dy;
                    if y < 0 || y >= h as isize {
                        continue;
                    }
                    for dx in -reach..=reach {
                        let x = xc + dx;
                        if x < 0 || x >= w as isize || (dy == 0 && dx == 0) {
                            continue;
                        }
                        if ((dy * dy + dx * dx) as f64) < r2 && taken[to_storage(y as usize, x as usize)] {
                            hit = true;
                            break 'scan;
                        }
                    }
                }
                hit
            };
            if !blocked {
                taken[i] = true;
                accepted.push((yc, xc));
            }
        }
        taken
    }
}

/// Generate a variable-density Poisson-disk mask with a fully sampled
/// centre block of side `center_fraction·min(H, W)`.
pub fn gen_poisson_mask(height: usize, width: usize, accel: f64, center_fraction: f64, seed: u64) -> Result<SamplingMask> {
    if !(accel.is_finite() && accel >= 1.0) {
        return Err(Error::Parameter(format!("acceleration must be finite and >= 1, got {accel}")));
    }
    if height == 0 || width == 0 {
        return dim_err("mask dimensions must be positive");
    }
    if accel == 1.0 {
        return SamplingMask::new(height, width, vec![true; height * width], 1.0, seed);
    }
    let side = center_fraction * height.min(width) as f64;
    if !(side >= 2.0) {
        return Err(Error::Parameter(format!(
            "centre block side {side:.2} px is below 2 (centre fraction {center_fraction})"
        )));
    }
    let side = (side.round() as usize).min(height.min(width));
    let total = (height * width) as f64;
    let target = 1.0 / accel;
    if (side * side) as f64 / total > target * (1.0 + FRACTION_TOLERANCE) {
        return Err(Error::Generation(format!(
            "centre block alone samples {:.4} of k-space, above the 1/{accel} target",
            (side * side) as f64 / total
        )));
    }

    let sampler = DiskSampler::new(height, width, side, seed);
    let fraction = |m: &[bool]| m.iter().filter(|&&b| b).count() as f64 / total;
    let (mut lo, mut hi) = (0.0, height.max(width) as f64);
    let mut best: Option<(f64, Vec<bool>)> = None;
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let m = sampler.sample(mid);
        let f = fraction(&m);
        let miss = (f - target).abs() / target;
        if best.as_ref().is_none_or(|(b, _)| miss < *b) {
            best = Some((miss, m));
        }
        if miss <= EARLY_STOP_BAND {
            break;
        }
        if f > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    match best {
        Some((miss, data)) if miss <= FRACTION_TOLERANCE => SamplingMask::new(height, width, data, accel, seed),
        Some((miss, _)) => Err(Error::Generation(format!(
            "closest sampled fraction misses 1/{accel} by {:.1}% after {MAX_BISECTION_STEPS} bisection steps",
            miss * 100.0
        ))),
        None => unreachable!("at least one bisection step runs"),
    }
}
