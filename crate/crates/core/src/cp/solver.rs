//! Chambolle-Pock iterations for
//! `min_m ½‖Am − f‖² + λ‖Ψm‖₁`.

use std::io::Write;

use serde::Serialize;

use super::haar::SparseTransform;
use super::prox::{dual_prox_data, prox_l1_analysis};
use crate::error::{Error, Result};
use crate::mri::{ComplexImage, EncodingOperator, KSpaceData, SamplingMask};

/// Operator norm bound of `A` (unitary transform composed with a projection).
const OPERATOR_NORM: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct CpConfig {
    pub sigma: f64,
    pub tau: f64,
    pub theta: f64,
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop once `‖m_{n+1} − m_n‖ / ‖m_n‖` drops below this.
    pub tolerance: f64,
    pub transform: SparseTransform,
}

impl Default for CpConfig {
    fn default() -> Self {
        CpConfig {
            sigma: 1.0,
            tau: 1.0,
            theta: 1.0,
            lambda: 0.0,
            max_iters: 500,
            tolerance: 1e-6,
            transform: SparseTransform::Haar(2),
        }
    }
}

impl CpConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        CpConfig { lambda, ..Default::default() }
    }

    /// Checks the step-size condition `τσ‖A‖² ≤ 1` and parameter ranges.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be > 0, got {}", self.sigma));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be > 0, got {}", self.tau));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("theta must lie in [0, 1], got {}", self.theta));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if self.tau * self.sigma * OPERATOR_NORM * OPERATOR_NORM > 1.0 + 1e-12 {
            return bad(format!(
                "step sizes violate tau*sigma*|A|^2 <= 1: {} * {}",
                self.tau, self.sigma
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub primal: f64,
    /// Absent when `λ = 0`.
    pub gap: Option<f64>,
    pub rel_change: f64,
}

#[derive(Clone, Debug)]
pub struct CpState {
    pub m: ComplexImage,
    pub mbar: ComplexImage,
    pub d: KSpaceData,
    pub iter: usize,
    pub history: Vec<IterRecord>,
}

impl CpState {
    /// `m₀ = m̄₀ = A*f`, `d₀ = 0`.
    pub fn init(op: &EncodingOperator, f: &KSpaceData) -> Result<Self> {
        let m = op.adjoint(f)?;
        Ok(CpState { mbar: m.clone(), m, d: KSpaceData::zeros(f.height(), f.width()), iter: 0, history: Vec::new() })
    }

    pub fn with_start(m: ComplexImage, d: KSpaceData) -> Self {
        CpState { mbar: m.clone(), m, d, iter: 0, history: Vec::new() }
    }
}

fn l1_norm(c: &ComplexImage) -> f64 {
    c.data().iter().map(|z| z.norm()).sum()
}

/// `½‖Am − f‖² + λ‖Ψm‖₁`.
pub fn primal_objective(m: &ComplexImage, f: &KSpaceData, op: &EncodingOperator, cfg: &CpConfig) -> Result<f64> {
    let r = op.forward(m)?.lin_comb(1.0, f, -1.0);
    let reg = if cfg.lambda > 0.0 { cfg.lambda * l1_norm(&cfg.transform.forward(m)?) } else { 0.0 };
    Ok(0.5 * r.norm_sqr() + reg)
}

/// `P(m) − D(d̃)` with `D(d) = −½‖d‖² − Re⟨d, f⟩` and the dual point scaled
/// into the feasible set `‖ΨA*d‖_∞ ≤ λ`.
pub fn duality_gap(m: &ComplexImage, d: &KSpaceData, f: &KSpaceData, op: &EncodingOperator, cfg: &CpConfig) -> Result<f64> {
    if cfg.lambda <= 0.0 {
        return Err(Error::Contract(
            "duality gap needs lambda > 0; with lambda = 0 use the data residual".into(),
        ));
    }
    let coeffs = cfg.transform.forward(&op.adjoint(d)?)?;
    let sup = coeffs.max_abs();
    let s = if sup > cfg.lambda { cfg.lambda / sup } else { 1.0 };
    let dt = d.scaled(s);
    let dual = -0.5 * dt.norm_sqr() - dt.dot(f).re;
    Ok(primal_objective(m, f, op, cfg)? - dual)
}

/// One Chambolle-Pock step: dual prox, primal prox, extrapolation.
pub fn cp_iterate(state: &mut CpState, cfg: &CpConfig, op: &EncodingOperator, f: &KSpaceData) -> Result<()> {
    let am = op.forward(&state.mbar)?;
    let d = dual_prox_data(&state.d.lin_comb(1.0, &am, cfg.sigma), f, cfg.sigma)?;
    let step = state.m.lin_comb(1.0, &op.adjoint(&d)?, -cfg.tau);
    let m_next = prox_l1_analysis(&step, cfg.tau * cfg.lambda, cfg.transform)?;
    let mbar = m_next.lin_comb(1.0 + cfg.theta, &state.m, -cfg.theta);

    let prev_norm = state.m.norm();
    let change = m_next.lin_comb(1.0, &state.m, -1.0).norm();
    let rel_change = match (change == 0.0, prev_norm == 0.0) {
        (true, _) => 0.0,
        (false, true) => f64::INFINITY,
        (false, false) => change / prev_norm,
    };

    state.iter += 1;
    if !m_next.is_finite() || !d.is_finite() {
        return Err(Error::Divergence { iter: state.iter });
    }
    state.m = m_next;
    state.mbar = mbar;
    state.d = d;

    let primal = primal_objective(&state.m, f, op, cfg)?;
    let gap = if cfg.lambda > 0.0 { Some(duality_gap(&state.m, &state.d, f, op, cfg)?) } else { None };
    state.history.push(IterRecord { iter: state.iter, primal, gap, rel_change });
    Ok(())
}

#[derive(Clone, Debug)]
pub struct CpDiagnostics {
    pub history: Vec<IterRecord>,
    pub converged: bool,
    pub iterations: usize,
}

impl CpDiagnostics {
    /// One JSON object per iteration: `{"iter":…,"primal":…,"gap":…,"rel_change":…}`.
    pub fn write_json_lines(&self, mut out: impl Write) -> std::io::Result<()> {
        for rec in &self.history {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Iterate from `m₀ = m̄₀ = A*f`, `d₀ = 0` until the relative iterate change
/// falls below the tolerance or the iteration budget runs out.
pub fn cp_solve(f: &KSpaceData, mask: &SamplingMask, cfg: &CpConfig) -> Result<(ComplexImage, CpDiagnostics)> {
    cfg.validate()?;
    let op = EncodingOperator::new(mask.clone())?;
    let mut state = CpState::init(&op, f)?;
    let mut converged = false;
    while state.iter < cfg.max_iters {
        cp_iterate(&mut state, cfg, &op, f)?;
        if state.history.last().is_some_and(|r| r.rel_change < cfg.tolerance) {
            converged = true;
            break;
        }
    }
    let diagnostics = CpDiagnostics { iterations: state.iter, history: state.history, converged };
    Ok((state.m, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mri::{dft2_unitary, gen_phantom, gen_poisson_mask, idft2_unitary, simulate_acquisition};
    use num_complex::Complex64;

    fn problem(size: usize, accel: f64, seed: u64) -> (ComplexImage, SamplingMask, KSpaceData) {
        let img = gen_phantom(size, seed).unwrap();
        let mask = if accel == 1.0 { SamplingMask::full(size, size) } else { gen_poisson_mask(size, size, accel, 0.125, seed).unwrap() };
        let f = simulate_acquisition(&img, &mask, 0.0, seed).unwrap();
        (img, mask, f)
    }

    fn max_diff(a: &ComplexImage, b: &ComplexImage) -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn first_iterate_from_zero_is_half_adjoint() {
        let (_, mask, f) = problem(16, 1.0, 3);
        let op = EncodingOperator::new(mask).unwrap();
        let mut st = CpState::with_start(ComplexImage::zeros(16, 16), KSpaceData::zeros(16, 16));
        cp_iterate(&mut st, &CpConfig::default(), &op, &f).unwrap();
        let want = op.adjoint(&f).unwrap().scaled(0.5);
        assert!(max_diff(&st.m, &want) < 1e-14);
        assert!((st.d.lin_comb(1.0, &f, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn no_extrapolation_keeps_mbar_equal_to_m() {
        let (_, mask, f) = problem(16, 4.0, 5);
        let op = EncodingOperator::new(mask).unwrap();
        let cfg = CpConfig { theta: 0.0, lambda: 0.01, ..Default::default() };
        let mut st = CpState::init(&op, &f).unwrap();
        for _ in 0..5 {
            cp_iterate(&mut st, &cfg, &op, &f).unwrap();
            assert_eq!(st.m, st.mbar);
        }
    }

    #[test]
    fn unregularized_step_is_dual_prox_then_gradient_step() {
        let (_, mask, f) = problem(16, 4.0, 8);
        let op = EncodingOperator::new(mask).unwrap();
        let cfg = CpConfig { sigma: 0.5, tau: 2.0, theta: 0.7, ..Default::default() };
        let mut st = CpState::init(&op, &f).unwrap();
        cp_iterate(&mut st, &cfg, &op, &f).unwrap();
        let m0 = op.adjoint(&f).unwrap();
        let am = op.forward(&m0).unwrap();
        let d = dual_prox_data(&am.scaled(0.5), &f, 0.5).unwrap();
        let m1 = m0.lin_comb(1.0, &op.adjoint(&d).unwrap(), -2.0);
        assert!(max_diff(&st.m, &m1) < 1e-14);
        assert!(max_diff(&st.mbar, &m1.lin_comb(1.7, &m0, -0.7)) < 1e-14);
    }

    #[test]
    fn full_mask_converges_to_inverse_transform() {
        let (img, mask, f) = problem(32, 1.0, 11);
        let (m, diag) = cp_solve(&f, &mask, &CpConfig::default()).unwrap();
        let op = EncodingOperator::new(mask).unwrap();
        assert!(op.forward(&m).unwrap().lin_comb(1.0, &f, -1.0).norm() < 1e-8);
        assert!(max_diff(&m, &idft2_unitary(&f).unwrap()) < 1e-8);
        assert!(max_diff(&m, &img) < 1e-8);
        assert!(diag.converged);
    }

    #[test]
    fn undersampled_least_squares_fits_sampled_entries() {
        let (_, mask, f) = problem(64, 4.0, 2);
        let cfg = CpConfig { max_iters: 200, tolerance: 0.0, ..Default::default() };
        let (m, diag) = cp_solve(&f, &mask, &cfg).unwrap();
        let op = EncodingOperator::new(mask).unwrap();
        assert!(op.forward(&m).unwrap().lin_comb(1.0, &f, -1.0).norm() < 1e-6);
        assert_eq!(diag.iterations, 200);
        assert!(diag.history.iter().all(|r| r.gap.is_none()));
    }

    #[test]
    fn gap_at_zero_dual_is_primal_and_lambda_zero_is_rejected() {
        let (img, mask, f) = problem(16, 4.0, 4);
        let op = EncodingOperator::new(mask).unwrap();
        let cfg = CpConfig::with_lambda(0.05);
        let zero = KSpaceData::zeros(16, 16);
        let g = duality_gap(&img, &zero, &f, &op, &cfg).unwrap();
        assert_eq!(g, primal_objective(&img, &f, &op, &cfg).unwrap());
        assert!(g >= 0.0);
        assert!(matches!(duality_gap(&img, &zero, &f, &op, &CpConfig::default()), Err(Error::Contract(_))));
    }

    #[test]
    fn gap_at_grid_oracle_optimum_is_small() {
        // full mask, identity transform: the problem separates per pixel into
        // min_w ½(w − x)² + λ|w| with x = F*f, real here
        let lambda = 0.3;
        let x = ComplexImage::from_fn(4, 4, |y, c| Complex64::new(((y * 4 + c) as f64 * 0.37).sin() * 1.5, 0.0));
        let f = dft2_unitary(&x).unwrap();
        let op = EncodingOperator::new(SamplingMask::full(4, 4)).unwrap();
        let cfg = CpConfig { lambda, transform: SparseTransform::Identity, ..Default::default() };
        let n = 80_000;
        let m = ComplexImage::from_fn(4, 4, |y, c| {
            let xv = x.at(y, c).re;
            let best = (0..=n)
                .map(|i| -4.0 + i as f64 * 1e-4)
                .min_by(|a, b| {
                    let phi = |w: f64| 0.5 * (w - xv) * (w - xv) + lambda * w.abs();
                    phi(*a).total_cmp(&phi(*b))
                })
                .unwrap();
            Complex64::new(best, 0.0)
        });
        let d = op.forward(&m).unwrap().lin_comb(1.0, &f, -1.0);
        let g = duality_gap(&m, &d, &f, &op, &cfg).unwrap();
        assert!((-1e-10..1e-3).contains(&g), "gap {g}");
    }

    #[test]
    fn gap_is_nonnegative_and_eventually_nonincreasing() {
        let (_, mask, f) = problem(32, 4.0, 9);
        let cfg = CpConfig { lambda: 0.01, max_iters: 150, tolerance: 0.0, ..Default::default() };
        let (_, diag) = cp_solve(&f, &mask, &cfg).unwrap();
        let gaps: Vec<f64> = diag.history.iter().map(|r| r.gap.unwrap()).collect();
        assert!(gaps.iter().all(|&g| g >= -1e-10));
        for w in gaps[10..].windows(2) {
            assert!(w[1] <= w[0] + 1e-8, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn invalid_steps_and_divergence() {
        let (_, mask, f) = problem(16, 4.0, 1);
        let bad = CpConfig { sigma: 2.0, tau: 1.0, ..Default::default() };
        assert!(matches!(cp_solve(&f, &mask, &bad), Err(Error::Parameter(_))));
        let mut poisoned = f.clone();
        poisoned.data_mut()[0] = Complex64::new(f64::NAN, 0.0);
        let full = SamplingMask::full(16, 16);
        assert!(matches!(cp_solve(&poisoned, &full, &CpConfig::default()), Err(Error::Divergence { iter: 1 })));
    }

    #[test]
    fn diagnostics_are_json_lines() {
        let (_, mask, f) = problem(16, 4.0, 6);
        let cfg = CpConfig { lambda: 0.01, max_iters: 3, ..Default::default() };
        let (_, diag) = cp_solve(&f, &mask, &cfg).unwrap();
        let mut buf = Vec::new();
        diag.write_json_lines(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        let v: serde_json::Value = serde_json::from_str(lines[2]).unwrap();
        assert_eq!(v["iter"], 3);
        for key in ["primal", "gap", "rel_change"] {
            assert!(v[key].is_number(), "{key}");
        }
    }
}
