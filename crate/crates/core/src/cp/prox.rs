use num_complex::Complex64;

use super::haar::SparseTransform;
use crate::error::{Error, Result};
use crate::mri::{ComplexImage, KSpaceData};

/// `argmin_w t|w| + |w − z|²/2`: shrink the modulus by `t`, keep the phase.
pub fn soft_threshold(z: Complex64, t: f64) -> Complex64 {
    let r = z.norm();
    if r <= t || r == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        z * ((r - t) / r)
    }
}

/// Proximal map of `x ↦ t‖Ψx‖₁` for orthonormal `Ψ`: `Ψ* S_t(Ψ x)`.
pub fn prox_l1_analysis(x: &ComplexImage, t: f64, transform: SparseTransform) -> Result<ComplexImage> {
    if t == 0.0 {
        return Ok(x.clone());
    }
    let mut c = transform.forward(x)?;
    c.data_mut().iter_mut().for_each(|z| *z = soft_threshold(*z, t));
    transform.inverse(&c)
}

/// Proximal map of `σF*` for `F(y) = ½‖y − f‖²`: `(x − σf)/(1 + σ)`.
pub fn dual_prox_data(x: &KSpaceData, f: &KSpaceData, sigma: f64) -> Result<KSpaceData> {
    if !(sigma > 0.0) {
        return Err(Error::Parameter(format!("dual step sigma must be > 0, got {sigma}")));
    }
    x.check_same_dims(f.dims(), "dual variable and data")?;
    let k = 1.0 / (1.0 + sigma);
    Ok(x.lin_comb(k, f, -sigma * k))
}
