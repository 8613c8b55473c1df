use std::sync::Arc;

use super::params::{NetParams, Variant, SLOTS};
use crate::autodiff::{Direction, Graph, LinearMap, Tensor, Var};
use crate::error::{dim_err, Result};
use crate::mri::{ComplexImage, EncodingOperator, KSpaceData, SamplingMask};

/// Graph leaves for every parameter tensor, in canonical order.
pub fn bind_params(g: &mut Graph, params: &NetParams) -> Result<Vec<Var>> {
    params.tensors().iter().map(|t| g.param(t.shape()?, &t.data)).collect()
}

/// `base + conv3(relu(conv2(relu(conv1(input)))))`; `block` holds the six
/// weight/bias leaves of one block.
pub fn residual_block(g: &mut Graph, block: &[Var], input: Var, base: Var) -> Result<Var> {
    let h1 = g.conv2d(input, block[0], block[1])?;
    let h1 = g.relu(h1);
    let h2 = g.conv2d(h1, block[2], block[3])?;
    let h2 = g.relu(h2);
    let out = g.conv2d(h2, block[4], block[5])?;
    g.add(base, out)
}

struct Ctx<'a> {
    params: &'a NetParams,
    vars: &'a [Var],
    op: Arc<dyn LinearMap>,
}

impl Ctx<'_> {
    fn block(&self, start: usize) -> &[Var] {
        &self.vars[start..start + 6]
    }

    fn dual(&self, s: usize) -> &[Var] {
        self.block(self.params.slot(s).dual.expect("variant has a dual block"))
    }

    fn primal(&self, s: usize) -> &[Var] {
        self.block(self.params.slot(s).primal)
    }

    /// `(σ, τ, θ)` leaves of slot `s`.
    fn scalars(&self, s: usize) -> (Var, Var, Var) {
        let i = self.params.slot(s).scalars.expect("variant has step scalars");
        (self.vars[i], self.vars[i + 1], self.vars[i + 2])
    }

    fn fwd(&self, g: &mut Graph, x: Var) -> Result<Var> {
        g.linear(self.op.clone(), Direction::Forward, x)
    }

    fn adj(&self, g: &mut Graph, x: Var) -> Result<Var> {
        g.linear(self.op.clone(), Direction::Adjoint, x)
    }

    /// `Λ(m − τA*d)` with the gradient-step image as residual base.
    fn primal_step(&self, g: &mut Graph, s: usize, m: Var, d: Var, tau: Var) -> Result<Var> {
        let atd = self.adj(g, d)?;
        let step = g.scale(tau, atd)?;
        let y = g.sub(m, step)?;
        residual_block(g, self.primal(s), y, y)
    }

    /// `m_new + θ(m_new − m)`.
    fn extrapolate(g: &mut Graph, m_new: Var, m: Var, theta: Var) -> Result<Var> {
        let diff = g.sub(m_new, m)?;
        let t = g.scale(theta, diff)?;
        g.add(m_new, t)
    }
}

fn check_inputs(g: &Graph, params: &NetParams, vars: &[Var], f: Var, op: &EncodingOperator) -> Result<()> {
    if vars.len() != params.tensors().len() {
        return dim_err(format!("{} bound parameters for {} tensors", vars.len(), params.tensors().len()));
    }
    let s = g.shape(f);
    let (h, w) = op.dims();
    if (s.n, s.c, s.h, s.w) != (1, 2, h, w) {
        return dim_err(format!("k-space input {s} does not match a {h}x{w} operator"));
    }
    Ok(())
}

/// `d ← (d + σ(Am̄ − f))/(1+σ)`, `m ← Λ(m − τA*d)`, `m̄ ← m + θ(m − m_prev)`.
pub fn pdhg_cs_forward(g: &mut Graph, params: &NetParams, vars: &[Var], f: Var, op: Arc<EncodingOperator>) -> Result<Var> {
    check_inputs(g, params, vars, f, &op)?;
    let ctx = Ctx { params, vars, op };
    let mut m = ctx.adj(g, f)?;
    let mut mbar = m;
    let mut d = g.constant(Tensor::zeros(g.shape(f)));
    for s in 0..SLOTS {
        let (sigma, tau, theta) = ctx.scalars(s);
        let am = ctx.fwd(g, mbar)?;
        let r = g.sub(am, f)?;
        let sr = g.scale(sigma, r)?;
        let num = g.add(d, sr)?;
        let denom = g.affine(sigma, 1.0, 1.0)?;
        let k = g.recip(denom)?;
        d = g.scale(k, num)?;
        let m_new = ctx.primal_step(g, s, m, d, tau)?;
        mbar = Ctx::extrapolate(g, m_new, m, theta)?;
        m = m_new;
    }
    Ok(m)
}

/// `d ← Γ(d + σAm̄, f)`, then the primal and extrapolation steps as above.
pub fn cp_net_forward(g: &mut Graph, params: &NetParams, vars: &[Var], f: Var, op: Arc<EncodingOperator>) -> Result<Var> {
    check_inputs(g, params, vars, f, &op)?;
    let ctx = Ctx { params, vars, op };
    let mut m = ctx.adj(g, f)?;
    let mut mbar = m;
    let mut d = g.constant(Tensor::zeros(g.shape(f)));
    for s in 0..SLOTS {
        let (sigma, tau, theta) = ctx.scalars(s);
        let am = ctx.fwd(g, mbar)?;
        let sam = g.scale(sigma, am)?;
        let x = g.add(d, sam)?;
        let input = g.concat_channels(&[x, f])?;
        d = residual_block(g, ctx.dual(s), input, x)?;
        let m_new = ctx.primal_step(g, s, m, d, tau)?;
        mbar = Ctx::extrapolate(g, m_new, m, theta)?;
        m = m_new;
    }
    Ok(m)
}

/// `d ← Γ(d, Am, f)`, `m ← Λ(m, A*d)`; no extrapolation, no scalars.
pub fn pd_net_forward(g: &mut Graph, params: &NetParams, vars: &[Var], f: Var, op: Arc<EncodingOperator>) -> Result<Var> {
    check_inputs(g, params, vars, f, &op)?;
    let ctx = Ctx { params, vars, op };
    let mut m = ctx.adj(g, f)?;
    let mut d = g.constant(Tensor::zeros(g.shape(f)));
    for s in 0..SLOTS {
        let am = ctx.fwd(g, m)?;
        let dual_in = g.concat_channels(&[d, am, f])?;
        d = residual_block(g, ctx.dual(s), dual_in, d)?;
        let atd = ctx.adj(g, d)?;
        let primal_in = g.concat_channels(&[m, atd])?;
        m = residual_block(g, ctx.primal(s), primal_in, m)?;
    }
    Ok(m)
}

/// Dispatch on the parameter variant.
pub fn net_forward(g: &mut Graph, params: &NetParams, vars: &[Var], f: Var, op: Arc<EncodingOperator>) -> Result<Var> {
    match params.variant() {
        Variant::PdhgCs => pdhg_cs_forward(g, params, vars, f, op),
        Variant::Cp => cp_net_forward(g, params, vars, f, op),
        Variant::Pd => pd_net_forward(g, params, vars, f, op),
    }
}

/// Run the network on one acquisition.
pub fn reconstruct(params: &NetParams, f: &KSpaceData, mask: &SamplingMask) -> Result<ComplexImage> {
    f.check_same_dims(mask.dims(), "k-space and mask")?;
    let op = Arc::new(EncodingOperator::new(mask.clone())?);
    let mut g = Graph::new();
    let vars = params.tensors().iter().map(|t| Ok(g.constant(Tensor::new(t.shape()?, t.data.clone())?))).collect::<Result<Vec<_>>>()?;
    let fv = g.constant(f.to_tensor());
    let out = net_forward(&mut g, params, &vars, fv, op)?;
    ComplexImage::from_tensor(g.value(out))
}
