//! Define-by-run computation graph with reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order and may only reference earlier
//! nodes, so the node list is always a topological order.

use std::sync::Arc;

use super::conv::{self, ConvDims, KERNEL};
use super::tensor::{Shape, Tensor};
use crate::error::{dim_err, Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Adjoint,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Forward => Direction::Adjoint,
            Direction::Adjoint => Direction::Forward,
        }
    }
}

/// A real-linear map between 2-channel `H×W` fields whose real transpose is
/// available. Buffers are planar: channel 0 then channel 1.
pub trait LinearMap: Send + Sync {
    fn height(&self) -> usize;
    fn width(&self) -> usize;
    fn apply(&self, dir: Direction, input: &[f64], output: &mut [f64]);
}

enum Op {
    Leaf,
    Conv2d { input: Var, weight: Var, bias: Var },
    Relu(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale { scalar: Var, x: Var },
    /// Scalar `mul·x + add`.
    Affine { x: Var, mul: f64 },
    Recip(Var),
    Concat(Vec<Var>),
    Linear { map: Arc<dyn LinearMap>, dir: Direction, x: Var },
    Mse { pred: Var, target: Var },
    Mean(Vec<Var>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Conv2d { .. } => "conv2d",
            Op::Relu(_) => "relu",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Scale { .. } => "scale",
            Op::Affine { .. } => "affine",
            Op::Recip(_) => "recip",
            Op::Concat(_) => "concat",
            Op::Linear { .. } => "linear",
            Op::Mse { .. } => "mse",
            Op::Mean(_) => "mean",
        }
    }
}

struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: Vec<Var>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, mut value: Tensor) -> Var {
        value.requires_grad = match &op {
            Op::Leaf => value.requires_grad,
            _ => self.inputs_of(&op).iter().any(|v| self.nodes[v.0].value.requires_grad),
        };
        value.grad = None;
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    fn inputs_of(&self, op: &Op) -> Vec<Var> {
        match op {
            Op::Leaf => vec![],
            Op::Conv2d { input, weight, bias } => vec![*input, *weight, *bias],
            Op::Relu(x) | Op::Recip(x) => vec![*x],
            Op::Affine { x, .. } | Op::Linear { x, .. } => vec![*x],
            Op::Add(a, b) | Op::Sub(a, b) => vec![*a, *b],
            Op::Scale { scalar, x } => vec![*scalar, *x],
            Op::Mse { pred, target } => vec![*pred, *target],
            Op::Concat(v) | Op::Mean(v) => v.clone(),
        }
    }

    /// Constant input; never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        let mut t = t;
        t.requires_grad = false;
        self.push(Op::Leaf, t)
    }

    /// Differentiable leaf.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t.with_grad())
    }

    /// A learnable parameter: a differentiable leaf that is also recorded in
    /// registration order, see [`Graph::params`].
    pub fn param(&mut self, shape: Shape, data: &[f64]) -> Result<Var> {
        let v = self.leaf(Tensor::new(shape, data.to_vec())?);
        self.params.push(v);
        Ok(v)
    }

    pub fn params(&self) -> &[Var] {
        &self.params
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad.as_deref()
    }

    /// Gradient of a parameter, or zeros when it was unreachable from the loss.
    pub fn grad_or_zeros(&self, v: Var) -> Vec<f64> {
        self.grad(v)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; self.nodes[v.0].value.data().len()])
    }

    /// Zero every gradient buffer of every node.
    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.value.grad = None;
        }
    }

    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let xs = self.shape(input);
        let ws = self.shape(weight);
        let bs = self.shape(bias);
        if ws.h != KERNEL || ws.w != KERNEL {
            return dim_err(format!("conv2d kernel must be 3x3, got {}x{}", ws.h, ws.w));
        }
        if ws.c != xs.c {
            return dim_err(format!(
                "conv2d input has {} channels but weights expect {}",
                xs.c, ws.c
            ));
        }
        if bs.numel() != ws.n {
            return dim_err(format!("conv2d bias has {} entries for {} outputs", bs.numel(), ws.n));
        }
        let out_shape = Shape::new(xs.n, ws.n, xs.h, xs.w);
        let mut out = vec![0.0; out_shape.numel()];
        let dims = ConvDims { n: xs.n, cin: xs.c, cout: ws.n, h: xs.h, w: xs.w };
        conv::forward(
            &dims,
            self.value(input).data(),
            self.value(weight).data(),
            self.value(bias).data(),
            &mut out,
        );
        Ok(self.push(Op::Conv2d { input, weight, bias }, Tensor::new(out_shape, out)?))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let out: Vec<f64> = t.data().iter().map(|&v| v.max(0.0)).collect();
        let shape = t.shape();
        self.push(Op::Relu(x), Tensor::new(shape, out).expect("same shape"))
    }

    fn binary(&self, a: Var, b: Var, what: &str) -> Result<(Shape, &[f64], &[f64])> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return dim_err(format!("{what}: shapes {sa} and {sb} differ"));
        }
        Ok((sa, self.value(a).data(), self.value(b).data()))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, x, y) = self.binary(a, b, "add")?;
        let out = x.iter().zip(y).map(|(p, q)| p + q).collect();
        Ok(self.push(Op::Add(a, b), Tensor::new(shape, out)?))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, x, y) = self.binary(a, b, "sub")?;
        let out = x.iter().zip(y).map(|(p, q)| p - q).collect();
        Ok(self.push(Op::Sub(a, b), Tensor::new(shape, out)?))
    }

    /// `s·x` for a one-element `s`.
    pub fn scale(&mut self, scalar: Var, x: Var) -> Result<Var> {
        if !self.shape(scalar).is_scalar() {
            return dim_err(format!("scale factor must be a scalar, got {}", self.shape(scalar)));
        }
        let s = self.value(scalar).item();
        let t = self.value(x);
        let shape = t.shape();
        let out = t.data().iter().map(|v| s * v).collect();
        Ok(self.push(Op::Scale { scalar, x }, Tensor::new(shape, out)?))
    }

    /// Scalar `mul·x + add`.
    pub fn affine(&mut self, x: Var, mul: f64, add: f64) -> Result<Var> {
        if !self.shape(x).is_scalar() {
            return dim_err("affine expects a scalar");
        }
        let v = mul * self.value(x).item() + add;
        Ok(self.push(Op::Affine { x, mul }, Tensor::scalar(v)))
    }

    /// Scalar `1/x`.
    pub fn recip(&mut self, x: Var) -> Result<Var> {
        if !self.shape(x).is_scalar() {
            return dim_err("recip expects a scalar");
        }
        let v = 1.0 / self.value(x).item();
        Ok(self.push(Op::Recip(x), Tensor::scalar(v)))
    }

    /// Concatenate along the channel axis.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return dim_err("concat of zero tensors");
        };
        let s0 = self.shape(first);
        let mut c = 0;
        for &p in parts {
            let s = self.shape(p);
            if (s.n, s.h, s.w) != (s0.n, s0.h, s0.w) {
                return dim_err(format!("concat: shapes {s0} and {s} disagree outside channels"));
            }
            c += s.c;
        }
        let shape = Shape::new(s0.n, c, s0.h, s0.w);
        let mut out = Vec::with_capacity(shape.numel());
        for b in 0..s0.n {
            for &p in parts {
                let t = self.value(p);
                let len = t.shape().sample_len();
                out.extend_from_slice(&t.data()[b * len..(b + 1) * len]);
            }
        }
        Ok(self.push(Op::Concat(parts.to_vec()), Tensor::new(shape, out)?))
    }

    /// Apply `map` (or its adjoint) to every batch member of a 2-channel tensor.
    pub fn linear(&mut self, map: Arc<dyn LinearMap>, dir: Direction, x: Var) -> Result<Var> {
        let s = self.shape(x);
        if s.c != 2 || s.h != map.height() || s.w != map.width() {
            return dim_err(format!(
                "linear operator on {}x{} fields cannot take a tensor of shape {s}",
                map.height(),
                map.width()
            ));
        }
        let mut out = vec![0.0; s.numel()];
        let len = s.sample_len();
        let input = self.value(x).data();
        for b in 0..s.n {
            map.apply(dir, &input[b * len..(b + 1) * len], &mut out[b * len..(b + 1) * len]);
        }
        Ok(self.push(Op::Linear { map, dir, x }, Tensor::new(s, out)?))
    }

    /// `(1/N) Σᵢ ‖predᵢ − targetᵢ‖²` over the batch axis.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (shape, p, t) = self.binary(pred, target, "mse_loss")?;
        let total: f64 = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(self.push(Op::Mse { pred, target }, Tensor::scalar(total / shape.n as f64)))
    }

    /// Arithmetic mean of scalar nodes.
    pub fn mean(&mut self, scalars: &[Var]) -> Result<Var> {
        if scalars.is_empty() {
            return dim_err("mean of zero scalars");
        }
        let mut acc = 0.0;
        for &s in scalars {
            if !self.shape(s).is_scalar() {
                return dim_err("mean expects scalar inputs");
            }
            acc += self.value(s).item();
        }
        Ok(self.push(Op::Mean(scalars.to_vec()), Tensor::scalar(acc / scalars.len() as f64)))
    }

    /// Accumulate `∂root/∂v` into the gradient buffer of every differentiable
    /// leaf `v`. Buffers are not cleared first; call [`Graph::zero_grad`]
    /// between passes for fresh gradients.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if !self.shape(root).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar root, got shape {}",
                self.shape(root)
            )));
        }
        // Cotangents for this pass, kept apart from the accumulated buffers.
        let mut cot: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        cot[root.0] = Some(vec![1.0]);

        for i in (0..=root.0).rev() {
            let Some(g) = cot[i].take() else { continue };
            if !self.nodes[i].value.requires_grad {
                continue;
            }
            if matches!(self.nodes[i].op, Op::Leaf) {
                self.nodes[i].value.accumulate_grad(&g);
            } else {
                self.propagate(i, &g, &mut cot);
            }
        }
        Ok(())
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].value.requires_grad
    }

    fn propagate(&self, i: usize, g: &[f64], cot: &mut [Option<Vec<f64>>]) {
        fn add_into(cot: &mut [Option<Vec<f64>>], v: Var, len: usize, f: impl FnOnce(&mut [f64])) {
            let buf = cot[v.0].get_or_insert_with(|| vec![0.0; len]);
            f(buf);
        }
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Conv2d { input, weight, bias } => {
                let xs = self.shape(*input);
                let ws = self.shape(*weight);
                let dims = ConvDims { n: xs.n, cin: xs.c, cout: ws.n, h: xs.h, w: xs.w };
                let mut gi = self.needs(*input).then(|| cot[input.0].take().unwrap_or_else(|| vec![0.0; xs.numel()]));
                let mut gw = self.needs(*weight).then(|| cot[weight.0].take().unwrap_or_else(|| vec![0.0; ws.numel()]));
                let mut gb = self.needs(*bias).then(|| cot[bias.0].take().unwrap_or_else(|| vec![0.0; ws.n]));
                conv::backward(
                    &dims,
                    self.value(*input).data(),
                    self.value(*weight).data(),
                    g,
                    gi.as_deref_mut(),
                    gw.as_deref_mut(),
                    gb.as_deref_mut(),
                );
                if let Some(v) = gi {
                    cot[input.0] = Some(v);
                }
                if let Some(v) = gw {
                    cot[weight.0] = Some(v);
                }
                if let Some(v) = gb {
                    cot[bias.0] = Some(v);
                }
            }
            Op::Relu(x) => {
                if self.needs(*x) {
                    let xv = self.value(*x).data();
                    add_into(cot, *x, xv.len(), |buf| {
                        for ((b, gv), xv) in buf.iter_mut().zip(g).zip(xv) {
                            if *xv > 0.0 {
                                *b += gv;
                            }
                        }
                    });
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(self.nodes[i].op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if self.needs(*a) {
                    add_into(cot, *a, g.len(), |buf| buf.iter_mut().zip(g).for_each(|(b, v)| *b += v));
                }
                if self.needs(*b) {
                    add_into(cot, *b, g.len(), |buf| {
                        buf.iter_mut().zip(g).for_each(|(b, v)| *b += sign * v)
                    });
                }
            }
            Op::Scale { scalar, x } => {
                if self.needs(*scalar) {
                    let dot: f64 = g.iter().zip(self.value(*x).data()).map(|(a, b)| a * b).sum();
                    add_into(cot, *scalar, 1, |buf| buf[0] += dot);
                }
                if self.needs(*x) {
                    let s = self.value(*scalar).item();
                    add_into(cot, *x, g.len(), |buf| buf.iter_mut().zip(g).for_each(|(b, v)| *b += s * v));
                }
            }
            Op::Affine { x, mul } => {
                if self.needs(*x) {
                    add_into(cot, *x, 1, |buf| buf[0] += mul * g[0]);
                }
            }
            Op::Recip(x) => {
                if self.needs(*x) {
                    let v = self.value(*x).item();
                    add_into(cot, *x, 1, |buf| buf[0] -= g[0] / (v * v));
                }
            }
            Op::Concat(parts) => {
                let out_len = self.nodes[i].value.shape().sample_len();
                let n = self.nodes[i].value.shape().n;
                let mut offset = 0;
                for &p in parts {
                    let len = self.shape(p).sample_len();
                    if self.needs(p) {
                        add_into(cot, p, len * n, |buf| {
                            for b in 0..n {
                                let src = &g[b * out_len + offset..b * out_len + offset + len];
                                buf[b * len..(b + 1) * len]
                                    .iter_mut()
                                    .zip(src)
                                    .for_each(|(d, s)| *d += s);
                            }
                        });
                    }
                    offset += len;
                }
            }
            Op::Linear { map, dir, x } => {
                if self.needs(*x) {
                    let s = self.shape(*x);
                    let len = s.sample_len();
                    let mut tmp = vec![0.0; len];
                    add_into(cot, *x, s.numel(), |buf| {
                        for b in 0..s.n {
                            map.apply(dir.flip(), &g[b * len..(b + 1) * len], &mut tmp);
                            buf[b * len..(b + 1) * len]
                                .iter_mut()
                                .zip(&tmp)
                                .for_each(|(d, s)| *d += s);
                        }
                    });
                }
            }
            Op::Mse { pred, target } => {
                let n = self.shape(*pred).n as f64;
                let p = self.value(*pred).data();
                let t = self.value(*target).data();
                let k = 2.0 * g[0] / n;
                if self.needs(*pred) {
                    add_into(cot, *pred, p.len(), |buf| {
                        for ((b, p), t) in buf.iter_mut().zip(p).zip(t) {
                            *b += k * (p - t);
                        }
                    });
                }
                if self.needs(*target) {
                    add_into(cot, *target, t.len(), |buf| {
                        for ((b, p), t) in buf.iter_mut().zip(p).zip(t) {
                            *b -= k * (p - t);
                        }
                    });
                }
            }
            Op::Mean(parts) => {
                let k = g[0] / parts.len() as f64;
                for &p in parts {
                    if self.needs(p) {
                        add_into(cot, p, 1, |buf| buf[0] += k);
                    }
                }
            }
        }
    }

    /// Operation name of a node, for diagnostics.
    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }
}
