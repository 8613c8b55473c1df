use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::Shape;
use crate::error::{Error, Result};

/// Unrolled iterations in every variant.
pub const SLOTS: usize = 10;
/// Width of the hidden convolution layers.
pub const HIDDEN: usize = 32;
const KERNEL_AREA: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    PdhgCs,
    Cp,
    Pd,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::PdhgCs, Variant::Cp, Variant::Pd];

    /// Checkpoint tag.
    pub fn tag(self) -> u8 {
        match self {
            Variant::PdhgCs => 0,
            Variant::Cp => 1,
            Variant::Pd => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Variant::ALL.into_iter().find(|v| v.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::PdhgCs => "pdhg-cs",
            Variant::Cp => "cp",
            Variant::Pd => "pd",
        }
    }

    /// Input channels of the dual block, if the variant learns one.
    pub fn dual_cin(self) -> Option<usize> {
        match self {
            Variant::PdhgCs => None,
            Variant::Cp => Some(4),
            Variant::Pd => Some(6),
        }
    }

    pub fn primal_cin(self) -> usize {
        match self {
            Variant::PdhgCs | Variant::Cp => 2,
            Variant::Pd => 4,
        }
    }

    /// Whether each slot carries learnable σ, τ, θ.
    pub fn has_scalars(self) -> bool {
        !matches!(self, Variant::Pd)
    }

    /// Tensors per slot in canonical order: dual block, primal block, scalars.
    pub(crate) fn tensors_per_slot(self) -> usize {
        let blocks = if self.dual_cin().is_some() { 2 } else { 1 };
        6 * blocks + if self.has_scalars() { 3 } else { 0 }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pdhg-cs" | "pdhg" | "pdhg-csnet" => Ok(Variant::PdhgCs),
            "cp" | "cp-net" => Ok(Variant::Cp),
            "pd" | "pd-net" => Ok(Variant::Pd),
            _ => Err(Error::Config(format!("unknown model {s:?}; expected pdhg-cs, cp or pd"))),
        }
    }
}

/// A named parameter array. `dims` is `[cout, cin, 3, 3]` for weights,
/// `[cout]` for biases and `[]` for scalars.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl ParamTensor {
    /// Graph shape: weights map directly, biases become `(1, cout, 1, 1)`.
    pub fn shape(&self) -> Result<Shape> {
        match self.dims[..] {
            [] => Ok(Shape::scalar()),
            [c] => Ok(Shape::new(1, c, 1, 1)),
            [n, c, h, w] => Ok(Shape::new(n, c, h, w)),
            _ => Err(Error::Dimension(format!("parameter {} has unsupported rank {}", self.name, self.dims.len()))),
        }
    }
}

/// Channel schedule of one residual block: `cin → 32 → 32 → 2`.
pub fn block_schedule(cin: usize) -> [(usize, usize); 3] {
    [(cin, HIDDEN), (HIDDEN, HIDDEN), (HIDDEN, 2)]
}

/// Learnable scalars in one `cin → 32 → 32 → 2` block.
pub fn block_param_count(cin: usize) -> usize {
    block_schedule(cin).iter().map(|&(i, o)| o * i * KERNEL_AREA + o).sum()
}

/// All learnable tensors of one network, in canonical order:
/// slot by slot, dual block, primal block, then `sigma`, `tau`, `theta`.
#[derive(Clone, Debug, PartialEq)]
pub struct NetParams {
    variant: Variant,
    tensors: Vec<ParamTensor>,
}

/// Per-slot views into [`NetParams`].
#[derive(Clone, Copy, Debug)]
pub struct SlotLayout {
    pub dual: Option<usize>,
    pub primal: usize,
    pub scalars: Option<usize>,
}

fn slot_prefix(slot: usize) -> String {
    format!("slot{slot:02}")
}

fn block_names(prefix: &str, cin: usize) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::with_capacity(6);
    for (k, (i, o)) in block_schedule(cin).into_iter().enumerate() {
        out.push((format!("{prefix}.conv{}.weight", k + 1), vec![o, i, 3, 3]));
        out.push((format!("{prefix}.conv{}.bias", k + 1), vec![o]));
    }
    out
}

/// Canonical `(name, dims)` list for a variant.
pub fn param_layout(variant: Variant) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    for s in 0..SLOTS {
        let p = slot_prefix(s);
        if let Some(cin) = variant.dual_cin() {
            out.extend(block_names(&format!("{p}.dual"), cin));
        }
        out.extend(block_names(&format!("{p}.primal"), variant.primal_cin()));
        if variant.has_scalars() {
            for n in ["sigma", "tau", "theta"] {
                out.push((format!("{p}.{n}"), vec![]));
            }
        }
    }
    out
}

impl NetParams {
    /// Hidden layers: `N(0, 2/fan_in)` weights, zero bias. Final layer of
    /// every block: zero. Scalars: 1. Draws follow the canonical order.
    pub fn init(variant: Variant, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = param_layout(variant)
            .into_iter()
            .map(|(name, dims)| {
                let numel = dims.iter().product();
                let data = if dims.is_empty() {
                    vec![1.0]
                } else if dims.len() == 4 && !name.contains(".conv3.") {
                    let std = (2.0 / (dims[1] * KERNEL_AREA) as f64).sqrt();
                    let normal = Normal::new(0.0, std).expect("finite std");
                    (0..numel).map(|_| normal.sample(&mut rng)).collect()
                } else {
                    vec![0.0; numel]
                };
                ParamTensor { name, dims, data }
            })
            .collect();
        NetParams { variant, tensors }
    }

    /// Checks names and shapes against the variant's layout.
    pub fn from_tensors(variant: Variant, tensors: Vec<ParamTensor>) -> Result<Self> {
        let layout = param_layout(variant);
        if layout.len() != tensors.len() {
            return Err(Error::Contract(format!(
                "{variant} expects {} parameter tensors, got {}",
                layout.len(),
                tensors.len()
            )));
        }
        for ((name, dims), t) in layout.iter().zip(&tensors) {
            if *name != t.name || *dims != t.dims {
                return Err(Error::Contract(format!(
                    "{variant} expects parameter {name} {dims:?}, got {} {:?}",
                    t.name, t.dims
                )));
            }
            if t.data.len() != dims.iter().product::<usize>() {
                return Err(Error::Contract(format!("parameter {} has {} values for dims {dims:?}", t.name, t.data.len())));
            }
        }
        Ok(NetParams { variant, tensors })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn tensors(&self) -> &[ParamTensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [ParamTensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&ParamTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ParamTensor> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    /// Total number of learnable scalars.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    /// Tensor indices of slot `s`.
    pub fn slot(&self, s: usize) -> SlotLayout {
        let base = s * self.variant.tensors_per_slot();
        let (dual, primal) = match self.variant.dual_cin() {
            Some(_) => (Some(base), base + 6),
            None => (None, base),
        };
        SlotLayout { dual, primal, scalars: self.variant.has_scalars().then_some(primal + 6) }
    }
}
