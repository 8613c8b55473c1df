//! Classical Chambolle-Pock reconstruction with an ℓ₁ analysis prior.

mod haar;
mod prox;
mod solver;

pub use haar::{HaarTransform, SparseTransform};
pub use prox::{dual_prox_data, prox_l1_analysis, soft_threshold};
pub use solver::{cp_iterate, cp_solve, duality_gap, primal_objective, CpConfig, CpDiagnostics, CpState, IterRecord};
