//! Compressed-sensing MRI reconstruction: a Chambolle-Pock solver with
//! closed-form proximal steps, and three unrolled primal-dual networks
//! (PDHG-CSnet, CP-net, PD-net) trained with a small reverse-mode
//! differentiation engine.

pub mod autodiff;
pub mod cp;
pub mod error;
pub mod metrics;
pub mod mri;
pub mod nets;
pub mod train;

pub use error::{Error, Result};
