//! Unrolled primal-dual networks: PDHG-CSnet (closed-form dual step, learned
//! primal block), CP-net (learned dual and primal blocks with learned step
//! sizes) and PD-net (learned blocks on stacked iterates, no step sizes).
//!
//! Every block is residual with a zero-initialized last layer, so an
//! untrained network reproduces its classical counterpart.

mod forward;
mod params;

pub use forward::{
    bind_params, cp_net_forward, net_forward, pd_net_forward, pdhg_cs_forward, reconstruct, residual_block,
};
pub use params::{
    block_param_count, block_schedule, param_layout, NetParams, ParamTensor, SlotLayout, Variant, HIDDEN, SLOTS,
};
