//! Inner consensus solver for the `(r, p)` block with the receivers fixed.
//!
//! Each iteration solves every link block (rates and precoder copies), then
//! every node and base-station block (rate copies and precoders), then
//! updates the duals. Blocks of one step are independent and run in parallel.

pub mod kernels;
pub mod layout;
mod solver;

pub use kernels::{
    consensus_target, demand_pair, dual_step, qos_minrate_block, solve_bs_power,
    solve_minrate_block, solve_node_conservation, solve_rhat_scalar, solve_wired_link_block,
    solve_wireless_link_block, DemandTerms, Endpoint, MinRateSolution, NodeSolution, WiredSolution,
    WirelessSolution,
};
pub use layout::{build_layout, Slot, SlotSide, StackingLayout};
pub(crate) use solver::{admm_iterate, objective};
pub use solver::{
    admm_solve, AdmmOutcome, AdmmParams, AdmmProblem, AdmmState, AdmmStatus, DualState,
    KernelMultipliers, ResidualTrace, SplitState, TraceRow, WirelessMode,
};
