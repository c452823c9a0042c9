//! Joint backhaul routing and wireless precoding for max-min fair rates in
//! heterogeneous networks.

pub mod admm;
pub mod baselines;
pub mod bench;
pub mod error;
pub mod instance_io;
pub mod lp;
pub mod maxmin;
pub mod model;
pub mod parallel;
pub mod qos;
pub mod roots;
pub mod scenario;
pub mod wmmse;

pub use error::{Error, ModelError, Result};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/network-model.md")]
    mod network_model {}
    #[doc = include_str!("../../../book/src/rate-surrogate.md")]
    mod rate_surrogate {}
    #[doc = include_str!("../../../book/src/consensus-solver.md")]
    mod consensus_solver {}
    #[doc = include_str!("../../../book/src/outer-loop.md")]
    mod outer_loop {}
    #[doc = include_str!("../../../book/src/rate-floors.md")]
    mod rate_floors {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/instance-files.md")]
    mod instance_files {}
}
