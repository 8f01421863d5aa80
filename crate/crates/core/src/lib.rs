//! Energy-efficient resource allocation for uplink SCMA.
//!
//! The crate builds a factor graph (which user occupies which subcarriers)
//! with a greedy energy-efficiency-increment rule, then allocates transmit
//! power with Dinkelbach fractional programming. Random, fixed and exhaustive
//! assignment baselines and a Monte Carlo sweep harness are included.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision case.
//!
//! ```
//! use scma_ee::{assignment, channel, powalloc, Params64};
//!
//! let params = Params64::with_equal_budget(4, 6, 2, 7.2e-16, 1e-3, 0.1, 180e3).unwrap();
//! let scenario = channel::scenario_by_name("fig1_equal").unwrap();
//! let h = channel::generate_channel(&scenario, &params, 7).unwrap();
//! let pool = assignment::CandidatePool::shuffled(4, 2, 7).unwrap();
//! let graph = assignment::fast_assignment(&h, &params, pool).unwrap();
//! let result = powalloc::dinkelbach_allocate(&graph, &h, &params, &Default::default()).unwrap();
//! assert!(result.ee > 0.0);
//! ```

pub mod assignment;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod powalloc;
pub mod scalar;

pub use error::{Error, Result, Violation};
pub use model::{
    validate_factor_graph, validate_power, validate_power_equality, AllocationResult,
    ChannelState, DinkelbachStep, FactorGraph, PowerMatrix, SystemParams,
};
pub use scalar::Scalar;

pub type Params64 = SystemParams<f64>;
pub type Params32 = SystemParams<f32>;
pub type Channel64 = ChannelState<f64>;
pub type Channel32 = ChannelState<f32>;
pub type Power64 = PowerMatrix<f64>;
pub type Power32 = PowerMatrix<f32>;
pub type Allocation64 = AllocationResult<f64>;
pub type Allocation32 = AllocationResult<f32>;
pub type Solver64 = powalloc::SolverConfig<f64>;
pub type Solver32 = powalloc::SolverConfig<f32>;
