//! Bayesian inference for the stochastic volatility model
//!
//! ```text
//! y_i ~ N(0, exp(c + sigma x_i)),   x_1 ~ N(0, 1 / (1 - phi^2)),   x_i ~ N(phi x_{i-1}, 1)
//! ```
//!
//! with three samplers: the Kastner–Frühwirth-Schnatter scheme built on a
//! ten-component normal-mixture approximation with forward filtering,
//! backward sampling (`KF`), and two embedded-HMM ensemble schemes that
//! work with the exact observation density (`ENS1`, `ENS2`). All three
//! share an interweaved non-centred/centred Metropolis parameter block.

pub mod asis;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod geweke;
pub mod kalman;
pub mod mixture;
pub mod model;
pub mod par;
pub mod rng;
pub mod sampler;

pub use error::{Result, SvError};
pub use model::{Dataset, Params, PriorSpec, TransformedParams};
pub use par::Execution;
pub use rng::{RandomStream, StreamPurpose};
pub use sampler::{run_chain, ChainTrace, Scheme, SchemeConfig};
