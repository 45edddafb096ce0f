//! Simulation and numerical verification for the Curie-Weiss model of
//! self-organized criticality.
//!
//! The Gibbs measure tilts `n` i.i.d. draws from a symmetric base measure
//! `rho` by `exp(S^2 / (2T))`, where `S` is the sum and `T` the sum of
//! squares. Under this measure `S / (n^{1/4} sqrt(T))` converges to the
//! quartic law `C exp(-mu4 s^4 / (12 sigma^4)) ds`.
//!
//! The crate is organized bottom-up:
//!
//! * [`measures`]: symmetric base measures with exact moments.
//! * [`model`]: configurations, the Gibbs log-weight and the statistics.
//! * [`sampler`]: Metropolis chains, importance sampling, exact enumeration.
//! * [`hs_oracle`]: the Hubbard-Stratonovich representation of the smoothed
//!   statistic, evaluated by Monte Carlo over the base measure.
//! * [`limit_law`]: the quartic limit laws.
//! * [`stats`]: KS, total variation and batch-means machinery.
//! * [`quadrature`], [`special`]: numerical building blocks.
//! * [`exec`], [`rng`], [`checkpoint`]: parallel execution, reproducible
//!   random streams and chain checkpoints.

pub mod checkpoint;
pub mod error;
pub mod exec;
pub mod hs_oracle;
pub mod limit_law;
pub mod measures;
pub mod model;
pub mod number;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use exec::Execution;
pub use limit_law::QuarticLaw;
pub use measures::BaseMeasure;
pub use model::Configuration;
