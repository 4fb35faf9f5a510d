//! Sign selection for signed null series `sum eps_n a_n`.
//!
//! The crate builds sign sequences that make such series converge, or
//! converge to a prescribed value, in `R` and `R^d`; estimates directional
//! mass and Levy vectors; explores achievement sets with rigorous tail
//! bounds; and produces finite-depth mass-distribution certificates on the
//! ultrametric sign space.

pub mod achieve;
pub mod balancer;
pub mod block;
pub mod config;
pub mod dimension;
pub mod error;
pub mod exact;
pub mod greedy1d;
pub mod levy;
pub mod linalg;
pub mod sequence;
pub mod sign;
pub mod target;
pub mod trace;

pub use block::BlockScheme;
pub use error::{Error, ErrorClass, Result};
pub use exact::Real;
pub use linalg::Norm;
pub use sequence::{Family, Growth, SequenceSpec, Summability};
pub use sign::{ultrametric_distance, Distance, Sign, SignStream, SignWord};
pub use trace::{partial_sums, partial_sums_exact, PartialSumTrace};
