//! Hybrid channel pre-inversion and interference alignment for MIMO
//! interference channels.
//!
//! Users are split into data-sharing groups. Each group inverts its own joint
//! subchannel with a Tikhonov (MMSE) inverse, and interference between groups
//! is removed by interference alignment. The crate covers:
//!
//! * [`channel`]: channel draws, partitions and group pre-inversion,
//! * [`tikhonov`]: regularized inversion, the pre-inversion SINR and its
//!   large-system limit,
//! * [`alignment`]: alignment strategies and degrees-of-freedom bookkeeping
//!   for `K = 4` users with `N = 5` antennas,
//! * [`capacity`]: Monte-Carlo SINR and ergodic-rate evaluation,
//! * [`experiment`]: the configuration and output layer behind the CLI.

pub mod alignment;
pub mod capacity;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod quadrature;
pub mod rng;
pub mod tikhonov;
pub mod verify;

pub use error::{Error, Result};
