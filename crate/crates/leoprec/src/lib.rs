//! Energy-efficient downlink precoding for massive MIMO LEO satellite links.
//!
//! The crate provides three precoder families over a shared statistical-CSI
//! system model:
//!
//! * an exact solver — a Dinkelbach fractional-programming outer loop around a
//!   WMMSE block-coordinate inner loop ([`wmmse`]);
//! * a Taylor-expansion deep-unfolded edge network that replaces the exact
//!   ridge-system solve inside the same loop ([`unfolded`]);
//! * an end-to-end bipartite edge-GNN that maps channel statistics straight
//!   to a precoding matrix ([`e2e`]);
//!
//! plus instantaneous-CSI baselines ([`baselines`]), an unsupervised training
//! engine ([`training`]) and a desk-scale experiment harness ([`experiments`]).
//!
//! Start with the runnable programs under `examples/` — there is one per
//! capability — or with the `leoprec` binary for the config-driven harness.

pub mod baselines;
pub mod channel;
pub mod e2e;
pub mod error;
pub mod experiments;
pub mod grad;
pub mod linalg;
pub mod rng;
pub mod system;
pub mod training;
pub mod unfolded;
pub mod wmmse;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
