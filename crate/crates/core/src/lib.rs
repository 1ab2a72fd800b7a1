//! Finite wireless power-control games and their equilibria.
//!
//! A [`GameInstance`] (channel gains, power grids, energy price, noise,
//! packet length) is materialized into a dense [`PayoffTensor`]. From there:
//!
//! * [`nash`] enumerates pure Nash equilibria (and solves 2×2 games in mixed
//!   strategies),
//! * [`correlated`] computes welfare-optimal and directional correlated
//!   equilibria by linear programming and traces the 2-player CE payoff
//!   region,
//! * [`communication`] builds Bayesian type spaces over channel gains and
//!   solves for optimal communication equilibria,
//! * [`regret`] runs regret-matching dynamics whose empirical play approaches
//!   the correlated equilibrium set.
//!
//! Every LP goes through the dense two-phase simplex in [`lp`].
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default) and the caller asks for [`Exec::Parallel`]; otherwise they
//! run sequentially with identical results.

pub mod communication;
pub mod correlated;
mod error;
pub mod game;
pub mod geometry;
pub mod lp;
pub mod nash;
pub mod par;
pub mod regret;
pub mod rng;

pub use error::{Error, Result};
pub use game::{build_payoff_tensor, ChannelMatrix, GameInstance, PayoffTensor, PowerGrid};
pub use par::Exec;
