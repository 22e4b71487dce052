//! Monte Carlo tree search over a cell-based U-Net architecture space.
//!
//! The crate is split along the search pipeline:
//!
//! - [`space`]: primitive catalog, genotype encoding, legal actions.
//! - [`arch`]: assembles a genotype into the U-shaped network and counts
//!   parameters and FLOPs.
//! - [`mcts`]: UCB1 selection, expansion, blended simulation value and
//!   backpropagation, plus the search driver.
//! - [`eval`]: evaluator contract, synthetic oracle, nearest-neighbour
//!   surrogate and the external-trainer bridge client.
//! - [`metrics`]: DSC, Dice loss, pixel accuracy and IoU over binary masks.
//! - [`stopping`]: patience-based early stopping and budget savings.
//! - [`baseline`]: uniform random search.
//! - [`config`]: the TOML run configuration.

pub mod arch;
pub mod baseline;
pub mod config;
pub mod eval;
pub mod mcts;
pub mod metrics;
pub mod space;
pub mod stopping;
