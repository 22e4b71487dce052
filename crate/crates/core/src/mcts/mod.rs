//! Monte Carlo tree search over partial genotypes.
//!
//! Each iteration selects a path by UCB1, expands one child, completes it
//! with a random rollout that is evaluated for real (through the cache),
//! blends that with `k` surrogate-predicted rollouts, and adds the value to
//! every (state, action) on the path.

mod search;
mod simulate;
mod trace;
mod tree;
mod ucb;

pub use search::{run_search, Budget, FailurePolicy, Search, SearchConfig, SearchError, SearchResult};
pub use simulate::{blend_value, random_completion, simulate_value, FailedRollout, Simulation, SimulationConfig};
pub use trace::{write_csv, write_curve, write_jsonl, TraceRecord};
pub use tree::{NodeId, SearchTree, Selection, TreeError, TreeNode};
pub use ucb::{ucb1_score, ucb1_select, ActionStats, NodeStats, UcbConfig};
