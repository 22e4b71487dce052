//! Patience-based early stopping and the budget it saves.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Running-best tracker. Iterations are 1-based; an iteration improves when
/// its fitness is strictly greater than every earlier one.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StopTracker {
    iterations: usize,
    best: Option<f64>,
    best_iteration: usize,
}

impl StopTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one iteration; `None` marks a failed evaluation. Returns
    /// whether the running best improved.
    pub fn observe(&mut self, fitness: Option<f64>) -> bool {
        self.iterations += 1;
        match fitness {
            Some(f) if self.best.is_none_or(|b| f > b) => {
                self.best = Some(f);
                self.best_iteration = self.iterations;
                true
            }
            _ => false,
        }
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    /// Iteration of the last improvement, 0 before any success.
    pub fn best_iteration(&self) -> usize {
        self.best_iteration
    }

    pub fn should_stop(&self, patience: usize) -> bool {
        self.iterations > 0 && self.iterations - self.best_iteration >= patience
    }
}

/// Whether a run with these per-iteration fitness values stops now.
pub fn early_stop_check(fitness: &[f64], patience: usize) -> bool {
    let mut tracker = StopTracker::new();
    for &f in fitness {
        tracker.observe(Some(f));
    }
    tracker.should_stop(patience)
}

/// First 1-based iteration at which the rule fires, if any.
pub fn stop_iteration(fitness: &[f64], patience: usize) -> Option<usize> {
    let mut tracker = StopTracker::new();
    for &f in fitness {
        tracker.observe(Some(f));
        if tracker.should_stop(patience) {
            return Some(tracker.iterations());
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SavingsError {
    #[error("max_iterations must be positive")]
    NoBudget,
    #[error("stop iteration {stop} exceeds max_iterations {max}")]
    PastBudget { stop: usize, max: usize },
}

/// Fraction of the iteration budget left unused: `1 - stop / max`.
pub fn budget_savings(stop_iteration: usize, max_iterations: usize) -> Result<f64, SavingsError> {
    if max_iterations == 0 {
        return Err(SavingsError::NoBudget);
    }
    if stop_iteration > max_iterations {
        return Err(SavingsError::PastBudget {
            stop: stop_iteration,
            max: max_iterations,
        });
    }
    Ok(1.0 - stop_iteration as f64 / max_iterations as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIterations,
    EarlyStop,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::MaxIterations => "max_iterations",
            StopReason::EarlyStop => "early_stop",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopReport {
    pub stop_reason: StopReason,
    pub stop_iteration: usize,
    pub best_iteration: usize,
    pub max_iterations: usize,
    pub patience: Option<usize>,
    pub savings_fraction: f64,
}
