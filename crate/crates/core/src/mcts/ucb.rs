use serde::{Deserialize, Serialize};

/// Visit count and cumulative reward of one action.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ActionStats {
    pub n: u64,
    pub q: f64,
}

impl ActionStats {
    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.q / self.n as f64)
    }
}

/// Per-action statistics of one state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeStats {
    pub actions: Vec<ActionStats>,
}

impl NodeStats {
    pub fn zeroed(actions: usize) -> Self {
        Self {
            actions: vec![ActionStats::default(); actions],
        }
    }

    /// State visit count: the sum of its action counts.
    pub fn total(&self) -> u64 {
        self.actions.iter().map(|a| a.n).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UcbConfig {
    /// Exploration constant; the bonus is scaled by `2c`.
    pub c: f64,
}

impl Default for UcbConfig {
    fn default() -> Self {
        Self { c: 0.5 }
    }
}

impl UcbConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.c >= 0.0 && self.c.is_finite() {
            Ok(())
        } else {
            Err(format!("exploration constant c = {} must be finite and >= 0", self.c))
        }
    }
}

/// `q/n + 2c * sqrt(2 ln(total) / n)` for a visited action.
pub fn ucb1_score(stats: ActionStats, total: u64, c: f64) -> f64 {
    let n = stats.n as f64;
    stats.q / n + 2.0 * c * (2.0 * (total as f64).ln() / n).sqrt()
}

/// Index of the action UCB1 picks, or `None` when there are no actions.
///
/// Unvisited actions win outright (lowest index first); otherwise the
/// highest score wins with ties going to the lowest index.
pub fn ucb1_select(stats: &NodeStats, ucb: &UcbConfig) -> Option<usize> {
    if let Some(i) = stats.actions.iter().position(|a| a.n == 0) {
        return Some(i);
    }
    let total = stats.total();
    let mut best: Option<(usize, f64)> = None;
    for (i, &a) in stats.actions.iter().enumerate() {
        let score = ucb1_score(a, total, ucb.c);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    best.map(|(i, _)| i)
}
