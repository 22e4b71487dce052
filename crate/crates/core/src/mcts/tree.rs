use thiserror::Error;

use super::ucb::{ucb1_select, NodeStats, UcbConfig};
use crate::space::{legal_actions, EdgeChoice, PartialGenotype, SpaceConfig};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("node {0} is terminal and cannot be expanded")]
    Terminal(NodeId),
    #[error("action {action} of node {node} is already expanded")]
    AlreadyExpanded { node: NodeId, action: usize },
    #[error("node {node} has no action {action}")]
    NoSuchAction { node: NodeId, action: usize },
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub state: PartialGenotype,
    /// Legal actions of `state`, in `legal_actions` order.
    pub actions: Vec<EdgeChoice>,
    pub stats: NodeStats,
    pub children: Vec<Option<NodeId>>,
    /// Backpropagations that passed through this node's actions.
    pub visits: u64,
    pub parent: Option<(NodeId, usize)>,
}

impl TreeNode {
    fn new(state: PartialGenotype, space: &SpaceConfig, parent: Option<(NodeId, usize)>) -> Self {
        let actions = legal_actions(&state, space);
        Self {
            stats: NodeStats::zeroed(actions.len()),
            children: vec![None; actions.len()],
            actions,
            state,
            visits: 0,
            parent,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Root-to-leaf walk produced by selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    /// (node, action index) pairs from the root.
    pub path: Vec<(NodeId, usize)>,
    pub leaf: NodeId,
    /// Whether `leaf` was created by this selection.
    pub expanded: bool,
}

/// Arena-backed search tree over partial genotypes.
#[derive(Debug, Clone)]
pub struct SearchTree {
    space: SpaceConfig,
    nodes: Vec<TreeNode>,
}

impl SearchTree {
    pub const ROOT: NodeId = 0;

    pub fn new(space: &SpaceConfig) -> Self {
        let root = TreeNode::new(PartialGenotype::empty(space), space, None);
        Self {
            space: space.clone(),
            nodes: vec![root],
        }
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn space(&self) -> &SpaceConfig {
        &self.space
    }

    /// Adds the child reached by `action` with all statistics at zero.
    pub fn expand(&mut self, parent: NodeId, action: usize) -> Result<NodeId, TreeError> {
        let node = &self.nodes[parent];
        if node.is_terminal() {
            return Err(TreeError::Terminal(parent));
        }
        let Some(slot) = node.children.get(action) else {
            return Err(TreeError::NoSuchAction { node: parent, action });
        };
        if slot.is_some() {
            return Err(TreeError::AlreadyExpanded { node: parent, action });
        }
        let state = node.state.with(node.actions[action]);
        let id = self.nodes.len();
        self.nodes
            .push(TreeNode::new(state, &self.space, Some((parent, action))));
        self.nodes[parent].children[action] = Some(id);
        Ok(id)
    }

    /// Descends by UCB1 until it expands a new child or reaches a terminal node.
    pub fn select(&mut self, ucb: &UcbConfig) -> Selection {
        let mut path = Vec::new();
        let mut node = Self::ROOT;
        loop {
            let current = &self.nodes[node];
            let Some(action) = ucb1_select(&current.stats, ucb) else {
                return Selection {
                    path,
                    leaf: node,
                    expanded: false,
                };
            };
            path.push((node, action));
            match current.children[action] {
                Some(child) => node = child,
                None => {
                    let leaf = self
                        .expand(node, action)
                        .expect("unexpanded action of a non-terminal node");
                    return Selection {
                        path,
                        leaf,
                        expanded: true,
                    };
                }
            }
        }
    }

    /// Adds `reward` to every (state, action) on `path`, leaf end first.
    pub fn backpropagate(&mut self, path: &[(NodeId, usize)], reward: f64) {
        for &(node, action) in path.iter().rev() {
            let n = &mut self.nodes[node];
            let stats = &mut n.stats.actions[action];
            stats.q += reward;
            stats.n += 1;
            n.visits += 1;
        }
    }

    /// Checks the bookkeeping invariants, describing the first breach.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (id, node) in self.nodes.iter().enumerate() {
            let total = node.stats.total();
            if node.visits != total {
                return Err(format!(
                    "node {id}: visits {} != sum of action counts {total}",
                    node.visits
                ));
            }
            if node.actions != legal_actions(&node.state, &self.space) {
                return Err(format!("node {id}: action list differs from legal actions"));
            }
            for (a, stats) in node.stats.actions.iter().enumerate() {
                if stats.q < 0.0 || stats.q > stats.n as f64 + 1e-9 {
                    return Err(format!(
                        "node {id} action {a}: q {} outside [0, n={}]",
                        stats.q, stats.n
                    ));
                }
                if let Some(child) = node.children[a] {
                    let c = &self.nodes[child];
                    if c.parent != Some((id, a)) {
                        return Err(format!("node {child}: wrong parent link"));
                    }
                    if c.state.cursor() != node.state.cursor() + 1 {
                        return Err(format!("node {child}: cursor does not advance by one"));
                    }
                    // the visit that created the child stops at its parent edge
                    let expected = if c.is_terminal() { 0 } else { stats.n.saturating_sub(1) };
                    if c.visits != expected {
                        return Err(format!(
                            "node {child}: {} visits below an edge visited {} times",
                            c.visits, stats.n
                        ));
                    }
                } else if stats.n > 0 {
                    return Err(format!("node {id} action {a}: visited but never expanded"));
                }
            }
        }
        Ok(())
    }
}
