use std::fmt;

use super::{CellKind, Op, SpaceConfig, CELL_INPUTS, EDGES_PER_NODE};

/// Address of one slot in a genotype.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SlotPos {
    pub cell: CellKind,
    /// Owning intermediate node, numbered from 2.
    pub node: usize,
    pub edge: usize,
}

impl fmt::Display for SlotPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cell={} node={} edge={}", self.cell, self.node, self.edge)
    }
}

/// One incoming edge of an intermediate node. This is also the MCTS action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeChoice {
    /// 0 and 1 are the cell inputs, `2..` are earlier intermediate nodes.
    pub pred: usize,
    pub op: Op,
}

impl EdgeChoice {
    pub fn new(pred: usize, op: Op) -> Self {
        Self { pred, op }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeGenotype {
    pub edges: [EdgeChoice; EDGES_PER_NODE],
}

impl NodeGenotype {
    pub fn new(a: EdgeChoice, b: EdgeChoice) -> Self {
        Self { edges: [a, b] }
    }

    fn canonicalize(&mut self) {
        self.edges.sort_unstable();
    }

    fn is_canonical(&self) -> bool {
        self.edges.windows(2).all(|w| w[0] <= w[1])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellGenotype {
    pub kind: CellKind,
    /// Node `j` of the cell lives at `nodes[j - 2]`.
    pub nodes: Vec<NodeGenotype>,
}

/// A complete architecture: every edge of every searched cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Genotype {
    pub cells: Vec<CellGenotype>,
}

impl Genotype {
    pub fn cell(&self, kind: CellKind) -> Option<&CellGenotype> {
        self.cells.iter().find(|c| c.kind == kind)
    }

    pub fn down_cell(&self) -> Option<&CellGenotype> {
        self.cell(CellKind::Down)
    }

    pub fn up_cell(&self) -> Option<&CellGenotype> {
        self.cell(CellKind::Up)
    }

    pub fn num_nodes(&self) -> usize {
        self.cells.first().map_or(0, |c| c.nodes.len())
    }

    /// Every slot in global order.
    pub fn slots(&self) -> impl Iterator<Item = (SlotPos, EdgeChoice)> + '_ {
        self.cells.iter().flat_map(|cell| {
            cell.nodes.iter().enumerate().flat_map(move |(i, node)| {
                node.edges.iter().enumerate().map(move |(edge, &choice)| {
                    (
                        SlotPos {
                            cell: cell.kind,
                            node: CELL_INPUTS + i,
                            edge,
                        },
                        choice,
                    )
                })
            })
        })
    }

    pub fn edge_choices(&self) -> impl Iterator<Item = EdgeChoice> + '_ {
        self.slots().map(|(_, e)| e)
    }

    pub fn canonicalize(&mut self) {
        for cell in &mut self.cells {
            for node in &mut cell.nodes {
                node.canonicalize();
            }
        }
    }

    pub fn canonical(mut self) -> Self {
        self.canonicalize();
        self
    }

    pub fn is_canonical(&self) -> bool {
        self.cells
            .iter()
            .all(|c| c.nodes.iter().all(NodeGenotype::is_canonical))
    }

    /// Invariant checks that need no search-space configuration.
    pub fn structural_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let m = self.num_nodes();
        if m == 0 {
            out.push(Violation::Shape("genotype has no intermediate nodes".into()));
        }
        let kinds: Vec<CellKind> = self.cells.iter().map(|c| c.kind).collect();
        if !matches!(
            kinds.as_slice(),
            [CellKind::Down] | [CellKind::Up] | [CellKind::Down, CellKind::Up]
        ) {
            out.push(Violation::Shape(format!("unsupported cell sequence {kinds:?}")));
        }
        for cell in &self.cells {
            if cell.nodes.len() != m {
                out.push(Violation::Shape(format!(
                    "{} cell has {} nodes, expected {m}",
                    cell.kind,
                    cell.nodes.len()
                )));
            }
            for (i, node) in cell.nodes.iter().enumerate() {
                let j = CELL_INPUTS + i;
                check_node(cell.kind, j, &node.edges, &mut out);
                if !node.is_canonical() {
                    out.push(Violation::NotCanonical {
                        cell: cell.kind,
                        node: j,
                    });
                }
            }
        }
        out
    }
}

fn check_node(kind: CellKind, node: usize, edges: &[EdgeChoice], out: &mut Vec<Violation>) {
    for (edge, choice) in edges.iter().enumerate() {
        let at = SlotPos { cell: kind, node, edge };
        if choice.pred >= node {
            out.push(Violation::Cycle { at, pred: choice.pred });
            continue;
        }
        let expected = kind.edge_category(choice.pred);
        if choice.op.category() != expected {
            out.push(Violation::Category {
                at,
                op: choice.op,
                expected,
            });
        }
    }
    if let [a, b] = edges {
        if a.pred == b.pred {
            out.push(Violation::RepeatedPredecessor {
                cell: kind,
                node,
                pred: a.pred,
            });
        }
    }
}

/// A broken genotype invariant, naming where it was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Shape(String),
    Cycle {
        at: SlotPos,
        pred: usize,
    },
    Category {
        at: SlotPos,
        op: Op,
        expected: super::Category,
    },
    RepeatedPredecessor {
        cell: CellKind,
        node: usize,
        pred: usize,
    },
    NotCanonical {
        cell: CellKind,
        node: usize,
    },
    Excluded {
        at: SlotPos,
        op: Op,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape(msg) => write!(f, "shape: {msg}"),
            Violation::Cycle { at, pred } => {
                write!(f, "{at}: predecessor {pred} is not earlier than node {}", at.node)
            }
            Violation::Category { at, op, expected } => {
                write!(
                    f,
                    "{at}: `{op}` is a {} primitive, edge requires {expected}",
                    op.category()
                )
            }
            Violation::RepeatedPredecessor { cell, node, pred } => {
                write!(f, "cell={cell} node={node}: both edges read predecessor {pred}")
            }
            Violation::NotCanonical { cell, node } => {
                write!(f, "cell={cell} node={node}: edges not in canonical order")
            }
            Violation::Excluded { at, op } => {
                write!(f, "{at}: `{op}` is excluded by the configured op subset")
            }
        }
    }
}

/// Checks a genotype against every invariant of `config`'s space.
pub fn validate(genotype: &Genotype, config: &SpaceConfig) -> Result<(), Vec<Violation>> {
    let mut out = genotype.structural_violations();
    let kinds: Vec<CellKind> = genotype.cells.iter().map(|c| c.kind).collect();
    if kinds != config.cell_types {
        out.push(Violation::Shape(format!(
            "cells {kinds:?} do not match configured {:?}",
            config.cell_types
        )));
    }
    if genotype.num_nodes() != config.num_intermediate_nodes {
        out.push(Violation::Shape(format!(
            "{} intermediate nodes, configured {}",
            genotype.num_nodes(),
            config.num_intermediate_nodes
        )));
    }
    for (at, choice) in genotype.slots() {
        if !config.allows(choice.op) {
            out.push(Violation::Excluded { at, op: choice.op });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// A genotype filled up to a cursor: the MCTS tree state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartialGenotype {
    cells: Vec<CellKind>,
    nodes: usize,
    filled: Vec<EdgeChoice>,
}

impl PartialGenotype {
    pub fn empty(config: &SpaceConfig) -> Self {
        Self {
            cells: config.cell_types.clone(),
            nodes: config.num_intermediate_nodes,
            filled: Vec::with_capacity(config.slot_count()),
        }
    }

    pub fn cursor(&self) -> usize {
        self.filled.len()
    }

    pub fn slot_count(&self) -> usize {
        self.cells.len() * self.nodes * EDGES_PER_NODE
    }

    pub fn is_complete(&self) -> bool {
        self.cursor() == self.slot_count()
    }

    pub fn filled(&self) -> &[EdgeChoice] {
        &self.filled
    }

    pub fn slot(&self, index: usize) -> SlotPos {
        let per_cell = self.nodes * EDGES_PER_NODE;
        let within = index % per_cell;
        SlotPos {
            cell: self.cells[index / per_cell],
            node: CELL_INPUTS + within / EDGES_PER_NODE,
            edge: within % EDGES_PER_NODE,
        }
    }

    /// The slot the next action fills, if any.
    pub fn next_slot(&self) -> Option<SlotPos> {
        (!self.is_complete()).then(|| self.slot(self.cursor()))
    }

    /// Appends an action. Panics if the state is already complete.
    pub fn push(&mut self, action: EdgeChoice) {
        assert!(!self.is_complete(), "push on a complete genotype");
        self.filled.push(action);
    }

    pub fn with(&self, action: EdgeChoice) -> Self {
        let mut next = self.clone();
        next.push(action);
        next
    }

    /// Invariant violations among the filled slots.
    pub fn prefix_violations(&self, config: &SpaceConfig) -> Vec<Violation> {
        let mut out = Vec::new();
        for pair in self.filled.chunks(EDGES_PER_NODE).enumerate() {
            let (node_index, edges) = pair;
            let at = self.slot(node_index * EDGES_PER_NODE);
            check_node(at.cell, at.node, edges, &mut out);
            for (edge, e) in edges.iter().enumerate() {
                if !config.allows(e.op) {
                    out.push(Violation::Excluded {
                        at: SlotPos { edge, ..at },
                        op: e.op,
                    });
                }
            }
        }
        out
    }

    /// The finished genotype in canonical form, once every slot is filled.
    pub fn to_genotype(&self) -> Option<Genotype> {
        if !self.is_complete() {
            return None;
        }
        let per_cell = self.nodes * EDGES_PER_NODE;
        let cells = self
            .cells
            .iter()
            .zip(self.filled.chunks(per_cell))
            .map(|(&kind, slots)| CellGenotype {
                kind,
                nodes: slots
                    .chunks(EDGES_PER_NODE)
                    .map(|e| NodeGenotype::new(e[0], e[1]))
                    .collect(),
            })
            .collect();
        Some(Genotype { cells }.canonical())
    }
}

/// Every action legal at the state's cursor, predecessor-major then in
/// catalog order. Empty iff the state is complete.
pub fn legal_actions(state: &PartialGenotype, config: &SpaceConfig) -> Vec<EdgeChoice> {
    let Some(at) = state.next_slot() else {
        return Vec::new();
    };
    let taken = (at.edge == 1).then(|| state.filled[state.cursor() - 1].pred);
    let mut actions = Vec::new();
    for pred in 0..at.node {
        if Some(pred) == taken {
            continue;
        }
        for op in config.ops_for(at.cell.edge_category(pred)) {
            actions.push(EdgeChoice { pred, op });
        }
    }
    actions
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Category;

    fn fill_first(config: &SpaceConfig) -> Genotype {
        let mut state = PartialGenotype::empty(config);
        while !state.is_complete() {
            let acts = legal_actions(&state, config);
            state.push(*acts.last().unwrap());
        }
        state.to_genotype().unwrap()
    }

    #[test]
    fn first_down_edge_has_twelve_actions() {
        let cfg = SpaceConfig::default();
        let state = PartialGenotype::empty(&cfg);
        let acts = legal_actions(&state, &cfg);
        // exhaustive listing: preds {0,1}, each with the six Down primitives
        let mut expected = Vec::new();
        for pred in 0..2 {
            for op in Op::ALL.iter().copied().filter(|o| o.category() == Category::Down) {
                expected.push(EdgeChoice::new(pred, op));
            }
        }
        assert_eq!(acts, expected);
        assert_eq!(acts.len(), 12);
    }

    #[test]
    fn second_edge_excludes_first_predecessor() {
        let cfg = SpaceConfig::default();
        let state = PartialGenotype::empty(&cfg).with(EdgeChoice::new(1, Op::MaxPool));
        let acts = legal_actions(&state, &cfg);
        assert_eq!(acts.len(), 6);
        assert!(acts.iter().all(|a| a.pred == 0));
    }

    #[test]
    fn single_predecessor_slot_with_three_ops() {
        let cfg = SpaceConfig::default()
            .with_nodes(1)
            .with_cells(&[CellKind::Down])
            .with_subset(Category::Down, &[Op::AvgPool, Op::DownConv, Op::DownCweight]);
        let state = PartialGenotype::empty(&cfg).with(EdgeChoice::new(0, Op::AvgPool));
        let acts = legal_actions(&state, &cfg);
        assert_eq!(
            acts,
            vec![
                EdgeChoice::new(1, Op::AvgPool),
                EdgeChoice::new(1, Op::DownConv),
                EdgeChoice::new(1, Op::DownCweight),
            ]
        );
    }

    #[test]
    fn up_cell_edge_categories() {
        let cfg = SpaceConfig::default().with_cells(&[CellKind::Up]);
        let state = PartialGenotype::empty(&cfg);
        let acts = legal_actions(&state, &cfg);
        assert_eq!(acts.iter().filter(|a| a.pred == 0).count(), 6);
        assert!(acts
            .iter()
            .filter(|a| a.pred == 1)
            .all(|a| a.op.category() == Category::Up));
        assert_eq!(acts.len(), 10);
    }

    #[test]
    fn complete_state_has_no_actions() {
        let cfg = SpaceConfig::default();
        let mut state = PartialGenotype::empty(&cfg);
        while !state.is_complete() {
            let acts = legal_actions(&state, &cfg);
            assert!(!acts.is_empty());
            state.push(acts[0]);
        }
        assert!(legal_actions(&state, &cfg).is_empty());
        assert_eq!(validate(&state.to_genotype().unwrap(), &cfg), Ok(()));
    }

    #[test]
    fn filled_genotype_validates() {
        let cfg = SpaceConfig::default();
        assert_eq!(validate(&fill_first(&cfg), &cfg), Ok(()));
    }

    #[test]
    fn forward_reference_is_a_cycle() {
        let cfg = SpaceConfig::default();
        let mut g = fill_first(&cfg);
        g.cells[0].nodes[0].edges[1] = EdgeChoice::new(3, Op::Identity);
        let errs = validate(&g, &cfg).unwrap_err();
        assert!(errs.iter().any(|v| matches!(
            v,
            Violation::Cycle {
                at: SlotPos {
                    cell: CellKind::Down,
                    node: 2,
                    edge: 1
                },
                pred: 3
            }
        )));
    }

    #[test]
    fn up_op_inside_down_cell_is_rejected() {
        let cfg = SpaceConfig::default();
        let mut g = fill_first(&cfg);
        // node 3 edge 1 reads from node 2, an internal edge: Normal only
        g.cells[0].nodes[1].edges[1] = EdgeChoice::new(2, Op::UpConv);
        let errs = validate(&g, &cfg).unwrap_err();
        assert!(errs.iter().any(|v| matches!(
            v,
            Violation::Category {
                op: Op::UpConv,
                expected: Category::Normal,
                ..
            }
        )));
    }

    #[test]
    fn unsorted_node_is_not_canonical() {
        let cfg = SpaceConfig::default();
        let mut g = fill_first(&cfg);
        g.cells[0].nodes[0].edges.swap(0, 1);
        let errs = validate(&g, &cfg).unwrap_err();
        assert_eq!(
            errs,
            vec![Violation::NotCanonical {
                cell: CellKind::Down,
                node: 2
            }]
        );
        g.canonicalize();
        assert_eq!(validate(&g, &cfg), Ok(()));
    }

    #[test]
    fn excluded_op_is_reported() {
        let full = SpaceConfig::default();
        let g = fill_first(&full);
        let narrow = SpaceConfig::default().with_subset(Category::Normal, &[Op::Identity]);
        let errs = validate(&g, &narrow).unwrap_err();
        assert!(errs.iter().all(|v| matches!(v, Violation::Excluded { .. })));
        assert!(!errs.is_empty());
    }
}
