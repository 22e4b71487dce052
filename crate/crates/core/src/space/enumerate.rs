use rand::Rng;
use thiserror::Error;

use super::{CellGenotype, CellKind, EdgeChoice, Genotype, NodeGenotype, SpaceConfig, SpaceConfigError, CELL_INPUTS};

/// Largest space `enumerate_space` walks unless told otherwise.
pub const DEFAULT_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumerateError {
    #[error(transparent)]
    Config(#[from] SpaceConfigError),
    #[error("space holds {size} genotypes, above the enumeration cap of {cap}")]
    TooLarge { size: u128, cap: u128 },
}

type NodeOption = (EdgeChoice, EdgeChoice);

/// Canonical edge pairs available to one node: distinct predecessors in
/// increasing order, each carrying a primitive of its edge category.
fn node_options(config: &SpaceConfig, kind: CellKind, node: usize) -> Vec<NodeOption> {
    let mut out = Vec::new();
    for a in 0..node {
        for b in a + 1..node {
            let ops_a = config.ops_for(kind.edge_category(a));
            let ops_b = config.ops_for(kind.edge_category(b));
            for &op_a in &ops_a {
                for &op_b in &ops_b {
                    out.push((EdgeChoice::new(a, op_a), EdgeChoice::new(b, op_b)));
                }
            }
        }
    }
    out
}

fn option_count(config: &SpaceConfig, kind: CellKind, node: usize) -> u128 {
    let mut total = 0u128;
    for a in 0..node {
        for b in a + 1..node {
            let na = config.ops_for(kind.edge_category(a)).len() as u128;
            let nb = config.ops_for(kind.edge_category(b)).len() as u128;
            total += na * nb;
        }
    }
    total
}

fn nodes_of(config: &SpaceConfig) -> impl Iterator<Item = (CellKind, usize)> + '_ {
    config
        .cell_types
        .iter()
        .flat_map(move |&kind| (CELL_INPUTS..CELL_INPUTS + config.num_intermediate_nodes).map(move |j| (kind, j)))
}

/// Number of distinct canonical genotypes, saturating at `u128::MAX`.
pub fn space_size(config: &SpaceConfig) -> Result<u128, SpaceConfigError> {
    config.validate()?;
    Ok(nodes_of(config).fold(1u128, |acc, (kind, j)| {
        acc.saturating_mul(option_count(config, kind, j))
    }))
}

/// Walks every canonical genotype exactly once, last node varying fastest.
pub fn enumerate_space(config: &SpaceConfig, cap: u128) -> Result<SpaceIter, EnumerateError> {
    let size = space_size(config)?;
    if size > cap {
        return Err(EnumerateError::TooLarge { size, cap });
    }
    let tables: Vec<Vec<NodeOption>> = nodes_of(config)
        .map(|(kind, j)| node_options(config, kind, j))
        .collect();
    let done = tables.iter().any(Vec::is_empty);
    Ok(SpaceIter {
        cells: config.cell_types.clone(),
        nodes: config.num_intermediate_nodes,
        counters: vec![0; tables.len()],
        tables,
        remaining: if done { 0 } else { size },
    })
}

pub struct SpaceIter {
    cells: Vec<CellKind>,
    nodes: usize,
    tables: Vec<Vec<NodeOption>>,
    counters: Vec<usize>,
    remaining: u128,
}

fn build(cells: &[CellKind], nodes: usize, picks: impl Iterator<Item = NodeOption>) -> Genotype {
    let mut picks = picks;
    let cells = cells
        .iter()
        .map(|&kind| CellGenotype {
            kind,
            nodes: (0..nodes)
                .map(|_| {
                    let (a, b) = picks.next().expect("one pick per node");
                    NodeGenotype::new(a, b)
                })
                .collect(),
        })
        .collect();
    Genotype { cells }
}

impl Iterator for SpaceIter {
    type Item = Genotype;

    fn next(&mut self) -> Option<Genotype> {
        if self.remaining == 0 {
            return None;
        }
        let picks = self.tables.iter().zip(&self.counters).map(|(table, &i)| table[i]);
        let genotype = build(&self.cells, self.nodes, picks);
        self.remaining -= 1;
        for (counter, table) in self.counters.iter_mut().zip(&self.tables).rev() {
            *counter += 1;
            if *counter < table.len() {
                break;
            }
            *counter = 0;
        }
        Some(genotype)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (n, usize::try_from(self.remaining).ok())
    }
}

/// Draws a genotype uniformly over the canonical space.
///
/// Each node's canonical options are independent of every other node, so
/// picking each node uniformly from its own table is uniform over the product.
pub fn sample_uniform<R: Rng + ?Sized>(config: &SpaceConfig, rng: &mut R) -> Genotype {
    let picks: Vec<NodeOption> = nodes_of(config)
        .map(|(kind, j)| {
            let table = node_options(config, kind, j);
            table[rng.gen_range(0..table.len())]
        })
        .collect();
    build(&config.cell_types, config.num_intermediate_nodes, picks.into_iter())
}
