//! The primitive-operation catalog, cell grammar and genotype encoding.
//!
//! A genotype is built one slot at a time. Slots are laid out cell by cell
//! (DownSC first, then UpSC), node by node (`2..=M+1`), and within a node
//! edge 0 then edge 1. Each slot holds an [`EdgeChoice`]: the predecessor
//! node it reads from and the primitive applied on that edge.

mod codec;
mod enumerate;
mod genotype;

pub use codec::{decode, encode, CodecError, HEADER};
pub use enumerate::{enumerate_space, sample_uniform, space_size, EnumerateError, SpaceIter, DEFAULT_CAP};
pub use genotype::{
    legal_actions, validate, CellGenotype, EdgeChoice, Genotype, NodeGenotype, PartialGenotype, SlotPos, Violation,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of incoming edges every intermediate node selects.
pub const EDGES_PER_NODE: usize = 2;

/// Number of cell inputs; intermediate nodes are numbered from here.
pub const CELL_INPUTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Down,
    Up,
    Normal,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Down => "down",
            Category::Up => "up",
            Category::Normal => "normal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpatialEffect {
    Halve,
    Double,
    Keep,
}

/// Parameter-count recipe family shared by related primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamFormula {
    /// Parameter-free; a 1x1 adapter is added when channels change.
    Free,
    /// Dense 3x3 convolution plus normalization.
    Conv3x3,
    /// Depthwise 3x3, pointwise 1x1, normalization.
    Separable,
    /// Dense 3x3 convolution with dilation 2 plus normalization.
    Dilated3x3,
    /// Squeeze-excitation channel gate with reduction 2.
    ChannelGate,
    /// Grouped 3x3 convolution (4 groups) with channel shuffle.
    GroupedShuffle,
}

/// The 16 primitive operations, in catalog order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    AvgPool,
    MaxPool,
    DownConv,
    DownDepConv,
    DownDilConv,
    DownCweight,
    UpCweight,
    UpDepConv,
    UpConv,
    UpDilConv,
    Identity,
    DepConv,
    DilConv,
    Cweight,
    Conv,
    ShuffleConv,
}

impl Op {
    pub const ALL: [Op; 16] = [
        Op::AvgPool,
        Op::MaxPool,
        Op::DownConv,
        Op::DownDepConv,
        Op::DownDilConv,
        Op::DownCweight,
        Op::UpCweight,
        Op::UpDepConv,
        Op::UpConv,
        Op::UpDilConv,
        Op::Identity,
        Op::DepConv,
        Op::DilConv,
        Op::Cweight,
        Op::Conv,
        Op::ShuffleConv,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Op::AvgPool => "avg_pool",
            Op::MaxPool => "max_pool",
            Op::DownConv => "down_conv",
            Op::DownDepConv => "down_dep_conv",
            Op::DownDilConv => "down_dil_conv",
            Op::DownCweight => "down_cweight",
            Op::UpCweight => "up_cweight",
            Op::UpDepConv => "up_dep_conv",
            Op::UpConv => "up_conv",
            Op::UpDilConv => "up_dil_conv",
            Op::Identity => "identity",
            Op::DepConv => "dep_conv",
            Op::DilConv => "dil_conv",
            Op::Cweight => "cweight",
            Op::Conv => "conv",
            Op::ShuffleConv => "shuffle_conv",
        }
    }

    pub fn category(self) -> Category {
        match self {
            Op::AvgPool | Op::MaxPool | Op::DownConv | Op::DownDepConv | Op::DownDilConv | Op::DownCweight => {
                Category::Down
            }
            Op::UpCweight | Op::UpDepConv | Op::UpConv | Op::UpDilConv => Category::Up,
            _ => Category::Normal,
        }
    }

    pub fn spatial_effect(self) -> SpatialEffect {
        match self.category() {
            Category::Down => SpatialEffect::Halve,
            Category::Up => SpatialEffect::Double,
            Category::Normal => SpatialEffect::Keep,
        }
    }

    pub fn param_formula(self) -> ParamFormula {
        match self {
            Op::AvgPool | Op::MaxPool | Op::Identity => ParamFormula::Free,
            Op::DownConv | Op::UpConv | Op::Conv => ParamFormula::Conv3x3,
            Op::DownDepConv | Op::UpDepConv | Op::DepConv => ParamFormula::Separable,
            Op::DownDilConv | Op::UpDilConv | Op::DilConv => ParamFormula::Dilated3x3,
            Op::DownCweight | Op::UpCweight | Op::Cweight => ParamFormula::ChannelGate,
            Op::ShuffleConv => ParamFormula::GroupedShuffle,
        }
    }

    /// Position in the full catalog.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn descriptor(self) -> OperationDescriptor {
        OperationDescriptor {
            op: self,
            category: self.category(),
            spatial_effect: self.spatial_effect(),
            param_formula: self.param_formula(),
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown operation token `{0}`")]
pub struct UnknownOp(pub String);

impl FromStr for Op {
    type Err = UnknownOp;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Op::ALL
            .iter()
            .copied()
            .find(|op| op.token() == s)
            .ok_or_else(|| UnknownOp(s.to_string()))
    }
}

impl Serialize for Op {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.token())
    }
}

impl<'de> Deserialize<'de> for Op {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OperationDescriptor {
    pub op: Op,
    pub category: Category,
    pub spatial_effect: SpatialEffect,
    pub param_formula: ParamFormula,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Down,
    Up,
}

impl CellKind {
    pub fn token(self) -> &'static str {
        match self {
            CellKind::Down => "down",
            CellKind::Up => "up",
        }
    }

    /// Category of primitive allowed on an edge reading from `pred`.
    ///
    /// DownSC: edges from either cell input reduce, internal edges keep.
    /// UpSC: the edge from input 1 (the lower-resolution decoder input)
    /// upsamples, every other edge keeps.
    pub fn edge_category(self, pred: usize) -> Category {
        match self {
            CellKind::Down if pred < CELL_INPUTS => Category::Down,
            CellKind::Up if pred == 1 => Category::Up,
            _ => Category::Normal,
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Optional per-category restriction of the catalog.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpSubset {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub down: Option<Vec<Op>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub up: Option<Vec<Op>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal: Option<Vec<Op>>,
}

impl OpSubset {
    fn get(&self, category: Category) -> Option<&Vec<Op>> {
        match category {
            Category::Down => self.down.as_ref(),
            Category::Up => self.up.as_ref(),
            Category::Normal => self.normal.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpaceConfigError {
    #[error("num_intermediate_nodes must be at least 1")]
    NoIntermediateNodes,
    #[error("num_intermediate_nodes {0} exceeds the supported maximum of 64")]
    TooManyNodes(usize),
    #[error("cell_types must list DownSC and/or UpSC once each, in that order")]
    BadCellTypes,
    #[error("op_subset for the {0} category is empty")]
    EmptySubset(Category),
    #[error("op_subset for the {category} category contains `{op}`, which is a {actual} primitive")]
    WrongCategory {
        category: Category,
        op: Op,
        actual: Category,
    },
    #[error("op_subset for the {category} category lists `{op}` twice")]
    DuplicateOp { category: Category, op: Op },
}

/// Shape of the search space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpaceConfig {
    pub num_intermediate_nodes: usize,
    pub cell_types: Vec<CellKind>,
    pub op_subset: OpSubset,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        Self {
            num_intermediate_nodes: 4,
            cell_types: vec![CellKind::Down, CellKind::Up],
            op_subset: OpSubset::default(),
        }
    }
}

impl SpaceConfig {
    pub fn with_nodes(mut self, m: usize) -> Self {
        self.num_intermediate_nodes = m;
        self
    }

    pub fn with_cells(mut self, cells: &[CellKind]) -> Self {
        self.cell_types = cells.to_vec();
        self
    }

    pub fn with_subset(mut self, category: Category, ops: &[Op]) -> Self {
        let slot = match category {
            Category::Down => &mut self.op_subset.down,
            Category::Up => &mut self.op_subset.up,
            Category::Normal => &mut self.op_subset.normal,
        };
        *slot = Some(ops.to_vec());
        self
    }

    pub fn validate(&self) -> Result<(), SpaceConfigError> {
        if self.num_intermediate_nodes == 0 {
            return Err(SpaceConfigError::NoIntermediateNodes);
        }
        if self.num_intermediate_nodes > 64 {
            return Err(SpaceConfigError::TooManyNodes(self.num_intermediate_nodes));
        }
        let cells_ok = matches!(
            self.cell_types.as_slice(),
            [CellKind::Down] | [CellKind::Up] | [CellKind::Down, CellKind::Up]
        );
        if !cells_ok {
            return Err(SpaceConfigError::BadCellTypes);
        }
        for category in [Category::Down, Category::Up, Category::Normal] {
            let Some(ops) = self.op_subset.get(category) else {
                continue;
            };
            if ops.is_empty() {
                return Err(SpaceConfigError::EmptySubset(category));
            }
            for (i, &op) in ops.iter().enumerate() {
                if op.category() != category {
                    return Err(SpaceConfigError::WrongCategory {
                        category,
                        op,
                        actual: op.category(),
                    });
                }
                if ops[..i].contains(&op) {
                    return Err(SpaceConfigError::DuplicateOp { category, op });
                }
            }
        }
        Ok(())
    }

    /// Allowed primitives of one category, in catalog order.
    pub fn ops_for(&self, category: Category) -> Vec<Op> {
        let subset = self.op_subset.get(category);
        Op::ALL
            .iter()
            .copied()
            .filter(|op| op.category() == category)
            .filter(|op| subset.is_none_or(|s| s.contains(op)))
            .collect()
    }

    pub fn allows(&self, op: Op) -> bool {
        self.op_subset.get(op.category()).is_none_or(|s| s.contains(&op))
    }

    /// Total number of slots in a complete genotype.
    pub fn slot_count(&self) -> usize {
        self.cell_types.len() * self.num_intermediate_nodes * EDGES_PER_NODE
    }

    /// Cell, node and edge addressed by global slot index.
    pub fn slot(&self, index: usize) -> SlotPos {
        let per_cell = self.num_intermediate_nodes * EDGES_PER_NODE;
        let cell = self.cell_types[index / per_cell];
        let within = index % per_cell;
        SlotPos {
            cell,
            node: CELL_INPUTS + within / EDGES_PER_NODE,
            edge: within % EDGES_PER_NODE,
        }
    }
}

/// The (possibly restricted) primitive catalog.
pub fn primitive_catalog(config: &SpaceConfig) -> Result<Vec<OperationDescriptor>, SpaceConfigError> {
    config.validate()?;
    Ok(Op::ALL
        .iter()
        .copied()
        .filter(|&op| config.allows(op))
        .map(Op::descriptor)
        .collect())
}
