//! Assembly of a genotype into the U-shaped macro network.
//!
//! Layout for `L1` cells per path:
//!
//! ```text
//! input -> stem(3x3) -> Down_1 -> ... -> Down_L1 -> Up_{L1-1} -> ... -> Up_0 -> head(1x1)
//!            |            |                           ^                   ^
//!            |            +----------- skip ----------+ ...               |
//!            +------------------------- skip ---------------------------- +
//! ```
//!
//! A DownSC cell at depth `d` reads the two previous layers (the stem twice
//! for the first cell). An UpSC cell at depth `d` reads the encoder layer at
//! the same depth as input 0 and the previous decoder layer as input 1.
//! Each cell projects its inputs to the node width with 1x1 convolutions,
//! sums two transformed inputs per node, concatenates the `M` nodes and
//! projects back to the cell's output width.

mod primitives;
mod stats;

pub use primitives::{
    check_channels, conv3x3_params, norm_params, op_flops, op_params, op_weights, pointwise_params, SHUFFLE_GROUPS,
};
pub use stats::{analyze, ArchStats, LayerStats};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{CellKind, Genotype, Op, SpatialEffect, CELL_INPUTS};

/// Channels x height x width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub channels: u64,
    pub height: u64,
    pub width: u64,
}

impl Shape {
    pub fn new(channels: u64, height: u64, width: u64) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub fn area(&self) -> u64 {
        self.height * self.width
    }

    fn with_channels(self, channels: u64) -> Self {
        Self { channels, ..self }
    }

    fn resized(self, effect: SpatialEffect) -> Self {
        match effect {
            SpatialEffect::Halve => Self {
                height: self.height / 2,
                width: self.width / 2,
                ..self
            },
            SpatialEffect::Double => Self {
                height: self.height * 2,
                width: self.width * 2,
                ..self
            },
            SpatialEffect::Keep => self,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacroConfig {
    /// Cells per path; the network holds `2 * cells_per_path` cells.
    pub cells_per_path: usize,
    pub base_channels: u64,
    /// Channel multiplier per depth level (applied going down, undone going up).
    pub channel_multiplier: u64,
    pub input_shape: Shape,
    pub num_classes: u64,
}

impl Default for MacroConfig {
    fn default() -> Self {
        Self {
            cells_per_path: 4,
            base_channels: 16,
            channel_multiplier: 2,
            input_shape: Shape::new(1, 64, 64),
            num_classes: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssemblyError {
    #[error("macro config: {0}")]
    Config(String),
    #[error("genotype has no {0} cell")]
    MissingCell(CellKind),
    #[error("layer {layer}: {message}")]
    Shape { layer: String, message: String },
}

impl MacroConfig {
    pub fn validate(&self) -> Result<(), AssemblyError> {
        let bad = |m: String| Err(AssemblyError::Config(m));
        if self.cells_per_path == 0 {
            return bad("cells_per_path must be at least 1".into());
        }
        if self.cells_per_path > 16 {
            return bad(format!("cells_per_path {} exceeds 16", self.cells_per_path));
        }
        if self.base_channels == 0 || self.channel_multiplier == 0 || self.num_classes == 0 {
            return bad("channel counts must be positive".into());
        }
        let s = self.input_shape;
        if s.channels == 0 {
            return bad("input must have at least one channel".into());
        }
        let factor = 1u64 << self.cells_per_path;
        if s.height == 0 || s.width == 0 || !s.height.is_multiple_of(factor) || !s.width.is_multiple_of(factor) {
            return bad(format!(
                "input {}x{} is not divisible by 2^{} = {factor}",
                s.height, s.width, self.cells_per_path
            ));
        }
        if self
            .channel_multiplier
            .checked_pow(self.cells_per_path as u32)
            .and_then(|m| m.checked_mul(self.base_channels))
            .is_none_or(|c| c > 1 << 20)
        {
            return bad("channel widths overflow".into());
        }
        Ok(())
    }

    /// Output width of the layer at `depth` (stem and cells alike).
    pub fn channels_at(&self, depth: usize) -> u64 {
        self.base_channels * self.channel_multiplier.pow(depth as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Input,
    /// 3x3 convolution plus normalization.
    Stem,
    /// 1x1 convolution plus normalization mapping a cell input to node width.
    Preprocess {
        stride: u64,
    },
    Edge {
        op: Op,
    },
    /// Elementwise sum of a node's two edges.
    Sum,
    Concat,
    /// 1x1 convolution plus normalization after the concatenation.
    Project,
    /// Final 1x1 classifier, no normalization.
    Head,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub id: usize,
    pub name: String,
    pub kind: LayerKind,
    pub inputs: Vec<usize>,
    pub in_shape: Shape,
    pub out_shape: Shape,
    /// Index into [`ArchGraph::cells`] for layers inside a cell.
    pub cell: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellInstance {
    pub kind: CellKind,
    pub depth: usize,
    pub inputs: [usize; 2],
    pub output: usize,
}

/// The assembled network, layers in topological order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchGraph {
    pub layers: Vec<Layer>,
    pub cells: Vec<CellInstance>,
    /// (encoder layer, decoder cell index) pairs at equal depth.
    pub skip_links: Vec<(usize, usize)>,
    pub nodes_per_cell: usize,
}

impl ArchGraph {
    pub fn input_shape(&self) -> Shape {
        self.layers[0].out_shape
    }

    pub fn output_shape(&self) -> Shape {
        self.layers.last().expect("graph has layers").out_shape
    }

    /// Output shape of the deepest encoder cell (the output shape when the
    /// graph has no cells).
    pub fn bottleneck_shape(&self) -> Shape {
        self.cells
            .iter()
            .filter(|c| c.kind == CellKind::Down)
            .max_by_key(|c| c.depth)
            .map_or_else(|| self.output_shape(), |c| self.layers[c.output].out_shape)
    }

    /// An input followed by one primitive, for costing it in isolation.
    pub fn single_op(op: Op, input: Shape, cout: u64) -> Result<Self, AssemblyError> {
        let name = format!("{op}");
        check_channels(op, input.channels, cout).map_err(|e| shape_err(&name, e.0))?;
        let out = input.with_channels(cout).resized(op.spatial_effect());
        if out.height == 0 || out.width == 0 {
            return Err(shape_err(
                &name,
                format!("{}x{} input vanishes", input.height, input.width),
            ));
        }
        let mut b = Builder { layers: Vec::new() };
        let root = b.push("input".into(), LayerKind::Input, Vec::new(), input, None);
        b.push(name, LayerKind::Edge { op }, vec![root], out, None);
        Ok(Self {
            layers: b.layers,
            cells: Vec::new(),
            skip_links: Vec::new(),
            nodes_per_cell: 0,
        })
    }

    pub fn layers_in_cell(&self, cell: usize) -> impl Iterator<Item = &Layer> {
        self.layers.iter().filter(move |l| l.cell == Some(cell))
    }
}

struct Builder {
    layers: Vec<Layer>,
}

impl Builder {
    fn push(
        &mut self,
        name: String,
        kind: LayerKind,
        inputs: Vec<usize>,
        out_shape: Shape,
        cell: Option<usize>,
    ) -> usize {
        let id = self.layers.len();
        let in_shape = inputs.first().map_or(out_shape, |&i| self.layers[i].out_shape);
        self.layers.push(Layer {
            id,
            name,
            kind,
            inputs,
            in_shape,
            out_shape,
            cell,
        });
        id
    }

    fn shape(&self, id: usize) -> Shape {
        self.layers[id].out_shape
    }
}

fn shape_err(layer: &str, message: impl Into<String>) -> AssemblyError {
    AssemblyError::Shape {
        layer: layer.to_string(),
        message: message.into(),
    }
}

/// Builds the full network graph for `genotype`.
pub fn assemble(genotype: &Genotype, macro_cfg: &MacroConfig) -> Result<ArchGraph, AssemblyError> {
    macro_cfg.validate()?;
    let down = genotype.down_cell().ok_or(AssemblyError::MissingCell(CellKind::Down))?;
    let up = genotype.up_cell().ok_or(AssemblyError::MissingCell(CellKind::Up))?;
    let m = genotype.num_nodes();
    if m == 0 {
        return Err(AssemblyError::Config("genotype has no intermediate nodes".into()));
    }

    let mut b = Builder { layers: Vec::new() };
    let input = b.push("input".into(), LayerKind::Input, vec![], macro_cfg.input_shape, None);
    let stem_shape = macro_cfg.input_shape.with_channels(macro_cfg.channels_at(0));
    let stem = b.push("stem".into(), LayerKind::Stem, vec![input], stem_shape, None);

    let l1 = macro_cfg.cells_per_path;
    let mut encoder = vec![stem];
    let mut cells = Vec::with_capacity(2 * l1);
    let mut skip_links = Vec::new();

    for depth in 1..=l1 {
        let s0 = encoder[depth.saturating_sub(2)];
        let s1 = encoder[depth - 1];
        let out = build_cell(&mut b, &mut cells, down, depth, [s0, s1], macro_cfg)?;
        encoder.push(out);
    }
    let mut prev = encoder[l1];
    for depth in (0..l1).rev() {
        skip_links.push((encoder[depth], cells.len()));
        prev = build_cell(&mut b, &mut cells, up, depth, [encoder[depth], prev], macro_cfg)?;
    }

    let head_shape = b.shape(prev).with_channels(macro_cfg.num_classes);
    b.push("head".into(), LayerKind::Head, vec![prev], head_shape, None);

    Ok(ArchGraph {
        layers: b.layers,
        cells,
        skip_links,
        nodes_per_cell: m,
    })
}

fn build_cell(
    b: &mut Builder,
    cells: &mut Vec<CellInstance>,
    cell: &crate::space::CellGenotype,
    depth: usize,
    inputs: [usize; 2],
    macro_cfg: &MacroConfig,
) -> Result<usize, AssemblyError> {
    let index = cells.len();
    let tag = format!("{}{}@d{}", cell.kind, index, depth);
    let m = cell.nodes.len() as u64;
    let out_channels = macro_cfg.channels_at(depth);
    let width = out_channels.div_ceil(m);

    // Both preprocessed inputs must share the resolution the cell's input
    // edges expect: input 1's for DownSC, each input's own for UpSC.
    let target = b.shape(inputs[1]);
    let mut states = Vec::with_capacity(CELL_INPUTS + cell.nodes.len());
    for (k, &src) in inputs.iter().enumerate() {
        let src_shape = b.shape(src);
        let stride = match cell.kind {
            CellKind::Down if src_shape.height == 2 * target.height => 2,
            CellKind::Down if src_shape.height == target.height => 1,
            CellKind::Up => 1,
            _ => {
                return Err(shape_err(
                    &format!("{tag}/pre{k}"),
                    format!("cannot align input of height {} to {}", src_shape.height, target.height),
                ))
            }
        };
        let shape = Shape::new(width, src_shape.height / stride, src_shape.width / stride);
        let id = b.push(
            format!("{tag}/pre{k}"),
            LayerKind::Preprocess { stride },
            vec![src],
            shape,
            Some(index),
        );
        states.push(id);
    }

    let mut node_outputs = Vec::with_capacity(cell.nodes.len());
    for (i, node) in cell.nodes.iter().enumerate() {
        let j = CELL_INPUTS + i;
        let mut edge_ids = [0usize; 2];
        for (e, choice) in node.edges.iter().enumerate() {
            let name = format!("{tag}/n{j}e{e}");
            let src = *states
                .get(choice.pred)
                .ok_or_else(|| shape_err(&name, format!("predecessor {} not yet built", choice.pred)))?;
            let expected = cell.kind.edge_category(choice.pred);
            if choice.op.category() != expected {
                return Err(shape_err(
                    &name,
                    format!("`{}` on an edge that needs a {expected} primitive", choice.op),
                ));
            }
            let in_shape = b.shape(src);
            check_channels(choice.op, in_shape.channels, width).map_err(|e| shape_err(&name, e.0))?;
            let out = in_shape.with_channels(width).resized(choice.op.spatial_effect());
            edge_ids[e] = b.push(name, LayerKind::Edge { op: choice.op }, vec![src], out, Some(index));
        }
        let (a, c) = (b.shape(edge_ids[0]), b.shape(edge_ids[1]));
        let name = format!("{tag}/n{j}");
        if a != c {
            return Err(shape_err(&name, format!("summed edges disagree: {a:?} vs {c:?}")));
        }
        let id = b.push(name, LayerKind::Sum, edge_ids.to_vec(), a, Some(index));
        states.push(id);
        node_outputs.push(id);
    }

    let first = b.shape(node_outputs[0]);
    if let Some(&bad) = node_outputs.iter().find(|&&n| b.shape(n) != first) {
        return Err(shape_err(
            &b.layers[bad].name.clone(),
            "intermediate nodes differ in shape and cannot be concatenated",
        ));
    }
    let concat_shape = first.with_channels(width * m);
    let concat = b.push(
        format!("{tag}/concat"),
        LayerKind::Concat,
        node_outputs,
        concat_shape,
        Some(index),
    );
    let out = b.push(
        format!("{tag}/project"),
        LayerKind::Project,
        vec![concat],
        concat_shape.with_channels(out_channels),
        Some(index),
    );
    cells.push(CellInstance {
        kind: cell.kind,
        depth,
        inputs,
        output: out,
    });
    Ok(out)
}
