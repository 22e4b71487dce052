use serde::{Deserialize, Serialize};

use super::primitives::{conv3x3_params, op_flops, op_params, pointwise_params};
use super::{ArchGraph, Layer, LayerKind, Shape};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerStats {
    pub id: usize,
    pub name: String,
    pub params: u64,
    pub flops: u64,
    pub out_shape: Shape,
}

/// Size report for an assembled network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchStats {
    pub total_params: u64,
    pub total_flops: u64,
    pub input_shape: Shape,
    pub output_shape: Shape,
    pub bottleneck_shape: Shape,
    pub per_layer: Vec<LayerStats>,
}

fn layer_cost(layer: &Layer) -> (u64, u64) {
    let cin = layer.in_shape.channels;
    let cout = layer.out_shape.channels;
    let out_hw = layer.out_shape.area();
    match layer.kind {
        LayerKind::Input | LayerKind::Sum | LayerKind::Concat => (0, 0),
        LayerKind::Stem => (conv3x3_params(cin, cout), 2 * cin * cout * 9 * out_hw),
        LayerKind::Preprocess { .. } | LayerKind::Project => (pointwise_params(cin, cout), 2 * cin * cout * out_hw),
        LayerKind::Head => (cin * cout, 2 * cin * cout * out_hw),
        LayerKind::Edge { op } => (
            op_params(op, cin, cout),
            op_flops(op, cin, cout, layer.in_shape.area(), out_hw),
        ),
    }
}

pub fn analyze(graph: &ArchGraph) -> ArchStats {
    let per_layer: Vec<LayerStats> = graph
        .layers
        .iter()
        .map(|layer| {
            let (params, flops) = layer_cost(layer);
            LayerStats {
                id: layer.id,
                name: layer.name.clone(),
                params,
                flops,
                out_shape: layer.out_shape,
            }
        })
        .collect();
    ArchStats {
        total_params: per_layer.iter().map(|l| l.params).sum(),
        total_flops: per_layer.iter().map(|l| l.flops).sum(),
        input_shape: graph.input_shape(),
        output_shape: graph.output_shape(),
        bottleneck_shape: graph.bottleneck_shape(),
        per_layer,
    }
}
