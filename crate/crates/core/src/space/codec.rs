//! Line-oriented text form of a genotype.
//!
//! ```text
//! mnasgeno v1
//! cell=down node=2 edge=0 pred=0 op=avg_pool
//! cell=down node=2 edge=1 pred=1 op=down_conv
//! ...
//! ```
//!
//! One line per slot in global slot order, LF terminated.

use std::fmt::Write as _;

use thiserror::Error;

use super::{CellGenotype, CellKind, EdgeChoice, Genotype, NodeGenotype, Op, Violation, CELL_INPUTS};

pub const HEADER: &str = "mnasgeno v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown op token `{token}`")]
    UnknownOp { line: usize, token: String },
    #[error("genotype violates invariants: {}", join(.0))]
    Invalid(Vec<Violation>),
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub fn encode(genotype: &Genotype) -> String {
    let mut out = String::with_capacity(48 * (genotype.num_nodes() * 4 + 1));
    out.push_str(HEADER);
    out.push('\n');
    for (at, choice) in genotype.slots() {
        writeln!(
            out,
            "cell={} node={} edge={} pred={} op={}",
            at.cell, at.node, at.edge, choice.pred, choice.op
        )
        .expect("writing to a String");
    }
    out
}

struct SlotLine {
    cell: CellKind,
    node: usize,
    edge: usize,
    choice: EdgeChoice,
}

fn syntax(line: usize, message: impl Into<String>) -> CodecError {
    CodecError::Syntax {
        line,
        message: message.into(),
    }
}

fn field<'a>(line: usize, part: Option<&'a str>, key: &str) -> Result<&'a str, CodecError> {
    let part = part.ok_or_else(|| syntax(line, format!("missing `{key}=` field")))?;
    part.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| syntax(line, format!("expected `{key}=`, found `{part}`")))
}

fn number(line: usize, value: &str, key: &str) -> Result<usize, CodecError> {
    if value.is_empty() || !value.bytes().all(|b| b.is_ascii_digit()) || value.len() > 6 {
        return Err(syntax(
            line,
            format!("`{key}` must be a small decimal integer, found `{value}`"),
        ));
    }
    value
        .parse()
        .map_err(|_| syntax(line, format!("bad `{key}` value `{value}`")))
}

fn parse_slot(line: usize, text: &str) -> Result<SlotLine, CodecError> {
    let mut parts = text.split(' ');
    let cell = match field(line, parts.next(), "cell")? {
        "down" => CellKind::Down,
        "up" => CellKind::Up,
        other => return Err(syntax(line, format!("unknown cell type `{other}`"))),
    };
    let node = number(line, field(line, parts.next(), "node")?, "node")?;
    let edge = number(line, field(line, parts.next(), "edge")?, "edge")?;
    let pred = number(line, field(line, parts.next(), "pred")?, "pred")?;
    let token = field(line, parts.next(), "op")?;
    if let Some(extra) = parts.next() {
        return Err(syntax(line, format!("trailing content `{extra}`")));
    }
    let op: Op = token.parse().map_err(|_| CodecError::UnknownOp {
        line,
        token: token.to_string(),
    })?;
    Ok(SlotLine {
        cell,
        node,
        edge,
        choice: EdgeChoice { pred, op },
    })
}

/// Parses the text form. Edges within a node may appear in either
/// predecessor order; the result is canonicalized before validation.
pub fn decode(text: &str) -> Result<Genotype, CodecError> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut lines = body.split('\n');
    match lines.next() {
        Some(HEADER) => {}
        Some(other) if other.starts_with("mnasgeno ") => {
            return Err(syntax(1, format!("unsupported version header `{other}`")))
        }
        _ => return Err(syntax(1, format!("expected header `{HEADER}`"))),
    }

    let mut cells: Vec<CellGenotype> = Vec::new();
    let mut pending: Option<EdgeChoice> = None;
    for (i, text) in lines.enumerate() {
        let line = i + 2;
        if text.contains('\r') {
            return Err(syntax(line, "carriage return in line (LF endings required)"));
        }
        let slot = parse_slot(line, text)?;

        // Slots must arrive in global order: cell, then node from 2, then edge.
        let expected_node = match (cells.last(), pending) {
            (Some(c), _) if c.kind == slot.cell => CELL_INPUTS + c.nodes.len(),
            (_, Some(_)) => return Err(syntax(line, "node is missing its second edge")),
            (Some(c), None) => {
                if slot.cell <= c.kind {
                    return Err(syntax(line, format!("cell `{}` out of order", slot.cell)));
                }
                cells.push(CellGenotype {
                    kind: slot.cell,
                    nodes: Vec::new(),
                });
                CELL_INPUTS
            }
            (None, _) => {
                cells.push(CellGenotype {
                    kind: slot.cell,
                    nodes: Vec::new(),
                });
                CELL_INPUTS
            }
        };
        let expected_edge = usize::from(pending.is_some());
        if slot.node != expected_node || slot.edge != expected_edge {
            return Err(syntax(
                line,
                format!(
                    "expected node={expected_node} edge={expected_edge}, found node={} edge={}",
                    slot.node, slot.edge
                ),
            ));
        }
        match pending.take() {
            None => pending = Some(slot.choice),
            Some(first) => cells
                .last_mut()
                .expect("cell pushed above")
                .nodes
                .push(NodeGenotype::new(first, slot.choice)),
        }
    }
    if pending.is_some() {
        return Err(syntax(0, "truncated: last node is missing its second edge"));
    }
    if cells.is_empty() {
        return Err(syntax(2, "no slot lines"));
    }

    let genotype = Genotype { cells }.canonical();
    let violations = genotype.structural_violations();
    if violations.is_empty() {
        Ok(genotype)
    } else {
        Err(CodecError::Invalid(violations))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{legal_actions, PartialGenotype, SpaceConfig};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_genotype(config: &SpaceConfig, seed: u64) -> Genotype {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = PartialGenotype::empty(config);
        while !state.is_complete() {
            let acts = legal_actions(&state, config);
            state.push(acts[rng.gen_range(0..acts.len())]);
        }
        state.to_genotype().unwrap()
    }

    #[test]
    fn encodes_exact_lines() {
        let cfg = SpaceConfig::default().with_nodes(1);
        let g = Genotype {
            cells: vec![
                CellGenotype {
                    kind: CellKind::Down,
                    nodes: vec![NodeGenotype::new(
                        EdgeChoice::new(0, Op::AvgPool),
                        EdgeChoice::new(1, Op::DownDepConv),
                    )],
                },
                CellGenotype {
                    kind: CellKind::Up,
                    nodes: vec![NodeGenotype::new(
                        EdgeChoice::new(0, Op::Identity),
                        EdgeChoice::new(1, Op::UpConv),
                    )],
                },
            ],
        };
        assert_eq!(crate::space::validate(&g, &cfg), Ok(()));
        assert_eq!(
            encode(&g),
            "mnasgeno v1\n\
             cell=down node=2 edge=0 pred=0 op=avg_pool\n\
             cell=down node=2 edge=1 pred=1 op=down_dep_conv\n\
             cell=up node=2 edge=0 pred=0 op=identity\n\
             cell=up node=2 edge=1 pred=1 op=up_conv\n"
        );
    }

    #[test]
    fn rejects_non_genotype() {
        assert!(matches!(
            decode("not a genotype"),
            Err(CodecError::Syntax { line: 1, .. })
        ));
        assert!(matches!(decode(""), Err(CodecError::Syntax { .. })));
        assert!(matches!(
            decode("mnasgeno v2\n"),
            Err(CodecError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn unknown_token_is_distinct() {
        let text = "mnasgeno v1\ncell=down node=2 edge=0 pred=0 op=avg pool\n";
        assert!(matches!(decode(text), Err(CodecError::Syntax { line: 2, .. })));
        let text = "mnasgeno v1\ncell=down node=2 edge=0 pred=0 op=warp_conv\n\
                    cell=down node=2 edge=1 pred=1 op=avg_pool\n";
        assert_eq!(
            decode(text),
            Err(CodecError::UnknownOp {
                line: 2,
                token: "warp_conv".into()
            })
        );
    }

    #[test]
    fn invariant_violation_is_distinct() {
        // conv is Normal; an input edge of a DownSC cell needs a Down primitive
        let text = "mnasgeno v1\ncell=down node=2 edge=0 pred=0 op=conv\n\
                    cell=down node=2 edge=1 pred=1 op=avg_pool\n";
        assert!(matches!(decode(text), Err(CodecError::Invalid(_))));
        let text = "mnasgeno v1\ncell=down node=2 edge=0 pred=2 op=identity\n\
                    cell=down node=2 edge=1 pred=1 op=avg_pool\n";
        match decode(text) {
            Err(CodecError::Invalid(v)) => {
                assert!(v.iter().any(|v| matches!(v, Violation::Cycle { pred: 2, .. })))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_order_slots_are_syntax_errors() {
        let text = "mnasgeno v1\ncell=down node=2 edge=1 pred=0 op=avg_pool\n";
        assert!(matches!(decode(text), Err(CodecError::Syntax { line: 2, .. })));
        let text = "mnasgeno v1\ncell=down node=2 edge=0 pred=0 op=avg_pool\n";
        assert!(matches!(decode(text), Err(CodecError::Syntax { .. })));
        let text = "mnasgeno v1\ncell=down node=2 edge=0 pred=0 op=avg_pool\r\n";
        assert!(matches!(decode(text), Err(CodecError::Syntax { line: 2, .. })));
    }

    #[test]
    fn permuted_edges_canonicalize_to_same_text() {
        let cfg = SpaceConfig::default();
        let g = random_genotype(&cfg, 3);
        let mut shuffled = g.clone();
        for cell in &mut shuffled.cells {
            for node in &mut cell.nodes {
                node.edges.swap(0, 1);
            }
        }
        assert_ne!(encode(&shuffled), encode(&g));
        assert_eq!(encode(&shuffled.clone().canonical()), encode(&g));
        assert_eq!(decode(&encode(&shuffled)).unwrap(), g);
    }

    #[test]
    fn thousand_roundtrips() {
        let cfg = SpaceConfig::default();
        for seed in 0..1000 {
            let g = random_genotype(&cfg, seed);
            assert_eq!(decode(&encode(&g)).unwrap(), g);
        }
    }

    proptest! {
        #[test]
        fn roundtrip_any_shape(seed in any::<u64>(), m in 1usize..7, which in 0usize..3) {
            let layouts = [vec![CellKind::Down], vec![CellKind::Up], vec![CellKind::Down, CellKind::Up]];
            let cfg = SpaceConfig::default().with_nodes(m).with_cells(&layouts[which]);
            let g = random_genotype(&cfg, seed);
            prop_assert_eq!(decode(&encode(&g)).unwrap(), g);
        }

        #[test]
        fn decode_never_panics(text in "\\PC{0,200}") {
            let _ = decode(&text);
        }
    }
}
