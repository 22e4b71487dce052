use super::{EvalHistory, Predictor};
use crate::space::Genotype;

/// Slot-wise mismatches between two genotypes, each slot compared as a
/// (predecessor, primitive) token. Missing slots count as mismatches.
pub fn hamming_distance(a: &Genotype, b: &Genotype) -> usize {
    let mut xs = a.edge_choices();
    let mut ys = b.edge_choices();
    let mut distance = 0;
    loop {
        match (xs.next(), ys.next()) {
            (None, None) => return distance,
            (Some(x), Some(y)) if x == y => {}
            _ => distance += 1,
        }
    }
}

/// Mean fitness of the `neighbors` closest history entries. Ties keep
/// insertion order; an empty history (or zero neighbours) gives `fallback`.
pub fn surrogate_predict(history: &EvalHistory, genotype: &Genotype, neighbors: usize, fallback: f64) -> f64 {
    if history.is_empty() || neighbors == 0 {
        return fallback;
    }
    let mut ranked: Vec<(usize, f64)> = history
        .entries()
        .iter()
        .map(|(g, r)| (hamming_distance(g, genotype), r.fitness))
        .collect();
    ranked.sort_by_key(|&(d, _)| d);
    let take = neighbors.min(ranked.len());
    ranked[..take].iter().map(|&(_, f)| f).sum::<f64>() / take as f64
}

/// Nearest-neighbour surrogate over the evaluation history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestNeighbor {
    pub neighbors: usize,
}

impl Default for NearestNeighbor {
    fn default() -> Self {
        Self { neighbors: 3 }
    }
}

impl Predictor for NearestNeighbor {
    fn predict(&self, history: &EvalHistory, genotype: &Genotype, fallback: f64) -> f64 {
        surrogate_predict(history, genotype, self.neighbors, fallback)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::EvalResult;
    use crate::space::{sample_uniform, EdgeChoice, Op, SpaceConfig};
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn base() -> Genotype {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        sample_uniform(&SpaceConfig::default(), &mut rng)
    }

    /// Swaps the primitive on the first edge of an UpSC node.
    fn perturb(g: &Genotype, node: usize) -> Genotype {
        let mut out = g.clone();
        let e = &mut out.cells[1].nodes[node].edges[0];
        let op = if e.op == Op::Identity { Op::Conv } else { Op::Identity };
        *e = EdgeChoice::new(e.pred, op);
        out
    }

    #[test]
    fn empty_history_falls_back() {
        assert_eq!(surrogate_predict(&EvalHistory::new(), &base(), 3, 0.42), 0.42);
    }

    #[test]
    fn exact_match_dominates() {
        let g = base();
        let mut h = EvalHistory::new();
        h.record(perturb(&g, 0), EvalResult::new(0.1));
        h.record(g.clone(), EvalResult::new(0.9));
        assert_eq!(surrogate_predict(&h, &g, 1, 0.0), 0.9);
    }

    #[test]
    fn mean_of_two_nearest() {
        let g = base();
        let g1 = perturb(&g, 0);
        let g2 = perturb(&g1, 1);
        let g3 = perturb(&g2, 2);
        assert_eq!(hamming_distance(&g, &g1), 1);
        assert_eq!(hamming_distance(&g, &g2), 2);
        assert_eq!(hamming_distance(&g, &g3), 3);
        let mut h = EvalHistory::new();
        h.record(g3, EvalResult::new(0.0));
        h.record(g2, EvalResult::new(0.8));
        h.record(g1, EvalResult::new(0.4));
        assert!((surrogate_predict(&h, &g, 2, 0.0) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn ties_keep_insertion_order() {
        let g = base();
        let mut h = EvalHistory::new();
        h.record(perturb(&g, 0), EvalResult::new(0.2));
        h.record(perturb(&g, 1), EvalResult::new(0.6));
        assert_eq!(surrogate_predict(&h, &g, 1, 0.0), 0.2);
    }

    proptest! {
        #[test]
        fn prediction_within_neighbor_range(
            seed in any::<u64>(),
            fits in proptest::collection::vec(0.0f64..=1.0, 1..12),
            k in 1usize..5,
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let cfg = SpaceConfig::default();
            let mut h = EvalHistory::new();
            for &f in &fits {
                h.record(sample_uniform(&cfg, &mut rng), EvalResult::new(f));
            }
            let q = sample_uniform(&cfg, &mut rng);
            let p = surrogate_predict(&h, &q, k, 0.5);
            let lo = fits.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = fits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        }
    }
}
