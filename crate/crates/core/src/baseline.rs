//! Uniform random search, the reference point for MCTS.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::eval::{CachedEvaluator, EvalError, Evaluator};
use crate::space::{sample_uniform, Genotype, SpaceConfig, SpaceConfigError};

#[derive(Debug, Clone, PartialEq)]
pub struct RandomSearchResult {
    pub best_genotype: Genotype,
    pub best_fitness: f64,
    /// Samples drawn, duplicates included.
    pub samples: usize,
    pub evaluations_used: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RandomSearchError {
    #[error(transparent)]
    Space(#[from] SpaceConfigError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("evaluation budget must be positive")]
    NoBudget,
}

/// Samples uniformly until `evaluations` distinct genotypes have been
/// evaluated or `max_samples` draws have been made, whichever comes first.
pub fn random_search<E: Evaluator>(
    space: &SpaceConfig,
    evaluator: E,
    evaluations: usize,
    max_samples: usize,
    seed: u64,
) -> Result<RandomSearchResult, RandomSearchError> {
    space.validate()?;
    if evaluations == 0 || max_samples == 0 {
        return Err(RandomSearchError::NoBudget);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache = CachedEvaluator::new(evaluator);
    let mut best: Option<(Genotype, f64)> = None;
    let mut samples = 0;
    while cache.evaluations() < evaluations && samples < max_samples {
        let g = sample_uniform(space, &mut rng);
        samples += 1;
        let (result, _) = cache.evaluate(&g)?;
        if best.as_ref().is_none_or(|(_, f)| result.fitness > *f) {
            best = Some((g, result.fitness));
        }
    }
    let (best_genotype, best_fitness) = best.expect("at least one sample");
    Ok(RandomSearchResult {
        best_genotype,
        best_fitness,
        samples,
        evaluations_used: cache.evaluations(),
    })
}
