use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eval::{CachedEvaluator, EvalError, EvalResult, Evaluator, Predictor};
use crate::space::{legal_actions, Genotype, PartialGenotype, SpaceConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    /// Surrogate-predicted rollouts blended with each real evaluation.
    pub k: usize,
    pub rng_seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { k: 4, rng_seed: 0 }
    }
}

/// Fills the remaining slots with uniformly chosen legal actions.
pub fn random_completion<R: Rng + ?Sized>(state: &PartialGenotype, space: &SpaceConfig, rng: &mut R) -> Genotype {
    let mut state = state.clone();
    while !state.is_complete() {
        let actions = legal_actions(&state, space);
        state.push(actions[rng.gen_range(0..actions.len())]);
    }
    state.to_genotype().expect("complete state")
}

/// `(acc + mean(preds)) / 2`, or `acc` alone when there are no predictions.
pub fn blend_value(acc: f64, predictions: &[f64]) -> f64 {
    if predictions.is_empty() {
        return acc;
    }
    let mean = predictions.iter().sum::<f64>() / predictions.len() as f64;
    (acc + mean) / 2.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub genotype: Genotype,
    pub result: EvalResult,
    pub cached: bool,
    pub predictions: Vec<f64>,
    pub value: f64,
}

/// A rollout that failed to evaluate, with the genotype it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct FailedRollout {
    pub genotype: Genotype,
    pub error: EvalError,
}

/// One evaluated rollout plus `k` predicted ones, blended into a value.
///
/// The predicted rollouts fall back to the evaluated accuracy when the
/// history is empty.
pub fn simulate_value<E, P, R>(
    state: &PartialGenotype,
    space: &SpaceConfig,
    evaluator: &mut CachedEvaluator<E>,
    predictor: &P,
    k: usize,
    rng: &mut R,
) -> Result<Simulation, FailedRollout>
where
    E: Evaluator,
    P: Predictor + ?Sized,
    R: Rng + ?Sized,
{
    let genotype = random_completion(state, space, rng);
    let (result, cached) = match evaluator.evaluate(&genotype) {
        Ok(ok) => ok,
        Err(error) => return Err(FailedRollout { genotype, error }),
    };
    let predictions: Vec<f64> = (0..k)
        .map(|_| {
            let g = random_completion(state, space, rng);
            predictor.predict(evaluator.history(), &g, result.fitness)
        })
        .collect();
    let value = blend_value(result.fitness, &predictions);
    Ok(Simulation {
        genotype,
        result,
        cached,
        predictions,
        value,
    })
}
