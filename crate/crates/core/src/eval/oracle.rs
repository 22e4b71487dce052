use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::hash::{fnv1a64, splitmix64_at, splitmix64_mix, unit_interval};
use super::{Cost, EvalError, EvalResult, Evaluator};
use crate::space::{encode, Genotype, Op};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub seed: u64,
    pub structural_weight: f64,
    pub noise_weight: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            structural_weight: 0.7,
            noise_weight: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("oracle weights must be non-negative and sum to 1 (got {structural} + {noise})")]
pub struct OracleConfigError {
    pub structural: f64,
    pub noise: f64,
}

impl OracleConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), OracleConfigError> {
        let (s, n) = (self.structural_weight, self.noise_weight);
        if s >= 0.0 && n >= 0.0 && ((s + n) - 1.0).abs() <= 1e-12 {
            Ok(())
        } else {
            Err(OracleConfigError {
                structural: s,
                noise: n,
            })
        }
    }
}

/// Deterministic stand-in for training: `w_s * s + w_n * u`.
///
/// `s` is the fraction of edges whose primitive is in the seed's preferred
/// set. Primitive `i` (catalog order) is preferred when the top bit of the
/// `i`-th SplitMix64 output for the seed is set. `u` maps
/// `splitmix64_mix(fnv1a64(text || seed_le))` to `[0, 1)`, where `text` is
/// the canonical codec text.
#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    config: OracleConfig,
    preferred: [bool; 16],
}

impl SyntheticOracle {
    pub fn new(config: OracleConfig) -> Result<Self, OracleConfigError> {
        config.validate()?;
        let mut preferred = [false; 16];
        for op in Op::ALL {
            preferred[op.index()] = splitmix64_at(config.seed, op.index() as u64) >> 63 == 1;
        }
        Ok(Self { config, preferred })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn is_preferred(&self, op: Op) -> bool {
        self.preferred[op.index()]
    }

    pub fn structural_score(&self, genotype: &Genotype) -> f64 {
        let (hits, total) = genotype.edge_choices().fold((0usize, 0usize), |(h, t), e| {
            (h + usize::from(self.is_preferred(e.op)), t + 1)
        });
        if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        }
    }

    pub fn noise(&self, genotype: &Genotype) -> f64 {
        let mut bytes = encode(&genotype.clone().canonical()).into_bytes();
        bytes.extend_from_slice(&self.config.seed.to_le_bytes());
        unit_interval(splitmix64_mix(fnv1a64(&bytes)))
    }

    pub fn fitness(&self, genotype: &Genotype) -> f64 {
        let value = self.config.structural_weight * self.structural_score(genotype)
            + self.config.noise_weight * self.noise(genotype);
        value.clamp(0.0, 1.0)
    }

    pub fn score(&self, genotype: &Genotype) -> EvalResult {
        let mut result = EvalResult::new(self.fitness(genotype));
        result
            .metrics
            .insert("structural".into(), self.structural_score(genotype));
        result.metrics.insert("noise".into(), self.noise(genotype));
        result.cost = Cost {
            wall_seconds: 0.0,
            epochs: 0,
        };
        result
    }
}

impl Evaluator for SyntheticOracle {
    fn evaluate(&mut self, genotype: &Genotype) -> Result<EvalResult, EvalError> {
        Ok(self.score(genotype))
    }
}
