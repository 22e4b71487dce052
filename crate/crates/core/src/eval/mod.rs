//! Evaluator contract and its implementations.
//!
//! An [`Evaluator`] turns a genotype into an [`EvalResult`] (the "real"
//! evaluation of a rollout). A [`Predictor`] estimates fitness from past
//! evaluations without running anything. [`CachedEvaluator`] sits in front
//! of an evaluator so each distinct genotype is evaluated at most once.

pub mod bridge;
pub mod hash;
mod oracle;
mod surrogate;

pub use oracle::{OracleConfig, OracleConfigError, SyntheticOracle};
pub use surrogate::{hamming_distance, surrogate_predict, NearestNeighbor};

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::Genotype;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Cost {
    pub wall_seconds: f64,
    pub epochs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// In `[0, 1]`.
    pub fitness: f64,
    pub metrics: BTreeMap<String, f64>,
    pub cost: Cost,
}

impl EvalResult {
    pub fn new(fitness: f64) -> Self {
        Self {
            fitness,
            metrics: BTreeMap::new(),
            cost: Cost::default(),
        }
    }

    pub fn check(&self) -> Result<(), EvalError> {
        if !(0.0..=1.0).contains(&self.fitness) {
            return Err(EvalError::Invalid(format!("fitness {} outside [0, 1]", self.fitness)));
        }
        if !(self.cost.wall_seconds >= 0.0 && self.cost.wall_seconds.is_finite()) {
            return Err(EvalError::Invalid(format!(
                "wall_seconds {} is not a finite non-negative value",
                self.cost.wall_seconds
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no response to request {id} within {seconds:.3}s")]
    Timeout { id: u64, seconds: f64 },
    #[error("protocol error: {message} (line: {line:?})")]
    Protocol { message: String, line: String },
    #[error("worker reported failure for request {id}: {message}")]
    Worker { id: u64, message: String },
    #[error("transport: {0}")]
    Io(String),
    #[error("invalid result: {0}")]
    Invalid(String),
}

pub trait Evaluator {
    fn evaluate(&mut self, genotype: &Genotype) -> Result<EvalResult, EvalError>;
}

impl<E: Evaluator + ?Sized> Evaluator for &mut E {
    fn evaluate(&mut self, genotype: &Genotype) -> Result<EvalResult, EvalError> {
        (**self).evaluate(genotype)
    }
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn evaluate(&mut self, genotype: &Genotype) -> Result<EvalResult, EvalError> {
        (**self).evaluate(genotype)
    }
}

/// Adapts a closure into an [`Evaluator`].
pub struct FnEvaluator<F>(pub F);

impl<F> Evaluator for FnEvaluator<F>
where
    F: FnMut(&Genotype) -> Result<EvalResult, EvalError>,
{
    fn evaluate(&mut self, genotype: &Genotype) -> Result<EvalResult, EvalError> {
        (self.0)(genotype)
    }
}

pub trait Predictor {
    /// Estimated fitness of `genotype`; `fallback` when nothing is known.
    fn predict(&self, history: &EvalHistory, genotype: &Genotype, fallback: f64) -> f64;
}

/// Append-only record of real evaluations, keyed by exact genotype.
#[derive(Debug, Clone, Default)]
pub struct EvalHistory {
    entries: Vec<(Genotype, EvalResult)>,
    index: HashMap<Genotype, usize>,
}

impl EvalHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends unless the genotype is already present; returns whether it was added.
    pub fn record(&mut self, genotype: Genotype, result: EvalResult) -> bool {
        if self.index.contains_key(&genotype) {
            return false;
        }
        self.index.insert(genotype.clone(), self.entries.len());
        self.entries.push((genotype, result));
        true
    }

    pub fn lookup(&self, genotype: &Genotype) -> Option<&EvalResult> {
        self.index.get(genotype).map(|&i| &self.entries[i].1)
    }

    pub fn entries(&self) -> &[(Genotype, EvalResult)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// An evaluator behind an [`EvalHistory`] cache.
pub struct CachedEvaluator<E> {
    inner: E,
    history: EvalHistory,
    evaluations: usize,
}

impl<E: Evaluator> CachedEvaluator<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            history: EvalHistory::new(),
            evaluations: 0,
        }
    }

    /// Returns the result and whether it came from the cache.
    pub fn evaluate(&mut self, genotype: &Genotype) -> Result<(EvalResult, bool), EvalError> {
        if let Some(hit) = self.history.lookup(genotype) {
            return Ok((hit.clone(), true));
        }
        self.evaluations += 1;
        let result = self.inner.evaluate(genotype)?;
        result.check()?;
        self.history.record(genotype.clone(), result.clone());
        Ok((result, false))
    }

    pub fn history(&self) -> &EvalHistory {
        &self.history
    }

    /// Real evaluations attempted so far, failed ones included.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn into_inner(self) -> E {
        self.inner
    }
}
