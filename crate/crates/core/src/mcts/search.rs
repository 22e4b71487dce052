use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::simulate::{simulate_value, SimulationConfig};
use super::trace::TraceRecord;
use super::tree::SearchTree;
use super::ucb::UcbConfig;
use crate::eval::{CachedEvaluator, EvalError, EvalHistory, Evaluator, Predictor};
use crate::space::{encode, Genotype, SpaceConfig, SpaceConfigError};
use crate::stopping::{StopReason, StopTracker};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budget {
    pub max_iterations: usize,
    /// Stop after this many iterations without improvement.
    pub patience: Option<usize>,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            patience: Some(20),
        }
    }
}

/// What a failed evaluation does to the run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    #[default]
    Abort,
    /// Record the failure, backpropagate zero and carry on.
    Skip,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub space: SpaceConfig,
    pub ucb: UcbConfig,
    pub simulation: SimulationConfig,
    pub budget: Budget,
    pub on_failure: FailurePolicy,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error(transparent)]
    Space(#[from] SpaceConfigError),
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("evaluation failed at iteration {iteration}: {source}\n{genotype}")]
    Evaluation {
        iteration: usize,
        genotype: String,
        source: EvalError,
    },
    #[error("no iteration produced a successful evaluation")]
    NothingEvaluated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best_genotype: Genotype,
    pub best_fitness: f64,
    pub best_iteration: usize,
    pub trace: Vec<TraceRecord>,
    /// Distinct genotypes sent to the evaluator.
    pub evaluations_used: usize,
    pub stop_reason: StopReason,
    pub iterations: usize,
}

/// Stepwise search driver. [`run_search`] is the one-call form.
pub struct Search<'p, E, P: ?Sized> {
    config: SearchConfig,
    tree: SearchTree,
    evaluator: CachedEvaluator<E>,
    predictor: &'p P,
    rng: ChaCha8Rng,
    tracker: StopTracker,
    best: Option<(Genotype, f64)>,
    trace: Vec<TraceRecord>,
}

impl<'p, E: Evaluator, P: Predictor + ?Sized> Search<'p, E, P> {
    pub fn new(config: SearchConfig, evaluator: E, predictor: &'p P) -> Result<Self, SearchError> {
        config.space.validate()?;
        config.ucb.validate().map_err(SearchError::Config)?;
        if config.budget.max_iterations == 0 {
            return Err(SearchError::Config("max_iterations must be positive".into()));
        }
        if config.budget.patience == Some(0) {
            return Err(SearchError::Config("patience must be positive".into()));
        }
        Ok(Self {
            tree: SearchTree::new(&config.space),
            rng: ChaCha8Rng::seed_from_u64(config.simulation.rng_seed),
            evaluator: CachedEvaluator::new(evaluator),
            predictor,
            tracker: StopTracker::new(),
            best: None,
            trace: Vec::new(),
            config,
        })
    }

    /// Runs one select / expand / simulate / backpropagate cycle.
    pub fn step(&mut self) -> Result<&TraceRecord, SearchError> {
        let iteration = self.trace.len() + 1;
        let selection = self.tree.select(&self.config.ucb);
        let state = self.tree.node(selection.leaf).state.clone();
        let outcome = simulate_value(
            &state,
            &self.config.space,
            &mut self.evaluator,
            self.predictor,
            self.config.simulation.k,
            &mut self.rng,
        );
        let (genotype, fitness, value, cached) = match outcome {
            Ok(sim) => (sim.genotype, Some(sim.result.fitness), sim.value, sim.cached),
            Err(failed) => match self.config.on_failure {
                FailurePolicy::Abort => {
                    return Err(SearchError::Evaluation {
                        iteration,
                        genotype: encode(&failed.genotype),
                        source: failed.error,
                    })
                }
                FailurePolicy::Skip => (failed.genotype, None, 0.0, false),
            },
        };
        self.tree.backpropagate(&selection.path, value);
        if self.tracker.observe(fitness) {
            self.best = Some((genotype.clone(), fitness.expect("improvement has a fitness")));
        }
        self.trace.push(TraceRecord {
            iter: iteration,
            genotype,
            fitness,
            best: self.tracker.best(),
            q: value,
            evals: self.evaluator.evaluations(),
            cached,
        });
        Ok(self.trace.last().expect("just pushed"))
    }

    /// Why the run would stop now, if it would.
    pub fn stop_reason(&self) -> Option<StopReason> {
        let budget = self.config.budget;
        if budget.patience.is_some_and(|p| self.tracker.should_stop(p)) {
            Some(StopReason::EarlyStop)
        } else if self.trace.len() >= budget.max_iterations {
            Some(StopReason::MaxIterations)
        } else {
            None
        }
    }

    pub fn run(mut self) -> Result<SearchResult, SearchError> {
        let reason = loop {
            if let Some(reason) = self.stop_reason() {
                break reason;
            }
            self.step()?;
        };
        self.finish(reason)
    }

    fn finish(self, stop_reason: StopReason) -> Result<SearchResult, SearchError> {
        let (best_genotype, best_fitness) = self.best.ok_or(SearchError::NothingEvaluated)?;
        Ok(SearchResult {
            best_genotype,
            best_fitness,
            best_iteration: self.tracker.best_iteration(),
            iterations: self.trace.len(),
            evaluations_used: self.evaluator.evaluations(),
            trace: self.trace,
            stop_reason,
        })
    }

    pub fn tree(&self) -> &SearchTree {
        &self.tree
    }

    pub fn history(&self) -> &EvalHistory {
        self.evaluator.history()
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn evaluations(&self) -> usize {
        self.evaluator.evaluations()
    }
}

/// Runs MCTS until the budget or the patience rule stops it.
pub fn run_search<E, P>(config: SearchConfig, evaluator: E, predictor: &P) -> Result<SearchResult, SearchError>
where
    E: Evaluator,
    P: Predictor + ?Sized,
{
    Search::new(config, evaluator, predictor)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{EvalResult, FnEvaluator, NearestNeighbor, OracleConfig, SyntheticOracle};
    use crate::space::{Category, CellKind, Op};

    fn small_space() -> SpaceConfig {
        SpaceConfig::default()
            .with_nodes(2)
            .with_cells(&[CellKind::Down])
            .with_subset(Category::Down, &[Op::AvgPool, Op::MaxPool])
            .with_subset(Category::Normal, &[Op::Identity, Op::Conv])
    }

    fn config(max: usize, patience: Option<usize>) -> SearchConfig {
        SearchConfig {
            space: small_space(),
            budget: Budget {
                max_iterations: max,
                patience,
            },
            ..SearchConfig::default()
        }
    }

    #[test]
    fn runs_to_budget_and_tracks_best() {
        let oracle = SyntheticOracle::new(OracleConfig::with_seed(1)).unwrap();
        let result = run_search(config(50, None), oracle.clone(), &NearestNeighbor::default()).unwrap();
        assert_eq!(result.stop_reason, StopReason::MaxIterations);
        assert_eq!(result.trace.len(), 50);
        let max = result
            .trace
            .iter()
            .filter_map(|r| r.fitness)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(result.best_fitness, max);
        assert_eq!(oracle.fitness(&result.best_genotype), max);
        assert_eq!(result.trace[result.best_iteration - 1].fitness, Some(max));
        assert!(result.evaluations_used <= 50);
    }

    #[test]
    fn tree_invariants_hold_while_stepping() {
        let oracle = SyntheticOracle::new(OracleConfig::with_seed(2)).unwrap();
        let cfg = SearchConfig {
            budget: Budget {
                max_iterations: 200,
                patience: None,
            },
            ..SearchConfig::default()
        };
        let predictor = NearestNeighbor::default();
        let mut search = Search::new(cfg, oracle, &predictor).unwrap();
        for i in 1..=100 {
            search.step().unwrap();
            assert_eq!(search.tree().node(SearchTree::ROOT).visits, i);
            search.tree().check_invariants().unwrap();
        }
        assert_eq!(search.tree().len(), 101);
    }

    #[test]
    fn same_seed_same_trace() {
        let run = || {
            let oracle = SyntheticOracle::new(OracleConfig::with_seed(3)).unwrap();
            run_search(config(40, Some(10)), oracle, &NearestNeighbor::default()).unwrap()
        };
        assert_eq!(run().trace, run().trace);
    }

    #[test]
    fn abort_reports_genotype() {
        let failing = FnEvaluator(|_: &Genotype| Err(EvalError::Io("pipe closed".into())));
        let err = run_search(config(5, None), failing, &NearestNeighbor::default()).unwrap_err();
        match err {
            SearchError::Evaluation {
                iteration, genotype, ..
            } => {
                assert_eq!(iteration, 1);
                assert!(genotype.starts_with("mnasgeno v1"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn skip_backpropagates_zero() {
        let mut calls = 0;
        let flaky = FnEvaluator(move |_: &Genotype| {
            calls += 1;
            if calls % 2 == 0 {
                Err(EvalError::Io("lost".into()))
            } else {
                Ok(EvalResult::new(0.5))
            }
        });
        let mut cfg = config(20, None);
        cfg.on_failure = FailurePolicy::Skip;
        let result = run_search(cfg, flaky, &NearestNeighbor::default()).unwrap();
        let failed: Vec<_> = result.trace.iter().filter(|r| r.fitness.is_none()).collect();
        assert!(!failed.is_empty());
        assert!(failed.iter().all(|r| r.q == 0.0));
    }

    #[test]
    fn early_stop_on_flat_fitness() {
        let flat = FnEvaluator(|_: &Genotype| Ok(EvalResult::new(0.3)));
        let result = run_search(config(100, Some(5)), flat, &NearestNeighbor::default()).unwrap();
        assert_eq!(result.stop_reason, StopReason::EarlyStop);
        assert_eq!(result.iterations, 6);
        assert_eq!(result.best_iteration, 1);
    }

    #[test]
    fn budget_of_one() {
        let oracle = SyntheticOracle::new(OracleConfig::with_seed(5)).unwrap();
        let result = run_search(config(1, Some(20)), oracle.clone(), &NearestNeighbor::default()).unwrap();
        assert_eq!(result.trace.len(), 1);
        assert_eq!(result.best_genotype, result.trace[0].genotype);
        assert_eq!(result.best_fitness, oracle.fitness(&result.best_genotype));
    }

    #[test]
    fn finds_argmax_of_nine_genotype_space() {
        let space = SpaceConfig::default()
            .with_nodes(1)
            .with_cells(&[CellKind::Down])
            .with_subset(Category::Down, &[Op::AvgPool, Op::MaxPool, Op::DownConv]);
        let all: Vec<Genotype> = crate::space::enumerate_space(&space, 100).unwrap().collect();
        assert_eq!(all.len(), 9);
        for seed in 0..10 {
            let oracle = SyntheticOracle::new(OracleConfig::with_seed(seed)).unwrap();
            let best = all
                .iter()
                .max_by(|a, b| oracle.fitness(a).total_cmp(&oracle.fitness(b)))
                .unwrap();
            let cfg = SearchConfig {
                space: space.clone(),
                budget: Budget {
                    max_iterations: 100,
                    patience: None,
                },
                ..SearchConfig::default()
            };
            let result = run_search(cfg, oracle, &NearestNeighbor::default()).unwrap();
            assert_eq!(&result.best_genotype, best, "seed {seed}");
        }
    }

    #[test]
    fn constant_reward_visits_root_actions_evenly() {
        let flat = FnEvaluator(|_: &Genotype| Ok(EvalResult::new(0.4)));
        let cfg = SearchConfig {
            budget: Budget {
                max_iterations: 500,
                patience: None,
            },
            ..SearchConfig::default()
        };
        let predictor = NearestNeighbor::default();
        let mut search = Search::new(cfg, flat, &predictor).unwrap();
        let width = search.tree().node(SearchTree::ROOT).actions.len();
        for sweep in 1..=10 {
            for _ in 0..width {
                search.step().unwrap();
            }
            let root = search.tree().node(SearchTree::ROOT);
            let counts: Vec<u64> = root.stats.actions.iter().map(|a| a.n).collect();
            let spread = counts.iter().max().unwrap() - counts.iter().min().unwrap();
            assert!(spread <= 1, "sweep {sweep}: {counts:?}");
            for a in &root.stats.actions {
                assert!((a.mean().unwrap() - 0.4).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        let oracle = SyntheticOracle::new(OracleConfig::default()).unwrap();
        assert!(Search::new(config(0, None), oracle.clone(), &NearestNeighbor::default()).is_err());
        assert!(Search::new(config(5, Some(0)), oracle, &NearestNeighbor::default()).is_err());
    }
}
