//! Hyperparameter search wrapper: each particle's position is the triple
//! (lambda_semi_adv, lambda_semi_bce, t_semi_mask); its fitness is the
//! Score of a shortened training run evaluated on a few images held out of
//! that run. Every fitness evaluation is an independent, fully seeded run,
//! so the whole search is reproducible and could be farmed out in parallel
//! without changing the result.

use super::{evaluate, train, TrainConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::pso::{pso_optimize, PsoConfig, PsoRun};
use crate::rng;
use crate::tensor::Real;
use rand::seq::SliceRandom;
use std::cell::RefCell;

const TAG_TUNE: u64 = u64::from_le_bytes(*b"tunefits");
const TAG_HOLDOUT: u64 = u64::from_le_bytes(*b"holdout_");

#[derive(Clone, Debug)]
pub struct TuneConfig {
    pub base: TrainConfig,
    pub pso: PsoConfig,
    /// Length of each fitness training run; the default mirrors the full
    /// run shortened twentyfold, floored at 100.
    pub fitness_iterations: u64,
    /// Images held out of fitness training and scored instead.
    pub holdout: usize,
}

impl TuneConfig {
    pub fn new(base: TrainConfig) -> Self {
        TuneConfig {
            pso: PsoConfig::loss_weight_search(base.seed),
            fitness_iterations: (base.iterations / 20).max(100),
            holdout: 2,
            base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pso.validate()?;
        if self.pso.dim() != 3 {
            return Err(Error::InvalidArgument(format!(
                "tuning searches a 3-dimensional weight triple, bounds have dim {}",
                self.pso.dim()
            )));
        }
        if self.fitness_iterations == 0 {
            return Err(Error::InvalidArgument(
                "fitness runs need at least one iteration".into(),
            ));
        }
        if self.holdout == 0 {
            return Err(Error::InvalidArgument(
                "holdout must keep at least one image".into(),
            ));
        }
        // The base config is validated with the shortened iteration count
        // it will actually run with.
        let mut probe = self.base;
        probe.iterations = self.fitness_iterations;
        probe.weights.warmup_iters = self.scaled_warmup();
        probe.validate()
    }

    /// Warm-up transplanted onto the shortened run at the same proportion
    /// of the total it had in the base config.
    fn scaled_warmup(&self) -> u64 {
        if self.base.iterations == 0 {
            return self.fitness_iterations / 4;
        }
        let ratio = self.base.weights.warmup_iters as f64 / self.base.iterations as f64;
        ((ratio * self.fitness_iterations as f64).round() as u64).min(self.fitness_iterations)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneOutcome {
    /// Base weights with the searched triple substituted in.
    pub best_weights: LossWeights<f64>,
    pub run: PsoRun,
}

/// Removes `count` images from the dataset for fitness scoring. The pick
/// prefers the unlabeled pool so scarce labels keep training; the held-out
/// copies keep their masks and come back as a fully labeled dataset.
pub fn split_holdout<T: Real>(
    data: &Dataset<T>,
    count: usize,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "holdout count must be positive".into(),
        ));
    }
    data.validate()?;
    let from_unlabeled = data.unlabeled_indices.len() >= count;
    let source = if from_unlabeled {
        &data.unlabeled_indices
    } else {
        &data.labeled_indices
    };
    // Training still needs at least one labeled item afterwards.
    let labeled_left = if from_unlabeled {
        data.labeled_indices.len()
    } else {
        data.labeled_indices.len().saturating_sub(count)
    };
    if source.len() < count || labeled_left == 0 {
        return Err(Error::EmptyDataset(
            "holdout would leave no labeled training items",
        ));
    }

    let mut order = source.clone();
    order.shuffle(&mut rng::stream(seed, &[TAG_HOLDOUT]));
    let mut chosen = order[..count].to_vec();
    chosen.sort_unstable();

    let keep: Vec<usize> = (0..data.items.len())
        .filter(|i| chosen.binary_search(i).is_err())
        .collect();
    let remap = |old: &usize| keep.binary_search(old).ok();
    let fit = Dataset {
        items: keep.iter().map(|&i| data.items[i].clone()).collect(),
        labeled_indices: data.labeled_indices.iter().filter_map(remap).collect(),
        unlabeled_indices: data.unlabeled_indices.iter().filter_map(remap).collect(),
    };
    fit.validate()?;
    let holdout = Dataset::fully_labeled(
        chosen.iter().map(|&i| data.items[i].clone()).collect(),
    );
    Ok((fit, holdout))
}

/// Runs the swarm over the weight triple. Fitness evaluations are seeded
/// by (base seed, generation, particle); a diverging run scores negative
/// infinity and the search continues.
pub fn pso_tune<T: Real>(config: &TuneConfig, data: &Dataset<T>) -> Result<TuneOutcome> {
    config.validate()?;
    let (fit_data, holdout_data) = split_holdout::<T>(data, config.holdout, config.base.seed)?;

    let swarm = config.pso.swarm_size as usize;
    let warmup = config.scaled_warmup();
    let mut eval_index: usize = 0;
    let hard_error: RefCell<Option<Error>> = RefCell::new(None);

    let fitness = |p: &[f64]| -> f64 {
        let k = eval_index;
        eval_index += 1;
        let (generation, particle) = ((k / swarm) as u64, (k % swarm) as u64);
        let mut c = config.base;
        c.iterations = config.fitness_iterations;
        c.weights.warmup_iters = warmup;
        c.weights.lambda_semi_adv = p[0];
        c.weights.lambda_semi_bce = p[1];
        c.weights.t_semi_mask = p[2];
        c.eval_every = 0;
        c.seed = rng::derive(config.base.seed, &[TAG_TUNE, generation, particle]);
        match train::<T>(&c, &fit_data, None) {
            Ok(out) => match evaluate(&out.state.segmenter, &holdout_data) {
                Ok(report) => report.score,
                Err(e) => {
                    hard_error.borrow_mut().get_or_insert(e);
                    f64::NEG_INFINITY
                }
            },
            Err(Error::Divergence { .. }) => f64::NEG_INFINITY,
            Err(e) => {
                hard_error.borrow_mut().get_or_insert(e);
                f64::NEG_INFINITY
            }
        }
    };
    let run = pso_optimize(&config.pso, fitness)?;
    if let Some(e) = hard_error.into_inner() {
        return Err(e);
    }

    let mut best_weights = config.base.weights;
    best_weights.lambda_semi_adv = run.best_position[0];
    best_weights.lambda_semi_bce = run.best_position[1];
    best_weights.t_semi_mask = run.best_position[2];
    Ok(TuneOutcome { best_weights, run })
}
