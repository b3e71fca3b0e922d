//! Mini-batch cross-entropy training with validation-based model selection.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};
use crate::metrics::macro_f1;
use crate::model::{backward_step, LrSchedule, Model, Sgd};
use crate::rng::rng_from_seed;

/// SGD hyperparameters shared by every training loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimConfig {
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            lr0: 0.01,
            momentum: 0.9,
            weight_decay: 1e-4,
        }
    }
}

impl OptimConfig {
    /// Optimizer with a cosine schedule spanning `epochs`.
    pub fn sgd(&self, epochs: usize) -> Result<Sgd> {
        Sgd::new(
            self.lr0,
            self.momentum,
            self.weight_decay,
            LrSchedule::Cosine { total_epochs: epochs },
        )
    }
}

/// Held-out sets scored after every epoch. Validation uses observed labels,
/// test uses true labels.
#[derive(Debug, Clone, Copy)]
pub struct EvalSets<'a> {
    pub val: &'a LabeledDataset,
    pub test: &'a LabeledDataset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeldOutScores {
    pub val_f1: f64,
    pub test_f1: f64,
}

impl EvalSets<'_> {
    pub fn score(&self, model: &Model) -> Result<HeldOutScores> {
        let val = model.predict(self.val.features())?;
        let test = model.predict(self.test.features())?;
        Ok(HeldOutScores {
            val_f1: macro_f1(&val, self.val.observed_labels(), self.val.class_count())?,
            test_f1: macro_f1(&test, self.test.true_labels(), self.test.class_count())?,
        })
    }
}

/// Keeps the snapshot with the highest validation score, earliest on ties.
#[derive(Debug, Clone)]
pub struct BestTracker {
    best: Option<(Model, usize, HeldOutScores)>,
}

impl BestTracker {
    pub fn new() -> Self {
        BestTracker { best: None }
    }

    pub fn offer(&mut self, model: &Model, epoch: usize, scores: HeldOutScores) {
        let better = match &self.best {
            None => true,
            Some((_, _, best)) => scores.val_f1 > best.val_f1,
        };
        if better {
            self.best = Some((model.clone(), epoch, scores));
        }
    }

    pub fn into_best(self) -> Option<(Model, usize, HeldOutScores)> {
        self.best
    }
}

impl Default for BestTracker {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    /// Validation-best snapshot, or the final model when no held-out sets
    /// were given.
    pub model: Model,
    pub best_epoch: usize,
    pub scores: Option<HeldOutScores>,
}

/// Trains `model` on the `members` of `data` with their observed labels.
#[allow(clippy::too_many_arguments)]
pub fn train_cross_entropy(
    mut model: Model,
    data: &LabeledDataset,
    members: &[usize],
    epochs: usize,
    batch_size: usize,
    optim: &OptimConfig,
    eval: Option<&EvalSets<'_>>,
    seed: u64,
) -> Result<TrainedModel> {
    if members.is_empty() {
        return Err(Error::EmptySelection);
    }
    if epochs == 0 {
        return Err(Error::invalid("epochs", "must be at least 1"));
    }
    if batch_size == 0 {
        return Err(Error::invalid("batch_size", "must be at least 1"));
    }
    let mut opt = optim.sgd(epochs)?;
    let mut rng = rng_from_seed(seed);
    let mut order: Vec<usize> = members.to_vec();
    let mut tracker = BestTracker::new();
    let labels = data.observed_labels();

    for epoch in 0..epochs {
        opt.set_epoch(epoch);
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            let x = data.features().select_rows(batch);
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let all: Vec<usize> = (0..batch.len()).collect();
            backward_step(&mut model, &x, &y, &all, &mut opt)?;
        }
        if let Some(eval) = eval {
            tracker.offer(&model, epoch, eval.score(&model)?);
        }
    }

    Ok(match tracker.into_best() {
        Some((model, best_epoch, scores)) => TrainedModel {
            model,
            best_epoch,
            scores: Some(scores),
        },
        None => TrainedModel {
            model,
            best_epoch: epochs - 1,
            scores: None,
        },
    })
}
