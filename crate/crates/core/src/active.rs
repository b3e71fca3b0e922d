//! Budgeted active label cleaning and the end-to-end pipelines.
//!
//! After the noisy-label phase, samples left in the noisy set are ranked by
//! a scoring function, the top `a_l` per round are sent to the oracle, and
//! the corrected samples move to the clean set before the model is trained
//! again.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;

use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};
use crate::lnl::{run_coteaching_stage, train_coteaching, EpochLog, PartitionRule, PartitionState, SelectionConfig};
use crate::matrix::Matrix;
use crate::model::Model;
use crate::rng::{derive_seed, rng_from_seed};
use crate::train::{train_cross_entropy, EvalSets, HeldOutScores, OptimConfig, TrainedModel};

/// `rounds` annotation rounds of `per_round` samples each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetPlan {
    pub rounds: usize,
    pub per_round: usize,
}

impl BudgetPlan {
    pub fn new(rounds: usize, per_round: usize) -> Result<Self> {
        if rounds < 1 {
            return Err(Error::invalid("rounds", "must be at least 1"));
        }
        if per_round < 1 {
            return Err(Error::invalid("per_round", "must be at least 1"));
        }
        Ok(BudgetPlan { rounds, per_round })
    }

    pub fn total(&self) -> usize {
        self.rounds * self.per_round
    }

    pub fn check_feasible(&self, train_size: usize) -> Result<()> {
        if self.total() > train_size {
            return Err(Error::InfeasibleBudget {
                rounds: self.rounds,
                per_round: self.per_round,
                available: train_size,
            });
        }
        Ok(())
    }
}

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::invalid(stringify!($name), alloc::format!("unknown value `{s}`"))),
                }
            }
        }
    };
}

named_enum!(
    /// Scoring function used to rank the noisy set.
    SamplerKind {
        Random => "random",
        Entropy => "entropy",
        Coreset => "coreset",
    }
);

named_enum!(
    /// End-to-end pipeline variants.
    PipelineMode {
        CtVogAl => "ctvog_al",
        AlOnly => "al_only",
        CeAl => "ce_al",
        AlcCt => "alc_ct",
    }
);

named_enum!(
    /// Base model for the cleaning phase of `ctvog_al`.
    InitStrategy {
        Retrain => "retrain",
        Continue => "continue",
    }
);

/// Predictive entropy `-sum p ln p` of each row (`0 ln 0 = 0`).
pub fn score_entropy(probabilities: &Matrix) -> Result<Vec<f64>> {
    probabilities
        .iter_rows()
        .map(|row| {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(0.0..=1.0 + 1e-12).contains(&p)) || libm::fabs(sum - 1.0) > 1e-6 {
                return Err(Error::invalid("probabilities", "rows must be probability distributions"));
            }
            Ok(row
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| -p * libm::log(p))
                .sum())
        })
        .collect()
}

/// Positions of the `k` largest scores, largest first, ties to the smaller
/// position.
pub fn top_k_by_score(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Farthest-first k-center selection of `k` rows of `noisy` given the
/// already labeled rows. Without labeled rows the first pick is the point
/// farthest from the mean of `noisy`.
pub fn select_coreset(noisy: &Matrix, labeled: &Matrix, k: usize) -> Result<Vec<usize>> {
    if labeled.rows() > 0 && labeled.cols() != noisy.cols() {
        return Err(Error::DimensionMismatch {
            what: "labeled features",
            expected: noisy.cols(),
            found: labeled.cols(),
        });
    }
    if k > noisy.rows() {
        return Err(Error::invalid("a_l", "cannot select more samples than the noisy set holds"));
    }
    let n = noisy.rows();
    let mut nearest = vec![f64::INFINITY; n];
    for (i, row) in noisy.iter_rows().enumerate() {
        for center in labeled.iter_rows() {
            nearest[i] = nearest[i].min(squared_distance(row, center));
        }
    }
    let mut chosen = vec![false; n];
    let mut picks = Vec::with_capacity(k);
    for step in 0..k {
        let pick = if step == 0 && labeled.rows() == 0 {
            let mut mean = vec![0.0; noisy.cols()];
            for row in noisy.iter_rows() {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v / n as f64;
                }
            }
            let spread: Vec<f64> = noisy.iter_rows().map(|r| squared_distance(r, &mean)).collect();
            argmax_unchosen(&spread, &chosen)
        } else {
            argmax_unchosen(&nearest, &chosen)
        };
        chosen[pick] = true;
        picks.push(pick);
        let center = noisy.row(pick);
        for (i, row) in noisy.iter_rows().enumerate() {
            nearest[i] = nearest[i].min(squared_distance(row, center));
        }
    }
    Ok(picks)
}

fn argmax_unchosen(values: &[f64], chosen: &[bool]) -> usize {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if chosen[i] {
            continue;
        }
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best.unwrap_or(0)
}

/// Covering radius of `points` by `labeled` plus the chosen rows of
/// `points`.
pub fn coreset_radius(points: &Matrix, labeled: &Matrix, centers: &[usize]) -> f64 {
    let mut radius: f64 = 0.0;
    for row in points.iter_rows() {
        let mut nearest = f64::INFINITY;
        for center in labeled.iter_rows().chain(centers.iter().map(|&c| points.row(c))) {
            nearest = nearest.min(squared_distance(row, center));
        }
        radius = radius.max(nearest);
    }
    libm::sqrt(radius)
}

/// `k` indices drawn uniformly without replacement from `noisy`.
pub fn select_random(noisy: &[usize], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k > noisy.len() {
        return Err(Error::invalid("a_l", "cannot select more samples than the noisy set holds"));
    }
    let mut pool = noisy.to_vec();
    let mut rng = rng_from_seed(seed);
    let (picked, _) = pool.partial_shuffle(&mut rng, k);
    Ok(picked.to_vec())
}

/// Replaces the observed labels of `picks` with the true labels. Every pick
/// must belong to `noisy`. Returns the cleaned indices.
pub fn oracle_relabel(dataset: &mut LabeledDataset, noisy: &BTreeSet<usize>, picks: &[usize]) -> Result<Vec<usize>> {
    if let Some(&bad) = picks.iter().find(|i| !noisy.contains(i) || **i >= dataset.len()) {
        return Err(Error::NotNoisy(bad));
    }
    for &i in picks {
        dataset.restore_label(i);
    }
    Ok(picks.to_vec())
}

/// Evolving clean/noisy sets during the cleaning phase.
#[derive(Debug, Clone, PartialEq)]
pub struct CleaningState {
    pub clean: BTreeSet<usize>,
    pub noisy: BTreeSet<usize>,
    /// Relabeled indices in the order they were cleaned.
    pub relabeled: Vec<usize>,
    pub budget: BudgetPlan,
}

impl CleaningState {
    pub fn from_partition(partition: &PartitionState, budget: BudgetPlan) -> Self {
        CleaningState {
            clean: partition.clean.clone(),
            noisy: partition.noisy.clone(),
            relabeled: Vec::new(),
            budget,
        }
    }

    /// Nothing cleaned yet: every sample starts in the noisy set.
    pub fn all_noisy(sample_count: usize, budget: BudgetPlan) -> Self {
        CleaningState {
            clean: BTreeSet::new(),
            noisy: (0..sample_count).collect(),
            relabeled: Vec::new(),
            budget,
        }
    }

    pub fn remaining_budget(&self) -> usize {
        self.budget.total().saturating_sub(self.relabeled.len())
    }

    pub fn is_partition(&self, sample_count: usize) -> bool {
        self.clean.is_disjoint(&self.noisy)
            && self.clean.len() + self.noisy.len() == sample_count
            && self.relabeled.iter().all(|i| self.clean.contains(i))
    }

    pub fn clean_indices(&self) -> Vec<usize> {
        self.clean.iter().copied().collect()
    }

    pub fn noisy_indices(&self) -> Vec<usize> {
        self.noisy.iter().copied().collect()
    }
}

/// Ranks the noisy set with `sampler` under `model` and returns the top `k`
/// dataset indices.
pub fn rank_noisy(
    sampler: SamplerKind,
    model: &Model,
    dataset: &LabeledDataset,
    state: &CleaningState,
    k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let noisy = state.noisy_indices();
    let k = k.min(noisy.len());
    if k == 0 {
        return Ok(Vec::new());
    }
    match sampler {
        SamplerKind::Random => select_random(&noisy, k, seed),
        SamplerKind::Entropy => {
            let probs = model.forward(&dataset.features().select_rows(&noisy), None)?.probabilities;
            let scores = score_entropy(&probs)?;
            Ok(top_k_by_score(&scores, k).into_iter().map(|p| noisy[p]).collect())
        }
        SamplerKind::Coreset => {
            let noisy_features = model.hidden_features(&dataset.features().select_rows(&noisy))?;
            let labeled_features = model.hidden_features(&dataset.features().select_rows(&state.clean_indices()))?;
            Ok(select_coreset(&noisy_features, &labeled_features, k)?
                .into_iter()
                .map(|p| noisy[p])
                .collect())
        }
    }
}

/// Selects up to `k` noisy samples, relabels them and moves them to the
/// clean set. Returns the cleaned indices; empty when the noisy set or the
/// budget is exhausted.
pub fn relabel_round(
    state: &mut CleaningState,
    sampler: SamplerKind,
    model: &Model,
    dataset: &mut LabeledDataset,
    k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let k = k.min(state.remaining_budget());
    if state.noisy.is_empty() || k == 0 {
        log::info!("cleaning round skipped: noisy set or budget exhausted");
        return Ok(Vec::new());
    }
    let picks = rank_noisy(sampler, model, dataset, state, k, seed)?;
    let cleaned = oracle_relabel(dataset, &state.noisy, &picks)?;
    for &i in &cleaned {
        state.noisy.remove(&i);
        state.clean.insert(i);
        state.relabeled.push(i);
    }
    Ok(cleaned)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mode: PipelineMode,
    pub sampler: SamplerKind,
    pub budget: BudgetPlan,
    pub selection: SelectionConfig,
    pub optim: OptimConfig,
    pub hidden_dim: usize,
    /// Epochs of each cross-entropy (re)training and fine-tuning stage.
    pub round_epochs: usize,
    /// Warm-start each round from the previous model instead of retraining.
    pub finetune: bool,
    pub init_strategy: InitStrategy,
    pub partition_rule: PartitionRule,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn defaults(mode: PipelineMode, sampler: SamplerKind, budget: BudgetPlan, seed: u64) -> Self {
        PipelineConfig {
            mode,
            sampler,
            budget,
            selection: SelectionConfig::default(),
            optim: OptimConfig::default(),
            hidden_dim: 32,
            round_epochs: 60,
            finetune: false,
            init_strategy: InitStrategy::Retrain,
            partition_rule: PartitionRule::ModelA,
            seed,
        }
    }

    pub fn validate(&self, train_size: usize) -> Result<()> {
        self.selection.validate()?;
        if self.hidden_dim < 1 {
            return Err(Error::invalid("hidden_dim", "must be at least 1"));
        }
        if self.round_epochs < 1 {
            return Err(Error::invalid("round_epochs", "must be at least 1"));
        }
        self.optim.sgd(self.round_epochs)?;
        self.budget.check_feasible(train_size)
    }
}

/// Per-round record of the cleaning phase. Round 0 is the model before any
/// cleaning round of the active phase.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub round: usize,
    pub cumulative_relabeled: usize,
    pub noise_remaining: usize,
    pub macro_f1_test: f64,
    pub macro_f1_val: f64,
    pub clean_size: usize,
    pub noisy_size: usize,
    pub sampler: SamplerKind,
    pub mode: PipelineMode,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub rounds: Vec<RoundLog>,
    /// Co-teaching epoch logs, for the modes that run it.
    pub lnl_logs: Vec<EpochLog>,
    /// Partition produced by the noisy-label phase.
    pub initial_partition: Option<PartitionState>,
    pub final_state: CleaningState,
    pub final_model: Model,
    /// Training set with the oracle's corrections applied.
    pub train: LabeledDataset,
}

fn scores_or_zero(trained: &TrainedModel) -> HeldOutScores {
    trained.scores.unwrap_or(HeldOutScores {
        val_f1: 0.0,
        test_f1: 0.0,
    })
}

struct Driver<'a> {
    cfg: &'a PipelineConfig,
    eval: EvalSets<'a>,
    train: LabeledDataset,
    state: CleaningState,
    current: TrainedModel,
    rounds: Vec<RoundLog>,
}

impl Driver<'_> {
    fn log_round(&mut self, round: usize) {
        let scores = scores_or_zero(&self.current);
        self.rounds.push(RoundLog {
            round,
            cumulative_relabeled: self.state.relabeled.len(),
            noise_remaining: self.train.noise_count(),
            macro_f1_test: scores.test_f1,
            macro_f1_val: scores.val_f1,
            clean_size: self.state.clean.len(),
            noisy_size: self.state.noisy.len(),
            sampler: self.cfg.sampler,
            mode: self.cfg.mode,
            seed: self.cfg.seed,
        });
    }

    fn relabel(&mut self, round: usize, sampler: SamplerKind) -> Result<Vec<usize>> {
        relabel_round(
            &mut self.state,
            sampler,
            &self.current.model,
            &mut self.train,
            self.cfg.budget.per_round,
            derive_seed(self.cfg.seed, 1000 + round as u64),
        )
    }

    /// Cross-entropy training on the current clean set, from scratch or
    /// from the current model.
    fn train_on_clean(&mut self, round: usize, warm_start: bool) -> Result<()> {
        let init = if warm_start {
            self.current.model.clone()
        } else {
            Model::init(
                self.train.feature_dim(),
                self.cfg.hidden_dim,
                self.train.class_count(),
                derive_seed(self.cfg.seed, 2000 + round as u64),
            )?
        };
        self.current = train_cross_entropy(
            init,
            &self.train,
            &self.state.clean_indices(),
            self.cfg.round_epochs,
            self.cfg.selection.batch_size,
            &self.cfg.optim,
            Some(&self.eval),
            derive_seed(self.cfg.seed, 3000 + round as u64),
        )?;
        Ok(())
    }

    /// Rounds `first..=last` following the configured sampler; `retrain`
    /// rebuilds the model after a round that cleaned something.
    fn cleaning_rounds(
        &mut self,
        first: usize,
        last: usize,
        mut retrain: impl FnMut(&mut Self, usize) -> Result<()>,
    ) -> Result<()> {
        for round in first..=last {
            let cleaned = self.relabel(round, self.cfg.sampler)?;
            if !cleaned.is_empty() {
                retrain(self, round)?;
            }
            self.log_round(round);
        }
        Ok(())
    }
}

/// Cleaning phase of `ctvog_al` from a given partition and base model.
pub fn run_cleaning(
    cfg: &PipelineConfig,
    train: LabeledDataset,
    partition: &PartitionState,
    base: TrainedModel,
    val: &LabeledDataset,
    test: &LabeledDataset,
) -> Result<(Vec<RoundLog>, CleaningState, Model, LabeledDataset)> {
    cfg.validate(train.len())?;
    if partition.len() != train.len() || !partition.is_partition() {
        return Err(Error::invalid("partition", "must partition the training set"));
    }
    let mut driver = Driver {
        cfg,
        eval: EvalSets { val, test },
        state: CleaningState::from_partition(partition, cfg.budget),
        train,
        current: base,
        rounds: Vec::new(),
    };
    driver.log_round(0);
    let finetune = cfg.finetune;
    driver.cleaning_rounds(1, cfg.budget.rounds, |d, r| d.train_on_clean(r, finetune))?;
    Ok((driver.rounds, driver.state, driver.current.model, driver.train))
}

/// Base model entering the cleaning phase: retrained from scratch on the
/// clean set, or the co-teaching network with its held-out scores.
pub fn base_for_cleaning(
    cfg: &PipelineConfig,
    train: &LabeledDataset,
    partition: &PartitionState,
    lnl_model: Option<(Model, Option<HeldOutScores>)>,
    val: &LabeledDataset,
    test: &LabeledDataset,
) -> Result<TrainedModel> {
    match (cfg.init_strategy, lnl_model) {
        (InitStrategy::Retrain, _) => train_cross_entropy(
            Model::init(train.feature_dim(), cfg.hidden_dim, train.class_count(), derive_seed(cfg.seed, 11))?,
            train,
            &partition.clean_indices(),
            cfg.round_epochs,
            cfg.selection.batch_size,
            &cfg.optim,
            Some(&EvalSets { val, test }),
            derive_seed(cfg.seed, 12),
        ),
        (InitStrategy::Continue, Some((model, scores))) => Ok(TrainedModel {
            model,
            best_epoch: 0,
            scores,
        }),
        (InitStrategy::Continue, None) => Err(Error::invalid(
            "init_strategy",
            "continuing requires the co-teaching model",
        )),
    }
}

/// Runs the pipeline selected by `cfg.mode` on a (noisy) training set.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    train: &LabeledDataset,
    val: &LabeledDataset,
    test: &LabeledDataset,
) -> Result<PipelineOutcome> {
    cfg.validate(train.len())?;
    let eval = EvalSets { val, test };
    let (f, h, c) = (train.feature_dim(), cfg.hidden_dim, train.class_count());
    let fresh = |tag: u64| Model::init(f, h, c, derive_seed(cfg.seed, tag));
    let placeholder = TrainedModel {
        model: fresh(0)?,
        best_epoch: 0,
        scores: None,
    };

    match cfg.mode {
        PipelineMode::CtVogAl => {
            let lnl = train_coteaching(train, cfg.selection, &cfg.optim, h, Some(&eval), cfg.partition_rule, derive_seed(cfg.seed, 10))?;
            let base = base_for_cleaning(
                cfg,
                train,
                &lnl.partition,
                Some((lnl.best_model_a.clone(), lnl.best_scores)),
                val,
                test,
            )?;
            let (rounds, final_state, final_model, cleaned) =
                run_cleaning(cfg, train.clone(), &lnl.partition, base, val, test)?;
            Ok(PipelineOutcome {
                rounds,
                lnl_logs: lnl.logs,
                initial_partition: Some(lnl.partition),
                final_state,
                final_model,
                train: cleaned,
            })
        }
        PipelineMode::AlOnly => {
            let mut driver = Driver {
                cfg,
                eval,
                train: train.clone(),
                state: CleaningState::all_noisy(train.len(), cfg.budget),
                current: placeholder,
                rounds: Vec::new(),
            };
            // The first round's budget bootstraps the initial clean set.
            driver.relabel(0, SamplerKind::Random)?;
            driver.train_on_clean(0, false)?;
            driver.log_round(0);
            let finetune = cfg.finetune;
            driver.cleaning_rounds(1, cfg.budget.rounds, |d, r| d.train_on_clean(r, finetune))?;
            Ok(finish(driver, Vec::new(), None))
        }
        PipelineMode::CeAl => {
            let all: Vec<usize> = (0..train.len()).collect();
            let base = train_cross_entropy(
                fresh(11)?,
                train,
                &all,
                cfg.round_epochs,
                cfg.selection.batch_size,
                &cfg.optim,
                Some(&eval),
                derive_seed(cfg.seed, 12),
            )?;
            let mut driver = Driver {
                cfg,
                eval,
                train: train.clone(),
                state: CleaningState::all_noisy(train.len(), cfg.budget),
                current: base,
                rounds: Vec::new(),
            };
            driver.log_round(0);
            // Fine-tuned on the cleaned samples only.
            driver.cleaning_rounds(1, cfg.budget.rounds, |d, r| d.train_on_clean(r, true))?;
            Ok(finish(driver, Vec::new(), None))
        }
        PipelineMode::AlcCt => {
            let plain = SelectionConfig {
                mix_ratio: 0.0,
                ..cfg.selection
            };
            let lnl = train_coteaching(train, plain, &cfg.optim, h, Some(&eval), cfg.partition_rule, derive_seed(cfg.seed, 10))?;
            let mut coteaching = lnl.state;
            let mut driver = Driver {
                cfg,
                eval,
                train: train.clone(),
                state: CleaningState::from_partition(&lnl.partition, cfg.budget),
                current: TrainedModel {
                    model: lnl.best_model_a,
                    best_epoch: 0,
                    scores: lnl.best_scores,
                },
                rounds: Vec::new(),
            };
            driver.log_round(0);
            let mut rng = rng_from_seed(derive_seed(cfg.seed, 13));
            // Both networks keep training with co-teaching on all samples,
            // cleaned and still noisy.
            driver.cleaning_rounds(1, cfg.budget.rounds, |d, _| {
                coteaching.restart_optimizers(&d.cfg.optim, d.cfg.round_epochs)?;
                let stage = run_coteaching_stage(
                    coteaching.clone(),
                    &d.train,
                    d.cfg.round_epochs,
                    Some(&d.eval),
                    d.cfg.partition_rule,
                    &mut rng,
                )?;
                let mut clean = stage.partition.clean.clone();
                clean.extend(d.state.relabeled.iter().copied());
                d.state.noisy = (0..d.train.len()).filter(|i| !clean.contains(i)).collect();
                d.state.clean = clean;
                d.current = TrainedModel {
                    model: stage.best_model_a,
                    best_epoch: 0,
                    scores: stage.best_scores,
                };
                coteaching = stage.state;
                Ok(())
            })?;
            Ok(finish(driver, lnl.logs, Some(lnl.partition)))
        }
    }
}

fn finish(driver: Driver<'_>, lnl_logs: Vec<EpochLog>, initial_partition: Option<PartitionState>) -> PipelineOutcome {
    PipelineOutcome {
        rounds: driver.rounds,
        lnl_logs,
        initial_partition,
        final_state: driver.state,
        final_model: driver.current.model,
        train: driver.train,
    }
}

/// Reference model trained with cross-entropy on every training sample with
/// its true label, configured like the cleaning rounds.
pub fn train_clean_reference(
    cfg: &PipelineConfig,
    train: &LabeledDataset,
    val: &LabeledDataset,
    test: &LabeledDataset,
) -> Result<TrainedModel> {
    let mut clean = train.clone();
    for i in 0..clean.len() {
        clean.restore_label(i);
    }
    let all: Vec<usize> = (0..clean.len()).collect();
    train_cross_entropy(
        Model::init(train.feature_dim(), cfg.hidden_dim, train.class_count(), derive_seed(cfg.seed, 11))?,
        &clean,
        &all,
        cfg.round_epochs,
        cfg.selection.batch_size,
        &cfg.optim,
        Some(&EvalSets { val, test }),
        derive_seed(cfg.seed, 12),
    )
}
