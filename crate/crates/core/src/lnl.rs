//! Co-teaching with mixed small-loss / small-VOG clean selection.
//!
//! Two peer networks rank every mini-batch; each network's selection is used
//! to update the other. After the warm-up, part of the clean quota is filled
//! by the samples with the smallest variance of gradients.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::{backward_step, GradientSignal, Model, Sgd};
use crate::rng::{derive_seed, SimRng};
use crate::train::{BestTracker, EvalSets, HeldOutScores, OptimConfig};
use crate::vog::GradientTrace;

/// Guards the floors in the selection arithmetic against products such as
/// `0.6 * 10 = 5.999...`.
const FLOOR_EPS: f64 = 1e-9;

fn floor_count(x: f64) -> usize {
    libm::floor(x + FLOOR_EPS).max(0.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    /// Maximum forget rate `tau`, normally the noise rate.
    pub forget_max: f64,
    /// Exponent of the forget-rate ramp.
    pub decay: f64,
    pub warmup_epochs: usize,
    /// Share of the clean quota filled by the VOG criterion.
    pub mix_ratio: f64,
    pub total_epochs: usize,
    pub batch_size: usize,
    /// VOG window `t` (previous epochs).
    pub vog_window: usize,
    pub vog_window_exclusive: bool,
    pub vog_signal: GradientSignal,
    pub vog_normalization: VogNormalization,
}

/// Rescaling of VOG scores before ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VogNormalization {
    /// Raw scores.
    None,
    /// Z-score within each observed class.
    #[default]
    PerClass,
}

impl VogNormalization {
    pub fn as_str(self) -> &'static str {
        match self {
            VogNormalization::None => "none",
            VogNormalization::PerClass => "class",
        }
    }
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            forget_max: 0.5,
            decay: 1.0,
            warmup_epochs: 10,
            mix_ratio: 0.2,
            total_epochs: 60,
            batch_size: 64,
            vog_window: 5,
            vog_window_exclusive: false,
            vog_signal: GradientSignal::LogProbability,
            vog_normalization: VogNormalization::PerClass,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.forget_max) {
            return Err(Error::invalid("forget_max", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.mix_ratio) {
            return Err(Error::invalid("mix_ratio", "must lie in [0, 1]"));
        }
        if !(self.decay > 0.0 && self.decay.is_finite()) {
            return Err(Error::invalid("decay", "must be positive"));
        }
        if self.warmup_epochs < 1 {
            return Err(Error::invalid("warmup_epochs", "must be at least 1"));
        }
        if self.total_epochs < 1 {
            return Err(Error::invalid("total_epochs", "must be at least 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        if self.vog_window < 1 || (self.vog_window_exclusive && self.vog_window < 2) {
            return Err(Error::invalid("vog_window", "window too small"));
        }
        Ok(())
    }

    /// Snapshots needed before a VOG score exists.
    pub fn vog_capacity(&self) -> usize {
        if self.vog_window_exclusive {
            self.vog_window
        } else {
            self.vog_window + 1
        }
    }

    /// Whether the VOG criterion takes part in selection at `epoch`.
    pub fn vog_active(&self, epoch: usize) -> bool {
        self.mix_ratio > 0.0 && epoch >= self.warmup_epochs.max(self.vog_capacity())
    }
}

/// Fraction of each batch kept at `epoch`:
/// `1 - tau * min(epoch / warmup, 1)^decay`.
pub fn keep_fraction(epoch: usize, cfg: &SelectionConfig) -> f64 {
    let ramp = (epoch as f64 / cfg.warmup_epochs as f64).min(1.0);
    1.0 - cfg.forget_max * libm::pow(ramp, cfg.decay)
}

/// Batch positions chosen as clean, grouped by criterion.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BatchSelection {
    /// `R1` smallest-loss positions.
    pub by_loss: Vec<usize>,
    /// `R2` smallest-VOG positions among the rest.
    pub by_vog: Vec<usize>,
    /// Seats left over by the two floors, filled by loss.
    pub remainder: Vec<usize>,
    /// `R` was clamped up to 1.
    pub clamped: bool,
}

impl BatchSelection {
    pub fn len(&self) -> usize {
        self.by_loss.len() + self.by_vog.len() + self.remainder.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All selected positions in ascending order.
    pub fn positions(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .by_loss
            .iter()
            .chain(&self.by_vog)
            .chain(&self.remainder)
            .copied()
            .collect();
        all.sort_unstable();
        all
    }
}

/// Number of clean seats `R = floor(keep * n)`, at least 1.
pub fn clean_quota(keep: f64, n: usize) -> (usize, bool) {
    let r = floor_count(keep * n as f64).min(n);
    if r == 0 {
        (1, true)
    } else {
        (r, false)
    }
}

/// Ascending by value, ties by position.
fn ranked(values: &[f64], allowed: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| allowed(i)).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

pub fn select_clean_batch(
    losses: &[f64],
    vogs: Option<&[f64]>,
    keep: f64,
    mix_ratio: f64,
    vog_active: bool,
) -> Result<BatchSelection> {
    let n = losses.len();
    if n == 0 {
        return Err(Error::EmptySelection);
    }
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite("losses"));
    }
    let (quota, clamped) = clean_quota(keep, n);
    if clamped {
        log::warn!("clean quota rounded to zero for a batch of {n}; selecting one sample");
    }
    if !vog_active {
        return Ok(BatchSelection {
            by_loss: ranked(losses, |_| true).into_iter().take(quota).collect(),
            clamped,
            ..BatchSelection::default()
        });
    }
    let vogs = vogs.ok_or(Error::invalid("vogs", "VOG scores required when the criterion is active"))?;
    if vogs.len() != n {
        return Err(Error::DimensionMismatch {
            what: "vogs",
            expected: n,
            found: vogs.len(),
        });
    }
    if vogs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("vogs"));
    }
    let by_loss_count = floor_count((1.0 - mix_ratio) * quota as f64);
    let by_vog_count = floor_count(mix_ratio * quota as f64);
    let leftover = quota.saturating_sub(by_loss_count + by_vog_count);

    let loss_order = ranked(losses, |_| true);
    let by_loss: Vec<usize> = loss_order[..by_loss_count].to_vec();
    let mut taken = vec![false; n];
    by_loss.iter().for_each(|&i| taken[i] = true);
    let by_vog: Vec<usize> = ranked(vogs, |i| !taken[i]).into_iter().take(by_vog_count).collect();
    by_vog.iter().for_each(|&i| taken[i] = true);
    let remainder: Vec<usize> = loss_order
        .into_iter()
        .filter(|&i| !taken[i])
        .take(leftover)
        .collect();
    Ok(BatchSelection {
        by_loss,
        by_vog,
        remainder,
        clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    LossSelected,
    VogSelected,
    Rejected,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::LossSelected => "loss",
            Provenance::VogSelected => "vog",
            Provenance::Rejected => "rejected",
        }
    }
}

/// Which network's final selections define the clean set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PartitionRule {
    #[default]
    ModelA,
    Intersection,
    Union,
}

/// Clean/noisy partition of the training indices.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionState {
    pub clean: BTreeSet<usize>,
    pub noisy: BTreeSet<usize>,
    pub provenance: Vec<Provenance>,
}

impl PartitionState {
    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }

    /// Disjoint and covering `0..len`.
    pub fn is_partition(&self) -> bool {
        self.clean.is_disjoint(&self.noisy)
            && self.clean.len() + self.noisy.len() == self.len()
            && self.clean.iter().chain(&self.noisy).all(|&i| i < self.len())
    }

    pub fn clean_indices(&self) -> Vec<usize> {
        self.clean.iter().copied().collect()
    }

    pub fn noisy_indices(&self) -> Vec<usize> {
        self.noisy.iter().copied().collect()
    }
}

/// One mini-batch of an epoch with both networks' choices.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    /// Dataset indices in batch order.
    pub indices: Vec<usize>,
    /// Chosen by network A (used to update B).
    pub by_a: BatchSelection,
    /// Chosen by network B (used to update A).
    pub by_b: BatchSelection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSelections {
    pub epoch: usize,
    pub batches: Vec<BatchRecord>,
}

fn tag_selection(tags: &mut [Provenance], record: &BatchRecord, sel: &BatchSelection) {
    for &p in sel.by_loss.iter().chain(&sel.remainder) {
        tags[record.indices[p]] = Provenance::LossSelected;
    }
    for &p in &sel.by_vog {
        tags[record.indices[p]] = Provenance::VogSelected;
    }
}

/// Combines the per-batch selections of one epoch into a partition of
/// `0..sample_count`.
pub fn partition_dataset(
    selections: &EpochSelections,
    sample_count: usize,
    rule: PartitionRule,
) -> Result<PartitionState> {
    let mut seen = vec![false; sample_count];
    for record in &selections.batches {
        for &i in &record.indices {
            if i >= sample_count || seen[i] {
                return Err(Error::Coverage { index: i });
            }
            seen[i] = true;
        }
    }
    if let Some(index) = seen.iter().position(|s| !s) {
        return Err(Error::Coverage { index });
    }

    let mut tags_a = vec![Provenance::Rejected; sample_count];
    let mut tags_b = vec![Provenance::Rejected; sample_count];
    for record in &selections.batches {
        tag_selection(&mut tags_a, record, &record.by_a);
        tag_selection(&mut tags_b, record, &record.by_b);
    }
    let provenance: Vec<Provenance> = tags_a
        .iter()
        .zip(&tags_b)
        .map(|(&a, &b)| {
            let (in_a, in_b) = (a != Provenance::Rejected, b != Provenance::Rejected);
            let keep = match rule {
                PartitionRule::ModelA => in_a,
                PartitionRule::Intersection => in_a && in_b,
                PartitionRule::Union => in_a || in_b,
            };
            match (keep, in_a) {
                (false, _) => Provenance::Rejected,
                (true, true) => a,
                (true, false) => b,
            }
        })
        .collect();
    let (mut clean, mut noisy) = (BTreeSet::new(), BTreeSet::new());
    for (i, tag) in provenance.iter().enumerate() {
        if *tag == Provenance::Rejected {
            noisy.insert(i);
        } else {
            clean.insert(i);
        }
    }
    Ok(PartitionState {
        clean,
        noisy,
        provenance,
    })
}

/// One row of the per-epoch training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub keep_fraction: f64,
    pub mean_loss_a: f64,
    pub mean_loss_b: f64,
    pub n_vog_selected: usize,
    /// Against the injected noise flags, over network A's selection.
    pub clean_precision: Option<f64>,
    pub clean_recall: Option<f64>,
    pub held_out: Option<HeldOutScores>,
}

/// State of a co-teaching run: both networks, their optimizers and their
/// gradient traces.
#[derive(Debug, Clone)]
pub struct CoTeaching {
    pub model_a: Model,
    pub model_b: Model,
    pub opt_a: Sgd,
    pub opt_b: Sgd,
    pub trace_a: GradientTrace,
    pub trace_b: GradientTrace,
    pub cfg: SelectionConfig,
    /// Epoch used by the selection schedule; keeps counting across
    /// fine-tuning stages.
    schedule_epoch: usize,
}

impl CoTeaching {
    pub fn new(
        input_dim: usize,
        hidden_dim: usize,
        class_count: usize,
        sample_count: usize,
        cfg: SelectionConfig,
        optim: &OptimConfig,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let model_a = Model::init(input_dim, hidden_dim, class_count, derive_seed(seed, 1))?;
        let model_b = Model::init(input_dim, hidden_dim, class_count, derive_seed(seed, 2))?;
        let trace = GradientTrace::new(sample_count, hidden_dim, cfg.vog_window, cfg.vog_window_exclusive)?;
        Ok(CoTeaching {
            model_a,
            model_b,
            opt_a: optim.sgd(cfg.total_epochs)?,
            opt_b: optim.sgd(cfg.total_epochs)?,
            trace_a: trace.clone(),
            trace_b: trace,
            cfg,
            schedule_epoch: 0,
        })
    }

    pub fn schedule_epoch(&self) -> usize {
        self.schedule_epoch
    }

    /// Fresh optimizers with a cosine schedule over `epochs`, keeping the
    /// networks, traces and selection schedule.
    pub fn restart_optimizers(&mut self, optim: &OptimConfig, epochs: usize) -> Result<()> {
        self.opt_a = optim.sgd(epochs)?;
        self.opt_b = optim.sgd(epochs)?;
        Ok(())
    }

    /// One epoch of peer training. `optimizer_epoch` drives the learning-rate
    /// schedule.
    pub fn run_epoch(
        &mut self,
        data: &LabeledDataset,
        optimizer_epoch: usize,
        rng: &mut SimRng,
    ) -> Result<(EpochSelections, EpochLog)> {
        let epoch = self.schedule_epoch;
        let keep = keep_fraction(epoch, &self.cfg);
        let vog_active = self.cfg.vog_active(epoch);
        self.opt_a.set_epoch(optimizer_epoch);
        self.opt_b.set_epoch(optimizer_epoch);
        let lr = self.opt_a.learning_rate();

        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(rng);
        let labels = data.observed_labels();
        let mut batches = Vec::new();
        let (mut loss_a_sum, mut loss_b_sum) = (0.0, 0.0);
        let mut n_vog = 0;

        let (scores_a, scores_b) = if vog_active {
            let rule = self.cfg.vog_normalization;
            (
                normalized_vog(&self.trace_a, labels, data.class_count(), rule),
                normalized_vog(&self.trace_b, labels, data.class_count(), rule),
            )
        } else {
            (Vec::new(), Vec::new())
        };
        for batch in order.chunks(self.cfg.batch_size) {
            let x = data.features().select_rows(batch);
            let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let losses_a = self.model_a.losses(&x, &y)?;
            let losses_b = self.model_b.losses(&x, &y)?;
            loss_a_sum += losses_a.iter().sum::<f64>();
            loss_b_sum += losses_b.iter().sum::<f64>();

            let vog_of = |scores: &[Option<f64>]| -> Option<Vec<f64>> {
                batch.iter().map(|&i| scores[i]).collect()
            };
            let (vog_a, vog_b) = if vog_active {
                (vog_of(&scores_a), vog_of(&scores_b))
            } else {
                (None, None)
            };
            let by_a = select_clean_batch(
                &losses_a,
                vog_a.as_deref(),
                keep,
                self.cfg.mix_ratio,
                vog_a.is_some(),
            )?;
            let by_b = select_clean_batch(
                &losses_b,
                vog_b.as_deref(),
                keep,
                self.cfg.mix_ratio,
                vog_b.is_some(),
            )?;
            n_vog += by_a.by_vog.len();

            backward_step(&mut self.model_a, &x, &y, &by_b.positions(), &mut self.opt_a)?;
            backward_step(&mut self.model_b, &x, &y, &by_a.positions(), &mut self.opt_b)?;
            batches.push(BatchRecord {
                indices: batch.to_vec(),
                by_a,
                by_b,
            });
        }

        self.record_snapshots(data, epoch)?;
        self.schedule_epoch += 1;

        let (clean_precision, clean_recall) = selection_quality(&batches, data);
        let n = data.len().max(1) as f64;
        let log = EpochLog {
            epoch,
            lr,
            keep_fraction: keep,
            mean_loss_a: loss_a_sum / n,
            mean_loss_b: loss_b_sum / n,
            n_vog_selected: n_vog,
            clean_precision,
            clean_recall,
            held_out: None,
        };
        Ok((EpochSelections { epoch, batches }, log))
    }

    /// End-of-epoch feature-gradient snapshots for every sample.
    fn record_snapshots(&mut self, data: &LabeledDataset, epoch: usize) -> Result<()> {
        for (model, trace) in [
            (&self.model_a, &mut self.trace_a),
            (&self.model_b, &mut self.trace_b),
        ] {
            let grads = model.feature_gradients(
                data.features(),
                data.observed_labels(),
                self.cfg.vog_signal,
            )?;
            for (i, g) in grads.iter().enumerate() {
                trace.record_snapshot(i, epoch, g)?;
            }
        }
        Ok(())
    }
}

/// Latest VOG of every sample under `rule`; `None` until a sample's window
/// is full. Per-class statistics use the observed labels, and a class with
/// zero spread keeps unit scale.
pub fn normalized_vog(
    trace: &GradientTrace,
    labels: &[usize],
    class_count: usize,
    rule: VogNormalization,
) -> Vec<Option<f64>> {
    let raw: Vec<Option<f64>> = (0..trace.sample_count()).map(|i| trace.latest_vog(i)).collect();
    if rule == VogNormalization::None {
        return raw;
    }
    let mut sums = vec![(0.0, 0usize); class_count];
    for (v, &y) in raw.iter().zip(labels) {
        if let Some(v) = v {
            sums[y].0 += v;
            sums[y].1 += 1;
        }
    }
    let means: Vec<f64> = sums
        .iter()
        .map(|&(s, n)| if n > 0 { s / n as f64 } else { 0.0 })
        .collect();
    let mut sq = vec![0.0; class_count];
    for (v, &y) in raw.iter().zip(labels) {
        if let Some(v) = v {
            sq[y] += (v - means[y]) * (v - means[y]);
        }
    }
    let scales: Vec<f64> = sq
        .iter()
        .zip(&sums)
        .map(|(&s, &(_, n))| {
            let sd = if n > 0 { libm::sqrt(s / n as f64) } else { 0.0 };
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    raw.iter()
        .zip(labels)
        .map(|(v, &y)| v.map(|v| (v - means[y]) / scales[y]))
        .collect()
}

fn selection_quality(batches: &[BatchRecord], data: &LabeledDataset) -> (Option<f64>, Option<f64>) {
    let flags = data.noise_flags();
    let (mut selected, mut selected_clean) = (0usize, 0usize);
    for record in batches {
        for p in record.by_a.positions() {
            selected += 1;
            selected_clean += usize::from(!flags[record.indices[p]]);
        }
    }
    let clean_total = flags.iter().filter(|f| !**f).count();
    let precision = (selected > 0).then(|| selected_clean as f64 / selected as f64);
    let recall = (clean_total > 0).then(|| selected_clean as f64 / clean_total as f64);
    (precision, recall)
}

/// Outcome of a full co-teaching run.
#[derive(Debug, Clone)]
pub struct LnlOutcome {
    pub partition: PartitionState,
    pub logs: Vec<EpochLog>,
    pub final_selections: EpochSelections,
    /// Validation-best snapshot of network A (final network A without
    /// held-out sets).
    pub best_model_a: Model,
    pub best_scores: Option<HeldOutScores>,
    pub state: CoTeaching,
}

/// Runs `epochs` co-teaching epochs on `state` and partitions the data with
/// the last epoch's selections.
pub fn run_coteaching_stage(
    state: CoTeaching,
    data: &LabeledDataset,
    epochs: usize,
    eval: Option<&EvalSets<'_>>,
    rule: PartitionRule,
    rng: &mut SimRng,
) -> Result<LnlOutcome> {
    run_coteaching_observed(state, data, epochs, eval, rule, rng, |_, _| {})
}

/// [`run_coteaching_stage`] calling `observer` after every epoch.
pub fn run_coteaching_observed(
    mut state: CoTeaching,
    data: &LabeledDataset,
    epochs: usize,
    eval: Option<&EvalSets<'_>>,
    rule: PartitionRule,
    rng: &mut SimRng,
    mut observer: impl FnMut(&CoTeaching, &EpochLog),
) -> Result<LnlOutcome> {
    if epochs == 0 {
        return Err(Error::invalid("epochs", "must be at least 1"));
    }
    let mut logs = Vec::with_capacity(epochs);
    let mut tracker = BestTracker::new();
    let mut last = None;
    for e in 0..epochs {
        let (selections, mut log) = state.run_epoch(data, e, rng)?;
        if let Some(eval) = eval {
            let scores = eval.score(&state.model_a)?;
            tracker.offer(&state.model_a, e, scores);
            log.held_out = Some(scores);
        }
        observer(&state, &log);
        logs.push(log);
        last = Some(selections);
    }
    let final_selections = last.ok_or(Error::EmptySelection)?;
    let partition = partition_dataset(&final_selections, data.len(), rule)?;
    let (best_model_a, best_scores) = match tracker.into_best() {
        Some((model, _, scores)) => (model, Some(scores)),
        None => (state.model_a.clone(), None),
    };
    Ok(LnlOutcome {
        partition,
        logs,
        final_selections,
        best_model_a,
        best_scores,
        state,
    })
}

/// Co-teaching from freshly initialized networks for `cfg.total_epochs`.
pub fn train_coteaching(
    data: &LabeledDataset,
    cfg: SelectionConfig,
    optim: &OptimConfig,
    hidden_dim: usize,
    eval: Option<&EvalSets<'_>>,
    rule: PartitionRule,
    seed: u64,
) -> Result<LnlOutcome> {
    let state = CoTeaching::new(
        data.feature_dim(),
        hidden_dim,
        data.class_count(),
        data.len(),
        cfg,
        optim,
        seed,
    )?;
    let mut rng = crate::rng::rng_from_seed(derive_seed(seed, 3));
    run_coteaching_stage(state, data, cfg.total_epochs, eval, rule, &mut rng)
}
