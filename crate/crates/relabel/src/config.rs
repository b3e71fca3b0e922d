//! Flat `section.key = value` experiment configuration.
//!
//! Lines starting with `#` are comments. Every key is optional except
//! `data.source` and `noise.rate`; unknown keys are rejected. The resolved
//! form written by [`ExperimentConfig::to_text`] lists every key and parses
//! back to the same value.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use relabel_core::active::{BudgetPlan, InitStrategy, PipelineConfig, PipelineMode, SamplerKind};
use relabel_core::datagen::{pareto_class_counts, split_sizes, ImbalanceSpec};
use relabel_core::lnl::{PartitionRule, SelectionConfig, VogNormalization};
use relabel_core::model::GradientSignal;
use relabel_core::train::OptimConfig;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// Long-tailed Gaussian blobs generated per seed.
    Blobs,
    /// Dataset file (CSV, or the binary form for a `.nocl` extension).
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub source: DataSource,
    pub classes: usize,
    pub feature_dim: usize,
    pub separation: f64,
    pub head_count: usize,
    pub imbalance: f64,
    /// Train/validation ratios for blobs; train/validation/test for files.
    pub split: Vec<f64>,
    /// Size of each class in the balanced blob test set.
    pub test_per_class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LnlConfig {
    pub forget_rate: f64,
    pub decay: f64,
    pub warmup_epochs: usize,
    pub mix_ratio: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub vog_window: usize,
    pub vog_window_exclusive: bool,
    pub vog_signal: GradientSignal,
    pub vog_normalization: VogNormalization,
    pub partition: PartitionRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveConfig {
    pub modes: Vec<PipelineMode>,
    pub samplers: Vec<SamplerKind>,
    pub rounds: usize,
    pub per_round: usize,
    pub round_epochs: usize,
    pub finetune: bool,
    pub init: InitStrategy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub noise_rate: f64,
    pub hidden_dim: usize,
    pub optim: OptimConfig,
    pub lnl: LnlConfig,
    pub active: ActiveConfig,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        text.parse()
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            forget_max: self.lnl.forget_rate,
            decay: self.lnl.decay,
            warmup_epochs: self.lnl.warmup_epochs,
            mix_ratio: self.lnl.mix_ratio,
            total_epochs: self.lnl.epochs,
            batch_size: self.lnl.batch_size,
            vog_window: self.lnl.vog_window,
            vog_window_exclusive: self.lnl.vog_window_exclusive,
            vog_signal: self.lnl.vog_signal,
            vog_normalization: self.lnl.vog_normalization,
        }
    }

    pub fn budget(&self) -> BudgetPlan {
        BudgetPlan {
            rounds: self.active.rounds,
            per_round: self.active.per_round,
        }
    }

    pub fn pipeline(&self, mode: PipelineMode, sampler: SamplerKind, seed: u64) -> PipelineConfig {
        PipelineConfig {
            mode,
            sampler,
            budget: self.budget(),
            selection: self.selection(),
            optim: self.optim,
            hidden_dim: self.hidden_dim,
            round_epochs: self.active.round_epochs,
            finetune: self.active.finetune,
            init_strategy: self.active.init,
            partition_rule: self.lnl.partition,
            seed,
        }
    }

    /// Single mode, sampler and seed; the unit that gets a run id.
    pub fn for_run(&self, mode: PipelineMode, sampler: SamplerKind, seed: u64) -> ExperimentConfig {
        let mut cfg = self.clone();
        cfg.active.modes = vec![mode];
        cfg.active.samplers = vec![sampler];
        cfg.seeds = vec![seed];
        cfg
    }

    /// Pareto class counts of the blob benchmark.
    pub fn class_counts(&self) -> Result<Vec<usize>> {
        pareto_class_counts(&ImbalanceSpec {
            head_count: self.data.head_count,
            imbalance_factor: self.data.imbalance,
            class_count: self.data.classes,
        })
        .map_err(|e| HarnessError::config("data.imbalance", e.to_string()))
    }

    /// Checks that the budget fits a training set of `train_size`.
    pub fn check_budget(&self, train_size: usize) -> Result<()> {
        self.budget()
            .check_feasible(train_size)
            .map_err(|e| HarnessError::config("active.per_round", e.to_string()))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |key: &str, value: String| {
            let _ = writeln!(s, "{key} = {value}");
        };
        let d = &self.data;
        put(
            "data.source",
            match &d.source {
                DataSource::Blobs => "blobs".into(),
                DataSource::File(p) => p.display().to_string(),
            },
        );
        put("data.classes", d.classes.to_string());
        put("data.feature_dim", d.feature_dim.to_string());
        put("data.separation", d.separation.to_string());
        put("data.head_count", d.head_count.to_string());
        put("data.imbalance", d.imbalance.to_string());
        put("data.split", join(&d.split));
        put("data.test_per_class", d.test_per_class.to_string());
        put("noise.rate", self.noise_rate.to_string());
        put("model.hidden_dim", self.hidden_dim.to_string());
        put("optim.lr", self.optim.lr0.to_string());
        put("optim.momentum", self.optim.momentum.to_string());
        put("optim.weight_decay", self.optim.weight_decay.to_string());
        let l = &self.lnl;
        put("lnl.forget_rate", l.forget_rate.to_string());
        put("lnl.decay", l.decay.to_string());
        put("lnl.warmup_epochs", l.warmup_epochs.to_string());
        put("lnl.mix_ratio", l.mix_ratio.to_string());
        put("lnl.epochs", l.epochs.to_string());
        put("lnl.batch_size", l.batch_size.to_string());
        put("lnl.vog_window", l.vog_window.to_string());
        put("lnl.vog_window_exclusive", l.vog_window_exclusive.to_string());
        put("lnl.vog_signal", l.vog_signal.as_str().into());
        put("lnl.vog_normalization", l.vog_normalization.as_str().into());
        put("lnl.partition", partition_name(l.partition).into());
        let a = &self.active;
        put("active.mode", join(&a.modes));
        put("active.sampler", join(&a.samplers));
        put("active.rounds", a.rounds.to_string());
        put("active.per_round", a.per_round.to_string());
        put("active.round_epochs", a.round_epochs.to_string());
        put("active.finetune", a.finetune.to_string());
        put("active.init", a.init.as_str().into());
        put("run.seeds", join(&self.seeds));
        put("run.out", self.out.display().to_string());
        s
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn partition_name(rule: PartitionRule) -> &'static str {
    match rule {
        PartitionRule::ModelA => "model_a",
        PartitionRule::Intersection => "intersection",
        PartitionRule::Union => "union",
    }
}

impl FromStr for ExperimentConfig {
    type Err = HarnessError;

    fn from_str(text: &str) -> Result<Self> {
        let mut raw = Entries::parse(text)?;
        let source = match raw.required("data.source")?.as_str() {
            "blobs" => DataSource::Blobs,
            path => DataSource::File(PathBuf::from(path)),
        };
        let file = matches!(source, DataSource::File(_));
        let noise_rate = raw.required_parsed("noise.rate")?;
        let default_split = if file { vec![0.7, 0.1, 0.2] } else { vec![0.8, 0.2] };
        let data = DataConfig {
            source,
            classes: raw.get("data.classes", 8)?,
            feature_dim: raw.get("data.feature_dim", 16)?,
            separation: raw.get("data.separation", 5.0)?,
            head_count: raw.get("data.head_count", 1000)?,
            imbalance: raw.get("data.imbalance", 50.0)?,
            split: raw.list("data.split", default_split)?,
            test_per_class: raw.get("data.test_per_class", 100)?,
        };
        let optim = OptimConfig {
            lr0: raw.get("optim.lr", 0.01)?,
            momentum: raw.get("optim.momentum", 0.9)?,
            weight_decay: raw.get("optim.weight_decay", 1e-4)?,
        };
        let lnl = LnlConfig {
            forget_rate: raw.get("lnl.forget_rate", noise_rate)?,
            decay: raw.get("lnl.decay", 1.0)?,
            warmup_epochs: raw.get("lnl.warmup_epochs", 10)?,
            mix_ratio: raw.get("lnl.mix_ratio", 0.2)?,
            epochs: raw.get("lnl.epochs", 60)?,
            batch_size: raw.get("lnl.batch_size", 64)?,
            vog_window: raw.get("lnl.vog_window", 5)?,
            vog_window_exclusive: raw.get("lnl.vog_window_exclusive", false)?,
            vog_signal: raw.with("lnl.vog_signal", GradientSignal::LogProbability, |s| match s {
                "probability" => Some(GradientSignal::Probability),
                "log_probability" => Some(GradientSignal::LogProbability),
                _ => None,
            })?,
            vog_normalization: raw.with("lnl.vog_normalization", VogNormalization::PerClass, |s| match s {
                "none" => Some(VogNormalization::None),
                "class" => Some(VogNormalization::PerClass),
                _ => None,
            })?,
            partition: raw.with("lnl.partition", PartitionRule::ModelA, |s| match s {
                "model_a" => Some(PartitionRule::ModelA),
                "intersection" => Some(PartitionRule::Intersection),
                "union" => Some(PartitionRule::Union),
                _ => None,
            })?,
        };
        let active = ActiveConfig {
            modes: raw.list("active.mode", vec![PipelineMode::CtVogAl])?,
            samplers: raw.list("active.sampler", vec![SamplerKind::Entropy])?,
            rounds: raw.get("active.rounds", 8)?,
            per_round: raw.get("active.per_round", 50)?,
            round_epochs: raw.get("active.round_epochs", 60)?,
            finetune: raw.get("active.finetune", false)?,
            init: raw.get("active.init", InitStrategy::Retrain)?,
        };
        let cfg = ExperimentConfig {
            data,
            noise_rate,
            hidden_dim: raw.get("model.hidden_dim", 32)?,
            optim,
            lnl,
            active,
            seeds: raw.list("run.seeds", vec![1, 2, 3])?,
            out: raw.get("run.out", PathBuf::from("results"))?,
        };
        raw.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        fn err(key: &str, msg: impl Into<String>) -> HarnessError {
            HarnessError::config(key, msg)
        }
        let unit = |key: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(err(key, format!("{v} is outside [0, 1]")))
            }
        };
        let at_least = |key: &str, v: usize, min: usize| {
            if v >= min {
                Ok(())
            } else {
                Err(err(key, format!("{v} is below the minimum {min}")))
            }
        };
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(err(key, format!("{v} must be positive")))
            }
        };
        let d = &self.data;
        at_least("data.classes", d.classes, 2)?;
        at_least("data.feature_dim", d.feature_dim, 1)?;
        positive("data.separation", d.separation)?;
        at_least("data.head_count", d.head_count, 1)?;
        if !(d.imbalance >= 1.0 && d.imbalance.is_finite()) {
            return Err(err("data.imbalance", format!("{} must be at least 1", d.imbalance)));
        }
        let parts = if matches!(d.source, DataSource::File(_)) { 3 } else { 2 };
        if d.split.len() != parts || d.split.iter().any(|r| !(*r > 0.0)) {
            return Err(err("data.split", format!("expected {parts} positive ratios")));
        }
        if (d.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(err("data.split", "ratios must sum to 1"));
        }
        at_least("data.test_per_class", d.test_per_class, 1)?;
        unit("noise.rate", self.noise_rate)?;
        at_least("model.hidden_dim", self.hidden_dim, 1)?;
        positive("optim.lr", self.optim.lr0)?;
        if !(0.0..1.0).contains(&self.optim.momentum) {
            return Err(err("optim.momentum", format!("{} is outside [0, 1)", self.optim.momentum)));
        }
        if !(self.optim.weight_decay >= 0.0 && self.optim.weight_decay.is_finite()) {
            return Err(err("optim.weight_decay", "must be non-negative"));
        }
        let l = &self.lnl;
        unit("lnl.forget_rate", l.forget_rate)?;
        positive("lnl.decay", l.decay)?;
        at_least("lnl.warmup_epochs", l.warmup_epochs, 1)?;
        unit("lnl.mix_ratio", l.mix_ratio)?;
        at_least("lnl.epochs", l.epochs, 1)?;
        at_least("lnl.batch_size", l.batch_size, 1)?;
        at_least("lnl.vog_window", l.vog_window, if l.vog_window_exclusive { 2 } else { 1 })?;
        let a = &self.active;
        if a.modes.is_empty() {
            return Err(err("active.mode", "at least one mode is required"));
        }
        if a.samplers.is_empty() {
            return Err(err("active.sampler", "at least one sampler is required"));
        }
        at_least("active.rounds", a.rounds, 1)?;
        at_least("active.per_round", a.per_round, 1)?;
        at_least("active.round_epochs", a.round_epochs, 1)?;
        if self.seeds.is_empty() {
            return Err(err("run.seeds", "at least one seed is required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(err("run.seeds", format!("seed {dup} is repeated")));
        }
        if d.source == DataSource::Blobs {
            let total: usize = self.class_counts()?.iter().sum();
            let sizes = split_sizes(total, &d.split).map_err(|e| err("data.split", e.to_string()))?;
            self.check_budget(sizes[0])?;
        }
        Ok(())
    }
}

struct Entries {
    values: BTreeMap<String, String>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(HarnessError::config(
                    format!("line {}", n + 1),
                    "expected `key = value`",
                ));
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(HarnessError::config(format!("line {}", n + 1), "empty key"));
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(HarnessError::config(key, "key given more than once"));
            }
        }
        Ok(Entries { values })
    }

    fn required(&mut self, key: &str) -> Result<String> {
        self.values
            .remove(key)
            .ok_or_else(|| HarnessError::config(key, "required key is missing"))
    }

    fn required_parsed<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.required(key)?;
        v.parse()
            .map_err(|_| HarnessError::config(key, format!("cannot parse `{v}`")))
    }

    fn with<T>(&mut self, key: &str, default: T, parse: impl Fn(&str) -> Option<T>) -> Result<T> {
        match self.values.remove(key) {
            None => Ok(default),
            Some(v) => parse(&v).ok_or_else(|| HarnessError::config(key, format!("cannot parse `{v}`"))),
        }
    }

    fn get<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        self.with(key, default, |s| s.parse().ok())
    }

    fn list<T: FromStr>(&mut self, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        self.with(key, default, |s| {
            s.split(',').map(|item| item.trim().parse().ok()).collect()
        })
    }

    fn finish(self) -> Result<()> {
        match self.values.into_keys().next() {
            Some(key) => Err(HarnessError::config(key, "unknown key")),
            None => Ok(()),
        }
    }
}
