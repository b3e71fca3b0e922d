//! Command-line interface.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use relabel_core::active::{base_for_cleaning, run_cleaning, PipelineMode, SamplerKind};
use relabel_core::datagen::{inject_symmetric_noise, NoiseSpec};
use relabel_core::lnl::{run_coteaching_observed, CoTeaching, PartitionState, Provenance};
use relabel_core::metrics::selection_report;
use relabel_core::rng::{derive_seed, rng_from_seed};
use relabel_core::train::EvalSets;

use crate::benchmark::{blob_pool, build};
use crate::config::{DataSource, ExperimentConfig};
use crate::error::{HarnessError, Result};
use crate::experiment::{compare, emit_curves, run_experiment};
use crate::formats::{
    load_dataset, read_model, read_rows, save_dataset, write_model, write_rows, write_table, PartitionRow,
    RoundRow, SelectionRow, Table, TrainingRow, VogRow,
};

#[derive(Debug, Parser)]
#[command(name = "relabel", version, about = "Noisy-label training and budgeted label cleaning experiments")]
pub struct Cli {
    /// Experiment configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run a single seed instead of `run.seeds`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Pipeline mode: ctvog_al, al_only, ce_al or alc_ct.
    #[arg(long, global = true)]
    pub mode: Option<PipelineMode>,
    /// Sampler: random, entropy or coreset.
    #[arg(long, global = true)]
    pub sampler: Option<SamplerKind>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the clean long-tailed blob pool of a seed to a dataset file.
    GenData,
    /// Inject symmetric label noise into a dataset file.
    InjectNoise {
        #[arg(long)]
        input: PathBuf,
        /// Noise rate; defaults to `noise.rate` of the configuration.
        #[arg(long)]
        rate: Option<f64>,
    },
    /// Run co-teaching and write the partition, checkpoint and VOG trace.
    TrainLnl,
    /// Run the cleaning rounds from a `train-lnl` output directory.
    Clean {
        #[arg(long)]
        lnl_dir: PathBuf,
    },
    /// Run every mode, sampler and seed of the configuration.
    Run,
    /// Paired per-round test macro-F1 deltas (`b - a`) of two experiments.
    Compare { a: PathBuf, b: PathBuf },
    /// Plot-ready curves of a completed experiment.
    EmitCurves { dir: PathBuf },
}

impl Cli {
    fn config(&self) -> Result<ExperimentConfig> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| HarnessError::config("--config", "this command needs a configuration file"))?;
        let mut cfg = ExperimentConfig::from_path(path)?;
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(mode) = self.mode {
            cfg.active.modes = vec![mode];
        }
        if let Some(sampler) = self.sampler {
            cfg.active.samplers = vec![sampler];
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| HarnessError::config("--out", "this command needs an output path"))
    }
}

fn emit<T: Table>(out: Option<&Path>, rows: &[T]) -> Result<()> {
    match out {
        Some(path) => write_rows(path, rows),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_table(&mut lock, rows).map_err(|e| HarnessError::format("<stdout>", e.to_string()))?;
            lock.flush().map_err(|e| HarnessError::io("<stdout>", e))
        }
    }
}

fn provenance(name: &str) -> Option<Provenance> {
    [Provenance::LossSelected, Provenance::VogSelected, Provenance::Rejected]
        .into_iter()
        .find(|p| p.as_str() == name)
}

fn read_partition(path: &Path, n: usize) -> Result<PartitionState> {
    let rows: Vec<PartitionRow> = read_rows(path)?;
    if rows.len() != n || rows.iter().enumerate().any(|(i, r)| r.sample_id != i) {
        return Err(HarnessError::format(path, format!("expected sample ids 0..{n} in order")));
    }
    let mut clean = BTreeSet::new();
    let mut prov = Vec::with_capacity(n);
    for r in &rows {
        prov.push(provenance(&r.provenance).ok_or_else(|| HarnessError::format(path, format!("bad provenance `{}`", r.provenance)))?);
        if r.clean == 1 {
            clean.insert(r.sample_id);
        }
    }
    let noisy = (0..n).filter(|i| !clean.contains(i)).collect();
    Ok(PartitionState {
        clean,
        noisy,
        provenance: prov,
    })
}

fn train_lnl(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let seed = cfg.seeds[0];
    let bench = build(cfg, seed)?;
    let pipeline = cfg.pipeline(PipelineMode::CtVogAl, cfg.active.samplers[0], seed);
    let lnl_seed = derive_seed(seed, 10);
    let t = &bench.train;
    let state = CoTeaching::new(
        t.feature_dim(),
        cfg.hidden_dim,
        t.class_count(),
        t.len(),
        pipeline.selection,
        &pipeline.optim,
        lnl_seed,
    )?;
    let mut rng = rng_from_seed(derive_seed(lnl_seed, 3));
    let eval = EvalSets {
        val: &bench.val,
        test: &bench.test,
    };
    let mut vog = Vec::new();
    let outcome = run_coteaching_observed(
        state,
        t,
        pipeline.selection.total_epochs,
        Some(&eval),
        pipeline.partition_rule,
        &mut rng,
        |state, log| {
            for i in 0..t.len() {
                if state.trace_a.last_epoch(i) == Some(log.epoch) {
                    if let Some(v) = state.trace_a.latest_vog(i) {
                        vog.push(VogRow {
                            sample_id: i,
                            epoch: log.epoch,
                            vog: v,
                        });
                    }
                }
            }
        },
    )?;
    let training: Vec<TrainingRow> = outcome.logs.iter().map(TrainingRow::from).collect();
    write_rows(&dir.join("training.csv"), &training)?;
    write_rows(&dir.join("vog.csv"), &vog)?;
    let p = &outcome.partition;
    let rows: Vec<PartitionRow> = (0..p.len())
        .map(|i| PartitionRow {
            sample_id: i,
            clean: u8::from(p.clean.contains(&i)),
            provenance: p.provenance[i].as_str().into(),
        })
        .collect();
    write_rows(&dir.join("partition.csv"), &rows)?;
    let table: Vec<SelectionRow> = selection_report(&p.clean_indices(), t).iter().map(SelectionRow::from).collect();
    write_rows(&dir.join("table1.csv"), &table)?;
    write_model(&dir.join("model_a.nocm"), &outcome.best_model_a)
}

fn clean(cfg: &ExperimentConfig, lnl_dir: &Path, dir: &Path) -> Result<()> {
    let seed = cfg.seeds[0];
    let bench = build(cfg, seed)?;
    let pipeline = cfg.pipeline(PipelineMode::CtVogAl, cfg.active.samplers[0], seed);
    let partition = read_partition(&lnl_dir.join("partition.csv"), bench.train.len())?;
    let model = read_model(&lnl_dir.join("model_a.nocm"))?;
    let scores = EvalSets {
        val: &bench.val,
        test: &bench.test,
    }
    .score(&model)?;
    let base = base_for_cleaning(&pipeline, &bench.train, &partition, Some((model, Some(scores))), &bench.val, &bench.test)?;
    let (rounds, _, _, _) = run_cleaning(&pipeline, bench.train, &partition, base, &bench.val, &bench.test)?;
    let rows: Vec<RoundRow> = rounds.iter().map(RoundRow::from).collect();
    write_rows(&dir.join("rounds.csv"), &rows)
}

/// Executes the parsed command and returns the process exit code.
pub fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::GenData => {
            let cfg = cli.config()?;
            if cfg.data.source != DataSource::Blobs {
                return Err(HarnessError::config("data.source", "gen-data needs `blobs`"));
            }
            save_dataset(cli.out()?, &blob_pool(&cfg, cfg.seeds[0])?)?;
        }
        Command::InjectNoise { input, rate } => {
            let cfg = cli.config.as_ref().map(|_| cli.config()).transpose()?;
            let rate = match (rate, &cfg) {
                (Some(r), _) => *r,
                (None, Some(c)) => c.noise_rate,
                (None, None) => return Err(HarnessError::config("--rate", "give --rate or --config")),
            };
            if !(0.0..=1.0).contains(&rate) {
                return Err(HarnessError::config("--rate", format!("{rate} is outside [0, 1]")));
            }
            let seed = cli.seed.or(cfg.map(|c| c.seeds[0])).unwrap_or(1);
            let data = load_dataset(input, None)?;
            let noisy = inject_symmetric_noise(
                &data,
                &NoiseSpec {
                    rate,
                    seed: derive_seed(seed, 4),
                },
            )?;
            save_dataset(cli.out()?, &noisy)?;
        }
        Command::TrainLnl => {
            let cfg = cli.config()?;
            train_lnl(&cfg, &cfg.out)?;
        }
        Command::Clean { lnl_dir } => {
            let cfg = cli.config()?;
            clean(&cfg, lnl_dir, &cfg.out)?;
        }
        Command::Run => {
            let cfg = cli.config()?;
            let report = run_experiment(&cfg, &cfg.out)?;
            println!("{}", report.dir.display());
            return Ok(report.exit_code());
        }
        Command::Compare { a, b } => emit(cli.out.as_deref(), &compare(a, b)?)?,
        Command::EmitCurves { dir } => {
            let rows = emit_curves(dir)?;
            let out = cli.out.clone().unwrap_or_else(|| dir.join("curves.csv"));
            write_rows(&out, &rows)?;
        }
    }
    Ok(0)
}
