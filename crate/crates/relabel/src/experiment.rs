//! Experiment orchestration: one run per mode, sampler and seed, then the
//! cross-seed aggregates.
//!
//! Layout under the output root:
//!
//! ```text
//! <experiment_id>/config.resolved
//! <experiment_id>/rounds.csv
//! <experiment_id>/summary.json
//! <experiment_id>/runs/<run_id>/{config.resolved, rounds.csv, training.csv, table1.csv}
//! ```
//!
//! Ids are content hashes of the resolved configuration, so a changed
//! configuration never overwrites earlier results. A run directory that
//! already holds its `rounds.csv` is reused.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use relabel_core::active::{run_pipeline, PipelineMode, SamplerKind};
use relabel_core::metrics::selection_report;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmark::build;
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::formats::{read_rows, write_rows, CurveRow, RoundRow, SelectionRow, TrainingRow};

pub const RESOLVED: &str = "config.resolved";
pub const ROUNDS: &str = "rounds.csv";
pub const SUMMARY: &str = "summary.json";

/// First 16 hex digits of the SHA-256 of `text`.
pub fn content_id(text: &str) -> String {
    hex::encode(&Sha256::digest(text.as_bytes())[..8])
}

/// Resolved configuration without the output location.
fn identity(cfg: &ExperimentConfig) -> String {
    cfg.to_text()
        .lines()
        .filter(|line| !line.starts_with("run.out "))
        .fold(String::new(), |acc, line| acc + line + "\n")
}

pub fn experiment_id(cfg: &ExperimentConfig) -> String {
    content_id(&identity(cfg))
}

pub fn run_id(cfg: &ExperimentConfig, mode: PipelineMode, sampler: SamplerKind, seed: u64) -> String {
    content_id(&identity(&cfg.for_run(mode, sampler, seed)))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::format(path, e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// Structured record of a failed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run_id: String,
    pub mode: String,
    pub sampler: String,
    pub seed: u64,
    pub exit_code: i32,
    pub error: String,
}

/// Runs one mode, sampler and seed into `dir` and returns its rounds.
pub fn execute_run(
    cfg: &ExperimentConfig,
    mode: PipelineMode,
    sampler: SamplerKind,
    seed: u64,
    dir: &Path,
) -> Result<Vec<RoundRow>> {
    let rounds_path = dir.join(ROUNDS);
    if rounds_path.exists() {
        log::info!("reusing completed run {}", dir.display());
        return read_rows(&rounds_path);
    }
    write_text(&dir.join(RESOLVED), &cfg.for_run(mode, sampler, seed).to_text())?;
    let bench = build(cfg, seed)?;
    let pipeline = cfg.pipeline(mode, sampler, seed);
    let outcome = run_pipeline(&pipeline, &bench.train, &bench.val, &bench.test)?;
    let training: Vec<TrainingRow> = outcome.lnl_logs.iter().map(TrainingRow::from).collect();
    write_rows(&dir.join("training.csv"), &training)?;
    let report = match &outcome.initial_partition {
        Some(partition) => selection_report(&partition.clean_indices(), &bench.train),
        None => selection_report(&outcome.final_state.clean_indices(), &outcome.train),
    };
    let table: Vec<SelectionRow> = report.iter().map(SelectionRow::from).collect();
    write_rows(&dir.join("table1.csv"), &table)?;
    let rows: Vec<RoundRow> = outcome.rounds.iter().map(RoundRow::from).collect();
    // written last: its presence marks the run complete
    write_rows(&rounds_path, &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation (`n - 1`); the deviation of a single
/// value is 0.
pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    MeanStd { mean, std }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round: usize,
    pub macro_f1_test: MeanStd,
    pub macro_f1_val: MeanStd,
    pub cumulative_relabeled: MeanStd,
    pub noise_remaining: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub mode: String,
    pub sampler: String,
    pub seeds: Vec<u64>,
    pub rounds: Vec<RoundSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment_id: String,
    pub groups: Vec<GroupSummary>,
    pub failures: Vec<RunFailure>,
}

/// Rows of one mode and sampler, keyed by round and then seed.
type Grouped = Vec<((String, String), BTreeMap<usize, BTreeMap<u64, RoundRow>>)>;

/// Groups rows by mode and sampler in order of first appearance.
fn group(rows: &[RoundRow]) -> Result<Grouped> {
    let mut groups: Grouped = Vec::new();
    for row in rows {
        let key = (row.mode.clone(), row.sampler.clone());
        let pos = match groups.iter().position(|(k, _)| *k == key) {
            Some(p) => p,
            None => {
                groups.push((key, BTreeMap::new()));
                groups.len() - 1
            }
        };
        let by_seed = groups[pos].1.entry(row.round).or_default();
        if by_seed.insert(row.seed, row.clone()).is_some() {
            return Err(HarnessError::format(
                ROUNDS,
                format!("round {} of seed {} appears twice", row.round, row.seed),
            ));
        }
    }
    Ok(groups)
}

/// Checks that every group has rounds `0..=M` for the same seeds.
fn check_complete(groups: &Grouped) -> std::result::Result<(), String> {
    for ((mode, sampler), rounds) in groups {
        let seeds: Vec<u64> = rounds.values().next().map(|s| s.keys().copied().collect()).unwrap_or_default();
        for (expected, (round, by_seed)) in rounds.iter().enumerate() {
            if *round != expected {
                return Err(format!("{mode}/{sampler}: round {expected} is missing"));
            }
            if !by_seed.keys().copied().eq(seeds.iter().copied()) {
                return Err(format!("{mode}/{sampler}: round {round} lacks some seeds"));
            }
        }
    }
    Ok(())
}

fn summarize(rows: &[RoundRow]) -> Result<Vec<GroupSummary>> {
    let groups = group(rows)?;
    Ok(groups
        .into_iter()
        .map(|((mode, sampler), rounds)| {
            let seeds = rounds.values().next().map(|s| s.keys().copied().collect()).unwrap_or_default();
            let rounds = rounds
                .into_iter()
                .map(|(round, by_seed)| {
                    let stat = |f: fn(&RoundRow) -> f64| mean_std(&by_seed.values().map(f).collect::<Vec<_>>());
                    RoundSummary {
                        round,
                        macro_f1_test: stat(|r| r.macro_f1_test),
                        macro_f1_val: stat(|r| r.macro_f1_val),
                        cumulative_relabeled: stat(|r| r.cumulative_relabeled as f64),
                        noise_remaining: stat(|r| r.noise_remaining as f64),
                    }
                })
                .collect();
            GroupSummary {
                mode,
                sampler,
                seeds,
                rounds,
            }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub dir: PathBuf,
    pub rows: Vec<RoundRow>,
    pub summary: Summary,
}

impl ExperimentReport {
    pub fn exit_code(&self) -> i32 {
        if self.summary.failures.is_empty() {
            0
        } else {
            3
        }
    }
}

/// Runs every mode, sampler and seed of `cfg` under `out`. A failing run is
/// recorded in its `error.json` and in the summary; the others continue.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    let id = experiment_id(cfg);
    let dir = out.join(&id);
    write_text(&dir.join(RESOLVED), &cfg.to_text())?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &mode in &cfg.active.modes {
        for &sampler in &cfg.active.samplers {
            for &seed in &cfg.seeds {
                let rid = run_id(cfg, mode, sampler, seed);
                let run_dir = dir.join("runs").join(&rid);
                log::info!("run {rid}: mode {mode}, sampler {sampler}, seed {seed}");
                match execute_run(cfg, mode, sampler, seed, &run_dir) {
                    Ok(r) => rows.extend(r),
                    Err(e) => {
                        log::error!("run {rid} failed: {e}");
                        let failure = RunFailure {
                            run_id: rid,
                            mode: mode.to_string(),
                            sampler: sampler.to_string(),
                            seed,
                            exit_code: e.exit_code(),
                            error: e.to_string(),
                        };
                        write_json(&run_dir.join("error.json"), &failure)?;
                        failures.push(failure);
                    }
                }
            }
        }
    }
    write_rows(&dir.join(ROUNDS), &rows)?;
    let summary = Summary {
        experiment_id: id,
        groups: summarize(&rows)?,
        failures,
    };
    write_json(&dir.join(SUMMARY), &summary)?;
    Ok(ExperimentReport { dir, rows, summary })
}

fn completed_rows(dir: &Path) -> Result<Vec<RoundRow>> {
    let incomplete = |what: &str| HarnessError::format(dir, format!("incomplete run: {what}"));
    if !dir.join(SUMMARY).exists() {
        return Err(incomplete("summary.json is missing"));
    }
    let rounds = dir.join(ROUNDS);
    if !rounds.exists() {
        return Err(incomplete("rounds.csv is missing"));
    }
    let rows: Vec<RoundRow> = read_rows(&rounds)?;
    if rows.is_empty() {
        return Err(incomplete("no rounds recorded"));
    }
    check_complete(&group(&rows)?).map_err(|m| incomplete(&m))?;
    Ok(rows)
}

/// Long-format test macro-F1 curves of a completed experiment directory.
pub fn emit_curves(dir: &Path) -> Result<Vec<CurveRow>> {
    let rows = completed_rows(dir)?;
    Ok(summarize(&rows)?
        .into_iter()
        .flat_map(|g| {
            g.rounds.into_iter().map(move |r| CurveRow {
                mode: g.mode.clone(),
                sampler: g.sampler.clone(),
                round: r.round,
                f1_mean: r.macro_f1_test.mean,
                f1_std: r.macro_f1_test.std,
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub round: usize,
    pub pairs: usize,
    pub f1_a: f64,
    pub f1_b: f64,
    pub delta_mean: f64,
    pub delta_std: f64,
}

impl crate::formats::Table for CompareRow {
    const HEADER: &'static [&'static str] = &["round", "pairs", "f1_a", "f1_b", "delta_mean", "delta_std"];
}

/// Test macro-F1 of `b` minus `a`, paired by round and seed. Each directory
/// must hold a single mode and sampler.
pub fn compare(a: &Path, b: &Path) -> Result<Vec<CompareRow>> {
    let load = |dir: &Path| -> Result<BTreeMap<usize, BTreeMap<u64, RoundRow>>> {
        let mut groups = group(&completed_rows(dir)?)?;
        if groups.len() != 1 {
            return Err(HarnessError::format(dir, "compare needs a single mode and sampler per directory"));
        }
        Ok(groups.remove(0).1)
    };
    let (ra, rb) = (load(a)?, load(b)?);
    let mut out = Vec::new();
    for (round, seeds_a) in &ra {
        let Some(seeds_b) = rb.get(round) else { continue };
        let pairs: Vec<(f64, f64)> = seeds_a
            .iter()
            .filter_map(|(seed, x)| seeds_b.get(seed).map(|y| (x.macro_f1_test, y.macro_f1_test)))
            .collect();
        if pairs.is_empty() {
            continue;
        }
        let deltas: Vec<f64> = pairs.iter().map(|(x, y)| y - x).collect();
        let d = mean_std(&deltas);
        let n = pairs.len() as f64;
        out.push(CompareRow {
            round: *round,
            pairs: pairs.len(),
            f1_a: pairs.iter().map(|p| p.0).sum::<f64>() / n,
            f1_b: pairs.iter().map(|p| p.1).sum::<f64>() / n,
            delta_mean: d.mean,
            delta_std: d.std,
        });
    }
    if out.is_empty() {
        return Err(HarnessError::format(b, "no rounds pair up by seed"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_deviation() {
        let s = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[0.7]).std, 0.0);
    }
}
