use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relabel::experiment::run_id;
use relabel::ExperimentConfig;
use relabel_core::active::{PipelineMode, SamplerKind};

const TINY: &str = "\
data.source = blobs
data.classes = 3
data.feature_dim = 4
data.head_count = 100
data.imbalance = 4
data.test_per_class = 30
noise.rate = 0.4
model.hidden_dim = 8
lnl.epochs = 12
active.rounds = 2
active.per_round = 10
active.round_epochs = 6
";

fn relabel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relabel"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .unwrap()
}

fn config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("exp.cfg");
    fs::write(&path, format!("{TINY}{extra}")).unwrap();
    path
}

fn run(cfg: &Path, out: &Path, extra: &[&str]) -> (i32, PathBuf) {
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = relabel(&args);
    let dir = PathBuf::from(String::from_utf8(o.stdout).unwrap().trim());
    (o.status.code().unwrap(), dir)
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = config(tmp.path(), "lnl.mix_ratio = 1.3\n");
    let o = relabel(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lnl.mix_ratio"));
    assert_eq!(relabel(&["run"]).status.code(), Some(2));
    assert_eq!(relabel(&["train-lnl", "--config", "/nonexistent.cfg"]).status.code(), Some(3));
    assert_eq!(relabel(&["emit-curves", tmp.path().to_str().unwrap()]).status.code(), Some(3));
    assert_eq!(relabel(&["run", "--mode", "best"]).status.code(), Some(2));
}

#[test]
fn runs_are_reproducible_and_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "active.mode = ctvog_al,al_only\nrun.seeds = 4,5\n");
    let (code, first) = run(&cfg, &tmp.path().join("a"), &[]);
    assert_eq!(code, 0);
    let (_, second) = run(&cfg, &tmp.path().join("b"), &[]);
    let rounds = fs::read(first.join("rounds.csv")).unwrap();
    assert_eq!(rounds, fs::read(second.join("rounds.csv")).unwrap());
    assert_eq!(fs::read(first.join("summary.json")).unwrap(), fs::read(second.join("summary.json")).unwrap());

    let text = String::from_utf8(rounds).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
    let resolved = fs::read_to_string(first.join("config.resolved")).unwrap();
    let reparsed: ExperimentConfig = resolved.parse().unwrap();
    assert_eq!(reparsed.to_text(), resolved);

    let summary: serde_json::Value = serde_json::from_slice(&fs::read(first.join("summary.json")).unwrap()).unwrap();
    let groups = summary["groups"].as_array().unwrap();
    assert_eq!(groups.len(), 2);
    for g in groups {
        assert_eq!(g["seeds"], serde_json::json!([4, 5]));
        for (r, round) in g["rounds"].as_array().unwrap().iter().enumerate() {
            assert_eq!(round["round"], r);
            assert!(round["macro_f1_test"]["mean"].is_f64() && round["macro_f1_test"]["std"].is_f64());
        }
    }
    assert!(summary["failures"].as_array().unwrap().is_empty());

    for mode in [PipelineMode::CtVogAl, PipelineMode::AlOnly] {
        for seed in [4, 5] {
            let id = run_id(&reparsed, mode, SamplerKind::Entropy, seed);
            for file in ["rounds.csv", "training.csv", "table1.csv", "config.resolved"] {
                assert!(first.join("runs").join(&id).join(file).exists(), "{mode} {seed} {file}");
            }
        }
    }
}

/// Test macro-F1 of every (mode, sampler, round) recomputed from the raw
/// rounds file with a two-pass mean and `n - 1` deviation.
fn reaggregate(rounds_csv: &str) -> BTreeMap<(String, String, usize), (f64, f64)> {
    let mut cells: BTreeMap<(String, String, usize), Vec<f64>> = BTreeMap::new();
    for line in rounds_csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        cells
            .entry((f[6].to_string(), f[5].to_string(), f[0].parse().unwrap()))
            .or_default()
            .push(f[3].parse().unwrap());
    }
    cells
        .into_iter()
        .map(|(k, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            (k, (mean, var.sqrt()))
        })
        .collect()
}

#[test]
fn curves_match_an_independent_aggregation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "active.mode = ctvog_al,ce_al\nactive.sampler = random,coreset\nrun.seeds = 1,2,3\n");
    let (code, dir) = run(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(code, 0);
    assert_eq!(relabel(&["emit-curves", dir.to_str().unwrap()]).status.code(), Some(0));
    let expected = reaggregate(&fs::read_to_string(dir.join("rounds.csv")).unwrap());
    let curves = fs::read_to_string(dir.join("curves.csv")).unwrap();
    let mut lines = curves.lines();
    assert_eq!(lines.next(), Some("mode,sampler,round,f1_mean,f1_std"));
    let mut seen = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let (mean, std) = expected[&(f[0].to_string(), f[1].to_string(), f[2].parse().unwrap())];
        assert!((f[3].parse::<f64>().unwrap() - mean).abs() < 1e-12);
        assert!((f[4].parse::<f64>().unwrap() - std).abs() < 1e-12);
        seen += 1;
    }
    assert_eq!(seen, expected.len());
    assert_eq!(seen, 2 * 2 * 3);
}

#[test]
fn single_seed_curves_have_zero_spread() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "");
    let (_, dir) = run(&cfg, &tmp.path().join("out"), &["--seed", "9", "--mode", "alc_ct", "--sampler", "random"]);
    let out = tmp.path().join("curves.csv");
    let o = relabel(&["emit-curves", dir.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(out).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    for (r, row) in rows.iter().enumerate() {
        assert_eq!(&row[..3], &["alc_ct", "random", &r.to_string()]);
        assert_eq!(row[4], "0.0");
    }
}

#[test]
fn compare_reports_paired_deltas() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "run.seeds = 1,2\n");
    let out = tmp.path().join("out");
    let (_, a) = run(&cfg, &out, &["--mode", "ce_al"]);
    let (_, b) = run(&cfg, &out, &["--mode", "ctvog_al"]);
    let o = relabel(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let f1 = |dir: &Path| -> BTreeMap<(usize, u64), f64> {
        fs::read_to_string(dir.join("rounds.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                ((f[0].parse().unwrap(), f[7].parse().unwrap()), f[3].parse().unwrap())
            })
            .collect()
    };
    let (fa, fb) = (f1(&a), f1(&b));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("round,pairs,f1_a,f1_b,delta_mean,delta_std"));
    for (r, line) in lines.enumerate() {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let d: Vec<f64> = [1, 2].iter().map(|&s| fb[&(r, s)] - fa[&(r, s)]).collect();
        assert_eq!(f[0] as usize, r);
        assert_eq!(f[1], 2.0);
        assert!((f[4] - (d[0] + d[1]) / 2.0).abs() < 1e-12);
        assert!((f[5] - (d[0] - d[1]).abs() / 2f64.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn completed_runs_are_reused_and_failures_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = config(tmp.path(), "run.seeds = 1,2\n");
    let cfg = ExperimentConfig::from_path(&cfg_path).unwrap();
    let out = tmp.path().join("out");
    let (_, dir) = run(&cfg_path, &out, &[]);
    let runs = dir.join("runs");
    let broken = runs.join(run_id(&cfg, PipelineMode::CtVogAl, SamplerKind::Entropy, 2)).join("rounds.csv");
    fs::write(&broken, "not,a,rounds,file\n").unwrap();
    let kept = runs.join(run_id(&cfg, PipelineMode::CtVogAl, SamplerKind::Entropy, 1)).join("rounds.csv");
    let before = fs::read(&kept).unwrap();

    let (code, again) = run(&cfg_path, &out, &[]);
    assert_eq!(code, 3);
    assert_eq!(again, dir);
    assert_eq!(fs::read(&kept).unwrap(), before);
    assert!(broken.with_file_name("error.json").exists());
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("summary.json")).unwrap()).unwrap();
    let failures = summary["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0]["seed"], 2);
    assert_eq!(failures[0]["exit_code"], 3);
    assert_eq!(summary["groups"][0]["seeds"], serde_json::json!([1]));
}

#[test]
fn staged_commands_reproduce_the_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "run.seeds = 6\n");
    let c = cfg.to_str().unwrap();
    let lnl = tmp.path().join("lnl");
    let cleaned = tmp.path().join("clean");
    assert_eq!(relabel(&["train-lnl", "--config", c, "--out", lnl.to_str().unwrap()]).status.code(), Some(0));
    for file in ["training.csv", "vog.csv", "partition.csv", "table1.csv", "model_a.nocm"] {
        assert!(lnl.join(file).exists(), "{file}");
    }
    let o = relabel(&["clean", "--config", c, "--lnl-dir", lnl.to_str().unwrap(), "--out", cleaned.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (_, dir) = run(&cfg, &tmp.path().join("out"), &[]);
    assert_eq!(
        fs::read(cleaned.join("rounds.csv")).unwrap(),
        fs::read(dir.join("rounds.csv")).unwrap()
    );
    let vog = fs::read_to_string(lnl.join("vog.csv")).unwrap();
    let first_epoch: usize = vog.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(first_epoch, 5);
}

#[test]
fn generated_files_feed_a_file_experiment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "");
    let pool = tmp.path().join("pool.nocl");
    let o = relabel(&["gen-data", "--config", cfg.to_str().unwrap(), "--out", pool.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let noisy = tmp.path().join("noisy.csv");
    let o = relabel(&["inject-noise", "--input", pool.to_str().unwrap(), "--rate", "0.3", "--out", noisy.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let data = relabel::formats::load_dataset(&noisy, None).unwrap();
    assert_eq!(data.class_counts(), vec![100, 50, 25]);
    assert!(data.noise_count() > 0);

    let file_cfg = tmp.path().join("file.cfg");
    let text = TINY.replace("data.source = blobs", &format!("data.source = {}", noisy.display()));
    fs::write(&file_cfg, format!("{text}run.seeds = 1\n")).unwrap();
    let (code, dir) = run(&file_cfg, &tmp.path().join("out"), &[]);
    assert_eq!(code, 0);
    assert_eq!(fs::read_to_string(dir.join("rounds.csv")).unwrap().lines().count(), 4);
}
