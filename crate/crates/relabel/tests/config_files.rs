use std::path::PathBuf;

use proptest::prelude::*;
use relabel::config::DataSource;
use relabel::experiment::{experiment_id, run_id};
use relabel::{ExperimentConfig, HarnessError};
use relabel_core::active::{InitStrategy, PipelineMode, SamplerKind};
use relabel_core::lnl::{PartitionRule, VogNormalization};
use relabel_core::model::GradientSignal;

const MINIMAL: &str = "data.source = blobs\nnoise.rate = 0.5\n";

fn key_of(text: &str) -> String {
    match text.parse::<ExperimentConfig>() {
        Err(HarnessError::Config { key, .. }) => key,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn minimal_config_takes_the_documented_defaults() {
    let cfg: ExperimentConfig = MINIMAL.parse().unwrap();
    assert_eq!(cfg.data.source, DataSource::Blobs);
    assert_eq!(cfg.optim.lr0, 0.01);
    assert_eq!(cfg.optim.momentum, 0.9);
    assert_eq!(cfg.optim.weight_decay, 1e-4);
    assert_eq!(cfg.lnl.warmup_epochs, 10);
    assert_eq!(cfg.lnl.vog_window, 5);
    assert_eq!(cfg.lnl.epochs, 60);
    assert_eq!(cfg.lnl.batch_size, 64);
    assert_eq!(cfg.lnl.forget_rate, 0.5);
    assert_eq!(cfg.lnl.mix_ratio, 0.2);
    assert_eq!(cfg.active.rounds, 8);
    assert_eq!(cfg.seeds, vec![1, 2, 3]);
    let text = cfg.to_text();
    assert!(text.contains("optim.lr = 0.01\n"));
    assert!(text.contains("lnl.warmup_epochs = 10\n"));
}

#[test]
fn out_of_range_mix_ratio_names_its_key() {
    let err = format!("{MINIMAL}lnl.mix_ratio = 1.3\n").parse::<ExperimentConfig>().unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("lnl.mix_ratio"), "{err}");
}

#[test]
fn errors_carry_the_key_path() {
    assert_eq!(key_of("noise.rate = 0.5\n"), "data.source");
    assert_eq!(key_of("data.source = blobs\n"), "noise.rate");
    assert_eq!(key_of(&format!("{MINIMAL}lnl.mixratio = 0.3\n")), "lnl.mixratio");
    assert_eq!(key_of(&format!("{MINIMAL}noise.rate = 0.2\n")), "noise.rate");
    assert_eq!(key_of(&format!("{MINIMAL}active.per_round = 100000\n")), "active.per_round");
    assert_eq!(key_of(&format!("{MINIMAL}active.mode = ctvog\n")), "active.mode");
    assert_eq!(key_of(&format!("{MINIMAL}lnl.vog_window = many\n")), "lnl.vog_window");
    assert_eq!(key_of(&format!("{MINIMAL}data.split = 0.5,0.4\n")), "data.split");
    assert_eq!(key_of(&format!("{MINIMAL}run.seeds = 1,1\n")), "run.seeds");
    assert_eq!(key_of(&format!("{MINIMAL}optim.momentum = 1\n")), "optim.momentum");
    assert_eq!(key_of(&format!("{MINIMAL}data.head_count = 10\n")), "data.imbalance");
    assert_eq!(key_of(&format!("{MINIMAL}just some words\n")), "line 3");
}

#[test]
fn comments_and_blank_lines_are_ignored() {
    let text = "# experiment\n\n  data.source = blobs  \n# p\nnoise.rate=0.4\n";
    let cfg: ExperimentConfig = text.parse().unwrap();
    assert_eq!(cfg.noise_rate, 0.4);
}

#[test]
fn file_sources_split_three_ways() {
    let cfg: ExperimentConfig = "data.source = data/noisy.csv\nnoise.rate = 0.4\n".parse().unwrap();
    assert_eq!(cfg.data.source, DataSource::File(PathBuf::from("data/noisy.csv")));
    assert_eq!(cfg.data.split, vec![0.7, 0.1, 0.2]);
}

#[test]
fn ids_ignore_the_output_location() {
    let a: ExperimentConfig = MINIMAL.parse().unwrap();
    let mut b = a.clone();
    b.out = PathBuf::from("elsewhere");
    assert_eq!(experiment_id(&a), experiment_id(&b));
    let mut c = a.clone();
    c.lnl.mix_ratio = 0.3;
    assert_ne!(experiment_id(&a), experiment_id(&c));
    let r = |cfg: &ExperimentConfig, seed| run_id(cfg, PipelineMode::CtVogAl, SamplerKind::Entropy, seed);
    assert_ne!(r(&a, 1), r(&a, 2));
    assert_eq!(r(&a, 1), r(&b, 1));
}

fn config() -> impl Strategy<Value = ExperimentConfig> {
    let base: ExperimentConfig = MINIMAL.parse().unwrap();
    (
        (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0, 1usize..30, 1usize..100),
        (prop::sample::subsequence(PipelineMode::ALL.to_vec(), 1..=4), prop::sample::subsequence(SamplerKind::ALL.to_vec(), 1..=3)),
        (any::<bool>(), any::<bool>(), any::<bool>(), 0usize..3, any::<bool>()),
        (prop::collection::btree_set(any::<u64>(), 1..5), 1e-4f64..1.0, 2usize..6, 0.5f64..9.0),
    )
        .prop_map(move |(nums, (modes, samplers), flags, rest)| {
            let mut cfg = base.clone();
            cfg.noise_rate = nums.0;
            cfg.lnl.forget_rate = nums.1;
            cfg.lnl.mix_ratio = nums.2;
            cfg.lnl.warmup_epochs = nums.3;
            cfg.lnl.vog_window = nums.4 + 1;
            cfg.active.modes = modes;
            cfg.active.samplers = samplers;
            cfg.lnl.vog_window_exclusive = flags.0;
            cfg.lnl.vog_signal = if flags.1 { GradientSignal::Probability } else { GradientSignal::LogProbability };
            cfg.lnl.vog_normalization = if flags.2 { VogNormalization::None } else { VogNormalization::PerClass };
            cfg.lnl.partition = [PartitionRule::ModelA, PartitionRule::Intersection, PartitionRule::Union][flags.3];
            cfg.active.init = if flags.4 { InitStrategy::Continue } else { InitStrategy::Retrain };
            cfg.seeds = rest.0.into_iter().collect();
            cfg.optim.lr0 = rest.1;
            cfg.data.classes = rest.2;
            cfg.data.separation = rest.3;
            cfg.data.split = vec![rest.3 / 10.0, 1.0 - rest.3 / 10.0];
            cfg
        })
}

proptest! {
    #[test]
    fn resolved_text_round_trips(cfg in config()) {
        prop_assume!(cfg.validate().is_ok());
        let text = cfg.to_text();
        let back: ExperimentConfig = text.parse().unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_text(), text);
    }
}
