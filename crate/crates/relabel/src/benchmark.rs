//! Per-seed train, validation and test sets.

use relabel_core::datagen::{
    generate_gaussian_mixture, inject_symmetric_noise, split, subsample_long_tail, LabeledDataset, NoiseSpec,
};
use relabel_core::rng::derive_seed;

use crate::config::{DataSource, ExperimentConfig};
use crate::error::Result;
use crate::formats::load_dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    /// Noisy training set.
    pub train: LabeledDataset,
    pub val: LabeledDataset,
    pub test: LabeledDataset,
}

/// Long-tailed blob pool before splitting: a balanced mixture with
/// `head_count` samples per class, cut down to the Pareto profile.
pub fn blob_pool(cfg: &ExperimentConfig, seed: u64) -> Result<LabeledDataset> {
    let d = &cfg.data;
    let counts = cfg.class_counts()?;
    let balanced = generate_gaussian_mixture(
        d.classes,
        &vec![d.head_count; d.classes],
        d.feature_dim,
        d.separation,
        derive_seed(seed, 1),
    )?;
    Ok(subsample_long_tail(&balanced, &counts, derive_seed(seed, 5))?)
}

/// Builds the sets for `seed`. Noise is injected into the training part only.
pub fn build(cfg: &ExperimentConfig, seed: u64) -> Result<Benchmark> {
    let d = &cfg.data;
    let (train, val, test) = match &d.source {
        DataSource::Blobs => {
            let pool = blob_pool(cfg, seed)?;
            let mut parts = split(&pool, &d.split, derive_seed(seed, 2))?.into_iter();
            let (train, val) = (parts.next().expect("two parts"), parts.next().expect("two parts"));
            let test = generate_gaussian_mixture(
                d.classes,
                &vec![d.test_per_class; d.classes],
                d.feature_dim,
                d.separation,
                derive_seed(seed, 3),
            )?;
            (train, val, test)
        }
        DataSource::File(path) => {
            let stored = load_dataset(path, None)?;
            let clean = LabeledDataset::clean(stored.features().clone(), stored.true_labels().to_vec(), stored.class_count())?;
            let mut parts = split(&clean, &d.split, derive_seed(seed, 2))?.into_iter();
            let train = parts.next().expect("three parts");
            let val = parts.next().expect("three parts");
            let test = parts.next().expect("three parts");
            (train, val, test)
        }
    };
    cfg.check_budget(train.len())?;
    let train = inject_symmetric_noise(
        &train,
        &NoiseSpec {
            rate: cfg.noise_rate,
            seed: derive_seed(seed, 4),
        },
    )?;
    Ok(Benchmark { train, val, test })
}
