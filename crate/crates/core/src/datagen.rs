//! Synthetic classification data: Gaussian blobs, long-tailed class profiles,
//! symmetric label noise and seeded splits.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::rng_from_seed;

/// Feature matrix with true labels, observed (possibly corrupted) labels and
/// the matching noise flags.
///
/// `noise_flags[i]` is kept equal to `observed_labels[i] != true_labels[i]`
/// by every constructor and mutator.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    true_labels: Vec<usize>,
    observed_labels: Vec<usize>,
    noise_flags: Vec<bool>,
    class_count: usize,
}

impl LabeledDataset {
    /// Clean dataset: observed labels equal the true labels.
    pub fn clean(features: Matrix, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let observed = labels.clone();
        Self::new(features, labels, observed, class_count)
    }

    pub fn new(
        features: Matrix,
        true_labels: Vec<usize>,
        observed_labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::invalid("class_count", "at least two classes are required"));
        }
        let n = features.rows();
        for (what, len) in [("true_labels", true_labels.len()), ("observed_labels", observed_labels.len())] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found: len,
                });
            }
        }
        for &label in true_labels.iter().chain(&observed_labels) {
            if label >= class_count {
                return Err(Error::LabelOutOfRange { label, class_count });
            }
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("features"));
        }
        let noise_flags = true_labels
            .iter()
            .zip(&observed_labels)
            .map(|(t, o)| t != o)
            .collect();
        Ok(LabeledDataset {
            features,
            true_labels,
            observed_labels,
            noise_flags,
            class_count,
        })
    }

    /// Builds a dataset from stored parts, checking the stored flags against
    /// the labels.
    pub fn from_parts(
        features: Matrix,
        true_labels: Vec<usize>,
        observed_labels: Vec<usize>,
        noise_flags: Vec<bool>,
        class_count: usize,
    ) -> Result<Self> {
        let dataset = Self::new(features, true_labels, observed_labels, class_count)?;
        if noise_flags.len() != dataset.len() {
            return Err(Error::DimensionMismatch {
                what: "noise_flags",
                expected: dataset.len(),
                found: noise_flags.len(),
            });
        }
        if noise_flags != dataset.noise_flags {
            return Err(Error::invalid(
                "noise_flags",
                "flags disagree with observed vs true labels",
            ));
        }
        Ok(dataset)
    }

    pub fn len(&self) -> usize {
        self.true_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn true_labels(&self) -> &[usize] {
        &self.true_labels
    }

    pub fn observed_labels(&self) -> &[usize] {
        &self.observed_labels
    }

    pub fn noise_flags(&self) -> &[bool] {
        &self.noise_flags
    }

    pub fn noise_count(&self) -> usize {
        self.noise_flags.iter().filter(|&&f| f).count()
    }

    /// Per-class counts of the true labels.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &y in &self.true_labels {
            counts[y] += 1;
        }
        counts
    }

    /// Restores the true label of sample `i`. Returns whether it was noisy.
    pub fn restore_label(&mut self, i: usize) -> bool {
        let was_noisy = self.noise_flags[i];
        self.observed_labels[i] = self.true_labels[i];
        self.noise_flags[i] = false;
        was_noisy
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_rows(indices),
            true_labels: indices.iter().map(|&i| self.true_labels[i]).collect(),
            observed_labels: indices.iter().map(|&i| self.observed_labels[i]).collect(),
            noise_flags: indices.iter().map(|&i| self.noise_flags[i]).collect(),
            class_count: self.class_count,
        }
    }
}

/// Long-tail profile: `head_count` samples in class 0 decaying to
/// `head_count / imbalance_factor` in the last class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImbalanceSpec {
    pub head_count: usize,
    pub imbalance_factor: f64,
    pub class_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub rate: f64,
    pub seed: u64,
}

/// Class means used by [`generate_gaussian_mixture`].
///
/// With `class_count <= feature_dim` the means sit on scaled coordinate axes;
/// otherwise on a circle in the first two coordinates. Either way the closest
/// pair of means is exactly `separation` apart.
pub fn class_means(class_count: usize, feature_dim: usize, separation: f64) -> Vec<Vec<f64>> {
    (0..class_count)
        .map(|c| {
            let mut mean = vec![0.0; feature_dim];
            if class_count <= feature_dim {
                mean[c] = separation / core::f64::consts::SQRT_2;
            } else {
                let step = core::f64::consts::TAU / class_count as f64;
                let radius = separation / (2.0 * libm::sin(core::f64::consts::PI / class_count as f64));
                mean[0] = radius * libm::cos(step * c as f64);
                mean[1] = radius * libm::sin(step * c as f64);
            }
            mean
        })
        .collect()
}

/// Draws `per_class_counts[c]` unit-variance isotropic Gaussian samples around
/// each class mean. Samples are grouped by class; values are rounded to `f32`
/// precision so they survive the on-disk formats unchanged.
pub fn generate_gaussian_mixture(
    class_count: usize,
    per_class_counts: &[usize],
    feature_dim: usize,
    class_separation: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if class_count < 2 {
        return Err(Error::invalid("class_count", "at least two classes are required"));
    }
    if per_class_counts.len() != class_count {
        return Err(Error::DimensionMismatch {
            what: "per_class_counts",
            expected: class_count,
            found: per_class_counts.len(),
        });
    }
    if feature_dim < 2 {
        return Err(Error::invalid("feature_dim", "must be at least 2"));
    }
    if !(class_separation > 0.0 && class_separation.is_finite()) {
        return Err(Error::invalid("class_separation", "must be positive and finite"));
    }

    let means = class_means(class_count, feature_dim, class_separation);
    let total: usize = per_class_counts.iter().sum();
    let mut rng = rng_from_seed(seed);
    let mut data = Vec::with_capacity(total * feature_dim);
    let mut labels = Vec::with_capacity(total);
    for (class, (&count, mean)) in per_class_counts.iter().zip(&means).enumerate() {
        for _ in 0..count {
            for &m in mean {
                let z: f64 = rng.sample(StandardNormal);
                data.push((m + z) as f32 as f64);
            }
            labels.push(class);
        }
    }
    let features = Matrix::from_vec(total, feature_dim, data)?;
    LabeledDataset::clean(features, labels, class_count)
}

/// Exponential long-tail counts `round(N0 * r^(-c/(k-1)))`, rounding half up.
pub fn pareto_class_counts(spec: &ImbalanceSpec) -> Result<Vec<usize>> {
    if spec.head_count < 1 {
        return Err(Error::invalid("head_count", "must be at least 1"));
    }
    if !(spec.imbalance_factor > 1.0 && spec.imbalance_factor.is_finite()) {
        return Err(Error::invalid("imbalance_factor", "must be greater than 1"));
    }
    if spec.class_count < 2 {
        return Err(Error::invalid("class_count", "at least two classes are required"));
    }
    let head = spec.head_count as f64;
    let last = (spec.class_count - 1) as f64;
    let counts: Vec<usize> = (0..spec.class_count)
        .map(|c| {
            let exact = head * libm::pow(spec.imbalance_factor, -(c as f64) / last);
            libm::floor(exact + 0.5) as usize
        })
        .collect();
    if counts.iter().any(|&n| n == 0) {
        return Err(Error::invalid(
            "head_count",
            "head count too small for the imbalance factor: tail class rounds to zero",
        ));
    }
    Ok(counts)
}

/// Uniformly subsamples `counts[c]` samples of each (true) class without
/// replacement, then shuffles the result.
pub fn subsample_long_tail(dataset: &LabeledDataset, counts: &[usize], seed: u64) -> Result<LabeledDataset> {
    let classes = dataset.class_count();
    if counts.len() != classes {
        return Err(Error::DimensionMismatch {
            what: "counts",
            expected: classes,
            found: counts.len(),
        });
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &y) in dataset.true_labels().iter().enumerate() {
        by_class[y].push(i);
    }
    for (class, (members, &want)) in by_class.iter().zip(counts).enumerate() {
        if members.len() < want {
            return Err(Error::InsufficientClass {
                class,
                requested: want,
                available: members.len(),
            });
        }
    }

    let mut rng = rng_from_seed(seed);
    let mut chosen = Vec::with_capacity(counts.iter().sum());
    for (members, &want) in by_class.iter_mut().zip(counts) {
        let (picked, _) = members.partial_shuffle(&mut rng, want);
        chosen.extend_from_slice(picked);
    }
    chosen.shuffle(&mut rng);
    Ok(dataset.select(&chosen))
}

/// Flips each label with probability `rate` to a class drawn uniformly from
/// the other `C - 1` classes. Starts from the true labels.
pub fn inject_symmetric_noise(dataset: &LabeledDataset, spec: &NoiseSpec) -> Result<LabeledDataset> {
    if !(0.0..=1.0).contains(&spec.rate) {
        return Err(Error::invalid("rate", "noise rate must lie in [0, 1]"));
    }
    let classes = dataset.class_count();
    let mut rng = rng_from_seed(spec.seed);
    let observed = dataset
        .true_labels()
        .iter()
        .map(|&y| {
            if rng.random::<f64>() < spec.rate {
                let alt = rng.random_range(0..classes - 1);
                if alt >= y {
                    alt + 1
                } else {
                    alt
                }
            } else {
                y
            }
        })
        .collect();
    LabeledDataset::new(
        dataset.features().clone(),
        dataset.true_labels().to_vec(),
        observed,
        classes,
    )
}

/// Part sizes for `split`: `floor(ratio * n)` each, remainder to the first.
pub fn split_sizes(n: usize, ratios: &[f64]) -> Result<Vec<usize>> {
    if ratios.is_empty() {
        return Err(Error::invalid("ratios", "at least one part is required"));
    }
    if ratios.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::invalid("ratios", "every ratio must be positive"));
    }
    let sum: f64 = ratios.iter().sum();
    if libm::fabs(sum - 1.0) > 1e-9 {
        return Err(Error::invalid("ratios", "ratios must sum to 1"));
    }
    let mut sizes: Vec<usize> = ratios
        .iter()
        .map(|&r| libm::floor(r * n as f64) as usize)
        .collect();
    let assigned: usize = sizes.iter().sum();
    sizes[0] += n - assigned;
    Ok(sizes)
}

/// Shuffles and cuts the dataset into consecutive parts sized by
/// [`split_sizes`].
pub fn split(dataset: &LabeledDataset, ratios: &[f64], seed: u64) -> Result<Vec<LabeledDataset>> {
    if dataset.is_empty() {
        return Err(Error::invalid("dataset", "cannot split an empty dataset"));
    }
    let sizes = split_sizes(dataset.len(), ratios)?;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut parts = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for size in sizes {
        parts.push(dataset.select(&order[start..start + size]));
        start += size;
    }
    Ok(parts)
}
