//! Macro-F1 and per-class diagnostics of a clean-set selection.

use alloc::vec;
use alloc::vec::Vec;

use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};

/// Counts indexed by (true class, predicted class).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(predictions: &[usize], labels: &[usize], classes: usize) -> Result<Self> {
        if predictions.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                what: "predictions",
                expected: labels.len(),
                found: predictions.len(),
            });
        }
        let mut counts = vec![0u64; classes * classes];
        for (&p, &t) in predictions.iter().zip(labels) {
            for label in [p, t] {
                if label >= classes {
                    return Err(Error::LabelOutOfRange { label, class_count: classes });
                }
            }
            counts[t * classes + p] += 1;
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    /// Matrix from explicit row-major counts.
    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(Error::DimensionMismatch {
                what: "confusion counts",
                expected: classes * classes,
                found: counts.len(),
            });
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        (0..self.classes).map(|p| self.get(truth, p)).sum()
    }

    pub fn column_total(&self, predicted: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, predicted)).sum()
    }

    /// F1 per class; `None` for classes absent from both truth and
    /// predictions.
    pub fn per_class_f1(&self) -> Vec<Option<f64>> {
        (0..self.classes)
            .map(|c| {
                let (actual, predicted) = (self.row_total(c), self.column_total(c));
                if actual == 0 && predicted == 0 {
                    return None;
                }
                let tp = self.get(c, c) as f64;
                let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
                let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
                if precision + recall == 0.0 {
                    log::debug!("class {c}: zero precision and recall, F1 set to 0");
                    Some(0.0)
                } else {
                    Some(2.0 * precision * recall / (precision + recall))
                }
            })
            .collect()
    }

    /// Unweighted mean of the defined per-class F1 scores.
    pub fn macro_f1(&self) -> f64 {
        let scores: Vec<f64> = self.per_class_f1().into_iter().flatten().collect();
        if scores.is_empty() {
            return 0.0;
        }
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

pub fn macro_f1(predictions: &[usize], labels: &[usize], classes: usize) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::invalid("labels", "macro-F1 of an empty set is undefined"));
    }
    Ok(ConfusionMatrix::new(predictions, labels, classes)?.macro_f1())
}

fn membership(clean: &[usize], n: usize) -> Vec<bool> {
    let mut mask = vec![false; n];
    for &i in clean {
        if i < n {
            mask[i] = true;
        }
    }
    mask
}

/// Share of the truly clean samples of class `class` that made it into the
/// clean set.
pub fn clean_selection_recall(clean: &[usize], dataset: &LabeledDataset, class: usize) -> Option<f64> {
    let mask = membership(clean, dataset.len());
    let (mut hit, mut total) = (0usize, 0usize);
    for i in 0..dataset.len() {
        if dataset.true_labels()[i] == class && !dataset.noise_flags()[i] {
            total += 1;
            hit += usize::from(mask[i]);
        }
    }
    (total > 0).then(|| hit as f64 / total as f64)
}

/// Percentage of clean-set members carrying observed label `class` whose
/// label is actually correct.
pub fn guess_percent(clean: &[usize], dataset: &LabeledDataset, class: usize) -> Option<f64> {
    let mask = membership(clean, dataset.len());
    let (mut correct, mut total) = (0usize, 0usize);
    for i in (0..dataset.len()).filter(|&i| mask[i]) {
        if dataset.observed_labels()[i] == class {
            total += 1;
            correct += usize::from(!dataset.noise_flags()[i]);
        }
    }
    (total > 0).then(|| 100.0 * correct as f64 / total as f64)
}

/// One row of the per-class selection report.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSelection {
    pub class: usize,
    pub recall: Option<f64>,
    pub guess_pct: Option<f64>,
    /// Truly clean samples of the class in the dataset.
    pub n_clean_true: usize,
    /// Clean-set members with this observed label.
    pub n_selected: usize,
}

pub fn selection_report(clean: &[usize], dataset: &LabeledDataset) -> Vec<ClassSelection> {
    let mask = membership(clean, dataset.len());
    (0..dataset.class_count())
        .map(|class| {
            let n_clean_true = (0..dataset.len())
                .filter(|&i| dataset.true_labels()[i] == class && !dataset.noise_flags()[i])
                .count();
            let n_selected = (0..dataset.len())
                .filter(|&i| mask[i] && dataset.observed_labels()[i] == class)
                .count();
            ClassSelection {
                class,
                recall: clean_selection_recall(clean, dataset, class),
                guess_pct: guess_percent(clean, dataset, class),
                n_clean_true,
                n_selected,
            }
        })
        .collect()
}
