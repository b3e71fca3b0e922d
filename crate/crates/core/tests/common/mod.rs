//! Straight-line reference implementations used as test oracles. Nothing
//! here calls into the library's numerical code.

#![allow(dead_code)]

use relabel_core::model::{GradientSignal, Model, Parameters};
use relabel_core::Matrix;

/// Pre-activations, hidden features and softmax probabilities of one row.
pub struct RowPass {
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub probs: Vec<f64>,
}

pub fn reference_row(params: &Parameters, f: usize, h: usize, c: usize, x: &[f64]) -> RowPass {
    let mut pre = vec![0.0; h];
    for j in 0..h {
        let mut s = params.b1[j];
        for i in 0..f {
            s += params.w1[j * f + i] * x[i];
        }
        pre[j] = s;
    }
    let hidden: Vec<f64> = pre.iter().map(|&z| if z > 0.0 { z } else { 0.0 }).collect();
    let probs = reference_head(params, h, c, &hidden);
    RowPass { pre, hidden, probs }
}

pub fn reference_head(params: &Parameters, h: usize, c: usize, hidden: &[f64]) -> Vec<f64> {
    let mut logits = vec![0.0; c];
    for k in 0..c {
        let mut s = params.b2[k];
        for j in 0..h {
            s += params.w2[k * h + j] * hidden[j];
        }
        logits[k] = s;
    }
    let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - top).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

pub fn reference_mean_loss(model: &Model, params: &Parameters, x: &Matrix, labels: &[usize], selected: &[usize]) -> f64 {
    let (f, h, c) = (model.input_dim(), model.hidden_dim(), model.class_count());
    let mut total = 0.0;
    for &i in selected {
        let pass = reference_row(params, f, h, c, x.row(i));
        total -= pass.probs[labels[i]].ln();
    }
    total / selected.len() as f64
}

/// Central differences of the mean selected loss for every parameter.
pub fn finite_difference_gradients(
    model: &Model,
    x: &Matrix,
    labels: &[usize],
    selected: &[usize],
    step: f64,
) -> Parameters {
    let mut grads = Parameters::zeros(model.input_dim(), model.hidden_dim(), model.class_count());
    let mut probe = model.params.clone();
    for tensor in 0..4 {
        let len = probe.slices()[tensor].len();
        for k in 0..len {
            let original = probe.slices()[tensor][k];
            probe.slices_mut()[tensor][k] = original + step;
            let up = reference_mean_loss(model, &probe, x, labels, selected);
            probe.slices_mut()[tensor][k] = original - step;
            let down = reference_mean_loss(model, &probe, x, labels, selected);
            probe.slices_mut()[tensor][k] = original;
            grads.slices_mut()[tensor][k] = (up - down) / (2.0 * step);
        }
    }
    grads
}

/// Central differences of `p_y` (or `log p_y`) in the hidden features.
pub fn finite_difference_feature_gradient(
    model: &Model,
    x: &[f64],
    y: usize,
    signal: GradientSignal,
    step: f64,
) -> Vec<f64> {
    let (f, h, c) = (model.input_dim(), model.hidden_dim(), model.class_count());
    let pass = reference_row(&model.params, f, h, c, x);
    let value = |hidden: &[f64]| {
        let p = reference_head(&model.params, h, c, hidden)[y];
        match signal {
            GradientSignal::Probability => p,
            GradientSignal::LogProbability => p.ln(),
        }
    };
    let mut hidden = pass.hidden.clone();
    (0..h)
        .map(|j| {
            let original = hidden[j];
            hidden[j] = original + step;
            let up = value(&hidden);
            hidden[j] = original - step;
            let down = value(&hidden);
            hidden[j] = original;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `|a - b| <= tol * max(|a|, |b|, floor)`.
pub fn rel_close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(floor)
}

/// Score of one window by explicit double loop.
pub fn brute_force_vog(snapshots: &[Vec<f64>], divisor: usize) -> f64 {
    let n = snapshots.len();
    let dim = snapshots[0].len();
    let mut total = 0.0;
    for d in 0..dim {
        let mut mean = 0.0;
        for s in snapshots {
            mean += s[d];
        }
        mean /= n as f64;
        let mut sq = 0.0;
        for s in snapshots {
            sq += (s[d] - mean) * (s[d] - mean);
        }
        total += (sq / divisor as f64).sqrt();
    }
    total / dim as f64
}

/// Optimal k-center radius by enumerating every subset of size `k`.
pub fn exhaustive_kcenter_radius(points: &[Vec<f64>], labeled: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let mut best = f64::INFINITY;
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let mut radius: f64 = 0.0;
        for p in points {
            let nearest = labeled
                .iter()
                .chain(subset.iter().map(|&i| &points[i]))
                .map(|c| euclidean(p, c))
                .fold(f64::INFINITY, f64::min);
            radius = radius.max(nearest);
        }
        best = best.min(radius);
        // next combination in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if subset[i] < n - k + i {
                break;
            }
            if i == 0 {
                return best;
            }
        }
        subset[i] += 1;
        for j in i + 1..k {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Macro-F1 over classes present in truth or predictions.
pub fn reference_macro_f1(predictions: &[usize], labels: &[usize], classes: usize) -> f64 {
    let mut sum = 0.0;
    let mut counted = 0;
    for c in 0..classes {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut fneg = 0.0;
        for (&p, &y) in predictions.iter().zip(labels) {
            match (p == c, y == c) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fneg += 1.0,
                _ => {}
            }
        }
        if tp + fp + fneg == 0.0 {
            continue;
        }
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
        sum += if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        counted += 1;
    }
    if counted == 0 {
        0.0
    } else {
        sum / counted as f64
    }
}

/// Pearson statistic against equal expected counts.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum()
}

/// Upper `alpha` quantile of the chi-square distribution.
pub fn chi_square_critical(df: usize, alpha: f64) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    ChiSquared::new(df as f64).unwrap().inverse_cdf(1.0 - alpha)
}

/// Selection rule restated from scratch: quotas, then sorted picks.
pub struct ExpectedSelection {
    pub by_loss: Vec<usize>,
    pub by_vog: Vec<usize>,
    pub remainder: Vec<usize>,
}

pub fn reference_selection(losses: &[f64], vogs: Option<&[f64]>, keep: f64, mix: f64) -> ExpectedSelection {
    let n = losses.len();
    let mut quota = ((keep * n as f64) + 1e-9).floor() as usize;
    quota = quota.clamp(1, n);
    let sort_by = |values: &[f64], pool: &[usize]| {
        let mut v = pool.to_vec();
        v.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
        v
    };
    let all: Vec<usize> = (0..n).collect();
    let by_loss_order = sort_by(losses, &all);
    match vogs {
        None => ExpectedSelection {
            by_loss: by_loss_order[..quota].to_vec(),
            by_vog: vec![],
            remainder: vec![],
        },
        Some(vogs) => {
            let r1 = (((1.0 - mix) * quota as f64) + 1e-9).floor() as usize;
            let r2 = ((mix * quota as f64) + 1e-9).floor() as usize;
            let by_loss = by_loss_order[..r1].to_vec();
            let rest: Vec<usize> = all.iter().copied().filter(|i| !by_loss.contains(i)).collect();
            let by_vog: Vec<usize> = sort_by(vogs, &rest).into_iter().take(r2).collect();
            let remainder: Vec<usize> = by_loss_order
                .iter()
                .copied()
                .filter(|i| !by_loss.contains(i) && !by_vog.contains(i))
                .take(quota - r1 - r2)
                .collect();
            ExpectedSelection {
                by_loss,
                by_vog,
                remainder,
            }
        }
    }
}
