//! Per-sample gradient windows and the variance-of-gradients score.
//!
//! For a window of `t` previous epochs the score of sample `i` at epoch `j`
//! averages, over the `D` feature coordinates, the standard deviation of the
//! snapshots `S_{j-t} .. S_j` around their element-wise mean, with divisor
//! `t`. In the default (inclusive) convention the window holds `t + 1`
//! snapshots; the exclusive convention holds `t`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct SampleWindow {
    /// Ring buffer of `capacity * dim` values.
    data: Vec<f64>,
    start: usize,
    len: usize,
    last_epoch: Option<usize>,
    latest_vog: Option<f64>,
}

/// Sliding windows of feature-gradient snapshots for a fixed set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTrace {
    dim: usize,
    window: usize,
    capacity: usize,
    samples: Vec<SampleWindow>,
}

impl GradientTrace {
    /// `window` is the number of previous epochs `t`; `exclusive` keeps `t`
    /// snapshots instead of `t + 1`.
    pub fn new(sample_count: usize, dim: usize, window: usize, exclusive: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "gradient dimension must be at least 1"));
        }
        if window == 0 {
            return Err(Error::invalid("window", "must be at least 1"));
        }
        if exclusive && window < 2 {
            return Err(Error::invalid("window", "exclusive windows need at least 2 epochs"));
        }
        let capacity = if exclusive { window } else { window + 1 };
        let empty = SampleWindow {
            data: vec![0.0; capacity * dim],
            start: 0,
            len: 0,
            last_epoch: None,
            latest_vog: None,
        };
        Ok(GradientTrace {
            dim,
            window,
            capacity,
            samples: vec![empty; sample_count],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Snapshots needed before a score can be computed.
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    /// Number of snapshots currently held for `sample`.
    pub fn held(&self, sample: usize) -> usize {
        self.samples[sample].len
    }

    pub fn is_ready(&self, sample: usize) -> bool {
        self.samples[sample].len == self.capacity
    }

    pub fn last_epoch(&self, sample: usize) -> Option<usize> {
        self.samples[sample].last_epoch
    }

    /// Appends the snapshot for `epoch`, evicting the oldest when full.
    pub fn record_snapshot(&mut self, sample: usize, epoch: usize, gradient: &[f64]) -> Result<()> {
        if gradient.len() != self.dim {
            return Err(Error::DimensionMismatch {
                what: "gradient snapshot",
                expected: self.dim,
                found: gradient.len(),
            });
        }
        if sample >= self.samples.len() {
            return Err(Error::invalid("sample", "index outside the trace"));
        }
        let (dim, capacity) = (self.dim, self.capacity);
        let slot = &mut self.samples[sample];
        if let Some(last) = slot.last_epoch {
            if epoch <= last {
                return Err(Error::NonMonotoneEpoch { sample, epoch, last });
            }
        }
        let pos = if slot.len < capacity {
            slot.len += 1;
            (slot.start + slot.len - 1) % capacity
        } else {
            let pos = slot.start;
            slot.start = (slot.start + 1) % capacity;
            pos
        };
        slot.data[pos * dim..(pos + 1) * dim].copy_from_slice(gradient);
        slot.last_epoch = Some(epoch);
        slot.latest_vog = None;
        if slot.len == capacity {
            slot.latest_vog = Some(window_vog(slot, dim, capacity, self.window));
        }
        Ok(())
    }

    /// Windowed snapshots of `sample`, oldest first.
    pub fn snapshots(&self, sample: usize) -> impl Iterator<Item = &[f64]> {
        let slot = &self.samples[sample];
        let (dim, capacity) = (self.dim, self.capacity);
        (0..slot.len).map(move |k| {
            let pos = (slot.start + k) % capacity;
            &slot.data[pos * dim..(pos + 1) * dim]
        })
    }

    /// Score of `sample` at `epoch`; the window must be full and end at
    /// `epoch`.
    pub fn compute_vog(&self, sample: usize, epoch: usize) -> Result<f64> {
        let slot = self.samples.get(sample).ok_or(Error::NotReady { sample })?;
        match (slot.last_epoch, slot.latest_vog) {
            (Some(last), Some(vog)) if last == epoch => Ok(vog),
            _ => Err(Error::NotReady { sample }),
        }
    }

    /// Score over the most recent full window, if any.
    pub fn latest_vog(&self, sample: usize) -> Option<f64> {
        self.samples[sample].latest_vog
    }
}

fn window_vog(slot: &SampleWindow, dim: usize, capacity: usize, divisor: usize) -> f64 {
    let n = slot.len;
    let at = |k: usize, d: usize| slot.data[((slot.start + k) % capacity) * dim + d];
    let mut total = 0.0;
    for d in 0..dim {
        // Deviations are taken relative to the oldest snapshot so a constant
        // coordinate contributes exactly zero.
        let origin = at(0, d);
        let mean = (0..n).map(|k| at(k, d) - origin).sum::<f64>() / n as f64;
        let ss: f64 = (0..n)
            .map(|k| {
                let dev = (at(k, d) - origin) - mean;
                dev * dev
            })
            .sum();
        total += libm::sqrt(ss / divisor as f64);
    }
    total / dim as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_buffer_keeps_latest() {
        let mut trace = GradientTrace::new(1, 1, 2, false).unwrap();
        for e in 0..4 {
            trace.record_snapshot(0, e, &[e as f64]).unwrap();
        }
        assert_eq!(trace.held(0), 3);
        let kept: Vec<f64> = trace.snapshots(0).map(|s| s[0]).collect();
        assert_eq!(kept, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn not_ready_until_full() {
        let mut trace = GradientTrace::new(1, 2, 5, false).unwrap();
        for e in 0..5 {
            trace.record_snapshot(0, e, &[1.0, 2.0]).unwrap();
            assert_eq!(trace.compute_vog(0, e), Err(Error::NotReady { sample: 0 }));
        }
        trace.record_snapshot(0, 5, &[1.0, 2.0]).unwrap();
        assert_eq!(trace.compute_vog(0, 5), Ok(0.0));
        assert!(trace.compute_vog(0, 4).is_err());
    }

    #[test]
    fn hand_example() {
        let mut trace = GradientTrace::new(1, 1, 2, false).unwrap();
        for (e, v) in [0.0, 0.0, 3.0].into_iter().enumerate() {
            trace.record_snapshot(0, e + 10, &[v]).unwrap();
        }
        let vog = trace.compute_vog(0, 12).unwrap();
        assert!((vog - libm::sqrt(3.0)).abs() < 1e-15);
    }

    #[test]
    fn exclusive_window_holds_t() {
        let mut trace = GradientTrace::new(1, 1, 2, true).unwrap();
        trace.record_snapshot(0, 0, &[0.0]).unwrap();
        trace.record_snapshot(0, 1, &[2.0]).unwrap();
        // mean 1, squared deviations 1 + 1, divisor 2
        assert_eq!(trace.compute_vog(0, 1), Ok(1.0));
        assert_eq!(trace.capacity(), 2);
    }

    #[test]
    fn samples_have_independent_windows() {
        let mut trace = GradientTrace::new(2, 1, 1, false).unwrap();
        trace.record_snapshot(0, 0, &[0.0]).unwrap();
        trace.record_snapshot(1, 0, &[5.0]).unwrap();
        trace.record_snapshot(1, 1, &[5.0]).unwrap();
        trace.record_snapshot(0, 1, &[2.0]).unwrap();
        assert_eq!(trace.held(0), 2);
        // sample 0: mean 1, deviations 1, 1, divisor 1 -> sqrt(2)
        assert!((trace.compute_vog(0, 1).unwrap() - libm::sqrt(2.0)).abs() < 1e-15);
        assert_eq!(trace.compute_vog(1, 1), Ok(0.0));
    }

    #[test]
    fn rejects_bad_snapshots() {
        let mut trace = GradientTrace::new(1, 2, 3, false).unwrap();
        assert!(matches!(trace.record_snapshot(0, 0, &[1.0]), Err(Error::DimensionMismatch { .. })));
        trace.record_snapshot(0, 3, &[1.0, 1.0]).unwrap();
        assert_eq!(
            trace.record_snapshot(0, 3, &[1.0, 1.0]),
            Err(Error::NonMonotoneEpoch { sample: 0, epoch: 3, last: 3 })
        );
        assert!(GradientTrace::new(1, 0, 3, false).is_err());
        assert!(GradientTrace::new(1, 2, 0, false).is_err());
    }
}
