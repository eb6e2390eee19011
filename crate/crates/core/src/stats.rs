//! Streaming moments with associative merge, plus Pearson correlation.

use serde::{Deserialize, Serialize};

use crate::error::StatsError;

/// Welford accumulator for mean and variance; merges via the parallel
/// (Chan et al.) update so partial results combine associatively.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct RunningMoments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = (self.n + other.n) as f64;
        let delta = other.mean - self.mean;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n;
        self.mean += delta * other.n as f64 / n;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased (n - 1) variance; 0 when fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n > 1 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        }
    }
}

/// Streaming co-moment of a pair, mergeable like `RunningMoments`.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct RunningCovariance {
    n: u64,
    mean_x: f64,
    mean_y: f64,
    cxy: f64,
    m2x: f64,
    m2y: f64,
}

impl RunningCovariance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        let n = self.n as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / n;
        self.mean_y += dy / n;
        // dx is pre-update, (y - mean_y) post-update
        self.cxy += dx * (y - self.mean_y);
        self.m2x += dx * (x - self.mean_x);
        self.m2y += dy * (y - self.mean_y);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let na = self.n as f64;
        let nb = other.n as f64;
        let n = na + nb;
        let dx = other.mean_x - self.mean_x;
        let dy = other.mean_y - self.mean_y;
        self.cxy += other.cxy + dx * dy * na * nb / n;
        self.m2x += other.m2x + dx * dx * na * nb / n;
        self.m2y += other.m2y + dy * dy * na * nb / n;
        self.mean_x += dx * nb / n;
        self.mean_y += dy * nb / n;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    /// Pearson correlation; `None` when either margin is constant or
    /// fewer than two samples were seen.
    pub fn pearson(&self) -> Option<f64> {
        if self.n < 2 || self.m2x <= 0.0 || self.m2y <= 0.0 {
            return None;
        }
        Some(self.cxy / (self.m2x * self.m2y).sqrt())
    }
}

/// Sample Pearson correlation over two slices.
///
/// Constant input is flagged as `Ok(None)` rather than an error.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Option<f64>, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(StatsError::TooFewSamples {
            required: 2,
            actual: xs.len(),
        });
    }
    let mut acc = RunningCovariance::new();
    for (&x, &y) in xs.iter().zip(ys) {
        acc.push(x, y);
    }
    Ok(acc.pearson())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_perfect_positive() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), Some(1.0));
    }

    #[test]
    fn pearson_perfect_negative() {
        let r = pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap().unwrap();
        assert!((r + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_hand_computed() {
        // cov = 3/3, var = 5/3 each => r = 3/5
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0])
            .unwrap()
            .unwrap();
        assert!((r - 0.6).abs() < 1e-15);
    }

    #[test]
    fn pearson_constant_input_is_absent_not_error() {
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), None);
    }

    #[test]
    fn pearson_length_mismatch() {
        assert!(pearson(&[1.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn moments_single_sample_variance_zero() {
        let mut m = RunningMoments::new();
        m.push(3.5);
        assert_eq!(m.variance(), 0.0);
        assert_eq!(m.mean(), 3.5);
    }

    #[test]
    fn merge_matches_sequential() {
        let data: Vec<f64> = (0..1000).map(|i| ((i * 37 % 101) as f64).sin()).collect();
        let mut whole = RunningMoments::new();
        for &x in &data {
            whole.push(x);
        }
        let mut left = RunningMoments::new();
        let mut right = RunningMoments::new();
        for &x in &data[..337] {
            left.push(x);
        }
        for &x in &data[337..] {
            right.push(x);
        }
        left.merge(&right);
        assert!((left.mean() - whole.mean()).abs() < 1e-12);
        assert!((left.variance() - whole.variance()).abs() < 1e-12);
    }

    #[test]
    fn covariance_merge_matches_sequential() {
        let xs: Vec<f64> = (0..500).map(|i| (i as f64 * 0.731).cos()).collect();
        let ys: Vec<f64> = (0..500).map(|i| (i as f64 * 0.311).sin()).collect();
        let mut whole = RunningCovariance::new();
        for (&x, &y) in xs.iter().zip(&ys) {
            whole.push(x, y);
        }
        let mut a = RunningCovariance::new();
        let mut b = RunningCovariance::new();
        for (&x, &y) in xs.iter().zip(&ys).take(123) {
            a.push(x, y);
        }
        for (&x, &y) in xs.iter().zip(&ys).skip(123) {
            b.push(x, y);
        }
        a.merge(&b);
        let r1 = whole.pearson().unwrap();
        let r2 = a.pearson().unwrap();
        assert!((r1 - r2).abs() < 1e-12);
    }
}
