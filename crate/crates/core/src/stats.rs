//! Streaming estimators used by the simulator and the experiment harness.

use serde::{Deserialize, Serialize};

/// Point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }

    /// `(value - reference) / stderr`; infinite when the error is zero and
    /// the values differ.
    pub fn z_score(&self, reference: f64) -> f64 {
        let diff = self.value - reference;
        if diff == 0.0 {
            0.0
        } else {
            diff / self.stderr
        }
    }
}

/// Welford mean/variance accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMoments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }

    pub fn estimate(&self) -> Estimate {
        Estimate::new(self.mean(), self.stderr())
    }
}

/// Regenerative ratio estimator `sum Y / sum T` over i.i.d. cycles, with the
/// delta-method standard error `sd(Y - r T) / (mean(T) sqrt(n))`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RatioEstimator {
    n: u64,
    sum_y: f64,
    sum_t: f64,
    sum_yy: f64,
    sum_tt: f64,
    sum_yt: f64,
}

impl RatioEstimator {
    pub fn push(&mut self, y: f64, t: f64) {
        self.n += 1;
        self.sum_y += y;
        self.sum_t += t;
        self.sum_yy += y * y;
        self.sum_tt += t * t;
        self.sum_yt += y * t;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn estimate(&self) -> Estimate {
        let n = self.n as f64;
        let r = self.sum_y / self.sum_t;
        if self.n < 2 {
            return Estimate::new(r, f64::NAN);
        }
        // sum (y - r t)^2 expanded; sum (y - r t) = 0 by construction of r.
        let ss = (self.sum_yy - 2.0 * r * self.sum_yt + r * r * self.sum_tt).max(0.0);
        let var = ss / (n - 1.0);
        let t_bar = self.sum_t / n;
        Estimate::new(r, var.sqrt() / (t_bar * n.sqrt()))
    }
}

/// Least-squares line fit accumulated relative to an origin to limit
/// cancellation at large times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    origin: f64,
    n: u64,
    sx: f64,
    sy: f64,
    sxx: f64,
    sxy: f64,
}

impl LineFit {
    pub fn new(origin: f64) -> Self {
        Self {
            origin,
            n: 0,
            sx: 0.0,
            sy: 0.0,
            sxx: 0.0,
            sxy: 0.0,
        }
    }

    pub fn push(&mut self, x: f64, y: f64) {
        let x = x - self.origin;
        self.n += 1;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.sxy += x * y;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    /// Slope, or `None` with fewer than two distinct abscissae.
    pub fn slope(&self) -> Option<f64> {
        if self.n < 2 {
            return None;
        }
        let n = self.n as f64;
        let cxx = self.sxx - self.sx * self.sx / n;
        if cxx <= 0.0 {
            return None;
        }
        Some((self.sxy - self.sx * self.sy / n) / cxx)
    }
}

/// Non-overlapping batch means of a time-weighted quantity over `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeBatchMeans {
    start: f64,
    width: f64,
    areas: Vec<f64>,
}

impl TimeBatchMeans {
    pub fn new(start: f64, end: f64, batches: usize) -> Self {
        Self {
            start,
            width: (end - start) / batches as f64,
            areas: vec![0.0; batches],
        }
    }

    /// Adds a piecewise-constant `value` held over `[t0, t1)`.
    pub fn add_segment(&mut self, t0: f64, t1: f64, value: f64) {
        let nb = self.areas.len();
        let end = self.start + self.width * nb as f64;
        let mut a = t0.max(self.start);
        let b = t1.min(end);
        while a < b {
            let idx = (((a - self.start) / self.width) as usize).min(nb - 1);
            let batch_end = self.start + self.width * (idx + 1) as f64;
            let stop = b.min(batch_end);
            self.areas[idx] += value * (stop - a);
            if stop <= a {
                break;
            }
            a = stop;
        }
    }

    pub fn estimate(&self) -> Estimate {
        let mut m = RunningMoments::default();
        for area in &self.areas {
            m.push(area / self.width);
        }
        m.estimate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_moments() {
        let mut m = RunningMoments::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            m.push(x);
        }
        assert_eq!(m.mean(), 2.5);
        assert!((m.variance() - 5.0 / 3.0).abs() < 1e-15);
        assert!((m.stderr() - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ratio_estimator_matches_direct_formula() {
        let data = [(3.0, 10.0), (5.0, 11.0), (2.0, 7.5), (6.0, 14.0)];
        let mut r = RatioEstimator::default();
        for &(y, t) in &data {
            r.push(y, t);
        }
        let est = r.estimate();
        let ratio = 16.0 / 42.5;
        let resid: Vec<f64> = data.iter().map(|&(y, t)| y - ratio * t).collect();
        let var = resid.iter().map(|e| e * e).sum::<f64>() / 3.0;
        let se = var.sqrt() / (42.5 / 4.0 * 2.0);
        assert!((est.value - ratio).abs() < 1e-15);
        assert!((est.stderr - se).abs() < 1e-13);
    }

    #[test]
    fn line_fit() {
        let mut f = LineFit::new(1e7);
        for i in 0..100 {
            let x = 1e7 + i as f64;
            f.push(x, 3.0 - 0.25 * i as f64);
        }
        assert!((f.slope().unwrap() + 0.25).abs() < 1e-12);
        let mut g = LineFit::new(0.0);
        g.push(1.0, 1.0);
        assert_eq!(g.slope(), None);
    }

    #[test]
    fn time_batches_split_segments() {
        let mut b = TimeBatchMeans::new(0.0, 4.0, 4);
        b.add_segment(0.5, 2.5, 2.0);
        b.add_segment(2.5, 4.0, 1.0);
        b.add_segment(4.0, 9.0, 100.0);
        let est = b.estimate();
        // Batch means: [1.0, 2.0, 1.5, 1.0]
        assert!((est.value - 1.375).abs() < 1e-15);
    }

    #[test]
    fn z_scores() {
        assert_eq!(Estimate::new(1.0, 0.0).z_score(1.0), 0.0);
        assert_eq!(Estimate::new(1.5, 0.25).z_score(1.0), 2.0);
    }
}
