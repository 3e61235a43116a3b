//! Mergeable per-index running moments.

/// Welford accumulator over equal-length series. Merging uses the pairwise
/// update of Chan et al., so chunk results can be combined in a fixed order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeriesMoments {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl SeriesMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, xs: &[f64]) {
        if self.count == 0 {
            self.mean = vec![0.0; xs.len()];
            self.m2 = vec![0.0; xs.len()];
        }
        assert_eq!(xs.len(), self.mean.len(), "series length changed");
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(xs) {
            let d = x - *m;
            *m += d / n;
            *s += d * (x - *m);
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        assert_eq!(self.mean.len(), other.mean.len(), "series length changed");
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.count += other.count;
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Standard error of the mean (sample variance, `n - 1`).
    pub fn stderr(&self) -> Vec<f64> {
        let n = self.count as f64;
        if self.count < 2 {
            return vec![0.0; self.mean.len()];
        }
        self.m2
            .iter()
            .map(|s| (s.max(0.0) / (n - 1.0) / n).sqrt())
            .collect()
    }
}
