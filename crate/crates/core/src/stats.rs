//! Monte Carlo summaries with order-fixed reductions.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl Estimate {
    /// Upper edge of the `z`-sigma band.
    pub fn upper(&self, z: f64) -> f64 {
        self.mean + z * self.std_error
    }

    pub fn lower(&self, z: f64) -> f64 {
        self.mean - z * self.std_error
    }
}

/// Running first and second power sums.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(self, o: Moments) -> Moments {
        Moments {
            n: self.n + o.n,
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
        }
    }

    pub fn estimate(&self) -> Estimate {
        let n = self.n.max(1) as f64;
        let mean = self.sum / n;
        let var = if self.n > 1 {
            ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            std_error: (var / n).sqrt(),
            samples: self.n,
        }
    }
}

/// Pairwise reduction in a fixed tree shape, so the result depends only
/// on the order of `items`.
pub fn pairwise_reduce<T: Clone>(items: &[T], zero: T, merge: &impl Fn(T, T) -> T) -> T {
    match items.len() {
        0 => zero,
        1 => items[0].clone(),
        n => {
            let (l, r) = items.split_at(n / 2);
            merge(pairwise_reduce(l, zero.clone(), merge), pairwise_reduce(r, zero, merge))
        }
    }
}

pub fn pairwise_sum(xs: &[f64]) -> f64 {
    pairwise_reduce(xs, 0.0, &|a, b| a + b)
}

pub fn estimate_from(xs: &[f64]) -> Estimate {
    let mut m = Moments::default();
    for &x in xs {
        m.push(x);
    }
    m.estimate()
}

/// Ordinary least squares y = a + b x; returns (a, b, r²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (my - slope * mx, slope, r2)
}
