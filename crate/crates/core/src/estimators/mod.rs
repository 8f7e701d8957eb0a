//! Monte Carlo and quadrature estimators.

pub mod apriori;
pub mod contraction;
pub mod correlation;
pub mod drift;
pub mod fit;
pub mod lyapunov;
pub mod quad;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rds::RngStreamSpec;

pub use apriori::{apriori_bound_check, AprioriReport, AprioriRow};
pub use contraction::{contraction_estimate, contraction_estimate_with, ContractionReport};
pub use correlation::{correlation_decay, CorrelationSeries};
pub use drift::{drift_check, drift_v};
pub use fit::fit_exponential_rate;
pub use lyapunov::{lyapunov_exponent, LyapunovReport};
pub use quad::{claim_constant_probe, singular_cos_integral, ClaimProbe};

/// Samples per work unit. Fixed so reductions do not depend on the worker count.
pub const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: u64,
    pub stream: RngStreamSpec,
    pub grid_x: usize,
    pub grid_v: usize,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64, grid_x: usize, grid_v: usize) -> Self {
        McConfig {
            samples,
            stream: RngStreamSpec::new(seed, 0),
            grid_x,
            grid_v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(invalid("samples", "must be >= 1"));
        }
        if self.grid_x == 0 {
            return Err(invalid("grid_x", "must be >= 1"));
        }
        if self.grid_v == 0 {
            return Err(invalid("grid_v", "must be >= 1"));
        }
        Ok(())
    }

    pub(crate) fn chunks(&self) -> Vec<(u64, u64)> {
        let n = self.samples.div_ceil(CHUNK);
        (0..n)
            .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(self.samples)))
            .collect()
    }
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 0.5 {
        Ok(())
    } else {
        Err(invalid("p", format!("must lie in (0, 1/2), got {p}")))
    }
}

/// (|w|²)^(−p/2) with a sqrt-only path for p = 1/4.
#[inline]
pub(crate) fn neg_power_sq(q: f64, p: f64) -> f64 {
    if p == 0.25 {
        1.0 / q.sqrt().sqrt().sqrt()
    } else {
        q.powf(-0.5 * p)
    }
}
