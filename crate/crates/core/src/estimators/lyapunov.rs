//! Top Lyapunov exponent from renormalized log-norm sums.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rds::{draw_phase, uniform_angle, CocycleAccumulator, RngStreamSpec};
use crate::stats::{estimate_from, Estimate};
use crate::torus::{ShearPair, TangentVector, TorusPoint};

pub const MIN_STEPS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    /// nats per map application
    pub lambda1: Estimate,
    pub n_steps: u64,
    pub n_orbits: u64,
}

pub fn lyapunov_exponent(k: f64, n_steps: u64, n_orbits: u64, stream: RngStreamSpec) -> Result<LyapunovReport> {
    lyapunov_exponent_with(ShearPair::chirikov(k), n_steps, n_orbits, stream)
}

/// Orbit `o` uses `stream.substream(o)`: three draws for (x, v), then one
/// phase pair per step.
pub fn orbit_growth(sp: ShearPair, n_steps: u64, stream: RngStreamSpec) -> f64 {
    let mut rng = stream.rng();
    let x = TorusPoint::new(uniform_angle(&mut rng), uniform_angle(&mut rng));
    let v = TangentVector::from_angle(uniform_angle(&mut rng));
    let mut acc = CocycleAccumulator { x, v, log_norm_sum: 0.0 };
    for _ in 0..n_steps {
        let w = draw_phase(&mut rng);
        acc.step(sp, w);
    }
    acc.log_norm_sum
}

pub fn lyapunov_exponent_with(sp: ShearPair, n_steps: u64, n_orbits: u64, stream: RngStreamSpec) -> Result<LyapunovReport> {
    if n_steps < MIN_STEPS {
        return Err(invalid("steps", format!("must be >= {MIN_STEPS}, got {n_steps}")));
    }
    if n_orbits == 0 {
        return Err(invalid("realizations", "need at least one orbit"));
    }
    let per: Vec<f64> = (0..n_orbits)
        .into_par_iter()
        .map(|o| orbit_growth(sp, n_steps, stream.substream(o)) / n_steps as f64)
        .collect();
    Ok(LyapunovReport {
        lambda1: estimate_from(&per),
        n_steps,
        n_orbits,
    })
}
