//! Alternating sine shears x₁ += A sin(x₂ − ω¹), x₂ += A sin(x₁ − ω²).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimators::{contraction_estimate_with, ContractionReport, McConfig};
use crate::rds::draw_phase;
use crate::torus::{Mat2, PhasePair, ShearPair, TorusPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PierreParams {
    a: f64,
}

impl PierreParams {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid("A", "amplitude must be positive and finite"));
        }
        Ok(PierreParams { a })
    }

    pub fn a(self) -> f64 {
        self.a
    }

    pub fn shears(self) -> ShearPair {
        ShearPair::pierrehumbert(self.a)
    }
}

pub fn p_step(x: TorusPoint, w: PhasePair, a: f64) -> TorusPoint {
    ShearPair::pierrehumbert(a).step(x, w)
}

pub fn p_jacobian(x: TorusPoint, w: PhasePair, a: f64) -> Mat2 {
    ShearPair::pierrehumbert(a).jacobian(x, w)
}

/// One-step (m = 1) sup-grid estimate of 𝔼‖D f_ω(x) v‖⁻ᵖ.
pub fn p_contraction_estimate(a: f64, p: f64, cfg: &McConfig) -> Result<ContractionReport> {
    let pp = PierreParams::new(a)?;
    let mut r = contraction_estimate_with(pp.shears(), a, 1, &[p], cfg)?;
    Ok(r.remove(0))
}

/// Samples of (Cᴴ, Cⱽ) at a fixed x under uniform phases.
pub fn slope_samples(x: TorusPoint, a: f64, cfg: &McConfig) -> (Vec<f64>, Vec<f64>) {
    let sp = ShearPair::pierrehumbert(a);
    let mut rng = cfg.stream.rng();
    let mut ch = Vec::with_capacity(cfg.samples as usize);
    let mut cv = Vec::with_capacity(cfg.samples as usize);
    for _ in 0..cfg.samples {
        let j = sp.jacobian(x, draw_phase(&mut rng));
        ch.push(j.b);
        cv.push(j.c);
    }
    (ch, cv)
}

/// Kolmogorov–Smirnov distance of a sample from the law of A·cos(U), U uniform.
pub fn ks_distance_cos(sample: &mut [f64], a: f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let cdf = |t: f64| 1.0 - (t / a).clamp(-1.0, 1.0).acos() / std::f64::consts::PI;
    sample
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = cdf(t);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
