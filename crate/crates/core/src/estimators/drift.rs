//! Two-point drift: 𝔼 V(Φ_{2m}(z, ω̲ᵐ)) with V(z) = d(x, y)^{−p}.

use rayon::prelude::*;

use super::{check_p, McConfig};
use crate::error::Result;
use crate::rds::{draw_phase, TwoPointState};
use crate::stats::{pairwise_reduce, Estimate, Moments};
use crate::torus::{torus_dist, ShearPair};

pub fn drift_v(z: &TwoPointState, p: f64) -> f64 {
    z.separation().powf(-p)
}

/// m = 2 map applications (time 4).
pub fn drift_check(k: f64, p: f64, z: &TwoPointState, cfg: &McConfig) -> Result<Estimate> {
    drift_check_with(ShearPair::chirikov(k), 2, p, z, cfg)
}

pub fn drift_check_with(sp: ShearPair, m: usize, p: f64, z: &TwoPointState, cfg: &McConfig) -> Result<Estimate> {
    cfg.validate()?;
    check_p(p)?;
    let parts: Vec<Moments> = cfg
        .chunks()
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut acc = Moments::default();
            let mut rng = cfg.stream.rng_at_phase(lo * m as u64);
            for _ in lo..hi {
                let (mut x, mut y) = (z.x, z.y);
                for _ in 0..m {
                    let w = draw_phase(&mut rng);
                    x = sp.step(x, w);
                    y = sp.step(y, w);
                }
                acc.push(torus_dist(x, y).powf(-p));
            }
            acc
        })
        .collect();
    Ok(pairwise_reduce(&parts, Moments::default(), &|a, b| a.merge(b)).estimate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rds::RngStreamSpec;
    use crate::torus::{chirikov_step, TorusPoint};

    #[test]
    fn doubling_separation_scales_v() {
        let a = TwoPointState::new(TorusPoint::new(1.0, 1.0), TorusPoint::new(1.0, 1.01)).unwrap();
        let b = TwoPointState::new(TorusPoint::new(1.0, 1.0), TorusPoint::new(1.0, 1.02)).unwrap();
        let ratio = drift_v(&a, 0.25) / drift_v(&b, 0.25);
        assert!((ratio - 2f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn agrees_with_naive_reference() {
        let cfg = McConfig {
            samples: 1000,
            stream: RngStreamSpec::new(8, 2),
            grid_x: 1,
            grid_v: 1,
        };
        let z = TwoPointState::new(TorusPoint::new(0.5, 0.5), TorusPoint::new(0.5, 0.51)).unwrap();
        let est = drift_check(100.0, 0.25, &z, &cfg).unwrap();
        let mut rng = cfg.stream.rng();
        let mut s = 0.0;
        for _ in 0..1000 {
            let w1 = draw_phase(&mut rng);
            let w2 = draw_phase(&mut rng);
            let x = chirikov_step(chirikov_step(z.x, w1, 100.0), w2, 100.0);
            let y = chirikov_step(chirikov_step(z.y, w1, 100.0), w2, 100.0);
            s += torus_dist(x, y).powf(-0.25);
        }
        assert!((est.mean - s / 1000.0).abs() < 1e-12 * est.mean);
    }
}
