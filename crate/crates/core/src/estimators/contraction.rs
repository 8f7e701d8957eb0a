//! sup over a (x₂, v) grid of 𝔼‖D_x f_{ω̲ᵐ}(x) v‖^{−p}.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_p, neg_power_sq, McConfig};
use crate::error::Result;
use crate::rds::draw_phase;
use crate::stats::{pairwise_reduce, Estimate, Moments};
use crate::torus::{Mat2, PhasePair, ShearPair, TorusPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub k: f64,
    pub p: f64,
    pub m: usize,
    pub worst_estimate: Estimate,
    pub worst_cell: (usize, usize),
    /// `per_cell[i][j]`: x₂ = 2πi/grid_x, v = (cos πj/grid_v, sin πj/grid_v)
    pub per_cell: Vec<Vec<Estimate>>,
}

pub fn grid_x2(cfg: &McConfig) -> Vec<f64> {
    (0..cfg.grid_x).map(|i| TAU * i as f64 / cfg.grid_x as f64).collect()
}

pub fn grid_dirs(cfg: &McConfig) -> Vec<(f64, f64)> {
    (0..cfg.grid_v)
        .map(|j| {
            let t = PI * j as f64 / cfg.grid_v as f64;
            (t.cos(), t.sin())
        })
        .collect()
}

/// m-step derivative D_x f_{ω̲ᵐ}(x) along the wrapped orbit.
#[inline]
pub fn cocycle(sp: ShearPair, x: TorusPoint, ws: &[PhasePair]) -> Mat2 {
    let mut cur = x;
    let mut m = Mat2::IDENTITY;
    for &w in ws {
        m = sp.jacobian(cur, w) * m;
        cur = sp.step(cur, w);
    }
    m
}

/// Chirikov map, m = 2 steps.
pub fn contraction_estimate(k: f64, p: f64, cfg: &McConfig) -> Result<ContractionReport> {
    Ok(contraction_estimate_with(ShearPair::chirikov(k), k, 2, &[p], cfg)?.remove(0))
}

/// One report per entry of `ps`, all computed on the same phase samples.
pub fn contraction_estimate_with(sp: ShearPair, k: f64, m: usize, ps: &[f64], cfg: &McConfig) -> Result<Vec<ContractionReport>> {
    cfg.validate()?;
    for &p in ps {
        check_p(p)?;
    }
    let xs = grid_x2(cfg);
    let vs = grid_dirs(cfg);
    let cells = xs.len() * vs.len();
    let np = ps.len();

    let partial: Vec<Vec<Moments>> = cfg
        .chunks()
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut acc = vec![Moments::default(); cells * np];
            let mut rng = cfg.stream.rng_at_phase(lo * m as u64);
            let mut ws = vec![PhasePair::default(); m];
            for _ in lo..hi {
                for w in ws.iter_mut() {
                    *w = draw_phase(&mut rng);
                }
                for (i, &x2) in xs.iter().enumerate() {
                    let mat = cocycle(sp, TorusPoint::new(0.0, x2), &ws);
                    for (j, &(v1, v2)) in vs.iter().enumerate() {
                        let (u1, u2) = mat.apply(v1, v2);
                        let q = u1 * u1 + u2 * u2;
                        let base = (i * vs.len() + j) * np;
                        for (t, &p) in ps.iter().enumerate() {
                            acc[base + t].push(neg_power_sq(q, p));
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let total = pairwise_reduce(&partial, vec![Moments::default(); cells * np], &|a, b| {
        a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect()
    });

    Ok(ps
        .iter()
        .enumerate()
        .map(|(t, &p)| {
            let per_cell: Vec<Vec<Estimate>> = (0..xs.len())
                .map(|i| (0..vs.len()).map(|j| total[(i * vs.len() + j) * np + t].estimate()).collect())
                .collect();
            let mut worst = (0, 0);
            for i in 0..xs.len() {
                for j in 0..vs.len() {
                    if per_cell[i][j].mean > per_cell[worst.0][worst.1].mean {
                        worst = (i, j);
                    }
                }
            }
            ContractionReport {
                k,
                p,
                m,
                worst_estimate: per_cell[worst.0][worst.1],
                worst_cell: worst,
                per_cell,
            }
        })
        .collect())
}
