//! Empirical envelopes of the first and second derivatives of the lifted
//! two-point map Φ_{2n}(z, ω̲ⁿ) and their growth exponents in K.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::McConfig;
use crate::error::{invalid, Result};
use crate::rds::draw_phase;
use crate::stats::linear_fit;
use crate::torus::ShearPair;

pub const H_FIRST: f64 = 1e-6;
pub const H_SECOND: f64 = 1e-4;
pub const EXPONENT_SLACK: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AprioriRow {
    pub k: f64,
    /// max Frobenius norm of D_z Φ_{2n} (4×4)
    pub first_z: f64,
    /// max Frobenius norm of D_ω Φ_{2n} (4×2n)
    pub first_w: f64,
    /// max Frobenius norm of the full second-derivative tensor
    pub second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriReport {
    pub n: usize,
    pub rows: Vec<AprioriRow>,
    pub exponent_first_z: f64,
    pub exponent_first_w: f64,
    pub exponent_second: f64,
    pub bound_first: f64,
    pub bound_second: f64,
    pub pass: bool,
}

/// Lifted Φ_{2n}: vars = (x1, x2, y1, y2, ω₁¹, ω₁², …, ω_n¹, ω_n²).
pub fn phi(sp: ShearPair, n: usize, vars: &[f64]) -> [f64; 4] {
    let mut x = [vars[0], vars[1]];
    let mut y = [vars[2], vars[3]];
    for i in 0..n {
        let w = [vars[4 + 2 * i], vars[5 + 2 * i]];
        x = sp.lifted_step(x, w);
        y = sp.lifted_step(y, w);
    }
    [x[0], x[1], y[0], y[1]]
}

fn shifted(vars: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut v = vars.to_vec();
    for &(i, d) in moves {
        v[i] += d;
    }
    v
}

/// Central-difference first derivatives, row-major [output][var].
pub fn first_derivatives(sp: ShearPair, n: usize, vars: &[f64], h: f64) -> Vec<[f64; 4]> {
    (0..vars.len())
        .map(|i| {
            let fp = phi(sp, n, &shifted(vars, &[(i, h)]));
            let fm = phi(sp, n, &shifted(vars, &[(i, -h)]));
            let mut d = [0.0; 4];
            for o in 0..4 {
                d[o] = (fp[o] - fm[o]) / (2.0 * h);
            }
            d
        })
        .collect()
}

/// Frobenius norm of the central-difference Hessian tensor over all variables.
pub fn second_derivative_norm(sp: ShearPair, n: usize, vars: &[f64], h: f64) -> f64 {
    let nv = vars.len();
    let f0 = phi(sp, n, vars);
    let mut sq = 0.0;
    for i in 0..nv {
        for j in i..nv {
            let mut d = [0.0; 4];
            if i == j {
                let fp = phi(sp, n, &shifted(vars, &[(i, h)]));
                let fm = phi(sp, n, &shifted(vars, &[(i, -h)]));
                for o in 0..4 {
                    d[o] = (fp[o] - 2.0 * f0[o] + fm[o]) / (h * h);
                }
            } else {
                let fpp = phi(sp, n, &shifted(vars, &[(i, h), (j, h)]));
                let fpm = phi(sp, n, &shifted(vars, &[(i, h), (j, -h)]));
                let fmp = phi(sp, n, &shifted(vars, &[(i, -h), (j, h)]));
                let fmm = phi(sp, n, &shifted(vars, &[(i, -h), (j, -h)]));
                for o in 0..4 {
                    d[o] = (fpp[o] - fpm[o] - fmp[o] + fmm[o]) / (4.0 * h * h);
                }
            }
            let mult = if i == j { 1.0 } else { 2.0 };
            sq += mult * d.iter().map(|v| v * v).sum::<f64>();
        }
    }
    sq.sqrt()
}

fn row_for(sp: ShearPair, k: f64, n: usize, cfg: &McConfig) -> AprioriRow {
    let per_sample = (n + 2) as u64;
    let parts: Vec<[f64; 3]> = cfg
        .chunks()
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut rng = cfg.stream.rng_at_phase(lo * per_sample);
            let mut best = [0.0f64; 3];
            let mut vars = vec![0.0; 4 + 2 * n];
            for _ in lo..hi {
                for c in vars.chunks_mut(2) {
                    let w = draw_phase(&mut rng);
                    c[0] = w.w1.value();
                    c[1] = w.w2.value();
                }
                let d1 = first_derivatives(sp, n, &vars, H_FIRST);
                let fz: f64 = d1[..4].iter().flat_map(|r| r.iter()).map(|v| v * v).sum::<f64>().sqrt();
                let fw: f64 = d1[4..].iter().flat_map(|r| r.iter()).map(|v| v * v).sum::<f64>().sqrt();
                let s = second_derivative_norm(sp, n, &vars, H_SECOND);
                best[0] = best[0].max(fz);
                best[1] = best[1].max(fw);
                best[2] = best[2].max(s);
            }
            best
        })
        .collect();
    let mut best = [0.0f64; 3];
    for b in parts {
        for i in 0..3 {
            best[i] = best[i].max(b[i]);
        }
    }
    AprioriRow {
        k,
        first_z: best[0],
        first_w: best[1],
        second: best[2],
    }
}

/// Exponent of a power law fitted in log-log by least squares.
pub fn growth_exponent(ks: &[f64], vals: &[f64]) -> f64 {
    let lx: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let ly: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).1
}

pub fn apriori_bound_check(n: usize, ks: &[f64], cfg: &McConfig) -> Result<AprioriReport> {
    apriori_bound_check_with(n, ks, cfg, ShearPair::chirikov)
}

pub fn apriori_bound_check_with(n: usize, ks: &[f64], cfg: &McConfig, model: impl Fn(f64) -> ShearPair) -> Result<AprioriReport> {
    if !(1..=4).contains(&n) {
        return Err(invalid("n", format!("must be in 1..=4, got {n}")));
    }
    if ks.len() < 3 {
        return Err(invalid("K", "need at least 3 K values for the exponent fit"));
    }
    cfg.validate()?;
    let rows: Vec<AprioriRow> = ks.iter().map(|&k| row_for(model(k), k, n, cfg)).collect();
    let ez = growth_exponent(ks, &rows.iter().map(|r| r.first_z).collect::<Vec<_>>());
    let ew = growth_exponent(ks, &rows.iter().map(|r| r.first_w).collect::<Vec<_>>());
    let es = growth_exponent(ks, &rows.iter().map(|r| r.second).collect::<Vec<_>>());
    let bound_first = n as f64;
    let bound_second = 2.0 * n as f64 + 1.0;
    let pass = ez <= bound_first + EXPONENT_SLACK && ew <= bound_first + EXPONENT_SLACK && es <= bound_second + EXPONENT_SLACK;
    Ok(AprioriReport {
        n,
        rows,
        exponent_first_z: ez,
        exponent_first_w: ew,
        exponent_second: es,
        bound_first,
        bound_second,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rds::RngStreamSpec;

    #[test]
    fn zero_perturbation_gives_zero_difference() {
        let sp = ShearPair::chirikov(10.0);
        let vars = [0.3, 1.2, 4.0, 2.2, 0.7, 5.0];
        let a = phi(sp, 1, &shifted(&vars, &[(2, 0.0)]));
        assert_eq!(a, phi(sp, 1, &vars));
    }

    #[test]
    fn one_step_first_derivative_is_the_jacobian() {
        let sp = ShearPair::chirikov(10.0);
        let vars = [0.3, 1.2, 4.0, 2.2, 0.7, 5.0];
        let d = first_derivatives(sp, 1, &vars, H_FIRST);
        let c = 10.0 * (1.2f64 - 0.7).cos();
        // d/dx2 of (x1', x2') = (Kc, 1 + Kc)
        assert!((d[1][0] - c).abs() < 1e-6 * c.abs());
        assert!((d[1][1] - (1.0 + c)).abs() < 1e-6 * c.abs());
        // d/dω² of x2' = −1
        assert!((d[5][1] + 1.0).abs() < 1e-8);
    }

    #[test]
    fn exponent_of_exact_power_law() {
        let ks = [10.0, 30.0, 100.0];
        let v: Vec<f64> = ks.iter().map(|k: &f64| 3.0 * k.powf(2.5)).collect();
        assert!((growth_exponent(&ks, &v) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn n1_growth_is_linear() {
        let cfg = McConfig {
            samples: 400,
            stream: RngStreamSpec::new(5, 0),
            grid_x: 1,
            grid_v: 1,
        };
        let r = apriori_bound_check(1, &[10.0, 30.0, 100.0], &cfg).unwrap();
        assert!((r.exponent_first_z - 1.0).abs() < 0.2, "{r:?}");
        assert!(r.pass);
        assert!(apriori_bound_check(5, &[10.0, 30.0, 100.0], &cfg).is_err());
    }
}
