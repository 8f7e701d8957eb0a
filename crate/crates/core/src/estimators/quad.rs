//! ∫₀^{2π} |a + b cos θ|^{−p} dθ with power-law-aware handling of the roots.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::check_p;
use crate::error::{invalid, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

const MAX_INTERVALS: usize = 4000;

/// Globally adaptive Gauss–Kronrod: bisects the interval with the largest
/// error estimate until the summed estimate drops below `tol` or the
/// interval budget is spent.
fn adapt(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let (v, e) = gk15(f, lo, hi);
    let mut parts = vec![(lo, hi, v, e)];
    let mut total_err = e;
    while total_err > tol && parts.len() < MAX_INTERVALS {
        let (i, _) = parts.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).unwrap();
        let (a, b, _, e) = parts.swap_remove(i);
        let m = 0.5 * (a + b);
        let (v1, e1) = gk15(f, a, m);
        let (v2, e2) = gk15(f, m, b);
        total_err += e1 + e2 - e;
        parts.push((a, m, v1, e1));
        parts.push((m, b, v2, e2));
    }
    parts.iter().map(|p| p.2).sum()
}

/// ∫ of `f` over the segment from `root` to `root + len` (len may be
/// negative), with an integrable singularity ~|t − root|^(−alpha) at `root`.
/// Substituting t = root + len·s^m, m = 1/(1 − alpha), removes the power law.
fn singular_segment(f: &impl Fn(f64) -> f64, root: f64, len: f64, alpha: f64, tol: f64) -> f64 {
    let m = 1.0 / (1.0 - alpha);
    let g = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let sm1 = s.powf(m - 1.0);
        let t = root + len * sm1 * s;
        f(t) * len.abs() * m * sm1
    };
    adapt(&g, 0.0, 1.0, tol)
}

pub fn singular_cos_integral(a: f64, b: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    if b == 0.0 || !b.is_finite() || !a.is_finite() {
        return Err(invalid("b", "must be finite and nonzero"));
    }
    let f = |t: f64| (a + b * t.cos()).abs().powf(-p);
    let tol = 1e-11;
    // symmetric about π, so integrate over [0, π] and double
    let r = -a / b;
    if r.abs() > 1.0 {
        return Ok(2.0 * adapt(&f, 0.0, PI, tol));
    }
    // a + b cos t = −2b sin((t + t₀)/2) sin((t − t₀)/2), free of cancellation near t₀
    let t0 = r.clamp(-1.0, 1.0).acos();
    let f = |t: f64| (2.0 * b * (0.5 * (t + t0)).sin() * (0.5 * (t - t0)).sin()).abs().powf(-p);
    let half = if r == 1.0 {
        singular_segment(&f, 0.0, PI, 2.0 * p, tol)
    } else if r == -1.0 {
        singular_segment(&f, PI, -PI, 2.0 * p, tol)
    } else {
        singular_segment(&f, t0, -t0, p, tol) + singular_segment(&f, t0, PI - t0, p, tol)
    };
    Ok(2.0 * half)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaimProbe {
    pub p: f64,
    /// max over the grid of I(a, b, p)·|b|^p
    pub c_p: f64,
    pub argmax_ratio: f64,
    pub grid_points: usize,
}

/// Empirical C_p over the ratios a/b ∈ `ratios` (b = 1, so the |b|^p factor is 1).
pub fn claim_constant_probe(p: f64, ratios: &[f64]) -> Result<ClaimProbe> {
    check_p(p)?;
    if ratios.is_empty() {
        return Err(invalid("grid", "empty ratio grid"));
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    for &r in ratios {
        let v = singular_cos_integral(r, 1.0, p)?;
        if v > best.0 {
            best = (v, r);
        }
    }
    Ok(ClaimProbe {
        p,
        c_p: best.0,
        argmax_ratio: best.1,
        grid_points: ratios.len(),
    })
}

/// Equispaced grid lo, lo+step, …, hi, snapped to multiples of `step`.
pub fn ratio_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let i0 = (lo / step).round() as i64;
    let i1 = (hi / step).round() as i64;
    (i0..=i1).map(|i| i as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn root_free_case_matches_plain_midpoint() {
        let (a, b, p) = (3.0, 1.2, 0.3);
        let n = 20_000;
        let h = TAU / n as f64;
        let mid: f64 = (0..n).map(|i| (a + b * ((i as f64 + 0.5) * h).cos()).abs().powf(-p)).sum::<f64>() * h;
        assert!((singular_cos_integral(a, b, p).unwrap() - mid).abs() < 1e-12);
    }

    #[test]
    fn cos_only_closed_form() {
        // ∫₀^{2π}|cos θ|^{−p} = 2·B(1/2, (1−p)/2)
        let p: f64 = 0.25;
        let beta = gamma(0.5) * gamma((1.0 - p) / 2.0) / gamma(1.0 - p / 2.0);
        let v = singular_cos_integral(0.0, 1.0, p).unwrap();
        assert!((v - 2.0 * beta).abs() < 1e-8, "{v} vs {}", 2.0 * beta);
    }

    // Lanczos approximation, good to ~1e-14 on (0, 2)
    fn gamma(x: f64) -> f64 {
        const G: [f64; 9] = [
            0.999_999_999_999_809_9,
            676.520_368_121_885_1,
            -1_259.139_216_722_402_8,
            771.323_428_777_653_1,
            -176.615_029_162_140_6,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_572e-6,
            1.505_632_735_149_311_6e-7,
        ];
        if x < 0.5 {
            return PI / ((PI * x).sin() * gamma(1.0 - x));
        }
        let x = x - 1.0;
        let mut a = G[0];
        let t = x + 7.5;
        for (i, g) in G.iter().enumerate().skip(1) {
            a += g / (x + i as f64);
        }
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }

    #[test]
    fn homogeneity_and_large_a() {
        let v = singular_cos_integral(0.4, -1.3, 0.25).unwrap();
        let w = singular_cos_integral(0.4 * 3.7, -1.3 * 3.7, 0.25).unwrap();
        assert!((w - 3.7f64.powf(-0.25) * v).abs() < 1e-7 * v);
        let big = singular_cos_integral(100.0, 1.0, 0.25).unwrap();
        assert!((big / (TAU * 100f64.powf(-0.25)) - 1.0).abs() < 0.01);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(singular_cos_integral(1.0, 0.0, 0.25).is_err());
        assert!(singular_cos_integral(1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn probe_maximizer_and_zero_ratio() {
        let g = ratio_grid(-2.0, 2.0, 0.05);
        let pr = claim_constant_probe(0.25, &g).unwrap();
        assert!((pr.argmax_ratio.abs() - 1.0).abs() < 1e-9);
        let z = claim_constant_probe(0.25, &[0.0]).unwrap();
        assert_eq!(z.c_p, singular_cos_integral(0.0, 1.0, 0.25).unwrap());
        let lo = claim_constant_probe(0.1, &g).unwrap();
        assert!(lo.c_p < pr.c_p);
    }
}
