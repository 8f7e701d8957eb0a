//! Spectral correlation series |∫ e_m · e_{m′}∘f_ω̲ⁿ dπ| along random phase sequences.
//!
//! The integral equals (Tⁿe_m)^_{−m′}, where T ρ = ρ∘f⁻¹ is the inviscid
//! transfer operator of `transport`. The dual route pulls e_{m′} back
//! through the phases in reverse order and reads the (−m)-coefficient.

use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit_exponential_rate;
use crate::error::{invalid, Result};
use crate::rds::{sample_phases, PhaseSequence, RngStreamSpec};
use crate::stats::pairwise_sum;
use crate::torus::ShearPair;
use crate::transport::{GridSpec, SpectralField, Transport, NORMALIZATION};

/// Values below this are treated as indistinguishable from roundoff in fits.
pub const SPECTRAL_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub m: (i64, i64),
    pub m_prime: (i64, i64),
    /// mean over realizations of |·| at n = 0..=n_max
    pub values: Vec<f64>,
    pub per_realization: Vec<Vec<f64>>,
    pub realizations: usize,
    pub normalization: String,
    /// value at n = 0: 1 if m = −m′, else 0
    pub self_overlap: f64,
    pub rate: Option<f64>,
    pub r_squared: Option<f64>,
    /// periods [1, fit_end) used by the fit
    pub fit_end: usize,
}

fn unit_mode(grid: GridSpec, m: (i64, i64)) -> Result<SpectralField> {
    SpectralField::single_mode(grid, m.0, m.1, C::new(1.0, 0.0))
}

fn check_mode(name: &'static str, m: (i64, i64)) -> Result<()> {
    if m == (0, 0) {
        return Err(invalid(name, "mode must be nonzero"));
    }
    Ok(())
}

/// Route A: complex correlation at every n for one phase sequence.
pub fn correlation_path(sp: ShearPair, m: (i64, i64), m_prime: (i64, i64), phases: &PhaseSequence, grid: GridSpec) -> Result<Vec<C>> {
    check_mode("m", m)?;
    check_mode("m_prime", m_prime)?;
    let tr = Transport::new(grid);
    let mut f = unit_mode(grid, m)?;
    let mut out = vec![f.get(-m_prime.0, -m_prime.1)];
    for &w in phases.iter() {
        f = tr.step_period(&f, sp, w, 0.0, 1).0;
        out.push(f.get(-m_prime.0, -m_prime.1));
    }
    Ok(out)
}

/// Route B: ∫ e_m · (e_{m′}∘f_ω̲ⁿ) by pulling e_{m′} back through all n phases.
pub fn correlation_pullback(sp: ShearPair, m: (i64, i64), m_prime: (i64, i64), phases: &PhaseSequence, grid: GridSpec) -> Result<C> {
    check_mode("m", m)?;
    check_mode("m_prime", m_prime)?;
    let tr = Transport::new(grid);
    let mut g = unit_mode(grid, m_prime)?;
    for &w in phases.phases.iter().rev() {
        g = tr.pullback_period(&g, sp, w);
    }
    Ok(g.get(-m.0, -m.1))
}

pub fn correlation_decay(
    k: f64,
    m: (i64, i64),
    m_prime: (i64, i64),
    n_max: usize,
    realizations: usize,
    grid: GridSpec,
    stream: RngStreamSpec,
) -> Result<CorrelationSeries> {
    correlation_decay_with(ShearPair::chirikov(k), m, m_prime, n_max, realizations, grid, stream)
}

pub fn correlation_decay_with(
    sp: ShearPair,
    m: (i64, i64),
    m_prime: (i64, i64),
    n_max: usize,
    realizations: usize,
    grid: GridSpec,
    stream: RngStreamSpec,
) -> Result<CorrelationSeries> {
    if realizations == 0 {
        return Err(invalid("realizations", "must be >= 1"));
    }
    GridSpec::new(grid.n, grid.dealias)?;
    let per: Vec<Vec<f64>> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let ph = sample_phases(stream.substream(r as u64), n_max);
            correlation_path(sp, m, m_prime, &ph, grid).map(|v| v.iter().map(|c| c.norm()).collect())
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = (0..=n_max)
        .map(|n| pairwise_sum(&per.iter().map(|s| s[n]).collect::<Vec<_>>()) / realizations as f64)
        .collect();
    let fit_end = values
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, &v)| v <= SPECTRAL_FLOOR)
        .map(|(i, _)| i)
        .unwrap_or(values.len());
    let pts: Vec<(f64, f64)> = (1..fit_end).map(|n| (n as f64, values[n])).collect();
    let fit = fit_exponential_rate(&pts).ok();
    Ok(CorrelationSeries {
        m,
        m_prime,
        self_overlap: values[0],
        values,
        per_realization: per,
        realizations,
        normalization: NORMALIZATION.to_string(),
        rate: fit.map(|f| f.0),
        r_squared: fit.map(|f| f.1),
        fit_end,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n0_values() {
        let g = GridSpec::new(32, true).unwrap();
        let s = RngStreamSpec::new(1, 0);
        let a = correlation_decay(4.0, (1, 0), (-1, 0), 0, 1, g, s).unwrap();
        assert_eq!(a.values, vec![1.0]);
        let b = correlation_decay(4.0, (1, 0), (2, 1), 0, 1, g, s).unwrap();
        assert!(b.values[0] < 1e-12);
        assert!(correlation_decay(4.0, (0, 0), (1, 0), 3, 1, g, s).is_err());
    }

    #[test]
    fn routes_agree() {
        for d in [true, false] {
            let g = GridSpec::new(64, d).unwrap();
            let sp = ShearPair::chirikov(1.5);
            let ph = sample_phases(RngStreamSpec::new(9, 3), 4);
            let a = correlation_path(sp, (1, 0), (1, 1), &ph, g).unwrap();
            let b = correlation_pullback(sp, (1, 0), (1, 1), &ph, g).unwrap();
            assert!((a[4] - b).norm() < 1e-12, "{} {}", a[4], b);
        }
    }
}
