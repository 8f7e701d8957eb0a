//! Exponential rate by least squares in log space.

use crate::error::{invalid, Error, Result};
use crate::stats::linear_fit;

/// Fits log value = a − rate·n; returns (rate, r²).
pub fn fit_exponential_rate(series: &[(f64, f64)]) -> Result<(f64, f64)> {
    if series.len() < 5 {
        return Err(invalid("series", format!("need at least 5 points, got {}", series.len())));
    }
    for (i, &(_, v)) in series.iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositive { index: i, value: v });
        }
    }
    let n: Vec<f64> = series.iter().map(|s| s.0).collect();
    let l: Vec<f64> = series.iter().map(|s| s.1.ln()).collect();
    let (_, slope, r2) = linear_fit(&n, &l);
    Ok((-slope, r2))
}
