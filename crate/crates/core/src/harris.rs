//! Explicit constants of the quantitative Harris pipeline and the headline
//! K-dependent rates, with doubly exponential quantities kept as nested logs.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftParams {
    pub gamma: f64,
    pub c: f64,
    pub m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinorizationParams {
    pub alpha: f64,
    pub r: f64,
    pub m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarrisOutput {
    pub beta: f64,
    pub alpha_bar: f64,
    pub gamma0: f64,
    pub alpha0: f64,
    /// which branch of the max attained ᾱ
    pub second_branch: bool,
}

/// β = α₀/C and ᾱ = max(1 + α₀ − α, (2 + Rβγ₀)/(2 + Rβ)).
pub fn harris_constants(d: DriftParams, mn: MinorizationParams, alpha0: f64, gamma0: f64) -> Result<HarrisOutput> {
    if !(d.gamma > 0.0 && d.gamma < 1.0) {
        return Err(invalid("gamma", "requires 0 < gamma < 1"));
    }
    if !(d.c > 0.0) {
        return Err(invalid("C", "requires C > 0 (beta = alpha0 / C)"));
    }
    if !(mn.alpha > 0.0 && mn.alpha < 1.0) {
        return Err(invalid("alpha", "requires 0 < alpha < 1"));
    }
    let r_min = 2.0 * d.c / (1.0 - d.gamma);
    if !(mn.r > r_min) {
        return Err(invalid("R", format!("requires R > 2C/(1-gamma) = {r_min}")));
    }
    if !(alpha0 > 0.0 && alpha0 < mn.alpha) {
        return Err(invalid("alpha0", "requires 0 < alpha0 < alpha"));
    }
    let g_min = d.gamma + 2.0 * d.c / mn.r;
    if !(gamma0 > g_min && gamma0 < 1.0) {
        return Err(invalid("gamma0", format!("requires gamma + 2C/R = {g_min} < gamma0 < 1")));
    }
    let beta = alpha0 / d.c;
    let first = 1.0 + alpha0 - mn.alpha;
    let second = (2.0 + mn.r * beta * gamma0) / (2.0 + mn.r * beta);
    let alpha_bar = first.max(second);
    debug_assert!(alpha_bar < 1.0);
    Ok(HarrisOutput {
        beta,
        alpha_bar,
        gamma0,
        alpha0,
        second_branch: second >= first,
    })
}

/// l₀ = 4(1 + 1/(1 − 2^{p−1}))
pub fn l0(p: f64) -> f64 {
    4.0 * (1.0 + 1.0 / (1.0 - 2f64.powf(p - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinedContraction {
    pub r2: f64,
    pub beta: f64,
    pub gamma0: f64,
    /// (2 + βR₂γ₀)/(2 + βR₂)
    pub value: f64,
    /// 1 − α/(4(1 + α/(1 − γᵏ)))
    pub closed_form: f64,
}

/// The choice R₂ = 4C₃/(1−γ), γ₀ = (3 + γᵏ)/4, β = α/(2L_M) for the M-step kernel.
pub fn refined_contraction(alpha: f64, gamma: f64, k: u32, c3: f64) -> Result<RefinedContraction> {
    if !(alpha > 0.0 && alpha < 1.0) || !(gamma > 0.0 && gamma < 1.0) || k == 0 || !(c3 > 0.0) {
        return Err(invalid("refinement", "requires alpha, gamma in (0,1), k >= 1, C3 > 0"));
    }
    let gk = gamma.powi(k as i32);
    let r2 = 4.0 * c3 / (1.0 - gamma);
    let lm = c3 * (1.0 - gk) / (1.0 - gamma);
    let beta = alpha / (2.0 * lm);
    let gamma0 = (3.0 + gk) / 4.0;
    Ok(RefinedContraction {
        r2,
        beta,
        gamma0,
        value: (2.0 + beta * r2 * gamma0) / (2.0 + beta * r2),
        closed_form: 1.0 - alpha / (4.0 * (1.0 + alpha / (1.0 - gk))),
    })
}

/// Dimension of the phase space of the one-point motion.
pub const DIM: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionRate {
    pub gamma: f64,
    pub l0: f64,
    pub tau: f64,
    /// 2^{k+1} C₁^{(d−1)p}
    pub prefactor: f64,
    /// τ²/l₀
    pub per_step_exponent: f64,
}

pub fn criterion_rate(m: usize, k: usize, p: f64, gamma_prime: f64, c1: f64, c2_small: f64) -> Result<CriterionRate> {
    if m == 0 || k == 0 {
        return Err(invalid("m", "m and k must be >= 1"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("p", "requires 0 < p < 1"));
    }
    if !(gamma_prime > 0.0 && gamma_prime < 0.5) {
        return Err(invalid("gamma_prime", "requires 0 < gamma' < 1/2"));
    }
    if !(c1 > 0.0) || !(c2_small > 0.0) {
        return Err(invalid("C", "C1 and C2 must be positive"));
    }
    let gamma = 2f64.powf(p) * gamma_prime;
    if gamma >= 1.0 {
        return Err(invalid("gamma", "2^p gamma' must be < 1"));
    }
    let l = l0(p);
    let tau = c2_small.min(1.0 / (m * k) as f64);
    Ok(CriterionRate {
        gamma,
        l0: l,
        tau,
        prefactor: 2f64.powi(k as i32 + 1) * c1.powf((DIM - 1) as f64 * p),
        per_step_exponent: tau * tau / l,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingRate {
    pub zeta: f64,
    pub rate: f64,
    pub l0: f64,
}

/// ζ = (τ²/2l₀)·min{1/(2(1+q)), 1/(5d/2+3)} and the correlation rate 2ζ/(d+4).
pub fn mixing_rate_from_tau(tau: f64, q: f64, d: u32, p: f64) -> Result<MixingRate> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(invalid("tau", "requires 0 < tau <= 1"));
    }
    if !(q > 0.0) {
        return Err(invalid("q", "requires q > 0"));
    }
    if d < 2 {
        return Err(invalid("d", "requires d >= 2"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("p", "requires 0 < p < 1"));
    }
    let l = l0(p);
    let df = d as f64;
    let zeta = tau * tau / (2.0 * l) * (1.0 / (2.0 * (1.0 + q))).min(1.0 / (2.5 * df + 3.0));
    Ok(MixingRate {
        zeta,
        rate: 2.0 * zeta / (df + 4.0),
        l0: l,
    })
}

/// A positive quantity stored through its logarithms. When the value is
/// doubly exponentially small, `log10_value` is −∞ and only
/// `log10_neg_log10` = log₁₀(−log₁₀ value) is meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRate {
    pub log10_value: f64,
    pub log10_neg_log10: Option<f64>,
    pub description: String,
}

impl LogRate {
    fn plain(v: f64, description: &str) -> Self {
        LogRate {
            log10_value: v,
            log10_neg_log10: if v < 0.0 { Some((-v).log10()) } else { None },
            description: description.into(),
        }
    }

    /// From ν = log₁₀(−log₁₀ value).
    fn nested(nu: f64, description: &str) -> Self {
        let v = -(10f64.powf(nu));
        LogRate {
            log10_value: if v.is_finite() { v } else { f64::NEG_INFINITY },
            log10_neg_log10: Some(nu),
            description: description.into(),
        }
    }
}

/// log₁₀(10^a + 10^b)
pub fn log10_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (10f64.powf(lo - hi)).ln_1p() / std::f64::consts::LN_10
}

/// Unnamed constants of the rate pipeline; all default to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsTable {
    /// exponent prefactor C in p_K = K^{−C K²⁶⁴}
    pub c_reach: f64,
    /// C₁ in the radius C₁K⁻¹³² of the reachability target
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// C₁ of the headline rate C₁/(1+q)·e^{−K²⁶⁵}
    pub c_rate: f64,
    /// C₂ of the moment bound C₂Kᵖ
    pub c_moment: f64,
    /// separation scale s
    pub s: f64,
}

impl Default for ConstantsTable {
    fn default() -> Self {
        ConstantsTable {
            c_reach: 1.0,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            c_rate: 1.0,
            c_moment: 1.0,
            s: 1.0,
        }
    }
}

impl ConstantsTable {
    pub fn validate(&self) -> Result<()> {
        for (n, v) in [
            ("c_reach", self.c_reach),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("c4", self.c4),
            ("c_rate", self.c_rate),
            ("c_moment", self.c_moment),
            ("s", self.s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(n, "constants must be positive and finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformTime {
    /// exact M when it fits in 2⁵³
    pub exact: Option<u64>,
    pub log10: f64,
}

/// M = inf{2k : 2k ≥ ⌊π/(K^{−e_s}s)⌋ + ⌊12π/(C₁K^{−e_r})⌋ + 8}.
pub fn uniform_time(k: f64, s: f64, c1: f64, e_s: f64, e_r: f64) -> UniformTime {
    let a = PI / (k.powf(-e_s) * s);
    let b = 12.0 * PI / (c1 * k.powf(-e_r));
    let total = a.floor() + b.floor() + 8.0;
    if total.is_finite() && total < 9_007_199_254_740_992.0 {
        let t = total as u64;
        let m = t + (t & 1);
        UniformTime {
            exact: Some(m),
            log10: (m as f64).log10(),
        }
    } else {
        // floors and the parity round-up are below f64 resolution here
        let la = PI.log10() + e_s * k.log10() - s.log10();
        let lb = (12.0 * PI).log10() + e_r * k.log10() - c1.log10();
        UniformTime {
            exact: None,
            log10: log10_add(la, lb),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadlineRates {
    pub k: f64,
    pub q: f64,
    pub p: f64,
    pub m: UniformTime,
    pub p_k: LogRate,
    pub c1_power: LogRate,
    pub minorization_mass: LogRate,
    pub per_step_rate: LogRate,
    pub moment_bound: LogRate,
    pub constants: ConstantsTable,
}

pub fn chirikov_headline_rates(k: f64, q: f64, p: f64, c: &ConstantsTable) -> Result<HeadlineRates> {
    if !(k > 1.0 && k.is_finite()) {
        return Err(invalid("K", "requires K > 1"));
    }
    if !(q > 0.0) {
        return Err(invalid("q", "requires q > 0"));
    }
    if !(p > 0.0 && p < 0.5) {
        return Err(invalid("p", "requires 0 < p < 1/2"));
    }
    c.validate()?;
    let lk = k.log10();
    let m = uniform_time(k, c.s, c.c1, 9.0, 132.0);

    // −log₁₀ p_K = C·K²⁶⁴·log₁₀K
    let nu_pk = c.c_reach.log10() + 264.0 * lk + lk.log10();
    let p_k = LogRate::nested(nu_pk, "p_K = K^(-C K^264)");

    // c₁(K)^{⌊M/4⌋−1}, −log₁₀ c₁ = 764 log₁₀K − log₁₀C₃
    let neg_log_c1 = 764.0 * lk - c.c3.log10();
    let c1_power = match m.exact {
        Some(mm) => {
            let e = (mm / 4) as f64 - 1.0;
            LogRate::plain(-e * neg_log_c1, "c1(K)^(floor(M/4)-1)")
        }
        None => {
            // ⌊M/4⌋ − 1 ≈ M/4 at this size
            let nu = m.log10 - 4f64.log10() + neg_log_c1.log10();
            LogRate::nested(nu, "c1(K)^(floor(M/4)-1)")
        }
    };

    // polynomial factors: C₂K⁻⁷⁸⁰ · K⁻²⁸⁸ · Leb B(z_*, C₄K⁻⁵⁵) in ℝ⁴, volume (π²/2)r⁴
    let poly = c.c2.log10() - 780.0 * lk - 288.0 * lk + (PI * PI / 2.0).log10() + 4.0 * (c.c4.log10() - 55.0 * lk);
    let neg_c1p = c1_power.log10_neg_log10.unwrap_or(f64::NEG_INFINITY);
    let mut nu = log10_add(nu_pk, neg_c1p);
    if poly < 0.0 {
        nu = log10_add(nu, (-poly).log10());
    } else if poly > 0.0 {
        // a positive polynomial factor only lowers −log₁₀ mass
        let big = 10f64.powf(nu);
        nu = if big.is_finite() { (big - poly).log10() } else { nu };
    }
    let minorization_mass = LogRate::nested(nu, "alpha = p_K c1^(floor(M/4)-1) C2 K^-780 mu(B)");

    // −log₁₀ rate = K²⁶⁵·log₁₀e − log₁₀(C/(1+q))
    let pre = (c.c_rate / (1.0 + q)).log10();
    let head = 265.0 * lk + E.log10().log10();
    let big = 10f64.powf(head);
    let nu_rate = if big.is_finite() && big < 1e15 { (big - pre).log10() } else { head };
    let per_step_rate = LogRate::nested(nu_rate, "C/(1+q) e^(-K^265) per step");

    let moment_bound = LogRate::plain(c.c_moment.log10() + p * lk, "E[D^q] <= C2 K^p");
    Ok(HeadlineRates {
        k,
        q,
        p,
        m,
        p_k,
        c1_power,
        minorization_mass,
        per_step_rate,
        moment_bound,
        constants: *c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_worked_example() {
        let h = harris_constants(
            DriftParams { gamma: 0.5, c: 1.0, m: 2 },
            MinorizationParams { alpha: 0.5, r: 8.0, m: 4 },
            0.25,
            0.8,
        )
        .unwrap();
        assert!((h.beta - 0.25).abs() < 1e-12);
        assert!((h.alpha_bar - 0.9).abs() < 1e-12);
        assert!(h.second_branch);
    }

    #[test]
    fn violations_are_named() {
        let d = DriftParams { gamma: 0.5, c: 1.0, m: 2 };
        let e = harris_constants(d, MinorizationParams { alpha: 0.5, r: 3.0, m: 4 }, 0.25, 0.9).unwrap_err();
        assert!(e.to_string().contains("R"));
        let e = harris_constants(d, MinorizationParams { alpha: 0.5, r: 8.0, m: 4 }, 0.25, 0.7).unwrap_err();
        assert!(e.to_string().contains("gamma0"));
    }

    #[test]
    fn alpha_bar_below_one_on_sweep_and_monotone_in_r() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let gamma: f64 = rng.gen_range(0.01..0.99);
            let c: f64 = rng.gen_range(0.01..10.0);
            let alpha: f64 = rng.gen_range(0.01..0.99);
            let r = 2.0 * c / (1.0 - gamma) * rng.gen_range(1.001..10.0);
            let a0 = alpha * rng.gen_range(0.01..0.99);
            let lo = gamma + 2.0 * c / r;
            let g0 = lo + (1.0 - lo) * rng.gen_range(0.01..0.99);
            let h = harris_constants(DriftParams { gamma, c, m: 1 }, MinorizationParams { alpha, r, m: 1 }, a0, g0).unwrap();
            assert!(h.alpha_bar < 1.0);
        }
        let d = DriftParams { gamma: 0.5, c: 1.0, m: 2 };
        let second = |r: f64| {
            let b = 0.25;
            (2.0 + r * b * 0.8) / (2.0 + r * b)
        };
        let mut prev = 1.0;
        for r in [8.0, 10.0, 20.0, 50.0] {
            let h = harris_constants(d, MinorizationParams { alpha: 0.5, r, m: 4 }, 0.25, 0.8).unwrap();
            assert!(second(r) < prev);
            prev = second(r);
            assert!(h.alpha_bar <= 0.9 + 1e-15);
        }
    }

    #[test]
    fn refinement_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let p: f64 = rng.gen_range(0.05..0.45);
            let gamma = 2f64.powf(p - 1.0) * rng.gen_range(0.01..0.999);
            let alpha: f64 = rng.gen_range(1e-6..0.999);
            let k = rng.gen_range(1..40);
            let r = refined_contraction(alpha, gamma, k, rng.gen_range(0.1..10.0)).unwrap();
            assert!((r.value - r.closed_form).abs() < 1e-12);
            assert!(1.0 - alpha / 2.0 < r.value && r.value < 1.0 - alpha / l0(p));
        }
    }

    #[test]
    fn criterion_examples() {
        let c = criterion_rate(2, 5, 0.25, 0.4, 1.0, 0.1).unwrap();
        assert!((c.gamma - 2f64.powf(0.25) * 0.4).abs() < 1e-15);
        assert!((c.gamma - 0.4757).abs() < 1e-4);
        // 4(1 + 1/(1 − 2^−0.75)) = 13.86688...
        assert!((c.l0 - 13.866_885).abs() < 1e-6);
        assert_eq!(c.tau, 0.1);
        assert!(criterion_rate(2, 5, 0.25, 0.5, 1.0, 0.1).is_err());
        let c = criterion_rate(1, 2, 0.25, 0.4, 1.0, 0.9).unwrap();
        assert_eq!(c.tau, 0.5);
    }

    #[test]
    fn mixing_rate_examples() {
        let m = mixing_rate_from_tau(0.1, 1.0, 2, 0.25).unwrap();
        assert!((m.zeta - 0.01 / (2.0 * 13.866_884_808_722_572) / 8.0).abs() < 1e-15, "{m:?}");
        assert!((m.rate - 1.502_380_2e-5).abs() < 1e-12);
        let m2 = mixing_rate_from_tau(0.2, 1.0, 2, 0.25).unwrap();
        assert!((m2.rate / m.rate - 4.0).abs() < 1e-12);
        let q2 = mixing_rate_from_tau(0.1, 9.0, 2, 0.25).unwrap();
        assert!(q2.rate < m.rate);
    }

    #[test]
    fn uniform_time_examples() {
        let t = uniform_time(2.0, 1.0, 1.0, 1.0, 1.0);
        // ⌊2π⌋ + ⌊24π⌋ + 8 = 6 + 75 + 8 = 89 → 90
        assert_eq!(t.exact, Some(90));
        let big = uniform_time(10.0, 1.0, 1.0, 9.0, 132.0);
        assert!(big.exact.is_none());
        assert!((big.log10 - (132.0 + (12.0 * PI).log10())).abs() < 1e-12);
    }

    #[test]
    fn headline_nested_logs() {
        let c = ConstantsTable::default();
        for k in [10.0f64, 100.0] {
            let h = chirikov_headline_rates(k, 1.0, 0.25, &c).unwrap();
            let want = 264.0 * k.log10() + k.log10().log10();
            assert!((h.p_k.log10_neg_log10.unwrap() - want).abs() < 1e-9);
        }
        let h = chirikov_headline_rates(10.0, 1.0, 0.25, &c).unwrap();
        assert_eq!(h.p_k.log10_value, -1e264);
        let h = chirikov_headline_rates(100.0, 1.0, 0.25, &c).unwrap();
        assert!((h.moment_bound.log10_value - 0.5).abs() < 1e-15);
        assert_eq!(h.p_k.log10_value, f64::NEG_INFINITY);
        let a = h.minorization_mass.log10_neg_log10.unwrap();
        assert!(a >= h.p_k.log10_neg_log10.unwrap());
    }
}
