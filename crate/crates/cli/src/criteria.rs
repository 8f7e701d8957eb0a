//! The acceptance battery: one self-contained check per criterion.
//! `quick` shrinks sample counts and time series; every outcome records
//! the sizes it actually used.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::time::Instant;

use chirikov::control::{projective_replay, projective_steer, two_point_reach, ControlResult};
use chirikov::estimators::{
    apriori::apriori_bound_check_with, claim_constant_probe, contraction_estimate_with, correlation::correlation_pullback, drift::drift_check_with, drift_v,
    lyapunov::lyapunov_exponent_with, quad::ratio_grid, singular_cos_integral, McConfig,
};
use chirikov::harris::{chirikov_headline_rates, harris_constants, ConstantsTable, DriftParams, MinorizationParams};
use chirikov::rds::{sample_phases, two_point_endpoint, uniform_angle, RngStreamSpec, TwoPointState};
use chirikov::structure::{det_xi_phi8, lyapunov_surjectivity, one_point_submersion, projective_submersion, rank_of_rows, two_point_submersion, RANK_TOL};
use chirikov::torus::{chirikov_inverse, chirikov_step, jacobian, torus_dist, wrap_signed, PhasePair, Profile as Shape, ShearPair, TorusPoint};
use chirikov::transport::{
    bare_half_life_periods, enstrophy_tail_fraction, run_realization_field, DecayExperiment, GridSpec, InitialField, NormSpec, SpectralField, Transport,
};
use num_complex::Complex64 as C;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::commands::{random_pair, random_projective};
use crate::config::Profile;
use crate::output::Context;
use crate::CliError;

pub const TITLES: [&str; 14] = [
    "volume preservation and round trip",
    "determinant at z*",
    "submersion and surjectivity ranks",
    "uniform contraction",
    "claim integral",
    "drift inequality",
    "controllability",
    "mixing decay",
    "enhanced dissipation",
    "Harris and rate arithmetic",
    "Lyapunov exponent",
    "shear-solver exactness",
    "Pierrehumbert contraction",
    "a priori bounds",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: usize,
    pub title: String,
    pub pass: bool,
    pub detail: String,
    pub wall_time_seconds: f64,
    pub table: Value,
}

/// Problem sizes per profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sizes {
    pub roundtrip_trials: u64,
    pub contraction_grid: usize,
    pub contraction_samples: u64,
    pub quad_cases: usize,
    pub quad_points: usize,
    pub drift_samples: u64,
    pub control_trials: usize,
    pub mix_grid: usize,
    pub mix_steps: usize,
    pub mix_realizations: usize,
    pub dissipate_grid_1e4: usize,
    pub dissipate_grid_1e5: usize,
    pub dissipate_steps: usize,
    pub lyap_steps: u64,
    pub lyap_orbits: u64,
    pub pierre_grid: usize,
    pub pierre_samples: u64,
    pub apriori_points: u64,
}

impl Sizes {
    pub fn of(p: Profile) -> Self {
        match p {
            Profile::Full => Sizes {
                roundtrip_trials: 1_000_000,
                contraction_grid: 32,
                contraction_samples: 1_000_000,
                quad_cases: 100,
                quad_points: 10_000_000,
                drift_samples: 1_000_000,
                control_trials: 100,
                mix_grid: 256,
                mix_steps: 200,
                mix_realizations: 10,
                dissipate_grid_1e4: 1024,
                dissipate_grid_1e5: 4096,
                dissipate_steps: 200,
                lyap_steps: 1_000_000,
                lyap_orbits: 64,
                pierre_grid: 32,
                pierre_samples: 1_000_000,
                apriori_points: 64,
            },
            Profile::Quick => Sizes {
                roundtrip_trials: 100_000,
                contraction_grid: 16,
                contraction_samples: 20_000,
                quad_cases: 20,
                quad_points: 1_000_000,
                drift_samples: 100_000,
                control_trials: 100,
                mix_grid: 128,
                mix_steps: 50,
                mix_realizations: 4,
                dissipate_grid_1e4: 1024,
                dissipate_grid_1e5: 2048,
                dissipate_steps: 50,
                lyap_steps: 100_000,
                lyap_orbits: 16,
                pierre_grid: 16,
                pierre_samples: 20_000,
                apriori_points: 16,
            },
        }
    }
}

type Check = Result<(bool, String, Value), CliError>;

pub fn run_one(id: usize, sz: &Sizes, seed: u64) -> Outcome {
    let t = Instant::now();
    let r: Check = match id {
        1 => c01_roundtrip(sz, seed),
        2 => c02_dets(),
        3 => c03_ranks(),
        4 => c04_contraction(sz, seed),
        5 => c05_quadrature(sz, seed),
        6 => c06_drift(sz, seed),
        7 => c07_control(sz, seed),
        8 => c08_mixing(sz, seed),
        9 => c09_dissipation(sz, seed),
        10 => c10_rates(),
        11 => c11_lyapunov(sz, seed),
        12 => c12_shears(),
        13 => c13_pierrehumbert(sz, seed),
        14 => c14_apriori(sz, seed),
        _ => Err(CliError::Config(format!("no criterion {id}"))),
    };
    let (pass, detail, table) = r.unwrap_or_else(|e| (false, format!("error: {e}"), Value::Null));
    Outcome {
        id,
        title: TITLES.get(id.wrapping_sub(1)).copied().unwrap_or("?").to_string(),
        pass,
        detail,
        wall_time_seconds: t.elapsed().as_secs_f64(),
        table,
    }
}

/// Runs every criterion, writes one JSON table each plus a summary, and records checks.
pub fn suite(ctx: &mut Context) -> Result<(), CliError> {
    let profile = ctx.cfg.profile.unwrap_or(Profile::Quick);
    let sz = Sizes::of(profile);
    let seed = ctx.cfg.seed();
    let mut all = vec![];
    for id in 1..=TITLES.len() {
        let o = run_one(id, &sz, seed);
        ctx.check(format!("criterion_{id:02}"), o.pass, format!("{}: {}", o.title, o.detail));
        ctx.write_json(&format!("criterion_{id:02}.json"), &o)?;
        all.push(json!({"id": o.id, "title": o.title, "pass": o.pass, "wall_time_seconds": o.wall_time_seconds}));
    }
    ctx.write_json("suite.json", &json!({"profile": profile, "seed": seed, "sizes": sz, "criteria": all}))?;
    Ok(())
}

fn ks3() -> [f64; 3] {
    [10.0, 4.0 * PI, 100.0]
}

fn c01_roundtrip(sz: &Sizes, seed: u64) -> Check {
    let mut rng = RngStreamSpec::new(seed, 101).rng();
    let (mut det_err, mut trip_err) = (0.0f64, 0.0f64);
    for i in 0..sz.roundtrip_trials {
        let k = if i % 2 == 0 { 4.0 * PI } else { 100.0 };
        let x = TorusPoint::new(uniform_angle(&mut rng), uniform_angle(&mut rng));
        let w = PhasePair::new(uniform_angle(&mut rng), uniform_angle(&mut rng));
        det_err = det_err.max((jacobian(x, w, k).det() - 1.0).abs());
        trip_err = trip_err.max(torus_dist(chirikov_inverse(chirikov_step(x, w, k), w, k), x));
    }
    let pass = det_err <= 1e-12 && trip_err <= 1e-12;
    Ok((
        pass,
        format!("{} trials, max |det-1| = {det_err:.2e}, max round-trip distance = {trip_err:.2e}", sz.roundtrip_trials),
        json!({"trials": sz.roundtrip_trials, "max_det_error": det_err, "max_roundtrip_distance": trip_err}),
    ))
}

fn c02_dets() -> Check {
    let mut rows = vec![];
    let mut pass = true;
    for k in ks3() {
        let d = det_xi_phi8(k)?;
        pass &= d.rel_error <= 1e-6 && d.fd_rel_error <= 1e-5;
        rows.push(json!({"K": k, "report": d}));
    }
    let worst = |key: &str| rows.iter().map(|r| r["report"][key].as_f64().unwrap_or(f64::NAN)).fold(0.0, f64::max);
    Ok((
        pass,
        format!("chain-rule rel error <= {:.2e}, finite-difference rel error <= {:.2e}", worst("rel_error"), worst("fd_rel_error")),
        json!(rows),
    ))
}

fn mat(rows: &[&[f64]]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r.to_vec()).collect()
}

/// Closed-form Jacobians at the chosen base points, used as references.
pub fn reference_one_point(k: f64) -> Vec<Vec<f64>> {
    mat(&[&[-k, 0.0], &[-k, -1.0]])
}

pub fn reference_projective(k: f64) -> Vec<Vec<f64>> {
    let s = 5.0 * 5f64.sqrt();
    mat(&[
        &[-k, 0.0, 0.0, 0.0],
        &[-2.0 * k, -1.0, 0.0, -1.0],
        &[-2.0 * k * k / s, -2.0 * k / s, -2.0 * k / s, 0.0],
        &[k * k / s, k / s, k / s, 0.0],
    ])
}

pub fn reference_two_point(k: f64) -> Vec<Vec<f64>> {
    let k2 = k * k;
    mat(&[
        &[-k * (k2 + 3.0 * k + 1.0), -k * (k + 2.0), -k * (k + 1.0), -k, -k, 0.0],
        &[-k * (k2 + 4.0 * k + 3.0), -k2 - 3.0 * k - 1.0, -k * (k + 2.0), -k - 1.0, -k, -1.0],
        &[-k * (k2 + k - 1.0), k2, (k - 1.0) * k, k, k, 0.0],
        &[-k * (k2 - 3.0), k2 - k - 1.0, (k - 2.0) * k, k - 1.0, k, -1.0],
    ])
}

pub fn reference_position(k: f64) -> Vec<Vec<f64>> {
    mat(&[&[k, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], &[4.0 * k, -1.0, 0.0, -1.0, 0.0, -1.0, 0.0, -1.0]])
}

pub fn reference_kernel() -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; 6]; 8];
    m[1][1] = -1.0;
    m[1][3] = -1.0;
    m[1][5] = -1.0;
    for j in 0..6 {
        m[j + 2][j] = 1.0;
    }
    m
}

pub fn reference_cocycle(k: f64) -> Vec<Vec<f64>> {
    let k2 = k * k;
    mat(&[
        &[-14.0 * k2, 6.0 * k, k, 5.0 * k, 2.0 * k, 3.0 * k, 3.0 * k, 0.0],
        &[
            2.0 * k2 * (7.0 * k - 3.0),
            3.0 * k * (1.0 - 2.0 * k),
            k * (1.0 - k),
            k * (2.0 - 5.0 * k),
            k * (1.0 - 2.0 * k),
            k * (1.0 - 3.0 * k),
            k * (1.0 - 3.0 * k),
            0.0,
        ],
        &[-20.0 * k2, 10.0 * k, 3.0 * k, 7.0 * k, 4.0 * k, 3.0 * k, 3.0 * k, 0.0],
        &[
            10.0 * k2 * (2.0 * k - 1.0),
            2.0 * k * (3.0 - 5.0 * k),
            3.0 * k * (1.0 - k),
            k * (3.0 - 7.0 * k),
            2.0 * k * (1.0 - 2.0 * k),
            k * (1.0 - 3.0 * k),
            k * (1.0 - 3.0 * k),
            0.0,
        ],
    ])
}

pub fn reference_cocycle_on_kernel(k: f64) -> Vec<Vec<f64>> {
    mat(&[
        &[k, -k, 2.0 * k, -3.0 * k, 3.0 * k, -6.0 * k],
        &[k * (1.0 - k), k * (k - 1.0), k * (1.0 - 2.0 * k), k * (3.0 * k - 2.0), k * (1.0 - 3.0 * k), 3.0 * k * (2.0 * k - 1.0)],
        &[3.0 * k, -3.0 * k, 4.0 * k, -7.0 * k, 3.0 * k, -10.0 * k],
        &[3.0 * k * (1.0 - k), 3.0 * k * (k - 1.0), 2.0 * k * (1.0 - 2.0 * k), k * (7.0 * k - 5.0), k * (1.0 - 3.0 * k), 2.0 * k * (5.0 * k - 3.0)],
    ])
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter().map(|r| (0..b[0].len()).map(|j| r.iter().zip(b).map(|(x, row)| x * row[j]).sum()).collect()).collect()
}

/// Largest entrywise |a − b| / max(|b|, 1).
pub fn entry_rel_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs() / v.abs().max(1.0)))
        .fold(0.0, f64::max)
}

fn c03_ranks() -> Check {
    let mut pass = true;
    let mut rows = vec![];
    let mut worst_diff = 0.0f64;
    let mut ranks_seen = vec![];
    for k in ks3() {
        let one = one_point_submersion(k)?;
        let proj = projective_submersion(k)?;
        let two = two_point_submersion(k)?;
        let sur = lyapunov_surjectivity(k)?;
        let mk = matmul(&sur.cocycle.matrix, &reference_kernel());
        let diffs = [
            ("one_point", entry_rel_diff(&one.matrix, &reference_one_point(k))),
            ("projective", entry_rel_diff(&proj.matrix, &reference_projective(k))),
            ("two_point", entry_rel_diff(&two.matrix, &reference_two_point(k))),
            ("position", entry_rel_diff(&sur.position.matrix, &reference_position(k))),
            ("cocycle", entry_rel_diff(&sur.cocycle.matrix, &reference_cocycle(k))),
            ("cocycle_on_kernel", entry_rel_diff(&mk, &reference_cocycle_on_kernel(k))),
        ];
        let ref_mk_rank = rank_of_rows(&reference_cocycle_on_kernel(k), RANK_TOL);
        let ranks = [
            one.rank_at_tol == 2,
            proj.rank_at_tol == 3,
            two.rank_at_tol == 4,
            sur.position.rank_at_tol == 2,
            sur.restricted.rank_at_tol == 3,
            ref_mk_rank == 3,
            sur.kernel_residual <= 1e-8 * k,
        ];
        pass &= ranks.iter().all(|&b| b) && diffs.iter().all(|d| d.1 <= 1e-6);
        worst_diff = diffs.iter().map(|d| d.1).fold(worst_diff, f64::max);
        ranks_seen.push((one.rank_at_tol, proj.rank_at_tol, two.rank_at_tol, sur.position.rank_at_tol, sur.restricted.rank_at_tol, ref_mk_rank));
        rows.push(json!({"K": k, "ranks": ranks, "entry_rel_diff": diffs.iter().map(|(n, d)| json!({"matrix": n, "max_rel_diff": d})).collect::<Vec<_>>(),
                         "one_point": one, "projective": proj, "two_point": two, "lyapunov": sur}));
    }
    Ok((
        pass,
        format!("ranks (one, proj, two, position, restricted, MK) = {ranks_seen:?}; worst entrywise deviation from closed forms {worst_diff:.2e}"),
        json!(rows),
    ))
}

fn sweep_consistency(est: &[(f64, f64)], p: f64) -> (bool, Vec<f64>) {
    // est: (parameter, worst-cell mean) with the middle entry as reference
    let (k0, e0) = est[1];
    let ratios: Vec<f64> = est.iter().map(|&(k, e)| (e / e0) / (k / k0).powf(-p)).collect();
    let decreasing = est.windows(2).all(|w| w[1].1 < w[0].1);
    (decreasing && ratios.iter().all(|r| (0.5..=2.0).contains(r)), ratios)
}

type Family = (Vec<(f64, f64)>, Vec<Value>);

fn contraction_family(sp_of: impl Fn(f64) -> ShearPair, m: usize, params: [f64; 3], grid: usize, samples: u64, seed: u64) -> Result<Family, CliError> {
    let cfg = McConfig::new(samples, seed, grid, grid);
    let mut est = vec![];
    let mut rows = vec![];
    for k in params {
        let r = contraction_estimate_with(sp_of(k), k, m, &[0.25], &cfg)?.remove(0);
        est.push((k, r.worst_estimate.mean));
        rows.push(json!({"param": k, "worst": r.worst_estimate, "worst_cell": r.worst_cell, "upper_5sigma": r.worst_estimate.upper(5.0)}));
    }
    Ok((est, rows))
}

fn c04_contraction(sz: &Sizes, seed: u64) -> Check {
    let (g, n) = (sz.contraction_grid, sz.contraction_samples);
    let cfg = McConfig::new(n, seed, g, g);
    let main = contraction_estimate_with(ShearPair::chirikov(100.0), 100.0, 2, &[0.25], &cfg)?.remove(0);
    let (est, rows) = contraction_family(ShearPair::chirikov, 2, [50.0, 100.0, 200.0], g, n, seed + 1)?;
    let (cons, ratios) = sweep_consistency(&est, 0.25);
    let w = main.worst_estimate;
    let pass = w.upper(5.0) < 0.5 && cons;
    Ok((
        pass,
        format!(
            "K=100 grid {g}x{g}, {n} samples: sup estimate {:.4} + 5σ = {:.4}; sweep {est:?} vs K^-p ratios {ratios:.3?}",
            w.mean,
            w.upper(5.0)
        ),
        json!({"grid": g, "samples": n, "K100": {"worst": w, "worst_cell": main.worst_cell}, "sweep": rows, "sweep_ratios": ratios}),
    ))
}

/// Midpoint rule after substituting t = root ± L·u^m at each root of a + b cos t,
/// which makes the integrand bounded; `n` points in total.
pub fn midpoint_oracle(a: f64, b: f64, p: f64, n: usize) -> f64 {
    let f = |t: f64| (a + b * t.cos()).abs().powf(-p);
    let r = -a / b;
    if r.abs() >= 1.0 && r.abs() != 1.0 {
        let h = TAU / n as f64;
        return (0..n).map(|i| f((i as f64 + 0.5) * h)).sum::<f64>() * h;
    }
    // roots and their multiplicity exponent
    let (roots, alpha) = if r.abs() == 1.0 {
        (vec![if r > 0.0 { 0.0 } else { PI }], 2.0 * p)
    } else {
        let t0 = r.acos();
        (vec![t0, TAU - t0], p)
    };
    let m = 1.0 / (1.0 - alpha);
    // split the circle at the midpoints between consecutive roots
    let nr = roots.len();
    let per = n / (2 * nr);
    let mut total = 0.0;
    for (i, &t0) in roots.iter().enumerate() {
        let next = if i + 1 < nr { roots[i + 1] } else { roots[0] + TAU };
        let prev = if i > 0 { roots[i - 1] } else { roots[nr - 1] - TAU };
        for len in [0.5 * (next - t0), -0.5 * (t0 - prev)] {
            let h = 1.0 / per as f64;
            let s: f64 = (0..per)
                .map(|j| {
                    let u = (j as f64 + 0.5) * h;
                    let um1 = u.powf(m - 1.0);
                    f(t0 + len * um1 * u) * m * um1
                })
                .sum();
            total += s * h * len.abs();
        }
    }
    total
}

fn c05_quadrature(sz: &Sizes, seed: u64) -> Check {
    let mut rng = RngStreamSpec::new(seed, 105).rng();
    let mut worst = 0.0f64;
    let mut rows = vec![];
    for _ in 0..sz.quad_cases {
        let a: f64 = rng.gen_range(-3.0..3.0);
        let b: f64 = rng.gen_range(0.1..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let v = singular_cos_integral(a, b, 0.25)?;
        let o = midpoint_oracle(a, b, 0.25, sz.quad_points);
        worst = worst.max((v - o).abs());
        rows.push(json!({"a": a, "b": b, "value": v, "oracle": o}));
    }
    let step = 0.01;
    let pr = claim_constant_probe(0.25, &ratio_grid(-3.0, 3.0, step))?;
    let at_one = (pr.argmax_ratio.abs() - 1.0).abs() <= step;
    let pass = worst <= 1e-6 && pr.c_p.is_finite() && at_one;
    Ok((
        pass,
        format!(
            "{} cases vs {}-point oracle: max abs diff {worst:.2e}; C_p = {:.6} at a/b = {}",
            sz.quad_cases, sz.quad_points, pr.c_p, pr.argmax_ratio
        ),
        json!({"cases": rows, "max_abs_diff": worst, "probe": pr}),
    ))
}

/// Crude two-point bound C₁^p·V(z), C₁ the measured first-derivative constant of the 4-step map.
fn crude_drift_factor(k: f64, p: f64, points: u64, seed: u64) -> Result<f64, CliError> {
    let cfg = McConfig::new(points, seed, 1, 1);
    let r = apriori_bound_check_with(2, &[0.1 * k, 0.3 * k, k], &cfg, ShearPair::chirikov)?;
    let c1 = r.rows.last().map(|row| row.first_z).unwrap_or(f64::NAN);
    Ok(c1.powf(p))
}

fn c06_drift(sz: &Sizes, seed: u64) -> Check {
    let (k, p) = (100.0, 0.25);
    let cfg = McConfig::new(sz.drift_samples, seed, 1, 1);
    let sp = ShearPair::chirikov(k);
    let mut pass = true;
    let mut rows = vec![];
    let mut parts = vec![];
    for s in [1e-3, 1e-2] {
        let z = TwoPointState::new(TorusPoint::new(1.0, 1.0), TorusPoint::new(1.0, 1.0 + s))?;
        let e = drift_check_with(sp, 2, p, &z, &cfg)?;
        let v = drift_v(&z, p);
        let (ratio, up) = (e.mean / v, e.upper(5.0) / v);
        pass &= up < 0.9;
        parts.push(format!("sep {s:e}: ratio {ratio:.4} (+5σ {up:.4})"));
        rows.push(json!({"separation": s, "ratio": ratio, "ratio_upper_5sigma": up, "estimate": e}));
    }
    let z = TwoPointState::new(TorusPoint::new(0.0, 0.0), TorusPoint::new(PI, PI))?;
    let e = drift_check_with(sp, 2, p, &z, &cfg)?;
    let crude = crude_drift_factor(k, p, 64, seed)? * drift_v(&z, p);
    pass &= e.mean.is_finite() && e.upper(5.0) <= crude;
    parts.push(format!("sep π: {:.4} (+5σ {:.4}) <= crude bound {crude:.4}", e.mean, e.upper(5.0)));
    rows.push(json!({"separation": "pi", "estimate": e, "crude_bound": crude}));
    Ok((pass, format!("{} samples; {}", sz.drift_samples, parts.join("; ")), json!(rows)))
}

fn step_budget(r: &ControlResult, sx: f64, st: f64) -> usize {
    let eps0 = r.eps0.unwrap_or(f64::INFINITY);
    4 * ((PI / sx).floor() as usize + (PI / st).floor() as usize + (12.0 * PI / eps0).floor() as usize + 8)
}

/// Worst |Δx₁ − 2√2π| over the dwell segment, for both points.
fn dwell_increment_error(sp: ShearPair, z: TwoPointState, r: &ControlResult) -> f64 {
    let head = r.stages.first().map(|s| s.1).unwrap_or(0);
    let nd = r.stages.get(1).map(|s| s.1).unwrap_or(0);
    let ph = &r.phases.phases;
    let mut cur = two_point_endpoint(sp, z, &ph[..head]);
    let mut worst = 0.0f64;
    for &w in &ph[head..head + nd] {
        let nx = sp.step(cur.x, w);
        let ny = sp.step(cur.y, w);
        for (a, b) in [(cur.x, nx), (cur.y, ny)] {
            worst = worst.max(wrap_signed(b.x1.value() - a.x1.value() - 2.0 * SQRT_2 * PI).abs());
        }
        cur = TwoPointState { x: nx, y: ny };
    }
    worst
}

fn c07_control(sz: &Sizes, seed: u64) -> Check {
    let (k, eps) = (4.0 * PI, 1e-2);
    let sp = ShearPair::chirikov(k);
    let mut rng = RngStreamSpec::new(seed, 107).rng();
    let n = sz.control_trials;
    let (mut ok, mut replay_ok, mut in_budget) = (0, 0, 0);
    let mut worst_inc = 0.0f64;
    let mut rows = vec![];
    for _ in 0..n {
        let (z, t) = (random_pair(&mut rng), random_pair(&mut rng));
        let r = two_point_reach(z, t, eps, k)?;
        let replay = two_point_endpoint(sp, z, &r.phases.phases).dist(&t);
        let budget = step_budget(&r, z.separation(), t.separation());
        ok += r.success as usize;
        replay_ok += (replay.to_bits() == r.final_distance.to_bits()) as usize;
        in_budget += (r.steps <= budget) as usize;
        worst_inc = worst_inc.max(dwell_increment_error(sp, z, &r));
        rows.push(json!({"steps": r.steps, "budget": budget, "final_distance": r.final_distance, "stages": r.stages, "eps0": r.eps0}));
    }
    let mut proj_ok = 0;
    let mut proj_rows = vec![];
    for _ in 0..n {
        let (a, b) = (random_projective(&mut rng)?, random_projective(&mut rng)?);
        let r = projective_steer(a, b, eps, k)?;
        let replay = projective_replay(k, a, &r.phases).dist(&b);
        proj_ok += (r.success && replay.to_bits() == r.final_distance.to_bits()) as usize;
        proj_rows.push(json!({"steps": r.steps, "final_distance": r.final_distance, "stages": r.stages}));
    }
    let pass = ok == n && replay_ok == n && in_budget == n && worst_inc <= 1e-10 && proj_ok * 100 >= 99 * n;
    Ok((
        pass,
        format!(
            "two-point {ok}/{n} succeed, {in_budget}/{n} within budget, {replay_ok}/{n} bitwise replay, dwell increment error {worst_inc:.2e}; projective {proj_ok}/{n}"
        ),
        json!({"K": k, "eps": eps, "two_point": rows, "projective": proj_rows, "max_dwell_increment_error": worst_inc}),
    ))
}

fn mix_config(grid: usize, dealias: bool, nu: f64, steps: usize, realizations: usize, seed: u64) -> Result<DecayExperiment, CliError> {
    Ok(DecayExperiment {
        model: ShearPair::chirikov(4.0 * PI),
        nu,
        steps,
        norm: NormSpec { s: 1.0, negative: true },
        realizations,
        stream: RngStreamSpec::new(seed, 108),
        grid: GridSpec::new(grid, dealias)?,
        substeps: 8,
        initial: InitialField::RealMode(1, 0),
        drop_fraction: 0.1,
    })
}

fn c08_mixing(sz: &Sizes, seed: u64) -> Check {
    let cfg = mix_config(sz.mix_grid, true, 0.0, sz.mix_steps, sz.mix_realizations, seed)?;
    let tr = Transport::new(cfg.grid);
    let sp = cfg.model;
    let mut rows = vec![];
    let mut all_fit = true;
    let mut worst_dual = 0.0f64;
    for r in 0..cfg.realizations {
        let ph = sample_phases(cfg.stream.substream(r as u64), cfg.steps);
        let (s, f) = run_realization_field(&cfg, &tr, r, &ph)?;
        let (rate, r2) = (s.rate.unwrap_or(f64::NAN), s.r_squared.unwrap_or(f64::NAN));
        all_fit &= rate > 0.0 && r2 >= 0.9;
        if r < 2 {
            let used = chirikov::rds::PhaseSequence::new(ph.phases[..s.norms.len() - 1].to_vec());
            for mp in [(1i64, 0i64), (0, 1), (2, -3)] {
                let dual = correlation_pullback(sp, (1, 0), mp, &used, cfg.grid)? + correlation_pullback(sp, (-1, 0), mp, &used, cfg.grid)?;
                worst_dual = worst_dual.max((f.get(-mp.0, -mp.1) - dual).norm());
            }
        }
        rows.push(json!({"realization": r, "rate": rate, "r_squared": r2, "periods": s.norms.len() - 1, "truncated": s.truncated, "max_leak": s.max_leak}));
    }
    let pass = all_fit && worst_dual <= 1e-9;
    let rates: Vec<f64> = rows.iter().map(|r| r["rate"].as_f64().unwrap_or(f64::NAN)).collect();
    let r2: Vec<f64> = rows.iter().map(|r| r["r_squared"].as_f64().unwrap_or(f64::NAN)).collect();
    Ok((
        pass,
        format!(
            "{} realizations x {} periods on {}^2: rates {:.3?}, min R^2 {:.4}; duality max diff {worst_dual:.2e}",
            cfg.realizations,
            cfg.steps,
            cfg.grid.n,
            rates,
            r2.iter().copied().fold(f64::INFINITY, f64::min)
        ),
        json!({"series": rows, "duality_max_abs_diff": worst_dual}),
    ))
}

/// L² half-life in periods with per-period spectral-tail monitoring.
#[derive(Debug, Clone, Serialize)]
pub struct HalfLife {
    pub grid: usize,
    /// first period with ‖ρ‖ ≤ ½‖ρ₀‖
    pub periods: Option<usize>,
    /// log-linear interpolation between the bracketing periods
    pub interpolated: Option<f64>,
    pub max_tail_fraction: f64,
    pub l2: Vec<f64>,
}

/// L² half-life of mode (1, 0) under the diffusive Chirikov flow on a collocation grid.
pub fn dissipation_half_life(k: f64, nu: f64, grid: usize, max_steps: usize, seed: u64) -> Result<HalfLife, CliError> {
    let g = GridSpec::new(grid, false)?;
    let tr = Transport::new(g);
    let sp = ShearPair::chirikov(k);
    let ph = sample_phases(RngStreamSpec::new(seed, 109), max_steps);
    let mut f = SpectralField::real_mode(g, 1, 0)?;
    let l0 = f.l2_norm();
    let mut out = HalfLife { grid, periods: None, interpolated: None, max_tail_fraction: 0.0, l2: vec![l0] };
    for (n, &w) in ph.iter().enumerate() {
        f = tr.step_period(&f, sp, w, nu, 8).0;
        out.max_tail_fraction = out.max_tail_fraction.max(enstrophy_tail_fraction(&f));
        let (prev, cur) = (out.l2[n], f.l2_norm());
        out.l2.push(cur);
        if cur <= 0.5 * l0 {
            out.periods = Some(n + 1);
            out.interpolated = Some(n as f64 + (prev / (0.5 * l0)).ln() / (prev / cur).ln());
            break;
        }
    }
    Ok(out)
}

/// Allowed relative change of the half-life under grid doubling.
pub const GRID_TOL: f64 = 0.02;

fn c09_dissipation(sz: &Sizes, seed: u64) -> Check {
    let k = 4.0 * PI;
    let mut rows = vec![];
    let mut pass = true;
    let mut speedups = vec![];
    let mut parts = vec![];
    for (nu, grid) in [(1e-4, sz.dissipate_grid_1e4), (1e-5, sz.dissipate_grid_1e5)] {
        let fine = dissipation_half_life(k, nu, grid, sz.dissipate_steps, seed)?;
        let coarse = dissipation_half_life(k, nu, grid / 2, sz.dissipate_steps, seed)?;
        let bare = bare_half_life_periods(nu, 1.0);
        let change = match (fine.interpolated, coarse.interpolated) {
            (Some(a), Some(b)) => (a - b).abs() / a,
            _ => f64::INFINITY,
        };
        let ratio = fine.interpolated.map(|h| h / bare);
        pass &= ratio.is_some_and(|r| r <= 0.1) && change <= GRID_TOL;
        speedups.push(ratio.map(|r| 1.0 / r).unwrap_or(0.0));
        parts.push(format!(
            "nu={nu:e}: half-life {:.3} periods on {grid}^2 ({:.3} on {}^2, change {change:.2e}) vs bare {bare:.0}",
            fine.interpolated.unwrap_or(f64::NAN),
            coarse.interpolated.unwrap_or(f64::NAN),
            grid / 2
        ));
        rows.push(json!({"nu": nu, "bare_half_life_periods": bare, "ratio": ratio, "grid_change": change, "fine": fine, "coarse": coarse}));
    }
    pass &= speedups[1] > speedups[0];
    Ok((pass, format!("{}; bare/measured {speedups:.1?}", parts.join("; ")), json!(rows)))
}

fn c10_rates() -> Check {
    let ex = harris_constants(DriftParams { gamma: 0.5, c: 1.0, m: 2 }, MinorizationParams { alpha: 0.5, r: 8.0, m: 4 }, 0.25, 0.8)?;
    let hand = (ex.beta - 0.25).abs() <= 1e-12 && (ex.alpha_bar - 0.9).abs() <= 1e-12;
    let table = ConstantsTable::default();
    let mut nested = vec![];
    let mut nested_ok = true;
    for k in [10.0f64, 100.0] {
        let h = chirikov_headline_rates(k, 1.0, 0.25, &table)?;
        let got = h.p_k.log10_neg_log10.unwrap_or(f64::NAN);
        let want = table.c_reach.log10() + 264.0 * k.log10() + k.log10().log10();
        nested_ok &= (got - want).abs() <= 1e-9;
        nested.push(json!({"K": k, "log10_neg_log10_pK": got, "expected": want}));
    }
    let mut rng = RngStreamSpec::new(7, 110).rng();
    let (mut worst, mut count) = (0.0f64, 0);
    while count < 10_000 {
        let gamma: f64 = rng.gen_range(0.01..0.99);
        let c: f64 = rng.gen_range(0.01..10.0);
        let alpha: f64 = rng.gen_range(0.01..0.99);
        let r: f64 = rng.gen_range(2.0 * c / (1.0 - gamma) + 1e-3..2.0 * c / (1.0 - gamma) + 50.0);
        let a0: f64 = rng.gen_range(0.001..alpha);
        let g0: f64 = rng.gen_range(gamma + 2.0 * c / r..1.0).min(1.0 - 1e-9);
        if let Ok(h) = harris_constants(DriftParams { gamma, c, m: 1 }, MinorizationParams { alpha, r, m: 1 }, a0, g0) {
            worst = worst.max(h.alpha_bar);
            count += 1;
        }
    }
    let pass = hand && nested_ok && worst < 1.0;
    Ok((
        pass,
        format!("hand example beta {} alpha_bar {}; nested-log invariant ok = {nested_ok}; max alpha_bar over 10^4 admissible points {worst:.6}", ex.beta, ex.alpha_bar),
        json!({"hand_example": ex, "nested_logs": nested, "sweep_max_alpha_bar": worst}),
    ))
}

fn c11_lyapunov(sz: &Sizes, seed: u64) -> Check {
    let stream = RngStreamSpec::new(seed, 111);
    let big = lyapunov_exponent_with(ShearPair::chirikov(100.0), sz.lyap_steps, sz.lyap_orbits, stream)?.lambda1;
    let small = lyapunov_exponent_with(ShearPair::chirikov(4.0 * PI), sz.lyap_steps, sz.lyap_orbits, stream.substream(1_000_000))?.lambda1;
    let oracle = (50.0f64).ln();
    let rel = (big.mean - oracle).abs() / oracle;
    let pass = rel <= 0.1 && small.lower(5.0) > 0.0;
    Ok((
        pass,
        format!(
            "{} steps x {} orbits: K=100 λ1 = {:.5} (log(K/2) = {oracle:.5}, rel dev {rel:.4}); K=4π λ1 = {:.5} ± {:.1e}",
            sz.lyap_steps, sz.lyap_orbits, big.mean, small.mean, small.std_error
        ),
        json!({"K100": big, "K4pi": small, "oracle": oracle}),
    ))
}

/// J_m(x) by the trapezoid rule on (1/π)∫₀^π cos(mτ − x sin τ)dτ.
fn bessel_quadrature(m: i64, x: f64) -> f64 {
    let n = 4000;
    let h = PI / n as f64;
    let f = |t: f64| (m as f64 * t - x * t.sin()).cos();
    let mut s = 0.5 * (f(0.0) + f(PI));
    for i in 1..n {
        s += f(i as f64 * h);
    }
    s * h / PI
}

/// Self-convergence ratio of the split diffusive step under substep doubling.
pub fn strang_ratio(grid: usize, sp: ShearPair, nu: f64, m0: usize) -> Result<f64, CliError> {
    let g = GridSpec::new(grid, true)?;
    let tr = Transport::new(g);
    let w = PhasePair::new(0.7, 2.3);
    let f = SpectralField::real_mode(g, 1, 1)?;
    let run = |m: usize| tr.step_period(&f, sp, w, nu, m).0;
    let (a, b, c) = (run(m0), run(2 * m0), run(4 * m0));
    let diff = |x: &SpectralField, y: &SpectralField| x.amp.iter().zip(&y.amp).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
    Ok(diff(&a, &b) / diff(&b, &c))
}

fn c12_shears() -> Check {
    let g = GridSpec::new(256, true)?;
    let tr = Transport::new(g);
    let mut ja = 0.0f64;
    for &(k, k1, k2, w) in &[(8.0, 1i64, 0i64, 0.3), (5.0, 2, 3, 1.7), (2.5, -3, 1, 4.0), (8.0, 1, -2, 5.5)] {
        let f = SpectralField::single_mode(g, k1, k2, C::new(1.0, 0.0))?;
        let out = tr.shear_horizontal(&f, Shape::Sine(k), w, 1.0);
        for m in -60i64..=60 {
            let want = bessel_quadrature(m, -(k1 as f64) * k) * C::from_polar(1.0, -(m as f64) * w);
            ja = ja.max((out.get(k1, k2 + m) - want).norm());
        }
    }
    let f = SpectralField::single_mode(g, 0, 1, C::new(1.0, 0.0))?;
    let v = tr.shear_vertical(&f, Shape::Sawtooth, 0.0, 1.0);
    let exact_mode = v.get(-1, 1) == C::new(1.0, 0.0) && (v.l2_norm() - 1.0).abs() == 0.0;
    let mut rng = RngStreamSpec::new(12, 112).rng();
    let mut field = SpectralField::zeros(g);
    for _ in 0..20 {
        let (a, b) = (rng.gen_range(-6i64..=6), rng.gen_range(-6i64..=6));
        if (a, b) != (0, 0) {
            let c = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            field.set(a, b, c)?;
        }
    }
    // the collocation shear is unitary on the grid; the band-limited one is not
    let tc = Transport::new(GridSpec::new(256, false)?);
    let mut field = SpectralField::from_physical(tc.grid, &field.to_physical())?;
    let mut l2_err = 0.0f64;
    let sp = ShearPair::chirikov(4.0 * PI);
    for _ in 0..4 {
        let w = PhasePair::new(uniform_angle(&mut rng), uniform_angle(&mut rng));
        let before = field.l2_norm();
        let h = tc.shear_horizontal(&field, sp.horizontal, w.w1.value(), 1.0);
        let after_h = h.l2_norm();
        let v = tc.shear_vertical(&h, sp.vertical, w.w2.value(), 1.0);
        l2_err = l2_err.max((after_h / before - 1.0).abs()).max((v.l2_norm() / after_h - 1.0).abs());
        field = v;
    }
    let ratio = strang_ratio(64, ShearPair::pierrehumbert(1.0), 0.05, 2)?;
    let saw_ratio = strang_ratio(64, ShearPair::chirikov(1.0), 0.05, 2)?;
    let pass = ja <= 1e-10 && exact_mode && l2_err <= 1e-12 && (ratio - 4.0).abs() <= 0.5;
    Ok((
        pass,
        format!("Jacobi-Anger max diff {ja:.2e}; vertical (0,1)->(-1,1) exact = {exact_mode}; L2 drift per shear {l2_err:.2e}; Strang ratio {ratio:.3} (sine pair; sawtooth pair {saw_ratio:.3})"),
        json!({"jacobi_anger_max_diff": ja, "vertical_exact": exact_mode, "l2_relative_drift": l2_err, "strang_ratio": ratio, "strang_ratio_sawtooth": saw_ratio}),
    ))
}

fn c13_pierrehumbert(sz: &Sizes, seed: u64) -> Check {
    let (g, n) = (sz.pierre_grid, sz.pierre_samples);
    let cfg = McConfig::new(n, seed, g, g);
    let main = contraction_estimate_with(ShearPair::pierrehumbert(100.0), 100.0, 1, &[0.25], &cfg)?.remove(0);
    let (est, rows) = contraction_family(ShearPair::pierrehumbert, 1, [50.0, 100.0, 200.0], g, n, seed + 1)?;
    let (cons, ratios) = sweep_consistency(&est, 0.25);
    let w = main.worst_estimate;
    let pass = w.upper(5.0) < 0.5 && cons;
    Ok((
        pass,
        format!("A=100 grid {g}x{g}, {n} samples: sup estimate {:.4} + 5σ = {:.4}; sweep ratios to A^-p {ratios:.3?}", w.mean, w.upper(5.0)),
        json!({"grid": g, "samples": n, "A100": {"worst": w, "worst_cell": main.worst_cell}, "sweep": rows, "sweep_ratios": ratios}),
    ))
}

fn c14_apriori(sz: &Sizes, seed: u64) -> Check {
    let cfg = McConfig::new(sz.apriori_points, seed, 1, 1);
    let mut pass = true;
    let mut parts = vec![];
    let mut reps = vec![];
    for n in [1usize, 2] {
        let r = apriori_bound_check_with(n, &[10.0, 30.0, 100.0], &cfg, ShearPair::chirikov)?;
        pass &= r.pass;
        parts.push(format!(
            "n={n}: first {:.3}/{:.3} vs {}, second {:.3} vs {}",
            r.exponent_first_z, r.exponent_first_w, r.bound_first, r.exponent_second, r.bound_second
        ));
        reps.push(r);
    }
    Ok((pass, format!("{} points; {}", sz.apriori_points, parts.join("; ")), serde_json::to_value(reps).unwrap_or_default()))
}



