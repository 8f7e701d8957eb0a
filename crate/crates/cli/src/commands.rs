//! One handler per subcommand. Each reads its parameters from the merged
//! config, writes its artifacts through the context and records checks.

use std::f64::consts::PI;
use std::time::Instant;

use chirikov::control::{one_point_exact, projective_steer, two_point_reach, ControlResult};
use chirikov::estimators::{
    apriori::apriori_bound_check_with, claim_constant_probe, contraction_estimate_with, correlation::correlation_decay_with, drift::drift_check_with, drift_v,
    lyapunov::lyapunov_exponent_with, quad::ratio_grid, McConfig,
};
use chirikov::harris::{chirikov_headline_rates, harris_constants, ConstantsTable, DriftParams, MinorizationParams};
use chirikov::pierrehumbert::PierreParams;
use chirikov::rds::{sample_phases, uniform_angle, ProjectiveState, RngStreamSpec, TwoPointState};
use chirikov::structure::{
    det_xi_phi8, fixed_point_suite, lyapunov_surjectivity, one_point_submersion, projective_submersion, smallset_constants, two_point_submersion, two_point_submersion_n2,
};
use chirikov::torus::{chirikov_step, torus_dist, ShearPair, TorusPoint};
use chirikov::transport::{bare_half_life_periods, run_realization_field, sobolev_norm, DecayExperiment, GridSpec, InitialField, NormSpec, Transport, NORMALIZATION};
use rand::Rng;
use serde_json::json;

use crate::config::{ControlMode, Model};
use crate::output::{format_f, Context};
use crate::CliError;

pub const SUBCOMMANDS: [&str; 13] = [
    "contraction",
    "drift",
    "apriori",
    "lyapunov",
    "correlations",
    "ranks",
    "dets",
    "fixedpoints",
    "control",
    "mix",
    "dissipate",
    "rates",
    "claim-probe",
];

pub fn dispatch(name: &str, ctx: &mut Context) -> Result<(), CliError> {
    match name {
        "contraction" => contraction(ctx),
        "drift" => drift(ctx),
        "apriori" => apriori(ctx),
        "lyapunov" => lyapunov(ctx),
        "correlations" => correlations(ctx),
        "ranks" => ranks(ctx),
        "dets" => dets(ctx),
        "fixedpoints" => fixedpoints(ctx),
        "control" => control(ctx),
        "mix" => mix(ctx),
        "dissipate" => dissipate(ctx),
        "rates" => rates(ctx),
        "claim-probe" => claim_probe(ctx),
        other => Err(CliError::Config(format!("unknown subcommand {other}"))),
    }
}

fn model_pair(ctx: &Context, default: f64) -> Result<(ShearPair, f64, usize), CliError> {
    let s = ctx.cfg.strength(default);
    match ctx.cfg.model() {
        Model::Chirikov => {
            chirikov::torus::KickStrength::new(s)?;
            Ok((ShearPair::chirikov(s), s, 2))
        }
        Model::Pierrehumbert => Ok((PierreParams::new(s)?.shears(), s, 1)),
    }
}

fn p_of(ctx: &Context) -> f64 {
    ctx.cfg.p.unwrap_or(0.25)
}

fn mc(ctx: &Context, default_samples: u64, default_grid: u64) -> McConfig {
    let g = ctx.cfg.grid.unwrap_or(default_grid) as usize;
    McConfig::new(ctx.cfg.samples.unwrap_or(default_samples), ctx.cfg.seed(), g, g)
}

fn chirikov_only(ctx: &Context, what: &str) -> Result<(), CliError> {
    if ctx.cfg.model() != Model::Chirikov {
        return Err(CliError::Config(format!("{what} is only defined for --model chirikov")));
    }
    Ok(())
}

fn contraction(ctx: &mut Context) -> Result<(), CliError> {
    let (sp, k, m) = model_pair(ctx, 100.0)?;
    let p = p_of(ctx);
    let cfg = mc(ctx, 100_000, 32);
    let t = Instant::now();
    let r = contraction_estimate_with(sp, k, m, &[p], &cfg)?.remove(0);
    let wall = t.elapsed().as_secs_f64();
    let w = r.worst_estimate;
    let mut rows = vec![];
    for (i, row) in r.per_cell.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            rows.push(vec![i.to_string(), j.to_string(), format_f(e.mean), format_f(e.std_error)]);
        }
    }
    ctx.write_csv("contraction_cells.csv", &["i_x2", "j_v", "mean", "std_error"], &rows)?;
    ctx.report(
        "contraction.json",
        "contraction_estimate",
        json!({"model": ctx.cfg.model(), "strength": k, "p": p, "m": m, "grid_x": cfg.grid_x, "grid_v": cfg.grid_v, "seed": cfg.stream.seed}),
        (w.mean, w.std_error, w.samples),
        wall,
        json!({"worst_cell": r.worst_cell, "upper_5sigma": w.upper(5.0)}),
    )?;
    ctx.check("worst_cell_below_half_5sigma", w.upper(5.0) < 0.5, format!("mean {:.6} + 5σ = {:.6}", w.mean, w.upper(5.0)));
    Ok(())
}

fn drift(ctx: &mut Context) -> Result<(), CliError> {
    let (sp, k, m) = model_pair(ctx, 100.0)?;
    let p = p_of(ctx);
    let cfg = mc(ctx, 100_000, 1);
    let mut out = vec![];
    let t = Instant::now();
    for s in [1e-3, 1e-2, PI] {
        let z = TwoPointState::new(TorusPoint::new(1.0, 1.0), TorusPoint::new(1.0, 1.0 + s))?;
        let v0 = drift_v(&z, p);
        let e = drift_check_with(sp, m, p, &z, &cfg)?;
        let ratio = e.mean / v0;
        let upper = e.upper(5.0) / v0;
        out.push(json!({"separation": s, "V": v0, "PV_mean": e.mean, "PV_std_error": e.std_error, "ratio": ratio, "ratio_upper_5sigma": upper}));
        if s < 0.1 {
            ctx.check(format!("drift_ratio_below_0.9_at_{s:e}"), upper < 0.9, format!("ratio {ratio:.6}, +5σ {upper:.6}"));
        } else {
            ctx.check(format!("drift_finite_at_{s:.4}"), ratio.is_finite(), format!("ratio {ratio:.6}"));
        }
    }
    let wall = t.elapsed().as_secs_f64();
    let first = &out[0];
    ctx.report(
        "drift.json",
        "drift_check",
        json!({"model": ctx.cfg.model(), "strength": k, "p": p, "m": m, "seed": cfg.stream.seed}),
        (first["ratio"].as_f64().unwrap_or(f64::NAN), first["PV_std_error"].as_f64().unwrap_or(f64::NAN) / first["V"].as_f64().unwrap_or(1.0), cfg.samples),
        wall,
        json!({"separations": out}),
    )?;
    Ok(())
}

fn apriori(ctx: &mut Context) -> Result<(), CliError> {
    chirikov_only(ctx, "apriori")?;
    let cfg = mc(ctx, 64, 1);
    let ks = [10.0, 30.0, 100.0];
    let t = Instant::now();
    let mut reps = vec![];
    for n in [1usize, 2] {
        let r = apriori_bound_check_with(n, &ks, &cfg, ShearPair::chirikov)?;
        ctx.check(
            format!("apriori_exponents_n{n}"),
            r.pass,
            format!(
                "first {:.3}/{:.3} (bound {}), second {:.3} (bound {})",
                r.exponent_first_z, r.exponent_first_w, r.bound_first, r.exponent_second, r.bound_second
            ),
        );
        reps.push(r);
    }
    let wall = t.elapsed().as_secs_f64();
    let worst = reps
        .iter()
        .map(|r| (r.exponent_first_z.max(r.exponent_first_w) - r.bound_first).max(r.exponent_second - r.bound_second))
        .fold(f64::NEG_INFINITY, f64::max);
    ctx.report(
        "apriori.json",
        "apriori_bound_check",
        json!({"K": ks, "points": cfg.samples, "seed": cfg.stream.seed}),
        (worst, 0.0, cfg.samples),
        wall,
        serde_json::to_value(&reps).unwrap_or_default(),
    )?;
    Ok(())
}

fn lyapunov(ctx: &mut Context) -> Result<(), CliError> {
    let (sp, k, _) = model_pair(ctx, 100.0)?;
    let steps = ctx.cfg.steps.unwrap_or(100_000);
    let orbits = ctx.cfg.realizations.unwrap_or(16);
    let t = Instant::now();
    let r = lyapunov_exponent_with(sp, steps, orbits, RngStreamSpec::new(ctx.cfg.seed(), 0))?;
    let wall = t.elapsed().as_secs_f64();
    let l = r.lambda1;
    ctx.check("lambda1_positive_5sigma", l.lower(5.0) > 0.0, format!("λ₁ = {:.6} ± {:.2e}", l.mean, l.std_error));
    let oracle = (k / 2.0).ln();
    if ctx.cfg.model() == Model::Chirikov && k >= 50.0 {
        let rel = (l.mean - oracle).abs() / oracle;
        ctx.check("lambda1_near_log_k_over_2", rel < 0.1, format!("relative deviation {rel:.4} from log(K/2) = {oracle:.4}"));
    }
    ctx.report(
        "lyapunov.json",
        "lyapunov_exponent",
        json!({"model": ctx.cfg.model(), "strength": k, "n_steps": steps, "n_orbits": orbits, "seed": ctx.cfg.seed()}),
        (l.mean, l.std_error, orbits),
        wall,
        json!({"log_K_over_2": oracle, "units": "nats per map application"}),
    )?;
    Ok(())
}

fn correlations(ctx: &mut Context) -> Result<(), CliError> {
    let (sp, k, _) = model_pair(ctx, 4.0 * PI)?;
    let n_max = ctx.cfg.steps.unwrap_or(60) as usize;
    let reals = ctx.cfg.realizations.unwrap_or(20) as usize;
    let grid = GridSpec::new(ctx.cfg.grid.unwrap_or(128) as usize, true)?;
    let t = Instant::now();
    let s = correlation_decay_with(sp, (1, 0), (-1, 0), n_max, reals, grid, RngStreamSpec::new(ctx.cfg.seed(), 0))?;
    let wall = t.elapsed().as_secs_f64();
    let mut rows = vec![];
    for (r, ser) in s.per_realization.iter().enumerate() {
        for (n, v) in ser.iter().enumerate() {
            // each period has length 2 in time
            rows.push(vec![r.to_string(), n.to_string(), (2 * n).to_string(), format_f(*v)]);
        }
    }
    ctx.write_csv("correlations.csv", &["realization", "n", "t", "norm"], &rows)?;
    let rate = s.rate.unwrap_or(f64::NAN);
    ctx.check("correlation_decays", rate > 0.0, format!("rate {rate:.4} per period, R² {:?}, fit periods [1, {})", s.r_squared, s.fit_end));
    ctx.report(
        "correlations.json",
        "correlation_decay",
        json!({"model": ctx.cfg.model(), "strength": k, "m": s.m, "m_prime": s.m_prime, "n_max": n_max, "realizations": reals, "grid": grid.n, "normalization": NORMALIZATION}),
        (rate, 0.0, reals as u64),
        wall,
        json!({"values": s.values, "r_squared": s.r_squared, "fit_end": s.fit_end}),
    )?;
    Ok(())
}

fn ranks(ctx: &mut Context) -> Result<(), CliError> {
    chirikov_only(ctx, "ranks")?;
    let k = ctx.cfg.strength(10.0);
    let t = Instant::now();
    let one = one_point_submersion(k)?;
    let proj = projective_submersion(k)?;
    let two = two_point_submersion(k)?;
    let two_n2 = two_point_submersion_n2(k)?;
    let sur = lyapunov_surjectivity(k)?;
    let wall = t.elapsed().as_secs_f64();
    ctx.check("one_point_rank_2", one.rank_at_tol == 2, format!("σ = {:?}", one.singular_values));
    ctx.check("projective_rank_3", proj.rank_at_tol == 3, format!("σ = {:?}", proj.singular_values));
    ctx.check("two_point_rank_4", two.rank_at_tol == 4, format!("σ = {:?}", two.singular_values));
    ctx.check("lyapunov_position_rank_2", sur.position.rank_at_tol == 2, format!("σ = {:?}", sur.position.singular_values));
    ctx.check("lyapunov_restricted_rank_3", sur.restricted.rank_at_tol == 3, format!("σ = {:?}", sur.restricted.singular_values));
    ctx.report(
        "ranks.json",
        "submersion_ranks",
        json!({"K": k, "tol": one.tol}),
        (two.rank_at_tol as f64, 0.0, 1),
        wall,
        json!({"one_point": one, "projective": proj, "two_point": two, "two_point_n2": two_n2, "lyapunov": sur}),
    )?;
    Ok(())
}

fn dets(ctx: &mut Context) -> Result<(), CliError> {
    chirikov_only(ctx, "dets")?;
    let k = ctx.cfg.strength(10.0);
    let t = Instant::now();
    let d = det_xi_phi8(k)?;
    let wall = t.elapsed().as_secs_f64();
    ctx.check("det_equals_12K4_chain_rule", d.rel_error <= 1e-6, format!("rel_error {:.3e}", d.rel_error));
    ctx.check("det_equals_12K4_finite_difference", d.fd_rel_error <= 1e-5, format!("rel_error {:.3e}", d.fd_rel_error));
    ctx.report("dets.json", "det_xi_phi8", json!({"K": k}), (d.value, 0.0, 1), wall, serde_json::to_value(d).unwrap_or_default())?;
    Ok(())
}

fn fixedpoints(ctx: &mut Context) -> Result<(), CliError> {
    chirikov_only(ctx, "fixedpoints")?;
    let k = ctx.cfg.strength(4.0 * PI);
    let t = Instant::now();
    let fp = fixed_point_suite(k)?;
    let ss = smallset_constants(k.max(1.0))?;
    let wall = t.elapsed().as_secs_f64();
    for c in &fp {
        ctx.check(format!("fixed_point_{}", c.name), c.pass, format!("residual {:.3e}", c.residual));
    }
    let worst = fp.iter().map(|c| c.residual).fold(0.0, f64::max);
    ctx.report(
        "fixedpoints.json",
        "fixed_point_suite",
        json!({"K": k}),
        (worst, 0.0, fp.len() as u64),
        wall,
        json!({"checks": fp, "small_set_constants": ss}),
    )?;
    Ok(())
}

fn random_point<R: Rng>(rng: &mut R) -> TorusPoint {
    TorusPoint::new(uniform_angle(rng), uniform_angle(rng))
}

/// Pairs closer than 0.1 are redrawn.
pub fn random_pair<R: Rng>(rng: &mut R) -> TwoPointState {
    loop {
        let (a, b) = (random_point(rng), random_point(rng));
        if torus_dist(a, b) >= 0.1 {
            return TwoPointState { x: a, y: b };
        }
    }
}

pub fn random_projective<R: Rng>(rng: &mut R) -> Result<ProjectiveState, CliError> {
    let x = random_point(rng);
    let th = uniform_angle(rng);
    Ok(ProjectiveState::new(x, th.cos(), th.sin())?)
}

/// Phase sequences go to a flat binary file: per trial a u64 count then (ω¹, ω²) f64 pairs, LE.
fn write_phase_blob(ctx: &mut Context, results: &[ControlResult]) -> Result<(), CliError> {
    let mut b = Vec::new();
    b.extend_from_slice(&(results.len() as u64).to_le_bytes());
    for r in results {
        b.extend_from_slice(&(r.phases.len() as u64).to_le_bytes());
        for w in r.phases.iter() {
            b.extend_from_slice(&w.w1.value().to_le_bytes());
            b.extend_from_slice(&w.w2.value().to_le_bytes());
        }
    }
    ctx.write_binary("control_phases.bin", &b)?;
    Ok(())
}

/// JSON view of a result; long phase lists are left to the binary file.
fn result_json(r: &ControlResult) -> serde_json::Value {
    let mut v = json!({
        "steps": r.steps, "final_distance": r.final_distance, "target_tolerance": r.target_tolerance,
        "success": r.success, "stages": r.stages, "eps0": r.eps0, "lipschitz": r.lipschitz, "note": r.note,
    });
    if r.steps <= 1000 {
        v["phases"] = serde_json::to_value(&r.phases).unwrap_or_default();
    }
    v
}

fn control(ctx: &mut Context) -> Result<(), CliError> {
    chirikov_only(ctx, "control")?;
    let k = ctx.cfg.strength(4.0 * PI);
    let eps = ctx.cfg.eps.unwrap_or(1e-2);
    let trials = ctx.cfg.trials.unwrap_or(100) as usize;
    let mode = ctx.cfg.mode.unwrap_or(ControlMode::TwoPoint);
    let mut rng = RngStreamSpec::new(ctx.cfg.seed(), 0).rng();
    let t = Instant::now();
    let mut results = vec![];
    let mut worst_one_point: f64 = 0.0;
    for _ in 0..trials {
        match mode {
            ControlMode::OnePoint => {
                let (x, y) = (random_point(&mut rng), random_point(&mut rng));
                let w = one_point_exact(x, y, k)?;
                let d = torus_dist(chirikov_step(x, w, k), y);
                worst_one_point = worst_one_point.max(d);
                results.push(ControlResult {
                    phases: chirikov::rds::PhaseSequence::new(vec![w]),
                    steps: 1,
                    final_distance: d,
                    target_tolerance: 1e-12,
                    success: d < 1e-12,
                    stages: vec![("exact".into(), 1)],
                    eps0: None,
                    lipschitz: None,
                    note: String::new(),
                });
            }
            ControlMode::TwoPoint => {
                let (z, tg) = (random_pair(&mut rng), random_pair(&mut rng));
                results.push(two_point_reach(z, tg, eps, k)?);
            }
            ControlMode::Projective => {
                let (a, b) = (random_projective(&mut rng)?, random_projective(&mut rng)?);
                results.push(projective_steer(a, b, eps, k)?);
            }
        }
    }
    let wall = t.elapsed().as_secs_f64();
    let ok = results.iter().filter(|r| r.success).count();
    match mode {
        ControlMode::OnePoint => ctx.check("one_point_exact_1e-12", ok == trials, format!("worst distance {worst_one_point:.3e}")),
        ControlMode::TwoPoint => ctx.check("two_point_all_succeed", ok == trials, format!("{ok}/{trials} within eps = {eps}")),
        ControlMode::Projective => ctx.check("projective_99_percent", ok * 100 >= 99 * trials, format!("{ok}/{trials} within eps = {eps}")),
    }
    write_phase_blob(ctx, &results)?;
    let steps: Vec<f64> = results.iter().map(|r| r.steps as f64).collect();
    let mean_steps = steps.iter().sum::<f64>() / steps.len().max(1) as f64;
    ctx.write_json("control_results.json", &results.iter().map(result_json).collect::<Vec<_>>())?;
    ctx.report(
        "control.json",
        "control",
        json!({"mode": mode, "K": k, "eps": eps, "trials": trials, "seed": ctx.cfg.seed()}),
        (ok as f64 / trials.max(1) as f64, 0.0, trials as u64),
        wall,
        json!({"mean_steps": mean_steps, "max_steps": steps.iter().copied().fold(0.0, f64::max)}),
    )?;
    Ok(())
}

fn decay_config(ctx: &Context, default_nu: f64, default_steps: u64, default_reals: u64, default_grid: u64, dealias: bool) -> Result<DecayExperiment, CliError> {
    let (sp, _, _) = model_pair(ctx, 4.0 * PI)?;
    let cfg = DecayExperiment {
        model: sp,
        nu: ctx.cfg.nu.unwrap_or(default_nu),
        steps: ctx.cfg.steps.unwrap_or(default_steps) as usize,
        norm: NormSpec { s: 1.0, negative: true },
        realizations: ctx.cfg.realizations.unwrap_or(default_reals) as usize,
        stream: RngStreamSpec::new(ctx.cfg.seed(), 0),
        grid: GridSpec::new(ctx.cfg.grid.unwrap_or(default_grid) as usize, dealias)?,
        substeps: 8,
        initial: InitialField::RealMode(1, 0),
        drop_fraction: 0.1,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the decay experiment and writes the time-series CSV plus a snapshot of realization 0.
fn run_series(ctx: &mut Context, cfg: &DecayExperiment, stem: &str) -> Result<Vec<chirikov::transport::RealizationSeries>, CliError> {
    let tr = Transport::new(cfg.grid);
    let mut series = vec![];
    let mut rows = vec![];
    for r in 0..cfg.realizations {
        let ph = sample_phases(cfg.stream.substream(r as u64), cfg.steps);
        let (s, f) = run_realization_field(cfg, &tr, r, &ph)?;
        for (n, v) in s.norms.iter().enumerate() {
            // each period has length 2 in time
            rows.push(vec![r.to_string(), n.to_string(), (2 * n).to_string(), format_f(*v)]);
        }
        if r == 0 {
            let mut b = vec![];
            f.write_snapshot(&mut b).map_err(|e| CliError::Io(e.to_string()))?;
            ctx.write_binary(&format!("{stem}_final_r0.bin"), &b)?;
            ctx.write_json(
                &format!("{stem}_final_r0.json"),
                &json!({
                    "n": f.grid.n, "dealias": f.grid.dealias, "normalization": NORMALIZATION,
                    "layout": "u64 n, 8-byte tag, then n*n (re, im) f64 little-endian, row-major [i1][i2], index i <-> k = i for i <= n/2 else i - n",
                    "period": s.norms.len() - 1, "realization": 0, "hminus1": sobolev_norm(&f, 1.0, true).ok(), "l2": f.l2_norm(),
                    "config_digest": ctx.digest,
                }),
            )?;
        }
        series.push(s);
    }
    ctx.write_csv(&format!("{stem}.csv"), &["realization", "n", "t", "norm"], &rows)?;
    Ok(series)
}

fn mix(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = decay_config(ctx, 0.0, 200, 10, 256, true)?;
    let t = Instant::now();
    let series = run_series(ctx, &cfg, "mix")?;
    let wall = t.elapsed().as_secs_f64();
    let rates: Vec<f64> = series.iter().map(|s| s.rate.unwrap_or(f64::NAN)).collect();
    let r2: Vec<f64> = series.iter().map(|s| s.r_squared.unwrap_or(f64::NAN)).collect();
    let leak = series.iter().map(|s| s.max_leak).fold(0.0, f64::max);
    let good = rates.iter().zip(&r2).all(|(r, q)| *r > 0.0 && *q >= 0.9);
    ctx.check("every_realization_log_linear_decay", good, format!("rates {rates:?}, R² {r2:?}"));
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let se = (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (rates.len().max(2) - 1) as f64 / rates.len() as f64).sqrt();
    ctx.report(
        "mix.json",
        "mixing_rate",
        json!({"model": ctx.cfg.model(), "strength": ctx.cfg.strength(4.0 * PI), "nu": cfg.nu, "steps": cfg.steps, "realizations": cfg.realizations,
               "grid": cfg.grid.n, "dealias": cfg.grid.dealias, "norm": "H^-1", "normalization": NORMALIZATION}),
        (mean, se, cfg.realizations as u64),
        wall,
        json!({"rates": rates, "r_squared": r2, "max_leak": leak, "resolution_limited": leak >= chirikov::transport::RESOLUTION_LEAK_TOL,
               "truncated": series.iter().map(|s| s.truncated).collect::<Vec<_>>()}),
    )?;
    Ok(())
}

fn dissipate(ctx: &mut Context) -> Result<(), CliError> {
    let nus: Vec<f64> = match ctx.cfg.nu {
        Some(v) => vec![v],
        None => vec![1e-4, 1e-5],
    };
    let t = Instant::now();
    let mut out = vec![];
    for &nu in &nus {
        let mut c = ctx.cfg.clone();
        c.nu = Some(nu);
        let sub = Context {
            cfg: c,
            dir: ctx.dir.clone(),
            digest: ctx.digest.clone(),
            files: vec![],
            checks: vec![],
        };
        let cfg = decay_config(&sub, nu, 100, 1, 512, false)?;
        let series = run_series(ctx, &cfg, &format!("dissipate_nu{nu:e}"))?;
        let bare = bare_half_life_periods(nu, 1.0);
        for s in &series {
            let hl = s.half_life_periods.map(|h| h as f64);
            let ratio = hl.map(|h| h / bare);
            ctx.check(
                format!("half_life_below_tenth_bare_nu{nu:e}_r{}", s.realization),
                ratio.is_some_and(|r| r <= 0.1),
                format!("half-life {hl:?} periods vs bare {bare:.1}"),
            );
            out.push(json!({"nu": nu, "realization": s.realization, "half_life_periods": hl, "bare_half_life_periods": bare,
                            "ratio": ratio, "rate_ratio": ratio.map(|r| 1.0 / r), "max_leak": s.max_leak}));
        }
    }
    let wall = t.elapsed().as_secs_f64();
    if nus.len() > 1 {
        let rr: Vec<f64> = out.iter().filter_map(|v| v["rate_ratio"].as_f64()).collect();
        let inc = rr.len() == out.len() && rr.windows(2).all(|w| w[1] > w[0]);
        ctx.check("rate_ratio_increases_as_nu_decreases", inc, format!("{rr:?}"));
    }
    let first = out.first().and_then(|v| v["ratio"].as_f64()).unwrap_or(f64::NAN);
    ctx.report(
        "dissipate.json",
        "enhanced_dissipation",
        json!({"model": ctx.cfg.model(), "strength": ctx.cfg.strength(4.0 * PI), "nu": nus, "normalization": NORMALIZATION}),
        (first, 0.0, out.len() as u64),
        wall,
        json!({"runs": out}),
    )?;
    Ok(())
}

fn rates(ctx: &mut Context) -> Result<(), CliError> {
    chirikov_only(ctx, "rates")?;
    let k = ctx.cfg.strength(100.0);
    let q = ctx.cfg.q.unwrap_or(1.0);
    let p = p_of(ctx);
    let table = match &ctx.cfg.constants_file {
        Some(path) => {
            let s = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("constants_file {path}: {e}")))?;
            toml::from_str::<ConstantsTable>(&s).map_err(|e| CliError::Config(format!("constants_file {path}: {e}")))?
        }
        None => ConstantsTable::default(),
    };
    let t = Instant::now();
    let h = chirikov_headline_rates(k, q, p, &table)?;
    let ex = harris_constants(DriftParams { gamma: 0.5, c: 1.0, m: 2 }, MinorizationParams { alpha: 0.5, r: 8.0, m: 4 }, 0.25, 0.8)?;
    let wall = t.elapsed().as_secs_f64();
    let want = table.c_reach.log10() + 264.0 * k.log10() + k.log10().log10();
    let got = h.p_k.log10_neg_log10.unwrap_or(f64::NAN);
    ctx.check("nested_log_p_k", (got - want).abs() < 1e-9, format!("log10(-log10 p_K) = {got}"));
    ctx.check(
        "harris_hand_example",
        (ex.beta - 0.25).abs() < 1e-12 && (ex.alpha_bar - 0.9).abs() < 1e-12,
        format!("beta {}, alpha_bar {}", ex.beta, ex.alpha_bar),
    );
    ctx.report(
        "rates.json",
        "chirikov_headline_rates",
        json!({"K": k, "q": q, "p": p, "constants": table}),
        (h.moment_bound.log10_value, 0.0, 1),
        wall,
        json!({"headline": h, "harris_example": ex}),
    )?;
    Ok(())
}

fn claim_probe(ctx: &mut Context) -> Result<(), CliError> {
    let p = p_of(ctx);
    let step = 1.0 / ctx.cfg.grid.unwrap_or(100) as f64;
    let ratios = ratio_grid(-3.0, 3.0, step);
    let t = Instant::now();
    let pr = claim_constant_probe(p, &ratios)?;
    let wall = t.elapsed().as_secs_f64();
    ctx.check("claim_constant_finite", pr.c_p.is_finite(), format!("C_p = {}", pr.c_p));
    ctx.check(
        "claim_maximizer_at_ratio_one",
        (pr.argmax_ratio.abs() - 1.0).abs() <= step,
        format!("argmax |a/b| = {}", pr.argmax_ratio.abs()),
    );
    ctx.report("claim_probe.json", "claim_constant_probe", json!({"p": p, "grid_step": step}), (pr.c_p, 0.0, pr.grid_points as u64), wall, serde_json::to_value(pr).unwrap_or_default())?;
    Ok(())
}
