//! Constructive phase-sequence drivers for the one-point, two-point and
//! projective processes of the Chirikov model.

use std::f64::consts::{PI, SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rds::{two_point_endpoint, PhaseSequence, ProjectiveState, TwoPointState};
use crate::torus::{circle_dist, wrap, wrap_signed, Mat2, PhasePair, ShearPair, TangentVector, TorusPoint};

/// Tolerance on the exact identities reached by the alignment recipe.
const ALIGN_TOL: f64 = 1e-11;
const MAX_RETRIES: usize = 24;
/// Hard cap on dwell length, far above the typical hitting time.
const MAX_DWELL: usize = 20_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlResult {
    pub phases: PhaseSequence,
    pub steps: usize,
    pub final_distance: f64,
    pub target_tolerance: f64,
    pub success: bool,
    /// (stage name, step count)
    pub stages: Vec<(String, usize)>,
    pub eps0: Option<f64>,
    pub lipschitz: Option<f64>,
    pub note: String,
}

impl ControlResult {
    fn trivial(d: f64, eps: f64) -> Self {
        ControlResult {
            phases: PhaseSequence::new(vec![]),
            steps: 0,
            final_distance: d,
            target_tolerance: eps,
            success: d < eps,
            stages: vec![],
            eps0: None,
            lipschitz: None,
            note: String::new(),
        }
    }
}

/// The aligned two-point family a = 0, b = x̄₂, x₂ = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedPairTarget {
    pub xbar1: f64,
    pub xbar2: f64,
}

impl AlignedPairTarget {
    /// The root of K cos(x̄₂/2) = −2√2π in [0, 2π); it lies in (π, 2π) and is unique.
    pub fn new(k: f64) -> Result<Self> {
        let lo = 2.0 * SQRT_2 * PI;
        if !(k >= lo) {
            return Err(invalid("K", format!("aligned target needs K >= 2*sqrt(2)*pi = {lo}")));
        }
        Ok(AlignedPairTarget {
            xbar1: 0.0,
            xbar2: 2.0 * (-lo / k).acos(),
        })
    }

    pub fn residual(&self, k: f64) -> f64 {
        (k * (self.xbar2 / 2.0).cos() + 2.0 * SQRT_2 * PI).abs()
    }
}

/// ω with chirikov_step(x, ω, K) = y, using the nearest lift of y₁ − x₁.
pub fn one_point_exact(x: TorusPoint, y: TorusPoint, k: f64) -> Result<PhasePair> {
    let [x1, x2] = x.coords();
    let [y1, y2] = y.coords();
    let d = wrap_signed(y1 - x1);
    if d.abs() > k {
        return Err(Error::Unreachable { required: d.abs(), k });
    }
    Ok(PhasePair::new(x2 - (d / k).clamp(-1.0, 1.0).asin(), x2 + y1 - y2))
}

/// ⌊π/s⌋ + ⌊12π/ε⌋ + 4
pub fn reachability_bound(s: f64, eps: f64) -> Result<u64> {
    if !(s > 0.0) || !(eps > 0.0) {
        return Err(invalid("s/eps", "must be positive"));
    }
    Ok((PI / s).floor() as u64 + (12.0 * PI / eps).floor() as u64 + 4)
}

fn diff(z: &TwoPointState) -> (f64, f64) {
    let [x1, x2] = z.x.coords();
    let [y1, y2] = z.y.coords();
    (wrap_signed(y1 - x1), wrap(y2 - x2))
}

fn step2(sp: ShearPair, z: &TwoPointState, w: PhasePair) -> TwoPointState {
    TwoPointState {
        x: sp.step(z.x, w),
        y: sp.step(z.y, w),
    }
}

fn inv2(sp: ShearPair, z: &TwoPointState, w: PhasePair) -> TwoPointState {
    TwoPointState {
        x: sp.inverse(z.x, w),
        y: sp.inverse(z.y, w),
    }
}

fn is_aligned(z: &TwoPointState, t: &AlignedPairTarget) -> bool {
    let (a, b) = diff(z);
    a.abs() <= ALIGN_TOL && circle_dist(b, t.xbar2) <= ALIGN_TOL && wrap_signed(z.x.x2.value()).abs() <= ALIGN_TOL
}

/// Smallest l, then k, with circle distance of (2k+1)π/l to `a` at most `r`.
fn rational_rotation(a: f64, r: f64) -> Option<f64> {
    for l in 1..=10_000_000u64 {
        let spacing = TAU / l as f64;
        // nearest point of the coset π/l + (2π/l)ℤ
        let off = PI / l as f64;
        let j = ((wrap(a) - off) / spacing).round();
        let cand = off + j * spacing;
        if circle_dist(cand, a) <= r {
            return Some(wrap_signed(cand));
        }
    }
    None
}

/// Chooses the next difference a' (before its lift ambiguity) for one step of
/// the difference dynamics, or None for a free (c = 0) step.
fn plan_increment(a: f64, b_ctrl: f64, aim: f64, k: f64, rotating: &mut bool) -> Option<f64> {
    let r = 2.0 * k * (b_ctrl / 2.0).sin().abs();
    if r > TAU {
        *rotating = false;
        return Some(a + wrap_signed(aim - a));
    }
    if *rotating || a.abs() >= r {
        return None;
    }
    *rotating = true;
    rational_rotation(a, r * (1.0 - 1e-12)).map(|t| a + wrap_signed(t - a))
}

/// Forward alignment of z onto the family a = 0, b = x̄₂, x₂ = 0.
fn align_forward(k: f64, z: TwoPointState, t: &AlignedPairTarget, budget: usize) -> (Vec<PhasePair>, TwoPointState, bool) {
    let sp = ShearPair::chirikov(k);
    let mut z = z;
    let mut out = Vec::new();
    let mut rotating = false;
    while out.len() < budget {
        if is_aligned(&z, t) {
            return (out, z, true);
        }
        let (a, b) = diff(&z);
        let x2 = z.x.x2.value();
        let mid = x2 + b / 2.0;
        let s = (b / 2.0).sin();
        // a' ≡ x̄₂ − b so that b' = b + a' = x̄₂
        let c = match plan_increment(a, b, t.xbar2 - b, k, &mut rotating) {
            Some(an) if s != 0.0 => ((an - a) / (2.0 * k * s)).clamp(-1.0, 1.0),
            _ => 0.0,
        };
        let w1 = mid - c.acos();
        let x1n = z.x.x1.value() + k * (x2 - w1).sin();
        let w = PhasePair::new(w1, x2 + x1n);
        z = step2(sp, &z, w);
        out.push(w);
    }
    let ok = is_aligned(&z, t);
    (out, z, ok)
}

/// Steers the target backward onto the aligned family; returns the forward-ordered
/// tail phases and the aligned preimage.
fn align_backward(k: f64, target: TwoPointState, t: &AlignedPairTarget, budget: usize) -> (Vec<PhasePair>, TwoPointState, bool) {
    let sp = ShearPair::chirikov(k);
    let mut z = target;
    let mut back = Vec::new();
    let mut ok = false;
    while back.len() <= budget {
        if is_aligned(&z, t) {
            ok = true;
            break;
        }
        let (a, b) = diff(&z);
        let bp = wrap(b - a);
        let sp_ = (bp / 2.0).sin();
        let r = 2.0 * k * sp_.abs();
        // a_pre ≡ bp − x̄₂ gives the next preimage b = x̄₂; otherwise push b toward π
        let an = if r > TAU {
            a + wrap_signed(bp - t.xbar2 - a)
        } else {
            a + wrap_signed(bp - PI - a).clamp(-r, r)
        };
        let c = if sp_ != 0.0 { ((a - an) / (2.0 * k * sp_)).clamp(-1.0, 1.0) } else { 0.0 };
        // ω² = x₁ − x₂ puts the preimage on x₂ = 0
        let w2 = z.x.x1.value() - z.x.x2.value();
        let w = PhasePair::new(bp / 2.0 - c.acos(), w2);
        z = inv2(sp, &z, w);
        back.push(w);
    }
    back.reverse();
    (back, z, ok)
}

pub fn two_point_align(z: TwoPointState, k: f64) -> Result<ControlResult> {
    check_two_point_k(k)?;
    let t = AlignedPairTarget::new(k)?;
    let s = z.separation();
    let budget = 4 * (reachability_bound(s, 1.0)? as usize + 8);
    let (ph, end, ok) = align_forward(k, z, &t, budget);
    let n = ph.len();
    let (a, _) = diff(&end);
    let resid = a.abs() + circle_dist(diff(&end).1, t.xbar2) + wrap_signed(end.x.x2.value()).abs();
    Ok(ControlResult {
        phases: PhaseSequence::new(ph),
        steps: n,
        final_distance: resid,
        target_tolerance: ALIGN_TOL,
        success: ok,
        stages: vec![("align".into(), n)],
        eps0: None,
        lipschitz: None,
        note: format!("xbar2 = {}", t.xbar2),
    })
}

fn check_two_point_k(k: f64) -> Result<()> {
    if !(k >= 4.0 * PI) || !k.is_finite() {
        return Err(invalid("K", "two-point control requires K >= 4*pi"));
    }
    Ok(())
}

/// Dwell step on the aligned family: x₁ advances by 2√2π and x₂ returns to 0.
/// Each step also re-targets b' = x̄₂, so roundoff in (a, b) does not accumulate.
fn dwell_phase(k: f64, z: &TwoPointState, t: &AlignedPairTarget) -> PhasePair {
    let (a, b) = diff(z);
    let x2 = z.x.x2.value();
    let s = (b / 2.0).sin();
    let an = wrap_signed(t.xbar2 - b);
    let c = if s != 0.0 { ((an - a) / (2.0 * k * s)).clamp(-1.0, 1.0) } else { 0.0 };
    let w1 = x2 + b / 2.0 + c.acos();
    let x1n = z.x.x1.value() + k * (x2 - w1).sin();
    PhasePair::new(w1, x2 + x1n)
}

/// Finite-difference growth of the tail along the dwell direction (x₁ and y₁
/// shifted together), doubled for safety.
fn tail_lipschitz_2pt(sp: ShearPair, start: &TwoPointState, tail: &[PhasePair]) -> f64 {
    let base = two_point_endpoint(sp, *start, tail);
    let mut l: f64 = 1.0;
    for h in [1e-7, -1e-7] {
        let [x1, x2] = start.x.coords();
        let [y1, y2] = start.y.coords();
        let p = TwoPointState {
            x: TorusPoint::new(x1 + h, x2),
            y: TorusPoint::new(y1 + h, y2),
        };
        l = l.max(two_point_endpoint(sp, p, tail).dist(&base) / p.dist(start));
    }
    // p.dist(start) counts the shift twice; the dwell error is measured on x₁ alone
    4.0 * l
}

pub fn two_point_reach(z: TwoPointState, target: TwoPointState, eps: f64, k: f64) -> Result<ControlResult> {
    check_two_point_k(k)?;
    if !(eps > 0.0) {
        return Err(invalid("eps", "must be positive"));
    }
    let sp = ShearPair::chirikov(k);
    let d0 = z.dist(&target);
    if d0 < eps {
        return Ok(ControlResult::trivial(d0, eps));
    }
    let t = AlignedPairTarget::new(k)?;
    let sx = z.separation();
    let st = target.separation();
    let pre_budget = 4 * ((PI / sx).floor() as usize + (PI / st).floor() as usize + 8);

    let (head, za, ok_a) = align_forward(k, z, &t, pre_budget);
    let (tail, zhat, ok_t) = align_backward(k, target, &t, pre_budget);
    let lip = tail_lipschitz_2pt(sp, &zhat, &tail);
    let u1 = zhat.x.x1.value();
    let mut eps0 = eps / (2.0 * lip);
    let mut best: Option<ControlResult> = None;
    for _ in 0..MAX_RETRIES {
        let budget = 4 * ((PI / sx).floor() as usize + (PI / st).floor() as usize + (12.0 * PI / eps0).floor() as usize + 8);
        let dwell_cap = budget.saturating_sub(head.len() + tail.len()).min(MAX_DWELL);
        let mut dwell = Vec::new();
        let mut cur = za;
        while circle_dist(cur.x.x1.value(), u1) >= eps0 && dwell.len() < dwell_cap {
            let w = dwell_phase(k, &cur, &t);
            cur = step2(sp, &cur, w);
            dwell.push(w);
        }
        let nd = dwell.len();
        let all: Vec<PhasePair> = head.iter().chain(dwell.iter()).chain(tail.iter()).copied().collect();
        let fin = two_point_endpoint(sp, z, &all);
        let dist = fin.dist(&target);
        let r = ControlResult {
            steps: all.len(),
            phases: PhaseSequence::new(all),
            final_distance: dist,
            target_tolerance: eps,
            success: dist < eps,
            stages: vec![("align".into(), head.len()), ("dwell".into(), nd), ("tail".into(), tail.len())],
            eps0: Some(eps0),
            lipschitz: Some(lip),
            note: format!("xbar2 = {}; align_ok = {ok_a}; tail_ok = {ok_t}", t.xbar2),
        };
        let done = r.success || nd >= dwell_cap;
        if best.as_ref().is_none_or(|b| r.final_distance < b.final_distance) {
            best = Some(r);
        }
        if done {
            break;
        }
        eps0 /= 2.0;
    }
    Ok(best.expect("at least one attempt"))
}

fn inv_apply(j: Mat2, v: (f64, f64)) -> (f64, f64) {
    // det J = 1
    (j.d * v.0 - j.b * v.1, -j.c * v.0 + j.a * v.1)
}

fn normalize(v: (f64, f64)) -> (f64, f64) {
    let n = v.0.hypot(v.1);
    (v.0 / n, v.1 / n)
}

/// Backward tangent alignment: phases (forward order) and x̄ with
/// D g(v_*) parallel to (0, 1) with positive orientation.
pub fn tangent_alignment(target: ProjectiveState, k: f64, max_steps: usize) -> (Vec<PhasePair>, TorusPoint, (f64, f64)) {
    let sp = ShearPair::chirikov(k);
    let mut x = target.x;
    let mut w = (target.v.v1, target.v.v2);
    let mut back = Vec::new();
    while back.len() < max_steps {
        if w.0 == 0.0 && w.1 > 0.0 {
            break;
        }
        let (w1, w2) = w;
        let d = w2 - w1;
        let mut finish = false;
        let c = if w1 < 0.0 {
            if d > 0.0 && -w1 <= k * d {
                finish = true;
                w1 / (k * d)
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            }
        } else if k * (w1 - w2).abs() > w1 {
            -(w1 - w2).signum()
        } else {
            0.0
        };
        // ω² = x₁ − x₂ puts the preimage on x₂ = 0, so c = cos(−ω¹)
        let ph = PhasePair::new(-c.acos(), x.x1.value() - x.x2.value());
        let xp = sp.inverse(x, ph);
        let mut wp = normalize(inv_apply(sp.jacobian(xp, ph), w));
        if finish {
            wp = (0.0, 1.0);
        }
        x = xp;
        w = wp;
        back.push(ph);
        if finish {
            break;
        }
    }
    back.reverse();
    (back, x, w)
}

fn proj_replay(k: f64, s: ProjectiveState, phases: &[PhasePair]) -> ProjectiveState {
    let sp = ShearPair::chirikov(k);
    let mut x = s.x;
    let (mut v1, mut v2) = (s.v.v1, s.v.v2);
    for &w in phases {
        let (u1, u2) = sp.jacobian(x, w).apply(v1, v2);
        let n = u1.hypot(u2);
        v1 = u1 / n;
        v2 = u2 / n;
        x = sp.step(x, w);
    }
    ProjectiveState {
        x,
        v: TangentVector { v1, v2, unit: true },
    }
}

fn tail_lipschitz_proj(k: f64, xbar: TorusPoint, tail: &[PhasePair]) -> f64 {
    let h = 1e-7;
    let start = ProjectiveState {
        x: xbar,
        v: TangentVector { v1: 0.0, v2: 1.0, unit: true },
    };
    let base = proj_replay(k, start, tail);
    let [x1, x2] = xbar.coords();
    let mut l: f64 = 1.0;
    for d in 0..3 {
        let (mut a, mut b, mut th) = (x1, x2, PI / 2.0);
        match d {
            0 => a += h,
            1 => b += h,
            _ => th += h,
        }
        let p = ProjectiveState {
            x: TorusPoint::new(a, b),
            v: TangentVector::from_angle(th),
        };
        l = l.max(proj_replay(k, p, tail).dist(&base) / p.dist(&start));
    }
    2.0 * l
}

/// Forward steering of (x, v) to within eps0 of (x̄, (0, 1)).
fn steer_to_vertical(k: f64, s: ProjectiveState, xbar: TorusPoint, eps0: f64, budget: usize) -> Vec<PhasePair> {
    let sp = ShearPair::chirikov(k);
    let [xb1, xb2] = xbar.coords();
    let mut out = Vec::new();
    let mut x = s.x;
    let mut w = (s.v.v1, s.v.v2);
    let push = |ph: PhasePair, x: &mut TorusPoint, w: &mut (f64, f64), out: &mut Vec<PhasePair>| {
        *w = normalize(sp.jacobian(*x, ph).apply(w.0, w.1));
        *x = sp.step(*x, ph);
        out.push(ph);
    };
    if let Ok(ph) = one_point_exact(x, xbar, k) {
        push(ph, &mut x, &mut w, &mut out);
    }
    let parabolic = |x: TorusPoint| {
        let x2 = x.x2.value();
        PhasePair::new(x2 - PI / 2.0, x2 + x.x1.value() + k - xb2)
    };
    if !(w.0 > 0.0 || (w.0 == 0.0 && w.1 > 0.0)) {
        while !(w.1 < w.0 / k) && out.len() < budget {
            let ph = parabolic(x);
            push(ph, &mut x, &mut w, &mut out);
        }
        // cos(x₂ − ω¹) = −1 gives w₁ ← w₁ − K w₂ > 0
        let x2 = x.x2.value();
        let ph = PhasePair::new(x2 - PI, x2 + x.x1.value() - xb2);
        push(ph, &mut x, &mut w, &mut out);
    }
    let close = |x: TorusPoint, w: (f64, f64)| {
        w.0.hypot(w.1 - 1.0) < eps0 / 2.0 && circle_dist(x.x1.value(), xb1) < eps0 / 2.0 && circle_dist(x.x2.value(), xb2) < eps0 / 2.0
    };
    while !close(x, w) && out.len() < budget {
        let ph = parabolic(x);
        push(ph, &mut x, &mut w, &mut out);
    }
    out
}

/// Rational K/π = q/p with p ≤ 1000, detected by continued fractions.
pub fn rational_k_over_pi(k: f64) -> Option<(u64, u64)> {
    let r = k / PI;
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut x = r;
    for _ in 0..40 {
        let a = x.floor();
        let ai = a as i128;
        (h0, h1) = (h1, ai * h1 + h0);
        (k0, k1) = (k1, ai * k1 + k0);
        if k1 > 1000 {
            return None;
        }
        if (h1 as f64 / k1 as f64 - r).abs() <= 1e-9 * r.abs().max(1.0) {
            return Some((h1 as u64, k1 as u64));
        }
        let f = x - a;
        if f == 0.0 {
            return None;
        }
        x = 1.0 / f;
    }
    None
}

pub fn projective_steer(s: ProjectiveState, target: ProjectiveState, eps: f64, k: f64) -> Result<ControlResult> {
    if !(eps > 0.0) {
        return Err(invalid("eps", "must be positive"));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(invalid("K", "must be positive and finite"));
    }
    let d0 = s.dist(&target);
    if d0 < eps {
        return Ok(ControlResult::trivial(d0, eps));
    }
    let (tail, xbar, _) = tangent_alignment(target, k, 64);
    let lip = tail_lipschitz_proj(k, xbar, &tail);
    let mut eps0 = eps / (2.0 * lip);
    let note = match rational_k_over_pi(k) {
        Some((q, p)) => format!("K/pi ~ {q}/{p}; dense search over x1 + nK"),
        None => "dense search over x1 + nK".to_string(),
    };
    let mut best: Option<ControlResult> = None;
    for _ in 0..MAX_RETRIES {
        let budget = 4 * ((12.0 * PI / eps0).floor() as usize + (4.0 / eps0).floor() as usize + 8);
        let head = steer_to_vertical(k, s, xbar, eps0, budget);
        let exhausted = head.len() >= budget;
        let all: Vec<PhasePair> = head.iter().chain(tail.iter()).copied().collect();
        let fin = proj_replay(k, s, &all);
        let dist = fin.dist(&target);
        let r = ControlResult {
            steps: all.len(),
            phases: PhaseSequence::new(all),
            final_distance: dist,
            target_tolerance: eps,
            success: dist < eps,
            stages: vec![("steer".into(), head.len()), ("tail".into(), tail.len())],
            eps0: Some(eps0),
            lipschitz: Some(lip),
            note: note.clone(),
        };
        let done = r.success || exhausted;
        if best.as_ref().is_none_or(|b| r.final_distance < b.final_distance) {
            best = Some(r);
        }
        if done {
            break;
        }
        eps0 /= 2.0;
    }
    Ok(best.expect("at least one attempt"))
}

/// Final state of a projective control sequence, for replay checks.
pub fn projective_replay(k: f64, s: ProjectiveState, phases: &PhaseSequence) -> ProjectiveState {
    proj_replay(k, s, &phases.phases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rds::{draw_phase, RngStreamSpec};
    use crate::torus::{chirikov_step, torus_dist};
    use rand::Rng;

    const K: f64 = 4.0 * PI;

    #[test]
    fn one_point_exact_lands() {
        let mut rng = RngStreamSpec::new(1, 0).rng();
        for _ in 0..10_000 {
            let a = draw_phase(&mut rng);
            let b = draw_phase(&mut rng);
            let x = TorusPoint::new(a.w1.value(), a.w2.value());
            let y = TorusPoint::new(b.w1.value(), b.w2.value());
            let w = one_point_exact(x, y, K).unwrap();
            assert!(torus_dist(chirikov_step(x, w, K), y) < 1e-12);
        }
        let x = TorusPoint::new(0.0, 1.0);
        let y = TorusPoint::new(2.0, 0.5);
        let w = one_point_exact(x, y, 2.0).unwrap();
        assert!(circle_dist(w.w1.value(), 1.0 - PI / 2.0) < 1e-15);
        assert!(torus_dist(chirikov_step(x, w, 2.0), y) < 1e-12);
        assert!(matches!(one_point_exact(x, TorusPoint::new(3.0, 0.0), 2.0), Err(Error::Unreachable { .. })));
    }

    #[test]
    fn aligned_target_constraint() {
        for k in [2.0 * SQRT_2 * PI + 1e-9, K, 50.0] {
            let t = AlignedPairTarget::new(k).unwrap();
            assert!(t.residual(k) < 1e-10);
            assert!(t.xbar2 > PI - 1e-12 && t.xbar2 < TAU);
        }
        assert!(AlignedPairTarget::new(8.0).is_err());
    }

    #[test]
    fn bound_examples() {
        assert_eq!(reachability_bound(PI, 12.0 * PI).unwrap(), 6);
        assert_eq!(reachability_bound(0.1, 0.01).unwrap(), 3804);
        assert!(reachability_bound(0.05, 0.01).unwrap() > reachability_bound(0.1, 0.01).unwrap());
        assert!(reachability_bound(0.0, 0.01).is_err());
    }

    #[test]
    fn dense_rotation_is_net() {
        for eps in [0.1f64, 0.01] {
            let n = (3.0 / eps).floor() as usize + 1;
            let mut pts: Vec<f64> = (1..=n).map(|i| (i as f64 * SQRT_2).fract()).collect();
            pts.sort_by(f64::total_cmp);
            let mut gap = pts[0] + 1.0 - pts[n - 1];
            for w in pts.windows(2) {
                gap = gap.max(w[1] - w[0]);
            }
            assert!(gap / 2.0 < eps);
        }
    }

    #[test]
    fn align_direct_branch() {
        let z = TwoPointState::new(TorusPoint::new(0.0, 0.0), TorusPoint::new(0.0, PI)).unwrap();
        let r = two_point_align(z, K).unwrap();
        assert!(r.success && r.steps <= 3, "{r:?}");
        let end = two_point_endpoint(ShearPair::chirikov(K), z, &r.phases.phases);
        let t = AlignedPairTarget::new(K).unwrap();
        let (a, b) = diff(&end);
        assert!(a.abs() < 1e-10 && circle_dist(b, t.xbar2) < 1e-10);
        assert!(wrap_signed(end.x.x2.value()).abs() < 1e-10);
        // dwell advances x₁ by 2√2π
        let mut cur = end;
        for _ in 0..100_000 {
            let nx = step2(ShearPair::chirikov(K), &cur, dwell_phase(K, &cur, &t));
            let inc = wrap_signed(nx.x.x1.value() - cur.x.x1.value() - 2.0 * SQRT_2 * PI);
            assert!(inc.abs() < 1e-10);
            assert!(diff(&nx).0.abs() < 1e-10);
            cur = nx;
        }
    }

    #[test]
    fn align_escape_branch() {
        for s in [0.5, 0.1, 0.01] {
            let z = TwoPointState::new(TorusPoint::new(1.0, 2.0), TorusPoint::new(1.0 + s, 2.0)).unwrap();
            let r = two_point_align(z, K).unwrap();
            assert!(r.success);
            assert!(r.steps <= (PI / s).floor() as usize + 1 + 3, "s = {s}: {}", r.steps);
        }
        let z = TwoPointState::new(TorusPoint::new(1.0, 2.0), TorusPoint::new(1.0, 2.0 + 1e-3)).unwrap();
        assert!(two_point_align(z, K).unwrap().success);
    }

    #[test]
    fn reach_random_pairs() {
        let mut rng = RngStreamSpec::new(3, 0).rng();
        let mut pt = || TorusPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
        let mut done = 0;
        while done < 20 {
            let (a, b, c, d) = (pt(), pt(), pt(), pt());
            if torus_dist(a, b) < 0.1 || torus_dist(c, d) < 0.1 {
                continue;
            }
            let z = TwoPointState::new(a, b).unwrap();
            let t = TwoPointState::new(c, d).unwrap();
            let r = two_point_reach(z, t, 1e-2, K).unwrap();
            assert!(r.success, "{:?}", (r.final_distance, &r.stages, r.eps0));
            let replay = two_point_endpoint(ShearPair::chirikov(K), z, &r.phases.phases).dist(&t);
            assert_eq!(replay, r.final_distance);
            let eps0 = r.eps0.unwrap();
            assert!(r.stages[1].1 <= (12.0 * PI / eps0).floor() as usize + 1);
            done += 1;
        }
        let z = TwoPointState::new(TorusPoint::new(0.0, 0.0), TorusPoint::new(0.0, 1.0)).unwrap();
        assert_eq!(two_point_reach(z, z, 0.1, K).unwrap().steps, 0);
    }

    #[test]
    fn tangent_alignment_zeroes_first_coordinate() {
        let mut rng = RngStreamSpec::new(8, 0).rng();
        for _ in 0..200 {
            let th = rng.gen_range(0.0..TAU);
            let x = TorusPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
            let tgt = ProjectiveState::new(x, th.cos(), th.sin()).unwrap();
            let (tail, xbar, _) = tangent_alignment(tgt, K, 64);
            let fwd = proj_replay(
                K,
                ProjectiveState {
                    x: xbar,
                    v: TangentVector { v1: 0.0, v2: 1.0, unit: true },
                },
                &tail,
            );
            assert!(fwd.dist(&tgt) < 1e-9, "{}", fwd.dist(&tgt));
            assert!(tail.len() <= 4);
        }
        // [w]₁ < 0 case: exact zero
        let tgt = ProjectiveState::new(TorusPoint::new(1.0, 2.0), -0.6, 0.8).unwrap();
        let sp = ShearPair::chirikov(K);
        let (tail, xbar, _) = tangent_alignment(tgt, K, 64);
        let mut x = tgt.x;
        let mut w = (tgt.v.v1, tgt.v.v2);
        for &ph in tail.iter().rev() {
            let xp = sp.inverse(x, ph);
            w = inv_apply(sp.jacobian(xp, ph), w);
            x = xp;
        }
        assert!(w.0.abs() < 1e-10 && w.1 > 0.0);
        assert!(torus_dist(x, xbar) < 1e-12);
    }

    #[test]
    fn projective_random_pairs() {
        let mut rng = RngStreamSpec::new(4, 0).rng();
        for _ in 0..20 {
            let mut st = || {
                let th: f64 = rng.gen_range(0.0..TAU);
                ProjectiveState::new(TorusPoint::new(rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)), th.cos(), th.sin()).unwrap()
            };
            let (a, b) = (st(), st());
            let r = projective_steer(a, b, 1e-2, K).unwrap();
            assert!(r.success, "{:?}", (r.final_distance, &r.stages));
            assert_eq!(projective_replay(K, a, &r.phases).dist(&b), r.final_distance);
        }
        let s = ProjectiveState::new(TorusPoint::new(1.0, 1.0), 1.0, 0.0).unwrap();
        assert_eq!(projective_steer(s, s, 0.1, K).unwrap().steps, 0);
    }

    #[test]
    fn projective_irrational_k() {
        let s = ProjectiveState::new(TorusPoint::new(0.3, 4.0), -1.0, -0.2).unwrap();
        let t = ProjectiveState::new(TorusPoint::new(5.0, 1.0), 0.3, -1.0).unwrap();
        let r = projective_steer(s, t, 1e-2, 13.0).unwrap();
        assert!(r.success, "{:?}", (r.final_distance, &r.stages));
    }

    #[test]
    fn rational_detection() {
        assert_eq!(rational_k_over_pi(4.0 * PI), Some((4, 1)));
        assert_eq!(rational_k_over_pi(1.5 * PI), Some((3, 2)));
        assert_eq!(rational_k_over_pi(SQRT_2 * PI * 3.0), None);
    }
}
