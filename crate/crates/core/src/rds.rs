//! One-point, projective and two-point Markov chains driven by i.i.d.
//! uniform phases, plus the derivative cocycle.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{torus_dist, wrap, Mat2, PhasePair, ShearPair, TangentVector, TorusPoint};

/// Longest product `derivative_cocycle` will form.
pub const COCYCLE_MAX_LEN: usize = 60;
/// Separations below this count as a numerical diagonal collision.
pub const SEPARATION_FLOOR: f64 = 1e-300;
/// 32-bit ChaCha words consumed per phase pair (two f64 draws).
pub const WORDS_PER_PHASE: u128 = 4;

/// Counter-based stream: ChaCha8 keyed by `seed`, nonce `stream_id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStreamSpec {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStreamSpec {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStreamSpec { seed, stream_id }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream_id);
        r
    }

    /// Generator positioned at phase pair number `index` of this stream.
    pub fn rng_at_phase(self, index: u64) -> ChaCha8Rng {
        let mut r = self.rng();
        r.set_word_pos(index as u128 * WORDS_PER_PHASE);
        r
    }

    pub fn substream(self, k: u64) -> Self {
        RngStreamSpec {
            seed: self.seed,
            stream_id: splitmix(self.stream_id ^ splitmix(k.wrapping_add(0x9E37_79B9_7F4A_7C15))),
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn uniform_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    wrap(rng.gen::<f64>() * TAU)
}

#[inline]
pub fn draw_phase<R: Rng + ?Sized>(rng: &mut R) -> PhasePair {
    let w1 = uniform_angle(rng);
    let w2 = uniform_angle(rng);
    PhasePair::new(w1, w2)
}

/// Phases ω₁, …, ω_n; `phases[i]` is applied at step i + 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseSequence {
    pub phases: Vec<PhasePair>,
}

impl PhaseSequence {
    pub fn new(phases: Vec<PhasePair>) -> Self {
        PhaseSequence { phases }
    }

    pub fn constant(w: PhasePair, n: usize) -> Self {
        PhaseSequence { phases: vec![w; n] }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PhasePair> {
        self.phases.iter()
    }

    pub fn concat(&self, other: &PhaseSequence) -> PhaseSequence {
        let mut phases = self.phases.clone();
        phases.extend_from_slice(&other.phases);
        PhaseSequence { phases }
    }
}

pub fn sample_phases(stream: RngStreamSpec, n: usize) -> PhaseSequence {
    let mut rng = stream.rng();
    PhaseSequence {
        phases: (0..n).map(|_| draw_phase(&mut rng)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointState {
    pub x: TorusPoint,
    pub y: TorusPoint,
}

impl TwoPointState {
    pub fn new(x: TorusPoint, y: TorusPoint) -> Result<Self> {
        let d = torus_dist(x, y);
        if d > 0.0 {
            Ok(TwoPointState { x, y })
        } else {
            Err(Error::Diagonal(d))
        }
    }

    pub fn separation(&self) -> f64 {
        torus_dist(self.x, self.y)
    }

    /// Sum of the component distances, the metric on 𝕋²×𝕋² used by the controllers.
    pub fn dist(&self, o: &TwoPointState) -> f64 {
        torus_dist(self.x, o.x) + torus_dist(self.y, o.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectiveState {
    pub x: TorusPoint,
    pub v: TangentVector,
}

impl ProjectiveState {
    pub fn new(x: TorusPoint, v1: f64, v2: f64) -> Result<Self> {
        let v = TangentVector::unit(v1, v2).ok_or(Error::DegenerateTangent(0))?;
        Ok(ProjectiveState { x, v })
    }

    /// Torus distance plus chordal distance of the unit vectors.
    pub fn dist(&self, o: &ProjectiveState) -> f64 {
        torus_dist(self.x, o.x) + (self.v.v1 - o.v.v1).hypot(self.v.v2 - o.v.v2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CocycleAccumulator {
    pub x: TorusPoint,
    pub v: TangentVector,
    pub log_norm_sum: f64,
}

impl CocycleAccumulator {
    pub fn new(s: ProjectiveState) -> Self {
        CocycleAccumulator {
            x: s.x,
            v: s.v,
            log_norm_sum: 0.0,
        }
    }

    #[inline]
    pub fn step(&mut self, sp: ShearPair, w: PhasePair) {
        let (u1, u2) = sp.jacobian(self.x, w).apply(self.v.v1, self.v.v2);
        let n = u1.hypot(u2);
        self.log_norm_sum += n.ln();
        self.v = TangentVector {
            v1: u1 / n,
            v2: u2 / n,
            unit: true,
        };
        self.x = sp.step(self.x, w);
    }

    pub fn state(&self) -> ProjectiveState {
        ProjectiveState { x: self.x, v: self.v }
    }
}

pub fn iterate_one_point_with(sp: ShearPair, x: TorusPoint, phases: &PhaseSequence) -> Vec<TorusPoint> {
    let mut out = Vec::with_capacity(phases.len() + 1);
    let mut cur = x;
    out.push(cur);
    for &w in phases.iter() {
        cur = sp.step(cur, w);
        out.push(cur);
    }
    out
}

pub fn iterate_one_point(x: TorusPoint, phases: &PhaseSequence, k: f64) -> Vec<TorusPoint> {
    iterate_one_point_with(ShearPair::chirikov(k), x, phases)
}

pub fn iterate_two_point_with(sp: ShearPair, z: TwoPointState, phases: &PhaseSequence) -> Result<Vec<TwoPointState>> {
    let mut out = Vec::with_capacity(phases.len() + 1);
    let mut cur = z;
    out.push(cur);
    for (i, &w) in phases.iter().enumerate() {
        cur = TwoPointState {
            x: sp.step(cur.x, w),
            y: sp.step(cur.y, w),
        };
        let s = cur.separation();
        if s < SEPARATION_FLOOR {
            return Err(Error::SeparationUnderflow {
                step: i + 1,
                separation: s,
            });
        }
        out.push(cur);
    }
    Ok(out)
}

pub fn iterate_two_point(z: TwoPointState, phases: &PhaseSequence, k: f64) -> Result<Vec<TwoPointState>> {
    iterate_two_point_with(ShearPair::chirikov(k), z, phases)
}

/// Final two-point state without storing the trajectory.
pub fn two_point_endpoint(sp: ShearPair, z: TwoPointState, phases: &[PhasePair]) -> TwoPointState {
    let mut cur = z;
    for &w in phases {
        cur = TwoPointState {
            x: sp.step(cur.x, w),
            y: sp.step(cur.y, w),
        };
    }
    cur
}

pub fn iterate_projective_with(sp: ShearPair, s: ProjectiveState, phases: &PhaseSequence) -> Result<ProjectiveState> {
    let mut x = s.x;
    let (mut v1, mut v2) = (s.v.v1, s.v.v2);
    for (i, &w) in phases.iter().enumerate() {
        let (u1, u2) = sp.jacobian(x, w).apply(v1, v2);
        let n = u1.hypot(u2);
        if !(n >= SEPARATION_FLOOR) || !n.is_finite() {
            return Err(Error::DegenerateTangent(i + 1));
        }
        v1 = u1 / n;
        v2 = u2 / n;
        x = sp.step(x, w);
    }
    Ok(ProjectiveState {
        x,
        v: TangentVector { v1, v2, unit: true },
    })
}

pub fn iterate_projective(s: ProjectiveState, phases: &PhaseSequence, k: f64) -> Result<ProjectiveState> {
    iterate_projective_with(ShearPair::chirikov(k), s, phases)
}

pub fn derivative_cocycle_with(sp: ShearPair, x: TorusPoint, phases: &PhaseSequence) -> Result<Mat2> {
    if phases.len() > COCYCLE_MAX_LEN {
        return Err(Error::CocycleTooLong(phases.len(), COCYCLE_MAX_LEN));
    }
    let mut m = Mat2::IDENTITY;
    let mut cur = x;
    for &w in phases.iter() {
        m = sp.jacobian(cur, w) * m;
        cur = sp.step(cur, w);
    }
    Ok(m)
}

pub fn derivative_cocycle(x: TorusPoint, phases: &PhaseSequence, k: f64) -> Result<Mat2> {
    derivative_cocycle_with(ShearPair::chirikov(k), x, phases)
}

pub fn log_norm_growth_with(sp: ShearPair, x: TorusPoint, v: TangentVector, phases: &[PhasePair]) -> (ProjectiveState, f64) {
    let mut acc = CocycleAccumulator {
        x,
        v,
        log_norm_sum: 0.0,
    };
    for &w in phases {
        acc.step(sp, w);
    }
    (acc.state(), acc.log_norm_sum)
}

pub fn log_norm_growth(x: TorusPoint, v: TangentVector, phases: &PhaseSequence, k: f64) -> (ProjectiveState, f64) {
    log_norm_growth_with(ShearPair::chirikov(k), x, v, &phases.phases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{chirikov_step, jacobian};
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn sampling_is_deterministic_and_uniform() {
        let s = RngStreamSpec::new(7, 3);
        assert!(sample_phases(s, 0).is_empty());
        let a = sample_phases(s, 1000);
        assert_eq!(a, sample_phases(s, 1000));
        assert_ne!(a, sample_phases(RngStreamSpec::new(7, 4), 1000));
        let n = 1_000_000;
        let seq = sample_phases(RngStreamSpec::new(11, 0), n);
        let mean = seq.iter().map(|w| w.w1.value()).sum::<f64>() / n as f64;
        let sigma = TAU / (12.0f64).sqrt() / (n as f64).sqrt();
        assert!((mean - PI).abs() < 4.0 * sigma);
        assert!(seq.iter().all(|w| (0.0..TAU).contains(&w.w1.value()) && (0.0..TAU).contains(&w.w2.value())));
    }

    #[test]
    fn positioned_generator_matches_sequential_draws() {
        let s = RngStreamSpec::new(1, 2);
        let seq = sample_phases(s, 50);
        let mut r = s.rng_at_phase(37);
        assert_eq!(draw_phase(&mut r), seq.phases[37]);
        assert_eq!(draw_phase(&mut r), seq.phases[38]);
    }

    #[test]
    fn one_point_examples() {
        let x = TorusPoint::new(0.0, 0.0);
        assert_eq!(iterate_one_point(x, &PhaseSequence::default(), 3.0), vec![x]);
        let traj = iterate_one_point(x, &PhaseSequence::constant(PhasePair::default(), 10), 3.0);
        assert!(traj.iter().all(|p| *p == x));
        let w = PhasePair::new(0.4, 2.0);
        let y = TorusPoint::new(1.0, 2.5);
        assert_eq!(iterate_one_point(y, &PhaseSequence::new(vec![w]), 3.0)[1], chirikov_step(y, w, 3.0));
    }

    #[test]
    fn two_point_fixed_pair_and_equivariance() {
        let z = TwoPointState::new(TorusPoint::new(0.0, 0.0), TorusPoint::new(0.0, PI)).unwrap();
        // sin(π) roundoff grows by the hyperbolic multiplier (~8 at K = 9) per step
        let traj = iterate_two_point(z, &PhaseSequence::constant(PhasePair::default(), 5), 9.0).unwrap();
        assert!(traj.iter().all(|s| s.dist(&z) < 1e-9));
        let ph = sample_phases(RngStreamSpec::new(5, 5), 40);
        let z = TwoPointState::new(TorusPoint::new(1.0, 2.0), TorusPoint::new(4.0, 0.5)).unwrap();
        let tp = iterate_two_point(z, &ph, 12.0).unwrap();
        let xs = iterate_one_point(z.x, &ph, 12.0);
        let ys = iterate_one_point(z.y, &ph, 12.0);
        for i in 0..=40 {
            assert_eq!(tp[i].x, xs[i]);
            assert_eq!(tp[i].y, ys[i]);
        }
        assert!(TwoPointState::new(z.x, z.x).is_err());
    }

    #[test]
    fn projective_fixed_direction_and_antipode() {
        let k: f64 = 5.0;
        let s = (k * k + 4.0 * k).sqrt();
        let v = ProjectiveState::new(TorusPoint::new(0.0, 0.0), (-k + s) / 2.0, 1.0).unwrap();
        let out = iterate_projective(v, &PhaseSequence::new(vec![PhasePair::default()]), k).unwrap();
        assert!(out.dist(&v) < 1e-10);
        let ph = sample_phases(RngStreamSpec::new(9, 1), 25);
        let p = ProjectiveState::new(TorusPoint::new(0.3, 1.1), 0.6, -0.8).unwrap();
        let q = ProjectiveState::new(p.x, -0.6, 0.8).unwrap();
        let a = iterate_projective(p, &ph, 4.0).unwrap();
        let b = iterate_projective(q, &ph, 4.0).unwrap();
        assert_eq!(a.x, b.x);
        assert!((a.v.v1 + b.v.v1).abs() < 1e-15 && (a.v.v2 + b.v.v2).abs() < 1e-15);
        assert!((a.v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cocycle_examples() {
        let x = TorusPoint::new(0.0, 0.0);
        assert_eq!(derivative_cocycle(x, &PhaseSequence::default(), 5.0).unwrap(), Mat2::IDENTITY);
        let w = PhasePair::new(0.2, 0.9);
        let one = derivative_cocycle(x, &PhaseSequence::new(vec![w]), 5.0).unwrap();
        assert_eq!(one, jacobian(x, w, 5.0));
        let two = derivative_cocycle(x, &PhaseSequence::constant(PhasePair::default(), 2), 5.0).unwrap();
        let j = Mat2::new(1.0, 5.0, 1.0, 6.0);
        assert!(two.max_abs_diff(j * j) < 1e-12);
        assert!((two.det() - 1.0).abs() < 1e-10);
        assert!(derivative_cocycle(x, &PhaseSequence::constant(w, 61), 5.0).is_err());
    }

    #[test]
    fn cocycle_property() {
        let k = 7.0;
        let x = TorusPoint::new(2.0, 0.4);
        let a = sample_phases(RngStreamSpec::new(3, 0), 12);
        let b = sample_phases(RngStreamSpec::new(3, 1), 9);
        let whole = derivative_cocycle(x, &a.concat(&b), k).unwrap();
        let mid = *iterate_one_point(x, &a, k).last().unwrap();
        let prod = derivative_cocycle(mid, &b, k).unwrap() * derivative_cocycle(x, &a, k).unwrap();
        assert!(whole.max_abs_diff(prod) <= 1e-9 * whole.frobenius());
    }

    #[test]
    fn log_growth_matches_cocycle_and_parabolic_case() {
        let k = 6.0;
        let x = TorusPoint::new(0.7, 3.3);
        let v = TangentVector::unit(0.3, 1.0).unwrap();
        let ph = sample_phases(RngStreamSpec::new(4, 4), 40);
        let (_, s) = log_norm_growth(x, v, &ph, k);
        let m = derivative_cocycle(x, &ph, k).unwrap();
        let (u1, u2) = m.apply(v.v1, v.v2);
        assert!((s.exp() / u1.hypot(u2) - 1.0).abs() < 1e-8);
        assert_eq!(log_norm_growth(x, v, &PhaseSequence::default(), k).1, 0.0);

        // parabolic forcing: choose ω¹ = x2 − π/2 at every step
        let mut cur = x;
        let mut phases = Vec::new();
        for i in 0..30 {
            let w = PhasePair::new(cur.x2.value() - FRAC_PI_2, 0.1 * i as f64);
            phases.push(w);
            cur = chirikov_step(cur, w, k);
        }
        let v0 = TangentVector::unit(0.0, 1.0).unwrap();
        let (end, s) = log_norm_growth(x, v0, &PhaseSequence::new(phases), k);
        assert!(s.abs() < 1e-12);
        assert!((end.v.v2 - 1.0).abs() < 1e-12);
    }
}
