use std::f64::consts::{PI, TAU};

use chirikov::control::{projective_replay, projective_steer, two_point_reach};
use chirikov::estimators::{contraction_estimate_with, lyapunov::lyapunov_exponent_with, McConfig};
use chirikov::rds::{iterate_two_point_with, sample_phases, PhaseSequence, ProjectiveState, RngStreamSpec, TwoPointState};
use chirikov::torus::{PhasePair, ShearPair, TorusPoint};
use chirikov::transport::{GridSpec, SpectralField, Transport};

fn pool(n: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap()
}

#[test]
fn inviscid_period_is_pointwise_pullback() {
    let n = 256;
    let k = 4.0 * PI;
    let sp = ShearPair::chirikov(k);
    let tr = Transport::new(GridSpec::new(n, false).unwrap());
    let f0 = SpectralField::real_mode(tr.grid, 1, 0).unwrap();
    let w = PhasePair::new(0.9, 4.2);
    let (f1, _) = tr.step_period(&f0, sp, w, 0.0, 8);
    let phys = f1.to_physical();
    let mut worst = 0.0f64;
    for j1 in 0..n {
        for j2 in 0..n {
            let x = TorusPoint::new(TAU * j1 as f64 / n as f64, TAU * j2 as f64 / n as f64);
            let pre = sp.inverse(x, w);
            let want = 2.0 * pre.x1.value().cos();
            worst = worst.max((phys[j1 * n + j2].re - want).abs());
        }
    }
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn estimates_are_worker_count_invariant() {
    let cfg = McConfig::new(4000, 17, 3, 3);
    let run = |w: usize| pool(w).install(|| contraction_estimate_with(ShearPair::chirikov(60.0), 60.0, 2, &[0.25], &cfg).unwrap());
    let (a, b) = (run(1), run(4));
    assert_eq!(a, b);
    let lyap = |w: usize| pool(w).install(|| lyapunov_exponent_with(ShearPair::pierrehumbert(30.0), 2000, 8, RngStreamSpec::new(3, 1)).unwrap());
    assert_eq!(lyap(1).lambda1.mean.to_bits(), lyap(3).lambda1.mean.to_bits());
}

#[test]
fn steering_replays_through_the_process_api() {
    let k = 4.0 * PI;
    let sp = ShearPair::chirikov(k);
    let z = TwoPointState::new(TorusPoint::new(0.3, 5.9), TorusPoint::new(2.2, 1.1)).unwrap();
    let t = TwoPointState::new(TorusPoint::new(4.0, 0.2), TorusPoint::new(1.0, 3.3)).unwrap();
    let r = two_point_reach(z, t, 1e-2, k).unwrap();
    assert!(r.success, "{}", r.final_distance);
    let traj = iterate_two_point_with(sp, z, &r.phases).unwrap();
    assert_eq!(traj.len(), r.steps + 1);
    assert_eq!(traj.last().unwrap().dist(&t).to_bits(), r.final_distance.to_bits());

    let a = ProjectiveState::new(TorusPoint::new(1.0, 2.0), 0.6, 0.8).unwrap();
    let b = ProjectiveState::new(TorusPoint::new(5.0, 0.5), -1.0, 0.0).unwrap();
    let p = projective_steer(a, b, 1e-2, k).unwrap();
    assert!(p.success);
    assert_eq!(projective_replay(k, a, &p.phases).dist(&b).to_bits(), p.final_distance.to_bits());
}

#[test]
fn phase_streams_split_into_independent_substreams() {
    let s = RngStreamSpec::new(11, 4);
    let whole = sample_phases(s, 100);
    assert_eq!(whole, sample_phases(s, 100));
    let head = PhaseSequence::new(whole.phases[..40].to_vec());
    assert_eq!(head, sample_phases(s, 40));
    assert_ne!(sample_phases(s.substream(0), 10), sample_phases(s.substream(1), 10));
}
