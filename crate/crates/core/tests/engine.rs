mod common;

use common::{mean, var_se};
use lookdown::domain::{Domain, RateFn, TypeLaw, TypePoint};
use lookdown::engine::{replicate_map, resume, run, run_replicates, InitialState, ModelSpec, SnapshotSchedule};
use lookdown::mechanisms::{ImmigrationSource, Mechanism, MotionKernel};
use lookdown::models::{preset_moran, MoranParams};
use lookdown::rng::replicate_seed;
use lookdown::stats::performance::serialize_run;
use lookdown::Error;

fn pure_death(n0: usize, seed: u64) -> ModelSpec {
    ModelSpec {
        domain: Domain::site(1),
        lambda: 1.0,
        initial: InitialState::UniformLevels { types: vec![TypePoint::site(0); n0] },
        mechanisms: vec![Mechanism::PureDeath { d0: RateFn::Const(1.0) }],
        t_end: 1.0,
        seed,
        ..ModelSpec::default()
    }
}

fn immigration(rate: f64) -> ModelSpec {
    ModelSpec {
        domain: Domain::site(1),
        lambda: 2.0,
        mechanisms: vec![Mechanism::Immigration { source: ImmigrationSource { arrival_rate: rate, type_law: TypeLaw::Fixed(TypePoint::site(0)) } }],
        t_end: 2.0,
        seed: 3,
        ..ModelSpec::default()
    }
}

fn moran(seed: u64) -> ModelSpec {
    let mut s = preset_moran(&MoranParams { n: 20, gamma: 1.0, n_alleles: 3, sites: None, motion: MotionKernel::None }).unwrap();
    s.seed = seed;
    s.snapshots = SnapshotSchedule::Every(0.5);
    s
}

#[test]
fn pure_death_is_deterministic_given_levels() {
    // a particle survives to t exactly when u e^t < λ
    let t = run(&pure_death(40, 1)).unwrap();
    let start = &t.snapshots[0];
    let end = t.final_config();
    assert_eq!(end.time, 1.0);
    let mut want: Vec<(u64, f64)> = start.particles.iter().filter(|p| p.u * 1f64.exp() < 1.0).map(|p| (p.id, p.u * 1f64.exp())).collect();
    let mut got: Vec<(u64, f64)> = end.particles.iter().map(|p| (p.id, p.u)).collect();
    want.sort_by_key(|p| p.0);
    got.sort_by_key(|p| p.0);
    assert_eq!(want.len(), got.len());
    for (w, g) in want.iter().zip(&got) {
        assert_eq!(w.0, g.0);
        assert!((w.1 - g.1).abs() < 1e-9);
    }
}

#[test]
fn pure_death_survivors_are_binomial() {
    let n0 = 50;
    let reps = run_replicates(&pure_death(n0, 0), 4000, 77, None).unwrap();
    let counts: Vec<f64> = reps.iter().map(|r| r.snapshots.last().unwrap().count as f64).collect();
    let p = (-1.0f64).exp();
    let sd = (n0 as f64 * p * (1.0 - p) / counts.len() as f64).sqrt();
    assert!((mean(&counts) - n0 as f64 * p).abs() <= 3.0 * sd, "mean {}", mean(&counts));
    let (v, _) = var_se(&counts);
    assert!((v / (n0 as f64 * p * (1.0 - p)) - 1.0).abs() < 0.1, "variance {v}");
}

#[test]
fn immigration_count_is_poisson() {
    let reps = run_replicates(&immigration(3.0), 4000, 5, None).unwrap();
    let counts: Vec<f64> = reps.iter().map(|r| r.snapshots.last().unwrap().count as f64).collect();
    assert!((mean(&counts) - 6.0).abs() <= 3.0 * (6.0f64 / 4000.0).sqrt(), "mean {}", mean(&counts));
}

#[test]
fn resume_matches_a_single_run() {
    let whole = run(&moran(9)).unwrap();
    let mut half = moran(9);
    half.t_end = 0.5;
    let first = run(&half).unwrap();
    let joined = resume(&first, 0.5).unwrap();
    assert_eq!(joined.spec.t_end, 1.0);
    assert_eq!(serialize_run(&joined), serialize_run(&whole));

    let same = resume(&first, 0.0).unwrap();
    assert_eq!(serialize_run(&same), serialize_run(&first));
    assert!(resume(&first, -1.0).is_err());
}

#[test]
fn resume_needs_state() {
    let t = replicate_map(&moran(1), 1, 1, Some(1), |_, t| t).unwrap().pop().unwrap();
    assert!(matches!(resume(&t, 1.0), Err(Error::MissingState)));
}

#[test]
fn event_log_is_time_ordered() {
    let t = run(&moran(2)).unwrap();
    assert!(!t.events.is_empty());
    assert!(t.events.windows(2).all(|w| w[0].time <= w[1].time));
    assert!(t.events.iter().all(|e| e.time <= 1.0 && e.population == 20));
    assert_eq!(t.n_events as usize, t.events.len());
}

#[test]
fn single_replicate_is_a_plain_run() {
    let spec = moran(0);
    let via_map = replicate_map(&spec, 1, 123, Some(1), |_, t| serialize_run(&t)).unwrap();
    let direct = run(&spec.with_seed(replicate_seed(123, 0))).unwrap();
    assert_eq!(via_map[0], serialize_run(&direct));
    let parallel = replicate_map(&spec, 6, 123, Some(3), |_, t| serialize_run(&t)).unwrap();
    let serial = replicate_map(&spec, 6, 123, Some(1), |_, t| serialize_run(&t)).unwrap();
    assert_eq!(parallel, serial);
}

#[test]
fn different_seeds_give_different_runs() {
    assert_ne!(serialize_run(&run(&moran(1)).unwrap()), serialize_run(&run(&moran(2)).unwrap()));
}

#[test]
fn snapshots_follow_the_schedule() {
    let t = run(&moran(4)).unwrap();
    let times: Vec<f64> = t.snapshots.iter().map(|c| c.time).collect();
    assert_eq!(times, vec![0.0, 0.5, 1.0]);
    let mut s = moran(4);
    s.snapshots = SnapshotSchedule::Times(vec![0.3]);
    let times: Vec<f64> = run(&s).unwrap().snapshots.iter().map(|c| c.time).collect();
    assert_eq!(times, vec![0.0, 0.3, 1.0]);
}

#[test]
fn invalid_specs_are_rejected() {
    let mut s = moran(0);
    s.snapshots = SnapshotSchedule::Times(vec![2.0]);
    assert!(matches!(run(&s), Err(Error::InvalidSpec(_))));
    let mut s = moran(0);
    s.lambda = -1.0;
    assert!(run(&s).is_err());
    let mut s = moran(0);
    s.t_end = f64::NAN;
    assert!(run(&s).is_err());
    assert!(run_replicates(&moran(0), 0, 1, None).is_err());
}

#[test]
fn population_cap_aborts() {
    let mut s = immigration(100.0);
    s.particle_cap = 10;
    match run(&s) {
        Err(Error::PopulationCap { count, cap, .. }) => assert!(count > cap && cap == 10),
        other => panic!("expected a cap error, got {:?}", other.map(|t| t.final_config().len())),
    }
}

#[test]
fn empty_model_stays_empty() {
    let s = ModelSpec { t_end: 3.0, ..ModelSpec::default() };
    let t = run(&s).unwrap();
    assert!(t.final_config().is_empty());
    assert!(t.events.is_empty());
}
