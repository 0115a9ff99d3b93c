mod common;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use common::{ks_critical_001, ks_distance, mean, var_se, within_3se};
use lookdown::config::{sample_uniform_levels, Configuration};
use lookdown::domain::{Domain, TypePoint};
use lookdown::engine::{replicate_map, run, InitialState, ModelSpec, SnapshotSchedule};
use lookdown::mechanisms::{MotionKernel, PairRate};
use lookdown::models::{
    alpha_z, preset_branching, preset_moran, preset_slfv_second, preset_voter, slfv_second_event, BranchingParams, MoranParams, Preset,
    SlfvEvent, SlfvEventLaw, SlfvOffspring, SlfvParams, VoterParams,
};
use lookdown::rng::stream;

fn moran(n: usize, gamma: f64) -> ModelSpec {
    preset_moran(&MoranParams { n, gamma, n_alleles: 2, sites: None, motion: MotionKernel::None }).unwrap()
}

#[test]
fn moran_pair_waits_exponentially() {
    let gamma = 1.5;
    let mut spec = moran(2, gamma);
    spec.t_end = 30.0;
    let firsts: Vec<f64> = replicate_map(&spec, 4000, 1, None, |_, t| t.events[0].time).unwrap();
    let d = ks_distance(&firsts, |x| 1.0 - (-gamma * x).exp());
    assert!(d < ks_critical_001(firsts.len()), "D = {d}");
}

#[test]
fn moran_allele_count_is_a_martingale() {
    let spec = moran(20, 1.0);
    let counts: Vec<f64> = replicate_map(&spec, 3000, 2, None, |_, t| t.final_config().allele_counts()[0] as f64).unwrap();
    assert!(within_3se(&counts, 10.0), "mean {}", mean(&counts));
    // with 20 particles fixation by t = 1 is rare
    assert!(counts.iter().any(|&c| c > 0.0 && c < 20.0));
}

#[test]
fn preset_parameters_are_checked() {
    assert!(preset_moran(&MoranParams { n: 1, gamma: 1.0, n_alleles: 2, sites: None, motion: MotionKernel::None }).is_err());
    let b = BranchingParams { n0: 5, r: 1.0, k: 0, critical: false, lambda: 10.0, rate_scale: 1.0 };
    assert!(preset_branching(&b).is_err());
    assert!(preset_branching(&BranchingParams { k: 1, n0: 0, ..b.clone() }).is_err());
    assert!(preset_branching(&BranchingParams { k: 1, ..b }).is_ok());
    let voter = VoterParams { size: 1, dim: 1, pair_rate: PairRate::Const(1.0), allele_weights: vec![1.0, 1.0] };
    assert!(preset_voter(&voter).is_err());
    // fixed offspring must match λ α_z
    let law = SlfvEventLaw::single(1.0, 0.5, 1.0, SlfvOffspring::Fixed(3));
    assert!(preset_slfv_second(&SlfvParams { dim: 1, side: 10.0, n_alleles: 2, law, level_cap: 5.0 }).is_err());
}

#[test]
fn presets_parse_by_name() {
    let p: Preset = serde_json::from_str(r#"{"preset":"moran","n":4,"gamma":2.0}"#).unwrap();
    let spec = p.build().unwrap();
    assert_eq!(spec.domain.n_alleles, 2);
    assert!(serde_json::from_str::<Preset>(r#"{"preset":"nope"}"#).is_err());
}

fn slfv_second(offspring: SlfvOffspring) -> ModelSpec {
    let law = SlfvEventLaw::single(1.0, 0.5, 0.3, offspring);
    let mut s = preset_slfv_second(&SlfvParams { dim: 1, side: 10.0, n_alleles: 2, law, level_cap: 5.0 }).unwrap();
    s.t_end = 2.0;
    s.record_lineage = false;
    s.record_events = false;
    s
}

#[test]
fn slfv_second_mean_population_path() {
    // each event: E ΔN = −ζ N_D + ζ λ |D| − (1 − ζ), so with events at rate 0.3 per unit length
    // dE N/dt = 0.3 (45 − N) on a torus of length 10 with λ = 5, |D| = 2, ζ = ½
    let counts: Vec<f64> = replicate_map(&slfv_second(SlfvOffspring::Poisson), 4000, 3, None, |_, t| t.final_config().len() as f64).unwrap();
    let want = 45.0 + 5.0 * (-0.3f64 * 2.0).exp();
    assert!(within_3se(&counts, want), "mean {} vs {want}", mean(&counts));
}

#[test]
fn slfv_second_single_event_mean() {
    // E N_D' = (1 − ζ)(N_D − P(K ≥ 1)) + λ ζ |D|: the parent leaves only when offspring are born.
    // Particles outside D are untouched.
    let d = Domain::torus(1, 10.0, 2);
    let lambda = 2.0;
    let zeta = 0.5;
    let ev = SlfvEvent { center: [5.0, 0.0, 0.0], w: 1.0, zeta };
    assert!((alpha_z(&d, zeta, 1.0) - 2.0).abs() < 1e-12);
    let mut types: Vec<TypePoint> = (0..7).map(|i| TypePoint::at(&[4.2 + 0.2 * i as f64], 0)).collect();
    types.extend((0..3).map(|i| TypePoint::at(&[1.0 + i as f64], 1)));
    let mut rng = stream(4, 0);
    // mean offspring λ α_z = 4
    for (law, p_birth) in [
        (SlfvOffspring::Poisson, 1.0 - (-4.0f64).exp()),
        (SlfvOffspring::Geometric, 0.8),
        (SlfvOffspring::Fixed(4), 1.0),
    ] {
        let law = SlfvEventLaw::single(1.0, zeta, 1.0, law);
        let mut inside = Vec::new();
        for _ in 0..100_000 {
            let base = sample_uniform_levels(&types, d, lambda, &mut rng).unwrap();
            let mut c = base.clone();
            slfv_second_event(&mut c, &law, &ev, &mut rng, false).unwrap();
            let outside: Vec<_> = c.particles.iter().filter(|p| !d.in_ball(&ev.center, ev.w, &p.x)).collect();
            assert_eq!(outside.len(), 3);
            assert!(outside.iter().all(|p| base.particles.iter().any(|q| q.id == p.id && q.u == p.u)));
            inside.push((c.len() - 3) as f64);
        }
        let want = (1.0 - zeta) * (7.0 - p_birth) + lambda * zeta * 2.0;
        assert!(within_3se(&inside, want), "{:?}: mean {} vs {want}", law.offspring, mean(&inside));
    }
}

fn voter(size: u32) -> ModelSpec {
    preset_voter(&VoterParams { size, dim: 1, pair_rate: PairRate::WithinDistance { radius: 1.0, rate: 1.0 }, allele_weights: vec![1.0, 1.0] }).unwrap()
}

#[test]
fn two_site_voter_reaches_consensus_at_rate_one() {
    let mut spec = voter(2);
    // on a ring of two sites the neighbours coincide, so use a constant pair rate
    spec.mechanisms = preset_voter(&VoterParams { size: 2, dim: 1, pair_rate: PairRate::Const(1.0), allele_weights: vec![1.0, 1.0] })
        .unwrap()
        .mechanisms;
    spec.initial = InitialState::Explicit { particles: vec![(TypePoint::at(&[0.0], 0), 0.3), (TypePoint::at(&[1.0], 1), 0.6)] };
    spec.t_end = 30.0;
    spec.snapshots = SnapshotSchedule::Times(Vec::new());
    let times: Vec<f64> = replicate_map(&spec, 4000, 5, None, |_, t| {
        assert_eq!(t.final_config().allele_counts().iter().filter(|&&c| c > 0).count(), 1);
        t.events[0].time
    })
    .unwrap();
    let d = ks_distance(&times, |x| 1.0 - (-x).exp());
    assert!(d < ks_critical_001(times.len()), "D = {d}");
}

fn interfaces(alleles: &[u32]) -> f64 {
    let n = alleles.len();
    (0..n).filter(|&i| alleles[i] != alleles[(i + 1) % n]).count() as f64
}

fn site_alleles(c: &Configuration, size: usize) -> Vec<u32> {
    let mut out = vec![u32::MAX; size];
    for p in &c.particles {
        let s = p.x.loc[0].round() as usize % size;
        assert_eq!(out[s], u32::MAX, "two particles on site {s}");
        out[s] = p.x.allele;
    }
    assert!(out.iter().all(|&a| a != u32::MAX));
    out
}

/// Classical voter model on a ring: each edge at rate 1, a uniform endpoint copies the other.
fn classical_voter(size: usize, t_end: f64, rng: &mut impl Rng) -> Vec<u32> {
    let mut a: Vec<u32> = (0..size).map(|_| rng.random_range(0..2)).collect();
    let clock = Exp::new(size as f64).unwrap();
    let mut t = clock.sample(rng);
    while t <= t_end {
        let e = rng.random_range(0..size);
        let f = (e + 1) % size;
        if rng.random::<bool>() {
            a[e] = a[f];
        } else {
            a[f] = a[e];
        }
        t += clock.sample(rng);
    }
    a
}

#[test]
fn lookdown_voter_matches_classical_voter() {
    let size = 16;
    let mut spec = voter(size as u32);
    spec.snapshots = SnapshotSchedule::Every(0.5);
    let look: Vec<f64> = replicate_map(&spec, 10_000, 6, None, |_, t| {
        for c in &t.snapshots {
            site_alleles(c, size);
        }
        interfaces(&site_alleles(t.final_config(), size))
    })
    .unwrap();
    let mut rng = stream(6, 99);
    let classical: Vec<f64> = (0..10_000).map(|_| interfaces(&classical_voter(size, 1.0, &mut rng))).collect();
    let (_, se1) = var_se(&look);
    let (_, se2) = var_se(&classical);
    let z = (mean(&look) - mean(&classical)) / (se1 * se1 + se2 * se2).sqrt();
    assert!(z.abs() < 3.3, "interfaces {} vs {} (z = {z})", mean(&look), mean(&classical));
}

#[test]
fn voter_keeps_one_particle_per_site() {
    let mut spec = voter(8);
    spec.t_end = 3.0;
    spec.snapshots = SnapshotSchedule::Every(0.25);
    let t = run(&spec).unwrap();
    for c in &t.snapshots {
        assert_eq!(c.len(), 8);
        site_alleles(c, 8);
    }
}
