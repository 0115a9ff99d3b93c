//! Conditional uniformity of levels given types.

use rand::seq::index::sample;

use super::{bonferroni_min, ks_test, SuiteOptions, TestReport};
use crate::domain::{Domain, RateFn, TypeLaw};
use crate::engine::{replicate_map, InitialState, ModelSpec, SnapshotSchedule};
use crate::error::{Error, Result};
use crate::mechanisms::{
    DiscreteBirthEvent, ImmigrationSource, Kernel, Mechanism, MotionKernel, MultipleDeathEvent, OffspringCount, PairRate,
    ReplacementEvent, ReplacementVariant, ThinningEvent,
};
use crate::models::{
    preset_branching, preset_moran, preset_slfv_first, preset_slfv_second, preset_voter, BranchingParams, MoranParams, SlfvEventLaw,
    SlfvOffspring, SlfvParams, VoterParams,
};
use crate::rng::stream;

/// Largest pooled sample per stratum; bigger pools are subsampled.
pub const MAX_STRATUM: usize = 200_000;
const SUBSAMPLE_STREAM: u64 = 0x5AB5;

pub const SNAPSHOT_TIMES: [f64; 3] = [0.25, 0.5, 1.0];

/// Pools levels across replicates per (snapshot time, allele) stratum and
/// runs a KS test against uniform `[0, λ)` in each; the report's statistic is
/// the Bonferroni-adjusted smallest p-value.
pub fn ks_uniform_levels(
    spec: &ModelSpec,
    times: &[f64],
    n_reps: usize,
    master_seed: u64,
    workers: Option<usize>,
    alpha: f64,
) -> Result<TestReport> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("no snapshot times".into()));
    }
    let mut s = spec.clone();
    s.t_end = times.iter().cloned().fold(0.0, f64::max);
    s.snapshots = SnapshotSchedule::Times(times.to_vec());
    s.record_events = false;
    s.record_lineage = false;
    let n_alleles = s.domain.n_alleles as usize;
    // per replicate: per time, per allele, levels
    let pools = replicate_map(&s, n_reps, master_seed, workers, |_, t| {
        times
            .iter()
            .map(|&tm| {
                let mut by = vec![Vec::new(); n_alleles];
                if let Some(c) = t.snapshot_at(tm) {
                    for p in &c.particles {
                        by[p.x.allele as usize].push(p.u);
                    }
                }
                by
            })
            .collect::<Vec<_>>()
    })?;
    let lambda = s.lambda;
    let mut rng = stream(master_seed, SUBSAMPLE_STREAM);
    let mut ps = Vec::new();
    let mut worst = (String::new(), 1.0f64, 0.0f64, 0usize);
    for (ti, &tm) in times.iter().enumerate() {
        let mut total = 0;
        for a in 0..n_alleles {
            let mut xs: Vec<f64> = pools.iter().flat_map(|r| r[ti][a].iter().copied()).collect();
            total += xs.len();
            if xs.is_empty() {
                continue;
            }
            if xs.len() > MAX_STRATUM {
                let idx = sample(&mut rng, xs.len(), MAX_STRATUM);
                xs = idx.iter().map(|i| xs[i]).collect();
            }
            let n = xs.len();
            let (d, p) = ks_test(&mut xs, |u| u / lambda);
            if p < worst.1 || ps.is_empty() {
                worst = (format!("t={tm} allele={a}"), p, d, n);
            }
            ps.push(p);
        }
        if total == 0 {
            return Err(Error::InvalidParameter(format!("no particles at t = {tm} in any replicate")));
        }
    }
    let p = bonferroni_min(&ps);
    Ok(TestReport::p_test("ks_uniform_levels", p, alpha)
        .reps(n_reps, master_seed)
        .detail(format!("{} strata; worst {} (D={:.5}, n={}, raw p={:.3e})", ps.len(), worst.0, worst.2, worst.3, worst.1)))
}

fn iso(domain: Domain, lambda: f64, counts: Vec<usize>, m: Mechanism) -> ModelSpec {
    ModelSpec { domain, lambda, initial: InitialState::Counts { counts }, mechanisms: vec![m], ..Default::default() }
}

/// Each of the eight mechanisms alone, in a configuration where its broken
/// variant is visible in the levels.
pub fn mechanism_cases() -> Vec<(&'static str, ModelSpec)> {
    let two = Domain::site(2);
    vec![
        ("pure_death", iso(two, 1.0, vec![25, 25], Mechanism::PureDeath { d0: RateFn::PerAllele(vec![1.0, 0.5]) })),
        (
            "multiple_death",
            iso(
                two,
                1.0,
                vec![30, 30],
                Mechanism::MultipleDeath {
                    events: vec![
                        MultipleDeathEvent { rate: 2.0, k: 1, d1: RateFn::Const(1.0) },
                        MultipleDeathEvent { rate: 1.0, k: 2, d1: RateFn::PerAllele(vec![1.0, 2.0]) },
                    ],
                },
            ),
        ),
        (
            "discrete_birth",
            iso(
                two,
                1.0,
                vec![10, 10],
                Mechanism::DiscreteBirth {
                    event: DiscreteBirthEvent {
                        rate: 5.0,
                        k: OffspringCount::Fixed(2),
                        r: RateFn::PerAllele(vec![1.0, 2.0]),
                        q: Kernel::Mutate { prob: 0.1 },
                    },
                },
            ),
        ),
        ("continuous_birth", iso(Domain::site(1), 5.0, vec![20], Mechanism::ContinuousBirth { k: 2, r: RateFn::Const(0.5) })),
        (
            "replacement",
            iso(
                two,
                1.0,
                vec![20, 20],
                Mechanism::Replacement {
                    event: ReplacementEvent {
                        variant: ReplacementVariant::Bernoulli { r: RateFn::Const(0.3), rate: 5.0 },
                        q: Kernel::Mutate { prob: 0.1 },
                    },
                },
            ),
        ),
        (
            "thinning",
            iso(two, 1.0, vec![50, 50], Mechanism::Thinning { event: ThinningEvent { rate: 2.0, p: RateFn::PerAllele(vec![0.3, 0.5]) } }),
        ),
        (
            "immigration",
            iso(
                two,
                1.0,
                vec![5, 5],
                Mechanism::Immigration { source: ImmigrationSource { arrival_rate: 20.0, type_law: TypeLaw::Uniform { allele_weights: vec![1.0, 1.0] } } },
            ),
        ),
        ("motion", iso(Domain::site(3), 1.0, vec![20, 15, 15], Mechanism::Motion { kernel: MotionKernel::AlleleMutation { rate: 1.0 } })),
    ]
}

pub fn slfv_law(offspring: SlfvOffspring) -> SlfvEventLaw {
    SlfvEventLaw::single(1.0, 0.5, 1.0, offspring)
}

pub fn slfv_params(offspring: SlfvOffspring) -> SlfvParams {
    SlfvParams { dim: 1, side: 20.0, n_alleles: 2, law: slfv_law(offspring), level_cap: 5.0 }
}

/// The five model presets.
pub fn preset_cases() -> Result<Vec<(&'static str, ModelSpec)>> {
    Ok(vec![
        ("moran", preset_moran(&MoranParams { n: 50, gamma: 1.0, n_alleles: 2, sites: None, motion: MotionKernel::None })?),
        ("branching_critical", preset_branching(&BranchingParams { n0: 50, r: 0.5, k: 2, critical: true, lambda: 10.0, rate_scale: 1.0 })?),
        ("slfv_first", preset_slfv_first(&slfv_params(SlfvOffspring::OneForOne))?),
        ("slfv_second", preset_slfv_second(&slfv_params(SlfvOffspring::Poisson))?),
        ("voter", preset_voter(&VoterParams { size: 16, dim: 1, pair_rate: PairRate::WithinDistance { radius: 1.0, rate: 1.0 }, allele_weights: vec![1.0, 1.0] })?),
    ])
}

pub fn suite(opts: &SuiteOptions) -> Result<Vec<TestReport>> {
    let n = opts.reps_or(1000);
    let mut out = Vec::new();
    let mut cases = mechanism_cases();
    cases.extend(preset_cases()?);
    for (i, (name, mut spec)) in cases.into_iter().enumerate() {
        spec.mutant = opts.mutant;
        let seed = opts.seed.wrapping_add(i as u64);
        let mut r = ks_uniform_levels(&spec, &SNAPSHOT_TIMES, n, seed, opts.workers, opts.alpha)?;
        r.name = format!("uniformity/{name}{}", if opts.mutant { "/mutant" } else { "" });
        out.push(r);
    }
    Ok(out)
}
