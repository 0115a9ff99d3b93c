//! Projected (type-only) behaviour against directly simulated classical models.

use serde::{Deserialize, Serialize};

use super::oracles::{ArrivalCounter, BranchingChain, ClassicalOracle, DeathChain, MoranChain};
use super::{bonferroni_min, ks_test, z_score, z_two_sample, Rule, SuiteOptions, TestReport, THREE_SIGMA_P};
use crate::domain::{Domain, RateFn, TypeLaw};
use crate::engine::{replicate_map, InitialState, ModelSpec, SnapshotSchedule};
use crate::error::Result;
use crate::mechanisms::{ImmigrationSource, Mechanism, MotionKernel};
use crate::models::{preset_branching, preset_moran, preset_pure_death, BranchingParams, MoranParams, PureDeathPreset};
use crate::numeric::{mean_se, variance_se};
use crate::rng::{replicate_seed, stream};

const ORACLE_SALT: u64 = 0x0_0AC1E;

/// A functional of the allele-count vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Count,
    AlleleCount(u32),
    AlleleFrequency(u32),
    /// Probability that two distinct individuals differ in allele.
    Heterozygosity,
}

impl Functional {
    pub fn eval(&self, counts: &[usize]) -> f64 {
        let n: usize = counts.iter().sum();
        let at = |a: u32| counts.get(a as usize).copied().unwrap_or(0) as f64;
        match *self {
            Functional::Count => n as f64,
            Functional::AlleleCount(a) => at(a),
            Functional::AlleleFrequency(a) => {
                if n == 0 {
                    0.0
                } else {
                    at(a) / n as f64
                }
            }
            Functional::Heterozygosity => {
                if n < 2 {
                    return 0.0;
                }
                let nf = n as f64;
                let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
                (nf * nf - sq) / (nf * (nf - 1.0))
            }
        }
    }

    fn label(&self) -> String {
        match self {
            Functional::Count => "count".into(),
            Functional::AlleleCount(a) => format!("n{a}"),
            Functional::AlleleFrequency(a) => format!("p{a}"),
            Functional::Heterozygosity => "het".into(),
        }
    }
}

/// Allele counts of each replicate at each of `times`.
pub fn engine_counts(spec: &ModelSpec, times: &[f64], n_reps: usize, seed: u64, workers: Option<usize>) -> Result<Vec<Vec<Vec<usize>>>> {
    let mut s = spec.clone();
    s.t_end = times.iter().cloned().fold(0.0, f64::max);
    s.snapshots = SnapshotSchedule::Times(times.to_vec());
    s.record_events = false;
    s.record_lineage = false;
    let n_alleles = s.domain.n_alleles as usize;
    replicate_map(&s, n_reps, seed, workers, |_, t| {
        times
            .iter()
            .map(|&tm| {
                let mut c = t.snapshot_at(tm).map(|c| c.allele_counts()).unwrap_or_default();
                c.resize(n_alleles, 0);
                c
            })
            .collect()
    })
}

pub fn oracle_counts(oracle: &dyn ClassicalOracle, times: &[f64], n_reps: usize, seed: u64) -> Vec<Vec<Vec<usize>>> {
    (0..n_reps)
        .map(|i| {
            let mut rng = stream(replicate_seed(seed ^ ORACLE_SALT, i as u64), 0);
            oracle.sample(times, &mut rng)
        })
        .collect()
}

/// z-tests of mean and variance for every (time, functional); the statistic
/// is the Bonferroni-adjusted smallest p-value, compared with the 3σ level.
pub fn compare_samples(
    name: &str,
    a: &[Vec<Vec<usize>>],
    b: &[Vec<Vec<usize>>],
    functionals: &[Functional],
    times: &[f64],
) -> TestReport {
    let mut ps = Vec::new();
    let mut worst = (String::new(), 0.0f64);
    for (ti, &tm) in times.iter().enumerate() {
        for f in functionals {
            let xa: Vec<f64> = a.iter().map(|r| f.eval(&r[ti])).collect();
            let xb: Vec<f64> = b.iter().map(|r| f.eval(&r[ti])).collect();
            let (ma, mb) = (mean_se(&xa), mean_se(&xb));
            let (zm, pm) = z_two_sample(ma, mb);
            let (zv, pv) = z_two_sample(variance_se(&xa), variance_se(&xb));
            for (z, what) in [(zm, "mean"), (zv, "var")] {
                if z.abs() > worst.1 || worst.0.is_empty() {
                    worst = (format!("t={tm} {} {what}: {:.4} vs {:.4}", f.label(), ma.0, mb.0), z.abs());
                }
            }
            ps.push(pm);
            ps.push(pv);
        }
    }
    let p = bonferroni_min(&ps);
    TestReport::p_test(name, p, THREE_SIGMA_P).detail(format!("{} z-tests; largest |z|={:.2} at {}", ps.len(), worst.1, worst.0))
}

/// Lookdown projection against a classical oracle started from the same counts.
pub fn projection_equivalence(
    spec: &ModelSpec,
    oracle: &dyn ClassicalOracle,
    functionals: &[Functional],
    times: &[f64],
    n_reps: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<TestReport> {
    let a = engine_counts(spec, times, n_reps, seed, workers)?;
    let b = oracle_counts(oracle, times, n_reps, seed);
    Ok(compare_samples(&format!("projection/{}", oracle.name()), &a, &b, functionals, times).reps(n_reps, seed))
}

/// Fits `H̄(t) = H̄(0) e^{−ρt}` through the origin on the log scale; the
/// statistic is `|ρ − γ|/γ`.
pub fn heterozygosity_fit(samples: &[Vec<Vec<usize>>], times: &[f64], gamma: f64, tol: f64) -> TestReport {
    let h: Vec<f64> = (0..times.len())
        .map(|ti| samples.iter().map(|r| Functional::Heterozygosity.eval(&r[ti])).sum::<f64>() / samples.len() as f64)
        .collect();
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (ti, &t) in times.iter().enumerate().skip(1) {
        let y = -(h[ti] / h[0]).ln();
        sxy += (t - times[0]) * y;
        sxx += (t - times[0]) * (t - times[0]);
    }
    let rate = sxy / sxx;
    TestReport::new("projection/heterozygosity_decay", (rate - gamma).abs() / gamma, tol, Rule::AtMost)
        .detail(format!("fitted rate {rate:.4} vs gamma {gamma}; H = {h:?}"))
}

/// Moran model against the classical chain, plus the heterozygosity decay fit.
pub fn moran_projection(n: usize, gamma: f64, n_reps: usize, seed: u64, workers: Option<usize>, mutant: bool) -> Result<Vec<TestReport>> {
    let mut spec = preset_moran(&MoranParams { n, gamma, n_alleles: 2, sites: None, motion: MotionKernel::None })?;
    spec.mutant = mutant;
    let times = [0.0, 0.25, 0.5, 0.75, 1.0];
    let a = engine_counts(&spec, &times, n_reps, seed, workers)?;
    let counts = a[0][0].clone();
    let oracle = MoranChain { counts, gamma };
    let b = oracle_counts(&oracle, &times, n_reps, seed);
    let pick = |s: &[Vec<Vec<usize>>]| -> Vec<Vec<Vec<usize>>> { s.iter().map(|r| vec![r[2].clone(), r[4].clone()]).collect() };
    let cmp = compare_samples("projection/moran", &pick(&a), &pick(&b), &[Functional::AlleleFrequency(0)], &[0.5, 1.0]).reps(n_reps, seed);
    let het = heterozygosity_fit(&a, &times, gamma, 0.05).reps(n_reps, seed);
    Ok(vec![cmp, het])
}

/// Pure death from `n0` particles: survivor fraction at `t_end` against
/// `e^{−d₀ t}` and KS of the observed lifetimes against the exponential law
/// truncated at `t_end`.
pub fn exponential_lifetimes(n0: usize, d0: f64, t_end: f64, n_reps: usize, seed: u64, workers: Option<usize>, mutant: bool) -> Result<Vec<TestReport>> {
    let mut spec = preset_pure_death(&PureDeathPreset { n0, d0, lambda: 1.0 })?;
    spec.t_end = t_end;
    spec.record_lineage = false;
    spec.mutant = mutant;
    let per = replicate_map(&spec, n_reps, seed, workers, |_, t| {
        let survivors = t.final_config().len();
        let deaths: Vec<f64> = t.events.iter().filter(|e| e.kind == "flow_death").map(|e| e.time).collect();
        (survivors, deaths)
    })?;
    let frac: Vec<f64> = per.iter().map(|(s, _)| *s as f64 / n0 as f64).collect();
    let target = (-d0 * t_end).exp();
    let est = mean_se(&frac);
    let z = z_score(est, target).abs();
    let surv = TestReport::new("lifetimes/survivor_fraction", z, 3.0, Rule::AtMost)
        .reps(n_reps, seed)
        .detail(format!("mean {:.6} ± {:.2e} vs {:.6}", est.0, est.1, target));
    let mut life: Vec<f64> = per.into_iter().flat_map(|(_, d)| d).collect();
    let norm = 1.0 - target;
    let n = life.len();
    let (d, p) = ks_test(&mut life, |t| (1.0 - (-d0 * t).exp()) / norm);
    let ks = TestReport::p_test("lifetimes/ks_exponential", p, super::ALPHA)
        .reps(n_reps, seed)
        .detail(format!("D={d:.5} over {n} lifetimes"));
    Ok(vec![surv, ks])
}

/// Mean population size of the branching preset at `t` against
/// `N₀ e^{r k t}` (or `N₀` when critical).
pub fn branching_moments(p: &BranchingParams, t: f64, n_reps: usize, seed: u64, workers: Option<usize>, mutant: bool) -> Result<TestReport> {
    let mut spec = preset_branching(p)?;
    spec.mutant = mutant;
    let xs: Vec<f64> = engine_counts(&spec, &[t], n_reps, seed, workers)?.iter().map(|r| r[0][0] as f64).collect();
    let target = if p.critical { p.n0 as f64 } else { p.n0 as f64 * (p.r * p.rate_scale * p.k as f64 * t).exp() };
    let est = mean_se(&xs);
    let name = if p.critical { "branching/critical_mean" } else { "branching/growth_mean" };
    Ok(TestReport::new(name, z_score(est, target).abs(), 3.0, Rule::AtMost)
        .reps(n_reps, seed)
        .detail(format!("mean {:.3} ± {:.3} vs {:.3}", est.0, est.1, target)))
}

fn counts_spec(domain: Domain, lambda: f64, counts: Vec<usize>, m: Mechanism, mutant: bool) -> ModelSpec {
    ModelSpec { domain, lambda, initial: InitialState::Counts { counts }, mechanisms: vec![m], mutant, ..Default::default() }
}

pub fn suite(opts: &SuiteOptions) -> Result<Vec<TestReport>> {
    let (seed, w, mu) = (opts.seed, opts.workers, opts.mutant);
    let small = opts.reps_or(2000);
    let times = [0.5, 1.0];
    let mut out = Vec::new();

    let pd = counts_spec(Domain::site(2), 1.0, vec![25, 25], Mechanism::PureDeath { d0: RateFn::PerAllele(vec![1.0, 0.5]) }, mu);
    let oracle = DeathChain { counts: vec![25, 25], rates: vec![1.0, 0.5] };
    out.push(projection_equivalence(&pd, &oracle, &[Functional::AlleleCount(0), Functional::AlleleCount(1)], &times, small, seed, w)?);

    out.extend(moran_projection(50, 1.0, opts.reps_or(10_000), seed + 1, w, mu)?);

    let im = counts_spec(
        Domain::site(2),
        1.0,
        vec![5, 5],
        Mechanism::Immigration { source: ImmigrationSource { arrival_rate: 20.0, type_law: TypeLaw::Uniform { allele_weights: vec![1.0, 3.0] } } },
        mu,
    );
    let oracle = ArrivalCounter { counts: vec![5, 5], rate: 20.0, allele_probs: vec![0.25, 0.75] };
    out.push(projection_equivalence(&im, &oracle, &[Functional::AlleleCount(0), Functional::AlleleCount(1)], &times, small, seed + 2, w)?);

    let cb = counts_spec(Domain::site(1), 5.0, vec![20], Mechanism::ContinuousBirth { k: 2, r: RateFn::Const(0.5) }, mu);
    let oracle = BranchingChain { n0: 20, birth: 0.5, k: 2, death: 0.0 };
    out.push(projection_equivalence(&cb, &oracle, &[Functional::Count], &times, small, seed + 3, w)?);

    out.extend(exponential_lifetimes(1000, 1.0, 1.0, opts.reps_or(1000), seed + 4, w, mu)?);

    let bp = BranchingParams { n0: 200, r: 0.5, k: 2, critical: false, lambda: 10.0, rate_scale: 1.0 };
    out.push(branching_moments(&bp, 0.5, opts.reps_or(10_000), seed + 5, w, mu)?);
    let crit = BranchingParams { critical: true, ..bp };
    out.push(branching_moments(&crit, 0.5, opts.reps_or(2000), seed + 6, w, mu)?);
    Ok(out)
}
