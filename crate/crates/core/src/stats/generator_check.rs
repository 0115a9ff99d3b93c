//! Forward differences of the engine against `generator_apply`.

use super::{Rule, SuiteOptions, TestReport};
use crate::config::Configuration;
use crate::domain::{Domain, RateFn, TypeLaw, TypePoint};
use crate::engine::{replicate_map, InitialState, ModelSpec, SnapshotSchedule};
use crate::error::Result;
use crate::mechanisms::{generator_apply, ImmigrationSource, Kernel, Mechanism, PairRate, ReplacementEvent, ReplacementVariant, ThinningEvent};
use crate::numeric::mean_se;
use crate::testfn::{eval_f, Shape, TestFunction};

/// Declared bound on the second-order term: `|E f(η_Δ) − f − Δ Af| ≤ C Δ²`.
pub const BIAS_C: f64 = 50.0;
pub const DELTA: f64 = 1e-3;

/// Runs the engine for time `delta` from `config` and compares
/// `(E f(η_Δ) − f(η))/Δ` with `Af(η)` for every `g`. Pass when each
/// difference is within `3·se + C·Δ`; the statistic is the largest ratio of
/// difference to that allowance.
#[allow(clippy::too_many_arguments)]
pub fn forward_generator_check(
    mechanism: &Mechanism,
    config: &Configuration,
    g_list: &[TestFunction],
    delta: f64,
    n_reps: usize,
    seed: u64,
    workers: Option<usize>,
    mutant: bool,
) -> Result<TestReport> {
    let spec = ModelSpec {
        domain: config.domain,
        lambda: config.lambda,
        initial: InitialState::Explicit { particles: config.particles.iter().map(|p| (p.x, p.u)).collect() },
        mechanisms: vec![mechanism.clone()],
        t_end: delta,
        snapshots: SnapshotSchedule::Times(Vec::new()),
        mutant,
        record_events: false,
        record_lineage: false,
        ..Default::default()
    };
    let base = config;
    let f0: Vec<f64> = g_list.iter().map(|g| eval_f(base, g)).collect();
    let diffs = replicate_map(&spec, n_reps, seed, workers, |_, t| {
        let c = t.final_config();
        g_list.iter().zip(&f0).map(|(g, f)| (eval_f(c, g) - f) / delta).collect::<Vec<f64>>()
    })?;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (j, g) in g_list.iter().enumerate() {
        let xs: Vec<f64> = diffs.iter().map(|d| d[j]).collect();
        let (mc, se) = mean_se(&xs);
        let a = generator_apply(mechanism, base, g)?;
        let se = (se * se + a.std_err.unwrap_or(0.0).powi(2)).sqrt();
        let allowance = 3.0 * se + BIAS_C * delta;
        let ratio = (mc - a.value).abs() / allowance;
        worst = worst.max(if ratio.is_nan() { f64::INFINITY } else { ratio });
        parts.push(format!("g{j}: mc {mc:.5} ± {se:.2e} vs A {:.5}", a.value));
    }
    Ok(TestReport::new(format!("generator/{}", mechanism.name()), worst, 1.0, Rule::AtMost)
        .reps(n_reps, seed)
        .detail(parts.join("; ")))
}

/// Four particles of two alleles on `[0, 2)`.
pub fn reference_config() -> Configuration {
    let (a, b) = (TypePoint::site(0), TypePoint::site(1));
    Configuration::from_pairs(Domain::site(2), 2.0, &[(a, 0.3), (b, 0.7), (a, 1.1), (b, 1.6)]).expect("valid configuration")
}

pub fn reference_test_functions() -> Vec<TestFunction> {
    vec![
        TestFunction::quadratic(RateFn::Const(0.8), 1.8),
        TestFunction::quadratic(RateFn::PerAllele(vec![0.3, 0.9]), 1.8),
        TestFunction::quadratic(RateFn::Const(0.5), 1.8).with_term(RateFn::PerAllele(vec![0.6, 0.2]), Shape::QuadraticRamp),
    ]
}

pub fn reference_mechanisms() -> Vec<Mechanism> {
    vec![
        Mechanism::PureDeath { d0: RateFn::PerAllele(vec![1.0, 0.5]) },
        Mechanism::ContinuousBirth { k: 2, r: RateFn::PerAllele(vec![0.5, 1.0]) },
        Mechanism::Immigration { source: ImmigrationSource { arrival_rate: 2.0, type_law: TypeLaw::Uniform { allele_weights: vec![1.0, 1.0] } } },
        Mechanism::Thinning { event: ThinningEvent { rate: 1.5, p: RateFn::PerAllele(vec![0.3, 0.5]) } },
        Mechanism::Replacement {
            event: ReplacementEvent { variant: ReplacementVariant::Pairwise { pair_rate: PairRate::Const(1.0) }, q: Kernel::CopyParent },
        },
    ]
}

pub fn suite(opts: &SuiteOptions) -> Result<Vec<TestReport>> {
    let n = opts.reps_or(1_000_000);
    let c = reference_config();
    let gs = reference_test_functions();
    reference_mechanisms()
        .iter()
        .enumerate()
        .map(|(i, m)| forward_generator_check(m, &c, &gs, DELTA, n, opts.seed.wrapping_add(i as u64), opts.workers, opts.mutant))
        .collect()
}
