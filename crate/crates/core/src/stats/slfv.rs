//! Structural checks of the spatial Λ-Fleming–Viot constructions.

use rand_distr::{Distribution, Exp};

use super::{z_score, Rule, SuiteOptions, TestReport};
use super::uniformity::slfv_params;
use crate::config::{sample_conditionally_poisson, Configuration};
use crate::domain::{Domain, Intensity, TypePoint};
use crate::engine::{run, SnapshotSchedule};
use crate::error::Result;
use crate::models::{coinvolvement_rate, preset_slfv_first, slfv_first_event, SlfvEventLaw, SlfvOffspring};
use crate::numeric::mean_se;
use crate::rng::{child, replicate_seed, stream};

fn domain_of(law_dim: usize, side: f64) -> Domain {
    Domain::torus(law_dim, side, 2)
}

/// Fraction of in-ball particles involved in an event, against `ζ`.
pub fn involvement_frequency(n_events: usize, seed: u64, mutant: bool) -> Result<TestReport> {
    let p = slfv_params(SlfvOffspring::OneForOne);
    let d = domain_of(p.dim, p.side);
    let mut rng = stream(seed, 0);
    let intensity = Intensity::Uniform { density: 1.0, allele_weights: vec![1.0, 1.0] };
    let mut config = sample_conditionally_poisson(&intensity, d, p.level_cap, &mut rng)?;
    let (mut inside, mut involved) = (0usize, 0usize);
    let mut zeta = 0.0;
    for _ in 0..n_events {
        let ev = p.law.sample(&d, &mut rng);
        zeta = ev.zeta;
        inside += config.particles.iter().filter(|q| d.in_ball(&ev.center, ev.w, &q.x)).count();
        let mut erng = child(&mut rng);
        involved += slfv_first_event(&mut config, &ev, &mut erng, mutant).affected.len();
    }
    let f = involved as f64 / inside as f64;
    let se = (zeta * (1.0 - zeta) / inside as f64).sqrt();
    Ok(TestReport::new("slfv/involvement_frequency", z_score((f, se), zeta).abs(), 3.0, Rule::AtMost)
        .reps(n_events, seed)
        .detail(format!("{involved}/{inside} = {f:.5} vs zeta {zeta}")))
}

/// First construction: the particle count never changes at an event.
pub fn mass_conservation(n_runs: usize, seed: u64, mutant: bool) -> Result<TestReport> {
    let spec = preset_slfv_first(&slfv_params(SlfvOffspring::OneForOne))?;
    let mut violations = 0usize;
    let mut events = 0usize;
    for i in 0..n_runs {
        let mut s = spec.with_seed(replicate_seed(seed, i as u64));
        s.t_end = 2.0;
        s.mutant = mutant;
        let t = run(&s)?;
        let n0 = t.snapshots[0].len();
        events += t.events.len();
        violations += t.events.iter().filter(|e| e.population != n0).count();
        violations += t.snapshots.iter().filter(|c| c.len() != n0).count();
    }
    Ok(TestReport::new("slfv/mass_conservation", violations as f64, 0.0, Rule::AtMost)
        .reps(n_runs, seed)
        .detail(format!("{events} events checked")))
}

/// Two particles under the first construction: the number of events
/// involving both, minus its compensator `∫ φ(ρ(t)) dt`, has mean zero.
pub fn coinvolvement_check(law: &SlfvEventLaw, side: f64, rho0: f64, t_end: f64, n_runs: usize, seed: u64, mutant: bool) -> Result<TestReport> {
    let d = domain_of(1, side);
    let clock = Exp::new(law.total_rate(&d)).map_err(|e| crate::error::Error::InvalidParameter(e.to_string()))?;
    let mut diffs = Vec::with_capacity(n_runs);
    let mut mean_n = 0.0;
    for i in 0..n_runs {
        let mut rng = stream(replicate_seed(seed, i as u64), 0);
        let mut c = Configuration::from_pairs(d, 5.0, &[(TypePoint::at(&[0.0], 0), 1.0), (TypePoint::at(&[rho0], 1), 2.0)])?;
        let (mut t, mut n, mut a) = (0.0, 0usize, 0.0);
        loop {
            let dt = clock.sample(&mut rng);
            let rho = d.distance(&c.particles[0].x.loc, &c.particles[1].x.loc);
            let phi = coinvolvement_rate(law, 1, rho);
            if t + dt >= t_end {
                a += (t_end - t) * phi;
                break;
            }
            a += dt * phi;
            t += dt;
            c.time = t;
            let ev = law.sample(&d, &mut rng);
            let mut erng = child(&mut rng);
            let out = slfv_first_event(&mut c, &ev, &mut erng, mutant);
            if out.affected.len() == 2 {
                n += 1;
            }
        }
        mean_n += n as f64;
        diffs.push(n as f64 - a);
    }
    let est = mean_se(&diffs);
    Ok(TestReport::new("slfv/coinvolvement_compensator", z_score(est, 0.0).abs(), 3.0, Rule::AtMost)
        .reps(n_runs, seed)
        .detail(format!("mean N = {:.4}, mean (N - A) = {:.4} ± {:.4}", mean_n / n_runs as f64, est.0, est.1)))
}

/// Running the first construction with a smaller level cap gives exactly
/// the restriction of the larger run, snapshot by snapshot.
pub fn restriction_coupling(n_runs: usize, seed: u64, small_cap: f64, mutant: bool) -> Result<TestReport> {
    let p = slfv_params(SlfvOffspring::OneForOne);
    let mut big = preset_slfv_first(&p)?;
    big.snapshots = SnapshotSchedule::Every(0.25);
    big.t_end = 1.0;
    big.mutant = mutant;
    let mut small = big.clone();
    small.lambda = small_cap;
    let key = |c: &Configuration| {
        let mut v: Vec<_> = c.particles.iter().map(|q| (q.u.to_bits(), q.x.allele, q.x.loc.map(f64::to_bits))).collect();
        v.sort();
        v
    };
    let mut mismatched = 0;
    for i in 0..n_runs {
        let s = replicate_seed(seed, i as u64);
        let tb = run(&big.with_seed(s))?;
        let ts = run(&small.with_seed(s))?;
        let same = tb.snapshots.len() == ts.snapshots.len()
            && tb.snapshots.iter().zip(&ts.snapshots).all(|(b, s)| key(&b.restrict(small_cap)) == key(s));
        if !same {
            mismatched += 1;
        }
    }
    Ok(TestReport::new("slfv/restriction_coupling", mismatched as f64, 0.0, Rule::AtMost)
        .reps(n_runs, seed)
        .detail(format!("cap {} vs {small_cap}", p.level_cap)))
}

pub fn suite(opts: &SuiteOptions) -> Result<Vec<TestReport>> {
    let law = slfv_params(SlfvOffspring::OneForOne).law;
    Ok(vec![
        involvement_frequency(opts.reps_or(20_000), opts.seed, opts.mutant)?,
        mass_conservation(20, opts.seed + 1, opts.mutant)?,
        coinvolvement_check(&law, 20.0, 0.6, 10.0, opts.reps_or(4000), opts.seed + 2, opts.mutant)?,
        restriction_coupling(50, opts.seed + 3, 2.5, opts.mutant)?,
    ])
}
