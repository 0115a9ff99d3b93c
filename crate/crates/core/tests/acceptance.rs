//! End-to-end acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so the lines show up in
//! `cargo test` output. Exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use lookdown::models::BranchingParams;
use lookdown::stats::projection::{branching_moments, exponential_lifetimes, moran_projection};
use lookdown::stats::uniformity::{ks_uniform_levels, mechanism_cases, preset_cases, SNAPSHOT_TIMES};
use lookdown::stats::{convergence, generator_check, genealogy_suite, performance, poisson_identities_suite, slfv};
use lookdown::stats::{Rule, SuiteOptions, TestReport, ALPHA};
use lookdown::Result;

const SEED: u64 = 20_240_601;

struct Criterion {
    id: usize,
    title: &'static str,
    reports: Vec<TestReport>,
    secs: f64,
}

// Seeds follow the suites' own defaults, so `lookdown verify <suite>` prints the same numbers.
fn opts() -> SuiteOptions {
    SuiteOptions { seed: SEED, ..SuiteOptions::default() }
}

fn poisson_identities() -> Result<Vec<TestReport>> {
    let start = Instant::now();
    let mut v = poisson_identities_suite(&opts())?;
    let secs = start.elapsed().as_secs_f64();
    v.push(TestReport::new("poisson/runtime_seconds", secs, 60.0, Rule::AtMost));
    Ok(v)
}

fn lifetimes() -> Result<Vec<TestReport>> {
    exponential_lifetimes(1000, 1.0, 1.0, 1000, SEED + 4, None, false)
}

fn uniformity() -> Result<Vec<TestReport>> {
    let o = opts();
    let mut v = Vec::new();
    let mechanisms = mechanism_cases();
    for (i, (name, spec)) in mechanisms.iter().enumerate() {
        let seed = o.seed + i as u64;
        let mut r = ks_uniform_levels(spec, &SNAPSHOT_TIMES, 1000, seed, None, ALPHA)?;
        r.name = format!("uniformity/{name}");
        v.push(r);
        let mut broken = spec.clone();
        broken.mutant = true;
        let m = ks_uniform_levels(&broken, &SNAPSHOT_TIMES, 1000, seed, None, ALPHA)?;
        // the broken mechanism must be rejected
        v.push(TestReport::new(format!("uniformity/{name}/mutant_rejected"), m.statistic, ALPHA, Rule::AtMost).reps(1000, seed).detail(m.detail));
    }
    for (i, (name, spec)) in preset_cases()?.iter().enumerate() {
        let seed = o.seed + (mechanisms.len() + i) as u64;
        let mut r = ks_uniform_levels(spec, &SNAPSHOT_TIMES, 1000, seed, None, ALPHA)?;
        r.name = format!("uniformity/{name}");
        v.push(r);
    }
    Ok(v)
}

fn projection() -> Result<Vec<TestReport>> {
    moran_projection(50, 1.0, 10_000, SEED + 1, None, false)
}

fn branching() -> Result<Vec<TestReport>> {
    let growth = BranchingParams { n0: 200, r: 0.5, k: 2, critical: false, lambda: 10.0, rate_scale: 1.0 };
    let critical = BranchingParams { critical: true, ..growth.clone() };
    Ok(vec![
        branching_moments(&growth, 0.5, 10_000, SEED + 5, None, false)?,
        branching_moments(&critical, 0.5, 2000, SEED + 6, None, false)?,
        branching_moments(&critical, 1.0, 2000, SEED + 7, None, false)?,
    ])
}

fn run(id: usize, title: &'static str, f: fn() -> Result<Vec<TestReport>>) -> Criterion {
    let start = Instant::now();
    let reports = f().unwrap_or_else(|e| vec![TestReport::new(format!("error: {e}"), f64::NAN, 0.0, Rule::AtMost)]);
    Criterion { id, title, reports, secs: start.elapsed().as_secs_f64() }
}

fn main() -> ExitCode {
    let criteria = [
        run(1, "Poisson random measure identities", poisson_identities),
        run(2, "exponential lifetimes under pure death", lifetimes),
        run(3, "conditional uniformity of levels, with mutant controls", uniformity),
        run(4, "Moran projection and heterozygosity decay", projection),
        run(5, "branching moments", branching),
        run(6, "Kingman genealogy", || genealogy_suite::suite(&opts())),
        run(7, "forward generator checks", || generator_check::suite(&opts())),
        run(8, "large-lambda convergence", || convergence::suite(&opts())),
        run(9, "spatial Fleming-Viot structure", || slfv::suite(&opts())),
        run(10, "determinism and throughput", || performance::suite(&opts())),
    ];
    let mut failed = 0;
    for c in &criteria {
        for r in &c.reports {
            println!("    {} {:<52} statistic={:<12.6e} threshold={}  {}", if r.pass { "ok  " } else { "FAIL" }, r.name, r.statistic, r.threshold, r.detail);
        }
        let pass = !c.reports.is_empty() && c.reports.iter().all(|r| r.pass);
        if !pass {
            failed += 1;
        }
        println!("criterion {:>2} {}: {} ({:.1} s)", c.id, if pass { "PASS" } else { "FAIL" }, c.title, c.secs);
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
