//! Reproducibility and event throughput.

use std::time::Instant;

use super::{Rule, SuiteOptions, TestReport};
use crate::engine::{replicate_map, run, ModelSpec, SnapshotSchedule, Trajectory};
use crate::error::Result;
use crate::mechanisms::MotionKernel;
use crate::models::{preset_moran, MoranParams};
use crate::output::events_tsv;

/// Everything a run writes, as one string.
pub fn serialize_run(t: &Trajectory) -> String {
    let mut s = String::new();
    for c in &t.snapshots {
        s.push_str(&c.to_tsv());
    }
    s.push_str(&events_tsv(&t.events));
    s.push_str(&t.lineage.to_tsv());
    s
}

/// Two runs of the same spec and seed serialize to identical bytes, and
/// replicate results do not depend on the worker count.
pub fn determinism(spec: &ModelSpec, n_reps: usize, seed: u64) -> Result<TestReport> {
    let mut diffs = 0;
    for i in 0..n_reps as u64 {
        let s = spec.with_seed(seed + i);
        if serialize_run(&run(&s)?) != serialize_run(&run(&s)?) {
            diffs += 1;
        }
    }
    let one = replicate_map(spec, n_reps, seed, Some(1), |_, t| serialize_run(&t))?;
    let many = replicate_map(spec, n_reps, seed, Some(4), |_, t| serialize_run(&t))?;
    diffs += one.iter().zip(&many).filter(|(a, b)| a != b).count();
    Ok(TestReport::new("performance/determinism", diffs as f64, 0.0, Rule::AtMost).reps(n_reps, seed))
}

/// Events per second of the Moran preset on the calling thread, logging off.
pub fn moran_throughput(n: usize, t_end: f64, seed: u64) -> Result<TestReport> {
    let mut spec = preset_moran(&MoranParams { n, gamma: 1.0, n_alleles: 2, sites: None, motion: MotionKernel::None })?;
    spec.t_end = t_end;
    spec.seed = seed;
    spec.record_events = false;
    spec.record_lineage = false;
    let start = Instant::now();
    let t = run(&spec)?;
    let secs = start.elapsed().as_secs_f64();
    let rate = t.n_events as f64 / secs;
    Ok(TestReport::new("performance/moran_events_per_second", rate, 1e5, Rule::AtLeast)
        .reps(1, seed)
        .detail(format!("{} events in {secs:.3} s, N = {n}", t.n_events)))
}

pub fn determinism_spec() -> Result<ModelSpec> {
    let mut s = preset_moran(&MoranParams { n: 30, gamma: 1.0, n_alleles: 2, sites: None, motion: MotionKernel::None })?;
    s.snapshots = SnapshotSchedule::Every(0.5);
    Ok(s)
}

pub fn suite(opts: &SuiteOptions) -> Result<Vec<TestReport>> {
    let mut spec = determinism_spec()?;
    spec.mutant = opts.mutant;
    Ok(vec![determinism(&spec, 8, opts.seed)?, moran_throughput(1000, 4.0, opts.seed)?])
}
