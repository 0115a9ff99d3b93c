//! Genealogies read off the lineage log.

use rand::seq::index::sample;
use rand::Rng;

use super::{ks_test, Rule, SuiteOptions, TestReport, ALPHA};
use crate::config::Configuration;
use crate::engine::{replicate_map, run, SnapshotSchedule};
use crate::error::Result;
use crate::genealogy::{ancestor_index, ancestor_rank, coalescence_statistics, export_newick, extract_tree, AncestryTree};
use crate::mechanisms::MotionKernel;
use crate::models::{preset_moran, MoranParams};
use crate::rng::{replicate_seed, stream};

/// Ids of the `n` lowest-level particles.
pub fn lowest_ids(config: &Configuration, n: usize) -> Vec<u64> {
    let mut ps: Vec<_> = config.particles.iter().map(|p| (p.u, p.id)).collect();
    ps.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ps.into_iter().take(n).map(|p| p.1).collect()
}

fn moran(n: usize, gamma: f64, t_end: f64, mutant: bool) -> Result<crate::engine::ModelSpec> {
    let mut s = preset_moran(&MoranParams { n, gamma, n_alleles: 2, sites: None, motion: MotionKernel::None })?;
    s.t_end = t_end;
    s.record_events = false;
    s.mutant = mutant;
    Ok(s)
}

/// Pair coalescence rate of the two lowest levels in the Moran model
/// (censored exponential MLE against `γ`), multifurcations among the lowest
/// five, and agreement of the level-rank ancestor map with the id walk.
pub fn kingman_checks(n: usize, gamma: f64, t_end: f64, n_reps: usize, seed: u64, workers: Option<usize>, mutant: bool) -> Result<Vec<TestReport>> {
    let mut spec = moran(n, gamma, t_end, mutant)?;
    let half = t_end / 2.0;
    spec.snapshots = SnapshotSchedule::Times(vec![half]);
    let per = replicate_map(&spec, n_reps, seed, workers, |i, t| -> Result<(AncestryTree, usize, usize, usize)> {
        let fin = t.final_config();
        let pair = extract_tree(&t.lineage, &lowest_ids(fin, 2), t_end)?;
        let five = extract_tree(&t.lineage, &lowest_ids(fin, 5.min(n)), t_end)?;
        let internal = five.internal_nodes().count();
        let multi = five.internal_nodes().filter(|x| x.children.len() > 2).count();
        // J_i: the first hundred replicates
        let mut mismatch = 0;
        if i < 100 {
            let mid = t.snapshot_at(half).expect("snapshot at the split time");
            let levels = fin.levels();
            let mut mid_levels = mid.levels();
            mid_levels.sort_by(f64::total_cmp);
            let mut order: Vec<_> = fin.particles.iter().collect();
            order.sort_by(|a, b| a.u.total_cmp(&b.u));
            for (rank, p) in order.iter().enumerate() {
                let by_rank = ancestor_rank(&t.lineage, &levels, rank, half, t_end)?;
                let by_id = ancestor_index(&t.lineage, p.id, half, t_end)?
                    .and_then(|a| mid.index_of(a))
                    .and_then(|k| mid_levels.iter().position(|&v| v == mid.particles[k].u));
                if by_rank != by_id {
                    mismatch += 1;
                }
            }
        }
        Ok((pair, internal, multi, mismatch))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<AncestryTree> = per.iter().map(|p| p.0.clone()).collect();
    let stats = coalescence_statistics(&pairs)?;
    let rel = (stats.rate_mle - gamma).abs() / gamma;
    let internal: usize = per.iter().map(|p| p.1).sum();
    let multi: usize = per.iter().map(|p| p.2).sum();
    let mismatch: usize = per.iter().map(|p| p.3).sum();
    // merged pairs only, so the reference law is Exp(γ) conditioned on merging within t_end
    let mut times = stats.pair_times.clone();
    let norm = 1.0 - (-gamma * t_end).exp();
    let (d, p) = ks_test(&mut times, |x| (1.0 - (-gamma * x).exp()) / norm);
    Ok(vec![
        TestReport::new("genealogy/pair_rate", rel, 0.05, Rule::AtMost).reps(n_reps, seed).detail(format!(
            "rate MLE {:.4} (95% CI {:.4}..{:.4}), {} merged, {} censored",
            stats.rate_mle,
            stats.rate_ci.0,
            stats.rate_ci.1,
            stats.pair_times.len(),
            stats.n_censored
        )),
        TestReport::p_test("genealogy/pair_time_ks", p, ALPHA)
            .reps(n_reps, seed)
            .detail(format!("D={d:.5} over {} merge times", times.len())),
        TestReport::new("genealogy/multifurcations", multi as f64, 0.0, Rule::AtMost)
            .reps(n_reps, seed)
            .detail(format!("{multi} of {internal} internal nodes")),
        TestReport::new("genealogy/ancestor_rank_vs_id", mismatch as f64, 0.0, Rule::AtMost).reps(n_reps.min(100), seed),
    ])
}

/// For each run, trees of random subsamples equal the induced subtrees of the full sample's tree.
pub fn subsample_consistency(n_runs: usize, seed: u64, mutant: bool) -> Result<TestReport> {
    let base = moran(20, 1.0, 2.0, mutant)?;
    let mut rng = stream(seed, 0x5B5);
    let mut mismatches = 0;
    let mut checked = 0;
    for i in 0..n_runs {
        let t = run(&base.with_seed(replicate_seed(seed, i as u64)))?;
        let ids = lowest_ids(t.final_config(), 10);
        let full = extract_tree(&t.lineage, &ids, t.spec.t_end)?;
        for _ in 0..3 {
            let k = rng.random_range(1..ids.len());
            let sub: Vec<u64> = sample(&mut rng, ids.len(), k).iter().map(|j| ids[j]).collect();
            let direct = extract_tree(&t.lineage, &sub, t.spec.t_end)?;
            checked += 1;
            if export_newick(&full.induced(&sub)) != export_newick(&direct) {
                mismatches += 1;
            }
        }
    }
    Ok(TestReport::new("genealogy/subsample_consistency", mismatches as f64, 0.0, Rule::AtMost)
        .reps(n_runs, seed)
        .detail(format!("{checked} subsamples compared")))
}

pub fn suite(opts: &SuiteOptions) -> Result<Vec<TestReport>> {
    let mut out = kingman_checks(50, 1.0, 4.0, opts.reps_or(10_000), opts.seed, opts.workers, opts.mutant)?;
    out.push(subsample_consistency(100, opts.seed + 1, opts.mutant)?);
    Ok(out)
}
