//! Run directories: manifest, per-replicate snapshots and logs, summaries.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/summary.tsv
//! <dir>/summary.json
//! <dir>/rep_00000/snapshot_000.tsv
//! <dir>/rep_00000/events.tsv
//! <dir>/rep_00000/lineage.tsv
//! ```
//! Nothing time- or host-dependent is written, so a rerun with the same spec
//! and seed reproduces every file byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Configuration;
use crate::engine::{EventRecord, ModelSpec, ReplicateSummary, Trajectory};
use crate::error::{Error, Result};
use crate::genealogy::LineageLog;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    #[serde(default = "yes")]
    pub snapshots: bool,
    #[serde(default = "yes")]
    pub events: bool,
    #[serde(default = "yes")]
    pub lineage: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputOptions {
    fn default() -> Self {
        OutputOptions { snapshots: true, events: true, lineage: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub spec_sha256: String,
    pub master_seed: u64,
    pub replicates: usize,
    pub spec: ModelSpec,
}

/// SHA-256 of the canonical JSON form of the spec (seed excluded).
pub fn spec_hash(spec: &ModelSpec) -> String {
    let json = serde_json::to_string(&spec.with_seed(0)).expect("spec serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn replicate_dir(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("rep_{index:05}"))
}

pub fn write_manifest(dir: &Path, spec: &ModelSpec, master_seed: u64, replicates: usize) -> Result<()> {
    fs::create_dir_all(dir)?;
    let m = Manifest {
        tool: "lookdown".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        spec_sha256: spec_hash(spec),
        master_seed,
        replicates,
        spec: spec.clone(),
    };
    let text = serde_json::to_string_pretty(&m).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("manifest.json: {e}")))
}

pub fn events_tsv(events: &[EventRecord]) -> String {
    let mut s = String::from(EventRecord::TSV_HEADER);
    s.push('\n');
    for e in events {
        s.push_str(&e.to_tsv_row());
        s.push('\n');
    }
    s
}

/// Writes one replicate's snapshots and logs.
pub fn write_replicate(dir: &Path, index: usize, traj: &Trajectory, opts: &OutputOptions) -> Result<()> {
    let rd = replicate_dir(dir, index);
    fs::create_dir_all(&rd)?;
    if opts.snapshots {
        for (k, c) in traj.snapshots.iter().enumerate() {
            fs::write(rd.join(format!("snapshot_{k:03}.tsv")), c.to_tsv())?;
        }
    }
    if opts.events {
        fs::write(rd.join("events.tsv"), events_tsv(&traj.events))?;
    }
    if opts.lineage {
        fs::write(rd.join("lineage.tsv"), traj.lineage.to_tsv())?;
    }
    Ok(())
}

/// Snapshot files of a replicate, in order.
pub fn read_snapshots(rep_dir: &Path) -> Result<Vec<Configuration>> {
    let mut files: Vec<PathBuf> = fs::read_dir(rep_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("snapshot_") && n.ends_with(".tsv")))
        .collect();
    files.sort();
    files.iter().map(|p| Configuration::from_tsv(&fs::read_to_string(p)?)).collect()
}

pub fn read_lineage(rep_dir: &Path) -> Result<LineageLog> {
    LineageLog::from_tsv(&fs::read_to_string(rep_dir.join("lineage.tsv"))?)
}

/// Long-format summary: one row per (replicate, snapshot).
pub fn summary_tsv(summaries: &[ReplicateSummary]) -> String {
    let n_alleles = summaries
        .iter()
        .flat_map(|r| r.snapshots.iter().map(|s| s.allele_counts.len()))
        .max()
        .unwrap_or(0);
    let mut s = String::from("replicate\tseed\ttime\tcount\tmean_level");
    for a in 0..n_alleles {
        s.push_str(&format!("\tallele_{a}"));
    }
    s.push('\n');
    for r in summaries {
        for snap in &r.snapshots {
            let mean = if snap.levels.is_empty() { f64::NAN } else { snap.levels.iter().sum::<f64>() / snap.levels.len() as f64 };
            s.push_str(&format!("{}\t{}\t{}\t{}\t{}", r.index, r.seed, snap.time, snap.count, mean));
            for a in 0..n_alleles {
                s.push_str(&format!("\t{}", snap.allele_counts.get(a).copied().unwrap_or(0)));
            }
            s.push('\n');
        }
    }
    s
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    replicates: usize,
    total_events: u64,
    final_counts: Vec<usize>,
    per_replicate: Vec<ReplicateLine<'a>>,
}

#[derive(Serialize)]
struct ReplicateLine<'a> {
    index: usize,
    seed: u64,
    n_events: u64,
    times: Vec<f64>,
    counts: Vec<usize>,
    allele_counts: Vec<&'a [usize]>,
}

pub fn write_summaries(dir: &Path, summaries: &[ReplicateSummary]) -> Result<()> {
    fs::write(dir.join("summary.tsv"), summary_tsv(summaries))?;
    let js = SummaryJson {
        replicates: summaries.len(),
        total_events: summaries.iter().map(|r| r.n_events).sum(),
        final_counts: summaries.iter().map(|r| r.snapshots.last().map_or(0, |s| s.count)).collect(),
        per_replicate: summaries
            .iter()
            .map(|r| ReplicateLine {
                index: r.index,
                seed: r.seed,
                n_events: r.n_events,
                times: r.snapshots.iter().map(|s| s.time).collect(),
                counts: r.snapshots.iter().map(|s| s.count).collect(),
                allele_counts: r.snapshots.iter().map(|s| s.allele_counts.as_slice()).collect(),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&js).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(dir.join("summary.json"), text + "\n")?;
    Ok(())
}
