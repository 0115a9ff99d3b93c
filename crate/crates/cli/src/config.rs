//! TOML run configuration.
//!
//! ```toml
//! [model]
//! preset = "moran"      # or: domain / lambda / initial / mechanisms
//! n = 50
//! gamma = 1.0
//!
//! [engine]
//! t_end = 1.0
//! snapshots = { every = 0.25 }
//! seed = 7
//! replicates = 10
//!
//! [outputs]
//! dir = "runs/moran"
//!
//! [verify]
//! suite = "uniformity"
//! ```

use std::path::PathBuf;

use anyhow::{anyhow, Result};
use lookdown::domain::Domain;
use lookdown::engine::{InitialState, ModelSpec, SnapshotSchedule, DEFAULT_PARTICLE_CAP};
use lookdown::mechanisms::Mechanism;
use lookdown::models::Preset;
use lookdown::output::OutputOptions;
use serde::Deserialize;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document<M> {
    model: M,
    #[serde(default)]
    engine: EngineSection,
    #[serde(default)]
    outputs: OutputsSection,
    #[serde(default)]
    verify: VerifySection,
}

/// A model given mechanism by mechanism.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitModel {
    pub domain: Domain,
    pub lambda: f64,
    pub initial: InitialState,
    #[serde(default)]
    pub mechanisms: Vec<Mechanism>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    #[serde(default = "one")]
    pub t_end: f64,
    #[serde(default)]
    pub snapshots: SnapshotSchedule,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_rep")]
    pub replicates: usize,
    #[serde(default = "default_cap")]
    pub particle_cap: usize,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub mutant: bool,
}

impl Default for EngineSection {
    fn default() -> Self {
        EngineSection {
            t_end: 1.0,
            snapshots: SnapshotSchedule::default(),
            seed: 0,
            replicates: 1,
            particle_cap: DEFAULT_PARTICLE_CAP,
            workers: None,
            mutant: false,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn one_rep() -> usize {
    1
}
fn default_cap() -> usize {
    DEFAULT_PARTICLE_CAP
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "yes")]
    pub snapshots: bool,
    #[serde(default = "yes")]
    pub events: bool,
    #[serde(default = "yes")]
    pub lineage: bool,
}

impl Default for OutputsSection {
    fn default() -> Self {
        OutputsSection { dir: None, snapshots: true, events: true, lineage: true }
    }
}

impl OutputsSection {
    pub fn options(&self) -> OutputOptions {
        OutputOptions { snapshots: self.snapshots, events: self.events, lineage: self.lineage }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default)]
    pub suite: Option<String>,
    #[serde(default)]
    pub reps: Option<usize>,
    /// Significance floor of the distributional tests.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub spec: ModelSpec,
    pub engine: EngineSection,
    pub outputs: OutputsSection,
    pub verify: VerifySection,
}

fn into_config<M>(doc: Document<M>, build: impl FnOnce(M) -> lookdown::Result<ModelSpec>) -> Result<RunConfig> {
    let e = &doc.engine;
    let mut spec = build(doc.model).map_err(|e| anyhow!("[model]: {e}"))?;
    spec.t_end = e.t_end;
    spec.snapshots = e.snapshots.clone();
    spec.seed = e.seed;
    spec.particle_cap = e.particle_cap;
    spec.mutant = e.mutant;
    spec.record_events = doc.outputs.events;
    spec.record_lineage = doc.outputs.lineage;
    if e.replicates == 0 {
        return Err(anyhow!("[engine]: replicates must be at least 1"));
    }
    spec.validate().map_err(|e| anyhow!("[model]/[engine]: {e}"))?;
    Ok(RunConfig { spec, engine: doc.engine, outputs: doc.outputs, verify: doc.verify })
}

/// Parses and validates a configuration. Errors carry the line and column
/// of the offending key where the parser knows them.
pub fn parse(text: &str) -> Result<RunConfig> {
    let table: toml::Table = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
    let has_preset = table.get("model").and_then(|m| m.as_table()).is_some_and(|m| m.contains_key("preset"));
    if has_preset {
        let doc: Document<Preset> = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
        into_config(doc, |p| p.build())
    } else {
        let doc: Document<ExplicitModel> = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
        into_config(doc, |m| {
            Ok(ModelSpec { domain: m.domain, lambda: m.lambda, initial: m.initial, mechanisms: m.mechanisms, ..ModelSpec::default() })
        })
    }
}
