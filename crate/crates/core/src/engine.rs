//! Event-driven simulation of a superposition of mechanisms.
//!
//! Each mechanism owns a ChaCha stream and a pending event time. Constant-rate
//! mechanisms fire at their rate. Mechanisms whose rate grows with the
//! population (per-particle births and jumps, pairwise replacement) fire at a
//! bound computed from a slot count `N_b ≥ N` and are thinned: a candidate
//! picks uniform slots and is accepted when the slots hold particles and a
//! coin with the rate ratio succeeds. Empty slots cover deaths between
//! redraws, so the bound only needs refreshing after events.
//!
//! Level flows are evaluated lazily: a particle's level is brought up to date
//! only when an event reads it, and all levels are synced before snapshots
//! and before mechanisms that look at the whole configuration. Flow deaths
//! found late are logged with their exact hitting times.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{sample_conditionally_poisson, sample_uniform_levels, Configuration};
use crate::domain::{weighted_index, Domain, Intensity, TypePoint, MAX_DIM};
use crate::error::{Error, Result};
use crate::genealogy::LineageLog;
use crate::mechanisms::birth::{apply_continuous_birth, continuous_birth_rate, discrete_birth_k};
use crate::mechanisms::death::multiple_death;
use crate::mechanisms::other::{immigration, jump, thinning};
use crate::mechanisms::replacement::{replace_subset, select_subset, uniform_pair};
use crate::mechanisms::{EventOutcome, LevelFlow, Mechanism, MotionKernel, ReplacementVariant};
use crate::models::{slfv_first_event, slfv_second_event};
use crate::rng::{child, mechanism_stream, replicate_seed, stream, SimRng, INIT_STREAM};

pub const DEFAULT_PARTICLE_CAP: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum InitialState {
    Empty,
    /// One particle per listed type, levels i.i.d. uniform.
    UniformLevels { types: Vec<TypePoint> },
    /// `counts[a]` particles of allele `a`, uniform locations, uniform levels.
    Counts { counts: Vec<usize> },
    /// One particle on every integer lattice site of the torus, alleles drawn from the weights.
    Lattice { allele_weights: Vec<f64> },
    /// Conditionally Poisson with Cox measure `intensity × Lebesgue` on `[0, λ)`.
    ConditionallyPoisson { intensity: Intensity },
    Explicit { particles: Vec<(TypePoint, f64)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SnapshotSchedule {
    /// Every multiple of the step.
    Every(f64),
    Times(Vec<f64>),
}

impl Default for SnapshotSchedule {
    fn default() -> Self {
        SnapshotSchedule::Times(Vec::new())
    }
}

impl SnapshotSchedule {
    /// Snapshot times in `(after, t_end]`, plus `after` itself when `include_start`.
    /// Always contains `t_end`.
    pub fn times(&self, after: f64, t_end: f64, include_start: bool) -> Vec<f64> {
        let mut v = Vec::new();
        if include_start {
            v.push(after);
        }
        match self {
            SnapshotSchedule::Every(dt) => {
                if *dt > 0.0 {
                    let mut i = 0u64;
                    loop {
                        let s = i as f64 * dt;
                        if s > t_end {
                            break;
                        }
                        if s > after {
                            v.push(s);
                        }
                        i += 1;
                    }
                }
            }
            SnapshotSchedule::Times(ts) => v.extend(ts.iter().copied().filter(|&s| s > after && s <= t_end)),
        }
        v.push(t_end);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

fn yes() -> bool {
    true
}

fn default_cap() -> usize {
    DEFAULT_PARTICLE_CAP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub domain: Domain,
    /// Level cap λ (or `u_max` for a truncated infinite-intensity model).
    pub lambda: f64,
    pub initial: InitialState,
    #[serde(default)]
    pub mechanisms: Vec<Mechanism>,
    pub t_end: f64,
    #[serde(default)]
    pub snapshots: SnapshotSchedule,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub particle_cap: usize,
    /// Run every mechanism in its deliberately broken form.
    #[serde(default)]
    pub mutant: bool,
    #[serde(default = "yes")]
    pub record_events: bool,
    #[serde(default = "yes")]
    pub record_lineage: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            domain: Domain::site(1),
            lambda: 1.0,
            initial: InitialState::Empty,
            mechanisms: Vec::new(),
            t_end: 1.0,
            snapshots: SnapshotSchedule::default(),
            seed: 0,
            particle_cap: DEFAULT_PARTICLE_CAP,
            mutant: false,
            record_events: true,
            record_lineage: true,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        self.domain.validate()?;
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive and finite, got {}", self.lambda));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be finite and nonnegative, got {}", self.t_end));
        }
        match &self.snapshots {
            SnapshotSchedule::Every(dt) if !(*dt > 0.0) => return bad("snapshot step must be positive".into()),
            SnapshotSchedule::Times(ts) if ts.iter().any(|&s| !(0.0..=self.t_end).contains(&s)) => {
                return bad("snapshot times must lie in [0, t_end]".into())
            }
            _ => {}
        }
        if self.particle_cap == 0 {
            return bad("particle cap must be positive".into());
        }
        if let InitialState::Lattice { .. } = self.initial {
            if self.domain.dim == 0 || self.domain.side.fract() != 0.0 {
                return bad("lattice initial state needs a torus with integer side".into());
            }
        }
        for (i, m) in self.mechanisms.iter().enumerate() {
            m.validate(&self.domain).map_err(|e| Error::InvalidSpec(format!("mechanism {i} ({}): {e}", m.name())))?;
            if let Mechanism::SlfvBirthThinning { law } = m {
                law.validate_for_lambda(&self.domain, self.lambda)?;
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> ModelSpec {
        ModelSpec { seed, ..self.clone() }
    }
}

fn initial_configuration(spec: &ModelSpec, rng: &mut SimRng) -> Result<Configuration> {
    let d = spec.domain;
    let lambda = spec.lambda;
    match &spec.initial {
        InitialState::Empty => Configuration::empty(d, lambda),
        InitialState::UniformLevels { types } => sample_uniform_levels(types, d, lambda, rng),
        InitialState::Counts { counts } => {
            let mut types = Vec::new();
            for (a, &c) in counts.iter().enumerate() {
                for _ in 0..c {
                    types.push(TypePoint { loc: d.sample_location(rng), allele: a as u32 });
                }
            }
            sample_uniform_levels(&types, d, lambda, rng)
        }
        InitialState::Lattice { allele_weights } => {
            let side = d.side as usize;
            let n = side.pow(d.dim as u32);
            let mut types = Vec::with_capacity(n);
            for mut s in 0..n {
                let mut loc = [0.0; MAX_DIM];
                for l in loc.iter_mut().take(d.dim) {
                    *l = (s % side) as f64;
                    s /= side;
                }
                types.push(TypePoint { loc, allele: weighted_index(allele_weights, rng) as u32 });
            }
            sample_uniform_levels(&types, d, lambda, rng)
        }
        InitialState::ConditionallyPoisson { intensity } => sample_conditionally_poisson(intensity, d, lambda, rng),
        InitialState::Explicit { particles } => Configuration::from_pairs(d, lambda, particles),
    }
}

/// One entry of the event log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventRecord {
    pub time: f64,
    /// Index into the model's mechanism list; `None` for flow deaths.
    pub mechanism: Option<usize>,
    pub kind: &'static str,
    pub affected: Vec<u64>,
    /// Population right after the event.
    pub population: usize,
    pub tie: bool,
}

impl EventRecord {
    pub const TSV_HEADER: &'static str = "time\tmechanism\tkind\tpopulation\ttie\taffected";

    pub fn to_tsv_row(&self) -> String {
        let ids: Vec<String> = self.affected.iter().map(|i| i.to_string()).collect();
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.time,
            self.mechanism.map(|m| m.to_string()).unwrap_or_else(|| "NA".into()),
            self.kind,
            self.population,
            u8::from(self.tie),
            ids.join(",")
        )
    }
}

/// How a mechanism's event stream is clocked.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Clock {
    /// No events (flow-only mechanisms or zero rate).
    Silent,
    Constant(f64),
    /// `per · N_b`.
    PerParticle(f64),
    /// `per · N_b (N_b − 1) / 2`.
    PerPair(f64),
}

#[derive(Clone, Debug)]
struct StreamState {
    rng: SimRng,
    next: f64,
    slots: usize,
}

/// Everything needed to continue a run.
#[derive(Clone, Debug)]
pub struct EngineState {
    config: Configuration,
    streams: Vec<StreamState>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub spec: ModelSpec,
    pub snapshots: Vec<Configuration>,
    pub events: Vec<EventRecord>,
    pub lineage: LineageLog,
    /// Accepted events, including those not written to the event log.
    pub n_events: u64,
    /// Thinning candidates drawn, accepted or not.
    pub n_candidates: u64,
    state: Option<EngineState>,
}

impl Trajectory {
    pub fn final_config(&self) -> &Configuration {
        self.snapshots.last().expect("a trajectory has at least one snapshot")
    }

    pub fn has_state(&self) -> bool {
        self.state.is_some()
    }

    /// Drops the retained engine state; the result cannot be resumed.
    pub fn without_state(mut self) -> Self {
        self.state = None;
        self
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&Configuration> {
        self.snapshots.iter().find(|c| c.time == t)
    }
}

struct Engine<'a> {
    spec: &'a ModelSpec,
    clocks: Vec<Clock>,
    flow: LevelFlow,
    brownian: Vec<(usize, f64)>,
}

fn exp_draw(rng: &mut SimRng, rate: f64) -> f64 {
    if rate > 0.0 {
        let e: f64 = Exp1.sample(rng);
        e / rate
    } else {
        f64::INFINITY
    }
}

impl<'a> Engine<'a> {
    fn new(spec: &'a ModelSpec) -> Self {
        let mut flow = LevelFlow { additive_death: spec.mutant, no_birth_drift: spec.mutant, ..Default::default() };
        let mut brownian = Vec::new();
        let domain = spec.domain;
        let clocks = spec
            .mechanisms
            .iter()
            .enumerate()
            .map(|(i, m)| match m {
                Mechanism::PureDeath { d0 } => {
                    flow.deaths.push(d0.clone());
                    Clock::Silent
                }
                Mechanism::ContinuousBirth { k, r } => {
                    flow.births.push((*k, r.clone()));
                    Clock::PerParticle((*k as f64 + 1.0) * r.sup())
                }
                Mechanism::MultipleDeath { events } => Clock::Constant(events.iter().map(|e| e.rate).sum()),
                Mechanism::DiscreteBirth { event } => Clock::Constant(event.rate),
                Mechanism::Replacement { event } => match &event.variant {
                    ReplacementVariant::FixedK { rate, .. } | ReplacementVariant::Bernoulli { rate, .. } => Clock::Constant(*rate),
                    ReplacementVariant::Pairwise { pair_rate } => Clock::PerPair(pair_rate.sup()),
                    ReplacementVariant::Subsets { subsets } => Clock::Constant(subsets.iter().map(|s| s.1).sum()),
                },
                Mechanism::Thinning { event } => Clock::Constant(event.rate),
                Mechanism::Immigration { source } => Clock::Constant(source.arrival_rate),
                Mechanism::Motion { kernel } => match kernel {
                    MotionKernel::Brownian { sigma } => {
                        brownian.push((i, *sigma));
                        Clock::Silent
                    }
                    _ => Clock::PerParticle(kernel.jump_rate(&domain)),
                },
                Mechanism::SlfvReplacement { law } | Mechanism::SlfvBirthThinning { law } => Clock::Constant(law.total_rate(&domain)),
            })
            .map(|c| match c {
                Clock::Constant(r) | Clock::PerParticle(r) | Clock::PerPair(r) if r <= 0.0 => Clock::Silent,
                c => c,
            })
            .collect();
        Engine { spec, clocks, flow, brownian }
    }

    fn bound(&self, i: usize, slots: usize) -> f64 {
        let n = slots as f64;
        match self.clocks[i] {
            Clock::Silent => 0.0,
            Clock::Constant(r) => r,
            Clock::PerParticle(r) => r * n,
            Clock::PerPair(r) => r * n * (n - 1.0) / 2.0,
        }
    }

    fn fresh_state(&self) -> Result<EngineState> {
        let seed = self.spec.seed;
        let mut init = stream(seed, INIT_STREAM);
        let config = initial_configuration(self.spec, &mut init)?;
        let n = config.len();
        let streams = (0..self.clocks.len())
            .map(|i| {
                let mut rng = stream(seed, mechanism_stream(i));
                let next = config.time + exp_draw(&mut rng, self.bound(i, n));
                StreamState { rng, next, slots: n }
            })
            .collect();
        Ok(EngineState { config, streams })
    }

    fn log_deaths(&self, deaths: Vec<crate::mechanisms::flow::FlowDeath>, population: usize, traj: &mut Trajectory) {
        if self.spec.record_events {
            for d in deaths {
                traj.events.push(EventRecord {
                    time: d.time,
                    mechanism: None,
                    kind: "flow_death",
                    affected: vec![d.particle.id],
                    population,
                    tie: false,
                });
            }
        }
    }

    /// Brings every level up to the current time.
    fn sync_all(&self, st: &mut EngineState, traj: &mut Trajectory) {
        let deaths = self.flow.advance(&mut st.config, 0.0);
        let n = st.config.len();
        self.log_deaths(deaths, n, traj);
    }

    /// Brings one level up to the current time; `false` if the particle had died.
    fn sync_one(&self, st: &mut EngineState, idx: usize, traj: &mut Trajectory) -> bool {
        let c = &mut st.config;
        let (lambda, domain, now) = (c.lambda, c.domain, c.time);
        match self.flow.update(&mut c.particles[idx], lambda, &domain, now) {
            None => true,
            Some(time) => {
                let particle = c.particles.swap_remove(idx);
                let n = c.len();
                self.log_deaths(vec![crate::mechanisms::flow::FlowDeath { time, particle }], n, traj);
                false
            }
        }
    }

    /// Moves the clock to `t`. Levels lag behind unless Brownian motion
    /// forces them to be current before locations change.
    fn advance(&self, st: &mut EngineState, t: f64, traj: &mut Trajectory) {
        let dt = t - st.config.time;
        st.config.time = t;
        if dt > 0.0 && !self.brownian.is_empty() {
            self.sync_all(st, traj);
            for &(i, sigma) in &self.brownian {
                let kernel = MotionKernel::Brownian { sigma };
                crate::mechanisms::apply_motion(&mut st.config, &kernel, dt, &mut st.streams[i].rng);
            }
        }
    }

    fn reads_all_levels(&self, m: &Mechanism) -> bool {
        !matches!(m, Mechanism::PureDeath { .. } | Mechanism::ContinuousBirth { .. } | Mechanism::Immigration { .. } | Mechanism::Motion { .. })
    }

    /// Fires stream `i` at the current time. Returns `None` for a rejected candidate.
    fn fire(&self, st: &mut EngineState, i: usize, traj: &mut Trajectory) -> Result<Option<EventOutcome>> {
        let mutant = self.spec.mutant;
        let slots = st.streams[i].slots;
        let lazy = !self.flow.is_trivial();
        let mech = &self.spec.mechanisms[i];
        if lazy && self.reads_all_levels(mech) {
            self.sync_all(st, traj);
        }
        // Single-particle mechanisms pick their slot first and sync just that particle.
        let mut picked = None;
        if let Mechanism::ContinuousBirth { .. } | Mechanism::Motion { kernel: MotionKernel::RandomWalk { .. } | MotionKernel::AlleleMutation { .. } } = mech {
            let rng = &mut st.streams[i].rng;
            let slot = rng.random_range(0..slots.max(1));
            if slot >= st.config.len() || (lazy && !self.sync_one(st, slot, traj)) {
                if let Mechanism::ContinuousBirth { .. } = mech {
                    let _: f64 = st.streams[i].rng.random();
                }
                return Ok(None);
            }
            picked = Some(slot);
        }
        let config = &mut st.config;
        let rng = &mut st.streams[i].rng;
        let domain = config.domain;
        let n = config.len();
        let out = match &self.spec.mechanisms[i] {
            Mechanism::PureDeath { .. } => return Ok(None),
            Mechanism::MultipleDeath { events } => {
                let w: Vec<f64> = events.iter().map(|e| e.rate).collect();
                let e = &events[weighted_index(&w, rng)];
                multiple_death(config, e, mutant)
            }
            Mechanism::DiscreteBirth { event } => {
                let k = event.k.sample(rng) as usize;
                discrete_birth_k(config, k, &event.r, &event.q, rng, mutant)
            }
            Mechanism::ContinuousBirth { k, r } => {
                let slot = picked.expect("slot picked above");
                let coin: f64 = rng.random();
                let p = &config.particles[slot];
                let sup = (*k as f64 + 1.0) * r.sup();
                if coin * sup >= continuous_birth_rate(config.lambda, *k, r.eval(&p.x, &domain), p.u) {
                    return Ok(None);
                }
                apply_continuous_birth(config, slot, *k, rng)
            }
            Mechanism::Replacement { event } => match &event.variant {
                ReplacementVariant::Pairwise { pair_rate } => {
                    if slots < 2 {
                        return Ok(None);
                    }
                    let (a, b) = uniform_pair(slots, rng);
                    let coin: f64 = rng.random();
                    if a >= n || b >= n {
                        return Ok(None);
                    }
                    let rate = pair_rate.eval(&config.particles[a].x, &config.particles[b].x, &domain);
                    if coin * pair_rate.sup() >= rate {
                        return Ok(None);
                    }
                    let (a, b) = (a.min(b), a.max(b));
                    replace_subset(config, &[a, b], &event.q, rng, mutant)
                }
                ReplacementVariant::FixedK { k, .. } if *k as usize > n => EventOutcome::default(),
                variant => {
                    let subset = select_subset(config, variant, rng)?;
                    replace_subset(config, &subset, &event.q, rng, mutant)
                }
            },
            Mechanism::Thinning { event } => thinning(config, event, mutant),
            Mechanism::Immigration { source } => immigration(config, source, rng, mutant),
            Mechanism::Motion { kernel } => {
                let Some(slot) = picked else { return Ok(None) };
                let p = &mut config.particles[slot];
                jump(p, kernel, &domain, rng);
                if mutant {
                    // Broken control: jumps drag the level down.
                    p.u *= 0.9;
                }
                EventOutcome { affected: vec![p.id], ..Default::default() }
            }
            Mechanism::SlfvReplacement { law } => {
                let ev = law.sample(&domain, rng);
                let mut erng = child(rng);
                slfv_first_event(config, &ev, &mut erng, mutant)
            }
            Mechanism::SlfvBirthThinning { law } => {
                let ev = law.sample(&domain, rng);
                let mut erng = child(rng);
                slfv_second_event(config, law, &ev, &mut erng, mutant)?
            }
        };
        Ok(Some(out))
    }

    /// Runs from the state to `t_end`, taking snapshots at `stops`.
    fn run_to(&self, st: &mut EngineState, stops: &[f64], traj: &mut Trajectory) -> Result<()> {
        let cap = self.spec.particle_cap;
        for &stop in stops {
            loop {
                let (i, t_next) = st
                    .streams
                    .iter()
                    .enumerate()
                    .fold((usize::MAX, f64::INFINITY), |acc, (i, s)| if s.next < acc.1 { (i, s.next) } else { acc });
                if t_next > stop || i == usize::MAX {
                    self.advance(st, stop, traj);
                    self.sync_all(st, traj);
                    traj.snapshots.push(st.config.clone());
                    break;
                }
                self.advance(st, t_next, traj);
                traj.n_candidates += 1;
                let fired = self.fire(st, i, traj)?;
                let slots = st.streams[i].slots;
                st.streams[i].next = t_next + exp_draw(&mut st.streams[i].rng, self.bound(i, slots));
                if let Some(out) = fired {
                    traj.n_events += 1;
                    if self.spec.record_lineage {
                        traj.lineage.records.extend_from_slice(&out.lineage);
                    }
                    if self.spec.record_events {
                        traj.events.push(EventRecord {
                            time: t_next,
                            mechanism: Some(i),
                            kind: self.spec.mechanisms[i].name(),
                            affected: out.affected,
                            population: st.config.len(),
                            tie: out.tie,
                        });
                    }
                }
                let n = st.config.len();
                if n > cap {
                    return Err(Error::PopulationCap { count: n, cap, time: t_next });
                }
                for j in 0..st.streams.len() {
                    if st.streams[j].slots != n && matches!(self.clocks[j], Clock::PerParticle(_) | Clock::PerPair(_)) {
                        st.streams[j].slots = n;
                        let b = self.bound(j, n);
                        st.streams[j].next = t_next + exp_draw(&mut st.streams[j].rng, b);
                    }
                }
            }
        }
        traj.lineage.end = st.config.time;
        // Lazily discovered flow deaths were appended late.
        traj.events.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(())
    }
}

/// Simulates the model from its initial state to `t_end`.
pub fn run(spec: &ModelSpec) -> Result<Trajectory> {
    spec.validate()?;
    let engine = Engine::new(spec);
    let mut st = engine.fresh_state()?;
    let t0 = st.config.time;
    let mut traj = Trajectory {
        spec: spec.clone(),
        snapshots: Vec::new(),
        events: Vec::new(),
        lineage: LineageLog::new(t0),
        n_events: 0,
        n_candidates: 0,
        state: None,
    };
    if st.config.len() > spec.particle_cap {
        return Err(Error::PopulationCap { count: st.config.len(), cap: spec.particle_cap, time: t0 });
    }
    let stops = spec.snapshots.times(t0, spec.t_end, true);
    engine.run_to(&mut st, &stops, &mut traj)?;
    traj.state = Some(st);
    Ok(traj)
}

/// Continues a trajectory for `additional_time`. The result holds the whole
/// history; it equals a single longer run provided that run also took a
/// snapshot at the split time.
pub fn resume(traj: &Trajectory, additional_time: f64) -> Result<Trajectory> {
    let mut st = traj.state.clone().ok_or(Error::MissingState)?;
    if !(additional_time >= 0.0 && additional_time.is_finite()) {
        return Err(Error::InvalidParameter(format!("additional time {additional_time}")));
    }
    let mut spec = traj.spec.clone();
    let t0 = st.config.time;
    spec.t_end = t0 + additional_time;
    let mut out = traj.clone();
    out.spec = spec.clone();
    out.state = None;
    if additional_time > 0.0 {
        let engine = Engine::new(&spec);
        let stops = spec.snapshots.times(t0, spec.t_end, false);
        engine.run_to(&mut st, &stops, &mut out)?;
    }
    out.state = Some(st);
    Ok(out)
}

/// Per-snapshot summary of one replicate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SnapshotSummary {
    pub time: f64,
    pub count: usize,
    pub allele_counts: Vec<usize>,
    pub levels: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateSummary {
    pub index: usize,
    pub seed: u64,
    pub n_events: u64,
    pub snapshots: Vec<SnapshotSummary>,
}

pub fn summarize(index: usize, traj: &Trajectory) -> ReplicateSummary {
    ReplicateSummary {
        index,
        seed: traj.spec.seed,
        n_events: traj.n_events,
        snapshots: traj
            .snapshots
            .iter()
            .map(|c| SnapshotSummary { time: c.time, count: c.len(), allele_counts: c.allele_counts(), levels: c.levels() })
            .collect(),
    }
}

/// Runs `n` replicates with seeds derived from `master_seed` and maps each
/// trajectory through `f`. Results are ordered by replicate index whatever
/// the number of workers (`None` uses the global thread pool).
pub fn replicate_map<T, F>(spec: &ModelSpec, n: usize, master_seed: u64, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, Trajectory) -> T + Sync + Send,
{
    spec.validate()?;
    let job = || -> Result<Vec<T>> {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let s = spec.with_seed(replicate_seed(master_seed, i as u64));
                run(&s).map(|t| f(i, t.without_state()))
            })
            .collect()
    };
    match workers {
        None => job(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(job),
    }
}

pub fn run_replicates(spec: &ModelSpec, n: usize, master_seed: u64, workers: Option<usize>) -> Result<Vec<ReplicateSummary>> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one replicate".into()));
    }
    replicate_map(spec, n, master_seed, workers, |i, t| summarize(i, &t))
}
