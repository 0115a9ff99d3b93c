//! Preset models assembled from the mechanism components, and the spatial
//! Λ-Fleming–Viot event law.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::domain::{weighted_index, Domain, Intensity, RateFn, TypePoint, MAX_DIM};
use crate::engine::{InitialState, ModelSpec};
use crate::error::{invalid, Error, Result};
use crate::genealogy::{LineageRecord, LineageTag};
use crate::mechanisms::birth::discrete_birth_k;
use crate::mechanisms::other::thinning;
use crate::mechanisms::{
    EventOutcome, Kernel, Mechanism, MotionKernel, OffspringCount, PairRate, ReplacementEvent, ReplacementVariant, ThinningEvent,
};
use crate::rng::SimRng;

/// One radius atom of ν² with its impact law ν¹(w, ·).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlfvRadius {
    pub w: f64,
    /// Event rate per unit volume of centres.
    pub weight: f64,
    /// `(ζ, probability)` pairs.
    pub impacts: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SlfvOffspring {
    /// First construction: involved particles are replaced one for one.
    OneForOne,
    /// Poisson with mean `λ α_z`.
    Poisson,
    /// Geometric with mean `λ α_z`.
    Geometric,
    /// Fixed count; must equal `λ α_z` for every atom.
    Fixed(u32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlfvEventLaw {
    pub radii: Vec<SlfvRadius>,
    pub offspring: SlfvOffspring,
}

/// A sampled event `(y, ζ, w)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlfvEvent {
    pub center: [f64; MAX_DIM],
    pub w: f64,
    pub zeta: f64,
}

impl SlfvEventLaw {
    pub fn single(w: f64, zeta: f64, weight: f64, offspring: SlfvOffspring) -> Self {
        SlfvEventLaw { radii: vec![SlfvRadius { w, weight, impacts: vec![(zeta, 1.0)] }], offspring }
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        if domain.dim == 0 {
            return invalid("spatial Λ-Fleming–Viot needs a torus");
        }
        for r in &self.radii {
            if !(r.w > 0.0 && r.w < domain.side / 4.0) {
                return invalid(format!("radius {} must lie in (0, side/4)", r.w));
            }
            if !(r.weight >= 0.0 && r.weight.is_finite()) {
                return invalid("radius weights must be finite and nonnegative");
            }
            let total: f64 = r.impacts.iter().map(|z| z.1).sum();
            if r.impacts.is_empty() || (total - 1.0).abs() > 1e-12 {
                return invalid("impact probabilities must sum to 1");
            }
            for &(z, p) in &r.impacts {
                if !(z > 0.0 && z < 1.0) || !(p >= 0.0) {
                    return invalid(format!("impact {z} must lie in (0, 1) with nonnegative probability"));
                }
            }
        }
        if let SlfvOffspring::Fixed(0) = self.offspring {
            return invalid("fixed offspring count must be at least 1");
        }
        Ok(())
    }

    /// Checks the offspring law against `λ α_z` at every atom.
    pub fn validate_for_lambda(&self, domain: &Domain, lambda: f64) -> Result<()> {
        for r in &self.radii {
            for &(z, _) in &r.impacts {
                self.offspring_count(domain, lambda, z, r.w)?;
            }
        }
        Ok(())
    }

    /// Total event rate on the torus.
    pub fn total_rate(&self, domain: &Domain) -> f64 {
        domain.volume() * self.radii.iter().map(|r| r.weight).sum::<f64>()
    }

    pub fn sample(&self, domain: &Domain, rng: &mut SimRng) -> SlfvEvent {
        let center = domain.sample_location(rng);
        let w: Vec<f64> = self.radii.iter().map(|r| r.weight).collect();
        let r = &self.radii[weighted_index(&w, rng)];
        let p: Vec<f64> = r.impacts.iter().map(|z| z.1).collect();
        let zeta = r.impacts[weighted_index(&p, rng)].0;
        SlfvEvent { center, w: r.w, zeta }
    }

    /// Offspring law of one event in the second construction.
    pub fn offspring_count(&self, domain: &Domain, lambda: f64, zeta: f64, w: f64) -> Result<OffspringCount> {
        let mean = lambda * alpha_z(domain, zeta, w);
        let law = match self.offspring {
            SlfvOffspring::OneForOne => {
                return Err(Error::InvalidSpec("one-for-one offspring law in a birth/thinning construction".into()))
            }
            SlfvOffspring::Poisson => OffspringCount::Poisson(mean),
            SlfvOffspring::Geometric => OffspringCount::Geometric(mean),
            SlfvOffspring::Fixed(k) => OffspringCount::Fixed(k),
        };
        if (law.mean() - mean).abs() > 1e-12 * mean {
            return Err(Error::InvalidSpec(format!("offspring mean {} differs from λα = {mean}", law.mean())));
        }
        Ok(law)
    }
}

/// `α_z = ζ/(1−ζ) |D_{y,w}|`.
pub fn alpha_z(domain: &Domain, zeta: f64, w: f64) -> f64 {
    zeta / (1.0 - zeta) * domain.ball_volume(w)
}

/// Volume of the intersection of two radius-`w` balls whose centres are `rho` apart.
pub fn ball_overlap(dim: usize, w: f64, rho: f64) -> f64 {
    if rho >= 2.0 * w {
        return 0.0;
    }
    match dim {
        1 => 2.0 * w - rho,
        2 => 2.0 * w * w * (rho / (2.0 * w)).acos() - 0.5 * rho * (4.0 * w * w - rho * rho).sqrt(),
        3 => std::f64::consts::PI * (4.0 * w + rho) * (2.0 * w - rho).powi(2) / 12.0,
        _ => 1.0,
    }
}

/// Rate at which two particles `rho` apart are both involved in one event:
/// `Σ weight · E[ζ²] · |D_w(x) ∩ D_w(x')|`.
pub fn coinvolvement_rate(law: &SlfvEventLaw, dim: usize, rho: f64) -> f64 {
    law.radii
        .iter()
        .map(|r| r.weight * r.impacts.iter().map(|&(z, p)| p * z * z).sum::<f64>() * ball_overlap(dim, r.w, rho))
        .sum()
}

/// First construction: each in-ball particle is involved with probability ζ;
/// the involved ones relocate uniformly in the ball and adopt the allele of the
/// lowest involved level. Draws are made particle by particle in level order,
/// so particles above any cap never influence those below it.
pub fn slfv_first_event(config: &mut Configuration, ev: &SlfvEvent, rng: &mut SimRng, mutant: bool) -> EventOutcome {
    let domain = config.domain;
    let mut inside: Vec<usize> = (0..config.len()).filter(|&i| domain.in_ball(&ev.center, ev.w, &config.particles[i].x)).collect();
    inside.sort_by(|&a, &b| config.particles[a].u.total_cmp(&config.particles[b].u).then(config.particles[a].id.cmp(&config.particles[b].id)));
    let mut involved = Vec::new();
    for &i in &inside {
        if rng.random::<f64>() < ev.zeta {
            let loc = domain.sample_in_ball(&ev.center, ev.w, rng);
            involved.push((i, loc));
        }
    }
    let mut out = EventOutcome::default();
    if involved.is_empty() {
        return out;
    }
    // Broken control: the highest involved level transmits.
    let pi = if mutant { involved.last().unwrap().0 } else { involved[0].0 };
    let parent = config.particles[pi];
    for &(i, loc) in &involved {
        let p = &mut config.particles[i];
        p.x = TypePoint { loc, allele: parent.x.allele };
        out.affected.push(p.id);
        if i != pi {
            out.lineage.push(LineageRecord {
                time: config.time,
                child: p.id,
                parent: Some(parent.id),
                child_level: p.u,
                parent_level: Some(parent.u),
                tag: LineageTag::Slfv,
            });
        }
    }
    out
}

/// Second construction: a discrete birth with weight `1_D` and offspring
/// uniform in the ball, immediately followed by thinning with `p = ζ 1_D`.
pub fn slfv_second_event(config: &mut Configuration, law: &SlfvEventLaw, ev: &SlfvEvent, rng: &mut SimRng, mutant: bool) -> Result<EventOutcome> {
    let domain = config.domain;
    let count = law.offspring_count(&domain, config.lambda, ev.zeta, ev.w)?;
    let k = count.sample(rng) as usize;
    let r = RateFn::Ball { center: ev.center, radius: ev.w, inside: 1.0, outside: 0.0 };
    let q = Kernel::UniformInBall { center: ev.center, radius: ev.w };
    let mut out = discrete_birth_k(config, k, &r, &q, rng, mutant);
    let p = RateFn::Ball { center: ev.center, radius: ev.w, inside: ev.zeta, outside: 0.0 };
    let th = thinning(config, &ThinningEvent { rate: 1.0, p }, mutant);
    out.affected.extend(th.affected);
    Ok(out)
}

/// Finiteness integrals of an atomic SLFV law.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlfvLawDiagnostics {
    /// `∫_{w>1} ζ w^d`.
    pub large_events: f64,
    /// `∫_{w≤1} ζ w²` for `d = 1`, `∫_{w≤1} ζ w^{2+d}` otherwise.
    pub small_events: f64,
    /// `∫ ζ w^d` over all radii.
    pub all_events: f64,
    pub large_finite: bool,
    pub small_finite: bool,
    pub all_finite: bool,
}

pub fn validate_slfv_law(law: &SlfvEventLaw, dim: usize) -> SlfvLawDiagnostics {
    let d = dim as i32;
    let small_pow = if dim == 1 { 2 } else { 2 + d };
    let (mut large, mut small, mut all) = (0.0, 0.0, 0.0);
    for r in &law.radii {
        let ez: f64 = r.impacts.iter().map(|&(z, p)| z * p).sum::<f64>() * r.weight;
        if r.w > 1.0 {
            large += ez * r.w.powi(d);
        } else {
            small += ez * r.w.powi(small_pow);
        }
        all += ez * r.w.powi(d);
    }
    SlfvLawDiagnostics {
        large_events: large,
        small_events: small,
        all_events: all,
        large_finite: large.is_finite(),
        small_finite: small.is_finite(),
        all_finite: all.is_finite(),
    }
}

// ── presets ──

fn default_alleles() -> u32 {
    2
}

fn default_lambda() -> f64 {
    1.0
}

fn even_split(n: usize, n_alleles: u32) -> Vec<usize> {
    let a = n_alleles.max(1) as usize;
    (0..a).map(|i| n / a + usize::from(i < n % a)).collect()
}

fn base_spec(domain: Domain, lambda: f64, initial: InitialState, mechanisms: Vec<Mechanism>) -> ModelSpec {
    ModelSpec { domain, lambda, initial, mechanisms, ..ModelSpec::default() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoranParams {
    pub n: usize,
    pub gamma: f64,
    #[serde(default = "default_alleles")]
    pub n_alleles: u32,
    /// Spatial Moran on a ring of this many sites: pairs interact only on the same site.
    #[serde(default)]
    pub sites: Option<u32>,
    #[serde(default = "default_motion")]
    pub motion: MotionKernel,
}

fn default_motion() -> MotionKernel {
    MotionKernel::None
}

pub fn preset_moran(p: &MoranParams) -> Result<ModelSpec> {
    if p.n < 2 {
        return invalid("Moran preset needs N ≥ 2");
    }
    let counts = even_split(p.n, p.n_alleles);
    let (domain, pair_rate) = match p.sites {
        None => (Domain::site(p.n_alleles), PairRate::Const(p.gamma)),
        Some(s) => (Domain::torus(1, s as f64, p.n_alleles), PairRate::SameSite(p.gamma)),
    };
    let mut types = Vec::with_capacity(p.n);
    for (a, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            let loc = match p.sites {
                None => [0.0; MAX_DIM],
                Some(s) => [(types.len() as u32 % s) as f64, 0.0, 0.0],
            };
            types.push(TypePoint { loc, allele: a as u32 });
        }
    }
    let mut mechanisms = vec![Mechanism::Replacement {
        event: ReplacementEvent { variant: ReplacementVariant::Pairwise { pair_rate }, q: Kernel::CopyParent },
    }];
    if p.motion != MotionKernel::None {
        mechanisms.push(Mechanism::Motion { kernel: p.motion.clone() });
    }
    Ok(base_spec(domain, 1.0, InitialState::UniformLevels { types }, mechanisms))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchingParams {
    pub n0: usize,
    pub r: f64,
    pub k: u32,
    #[serde(default)]
    pub critical: bool,
    #[serde(default = "default_branching_lambda")]
    pub lambda: f64,
    /// Common factor on all rates, for convergence studies.
    #[serde(default = "one")]
    pub rate_scale: f64,
}

fn default_branching_lambda() -> f64 {
    10.0
}

fn one() -> f64 {
    1.0
}

/// Continuous birth alone, or balanced against pure death `d₀ = r k`.
pub fn preset_branching(p: &BranchingParams) -> Result<ModelSpec> {
    if p.n0 == 0 {
        return invalid("branching preset needs N0 ≥ 1");
    }
    if p.k == 0 {
        return invalid("branching preset needs k ≥ 1");
    }
    let r = p.r * p.rate_scale;
    let mut mechanisms = vec![Mechanism::ContinuousBirth { k: p.k, r: RateFn::Const(r) }];
    if p.critical {
        mechanisms.push(Mechanism::PureDeath { d0: RateFn::Const(r * p.k as f64) });
    }
    let types = vec![TypePoint::site(0); p.n0];
    Ok(base_spec(Domain::site(1), p.lambda, InitialState::UniformLevels { types }, mechanisms))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PureDeathPreset {
    pub n0: usize,
    pub d0: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

pub fn preset_pure_death(p: &PureDeathPreset) -> Result<ModelSpec> {
    let types = vec![TypePoint::site(0); p.n0];
    Ok(base_spec(Domain::site(1), p.lambda, InitialState::UniformLevels { types }, vec![Mechanism::PureDeath { d0: RateFn::Const(p.d0) }]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlfvParams {
    pub dim: usize,
    pub side: f64,
    #[serde(default = "default_alleles")]
    pub n_alleles: u32,
    pub law: SlfvEventLaw,
    /// Level cap: `u_max` for the first construction, λ for the second.
    pub level_cap: f64,
}

fn slfv_initial(p: &SlfvParams) -> InitialState {
    let w = vec![1.0; p.n_alleles.max(1) as usize];
    InitialState::ConditionallyPoisson { intensity: Intensity::Uniform { density: 1.0, allele_weights: w } }
}

pub fn preset_slfv_first(p: &SlfvParams) -> Result<ModelSpec> {
    let domain = Domain::torus(p.dim, p.side, p.n_alleles);
    p.law.validate(&domain)?;
    Ok(base_spec(domain, p.level_cap, slfv_initial(p), vec![Mechanism::SlfvReplacement { law: p.law.clone() }]))
}

pub fn preset_slfv_second(p: &SlfvParams) -> Result<ModelSpec> {
    let domain = Domain::torus(p.dim, p.side, p.n_alleles);
    p.law.validate(&domain)?;
    p.law.validate_for_lambda(&domain, p.level_cap)?;
    Ok(base_spec(domain, p.level_cap, slfv_initial(p), vec![Mechanism::SlfvBirthThinning { law: p.law.clone() }]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoterParams {
    /// Sites per side of the lattice torus.
    pub size: u32,
    #[serde(default = "one_usize")]
    pub dim: usize,
    pub pair_rate: PairRate,
    #[serde(default = "default_voter_weights")]
    pub allele_weights: Vec<f64>,
}

fn one_usize() -> usize {
    1
}

fn default_voter_weights() -> Vec<f64> {
    vec![1.0, 1.0]
}

/// One particle per lattice site, pairwise replacement with the symmetric swap kernel.
pub fn preset_voter(p: &VoterParams) -> Result<ModelSpec> {
    if p.size < 2 || !(1..=MAX_DIM).contains(&p.dim) {
        return invalid("voter preset needs size ≥ 2 and dimension 1 to 3");
    }
    let domain = Domain::torus(p.dim, p.size as f64, p.allele_weights.len() as u32);
    let mechanisms = vec![Mechanism::Replacement {
        event: ReplacementEvent { variant: ReplacementVariant::Pairwise { pair_rate: p.pair_rate.clone() }, q: Kernel::SwapHalf },
    }];
    Ok(base_spec(domain, 1.0, InitialState::Lattice { allele_weights: p.allele_weights.clone() }, mechanisms))
}

/// A preset selected by name with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "preset")]
pub enum Preset {
    Moran(MoranParams),
    Branching(BranchingParams),
    PureDeath(PureDeathPreset),
    SlfvFirst(SlfvParams),
    SlfvSecond(SlfvParams),
    Voter(VoterParams),
}

impl Preset {
    pub fn build(&self) -> Result<ModelSpec> {
        match self {
            Preset::Moran(p) => preset_moran(p),
            Preset::Branching(p) => preset_branching(p),
            Preset::PureDeath(p) => preset_pure_death(p),
            Preset::SlfvFirst(p) => preset_slfv_first(p),
            Preset::SlfvSecond(p) => preset_slfv_second(p),
            Preset::Voter(p) => preset_voter(p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::adaptive_simpson;
    use crate::rng::stream;

    #[test]
    fn law_diagnostics_by_hand() {
        let law = SlfvEventLaw::single(1.0, 0.5, 1.0, SlfvOffspring::OneForOne);
        let d = validate_slfv_law(&law, 2);
        assert_eq!((d.large_events, d.small_events, d.all_events), (0.0, 0.5, 0.5));
        let two = SlfvEventLaw {
            radii: vec![
                SlfvRadius { w: 0.5, weight: 2.0, impacts: vec![(0.2, 0.5), (0.6, 0.5)] },
                SlfvRadius { w: 2.0, weight: 0.25, impacts: vec![(0.4, 1.0)] },
            ],
            offspring: SlfvOffspring::Poisson,
        };
        let d = validate_slfv_law(&two, 1);
        assert!((d.small_events - 2.0 * 0.4 * 0.25).abs() < 1e-15);
        assert!((d.large_events - 0.25 * 0.4 * 2.0).abs() < 1e-15);
        assert!((d.all_events - (2.0 * 0.4 * 0.5 + 0.2)).abs() < 1e-15);
        let zero = SlfvEventLaw::single(0.5, 0.5, 0.0, SlfvOffspring::OneForOne);
        let d = validate_slfv_law(&zero, 2);
        assert_eq!((d.large_events, d.small_events, d.all_events), (0.0, 0.0, 0.0));
    }

    #[test]
    fn overlap_matches_quadrature() {
        let w = 0.7;
        for rho in [0.0, 0.3, 1.0, 1.39] {
            // 1D: ∫ 1{|y|<w} 1{|y−ρ|<w} dy
            let m = 1_000_000;
            let h = 5.0 / m as f64;
            let q1 = (0..m)
                .map(|i| -2.0 + (i as f64 + 0.5) * h)
                .filter(|y| y.abs() < w && (y - rho).abs() < w)
                .count() as f64
                * h;
            assert!((q1 - ball_overlap(1, w, rho)).abs() < 1e-5);
            // 2D: horizontal slices at height y overlap on a segment of length (2a − ρ)₊
            let chord = |y: f64| (2.0 * (w * w - y * y).max(0.0).sqrt() - rho).max(0.0);
            let q2 = adaptive_simpson(&chord, -w, w, 1e-12).unwrap();
            assert!((q2 - ball_overlap(2, w, rho)).abs() < 1e-6, "{q2} vs {}", ball_overlap(2, w, rho));
        }
        assert_eq!(ball_overlap(2, 0.5, 1.2), 0.0);
    }

    #[test]
    fn fixed_law_mean_guard() {
        let d = Domain::torus(1, 10.0, 2);
        // λ α = 4 · (0.5/0.5) · 1 = 4
        let ok = SlfvEventLaw::single(0.5, 0.5, 1.0, SlfvOffspring::Fixed(4));
        assert!(ok.validate_for_lambda(&d, 4.0).is_ok());
        assert!(ok.validate_for_lambda(&d, 4.1).is_err());
    }

    #[test]
    fn first_event_is_one_for_one() {
        let d = Domain::torus(1, 10.0, 3);
        let pairs: Vec<_> = (0..40).map(|i| (TypePoint::at(&[0.25 * i as f64], i % 3), 0.01 + 0.02 * i as f64)).collect();
        let mut c = Configuration::from_pairs(d, 1.0, &pairs).unwrap();
        let law = SlfvEventLaw::single(2.0, 0.6, 1.0, SlfvOffspring::OneForOne);
        let mut rng = stream(5, 0);
        for _ in 0..100 {
            let ev = law.sample(&d, &mut rng);
            let levels = c.levels();
            let out = slfv_first_event(&mut c, &ev, &mut rng, false);
            assert_eq!(c.levels(), levels);
            assert_eq!(c.len(), 40);
            for r in &out.lineage {
                assert!(r.parent_level.unwrap() < r.child_level);
            }
        }
    }

    #[test]
    fn presets_build() {
        assert!(preset_moran(&MoranParams { n: 1, gamma: 1.0, n_alleles: 2, sites: None, motion: MotionKernel::None }).is_err());
        let b = BranchingParams { n0: 5, r: 0.5, k: 0, critical: true, lambda: 10.0, rate_scale: 1.0 };
        assert!(preset_branching(&b).is_err());
        let v = preset_voter(&VoterParams { size: 4, dim: 2, pair_rate: PairRate::WithinDistance { radius: 1.0, rate: 1.0 }, allele_weights: vec![1.0, 1.0] }).unwrap();
        assert_eq!(v.domain.side, 4.0);
    }
}
