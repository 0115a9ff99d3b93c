//! Generator components: level flows between events and event transforms.
//!
//! Every transform takes the configuration by `&mut` and an explicit RNG, and
//! reports the affected particle ids plus any lineage records it created.

pub mod birth;
pub mod death;
pub mod flow;
pub mod generator;
pub mod other;
pub mod replacement;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, RateFn, TypeLaw, TypePoint, MAX_DIM};
use crate::error::{invalid, Result};
use crate::genealogy::LineageRecord;
use crate::models::SlfvEventLaw;
use crate::rng::SimRng;

pub use birth::{apply_continuous_birth, apply_discrete_birth, continuous_birth_rate, level_transform, race_time};
pub use death::{apply_multiple_death, death_time};
pub use flow::{cb_level, continuous_birth_flow, flow_levels_pure_death, g_k, pure_death_hitting_time, LevelFlow};
pub use generator::{generator_apply, GeneratorValue, Method};
pub use other::{apply_immigration, apply_motion, apply_thinning};
pub use replacement::{apply_replacement, draw_pair, select_subset};

/// What one event did.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventOutcome {
    pub affected: Vec<u64>,
    pub lineage: Vec<LineageRecord>,
    /// Set when an argmin had to be broken by the smallest-id rule.
    pub tie: bool,
}

impl EventOutcome {
    pub fn is_noop(&self) -> bool {
        self.affected.is_empty()
    }
}

/// Offspring / replacement type kernel `q(x*, ·)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Kernel {
    CopyParent,
    /// Each offspring independently uniform in the ball, parent's allele.
    UniformInBall { center: [f64; MAX_DIM], radius: f64 },
    /// All offspring at one uniform point of the ball, parent's allele.
    SharedPointInBall { center: [f64; MAX_DIM], radius: f64 },
    /// Parent's location; allele resampled uniformly with probability `prob`.
    Mutate { prob: f64 },
    /// Replacement only: copy the parent's allele, then the two members of a
    /// pair swap locations with probability ½.
    SwapHalf,
}

impl Kernel {
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        match self {
            Kernel::UniformInBall { radius, .. } | Kernel::SharedPointInBall { radius, .. } => {
                if domain.dim == 0 || !(*radius > 0.0 && *radius < domain.side / 2.0) {
                    return invalid("ball kernels need a spatial domain and 0 < radius < side/2");
                }
            }
            Kernel::Mutate { prob } => {
                if !(0.0..=1.0).contains(prob) {
                    return invalid("mutation probability must lie in [0, 1]");
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Draws `k` offspring types for parent `x`.
    pub fn offspring(&self, x: &TypePoint, k: usize, domain: &Domain, rng: &mut SimRng) -> Vec<TypePoint> {
        match self {
            Kernel::CopyParent | Kernel::SwapHalf => vec![*x; k],
            Kernel::UniformInBall { center, radius } => (0..k)
                .map(|_| TypePoint { loc: domain.sample_in_ball(center, *radius, rng), allele: x.allele })
                .collect(),
            Kernel::SharedPointInBall { center, radius } => {
                let loc = domain.sample_in_ball(center, *radius, rng);
                vec![TypePoint { loc, allele: x.allele }; k]
            }
            Kernel::Mutate { prob } => (0..k)
                .map(|_| {
                    let mut y = *x;
                    if rng.random::<f64>() < *prob {
                        y.allele = rng.random_range(0..domain.n_alleles);
                    }
                    y
                })
                .collect(),
        }
    }

    /// `E g(Y, u)` for a single draw `Y ~ q(x, ·)`, when it has a closed form.
    pub fn expect_g(&self, x: &TypePoint, u: f64, g: &crate::testfn::TestFunction, domain: &Domain) -> Option<f64> {
        match self {
            Kernel::CopyParent | Kernel::SwapHalf => Some(g.g(x, u, domain)),
            Kernel::Mutate { prob } => {
                let n = domain.n_alleles;
                let avg = (0..n)
                    .map(|a| g.g(&TypePoint { loc: x.loc, allele: a }, u, domain))
                    .sum::<f64>()
                    / n as f64;
                Some((1.0 - prob) * g.g(x, u, domain) + prob * avg)
            }
            Kernel::UniformInBall { .. } | Kernel::SharedPointInBall { .. } => {
                if g.depends_on_location() {
                    None
                } else {
                    Some(g.g(x, u, domain))
                }
            }
        }
    }
}

/// Offspring number of a discrete-birth event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OffspringCount {
    Fixed(u32),
    Poisson(f64),
    /// Number of failures before a success, with the given mean.
    Geometric(f64),
}

impl OffspringCount {
    pub fn mean(&self) -> f64 {
        match self {
            OffspringCount::Fixed(k) => *k as f64,
            OffspringCount::Poisson(m) | OffspringCount::Geometric(m) => *m,
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> u32 {
        use rand_distr::{Distribution, Geometric};
        match self {
            OffspringCount::Fixed(k) => *k,
            OffspringCount::Poisson(m) => crate::config::poisson_count(*m, rng) as u32,
            OffspringCount::Geometric(m) => {
                if *m <= 0.0 {
                    0
                } else {
                    Geometric::new(1.0 / (1.0 + m)).map(|d| d.sample(rng) as u32).unwrap_or(0)
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OffspringCount::Fixed(0) => invalid("fixed offspring count must be at least 1"),
            OffspringCount::Poisson(m) | OffspringCount::Geometric(m) if !(*m > 0.0 && m.is_finite()) => {
                invalid("offspring mean must be positive and finite")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PureDeathParams {
    pub d0: RateFn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultipleDeathEvent {
    pub rate: f64,
    pub k: u32,
    pub d1: RateFn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteBirthEvent {
    pub rate: f64,
    pub k: OffspringCount,
    pub r: RateFn,
    pub q: Kernel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousBirthParams {
    pub k: u32,
    pub r: RateFn,
}

/// Pairwise rate `r(x, x')` for two-member replacement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PairRate {
    Const(f64),
    /// `γ 1{x and x' share a location}`.
    SameSite(f64),
    /// `rate 1{distance ≤ radius}`.
    WithinDistance { radius: f64, rate: f64 },
}

impl PairRate {
    pub fn eval(&self, a: &TypePoint, b: &TypePoint, domain: &Domain) -> f64 {
        match self {
            PairRate::Const(g) => *g,
            PairRate::SameSite(g) => {
                if a.loc == b.loc {
                    *g
                } else {
                    0.0
                }
            }
            PairRate::WithinDistance { radius, rate } => {
                if domain.distance(&a.loc, &b.loc) <= *radius {
                    *rate
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            PairRate::Const(g) | PairRate::SameSite(g) => *g,
            PairRate::WithinDistance { rate, .. } => *rate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReplacementVariant {
    /// Uniform k-subset at the given event rate.
    FixedK { k: u32, rate: f64 },
    /// Each particle joins independently with probability `r(x)`.
    Bernoulli { r: RateFn, rate: f64 },
    /// Every unordered pair at rate `r(x, x')`.
    Pairwise { pair_rate: PairRate },
    /// Explicit subsets of particle ids with their rates.
    Subsets { subsets: Vec<(Vec<u64>, f64)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplacementEvent {
    pub variant: ReplacementVariant,
    pub q: Kernel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThinningEvent {
    pub rate: f64,
    pub p: RateFn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmigrationSource {
    pub arrival_rate: f64,
    pub type_law: TypeLaw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum MotionKernel {
    None,
    /// Nearest-neighbour walk with lattice spacing `step`; each of the `2d`
    /// directions at `rate`.
    RandomWalk { rate: f64, step: f64 },
    /// Increments `N(0, σ² dt)` per coordinate.
    Brownian { sigma: f64 },
    /// At `rate`, the allele is replaced by a uniformly chosen different one.
    AlleleMutation { rate: f64 },
}

impl MotionKernel {
    /// Per-particle jump rate for the jump kernels.
    pub fn jump_rate(&self, domain: &Domain) -> f64 {
        match self {
            MotionKernel::RandomWalk { rate, .. } => 2.0 * domain.dim as f64 * rate,
            MotionKernel::AlleleMutation { rate } if domain.n_alleles > 1 => *rate,
            _ => 0.0,
        }
    }
}

/// One configured generator component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Mechanism {
    PureDeath { d0: RateFn },
    MultipleDeath { events: Vec<MultipleDeathEvent> },
    DiscreteBirth { event: DiscreteBirthEvent },
    ContinuousBirth { k: u32, r: RateFn },
    Replacement { event: ReplacementEvent },
    Thinning { event: ThinningEvent },
    Immigration { source: ImmigrationSource },
    Motion { kernel: MotionKernel },
    /// Spatial Λ-Fleming–Viot, fixed levels, one-for-one replacement in a ball.
    SlfvReplacement { law: SlfvEventLaw },
    /// Spatial Λ-Fleming–Viot, discrete birth in a ball followed by thinning.
    SlfvBirthThinning { law: SlfvEventLaw },
}

impl Mechanism {
    pub fn name(&self) -> &'static str {
        match self {
            Mechanism::PureDeath { .. } => "pure_death",
            Mechanism::MultipleDeath { .. } => "multiple_death",
            Mechanism::DiscreteBirth { .. } => "discrete_birth",
            Mechanism::ContinuousBirth { .. } => "continuous_birth",
            Mechanism::Replacement { .. } => "replacement",
            Mechanism::Thinning { .. } => "thinning",
            Mechanism::Immigration { .. } => "immigration",
            Mechanism::Motion { .. } => "motion",
            Mechanism::SlfvReplacement { .. } => "slfv_replacement",
            Mechanism::SlfvBirthThinning { .. } => "slfv_birth_thinning",
        }
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        let rate_ok = |r: f64, what: &str| {
            if r >= 0.0 && r.is_finite() {
                Ok(())
            } else {
                invalid(format!("{what}: rate {r} must be finite and nonnegative"))
            }
        };
        match self {
            Mechanism::PureDeath { d0 } => d0.validate("d0", None),
            Mechanism::MultipleDeath { events } => {
                for e in events {
                    rate_ok(e.rate, "multiple death")?;
                    if e.k == 0 {
                        return invalid("multiple death needs k ≥ 1");
                    }
                    e.d1.validate("d1", None)?;
                }
                Ok(())
            }
            Mechanism::DiscreteBirth { event } => {
                rate_ok(event.rate, "discrete birth")?;
                event.k.validate()?;
                event.r.validate("r", None)?;
                event.q.validate(domain)
            }
            Mechanism::ContinuousBirth { k, r } => {
                if *k == 0 {
                    return invalid("continuous birth needs k ≥ 1");
                }
                r.validate("r", None)
            }
            Mechanism::Replacement { event } => {
                event.q.validate(domain)?;
                match &event.variant {
                    ReplacementVariant::FixedK { k, rate } => {
                        rate_ok(*rate, "fixed-k replacement")?;
                        if *k == 0 {
                            return invalid("fixed-k replacement needs k ≥ 1");
                        }
                        Ok(())
                    }
                    ReplacementVariant::Bernoulli { r, rate } => {
                        rate_ok(*rate, "bernoulli replacement")?;
                        r.validate("r", Some(1.0))
                    }
                    ReplacementVariant::Pairwise { pair_rate } => rate_ok(pair_rate.sup(), "pair rate"),
                    ReplacementVariant::Subsets { subsets } => {
                        for (_, r) in subsets {
                            rate_ok(*r, "subset rate")?;
                        }
                        Ok(())
                    }
                }
            }
            Mechanism::Thinning { event } => {
                rate_ok(event.rate, "thinning")?;
                event.p.validate("p", None)?;
                if event.p.sup() >= 1.0 {
                    return invalid("thinning probability must be below 1");
                }
                Ok(())
            }
            Mechanism::Immigration { source } => {
                rate_ok(source.arrival_rate, "immigration")?;
                source.type_law.validate(domain)
            }
            Mechanism::Motion { kernel } => match kernel {
                MotionKernel::RandomWalk { rate, step } => {
                    rate_ok(*rate, "random walk")?;
                    if domain.dim == 0 || !(*step > 0.0) {
                        return invalid("random walk needs a spatial domain and positive step");
                    }
                    Ok(())
                }
                MotionKernel::Brownian { sigma } => {
                    if domain.dim == 0 || !(*sigma >= 0.0) {
                        return invalid("Brownian motion needs a spatial domain and σ ≥ 0");
                    }
                    Ok(())
                }
                MotionKernel::AlleleMutation { rate } => rate_ok(*rate, "mutation"),
                MotionKernel::None => Ok(()),
            },
            Mechanism::SlfvReplacement { law } | Mechanism::SlfvBirthThinning { law } => law.validate(domain),
        }
    }
}
