//! Type space: a flat torus (or a single site) times a finite allele set.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::SimRng;

pub const MAX_DIM: usize = 3;

/// Location plus allele. Unused coordinates (beyond the domain dimension) are 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypePoint {
    #[serde(default)]
    pub loc: [f64; MAX_DIM],
    #[serde(default)]
    pub allele: u32,
}

impl TypePoint {
    pub fn site(allele: u32) -> Self {
        TypePoint { loc: [0.0; MAX_DIM], allele }
    }

    pub fn at(loc: &[f64], allele: u32) -> Self {
        let mut l = [0.0; MAX_DIM];
        l[..loc.len()].copy_from_slice(loc);
        TypePoint { loc: l, allele }
    }
}

/// `dim = 0` is the single abstract site of non-spatial models.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    #[serde(default)]
    pub dim: usize,
    #[serde(default = "unit")]
    pub side: f64,
    #[serde(default = "one_allele")]
    pub n_alleles: u32,
}

fn unit() -> f64 {
    1.0
}
fn one_allele() -> u32 {
    1
}

impl Domain {
    pub fn site(n_alleles: u32) -> Self {
        Domain { dim: 0, side: 1.0, n_alleles }
    }

    pub fn torus(dim: usize, side: f64, n_alleles: u32) -> Self {
        Domain { dim, side, n_alleles }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim > MAX_DIM {
            return invalid(format!("domain dimension {} exceeds {MAX_DIM}", self.dim));
        }
        if !(self.side > 0.0 && self.side.is_finite()) {
            return invalid(format!("torus side must be positive, got {}", self.side));
        }
        if self.n_alleles == 0 {
            return invalid("allele alphabet must be nonempty");
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    pub fn contains(&self, x: &TypePoint) -> bool {
        x.allele < self.n_alleles
            && (0..MAX_DIM).all(|i| {
                if i < self.dim {
                    x.loc[i] >= 0.0 && x.loc[i] < self.side
                } else {
                    x.loc[i] == 0.0
                }
            })
    }

    pub fn wrap(&self, loc: &mut [f64; MAX_DIM]) {
        for c in loc.iter_mut().take(self.dim) {
            *c = c.rem_euclid(self.side);
            // rem_euclid can round up to exactly `side`
            if *c >= self.side {
                *c = 0.0;
            }
        }
    }

    /// Minimal-image Euclidean distance.
    pub fn distance(&self, a: &[f64; MAX_DIM], b: &[f64; MAX_DIM]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            let mut d = (a[i] - b[i]).abs() % self.side;
            if d > self.side / 2.0 {
                d = self.side - d;
            }
            s += d * d;
        }
        s.sqrt()
    }

    /// Volume of a ball of radius `w` in `dim` dimensions.
    pub fn ball_volume(&self, w: f64) -> f64 {
        match self.dim {
            0 => 1.0,
            1 => 2.0 * w,
            2 => std::f64::consts::PI * w * w,
            _ => 4.0 / 3.0 * std::f64::consts::PI * w * w * w,
        }
    }

    pub fn in_ball(&self, center: &[f64; MAX_DIM], w: f64, x: &TypePoint) -> bool {
        self.dim == 0 || self.distance(center, &x.loc) < w
    }

    pub fn sample_location(&self, rng: &mut SimRng) -> [f64; MAX_DIM] {
        let mut l = [0.0; MAX_DIM];
        for c in l.iter_mut().take(self.dim) {
            *c = rng.random::<f64>() * self.side;
        }
        l
    }

    /// Uniform point in the ball, by rejection from the enclosing cube.
    pub fn sample_in_ball(&self, center: &[f64; MAX_DIM], w: f64, rng: &mut SimRng) -> [f64; MAX_DIM] {
        if self.dim == 0 {
            return [0.0; MAX_DIM];
        }
        loop {
            let mut off = [0.0; MAX_DIM];
            let mut r2 = 0.0;
            for o in off.iter_mut().take(self.dim) {
                *o = (2.0 * rng.random::<f64>() - 1.0) * w;
                r2 += *o * *o;
            }
            if r2 < w * w {
                let mut l = *center;
                for i in 0..self.dim {
                    l[i] += off[i];
                }
                self.wrap(&mut l);
                return l;
            }
        }
    }
}

/// A bounded nonnegative function of the type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RateFn {
    Const(f64),
    PerAllele(Vec<f64>),
    /// `inside` on the open ball, `outside` elsewhere.
    Ball {
        center: [f64; MAX_DIM],
        radius: f64,
        inside: f64,
        outside: f64,
    },
}

impl RateFn {
    pub fn eval(&self, x: &TypePoint, domain: &Domain) -> f64 {
        match self {
            RateFn::Const(c) => *c,
            RateFn::PerAllele(v) => v.get(x.allele as usize).copied().unwrap_or(0.0),
            RateFn::Ball { center, radius, inside, outside } => {
                if domain.in_ball(center, *radius, x) {
                    *inside
                } else {
                    *outside
                }
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            RateFn::Const(c) => *c,
            RateFn::PerAllele(v) => v.iter().copied().fold(0.0, f64::max),
            RateFn::Ball { inside, outside, .. } => inside.max(*outside),
        }
    }

    pub fn depends_on_location(&self) -> bool {
        matches!(self, RateFn::Ball { .. })
    }

    pub fn validate(&self, name: &str, upper: Option<f64>) -> Result<()> {
        let vals: Vec<f64> = match self {
            RateFn::Const(c) => vec![*c],
            RateFn::PerAllele(v) => v.clone(),
            RateFn::Ball { radius, inside, outside, .. } => {
                if !(*radius > 0.0) {
                    return invalid(format!("{name}: ball radius must be positive"));
                }
                vec![*inside, *outside]
            }
        };
        for v in vals {
            if !(v >= 0.0 && v.is_finite()) {
                return invalid(format!("{name}: value {v} must be finite and nonnegative"));
            }
            if let Some(u) = upper {
                if v > u {
                    return invalid(format!("{name}: value {v} exceeds {u}"));
                }
            }
        }
        Ok(())
    }
}

/// Law of a single new type point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TypeLaw {
    Fixed(TypePoint),
    /// Atoms with (unnormalized) weights.
    Discrete(Vec<(TypePoint, f64)>),
    /// Uniform location, allele drawn from the weights.
    Uniform { allele_weights: Vec<f64> },
}

fn pick_weighted(weights: impl Iterator<Item = f64> + Clone, rng: &mut SimRng) -> usize {
    let total: f64 = weights.clone().sum();
    let mut target = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last = i;
            if target < w {
                return i;
            }
            target -= w;
        }
    }
    last
}

pub(crate) fn weighted_index(weights: &[f64], rng: &mut SimRng) -> usize {
    pick_weighted(weights.iter().copied(), rng)
}

impl TypeLaw {
    pub fn sample(&self, domain: &Domain, rng: &mut SimRng) -> TypePoint {
        match self {
            TypeLaw::Fixed(x) => *x,
            TypeLaw::Discrete(atoms) => atoms[pick_weighted(atoms.iter().map(|a| a.1), rng)].0,
            TypeLaw::Uniform { allele_weights } => {
                let loc = domain.sample_location(rng);
                let allele = weighted_index(allele_weights, rng) as u32;
                TypePoint { loc, allele }
            }
        }
    }

    /// Normalized atoms when the law is discrete, or when it is uniform in
    /// location and `location_free` says the caller does not care about the location.
    pub fn atoms(&self, location_free: bool) -> Option<Vec<(TypePoint, f64)>> {
        match self {
            TypeLaw::Fixed(x) => Some(vec![(*x, 1.0)]),
            TypeLaw::Discrete(a) => {
                let t: f64 = a.iter().map(|p| p.1).sum();
                Some(a.iter().map(|&(x, w)| (x, w / t)).collect())
            }
            TypeLaw::Uniform { allele_weights } if location_free => {
                let t: f64 = allele_weights.iter().sum();
                Some(
                    allele_weights
                        .iter()
                        .enumerate()
                        .map(|(a, &w)| (TypePoint::site(a as u32), w / t))
                        .collect(),
                )
            }
            TypeLaw::Uniform { .. } => None,
        }
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        let ok_weights = |w: &[f64]| w.iter().all(|v| *v >= 0.0 && v.is_finite()) && w.iter().sum::<f64>() > 0.0;
        match self {
            TypeLaw::Fixed(x) => {
                if !domain.contains(x) {
                    return invalid("type law atom outside the domain");
                }
            }
            TypeLaw::Discrete(a) => {
                let w: Vec<f64> = a.iter().map(|p| p.1).collect();
                if !ok_weights(&w) || a.iter().any(|p| !domain.contains(&p.0)) {
                    return invalid("discrete type law needs in-domain atoms with positive total weight");
                }
            }
            TypeLaw::Uniform { allele_weights } => {
                if !ok_weights(allele_weights) || allele_weights.len() > domain.n_alleles as usize {
                    return invalid("uniform type law needs allele weights within the alphabet");
                }
            }
        }
        Ok(())
    }
}

/// Cox measure Ξ of a conditionally Poisson configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Intensity {
    Atoms(Vec<(TypePoint, f64)>),
    /// `density` times Lebesgue measure on the torus, alleles drawn from the weights.
    Uniform { density: f64, allele_weights: Vec<f64> },
}

impl Intensity {
    pub fn total(&self, domain: &Domain) -> f64 {
        match self {
            Intensity::Atoms(a) => a.iter().map(|p| p.1).sum(),
            Intensity::Uniform { density, .. } => density * domain.volume(),
        }
    }
}
