//! Configurations of levelled particles.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::domain::{weighted_index, Domain, Intensity, TypePoint};
use crate::error::{invalid, Error, Result};
use crate::rng::{child, SimRng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub id: u64,
    pub x: TypePoint,
    pub u: f64,
    pub birth_time: f64,
    /// Time at which `u` is current; the engine lets levels lag behind the
    /// clock and brings them up to date when they are read.
    pub level_time: f64,
}

/// The counting measure η on types × `[0, λ)`, with its clock and id counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub domain: Domain,
    pub lambda: f64,
    pub time: f64,
    pub particles: Vec<Particle>,
    /// Next unused particle id; ids are never reused.
    pub next_id: u64,
}

impl Configuration {
    pub fn empty(domain: Domain, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return invalid(format!("level cap must be positive, got {lambda}"));
        }
        domain.validate()?;
        Ok(Configuration { domain, lambda, time: 0.0, particles: Vec::new(), next_id: 0 })
    }

    /// Builds a configuration from explicit (type, level) pairs.
    pub fn from_pairs(domain: Domain, lambda: f64, pairs: &[(TypePoint, f64)]) -> Result<Self> {
        let mut c = Self::empty(domain, lambda)?;
        for &(x, u) in pairs {
            if !(0.0..lambda).contains(&u) {
                return invalid(format!("level {u} outside [0, {lambda})"));
            }
            if !domain.contains(&x) {
                return invalid(format!("type {x:?} outside the domain"));
            }
            c.insert(x, u);
        }
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Adds a particle with a fresh id, born now.
    pub fn insert(&mut self, x: TypePoint, u: f64) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.particles.push(Particle { id, x, u, birth_time: self.time, level_time: self.time });
        id
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.particles.iter().position(|p| p.id == id)
    }

    pub fn levels(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.u).collect()
    }

    pub fn allele_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.domain.n_alleles as usize];
        for p in &self.particles {
            c[p.x.allele as usize] += 1;
        }
        c
    }

    /// Particles sorted by id (the canonical order for output and comparison).
    pub fn sorted_by_id(&self) -> Vec<Particle> {
        let mut v = self.particles.clone();
        v.sort_by_key(|p| p.id);
        v
    }

    /// Keeps only particles with level below `cap`.
    pub fn restrict(&self, cap: f64) -> Configuration {
        let mut c = self.clone();
        c.lambda = cap.min(self.lambda);
        c.particles.retain(|p| p.u < cap);
        c
    }

    pub fn check_invariants(&self) -> Result<()> {
        let mut ids = std::collections::HashSet::new();
        for p in &self.particles {
            if !(p.u >= 0.0 && p.u < self.lambda) {
                return Err(Error::InvalidSpec(format!("particle {} has level {} outside [0, {})", p.id, p.u, self.lambda)));
            }
            if !ids.insert(p.id) || p.id >= self.next_id {
                return Err(Error::InvalidSpec(format!("duplicate or unissued id {}", p.id)));
            }
            if !self.domain.contains(&p.x) {
                return Err(Error::InvalidSpec(format!("particle {} outside the domain", p.id)));
            }
        }
        Ok(())
    }

    // ── snapshot text format ──

    /// Tab-separated snapshot: a `#lambda/time/dim` header row, a column header,
    /// then one row per particle sorted by id.
    pub fn to_tsv(&self) -> String {
        let d = self.domain.dim;
        let mut s = format!(
            "#lambda\t{}\ttime\t{}\tdim\t{}\tside\t{}\talleles\t{}\tnext_id\t{}\n",
            self.lambda, self.time, d, self.domain.side, self.domain.n_alleles, self.next_id
        );
        s.push_str("id");
        for i in 0..d {
            s.push_str(&format!("\tx{i}"));
        }
        s.push_str("\tallele\tlevel\tbirth_time\n");
        for p in self.sorted_by_id() {
            s.push_str(&p.id.to_string());
            for i in 0..d {
                s.push_str(&format!("\t{}", p.x.loc[i]));
            }
            s.push_str(&format!("\t{}\t{}\t{}\n", p.x.allele, p.u, p.birth_time));
        }
        s
    }

    pub fn from_tsv(text: &str) -> Result<Configuration> {
        let perr = |m: String| Error::Parse(m);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| perr("empty snapshot".into()))?;
        let h: Vec<&str> = header.trim_start_matches('#').split('\t').collect();
        if h.len() != 12 || h[0] != "lambda" {
            return Err(perr(format!("bad snapshot header: {header}")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| perr(format!("{s}: {e}")));
        let lambda = num(h[1])?;
        let time = num(h[3])?;
        let dim: usize = h[5].parse().map_err(|e| perr(format!("dim: {e}")))?;
        let side = num(h[7])?;
        let n_alleles: u32 = h[9].parse().map_err(|e| perr(format!("alleles: {e}")))?;
        let next_id: u64 = h[11].parse().map_err(|e| perr(format!("next_id: {e}")))?;
        let _cols = lines.next().ok_or_else(|| perr("missing column header".into()))?;
        let mut particles = Vec::new();
        for (ln, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != dim + 4 {
                return Err(perr(format!("row {}: expected {} fields", ln + 3, dim + 4)));
            }
            let id: u64 = f[0].parse().map_err(|e| perr(format!("row {}: {e}", ln + 3)))?;
            let mut loc = [0.0; crate::domain::MAX_DIM];
            for i in 0..dim {
                loc[i] = num(f[1 + i])?;
            }
            let allele: u32 = f[dim + 1].parse().map_err(|e| perr(format!("row {}: {e}", ln + 3)))?;
            particles.push(Particle { id, x: TypePoint { loc, allele }, u: num(f[dim + 2])?, birth_time: num(f[dim + 3])?, level_time: time });
        }
        Ok(Configuration { domain: Domain { dim, side, n_alleles }, lambda, time, particles, next_id })
    }
}

/// η̄: the types of all particles, levels discarded.
pub fn project(config: &Configuration) -> Vec<TypePoint> {
    config.particles.iter().map(|p| p.x).collect()
}

/// One particle per type point with i.i.d. uniform levels on `[0, λ)`.
pub fn sample_uniform_levels(types: &[TypePoint], domain: Domain, lambda: f64, rng: &mut SimRng) -> Result<Configuration> {
    let mut c = Configuration::empty(domain, lambda)?;
    for x in types {
        if !domain.contains(x) {
            return invalid(format!("type {x:?} outside the domain"));
        }
        let u = rng.random::<f64>() * lambda;
        c.insert(*x, u);
    }
    Ok(c)
}

pub(crate) fn poisson_count(mean: f64, rng: &mut SimRng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

/// Conditionally Poisson configuration with Cox measure `intensity × Lebesgue`
/// truncated to levels `[0, u_max)`.
///
/// Levels are sampled in unit-width bands, each from its own child stream and
/// in increasing order, so the configuration for a cap `u` is exactly the
/// restriction of the one for any larger cap drawn from the same generator.
pub fn sample_conditionally_poisson(intensity: &Intensity, domain: Domain, u_max: f64, rng: &mut SimRng) -> Result<Configuration> {
    if !(u_max > 0.0) {
        return invalid(format!("u_max must be positive, got {u_max}"));
    }
    let mut c = Configuration::empty(domain, u_max)?;
    match intensity {
        Intensity::Atoms(a) => {
            if a.iter().any(|p| !(p.1 >= 0.0 && p.1.is_finite()) || !domain.contains(&p.0)) {
                return invalid("intensity atoms must be in-domain with finite nonnegative weight");
            }
        }
        Intensity::Uniform { density, allele_weights } => {
            if !(*density >= 0.0 && density.is_finite()) || allele_weights.iter().sum::<f64>() <= 0.0 {
                return invalid("uniform intensity needs finite density and positive allele weights");
            }
        }
    }
    let bands = u_max.ceil() as u64;
    for b in 0..bands {
        let mut band_rng = child(rng);
        let lo = b as f64;
        // Full-width bands, filtered at the cap, keep restriction exact for any cap.
        match intensity {
            Intensity::Atoms(a) => {
                for &(x, w) in a {
                    for _ in 0..poisson_count(w, &mut band_rng) {
                        let u = lo + band_rng.random::<f64>();
                        if u < u_max {
                            c.insert(x, u);
                        }
                    }
                }
            }
            Intensity::Uniform { density, allele_weights } => {
                let n = poisson_count(density * domain.volume(), &mut band_rng);
                for _ in 0..n {
                    let loc = domain.sample_location(&mut band_rng);
                    let allele = weighted_index(allele_weights, &mut band_rng) as u32;
                    let u = lo + band_rng.random::<f64>();
                    if u < u_max {
                        c.insert(TypePoint { loc, allele }, u);
                    }
                }
            }
        }
    }
    Ok(c)
}
