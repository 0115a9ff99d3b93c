//! Thinning, immigration and independent motion.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{EventOutcome, ImmigrationSource, MotionKernel, ThinningEvent};
use crate::config::{poisson_count, Configuration, Particle};
use crate::domain::Domain;
use crate::genealogy::{LineageRecord, LineageTag};
use crate::rng::SimRng;

/// Levels `u ↦ u / (1 − p(x))`; particles reaching λ are removed.
pub fn apply_thinning(config: &mut Configuration, event: &ThinningEvent) -> EventOutcome {
    thinning(config, event, false)
}

pub(crate) fn thinning(config: &mut Configuration, event: &ThinningEvent, mutant: bool) -> EventOutcome {
    let lambda = config.lambda;
    let domain = config.domain;
    let mut out = EventOutcome::default();
    config.particles.retain_mut(|p| {
        let pr = event.p.eval(&p.x, &domain);
        if mutant {
            // Broken control: kill the lowest levels and leave the rest in place.
            if p.u < pr * lambda {
                out.affected.push(p.id);
                return false;
            }
            return true;
        }
        let nu = p.u / (1.0 - pr);
        if nu >= lambda {
            out.affected.push(p.id);
            false
        } else {
            p.u = nu;
            true
        }
    });
    out
}

/// Inserts one immigrant with a uniform level.
pub fn apply_immigration(config: &mut Configuration, source: &ImmigrationSource, rng: &mut SimRng) -> EventOutcome {
    immigration(config, source, rng, false)
}

pub(crate) fn immigration(config: &mut Configuration, source: &ImmigrationSource, rng: &mut SimRng, mutant: bool) -> EventOutcome {
    let x = source.type_law.sample(&config.domain, rng);
    let top = if mutant { config.lambda / 2.0 } else { config.lambda };
    let u = rng.random::<f64>() * top;
    let id = config.insert(x, u);
    EventOutcome {
        affected: vec![id],
        lineage: vec![LineageRecord { time: config.time, child: id, parent: None, child_level: u, parent_level: None, tag: LineageTag::Immigration }],
        tie: false,
    }
}

/// One jump of a jump kernel applied to a single particle.
pub(crate) fn jump(p: &mut Particle, kernel: &MotionKernel, domain: &Domain, rng: &mut SimRng) {
    match kernel {
        MotionKernel::RandomWalk { step, .. } => {
            let axis = rng.random_range(0..domain.dim);
            let dir = if rng.random::<bool>() { 1.0 } else { -1.0 };
            p.x.loc[axis] += dir * step;
            domain.wrap(&mut p.x.loc);
        }
        MotionKernel::AlleleMutation { .. } => {
            let n = domain.n_alleles;
            if n > 1 {
                let mut a = rng.random_range(0..n - 1);
                if a >= p.x.allele {
                    a += 1;
                }
                p.x.allele = a;
            }
        }
        _ => {}
    }
}

/// Moves every particle's type independently over `dt`; levels are untouched.
pub fn apply_motion(config: &mut Configuration, kernel: &MotionKernel, dt: f64, rng: &mut SimRng) {
    let domain = config.domain;
    match kernel {
        MotionKernel::None => {}
        MotionKernel::RandomWalk { .. } | MotionKernel::AlleleMutation { .. } => {
            let rate = kernel.jump_rate(&domain);
            for p in config.particles.iter_mut() {
                for _ in 0..poisson_count(rate * dt, rng) {
                    jump(p, kernel, &domain, rng);
                }
            }
        }
        MotionKernel::Brownian { sigma } => {
            if dt <= 0.0 || *sigma == 0.0 {
                return;
            }
            let n = Normal::new(0.0, sigma * dt.sqrt()).expect("finite σ");
            for p in config.particles.iter_mut() {
                for i in 0..domain.dim {
                    p.x.loc[i] += n.sample(rng);
                }
                domain.wrap(&mut p.x.loc);
            }
        }
    }
}
