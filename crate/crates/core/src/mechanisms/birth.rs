//! Discrete and continuous birth.

use rand::Rng;

use super::{DiscreteBirthEvent, EventOutcome, Kernel};
use crate::config::Configuration;
use crate::domain::RateFn;
use crate::error::Result;
use crate::genealogy::{LineageRecord, LineageTag};
use crate::rng::SimRng;

/// Race time `τ_x` of a particle at level `u` against the minimum new level `v*`:
/// `e^{−r τ} = (λ−u)/(λ−v*)` above `v*`, `u/v*` below.
pub fn race_time(lambda: f64, u: f64, v_star: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return f64::INFINITY;
    }
    let log_ratio = if u > v_star {
        ((v_star - u) / (lambda - v_star)).ln_1p()
    } else if u < v_star {
        ((u - v_star) / v_star).ln_1p()
    } else {
        0.0
    };
    -log_ratio / r
}

/// Level of a non-parent particle after a discrete birth with parent race time `tau`:
/// `λ − (λ−u)e^{r τ}` above `v*`, `u e^{r τ}` below.
pub fn level_transform(lambda: f64, u: f64, v_star: f64, r: f64, tau: f64) -> f64 {
    if r <= 0.0 || tau <= 0.0 {
        return u;
    }
    if u > v_star {
        u - (lambda - u) * (r * tau).exp_m1()
    } else {
        u * (r * tau).exp()
    }
}

/// Discrete birth: the offspring number is drawn from the event's law; a draw
/// of 0 leaves the configuration unchanged.
pub fn apply_discrete_birth(config: &mut Configuration, event: &DiscreteBirthEvent, rng: &mut SimRng) -> Result<EventOutcome> {
    let k = event.k.sample(rng);
    Ok(discrete_birth_k(config, k as usize, &event.r, &event.q, rng, false))
}

pub(crate) fn discrete_birth_k(
    config: &mut Configuration,
    k: usize,
    r: &RateFn,
    q: &Kernel,
    rng: &mut SimRng,
    mutant: bool,
) -> EventOutcome {
    let lambda = config.lambda;
    let domain = config.domain;
    let rates: Vec<f64> = config.particles.iter().map(|p| r.eval(&p.x, &domain)).collect();
    if k == 0 || rates.iter().all(|&x| x <= 0.0) {
        return EventOutcome::default();
    }
    let levels: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * lambda).collect();
    let (v_idx, v_star) = levels
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });

    // Parent: smallest race time, ties to the smallest id.
    let keys: Vec<f64> = config
        .particles
        .iter()
        .zip(&rates)
        .map(|(p, &r)| {
            if r <= 0.0 {
                f64::INFINITY
            } else if mutant {
                p.u
            } else {
                race_time(lambda, p.u, v_star, r)
            }
        })
        .collect();
    let pi = (0..keys.len())
        .filter(|&i| rates[i] > 0.0)
        .min_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(config.particles[a].id.cmp(&config.particles[b].id)))
        .expect("some particle has positive weight");
    let tau = keys[pi];
    let tie = (0..keys.len()).filter(|&i| rates[i] > 0.0 && keys[i] == tau).count() > 1;
    let parent = config.particles.swap_remove(pi);
    if !mutant {
        for p in config.particles.iter_mut() {
            let rp = r.eval(&p.x, &domain);
            if rp > 0.0 {
                let nu = level_transform(lambda, p.u, v_star, rp, tau);
                p.u = if nu >= lambda { lambda.next_down() } else { nu.max(0.0) };
            }
        }
    }
    let types = q.offspring(&parent.x, k, &domain, rng);
    let mut out = EventOutcome { affected: vec![parent.id], lineage: Vec::with_capacity(k), tie };
    let time = config.time;
    for (i, (&v, x)) in levels.iter().zip(types).enumerate() {
        let id = config.insert(x, v);
        out.affected.push(id);
        out.lineage.push(if i == v_idx {
            LineageRecord {
                time,
                child: id,
                parent: Some(parent.id),
                child_level: v,
                parent_level: Some(parent.u),
                tag: LineageTag::Relocation,
            }
        } else {
            LineageRecord {
                time,
                child: id,
                parent: Some(parent.id),
                child_level: v,
                parent_level: Some(v_star),
                tag: LineageTag::Birth,
            }
        });
    }
    out
}

/// Birth rate of a particle at level `u` under continuous birth:
/// `(k+1)(λ−u)^k λ^{−k} r(x)`.
pub fn continuous_birth_rate(lambda: f64, k: u32, r: f64, u: f64) -> f64 {
    (k as f64 + 1.0) * (1.0 - u / lambda).powi(k as i32) * r
}

/// The particle at index `idx` gives birth to `k` offspring of its own type at
/// levels uniform on `(u, λ)`.
pub fn apply_continuous_birth(config: &mut Configuration, idx: usize, k: u32, rng: &mut SimRng) -> EventOutcome {
    let parent = config.particles[idx];
    let lambda = config.lambda;
    let mut out = EventOutcome { affected: vec![parent.id], ..Default::default() };
    for _ in 0..k {
        let v = parent.u + rng.random::<f64>() * (lambda - parent.u);
        let v = if v >= lambda { lambda.next_down() } else { v };
        let id = config.insert(parent.x, v);
        out.affected.push(id);
        out.lineage.push(LineageRecord {
            time: config.time,
            child: id,
            parent: Some(parent.id),
            child_level: v,
            parent_level: Some(parent.u),
            tag: LineageTag::Birth,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Domain, TypePoint};
    use crate::mechanisms::OffspringCount;
    use crate::rng::stream;

    #[test]
    fn parent_frequency_follows_weights() {
        let d = Domain::site(2);
        let base = Configuration::from_pairs(d, 1.0, &[(TypePoint::site(0), 0.3), (TypePoint::site(1), 0.6)]).unwrap();
        let ev = DiscreteBirthEvent {
            rate: 1.0,
            k: OffspringCount::Fixed(1),
            r: RateFn::PerAllele(vec![1.0, 3.0]),
            q: Kernel::CopyParent,
        };
        let mut rng = stream(11, 0);
        let n = 100_000;
        let mut first = 0;
        for _ in 0..n {
            // the weights hold on average over exchangeable levels
            let mut c = base.clone();
            for p in c.particles.iter_mut() {
                p.u = rng.random::<f64>();
            }
            let out = apply_discrete_birth(&mut c, &ev, &mut rng).unwrap();
            if out.affected[0] == 0 {
                first += 1;
            }
        }
        let f = first as f64 / n as f64;
        let se = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((f - 0.25).abs() < 3.0 * se, "{f}");
    }

    #[test]
    fn zero_weight_means_no_parent() {
        let d = Domain::site(1);
        let mut c = Configuration::from_pairs(d, 1.0, &[(TypePoint::site(0), 0.3)]).unwrap();
        let before = c.clone();
        let ev = DiscreteBirthEvent { rate: 1.0, k: OffspringCount::Fixed(2), r: RateFn::Const(0.0), q: Kernel::CopyParent };
        let out = apply_discrete_birth(&mut c, &ev, &mut stream(1, 0)).unwrap();
        assert!(out.is_noop());
        assert_eq!(c, before);
    }

    #[test]
    fn transform_stays_in_range_and_limit() {
        // u > v*, equal weights: h → u − (u* − v*)
        let (u, u_star, v_star, r) = (3.0, 2.0, 1.5, 1.3);
        for &lam in &[1e3, 1e6] {
            let tau = race_time(lam, u_star, v_star, r);
            let h = level_transform(lam, u, v_star, r, tau);
            let lim = u - (u_star - v_star);
            if lam >= 1e6 {
                assert!(((h - lim) / lim).abs() < 1e-2);
            }
            assert!(h >= v_star && h < lam);
        }
    }
}
