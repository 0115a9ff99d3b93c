//! One-for-one replacement with fixed levels.

use rand::seq::index::sample;
use rand::Rng;

use super::{EventOutcome, Kernel, PairRate, ReplacementEvent, ReplacementVariant};
use crate::config::Configuration;
use crate::domain::weighted_index;
use crate::error::{invalid, Result};
use crate::genealogy::{LineageRecord, LineageTag};
use crate::rng::SimRng;

/// Selects `S` per the variant, then replaces it from its lowest-level member.
pub fn apply_replacement(config: &mut Configuration, event: &ReplacementEvent, rng: &mut SimRng) -> Result<EventOutcome> {
    let subset = select_subset(config, &event.variant, rng)?;
    Ok(replace_subset(config, &subset, &event.q, rng, false))
}

pub fn select_subset(config: &Configuration, variant: &ReplacementVariant, rng: &mut SimRng) -> Result<Vec<usize>> {
    let n = config.len();
    let domain = config.domain;
    Ok(match variant {
        ReplacementVariant::FixedK { k, .. } => {
            let k = *k as usize;
            if k > n {
                return invalid(format!("fixed-k replacement with k = {k} exceeds population {n}"));
            }
            sample(rng, n, k).into_vec()
        }
        ReplacementVariant::Bernoulli { r, .. } => (0..n)
            .filter(|&i| rng.random::<f64>() < r.eval(&config.particles[i].x, &domain))
            .collect(),
        ReplacementVariant::Pairwise { pair_rate } => draw_pair(config, pair_rate, rng).map(|(a, b)| vec![a, b]).unwrap_or_default(),
        ReplacementVariant::Subsets { subsets } => {
            if subsets.is_empty() {
                return Ok(Vec::new());
            }
            let w: Vec<f64> = subsets.iter().map(|s| s.1).collect();
            let chosen = &subsets[weighted_index(&w, rng)].0;
            chosen.iter().filter_map(|id| config.index_of(*id)).collect()
        }
    })
}

/// A pair drawn with probability proportional to `r(x, x')`.
pub fn draw_pair(config: &Configuration, rate: &PairRate, rng: &mut SimRng) -> Option<(usize, usize)> {
    let n = config.len();
    if n < 2 || rate.sup() <= 0.0 {
        return None;
    }
    let domain = config.domain;
    let sup = rate.sup();
    for _ in 0..10_000 {
        let (a, b) = uniform_pair(n, rng);
        let r = rate.eval(&config.particles[a].x, &config.particles[b].x, &domain);
        if rng.random::<f64>() * sup < r {
            return Some((a, b));
        }
    }
    // Rejection is slow when few pairs interact: fall back to enumeration.
    let mut pairs = Vec::new();
    let mut w = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let r = rate.eval(&config.particles[a].x, &config.particles[b].x, &domain);
            if r > 0.0 {
                pairs.push((a, b));
                w.push(r);
            }
        }
    }
    (!pairs.is_empty()).then(|| pairs[weighted_index(&w, rng)])
}

pub(crate) fn uniform_pair(n: usize, rng: &mut SimRng) -> (usize, usize) {
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

/// Replaces the members at `subset` (indices) from the lowest-level member.
/// Levels are unchanged; every member, the parent included, gets a type drawn
/// from `q(x*, ·)`.
pub(crate) fn replace_subset(config: &mut Configuration, subset: &[usize], q: &Kernel, rng: &mut SimRng, mutant: bool) -> EventOutcome {
    if subset.is_empty() {
        return EventOutcome::default();
    }
    let domain = config.domain;
    let pi = *subset
        .iter()
        .min_by(|&&a, &&b| {
            let (pa, pb) = (&config.particles[a], &config.particles[b]);
            pa.u.total_cmp(&pb.u).then(pa.id.cmp(&pb.id))
        })
        .unwrap();
    let parent = config.particles[pi];
    let mut out = EventOutcome::default();
    match q {
        Kernel::SwapHalf => {
            for &i in subset {
                config.particles[i].x.allele = parent.x.allele;
            }
            if subset.len() == 2 && rng.random::<bool>() {
                let (a, b) = (subset[0], subset[1]);
                let la = config.particles[a].x.loc;
                config.particles[a].x.loc = config.particles[b].x.loc;
                config.particles[b].x.loc = la;
            }
        }
        _ => {
            let types = q.offspring(&parent.x, subset.len(), &domain, rng);
            for (&i, x) in subset.iter().zip(types) {
                config.particles[i].x = x;
            }
        }
    }
    for &i in subset {
        let p = &mut config.particles[i];
        out.affected.push(p.id);
        if i == pi {
            continue;
        }
        if mutant {
            p.u = parent.u * rng.random::<f64>();
        }
        out.lineage.push(LineageRecord {
            time: config.time,
            child: p.id,
            parent: Some(parent.id),
            child_level: p.u,
            parent_level: Some(parent.u),
            tag: LineageTag::Replacement,
        });
    }
    out
}
