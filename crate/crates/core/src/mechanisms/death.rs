//! Multiple-death events.

use super::{EventOutcome, MultipleDeathEvent};
use crate::config::Configuration;

/// `τ = inf{v : #{(x,u) : e^{v d₁(x)} u ≥ λ} ≥ k}`; infinite when fewer than `k`
/// particles have `d₁ > 0`.
pub fn death_time(config: &Configuration, event: &MultipleDeathEvent) -> f64 {
    let mut thresholds = thresholds(config, event);
    let k = event.k as usize;
    if thresholds.len() < k {
        return f64::INFINITY;
    }
    thresholds.sort_by(|a, b| a.0.total_cmp(&b.0));
    thresholds[k - 1].0
}

fn thresholds(config: &Configuration, event: &MultipleDeathEvent) -> Vec<(f64, usize)> {
    config
        .particles
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let d1 = event.d1.eval(&p.x, &config.domain);
            (d1 > 0.0).then(|| ((config.lambda / p.u).ln() / d1, i))
        })
        .collect()
}

/// `θ_{k,d₁}`: scale levels with `d₁ > 0` by `e^{τ d₁}` and drop those reaching λ.
/// Exactly `min(k, #{d₁ > 0})` particles die; the victims are chosen by rank
/// of their thresholds so rounding cannot change the count.
pub fn apply_multiple_death(config: &mut Configuration, event: &MultipleDeathEvent) -> EventOutcome {
    multiple_death(config, event, false)
}

pub(crate) fn multiple_death(config: &mut Configuration, event: &MultipleDeathEvent, mutant: bool) -> EventOutcome {
    let mut th = thresholds(config, event);
    if th.is_empty() {
        return EventOutcome::default();
    }
    let k = (event.k as usize).min(th.len());
    let lambda = config.lambda;
    let domain = config.domain;
    let mut dead = vec![false; config.particles.len()];
    if mutant {
        // Broken control: kill the k lowest levels, leave the rest alone.
        th.sort_by(|a, b| config.particles[a.1].u.total_cmp(&config.particles[b.1].u));
        for &(_, i) in th.iter().take(k) {
            dead[i] = true;
        }
    } else {
        th.sort_by(|a, b| a.0.total_cmp(&b.0).then(config.particles[a.1].id.cmp(&config.particles[b.1].id)));
        let tau = th[k - 1].0;
        for &(_, i) in th.iter().take(k) {
            dead[i] = true;
        }
        if tau.is_finite() {
            for &(_, i) in th.iter().skip(k) {
                let p = &mut config.particles[i];
                let d1 = event.d1.eval(&p.x, &domain);
                let nu = p.u * (tau * d1).exp();
                p.u = if nu >= lambda { lambda.next_down() } else { nu };
            }
        }
    }
    let mut out = EventOutcome::default();
    let mut i = 0;
    config.particles.retain(|p| {
        let keep = !dead[i];
        if !keep {
            out.affected.push(p.id);
        }
        i += 1;
        keep
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Domain, RateFn, TypePoint};

    fn cfg() -> Configuration {
        let x = TypePoint::site(0);
        Configuration::from_pairs(Domain::site(1), 10.0, &[(x, 2.0), (x, 5.0)]).unwrap()
    }

    #[test]
    fn hand_evaluations() {
        let ev = MultipleDeathEvent { rate: 1.0, k: 1, d1: RateFn::Const(1.0) };
        let mut c = cfg();
        assert!((death_time(&c, &ev) - 2f64.ln()).abs() < 1e-15);
        let out = apply_multiple_death(&mut c, &ev);
        assert_eq!(out.affected, vec![1]);
        assert_eq!(c.len(), 1);
        assert!((c.particles[0].u - 4.0).abs() < 1e-14);

        let ev2 = MultipleDeathEvent { k: 2, ..ev.clone() };
        let mut c = cfg();
        assert!((death_time(&c, &ev2) - 5f64.ln()).abs() < 1e-15);
        apply_multiple_death(&mut c, &ev2);
        assert!(c.is_empty());

        let ev0 = MultipleDeathEvent { rate: 1.0, k: 1, d1: RateFn::Const(0.0) };
        let mut c = cfg();
        assert!(death_time(&c, &ev0).is_infinite());
        apply_multiple_death(&mut c, &ev0);
        assert_eq!(c, cfg());
    }
}
