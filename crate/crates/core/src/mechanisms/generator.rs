//! Generator values `Af(η)` for product test functions.
//!
//! Closed forms use the exact level integrals of the ramp family. Discrete
//! birth has no closed form for general kernels and is evaluated by an inner
//! Monte-Carlo average over the event's randomness.

use serde::Serialize;

use super::birth::discrete_birth_k;
use super::death::apply_multiple_death;
use super::flow::g_k;
use super::other::apply_thinning;
use super::{Kernel, Mechanism, MotionKernel, ReplacementVariant};
use crate::config::Configuration;
use crate::domain::TypePoint;
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::testfn::{eval_f, TestFunction};

pub const INNER_MC_DRAWS: usize = 100_000;
const MAX_SUBSETS: u128 = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeneratorValue {
    pub value: f64,
    /// Standard error of the inner Monte-Carlo estimate, if one was used.
    pub std_err: Option<f64>,
    pub method: Method,
}

impl GeneratorValue {
    fn exact(value: f64) -> Self {
        GeneratorValue { value, std_err: None, method: Method::Analytic }
    }
}

/// `∏_{j≠i} g_j` for every `i`, without dividing.
fn products_except(gs: &[f64]) -> Vec<f64> {
    let n = gs.len();
    let mut prefix = vec![1.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] * gs[i];
    }
    let mut out = vec![1.0; n];
    let mut suffix = 1.0;
    for i in (0..n).rev() {
        out[i] = prefix[i] * suffix;
        suffix *= gs[i];
    }
    out
}

fn unsupported<T>(what: &str) -> Result<T> {
    Err(Error::Unsupported(what.to_string()))
}

/// Expected `f` after the members of `subset` are replaced from their lowest-level member.
fn f_replaced(config: &Configuration, gs: &[f64], subset: &[usize], q: &Kernel, g: &TestFunction) -> Result<f64> {
    let d = &config.domain;
    let pi = *subset
        .iter()
        .min_by(|&&a, &&b| {
            let (pa, pb) = (&config.particles[a], &config.particles[b]);
            pa.u.total_cmp(&pb.u).then(pa.id.cmp(&pb.id))
        })
        .unwrap();
    let parent = config.particles[pi].x;
    let mut rest = 1.0;
    for (j, gj) in gs.iter().enumerate() {
        if !subset.contains(&j) {
            rest *= gj;
        }
    }
    let inside = if let Kernel::SwapHalf = q {
        let with_allele = |i: usize, loc_from: usize| {
            let x = TypePoint { loc: config.particles[loc_from].x.loc, allele: parent.allele };
            g.g(&x, config.particles[i].u, d)
        };
        if subset.len() == 2 {
            let (a, b) = (subset[0], subset[1]);
            0.5 * (with_allele(a, a) * with_allele(b, b)) + 0.5 * (with_allele(a, b) * with_allele(b, a))
        } else {
            subset.iter().map(|&i| with_allele(i, i)).product()
        }
    } else {
        let mut prod = 1.0;
        for &i in subset {
            match q.expect_g(&parent, config.particles[i].u, g, d) {
                Some(v) => prod *= v,
                None => return unsupported("kernel expectation depends on location"),
            }
        }
        prod
    };
    Ok(rest * inside)
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) / (i + 1);
        if c > MAX_SUBSETS * 1000 {
            return c;
        }
    }
    c
}

fn for_each_subset(n: usize, k: usize, mut visit: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx)?;
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 && idx[0] == n - k {
                return Ok(());
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// `Af(η)` for one mechanism.
pub fn generator_apply(mechanism: &Mechanism, config: &Configuration, g: &TestFunction) -> Result<GeneratorValue> {
    let d = config.domain;
    let lambda = config.lambda;
    let gs: Vec<f64> = config.particles.iter().map(|p| g.g(&p.x, p.u, &d)).collect();
    let f: f64 = gs.iter().product();
    let except = products_except(&gs);
    match mechanism {
        Mechanism::PureDeath { d0 } => {
            let mut s = 0.0;
            for (i, p) in config.particles.iter().enumerate() {
                let rate = d0.eval(&p.x, &d);
                if rate > 0.0 {
                    s += rate * p.u * g.dg_du(&p.x, p.u, &d)? * except[i];
                }
            }
            Ok(GeneratorValue::exact(s))
        }
        Mechanism::MultipleDeath { events } => {
            let mut s = 0.0;
            for e in events {
                let mut c = config.clone();
                apply_multiple_death(&mut c, e);
                s += e.rate * (eval_f(&c, g) - f);
            }
            Ok(GeneratorValue::exact(s))
        }
        Mechanism::ContinuousBirth { k, r } => {
            if lambda < g.u_g {
                return Err(Error::InvalidParameter("λ below u_g".into()));
            }
            let kf = *k as f64;
            let mut s = 0.0;
            for (i, p) in config.particles.iter().enumerate() {
                let rate = r.eval(&p.x, &d);
                if rate <= 0.0 {
                    continue;
                }
                let room = lambda - p.u;
                let ratio = g.integral_above(&p.x, p.u, lambda, &d) / room;
                let birth = (kf + 1.0) * (room / lambda).powi(*k as i32) * (ratio.powi(*k as i32) - 1.0) * f;
                let drift = g_k(lambda, *k, p.u) * g.dg_du(&p.x, p.u, &d)? * except[i];
                s += rate * (birth + drift);
            }
            Ok(GeneratorValue::exact(s))
        }
        Mechanism::DiscreteBirth { event } => {
            let mut rng = stream(0x5EED, 0);
            let draws = INNER_MC_DRAWS;
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            for _ in 0..draws {
                let mut c = config.clone();
                let k = event.k.sample(&mut rng) as usize;
                discrete_birth_k(&mut c, k, &event.r, &event.q, &mut rng, false);
                let v = eval_f(&c, g) - f;
                sum += v;
                sum2 += v * v;
            }
            let n = draws as f64;
            let mean = sum / n;
            let var = (sum2 / n - mean * mean).max(0.0) * n / (n - 1.0);
            Ok(GeneratorValue { value: event.rate * mean, std_err: Some(event.rate * (var / n).sqrt()), method: Method::MonteCarlo })
        }
        Mechanism::Replacement { event } => {
            let n = config.len();
            match &event.variant {
                ReplacementVariant::FixedK { k, rate } => {
                    let k = *k as usize;
                    if k > n {
                        return Err(Error::InvalidParameter(format!("k = {k} exceeds population {n}")));
                    }
                    let count = binomial(n as u128, k as u128);
                    if count > MAX_SUBSETS {
                        return unsupported("too many k-subsets to enumerate");
                    }
                    let mut acc = 0.0;
                    for_each_subset(n, k, |s| {
                        acc += f_replaced(config, &gs, s, &event.q, g)? - f;
                        Ok(())
                    })?;
                    Ok(GeneratorValue::exact(rate * acc / count as f64))
                }
                ReplacementVariant::Pairwise { pair_rate } => {
                    let mut acc = 0.0;
                    for a in 0..n {
                        for b in a + 1..n {
                            let r = pair_rate.eval(&config.particles[a].x, &config.particles[b].x, &d);
                            if r > 0.0 {
                                acc += r * (f_replaced(config, &gs, &[a, b], &event.q, g)? - f);
                            }
                        }
                    }
                    Ok(GeneratorValue::exact(acc))
                }
                ReplacementVariant::Subsets { subsets } => {
                    let mut acc = 0.0;
                    for (ids, r) in subsets {
                        let idx: Vec<usize> = ids.iter().filter_map(|id| config.index_of(*id)).collect();
                        if !idx.is_empty() {
                            acc += r * (f_replaced(config, &gs, &idx, &event.q, g)? - f);
                        }
                    }
                    Ok(GeneratorValue::exact(acc))
                }
                ReplacementVariant::Bernoulli { r, rate } => {
                    if matches!(event.q, Kernel::SwapHalf) {
                        return unsupported("swap kernel with Bernoulli selection");
                    }
                    let mut order: Vec<usize> = (0..n).collect();
                    order.sort_by(|&a, &b| {
                        let (pa, pb) = (&config.particles[a], &config.particles[b]);
                        pa.u.total_cmp(&pb.u).then(pa.id.cmp(&pb.id))
                    });
                    let rs: Vec<f64> = config.particles.iter().map(|p| r.eval(&p.x, &d)).collect();
                    // S empty: nothing happens.
                    let mut h = rs.iter().map(|r| 1.0 - r).product::<f64>() * f;
                    let mut below = 1.0;
                    for (pos, &pi) in order.iter().enumerate() {
                        let parent = config.particles[pi].x;
                        let ghat = |u: f64| q_expect(&event.q, &parent, u, g, &d);
                        let mut term = rs[pi] * ghat(config.particles[pi].u)? * below;
                        for &j in &order[pos + 1..] {
                            term *= (1.0 - rs[j]) * gs[j] + rs[j] * ghat(config.particles[j].u)?;
                        }
                        h += term;
                        below *= (1.0 - rs[pi]) * gs[pi];
                    }
                    Ok(GeneratorValue::exact(rate * (h - f)))
                }
            }
        }
        Mechanism::Thinning { event } => {
            let mut c = config.clone();
            apply_thinning(&mut c, event);
            Ok(GeneratorValue::exact(event.rate * (eval_f(&c, g) - f)))
        }
        Mechanism::Immigration { source } => {
            if lambda < g.u_g {
                return Err(Error::InvalidParameter("λ below u_g".into()));
            }
            let Some(atoms) = source.type_law.atoms(!g.depends_on_location()) else {
                return unsupported("immigration law with location-dependent test function");
            };
            let mean_gbar: f64 = atoms.iter().map(|(x, w)| w * g.gbar(x, lambda, &d)).sum();
            Ok(GeneratorValue::exact(source.arrival_rate * f * (mean_gbar - 1.0)))
        }
        Mechanism::Motion { kernel } => {
            let mut s = 0.0;
            for (i, p) in config.particles.iter().enumerate() {
                let bg = match kernel {
                    MotionKernel::None => 0.0,
                    MotionKernel::RandomWalk { rate, step } => {
                        let mut acc = 0.0;
                        for axis in 0..d.dim {
                            for dir in [-1.0, 1.0] {
                                let mut y = p.x;
                                y.loc[axis] += dir * step;
                                d.wrap(&mut y.loc);
                                acc += g.g(&y, p.u, &d) - gs[i];
                            }
                        }
                        rate * acc
                    }
                    MotionKernel::AlleleMutation { rate } => {
                        if d.n_alleles < 2 {
                            0.0
                        } else {
                            let others: f64 = (0..d.n_alleles)
                                .filter(|&a| a != p.x.allele)
                                .map(|a| g.g(&TypePoint { loc: p.x.loc, allele: a }, p.u, &d))
                                .sum();
                            rate * (others / (d.n_alleles - 1) as f64 - gs[i])
                        }
                    }
                    MotionKernel::Brownian { .. } => {
                        if g.depends_on_location() {
                            return unsupported("Brownian generator needs a location-smooth test function");
                        }
                        0.0
                    }
                };
                s += bg * except[i];
            }
            Ok(GeneratorValue::exact(s))
        }
        Mechanism::SlfvReplacement { .. } | Mechanism::SlfvBirthThinning { .. } => {
            unsupported("spatial Λ-Fleming–Viot events (use the component mechanisms)")
        }
    }
}

fn q_expect(q: &Kernel, parent: &TypePoint, u: f64, g: &TestFunction, d: &crate::domain::Domain) -> Result<f64> {
    q.expect_g(parent, u, g, d).ok_or_else(|| Error::Unsupported("kernel expectation depends on location".into()))
}
