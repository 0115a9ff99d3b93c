//! Deterministic level flows between events.
//!
//! Pure death drives `u̇ = d₀(x) u`; continuous birth drives `u̇ = r(x) G_k^λ(u)`.
//! Alone, each has a closed-form solution. When several act on the same
//! particle the combined scalar ODE is integrated with an adaptive
//! Dormand–Prince 5(4) scheme at near machine precision.

use crate::config::{Configuration, Particle};
use crate::domain::{Domain, RateFn};
use crate::numeric::adaptive_simpson;

/// `G_k^λ(u) = λ^{−k}(λ−u)^{k+1} − (λ−u)`, evaluated without cancellation.
pub fn g_k(lambda: f64, k: u32, u: f64) -> f64 {
    let v = lambda - u;
    v * (k as f64 * (-u / lambda).ln_1p()).exp_m1()
}

/// Closed-form solution of `u̇ = r G_k^λ(u)` after time `t`.
///
/// With `v = λ − u`, `v^{−k}` solves a linear equation:
/// `v(t) = [λ^{−k} + (v₀^{−k} − λ^{−k}) e^{−k r t}]^{−1/k}`.
pub fn cb_level(lambda: f64, k: u32, r: f64, u0: f64, t: f64) -> f64 {
    let kf = k as f64;
    let c = (-kf * (-u0 / lambda).ln_1p()).exp_m1();
    -lambda * (-(c * (-kf * r * t).exp()).ln_1p() / kf).exp_m1()
}

/// Time for `u̇ = d₀ u` to carry `u` up to `λ`.
pub fn pure_death_hitting_time(lambda: f64, d0: f64, u: f64) -> f64 {
    if d0 <= 0.0 {
        return f64::INFINITY;
    }
    (lambda / u).ln() / d0
}

/// The level flow of a whole model: summed death rates plus birth drifts.
#[derive(Clone, Debug, Default)]
pub struct LevelFlow {
    pub deaths: Vec<RateFn>,
    pub births: Vec<(u32, RateFn)>,
    /// Broken variant used as an adversarial control: additive rather than
    /// proportional level drift under pure death.
    pub additive_death: bool,
    /// Broken variant: continuous-birth drift switched off.
    pub no_birth_drift: bool,
}

/// A particle removed by the flow, with the exact time its level reached λ.
#[derive(Clone, Copy, Debug)]
pub struct FlowDeath {
    pub time: f64,
    pub particle: Particle,
}

impl LevelFlow {
    pub fn is_trivial(&self) -> bool {
        self.deaths.is_empty() && (self.births.is_empty() || self.no_birth_drift)
    }

    /// Brings one particle's level from its own clock `level_time` up to `to`.
    /// Returns the absolute time its level reached λ, if it did.
    pub fn update(&self, p: &mut Particle, lambda: f64, domain: &Domain, to: f64) -> Option<f64> {
        let dt = to - p.level_time;
        if dt <= 0.0 || self.is_trivial() {
            p.level_time = p.level_time.max(to);
            return None;
        }
        let a: f64 = self.deaths.iter().map(|d| d.eval(&p.x, domain)).sum();
        let mut births = Vec::new();
        if !self.no_birth_drift {
            for (k, r) in &self.births {
                let rv = r.eval(&p.x, domain);
                if rv > 0.0 {
                    births.push((*k, rv));
                }
            }
        }
        let step = if self.additive_death {
            additive_step(lambda, a, &births, p.u, dt)
        } else {
            flow_step(lambda, a, &births, p.u, dt)
        };
        match step {
            Step::Alive(u) => {
                p.u = u;
                p.level_time = to;
                None
            }
            Step::Dead(at) => Some(p.level_time + at),
        }
    }

    /// Advances all levels to `config.time + dt`, removing particles whose
    /// level reaches λ. Returned deaths are sorted by time and stamped in
    /// absolute time. Does not move the clock.
    pub fn advance(&self, config: &mut Configuration, dt: f64) -> Vec<FlowDeath> {
        let to = config.time + dt.max(0.0);
        let mut deaths = Vec::new();
        if self.is_trivial() {
            return deaths;
        }
        let lambda = config.lambda;
        let domain = config.domain;
        config.particles.retain_mut(|p| match self.update(p, lambda, &domain, to) {
            None => true,
            Some(time) => {
                deaths.push(FlowDeath { time, particle: *p });
                false
            }
        });
        deaths.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.particle.id.cmp(&b.particle.id)));
        deaths
    }
}

enum Step {
    Alive(f64),
    Dead(f64),
}

fn below(lambda: f64, u: f64) -> f64 {
    if u >= lambda {
        lambda.next_down()
    } else {
        u
    }
}

fn flow_step(lambda: f64, a: f64, births: &[(u32, f64)], u: f64, dt: f64) -> Step {
    match (a > 0.0, births.len()) {
        (false, 0) => Step::Alive(u),
        (true, 0) => {
            let hit = pure_death_hitting_time(lambda, a, u);
            if hit <= dt {
                Step::Dead(hit)
            } else {
                Step::Alive(below(lambda, u * (a * dt).exp()))
            }
        }
        (false, 1) => Step::Alive(cb_level(lambda, births[0].0, births[0].1, u, dt)),
        _ => numeric_step(lambda, a, births, u, dt),
    }
}

fn additive_step(lambda: f64, a: f64, births: &[(u32, f64)], u: f64, dt: f64) -> Step {
    if births.is_empty() && a > 0.0 {
        let speed = a * lambda / 2.0;
        let hit = (lambda - u) / speed;
        if hit <= dt {
            Step::Dead(hit)
        } else {
            Step::Alive(below(lambda, u + speed * dt))
        }
    } else {
        flow_step(lambda, a, births, u, dt)
    }
}

fn rhs(lambda: f64, a: f64, births: &[(u32, f64)], u: f64) -> f64 {
    let mut s = a * u;
    for &(k, r) in births {
        s += r * g_k(lambda, k, u);
    }
    s
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B4: [f64; 7] = [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

fn numeric_step(lambda: f64, a: f64, births: &[(u32, f64)], u0: f64, dt: f64) -> Step {
    let f = |u: f64| rhs(lambda, a, births, u);
    let tol = 1e-13 * lambda;
    let mut t = 0.0;
    let mut u = u0;
    let mut h = dt;
    let mut k = [0.0; 7];
    while t < dt {
        if t + h > dt {
            h = dt - t;
        }
        k[0] = f(u);
        for i in 1..7 {
            let mut ui = u;
            for j in 0..i {
                ui += h * A[i][j] * k[j];
            }
            k[i] = f(ui.clamp(0.0, lambda));
        }
        let u5 = u + h * (0..6).map(|j| A[6][j] * k[j]).sum::<f64>();
        let u4 = u + h * (0..7).map(|j| B4[j] * k[j]).sum::<f64>();
        let err = (u5 - u4).abs();
        if err <= tol || h < 1e-14 * dt.max(1e-300) {
            if u5 >= lambda {
                // Time left to reach λ from the accepted start of this step.
                let rest = adaptive_simpson(&|v| 1.0 / f(v), u, lambda, 1e-12 * (1.0 + dt)).unwrap_or(h);
                return Step::Dead((t + rest).min(t + h));
            }
            t += h;
            u = u5.max(0.0);
            let grow = if err == 0.0 { 5.0 } else { (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0) };
            h *= grow;
        } else {
            h *= (0.9 * (tol / err).powf(0.2)).clamp(0.1, 0.9);
        }
    }
    Step::Alive(below(lambda, u))
}

/// `flow_levels_pure_death`: levels `u ↦ u e^{d₀(x) dt}`, removing those reaching λ.
pub fn flow_levels_pure_death(config: &mut Configuration, d0: &RateFn, dt: f64) -> Vec<FlowDeath> {
    let flow = LevelFlow { deaths: vec![d0.clone()], ..Default::default() };
    let d = flow.advance(config, dt);
    config.time += dt.max(0.0);
    d
}

/// `continuous_birth_flow`: levels follow `u̇ = r(x) G_k^λ(u)` for `dt`.
pub fn continuous_birth_flow(config: &mut Configuration, k: u32, r: &RateFn, dt: f64) {
    let flow = LevelFlow { births: vec![(k, r.clone())], ..Default::default() };
    flow.advance(config, dt);
    config.time += dt.max(0.0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Domain, TypePoint};

    #[test]
    fn g_k_values() {
        assert_eq!(g_k(4.0, 1, 0.0), 0.0);
        assert_eq!(g_k(4.0, 1, 4.0), 0.0);
        assert!((g_k(4.0, 1, 2.0) + 1.0).abs() < 1e-15);
        let direct = |l: f64, k: i32, u: f64| (l - u).powi(k + 1) / l.powi(k) - (l - u);
        for &u in &[0.3, 1.7, 3.9] {
            assert!((g_k(4.0, 3, u) - direct(4.0, 3, u)).abs() < 1e-12);
        }
    }

    fn rk4(lambda: f64, k: u32, r: f64, u0: f64, t: f64) -> f64 {
        let f = |u: f64| r * g_k(lambda, k, u);
        let h = 1e-4;
        let n = (t / h).round() as usize;
        let mut u = u0;
        for _ in 0..n {
            let k1 = f(u);
            let k2 = f(u + 0.5 * h * k1);
            let k3 = f(u + 0.5 * h * k2);
            let k4 = f(u + h * k3);
            u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        u
    }

    #[test]
    fn cb_closed_form_matches_rk4() {
        for &(lam, k, r, u0) in &[(4.0, 1, 1.0, 2.0), (10.0, 2, 0.7, 9.5), (3.0, 3, 2.0, 0.1)] {
            for &t in &[0.25, 0.5, 1.0] {
                let a = cb_level(lam, k, r, u0, t);
                let b = rk4(lam, k, r, u0, t);
                assert!((a - b).abs() < 1e-6, "{a} {b}");
            }
            assert_eq!(cb_level(lam, k, r, 0.0, 1.0), 0.0);
        }
    }

    #[test]
    fn pure_death_exact() {
        let d = Domain::site(1);
        let x = TypePoint::site(0);
        let mut c = Configuration::from_pairs(d, 10.0, &[(x, 1.0)]).unwrap();
        flow_levels_pure_death(&mut c, &RateFn::Const(1.0), std::f64::consts::LN_2);
        assert!((c.particles[0].u - 2.0).abs() < 1e-14);
        let t0: f64 = 0.7;
        let mut c = Configuration::from_pairs(d, 10.0, &[(x, 10.0 * (-t0).exp())]).unwrap();
        let deaths = flow_levels_pure_death(&mut c, &RateFn::Const(1.0), 1.0);
        assert_eq!(deaths.len(), 1);
        assert!((deaths[0].time - t0).abs() < 1e-14);
        let mut c = Configuration::from_pairs(d, 10.0, &[(x, 3.0)]).unwrap();
        flow_levels_pure_death(&mut c, &RateFn::Const(0.0), 5.0);
        assert_eq!(c.particles[0].u, 3.0);
    }

    #[test]
    fn combined_flow_matches_fine_rk4_and_semigroup() {
        let lambda = 5.0;
        let births = [(2u32, 0.5)];
        let a = 1.0;
        let u0 = 1.3;
        let Step::Alive(one) = numeric_step(lambda, a, &births, u0, 0.4) else { panic!() };
        let Step::Alive(half) = numeric_step(lambda, a, &births, u0, 0.2) else { panic!() };
        let Step::Alive(two) = numeric_step(lambda, a, &births, half, 0.2) else { panic!() };
        assert!((one - two).abs() < 1e-11);
        let f = |u: f64| rhs(lambda, a, &births, u);
        let mut u = u0;
        let h = 1e-5;
        for _ in 0..40_000 {
            let k1 = f(u);
            let k2 = f(u + 0.5 * h * k1);
            let k3 = f(u + 0.5 * h * k2);
            let k4 = f(u + h * k3);
            u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!((one - u).abs() < 1e-10);
    }

    #[test]
    fn combined_flow_hits_lambda_at_the_integral_time() {
        let lambda = 2.0;
        let births = [(1u32, 1.0)];
        // with d0 = r k and k = 1 the combined drift is r u²/λ: u(t) = u0 / (1 − r u0 t / λ)
        let u0 = 1.0;
        let hit = lambda / u0 - 1.0; // u reaches λ when 1 − t/2 = 1/2
        match numeric_step(lambda, 1.0, &births, u0, 2.0) {
            Step::Dead(t) => assert!((t - hit).abs() < 1e-9, "{t}"),
            Step::Alive(u) => panic!("alive at {u}"),
        }
        let Step::Alive(u) = numeric_step(lambda, 1.0, &births, u0, 0.5) else { panic!() };
        assert!((u - u0 / (1.0 - u0 * 0.5 / lambda)).abs() < 1e-11);
    }
}
