//! Product-form test functions `f(η) = ∏ g(x, u)` and their level averages.
//!
//! `g(x,u) = ∏_t (1 − β_t(x) w_t(u))` with a shared support bound `u_g`.
//! Writing `s = 1 − u/u_g`, each factor is a polynomial in `s` on `[0, u_g)`,
//! so every level integral below is an exact polynomial antiderivative.

use serde::{Deserialize, Serialize};

use crate::config::Configuration;
use crate::domain::{Domain, Intensity, RateFn, TypePoint};
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `w(u) = (1 − u/u_g)₊²`
    QuadraticRamp,
    /// `w(u) = 1{u < u_g}`
    IndicatorRamp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub beta: RateFn,
    pub shape: Shape,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunction {
    pub u_g: f64,
    pub terms: Vec<Term>,
}

impl TestFunction {
    /// `g ≡ 1`.
    pub fn one() -> Self {
        TestFunction { u_g: 1.0, terms: Vec::new() }
    }

    pub fn quadratic(beta: RateFn, u_g: f64) -> Self {
        TestFunction { u_g, terms: vec![Term { beta, shape: Shape::QuadraticRamp }] }
    }

    pub fn indicator(beta: RateFn, u_g: f64) -> Self {
        TestFunction { u_g, terms: vec![Term { beta, shape: Shape::IndicatorRamp }] }
    }

    pub fn with_term(mut self, beta: RateFn, shape: Shape) -> Self {
        self.terms.push(Term { beta, shape });
        self
    }

    pub fn validate(&self, lambda: f64) -> Result<()> {
        if !(self.u_g > 0.0 && self.u_g <= lambda) {
            return invalid(format!("u_g = {} must lie in (0, λ = {lambda}]", self.u_g));
        }
        for t in &self.terms {
            t.beta.validate("beta", Some(1.0))?;
        }
        Ok(())
    }

    pub fn is_smooth(&self) -> bool {
        self.terms.iter().all(|t| t.shape == Shape::QuadraticRamp)
    }

    pub fn depends_on_location(&self) -> bool {
        self.terms.iter().any(|t| t.beta.depends_on_location())
    }

    /// Coefficients of `P(s) = ∏ (1 − β s^{2e})` in ascending powers of `s`.
    fn poly(&self, x: &TypePoint, domain: &Domain) -> Vec<f64> {
        let mut p = vec![1.0];
        for t in &self.terms {
            let b = t.beta.eval(x, domain);
            if b == 0.0 {
                continue;
            }
            let deg = match t.shape {
                Shape::QuadraticRamp => 2,
                Shape::IndicatorRamp => 0,
            };
            let mut q = vec![0.0; p.len() + deg];
            for (i, c) in p.iter().enumerate() {
                q[i] += c;
                q[i + deg] -= b * c;
            }
            p = q;
        }
        p
    }

    pub fn g(&self, x: &TypePoint, u: f64, domain: &Domain) -> f64 {
        if u >= self.u_g {
            return 1.0;
        }
        let s = 1.0 - u / self.u_g;
        let mut v = 1.0;
        for t in &self.terms {
            let w = match t.shape {
                Shape::QuadraticRamp => s * s,
                Shape::IndicatorRamp => 1.0,
            };
            v *= 1.0 - t.beta.eval(x, domain) * w;
        }
        v
    }

    /// `∂_u g(x, u)`; only defined for quadratic ramps.
    pub fn dg_du(&self, x: &TypePoint, u: f64, domain: &Domain) -> Result<f64> {
        if !self.is_smooth() {
            return Err(Error::UnsupportedShape("∂_u g needs quadratic-ramp terms only".into()));
        }
        if u >= self.u_g {
            return Ok(0.0);
        }
        let s = 1.0 - u / self.u_g;
        let factors: Vec<(f64, f64)> = self
            .terms
            .iter()
            .map(|t| {
                let b = t.beta.eval(x, domain);
                (1.0 - b * s * s, 2.0 * b * s / self.u_g)
            })
            .collect();
        let mut total = 0.0;
        for i in 0..factors.len() {
            let mut prod = factors[i].1;
            for (j, f) in factors.iter().enumerate() {
                if j != i {
                    prod *= f.0;
                }
            }
            total += prod;
        }
        Ok(total)
    }

    /// `∫_u^∞ (1 − g(x, v)) dv`.
    pub fn tail(&self, x: &TypePoint, u: f64, domain: &Domain) -> f64 {
        if u >= self.u_g {
            return 0.0;
        }
        let s_hi = 1.0 - u.max(0.0) / self.u_g;
        let p = self.poly(x, domain);
        // ∫_0^{s_hi} (1 − P(s)) ds
        let mut acc = 0.0;
        let mut pow = s_hi;
        for (i, c) in p.iter().enumerate() {
            let coef = if i == 0 { 1.0 - c } else { -c };
            acc += coef * pow / (i as f64 + 1.0);
            pow *= s_hi;
        }
        let below = if u < 0.0 { -u } else { 0.0 };
        self.u_g * acc + below * (1.0 - p.iter().sum::<f64>())
    }

    /// `h(x) = ∫_0^∞ (1 − g(x, u)) du`.
    pub fn h(&self, x: &TypePoint, domain: &Domain) -> f64 {
        self.tail(x, 0.0, domain)
    }

    /// `ḡ(x) = λ⁻¹ ∫_0^λ g(x, u) du`.
    pub fn gbar(&self, x: &TypePoint, lambda: f64, domain: &Domain) -> f64 {
        1.0 - self.h(x, domain) / lambda
    }

    /// `∫_a^λ g(x, v) dv` for `a ≤ λ`, `λ ≥ u_g`.
    pub fn integral_above(&self, x: &TypePoint, a: f64, lambda: f64, domain: &Domain) -> f64 {
        (lambda - a) - self.tail(x, a, domain)
    }
}

/// `f(η) = ∏ g(x, u)`.
pub fn eval_f(config: &Configuration, g: &TestFunction) -> f64 {
    config.particles.iter().map(|p| g.g(&p.x, p.u, &config.domain)).product()
}

/// `ᾱf(η̄) = ∏ ḡ(x)`.
pub fn eval_alpha_f_discrete(types: &[TypePoint], g: &TestFunction, lambda: f64, domain: &Domain) -> Result<f64> {
    if lambda < g.u_g {
        return invalid(format!("λ = {lambda} is below u_g = {}", g.u_g));
    }
    Ok(types.iter().map(|x| g.gbar(x, lambda, domain)).product())
}

/// `αf(Ξ) = exp(−∫ h dΞ)`.
pub fn eval_alpha_f_continuum(intensity: &Intensity, g: &TestFunction, domain: &Domain) -> Result<f64> {
    let integral = match intensity {
        Intensity::Atoms(a) => a.iter().map(|(x, w)| w * g.h(x, domain)).sum::<f64>(),
        Intensity::Uniform { density, allele_weights } => {
            if g.depends_on_location() {
                return Err(Error::Unsupported("∫h dΞ for location-dependent β under a uniform intensity".into()));
            }
            let total: f64 = allele_weights.iter().sum();
            let mean_h: f64 = allele_weights
                .iter()
                .enumerate()
                .map(|(a, w)| w / total * g.h(&TypePoint::site(a as u32), domain))
                .sum();
            density * domain.volume() * mean_h
        }
    };
    Ok((-integral).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::adaptive_simpson;

    fn d() -> Domain {
        Domain::site(3)
    }

    fn family() -> Vec<TestFunction> {
        vec![
            TestFunction::quadratic(RateFn::Const(1.0), 1.0),
            TestFunction::quadratic(RateFn::PerAllele(vec![0.2, 0.9, 0.5]), 2.5),
            TestFunction::indicator(RateFn::Const(0.4), 1.5),
            TestFunction::quadratic(RateFn::Const(0.7), 3.0).with_term(RateFn::PerAllele(vec![0.3, 0.0, 1.0]), Shape::QuadraticRamp),
            TestFunction::indicator(RateFn::Const(0.25), 2.0).with_term(RateFn::Const(0.6), Shape::QuadraticRamp),
        ]
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let dom = d();
        for g in family() {
            for a in 0..3 {
                let x = TypePoint::site(a);
                let num = adaptive_simpson(&|u| 1.0 - g.g(&x, u, &dom), 0.0, g.u_g, 1e-12).unwrap();
                let h = g.h(&x, &dom);
                assert!((num - h).abs() <= 1e-9 * h.abs().max(1e-3), "{num} vs {h}");
                let lam = 4.0;
                let num_gbar = adaptive_simpson(&|u| g.g(&x, u, &dom), 0.0, lam, 1e-12).unwrap() / lam;
                assert!((num_gbar - g.gbar(&x, lam, &dom)).abs() < 1e-9);
                let a0 = 0.37 * g.u_g;
                let num_above = adaptive_simpson(&|u| g.g(&x, u, &dom), a0, lam, 1e-12).unwrap();
                assert!((num_above - g.integral_above(&x, a0, lam, &dom)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_quadratic_term_closed_forms() {
        let dom = d();
        let g = TestFunction::quadratic(RateFn::Const(1.0), 3.0);
        let x = TypePoint::site(0);
        assert!((g.gbar(&x, 3.0, &dom) - 2.0 / 3.0).abs() < 1e-15);
        assert!((g.h(&x, &dom) - 1.0).abs() < 1e-15);
        // ∂_u g = 2β(1 − u/u_g)/u_g
        let u = 1.2;
        assert!((g.dg_du(&x, u, &dom).unwrap() - 2.0 * (1.0 - u / 3.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let dom = d();
        for g in family().into_iter().filter(|g| g.is_smooth()) {
            let x = TypePoint::site(1);
            for &u in &[0.1, 0.5, 0.9] {
                let u = u * g.u_g;
                let e = 1e-6;
                let fd = (g.g(&x, u + e, &dom) - g.g(&x, u - e, &dom)) / (2.0 * e);
                assert!((fd - g.dg_du(&x, u, &dom).unwrap()).abs() < 1e-7);
            }
        }
        assert!(TestFunction::indicator(RateFn::Const(0.5), 1.0).dg_du(&TypePoint::site(0), 0.2, &dom).is_err());
    }

    #[test]
    fn eval_f_trivial_cases() {
        let dom = d();
        let x = TypePoint::site(0);
        let c = Configuration::from_pairs(dom, 2.0, &[(x, 0.0), (x, 1.5)]).unwrap();
        assert_eq!(eval_f(&c, &TestFunction::one()), 1.0);
        let g = TestFunction::quadratic(RateFn::Const(1.0), 1.0);
        assert_eq!(eval_f(&c, &g), 0.0);
        let single = Configuration::from_pairs(dom, 2.0, &[(x, 1.5)]).unwrap();
        assert_eq!(eval_f(&single, &g), 1.0);
    }

    #[test]
    fn alpha_f_continuum_direct() {
        let dom = d();
        let g = TestFunction::quadratic(RateFn::Const(1.0), 1.5); // h = 0.5
        let i = Intensity::Atoms(vec![(TypePoint::site(0), 2.0)]);
        assert!((eval_alpha_f_continuum(&i, &g, &dom).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(eval_alpha_f_discrete(&[TypePoint::site(0)], &g, 1.0, &dom).is_err());
    }
}
