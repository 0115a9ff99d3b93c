//! Monte-Carlo checks of Poisson random measure identities on an interval.
//!
//! ξ is Poisson with mean measure `ν(dz) = density(z) dz` on `[a, b]`. Each
//! check compares a sample mean over `n_reps` draws of ξ with the right-hand
//! side evaluated by adaptive quadrature.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::config::poisson_count;
use crate::error::{invalid, Error, Result};
use crate::numeric::{adaptive_simpson, adaptive_simpson_2d};
use crate::rng::SimRng;

pub type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

const GRID: usize = 1 << 14;
const QUAD_TOL: f64 = 1e-9;

#[derive(Clone)]
pub struct PoissonMeasureSpec {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub density: Fn1,
    pub f: Fn1,
    pub g: Fn1,
    pub r: Fn2,
}

impl fmt::Debug for PoissonMeasureSpec {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(fm, "PoissonMeasureSpec({} on [{}, {}])", self.name, self.a, self.b)
    }
}

impl PoissonMeasureSpec {
    pub fn new(name: &str, a: f64, b: f64, density: Fn1) -> Self {
        PoissonMeasureSpec {
            name: name.to_string(),
            a,
            b,
            density,
            f: Arc::new(|_| 0.0),
            g: Arc::new(|_| 1.0),
            r: Arc::new(|_, _| 0.0),
        }
    }

    pub fn with_f(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.f = Arc::new(f);
        self
    }

    pub fn with_g(mut self, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.g = Arc::new(g);
        self
    }

    pub fn with_r(mut self, r: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.r = Arc::new(r);
        self
    }

    /// `∫ φ dν` by quadrature.
    pub fn integrate(&self, phi: impl Fn(f64) -> f64) -> Result<f64> {
        let d = &self.density;
        adaptive_simpson(&|z| phi(z) * d(z), self.a, self.b, QUAD_TOL)
    }

    pub fn mass(&self) -> Result<f64> {
        self.integrate(|_| 1.0)
    }

    pub fn sampler(&self) -> Result<PoissonSampler> {
        if !(self.b > self.a) {
            return invalid("interval must have b > a");
        }
        let mass = self.mass()?;
        if !(mass.is_finite() && mass >= 0.0) {
            return invalid(format!("mean measure has invalid mass {mass}"));
        }
        let h = (self.b - self.a) / GRID as f64;
        let mut cdf = Vec::with_capacity(GRID + 1);
        cdf.push(0.0);
        let mut prev = (self.density)(self.a).max(0.0);
        let mut acc = 0.0;
        for i in 1..=GRID {
            let cur = (self.density)(self.a + h * i as f64).max(0.0);
            acc += 0.5 * h * (prev + cur);
            cdf.push(acc);
            prev = cur;
        }
        Ok(PoissonSampler { a: self.a, h, cdf, mass })
    }
}

/// Count ~ Poisson(ν mass), points from the normalized density by inverse CDF
/// on a fixed grid with linear interpolation.
pub struct PoissonSampler {
    a: f64,
    h: f64,
    cdf: Vec<f64>,
    pub mass: f64,
}

impl PoissonSampler {
    pub fn draw(&self, rng: &mut SimRng, out: &mut Vec<f64>) {
        out.clear();
        let n = poisson_count(self.mass, rng);
        let total = *self.cdf.last().unwrap();
        for _ in 0..n {
            let t = rng.random::<f64>() * total;
            let i = self.cdf.partition_point(|&c| c <= t).clamp(1, self.cdf.len() - 1);
            let (lo, hi) = (self.cdf[i - 1], self.cdf[i]);
            let frac = if hi > lo { (t - lo) / (hi - lo) } else { 0.5 };
            out.push(self.a + self.h * ((i - 1) as f64 + frac));
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub identity: String,
    pub spec: String,
    pub mc: f64,
    pub analytic: f64,
    pub std_err: f64,
    pub pass: bool,
}

impl IdentityReport {
    fn new(identity: &str, spec: &str, samples: &[f64], analytic: f64) -> Self {
        let (mc, se) = crate::numeric::mean_se(samples);
        Self::from_parts(identity, spec, mc, analytic, se)
    }

    fn from_parts(identity: &str, spec: &str, mc: f64, analytic: f64, std_err: f64) -> Self {
        let pass = (mc - analytic).abs() <= 3.0 * std_err + 1e-12 * (1.0 + analytic.abs());
        IdentityReport { identity: identity.into(), spec: spec.into(), mc, analytic, std_err, pass }
    }

    pub fn tsv_header() -> &'static str {
        "identity\tspec\tmc\tanalytic\tstd_err\tpass"
    }

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.identity,
            self.spec,
            self.mc,
            self.analytic,
            self.std_err,
            if self.pass { "pass" } else { "fail" }
        )
    }
}

fn draws(spec: &PoissonMeasureSpec, n_reps: usize, rng: &mut SimRng, mut stat: impl FnMut(&[f64]) -> f64) -> Result<Vec<f64>> {
    if n_reps == 0 {
        return invalid("n_reps must be positive");
    }
    let s = spec.sampler()?;
    let mut pts = Vec::new();
    Ok((0..n_reps)
        .map(|_| {
            s.draw(rng, &mut pts);
            stat(&pts)
        })
        .collect())
}

/// `E exp(∫ f dξ) = exp(∫ (e^f − 1) dν)`.
pub fn laplace_functional_check(spec: &PoissonMeasureSpec, n_reps: usize, rng: &mut SimRng) -> Result<IdentityReport> {
    let f = spec.f.clone();
    let analytic = spec.integrate(|z| f(z).exp() - 1.0)?.exp();
    if !analytic.is_finite() {
        return Err(Error::Quadrature("divergent Laplace functional".into()));
    }
    let xs = draws(spec, n_reps, rng, |p| p.iter().map(|&z| f(z)).sum::<f64>().exp())?;
    Ok(IdentityReport::new("laplace", &spec.name, &xs, analytic))
}

/// Mean `∫ f dν` and variance `∫ f² dν` of `∫ f dξ`.
pub fn moment_check(spec: &PoissonMeasureSpec, n_reps: usize, rng: &mut SimRng) -> Result<Vec<IdentityReport>> {
    let f = spec.f.clone();
    let mean = spec.integrate(|z| f(z))?;
    let var = spec.integrate(|z| f(z) * f(z))?;
    let xs = draws(spec, n_reps, rng, |p| p.iter().map(|&z| f(z)).sum::<f64>())?;
    let (v, vse) = crate::numeric::variance_se(&xs);
    Ok(vec![
        IdentityReport::new("moment_mean", &spec.name, &xs, mean),
        IdentityReport::from_parts("moment_variance", &spec.name, v, var, vse),
    ])
}

/// `E ∏ g(Z_i) = exp(∫ (g − 1) dν)`.
pub fn product_identity_check(spec: &PoissonMeasureSpec, n_reps: usize, rng: &mut SimRng) -> Result<IdentityReport> {
    let g = spec.g.clone();
    let analytic = spec.integrate(|z| g(z) - 1.0)?.exp();
    let xs = draws(spec, n_reps, rng, |p| p.iter().map(|&z| g(z)).product())?;
    Ok(IdentityReport::new("product", &spec.name, &xs, analytic))
}

/// `E Σ_{i≠j} r(Z_i, Z_j) ∏_{k≠i,j} g(Z_k) = ∫∫ r dν dν · exp(∫ (g − 1) dν)`.
pub fn pairwise_identity_check(spec: &PoissonMeasureSpec, n_reps: usize, rng: &mut SimRng) -> Result<IdentityReport> {
    let (g, r, d) = (spec.g.clone(), spec.r.clone(), spec.density.clone());
    let rr = adaptive_simpson_2d(&|x, y| r(x, y) * d(x) * d(y), spec.a, spec.b, QUAD_TOL)?;
    let analytic = rr * spec.integrate(|z| g(z) - 1.0)?.exp();
    let xs = draws(spec, n_reps, rng, |p| {
        let gs: Vec<f64> = p.iter().map(|&z| g(z)).collect();
        let mut s = 0.0;
        for i in 0..p.len() {
            for j in 0..p.len() {
                if i == j {
                    continue;
                }
                let mut prod = r(p[i], p[j]);
                for (k, gk) in gs.iter().enumerate() {
                    if k != i && k != j {
                        prod *= gk;
                    }
                }
                s += prod;
            }
        }
        s
    })?;
    Ok(IdentityReport::new("pairwise", &spec.name, &xs, analytic))
}

/// All identity checks for one spec.
pub fn all_checks(spec: &PoissonMeasureSpec, n_reps: usize, rng: &mut SimRng) -> Result<Vec<IdentityReport>> {
    let mut v = vec![laplace_functional_check(spec, n_reps, rng)?];
    v.extend(moment_check(spec, n_reps, rng)?);
    v.push(product_identity_check(spec, n_reps, rng)?);
    v.push(pairwise_identity_check(spec, n_reps, rng)?);
    Ok(v)
}

/// The three reference specs used by the verification suite.
pub fn default_specs() -> Vec<PoissonMeasureSpec> {
    let sd = 0.02;
    let norm = 5.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
    vec![
        PoissonMeasureSpec::new("uniform-mass2", 0.0, 1.0, Arc::new(|_| 2.0))
            .with_f(|z| -z)
            .with_g(|z| 1.0 - z / 2.0)
            .with_r(|x, y| x * y),
        PoissonMeasureSpec::new("narrow-mass5", 0.0, 1.0, Arc::new(move |z| norm * (-(z - 0.5).powi(2) / (2.0 * sd * sd)).exp()))
            .with_f(|_| -0.3)
            .with_g(|z| 0.5 + 0.4 * z)
            .with_r(|_, _| 1.0),
        PoissonMeasureSpec::new("linear-mass3", 0.0, 2.0, Arc::new(|z| 1.5 * z))
            .with_f(|z| z.sin() - 0.5)
            .with_g(|z| (-z / 3.0).exp())
            .with_r(|x, y| (-(x - y).abs()).exp()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn unif2() -> PoissonMeasureSpec {
        PoissonMeasureSpec::new("u2", 0.0, 1.0, Arc::new(|_| 2.0))
    }

    #[test]
    fn zero_integrand_is_exact() {
        let mut rng = stream(1, 0);
        let r = laplace_functional_check(&unif2(), 1000, &mut rng).unwrap();
        assert_eq!(r.mc, 1.0);
        assert_eq!(r.analytic, 1.0);
        assert!(r.pass);
        let m = moment_check(&unif2(), 1000, &mut rng).unwrap();
        assert!(m.iter().all(|r| r.pass && r.mc == 0.0));
        let p = pairwise_identity_check(&unif2(), 1000, &mut rng).unwrap();
        assert_eq!((p.mc, p.analytic), (0.0, 0.0));
    }

    #[test]
    fn analytic_sides() {
        let mut rng = stream(2, 0);
        let s = unif2().with_f(|z| z);
        let m = moment_check(&s, 20_000, &mut rng).unwrap();
        assert!((m[0].analytic - 1.0).abs() < 1e-12);
        assert!((m[1].analytic - 2.0 / 3.0).abs() < 1e-12);
        let s = unif2().with_g(|z| 1.0 - z / 2.0);
        let p = product_identity_check(&s, 20_000, &mut rng).unwrap();
        assert!((p.analytic - (-0.5f64).exp()).abs() < 1e-12);
        let s = unif2().with_g(|_| 0.5);
        let p = product_identity_check(&s, 20_000, &mut rng).unwrap();
        assert!((p.analytic - (-1.0f64).exp()).abs() < 1e-12);
        let s = unif2().with_r(|x, y| x * y);
        let p = pairwise_identity_check(&s, 20_000, &mut rng).unwrap();
        assert!((p.analytic - 1.0).abs() < 1e-9);
        let s = unif2().with_f(|z| -z);
        let l = laplace_functional_check(&s, 20_000, &mut rng).unwrap();
        let expected = (2.0 * ((1.0 - (-1.0f64).exp()) - 1.0)).exp();
        assert!((l.analytic - expected).abs() < 1e-12);
    }

    #[test]
    fn factorial_moment() {
        let mut rng = stream(3, 0);
        let s = PoissonMeasureSpec::new("m3", 0.0, 1.0, Arc::new(|_| 3.0)).with_r(|_, _| 1.0);
        let p = pairwise_identity_check(&s, 50_000, &mut rng).unwrap();
        assert!((p.analytic - 9.0).abs() < 1e-9);
        assert!(p.pass, "{p:?}");
    }

    #[test]
    fn deterministic_given_seed() {
        let s = &default_specs()[2];
        let a = all_checks(s, 2000, &mut stream(5, 0)).unwrap();
        let b = all_checks(s, 2000, &mut stream(5, 0)).unwrap();
        assert_eq!(a.iter().map(|r| r.mc).collect::<Vec<_>>(), b.iter().map(|r| r.mc).collect::<Vec<_>>());
    }
}
