use std::sync::Arc;

use lookdown::poisson_oracle::{
    default_specs, laplace_functional_check, moment_check, pairwise_identity_check, product_identity_check, IdentityReport,
    PoissonMeasureSpec,
};
use lookdown::rng::stream;

const E: f64 = std::f64::consts::E;

fn uniform2() -> PoissonMeasureSpec {
    PoissonMeasureSpec::new("u2", 0.0, 1.0, Arc::new(|_| 2.0))
}

fn check(r: &IdentityReport, closed: f64) {
    assert!((r.analytic - closed).abs() < 1e-8 * closed.abs().max(1.0), "{}: analytic {} vs {closed}", r.identity, r.analytic);
    assert!((r.mc - closed).abs() <= 3.0 * r.std_err + 1e-12, "{}: mc {} ± {} vs {closed}", r.identity, r.mc, r.std_err);
    assert!(r.pass);
}

#[test]
fn laplace_uniform() {
    let r = laplace_functional_check(&uniform2().with_f(|z| -z), 100_000, &mut stream(1, 0)).unwrap();
    check(&r, (-2.0 / E).exp());
}

#[test]
fn laplace_of_zero_is_exact() {
    let r = laplace_functional_check(&uniform2(), 1000, &mut stream(1, 1)).unwrap();
    assert_eq!((r.mc, r.analytic, r.std_err), (1.0, 1.0, 0.0));
    assert!(r.pass);
}

#[test]
fn moments_uniform() {
    let m = moment_check(&uniform2().with_f(|z| z), 100_000, &mut stream(2, 0)).unwrap();
    check(&m[0], 1.0);
    check(&m[1], 2.0 / 3.0);
    let c = moment_check(&uniform2().with_f(|_| 1.0), 100_000, &mut stream(2, 1)).unwrap();
    check(&c[0], 2.0);
    check(&c[1], 2.0);
}

#[test]
fn products_uniform() {
    check(&product_identity_check(&uniform2().with_g(|_| 0.5), 100_000, &mut stream(3, 0)).unwrap(), (-1.0f64).exp());
    check(&product_identity_check(&uniform2().with_g(|z| 1.0 - z / 2.0), 100_000, &mut stream(3, 1)).unwrap(), (-0.5f64).exp());
}

#[test]
fn pairwise_uniform() {
    check(&pairwise_identity_check(&uniform2().with_r(|_, _| 1.0), 100_000, &mut stream(4, 0)).unwrap(), 4.0);
    check(&pairwise_identity_check(&uniform2().with_r(|x, y| x * y), 100_000, &mut stream(4, 1)).unwrap(), 1.0);
}

#[test]
fn narrow_density_has_mass_five() {
    let narrow = default_specs().into_iter().find(|s| s.name == "narrow-mass5").unwrap();
    assert!((narrow.mass().unwrap() - 5.0).abs() < 1e-6);
    for c in [-0.3, 0.2] {
        let s = narrow.clone().with_f(move |_| c);
        check(&laplace_functional_check(&s, 100_000, &mut stream(5, 0)).unwrap(), (5.0 * (c.exp() - 1.0)).exp());
    }
}

#[test]
fn zero_reps_rejected() {
    assert!(laplace_functional_check(&uniform2(), 0, &mut stream(6, 0)).is_err());
}
