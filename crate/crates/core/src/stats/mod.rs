//! Hypothesis-testing harness.
//!
//! Every check produces a [`TestReport`]. Suites bundle the checks by theme;
//! [`run_suite`] is the single entry point used by the command line.

pub mod convergence;
pub mod generator_check;
pub mod genealogy_suite;
pub mod oracles;
pub mod performance;
pub mod projection;
pub mod slfv;
pub mod uniformity;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::two_sided_p;

pub use convergence::lambda_convergence_study;
pub use generator_check::forward_generator_check;
pub use projection::{projection_equivalence, Functional};
pub use uniformity::ks_uniform_levels;

/// Default significance floor for distributional tests.
pub const ALPHA: f64 = 0.001;
/// Two-sided p-value of a 3σ deviation.
pub const THREE_SIGMA_P: f64 = 0.0026997960632601866;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Pass when `statistic >= threshold` (p-values).
    AtLeast,
    /// Pass when `statistic <= threshold` (errors, distances).
    AtMost,
}

impl Rule {
    pub fn holds(self, statistic: f64, threshold: f64) -> bool {
        match self {
            Rule::AtLeast => statistic >= threshold,
            Rule::AtMost => statistic <= threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub threshold: f64,
    pub rule: Rule,
    pub pass: bool,
    pub n_reps: usize,
    pub seed: u64,
    pub detail: String,
}

impl TestReport {
    /// `pass` is derived from the statistic, never set directly. NaN fails.
    pub fn new(name: impl Into<String>, statistic: f64, threshold: f64, rule: Rule) -> Self {
        TestReport {
            name: name.into(),
            statistic,
            p_value: None,
            threshold,
            rule,
            pass: rule.holds(statistic, threshold),
            n_reps: 0,
            seed: 0,
            detail: String::new(),
        }
    }

    /// A p-value report: the statistic is the p-value itself.
    pub fn p_test(name: impl Into<String>, p: f64, alpha: f64) -> Self {
        let mut r = Self::new(name, p, alpha, Rule::AtLeast);
        r.p_value = Some(p);
        r
    }

    pub fn reps(mut self, n: usize, seed: u64) -> Self {
        self.n_reps = n;
        self.seed = seed;
        self
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }

    pub const TSV_HEADER: &'static str = "name\tstatistic\tp_value\tthreshold\trule\tpass\tn_reps\tseed\tdetail";

    pub fn to_tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.name,
            self.statistic,
            self.p_value.map_or("NA".to_string(), |p| p.to_string()),
            self.threshold,
            match self.rule {
                Rule::AtLeast => ">=",
                Rule::AtMost => "<=",
            },
            if self.pass { "pass" } else { "fail" },
            self.n_reps,
            self.seed,
            self.detail.replace(['\t', '\n'], " ")
        )
    }
}

pub fn reports_tsv(reports: &[TestReport]) -> String {
    let mut s = String::from(TestReport::TSV_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&r.to_tsv_row());
        s.push('\n');
    }
    s
}

/// One-sample KS distance of `xs` against a continuous CDF. Sorts `xs`.
pub fn ks_statistic(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Kolmogorov survival function `Q(t) = P{sup|B°| > t}`.
pub fn kolmogorov_q(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 1.0 {
        // Jacobi-transformed series converges fast for small t.
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * t * t);
        let s: f64 = (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / t * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * t * t).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Asymptotic KS p-value with Stephens' small-sample correction.
pub fn kolmogorov_p(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
}

/// KS test of `xs` against `cdf`; returns `(D, p)`.
pub fn ks_test(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let d = ks_statistic(xs, cdf);
    (d, kolmogorov_p(d, xs.len()))
}

/// Two-sample z-test for equal means, from `(mean, se)` pairs.
pub fn z_two_sample(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let se = (a.1 * a.1 + b.1 * b.1).sqrt();
    if se == 0.0 {
        return if a.0 == b.0 { (0.0, 1.0) } else { (f64::INFINITY, 0.0) };
    }
    let z = (a.0 - b.0) / se;
    (z, two_sided_p(z))
}

/// One-sample z-score of an estimate against a known value.
pub fn z_score(est: (f64, f64), target: f64) -> f64 {
    if est.1 == 0.0 {
        return if est.0 == target { 0.0 } else { f64::INFINITY };
    }
    (est.0 - target) / est.1
}

/// Bonferroni: the smallest p-value times the number of tests, capped at 1.
pub fn bonferroni_min(ps: &[f64]) -> f64 {
    (ps.iter().cloned().fold(f64::INFINITY, f64::min) * ps.len() as f64).min(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Overrides every suite's default replicate count.
    pub reps: Option<usize>,
    pub workers: Option<usize>,
    /// Run the deliberately broken mechanisms; suites are then expected to fail.
    pub mutant: bool,
    pub alpha: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { seed: 20_240_601, reps: None, workers: None, mutant: false, alpha: ALPHA }
    }
}

impl SuiteOptions {
    pub fn reps_or(&self, default: usize) -> usize {
        self.reps.unwrap_or(default).max(1)
    }
}

pub const SUITES: &[&str] =
    &["poisson-identities", "uniformity", "projection", "generator", "lambda-convergence", "genealogy", "slfv", "performance", "all"];

/// Runs a named suite. `all` runs every other suite in order.
pub fn run_suite(name: &str, opts: &SuiteOptions) -> Result<Vec<TestReport>> {
    match name {
        "poisson-identities" => poisson_identities_suite(opts),
        "uniformity" => uniformity::suite(opts),
        "projection" => projection::suite(opts),
        "generator" => generator_check::suite(opts),
        "lambda-convergence" => convergence::suite(opts),
        "genealogy" => genealogy_suite::suite(opts),
        "slfv" => slfv::suite(opts),
        "performance" => performance::suite(opts),
        "all" => {
            let mut v = Vec::new();
            for s in SUITES.iter().filter(|&&s| s != "all") {
                v.extend(run_suite(s, opts)?);
            }
            Ok(v)
        }
        other => Err(Error::InvalidParameter(format!("unknown suite {other:?}; expected one of {}", SUITES.join(", ")))),
    }
}

/// Laplace functional, first two moments, product and pairwise identities
/// for the three reference measures.
pub fn poisson_identities_suite(opts: &SuiteOptions) -> Result<Vec<TestReport>> {
    use crate::poisson_oracle::{all_checks, default_specs};
    let n = opts.reps_or(100_000);
    let mut out = Vec::new();
    for (i, spec) in default_specs().iter().enumerate() {
        let mut rng = crate::rng::stream(opts.seed, 100 + i as u64);
        for r in all_checks(spec, n, &mut rng)? {
            let z = z_score((r.mc, r.std_err), r.analytic).abs();
            out.push(
                TestReport::new(format!("poisson/{}/{}", r.spec, r.identity), z, 3.0, Rule::AtMost)
                    .reps(n, opts.seed)
                    .detail(format!("mc={} analytic={} se={}", r.mc, r.analytic, r.std_err)),
            );
        }
    }
    Ok(out)
}
