//! Large-λ limits of the continuous-birth drift and the discrete-birth level map.

use serde::Serialize;

use super::{Rule, SuiteOptions, TestReport};
use crate::engine::SnapshotSchedule;
use crate::error::Result;
use crate::mechanisms::{g_k, level_transform, race_time, MotionKernel};
use crate::models::{preset_moran, MoranParams};
use crate::numeric::ols_slope;

pub const LAMBDAS: [f64; 4] = [10.0, 20.0, 40.0, 80.0];

/// Deviation of a λ-dependent functional from its limit on a λ grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub name: String,
    pub lambdas: Vec<f64>,
    pub deviations: Vec<f64>,
    /// `−d log|dev| / d log λ`.
    pub order: f64,
}

/// Fits the convergence order of `|value(λ) − limit|` over `lambdas`.
pub fn lambda_convergence_study(name: &str, lambdas: &[f64], value: impl Fn(f64) -> f64, limit: f64) -> ConvergenceStudy {
    let deviations: Vec<f64> = lambdas.iter().map(|&l| (value(l) - limit).abs()).collect();
    let lx: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let ly: Vec<f64> = deviations.iter().map(|d| d.ln()).collect();
    ConvergenceStudy { name: name.into(), lambdas: lambdas.to_vec(), deviations, order: -ols_slope(&lx, &ly) }
}

/// `G_k^λ(u) → −ku`.
pub fn drift_study(k: u32, u: f64, lambdas: &[f64]) -> ConvergenceStudy {
    lambda_convergence_study("G_k", lambdas, |l| g_k(l, k, u), -(k as f64) * u)
}

/// Level of a non-parent particle at `u` after a discrete birth with parent at
/// `u_star` and lowest new level `v_star`, against `u − (u*−v*) r/r*`.
pub fn level_map_study(u: f64, u_star: f64, v_star: f64, r: f64, r_star: f64, lambdas: &[f64]) -> ConvergenceStudy {
    let h = |l: f64| level_transform(l, u, v_star, r, race_time(l, u_star, v_star, r_star));
    lambda_convergence_study("h_r", lambdas, h, u - (u_star - v_star) * r / r_star)
}

fn order_report(s: &ConvergenceStudy, min_order: f64) -> TestReport {
    TestReport::new(format!("lambda/{}_order", s.name), s.order, min_order, Rule::AtLeast)
        .detail(format!("lambda {:?} deviation {:?}", s.lambdas, s.deviations))
}

pub fn suite(opts: &SuiteOptions) -> Result<Vec<TestReport>> {
    let mut out = Vec::new();
    let g = drift_study(2, 1.0, &LAMBDAS);
    out.push(order_report(&g, 0.9));
    // Taylor remainder bound k(k+1)u²/(2λ), up to a 10% allowance for the next term
    let worst = g.lambdas.iter().zip(&g.deviations).map(|(l, d)| d / (3.0 / l)).fold(0.0, f64::max);
    out.push(TestReport::new("lambda/G_k_remainder_bound", worst, 1.1, Rule::AtMost).detail(format!("max |G+ku| / (k(k+1)u²/2λ) = {worst:.4}")));
    // each doubling at least halves the deviation, up to rounding of the ratio
    let halving = g.deviations.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    out.push(TestReport::new("lambda/G_k_halving", halving, 0.55, Rule::AtMost));
    out.push(order_report(&level_map_study(3.0, 2.0, 1.0, 1.5, 1.0, &LAMBDAS), 0.9));
    // population size under pure replacement does not depend on λ
    let mut counts = Vec::new();
    for &l in &LAMBDAS {
        let mut s = preset_moran(&MoranParams { n: 20, gamma: 1.0, n_alleles: 2, sites: None, motion: MotionKernel::None })?;
        s.lambda = l;
        s.snapshots = SnapshotSchedule::Every(0.25);
        s.seed = opts.seed;
        s.mutant = opts.mutant;
        let t = crate::engine::run(&s)?;
        counts.extend(t.snapshots.iter().map(|c| c.len()));
    }
    let spread = counts.iter().max().unwrap_or(&0) - counts.iter().min().unwrap_or(&0);
    out.push(TestReport::new("lambda/replacement_count_invariant", spread as f64, 0.0, Rule::AtMost).reps(1, opts.seed));
    Ok(out)
}
