//! Classical population models simulated directly as exponential-clock
//! chains on allele counts. Nothing here touches levels or the mechanisms.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::rng::SimRng;

pub trait ClassicalOracle: Sync {
    fn name(&self) -> &str;
    /// Allele counts at each of the (increasing) `times`, starting from `t = 0`.
    fn sample(&self, times: &[f64], rng: &mut SimRng) -> Vec<Vec<usize>>;
}

/// Generic jump chain: `rates(state)` lists `(rate, allele delta)` moves.
fn gillespie(start: Vec<usize>, times: &[f64], rng: &mut SimRng, moves: impl Fn(&[usize], &mut Vec<(f64, Vec<i64>)>)) -> Vec<Vec<usize>> {
    let mut state = start;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    let mut mv = Vec::new();
    for &stop in times {
        loop {
            mv.clear();
            moves(&state, &mut mv);
            let total: f64 = mv.iter().map(|m| m.0).sum();
            if total <= 0.0 {
                break;
            }
            let dt = Exp::new(total).expect("positive rate").sample(rng);
            if t + dt > stop {
                // memoryless: restart the clock at the stop
                break;
            }
            t += dt;
            let mut x = rng.random::<f64>() * total;
            let mut pick = mv.len() - 1;
            for (i, m) in mv.iter().enumerate() {
                if x < m.0 {
                    pick = i;
                    break;
                }
                x -= m.0;
            }
            for (s, d) in state.iter_mut().zip(&mv[pick].1) {
                *s = (*s as i64 + d) as usize;
            }
        }
        t = stop;
        out.push(state.clone());
    }
    out
}

fn unit(n: usize, a: usize, sign: i64) -> Vec<i64> {
    let mut v = vec![0; n];
    v[a] = sign;
    v
}

/// Independent exponential deaths at per-allele rates.
pub struct DeathChain {
    pub counts: Vec<usize>,
    pub rates: Vec<f64>,
}

impl ClassicalOracle for DeathChain {
    fn name(&self) -> &str {
        "death_chain"
    }
    fn sample(&self, times: &[f64], rng: &mut SimRng) -> Vec<Vec<usize>> {
        let k = self.counts.len();
        gillespie(self.counts.clone(), times, rng, |s, mv| {
            for a in 0..k {
                mv.push((s[a] as f64 * self.rates[a], unit(k, a, -1)));
            }
        })
    }
}

/// Moran model: every unordered pair at rate `gamma`, one member (chosen
/// fairly) copies the other.
pub struct MoranChain {
    pub counts: Vec<usize>,
    pub gamma: f64,
}

impl ClassicalOracle for MoranChain {
    fn name(&self) -> &str {
        "moran_chain"
    }
    fn sample(&self, times: &[f64], rng: &mut SimRng) -> Vec<Vec<usize>> {
        let k = self.counts.len();
        gillespie(self.counts.clone(), times, rng, |s, mv| {
            for a in 0..k {
                for b in 0..k {
                    if a != b {
                        // a copies onto b
                        let mut d = vec![0; k];
                        d[a] = 1;
                        d[b] = -1;
                        mv.push((self.gamma * (s[a] * s[b]) as f64 / 2.0, d));
                    }
                }
            }
        })
    }
}

/// Poisson arrivals with a categorical allele.
pub struct ArrivalCounter {
    pub counts: Vec<usize>,
    pub rate: f64,
    pub allele_probs: Vec<f64>,
}

impl ClassicalOracle for ArrivalCounter {
    fn name(&self) -> &str {
        "arrival_counter"
    }
    fn sample(&self, times: &[f64], rng: &mut SimRng) -> Vec<Vec<usize>> {
        let k = self.counts.len();
        gillespie(self.counts.clone(), times, rng, |_, mv| {
            for a in 0..k {
                mv.push((self.rate * self.allele_probs[a], unit(k, a, 1)));
            }
        })
    }
}

/// Single-type branching: `k` offspring at rate `birth`, death at rate `death`.
pub struct BranchingChain {
    pub n0: usize,
    pub birth: f64,
    pub k: u32,
    pub death: f64,
}

impl ClassicalOracle for BranchingChain {
    fn name(&self) -> &str {
        "branching_chain"
    }
    fn sample(&self, times: &[f64], rng: &mut SimRng) -> Vec<Vec<usize>> {
        gillespie(vec![self.n0], times, rng, |s, mv| {
            mv.push((s[0] as f64 * self.birth, vec![self.k as i64]));
            mv.push((s[0] as f64 * self.death, vec![-1]));
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::mean_se;
    use crate::rng::stream;

    #[test]
    fn death_chain_mean() {
        let o = DeathChain { counts: vec![100], rates: vec![1.0] };
        let mut rng = stream(1, 0);
        let xs: Vec<f64> = (0..2000).map(|_| o.sample(&[1.0], &mut rng)[0][0] as f64).collect();
        let (m, se) = mean_se(&xs);
        assert!((m - 100.0 * (-1.0f64).exp()).abs() < 4.0 * se);
    }

    #[test]
    fn moran_conserves_size_and_absorbs() {
        let o = MoranChain { counts: vec![3, 2], gamma: 1.0 };
        let mut rng = stream(2, 0);
        for _ in 0..100 {
            let s = o.sample(&[0.5, 50.0], &mut rng);
            assert_eq!(s[0].iter().sum::<usize>(), 5);
            assert!(s[1].contains(&5));
        }
    }

    #[test]
    fn arrivals_are_poisson() {
        let o = ArrivalCounter { counts: vec![0, 0], rate: 4.0, allele_probs: vec![0.25, 0.75] };
        let mut rng = stream(3, 0);
        let xs: Vec<f64> = (0..4000).map(|_| o.sample(&[1.0], &mut rng)[0][1] as f64).collect();
        let (m, se) = mean_se(&xs);
        assert!((m - 3.0).abs() < 4.0 * se);
    }
}
