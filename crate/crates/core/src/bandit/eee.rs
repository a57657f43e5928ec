//! Explore-exploit-in-phases bandit.
//!
//! Pulls happen in phases committed to one arm. A new phase explores a
//! uniform arm with probability `1/√(phases started)` and otherwise exploits
//! the best empirical mean; phase length grows by one with every phase
//! started on the same arm.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{GabeError, Result};
use crate::scalar::{real, Real};

use super::ExpertAlgorithm;

#[derive(Debug, Clone)]
pub struct Eee<R> {
    means: Vec<R>,
    pulls: Vec<u64>,
    phases_per_arm: Vec<u64>,
    phases_total: u64,
    /// Active phase: arm and selections still owed to it.
    current: Option<(usize, u64)>,
    /// Fixed exploration probability override (mainly for tests).
    exploration_override: Option<R>,
}

impl<R: Real> Eee<R> {
    pub fn new(arms: usize) -> Self {
        assert!(arms >= 1);
        Eee {
            means: vec![R::zero(); arms],
            pulls: vec![0; arms],
            phases_per_arm: vec![0; arms],
            phases_total: 0,
            current: None,
            exploration_override: None,
        }
    }

    pub fn with_exploration(mut self, p: R) -> Self {
        self.exploration_override = Some(p);
        self
    }

    fn exploration_probability(&self) -> R {
        match self.exploration_override {
            Some(p) => p,
            None => R::one() / real::<R>((self.phases_total.max(1) as f64).sqrt()),
        }
    }

    fn best_mean_arm(&self) -> usize {
        let mut best = 0;
        for i in 1..self.means.len() {
            if self.means[i] > self.means[best] {
                best = i;
            }
        }
        best
    }

    pub fn means(&self) -> &[R] {
        &self.means
    }
}

impl<R: Real> ExpertAlgorithm<R> for Eee<R> {
    fn name(&self) -> String {
        "eee".into()
    }

    fn arm_count(&self) -> usize {
        self.means.len()
    }

    fn select(&mut self, _round: usize, rng: &mut ChaCha8Rng) -> usize {
        if let Some((arm, remaining)) = self.current {
            if remaining > 0 {
                self.current = Some((arm, remaining - 1));
                return arm;
            }
        }
        let explore = rng.gen::<f64>() < self.exploration_probability().to_f64_lossy();
        let arm = if explore {
            rng.gen_range(0..self.means.len())
        } else {
            self.best_mean_arm()
        };
        self.phases_per_arm[arm] += 1;
        self.phases_total += 1;
        let length = self.phases_per_arm[arm];
        self.current = Some((arm, length - 1));
        arm
    }

    fn update(&mut self, arm: usize, payoff01: R) -> Result<()> {
        if !(R::zero()..=R::one()).contains(&payoff01) {
            return Err(GabeError::Config(format!(
                "bandit payoff {payoff01} outside [0,1]; normalizer bug"
            )));
        }
        self.pulls[arm] += 1;
        let n = real::<R>(self.pulls[arm] as f64);
        self.means[arm] = self.means[arm] + (payoff01 - self.means[arm]) / n;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn first_call_explores_uniformly() {
        // With no phases started, the exploration probability is one.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut seen = [false; 4];
        for _ in 0..200 {
            let mut e = Eee::<f64>::new(4);
            seen[e.select(0, &mut rng)] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn zero_exploration_exploits_best_mean() {
        let mut e = Eee::<f64>::new(3).with_exploration(0.0);
        e.update(0, 0.2).unwrap();
        e.update(1, 0.9).unwrap();
        e.update(2, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(e.select(0, &mut rng), 1);
    }

    #[test]
    fn phases_lengthen_per_arm() {
        let mut e = Eee::<f64>::new(2).with_exploration(0.0);
        e.update(1, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // First phase on arm 1: one selection. Second: two. Third: three.
        let picks: Vec<usize> = (0..6).map(|t| e.select(t, &mut rng)).collect();
        assert_eq!(picks, vec![1; 6]);
        assert_eq!(e.phases_per_arm[1], 3);
    }

    #[test]
    fn deterministic_gap_concentrates_pulls() {
        let mut e = Eee::<f64>::new(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pulls_best = 0u32;
        let rounds = 10_000;
        for t in 0..rounds {
            let arm = e.select(t, &mut rng);
            if arm == 1 {
                pulls_best += 1;
            }
            e.update(arm, if arm == 1 { 1.0 } else { 0.0 }).unwrap();
        }
        assert!(
            pulls_best as f64 / rounds as f64 >= 0.9,
            "best-arm share {}",
            pulls_best as f64 / rounds as f64
        );
    }
}
