//! Exp3 adversarial bandit.

use rand_chacha::ChaCha8Rng;

use crate::error::{GabeError, Result};
use crate::scalar::{real, Real};

use super::ExpertAlgorithm;

/// Exponential-weights bandit with an exploration mix.
#[derive(Debug, Clone)]
pub struct Exp3<R> {
    weights: Vec<R>,
    gamma: R,
    last_probs: Vec<R>,
}

impl<R: Real> Exp3<R> {
    pub fn new(arms: usize, gamma: R) -> Self {
        assert!(arms >= 1);
        assert!(gamma > R::zero() && gamma <= R::one());
        Exp3 {
            weights: vec![R::one(); arms],
            gamma,
            last_probs: Vec::new(),
        }
    }

    /// Theory-guided exploration rate for a known horizon.
    pub fn horizon_gamma(arms: usize, horizon: u64) -> R {
        let k = arms as f64;
        let g = (k * k.ln() / ((std::f64::consts::E - 1.0) * horizon as f64)).sqrt();
        real(g.clamp(1e-4, 1.0))
    }

    /// Selection distribution: `(1-γ)·w/Σw + γ/K`.
    pub fn probabilities(&self) -> Vec<R> {
        let k = real::<R>(self.weights.len() as f64);
        let total: R = self.weights.iter().copied().sum();
        self.weights
            .iter()
            .map(|&w| (R::one() - self.gamma) * w / total + self.gamma / k)
            .collect()
    }

    /// Importance-weighted exponential update for the pulled arm, where
    /// `p_pulled` is the probability the arm was drawn with.
    pub fn update_with_prob(&mut self, pulled: usize, x: R, p_pulled: R) -> Result<()> {
        if !(R::zero()..=R::one()).contains(&x) {
            return Err(GabeError::Config(format!(
                "bandit payoff {x} outside [0,1]; normalizer bug"
            )));
        }
        let k = real::<R>(self.weights.len() as f64);
        let estimate = x / p_pulled;
        self.weights[pulled] = self.weights[pulled] * (self.gamma * estimate / k).exp();
        // Overflow guard: rescale by the max once weights grow huge.
        let guard = R::max_value().powf(real(0.25));
        let max = self
            .weights
            .iter()
            .copied()
            .fold(R::zero(), |a, b| if b > a { b } else { a });
        if max > guard {
            for w in &mut self.weights {
                *w = *w / max;
            }
        }
        Ok(())
    }

    pub fn weights(&self) -> &[R] {
        &self.weights
    }
}

impl<R: Real> ExpertAlgorithm<R> for Exp3<R> {
    fn name(&self) -> String {
        format!("exp3(gamma={})", self.gamma)
    }

    fn arm_count(&self) -> usize {
        self.weights.len()
    }

    fn select(&mut self, _round: usize, rng: &mut ChaCha8Rng) -> usize {
        let probs = self.probabilities();
        let arm = crate::experts::sample_mixed(&probs, rng);
        self.last_probs = probs;
        arm
    }

    fn update(&mut self, arm: usize, payoff01: R) -> Result<()> {
        let p = if self.last_probs.is_empty() {
            R::one() / real(self.weights.len() as f64)
        } else {
            self.last_probs[arm]
        };
        self.update_with_prob(arm, payoff01, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn equal_weights_are_uniform() {
        for gamma in [0.05, 0.3, 1.0] {
            let e = Exp3::<f64>::new(4, gamma);
            for p in e.probabilities() {
                assert!((p - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_exploration_ignores_weights() {
        let mut e = Exp3::<f64>::new(3, 1.0);
        e.update_with_prob(0, 1.0, 0.5).unwrap();
        for p in e.probabilities() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn skewed_weights_normalize() {
        let mut e = Exp3::<f64>::new(3, 1e-9);
        e.weights = vec![2.0, 1.0, 1.0];
        let p = e.probabilities();
        assert!((p[0] - 0.5).abs() < 1e-6);
        assert!((p[1] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn zero_payoff_leaves_weights() {
        let mut e = Exp3::<f64>::new(2, 0.1);
        e.update_with_prob(0, 0.0, 0.5).unwrap();
        assert_eq!(e.weights(), &[1.0, 1.0]);
    }

    #[test]
    fn unit_payoff_multiplies_weight() {
        let mut e = Exp3::<f64>::new(2, 0.1);
        e.update_with_prob(0, 1.0, 0.5).unwrap();
        assert!((e.weights()[0] - (0.1f64).exp()).abs() < 1e-12);
        assert_eq!(e.weights()[1], 1.0);
    }

    #[test]
    fn out_of_range_payoff_is_rejected() {
        let mut e = Exp3::<f64>::new(2, 0.1);
        assert!(e.update_with_prob(0, 1.5, 0.5).is_err());
    }

    #[test]
    fn probabilities_keep_the_exploration_floor() {
        let mut e = Exp3::<f64>::new(5, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t in 0..2_000 {
            let arm = e.select(t, &mut rng);
            let x = if arm == 2 { 1.0 } else { 0.0 };
            e.update(arm, x).unwrap();
            for p in e.probabilities() {
                assert!(p >= 0.1 / 5.0 - 1e-12);
            }
        }
    }

    #[test]
    fn weights_survive_long_greedy_streaks() {
        // The overflow guard must keep weights finite.
        let mut e = Exp3::<f32>::new(2, 0.5);
        for _ in 0..10_000 {
            e.update_with_prob(0, 1.0, 0.5).unwrap();
        }
        assert!(e.weights()[0].is_finite());
    }

    #[test]
    fn bernoulli_bandit_finds_the_good_arm() {
        // Small version of the sanity benchmark; the full one is an
        // acceptance criterion.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let means = [0.2, 0.8, 0.2];
        let horizon = 20_000u64;
        let mut e = Exp3::<f64>::new(3, Exp3::<f64>::horizon_gamma(3, horizon));
        let mut total = 0.0;
        for t in 0..horizon {
            let arm = e.select(t as usize, &mut rng);
            let x = if rng.gen::<f64>() < means[arm] { 1.0 } else { 0.0 };
            total += x;
            e.update(arm, x).unwrap();
        }
        assert!(total / horizon as f64 > 0.7);
    }
}
