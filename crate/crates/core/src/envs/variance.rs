//! A three-state ring whose first state pays a noisy reward.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::markov::StochasticMatrix;
use crate::mdp::TabularMdp;

/// Ring `S1 -> S2 -> S3 -> S1` with mean rewards and per-state reward noise.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceMdp {
    pub forward: f64,
    pub mean_reward: [f64; 3],
    pub noise_var: [f64; 3],
    pub gamma: f64,
}

impl Default for VarianceMdp {
    fn default() -> Self {
        VarianceMdp {
            forward: 0.9,
            mean_reward: [1.0, 1.0, 1.0],
            noise_var: [4.0, 0.0, 0.0],
            gamma: 0.9,
        }
    }
}

impl VarianceMdp {
    /// The mean-reward chain: move forward with probability `forward`, else
    /// stay.
    pub fn mdp(&self) -> Result<TabularMdp> {
        let f = self.forward;
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidParameter(format!("forward probability {f} outside [0, 1]")));
        }
        if self.noise_var.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("noise variances must be nonnegative".into()));
        }
        let m = StochasticMatrix::from_rows(&[
            vec![1.0 - f, f, 0.0],
            vec![0.0, 1.0 - f, f],
            vec![f, 0.0, 1.0 - f],
        ])?;
        TabularMdp::new(m, self.mean_reward.to_vec(), self.gamma)
    }

    /// One noisy reward observed in state `s`.
    pub fn sample_reward<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.mean_reward[s] + self.noise_var[s].sqrt() * z
    }
}

/// The default ring and its per-state reward-noise variances.
pub fn three_state_variance_mdp() -> (TabularMdp, Vec<f64>) {
    let cfg = VarianceMdp::default();
    let mdp = cfg.mdp().expect("default variance ring is valid");
    (mdp, cfg.noise_var.to_vec())
}
