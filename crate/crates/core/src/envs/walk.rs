//! A random walk on `[0, 1]` observed through Gaussian noise.
//!
//! `x' = clip(x + a, 0, 1)` with `a ~ N(0, action_std^2)`, reward `x'`, and
//! observation `x' + eps` with `eps ~ N(0, sigma2)`. The observation never
//! feeds back into the dynamics.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyWalkConfig {
    pub action_std: f64,
    pub sigma2: f64,
    pub gamma: f64,
    pub episode_len: usize,
}

impl Default for NoisyWalkConfig {
    fn default() -> Self {
        NoisyWalkConfig {
            action_std: 0.05,
            sigma2: 0.0,
            gamma: 0.95,
            episode_len: 1000,
        }
    }
}

impl NoisyWalkConfig {
    pub fn with_sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = sigma2;
        self
    }

    pub fn with_action_variance(mut self, var: f64) -> Self {
        self.action_std = var.sqrt();
        self
    }

    pub fn action_variance(&self) -> f64 {
        self.action_std * self.action_std
    }

    pub fn observation_std(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.action_std >= 0.0 && self.action_std.is_finite()) {
            return Err(Error::InvalidParameter(format!("action std {} must be nonnegative", self.action_std)));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 {} must be nonnegative", self.sigma2)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        Ok(())
    }
}

/// True position of the walker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyWalk {
    pub x: f64,
}

impl NoisyWalk {
    pub fn new(x: f64) -> Self {
        NoisyWalk { x: x.clamp(0.0, 1.0) }
    }

    /// Returns `(next, observation, reward)`. Always draws two normals, the
    /// action and then the observation noise, so runs that differ only in
    /// `sigma2` share their trajectories.
    pub fn step<R: Rng + ?Sized>(&self, cfg: &NoisyWalkConfig, rng: &mut R) -> (NoisyWalk, f64, f64) {
        let a: f64 = rng.sample(StandardNormal);
        let eps: f64 = rng.sample(StandardNormal);
        let next = NoisyWalk::new(self.x + cfg.action_std * a);
        (next, next.x + cfg.observation_std() * eps, next.x)
    }
}

pub fn noisy_walk_step<R: Rng + ?Sized>(state: NoisyWalk, cfg: &NoisyWalkConfig, rng: &mut R) -> (NoisyWalk, f64, f64) {
    state.step(cfg, rng)
}

/// Monte Carlo estimate of the best single-parameter linear value `theta*`.
///
/// Discounted returns are averaged over `rollouts` walks from each of
/// `positions` evenly spaced starts, then `v(x) = theta x` is fit by least
/// squares through the origin. Rollouts stop once the remaining discounted
/// reward is below `1e-8`.
pub fn theta_star(cfg: &NoisyWalkConfig, positions: usize, rollouts: usize, seed: SeedStream) -> Result<f64> {
    cfg.validate()?;
    if positions == 0 || rollouts == 0 {
        return Err(Error::InvalidParameter("theta_star needs positions and rollouts".into()));
    }
    let horizon = ((1e-8 * (1.0 - cfg.gamma)).ln() / cfg.gamma.ln()).ceil() as usize;
    let deterministic = NoisyWalkConfig { sigma2: 0.0, ..*cfg };
    let fits: Vec<(f64, f64)> = (0..positions)
        .into_par_iter()
        .map(|i| {
            let x0 = (i as f64 + 0.5) / positions as f64;
            let mut rng = seed.child(i as u64).rng();
            let mut total = 0.0;
            for _ in 0..rollouts {
                let (mut w, mut discount, mut ret) = (NoisyWalk::new(x0), 1.0, 0.0);
                for _ in 0..horizon {
                    let (next, _, r) = w.step(&deterministic, &mut rng);
                    ret += discount * r;
                    discount *= cfg.gamma;
                    w = next;
                }
                total += ret;
            }
            let g = total / rollouts as f64;
            (x0 * g, x0 * x0)
        })
        .collect();
    let (xg, xx) = fits.iter().fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    Ok(xg / xx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_observation_is_the_position() {
        let cfg = NoisyWalkConfig::default();
        let mut rng = SeedStream::new(1).rng();
        let mut w = NoisyWalk::new(0.5);
        for _ in 0..1000 {
            let (next, obs, r) = w.step(&cfg, &mut rng);
            assert_eq!(obs, next.x);
            assert_eq!(r, next.x);
            assert!((0.0..=1.0).contains(&next.x));
            w = next;
        }
    }

    #[test]
    fn clipping_holds_at_the_boundary() {
        let cfg = NoisyWalkConfig {
            action_std: 100.0,
            ..NoisyWalkConfig::default()
        };
        let mut rng = SeedStream::new(2).rng();
        for _ in 0..100 {
            let (next, _, _) = NoisyWalk::new(1.0).step(&cfg, &mut rng);
            assert!(next.x == 0.0 || next.x == 1.0);
        }
    }

    #[test]
    fn observation_noise_moments() {
        let cfg = NoisyWalkConfig {
            action_std: 0.0,
            sigma2: 0.04,
            ..NoisyWalkConfig::default()
        };
        let mut rng = SeedStream::new(3).rng();
        let w = NoisyWalk::new(0.3);
        let xs: Vec<f64> = (0..10_000).map(|_| w.step(&cfg, &mut rng).1).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((mean - 0.3).abs() < 0.01, "mean {mean}");
        assert!((var - 0.04).abs() < 0.04 * 0.15, "variance {var}");
    }

    #[test]
    fn theta_star_sits_near_the_interior_closed_form() {
        // Away from the walls E[x_t] = x_0, so v(x) = x / (1 - gamma) = 20 x.
        // Clipping pulls the fit slightly below that.
        let cfg = NoisyWalkConfig::default();
        let theta = theta_star(&cfg, 40, 200, SeedStream::new(5)).unwrap();
        assert!(theta > 18.0 && theta < 20.5, "theta* {theta}");
    }
}
