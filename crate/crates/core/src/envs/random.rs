//! Random chains with uniform transition rows, and trajectory-based reward
//! smoothing.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{stationary, StochasticMatrix};
use crate::mdp::{TabularMdp, TransitionSampler};
use crate::rng::SeedStream;

/// Discount used for generated chains.
pub const RANDOM_MDP_GAMMA: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    Uniform,
    None,
}

/// Each row is `n` i.i.d. `U(0,1)` draws normalized to sum to one; rewards
/// are `U(0,1)` or zero. Rows are drawn before rewards.
pub fn random_mdp(n: usize, seed: SeedStream, reward_mode: RewardMode) -> Result<TabularMdp> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("random chain needs n >= 2, got {n}")));
    }
    let mut rng = seed.rng();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let total: f64 = row.iter().sum();
        for (j, x) in row.into_iter().enumerate() {
            m[(i, j)] = x / total;
        }
    }
    let reward = match reward_mode {
        RewardMode::Uniform => (0..n).map(|_| rng.random::<f64>()).collect(),
        RewardMode::None => vec![0.0; n],
    };
    TabularMdp::new(StochasticMatrix::new(m)?, reward, RANDOM_MDP_GAMMA)
}

/// Makes the rewards of `n_smooth` temporally adjacent states similar.
///
/// A trajectory is started from the stationary distribution; the first
/// `n_smooth` distinct states it visits, `s_1 .. s_N` in visit order, are
/// smoothed in sequence: `r(s_k) <- (r(s_k) + r(s_{k+1})) / 2` for
/// `k = 1 .. N-1`.
pub fn smooth_rewards(mdp: &TabularMdp, n_smooth: usize, seed: SeedStream) -> Result<TabularMdp> {
    let n = mdp.n_states();
    if n_smooth > n {
        return Err(Error::InvalidParameter(format!(
            "n_smooth {n_smooth} exceeds state count {n}"
        )));
    }
    if n_smooth < 2 {
        return Ok(mdp.clone());
    }
    let order = first_visits(mdp, n_smooth, seed)?;
    let mut reward = mdp.reward().to_vec();
    for k in 0..n_smooth - 1 {
        let (a, b) = (order[k], order[k + 1]);
        reward[a] = (reward[a] + reward[b]) / 2.0;
    }
    mdp.with_reward(reward)
}

fn first_visits(mdp: &TabularMdp, wanted: usize, seed: SeedStream) -> Result<Vec<usize>> {
    let n = mdp.n_states();
    let mu = stationary(mdp.transition())?;
    let sampler = TransitionSampler::new(mdp.transition());
    let mut rng = seed.rng();
    let budget = 10 * n * wanted;
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(wanted);
    let mut s = TransitionSampler::sample_from(mu.as_slice(), &mut rng);
    let mut steps = 0;
    loop {
        if !seen[s] {
            seen[s] = true;
            order.push(s);
            if order.len() == wanted {
                return Ok(order);
            }
        }
        if steps == budget {
            return Err(Error::TrajectoryTooShort {
                visited: order.len(),
                wanted,
                steps,
            });
        }
        s = sampler.sample(s, &mut rng);
        steps += 1;
    }
}
