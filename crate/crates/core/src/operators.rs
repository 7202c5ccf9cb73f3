//! Temporally regularized Bellman operators.
//!
//! The regularized operator bootstraps on a mixture of the forward chain `P`
//! and a backward-looking term built from the reversal chain `P~`:
//!
//! ```text
//! previous state:         T v = r + gamma ((1 - beta) P v + beta P~ v)
//! exponential smoothing:  T v = r + gamma ((1 - beta) P v
//!                                          + beta (1 - lambda) sum_{i>=1} lambda^(i-1) P~^i v)
//! ```
//!
//! Both are `v -> r + gamma M v` for a row-stochastic `M` (see
//! [`effective_matrix`]), so each is a `gamma`-contraction in the sup norm
//! with a unique fixed point. The smoothing series is evaluated in closed
//! form through the resolvent: `(1 - lambda) P~ (I - lambda P~)^-1`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{check_dim, check_unit, mix, reversal, stationary, StationaryDistribution, StochasticMatrix};
use crate::mdp::{bellman_apply, solve_discounted, TabularMdp, ValueFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    None,
    PreviousState,
    ExponentialSmoothing,
}

impl RegularizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RegularizerKind::None => "none",
            RegularizerKind::PreviousState => "previous_state",
            RegularizerKind::ExponentialSmoothing => "exp_smoothing",
        }
    }
}

impl fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegularizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RegularizerKind::None),
            "previous_state" | "previous-state" | "prev" => Ok(RegularizerKind::PreviousState),
            "exp_smoothing" | "exp-smoothing" | "exponential_smoothing" => {
                Ok(RegularizerKind::ExponentialSmoothing)
            }
            other => Err(Error::InvalidParameter(format!("unknown regularizer {other:?}"))),
        }
    }
}

/// Regularizer kind and parameters. `beta_decay` is a per-step decrement of
/// `beta` used by the online learners only; exact solves ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerSpec {
    pub kind: RegularizerKind,
    pub beta: f64,
    pub lambda: f64,
    pub beta_decay: f64,
}

impl Default for RegularizerSpec {
    fn default() -> Self {
        RegularizerSpec::none()
    }
}

impl RegularizerSpec {
    pub fn none() -> Self {
        RegularizerSpec {
            kind: RegularizerKind::None,
            beta: 0.0,
            lambda: 0.0,
            beta_decay: 0.0,
        }
    }

    pub fn previous_state(beta: f64) -> Result<Self> {
        RegularizerSpec {
            kind: RegularizerKind::PreviousState,
            beta,
            lambda: 0.0,
            beta_decay: 0.0,
        }
        .validated()
    }

    pub fn exponential_smoothing(beta: f64, lambda: f64) -> Result<Self> {
        RegularizerSpec {
            kind: RegularizerKind::ExponentialSmoothing,
            beta,
            lambda,
            beta_decay: 0.0,
        }
        .validated()
    }

    pub fn with_decay(mut self, beta_decay: f64) -> Result<Self> {
        self.beta_decay = beta_decay;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        check_unit(self.beta, "beta")?;
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::InvalidParameter(format!(
                "lambda = {} outside [0, 1)",
                self.lambda
            )));
        }
        if !(self.beta_decay >= 0.0 && self.beta_decay.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta_decay = {} must be a nonnegative number",
                self.beta_decay
            )));
        }
        Ok(self)
    }

    /// `beta`, or zero for [`RegularizerKind::None`].
    pub fn effective_beta(&self) -> f64 {
        match self.kind {
            RegularizerKind::None => 0.0,
            _ => self.beta,
        }
    }

    /// `lambda`, or zero unless smoothing.
    pub fn effective_lambda(&self) -> f64 {
        match self.kind {
            RegularizerKind::ExponentialSmoothing => self.lambda,
            _ => 0.0,
        }
    }

    /// `max(0, beta - decay * step)`.
    pub fn beta_at(&self, step: usize) -> f64 {
        (self.effective_beta() - self.beta_decay * step as f64).max(0.0)
    }

    /// Weights over the bootstrap terms `v(s_{t+1}), v(s_{t-1}), v(s_{t-2}), ...`
    /// truncated to `n` terms. The last term absorbs the geometric tail, which
    /// is the weight an online learner puts on the first state of the episode.
    pub fn term_weights(&self, n: usize) -> Vec<f64> {
        if n == 0 {
            return Vec::new();
        }
        let beta = self.effective_beta();
        let lambda = self.effective_lambda();
        let mut w = Vec::with_capacity(n);
        w.push(1.0 - beta);
        if n == 1 {
            w[0] = 1.0;
            return w;
        }
        let mut tail = beta;
        for _ in 1..n - 1 {
            let wi = tail * (1.0 - lambda);
            w.push(wi);
            tail *= lambda;
        }
        w.push(tail);
        w
    }
}

/// `(1 - lambda) P~ (I - lambda P~)^-1`: the backward smoothing kernel.
fn smoothing_kernel(p_rev: &StochasticMatrix, lambda: f64) -> Result<DMatrix<f64>> {
    let n = p_rev.n();
    let resolvent = (DMatrix::<f64>::identity(n, n) - p_rev.as_matrix() * lambda)
        .try_inverse()
        .ok_or(Error::SingularSystem)?;
    Ok(p_rev.as_matrix() * resolvent * (1.0 - lambda))
}

/// The single stochastic `M` with `T v = r + gamma M v`.
pub fn effective_matrix(
    p: &StochasticMatrix,
    p_rev: &StochasticMatrix,
    spec: &RegularizerSpec,
) -> Result<StochasticMatrix> {
    check_dim(p.n(), p_rev.n())?;
    let spec = spec.validated()?;
    match spec.kind {
        RegularizerKind::None => Ok(p.clone()),
        RegularizerKind::PreviousState => mix(p, p_rev, spec.beta),
        RegularizerKind::ExponentialSmoothing => {
            if spec.beta == 0.0 {
                return Ok(p.clone());
            }
            let kernel = smoothing_kernel(p_rev, spec.lambda)?;
            StochasticMatrix::new(p.as_matrix() * (1.0 - spec.beta) + kernel * spec.beta)
        }
    }
}

/// One application of the regularized operator.
///
/// The smoothing term is computed by solving `(I - lambda P~) w = v` rather
/// than through [`effective_matrix`], so the two routes can be checked against
/// each other.
pub fn regularized_apply(
    mdp: &TabularMdp,
    p_rev: &StochasticMatrix,
    spec: &RegularizerSpec,
    v: &ValueFunction,
) -> Result<ValueFunction> {
    let n = mdp.n_states();
    check_dim(n, p_rev.n())?;
    check_dim(n, v.len())?;
    let spec = spec.validated()?;
    let beta = spec.effective_beta();
    if beta == 0.0 {
        return bellman_apply(mdp, v);
    }
    let forward = mdp.transition().apply(v.as_slice())?;
    let backward = match spec.kind {
        RegularizerKind::ExponentialSmoothing if spec.lambda > 0.0 => {
            let a = DMatrix::<f64>::identity(n, n) - p_rev.as_matrix() * spec.lambda;
            let w = a
                .lu()
                .solve(&DVector::from_column_slice(v.as_slice()))
                .ok_or(Error::SingularSystem)?;
            p_rev
                .apply(w.as_slice())?
                .into_iter()
                .map(|x| x * (1.0 - spec.lambda))
                .collect()
        }
        _ => p_rev.apply(v.as_slice())?,
    };
    let gamma = mdp.gamma();
    ValueFunction::new(
        mdp.reward()
            .iter()
            .zip(forward.iter().zip(&backward))
            .map(|(r, (f, b))| r + gamma * ((1.0 - beta) * f + beta * b))
            .collect(),
    )
}

/// Fixed point of the regularized operator by direct solve of
/// `(I - gamma M) v = r`.
pub fn regularized_solve(
    mdp: &TabularMdp,
    p_rev: &StochasticMatrix,
    spec: &RegularizerSpec,
) -> Result<ValueFunction> {
    let m = effective_matrix(mdp.transition(), p_rev, spec)?;
    solve_discounted(m.as_matrix(), mdp.reward(), mdp.gamma())
}

/// Number of series terms after which the analytic tail is below `1e-10`.
pub fn default_truncation(gamma: f64, reward_sup: f64) -> usize {
    if reward_sup == 0.0 || gamma == 0.0 {
        return 1;
    }
    let target = 1e-11 * (1.0 - gamma) / (2.0 * reward_sup);
    (target.ln() / gamma.ln()).ceil().max(1.0) as usize
}

/// Upper bound on `|| v - v_beta ||_inf`:
/// `sum_{i<T} gamma^i || (P^i - M^i) r ||_inf` plus the tail
/// `2 gamma^T ||r||_inf / (1 - gamma)`, which bounds the remaining terms
/// because both powers are stochastic.
pub fn bias_bound(
    mdp: &TabularMdp,
    p_rev: &StochasticMatrix,
    spec: &RegularizerSpec,
    truncation: usize,
) -> Result<f64> {
    let m = effective_matrix(mdp.transition(), p_rev, spec)?;
    let gamma = mdp.gamma();
    let mut a = mdp.reward().to_vec();
    let mut b = a.clone();
    let mut scale = 1.0;
    let mut sum = 0.0;
    for i in 0..truncation {
        if i > 0 {
            a = mdp.transition().apply(&a)?;
            b = m.apply(&b)?;
        }
        let norm = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        sum += scale * norm;
        scale *= gamma;
    }
    let r_sup = mdp.reward().iter().map(|r| r.abs()).fold(0.0, f64::max);
    Ok(sum + 2.0 * scale * r_sup / (1.0 - gamma))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageReward {
    /// `mu^T r`.
    pub per_step: f64,
    /// `mu^T r / (1 - gamma)`.
    pub discounted: f64,
}

pub fn average_reward(mu: &StationaryDistribution, reward: &[f64], gamma: f64) -> Result<AverageReward> {
    check_dim(mu.len(), reward.len())?;
    let per_step: f64 = mu.as_slice().iter().zip(reward).map(|(m, r)| m * r).sum();
    Ok(AverageReward {
        per_step,
        discounted: per_step / (1.0 - gamma),
    })
}

/// Backward chain used by the regularizer for this MDP.
///
/// Continuing tasks use the reversal of `P`. Episodic tasks use the reversal
/// of the restart chain (terminal jumps to start), with the episode-boundary
/// predecessor of the start state folded onto the start state itself, since
/// an online learner seeds its trace with the first state's value. The
/// terminal row is absorbing so the terminal value stays zero.
pub fn backward_matrix(mdp: &TabularMdp) -> Result<StochasticMatrix> {
    let p = mdp.transition();
    let Some(ep) = mdp.episodic() else {
        return reversal(p, &stationary(p)?);
    };
    let mut restart = p.as_matrix().clone();
    restart.row_mut(ep.terminal).fill(0.0);
    restart[(ep.terminal, ep.start)] = 1.0;
    let restart = StochasticMatrix::new(restart)?;
    let mut rev = reversal(&restart, &stationary(&restart)?)?.into_matrix();
    rev[(ep.start, ep.start)] += rev[(ep.start, ep.terminal)];
    rev[(ep.start, ep.terminal)] = 0.0;
    rev.row_mut(ep.terminal).fill(0.0);
    rev[(ep.terminal, ep.terminal)] = 1.0;
    StochasticMatrix::new(rev)
}
