//! Temporally regularized policy evaluation.
//!
//! Regularizing the Bellman target with the time-reversed chain trades a
//! controlled amount of bias for lower variance. This crate provides the
//! Markov-chain numerics behind that idea (stationary distributions,
//! reversal, mixing), the regularized operators and their exact fixed points,
//! sample-based learners, the synthetic environments used to study them, and
//! a harness that sweeps the experiments and writes CSV/JSON results.
//!
//! ```
//! use tempreg::{regularized_solve, reversal, solve_exact, stationary, RegularizerSpec, StochasticMatrix, TabularMdp};
//!
//! let p = StochasticMatrix::from_rows(&[
//!     vec![0.1, 0.9, 0.0],
//!     vec![0.0, 0.1, 0.9],
//!     vec![0.9, 0.0, 0.1],
//! ])?;
//! let mu = stationary(&p)?;
//! let p_rev = reversal(&p, &mu)?;
//! let mdp = TabularMdp::new(p, vec![1.0, 0.0, 0.0], 0.9)?;
//! let v = solve_exact(&mdp)?;
//! let v_beta = regularized_solve(&mdp, &p_rev, &RegularizerSpec::previous_state(0.5)?)?;
//! assert!(v.max_abs_diff(&v_beta) > 0.0);
//! # Ok::<(), tempreg::Error>(())
//! ```

pub mod envs;
pub mod error;
pub mod experiments;
pub mod markov;
pub mod mdp;
pub mod online;
pub mod operators;
pub mod rng;

pub use error::{Error, Result};
pub use markov::{
    is_reversible, mix, mixing_error_curve, reversal, stationary, stationary_distribution, MixingError,
    StationaryDistribution, StochasticMatrix,
};
pub use mdp::{bellman_apply, sample_trajectory, solve_exact, Episodic, TabularMdp, ValueFunction};
pub use online::{
    algorithm1, semi_gradient_td, td0, LinearValueModel, OnlineConfig, StartState, StepSize,
};
pub use operators::{
    average_reward, backward_matrix, bias_bound, effective_matrix, regularized_apply, regularized_solve,
    AverageReward, RegularizerKind, RegularizerSpec,
};
pub use rng::SeedStream;
