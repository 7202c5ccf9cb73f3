//! Sample-based policy evaluation: tabular TD(0), exponential-smoothing
//! policy evaluation, and temporally regularized semi-gradient TD with a
//! single-parameter linear model.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::envs::walk::{NoisyWalk, NoisyWalkConfig};
use crate::error::{Error, Result};
use crate::markov::stationary;
use crate::mdp::{TabularMdp, TransitionSampler, ValueFunction};
use crate::operators::{RegularizerKind, RegularizerSpec};
use crate::rng::SeedStream;

/// Above this the linear model is considered divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Constant(f64),
    /// `min(1, alpha0 / (1 + n))`, with `n` the number of earlier updates of
    /// the same state (tabular) or earlier steps (linear).
    Visit { alpha0: f64 },
}

impl StepSize {
    pub fn at(&self, count: u64) -> f64 {
        match *self {
            StepSize::Constant(a) => a,
            StepSize::Visit { alpha0 } => (alpha0 / (1.0 + count as f64)).min(1.0),
        }
    }

    fn validate(&self) -> Result<()> {
        let a = match *self {
            StepSize::Constant(a) => a,
            StepSize::Visit { alpha0 } => alpha0,
        };
        if a.is_finite() && a >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("step size {a} must be nonnegative")))
        }
    }
}

/// Where each episode begins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartState {
    Fixed(usize),
    /// Drawn from the chain's stationary distribution.
    Stationary,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineConfig {
    pub alpha: StepSize,
    pub spec: RegularizerSpec,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub seed: SeedStream,
    pub start: StartState,
}

impl OnlineConfig {
    pub fn new(alpha: StepSize, spec: RegularizerSpec, episodes: usize, steps_per_episode: usize, seed: u64) -> Self {
        OnlineConfig {
            alpha,
            spec,
            episodes,
            steps_per_episode,
            seed: SeedStream::new(seed),
            start: StartState::Stationary,
        }
    }

    pub fn with_start(mut self, start: StartState) -> Self {
        self.start = start;
        self
    }

    pub fn with_seed(mut self, seed: SeedStream) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_spec(mut self, spec: RegularizerSpec) -> Self {
        self.spec = spec;
        self
    }

    fn validate(&self) -> Result<()> {
        self.alpha.validate()?;
        self.spec.validated()?;
        if self.episodes == 0 {
            return Err(Error::InvalidParameter("episodes must be at least 1".into()));
        }
        Ok(())
    }
}

/// One tabular update, reported after `values[state]` has changed.
#[derive(Debug, Clone, Copy)]
pub struct StepEvent<'a> {
    pub step: usize,
    pub episode: usize,
    pub state: usize,
    pub next: usize,
    pub values: &'a [f64],
}

enum Event {
    Begin(usize),
    Step {
        step: usize,
        episode: usize,
        state: usize,
        next: usize,
    },
}

/// Drives episodes over the chain. Both tabular learners use it, so equal
/// seeds give identical trajectories and identical random draws.
struct Episodes<'m> {
    mdp: &'m TabularMdp,
    sampler: TransitionSampler,
    start_probs: Option<Vec<f64>>,
    start: StartState,
}

impl<'m> Episodes<'m> {
    fn new(mdp: &'m TabularMdp, start: StartState) -> Result<Self> {
        let start_probs = match start {
            StartState::Fixed(s) if s >= mdp.n_states() => {
                return Err(Error::InvalidParameter(format!("start state {s} out of range")))
            }
            StartState::Fixed(_) => None,
            StartState::Stationary => Some(stationary(mdp.transition())?.as_slice().to_vec()),
            StartState::Uniform => Some(vec![1.0 / mdp.n_states() as f64; mdp.n_states()]),
        };
        Ok(Episodes {
            mdp,
            sampler: TransitionSampler::new(mdp.transition()),
            start_probs,
            start,
        })
    }

    fn first_state<R: Rng>(&self, rng: &mut R) -> usize {
        match (self.start, &self.start_probs) {
            (StartState::Fixed(s), _) => s,
            (_, Some(p)) => TransitionSampler::sample_from(p, rng),
            (_, None) => 0,
        }
    }

    /// Episodes end early once the terminal state is entered.
    fn run<H: FnMut(Event)>(&self, cfg: &OnlineConfig, mut handle: H) {
        let mut rng = cfg.seed.rng();
        let mut global = 0usize;
        for episode in 0..cfg.episodes {
            let mut s = self.first_state(&mut rng);
            handle(Event::Begin(s));
            for _ in 0..cfg.steps_per_episode {
                if self.mdp.is_terminal(s) {
                    break;
                }
                let next = self.sampler.sample(s, &mut rng);
                handle(Event::Step {
                    step: global,
                    episode,
                    state: s,
                    next,
                });
                global += 1;
                s = next;
            }
        }
    }
}

/// State rewards, optionally perturbed by zero-mean Gaussian noise drawn
/// from a stream separate from the trajectory's.
struct RewardSource<'m> {
    mean: &'m [f64],
    noise: Option<(Vec<f64>, ChaCha8Rng)>,
}

impl<'m> RewardSource<'m> {
    fn new(mdp: &'m TabularMdp, noise_var: Option<&[f64]>, seed: SeedStream) -> Result<Self> {
        let noise = match noise_var {
            None => None,
            Some(var) => {
                if var.len() != mdp.n_states() {
                    return Err(Error::DimensionMismatch {
                        expected: mdp.n_states(),
                        found: var.len(),
                    });
                }
                if var.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                    return Err(Error::InvalidParameter("noise variances must be nonnegative".into()));
                }
                let std = var.iter().map(|x| x.sqrt()).collect();
                Some((std, seed.named("reward-noise").rng()))
            }
        };
        Ok(RewardSource {
            mean: mdp.reward(),
            noise,
        })
    }

    fn draw(&mut self, s: usize) -> f64 {
        match &mut self.noise {
            None => self.mean[s],
            Some((std, rng)) => {
                let z: f64 = rng.sample(StandardNormal);
                self.mean[s] + std[s] * z
            }
        }
    }
}

fn finish(v: Vec<f64>) -> Result<ValueFunction> {
    ValueFunction::new(v).map_err(|_| Error::Divergence {
        theta: f64::INFINITY,
        step: 0,
    })
}

/// Tabular TD(0): `v(s) += alpha (r(s) + gamma v(s') - v(s))`.
pub fn td0(mdp: &TabularMdp, cfg: &OnlineConfig) -> Result<ValueFunction> {
    td0_observed(mdp, cfg, None, |_| {})
}

/// `td0` with optional Gaussian reward noise (per-state variances) and a
/// per-update observer.
pub fn td0_observed<F>(
    mdp: &TabularMdp,
    cfg: &OnlineConfig,
    reward_noise: Option<&[f64]>,
    mut observe: F,
) -> Result<ValueFunction>
where
    F: FnMut(&StepEvent<'_>),
{
    cfg.validate()?;
    if cfg.spec.kind != RegularizerKind::None {
        return Err(Error::InvalidParameter("td0 takes an unregularized config".into()));
    }
    let episodes = Episodes::new(mdp, cfg.start)?;
    let mut rewards = RewardSource::new(mdp, reward_noise, cfg.seed)?;
    let gamma = mdp.gamma();
    let mut v = vec![0.0; mdp.n_states()];
    let mut visits = vec![0u64; mdp.n_states()];
    episodes.run(cfg, |event| {
        if let Event::Step { step, episode, state: s, next } = event {
            let alpha = cfg.alpha.at(visits[s]);
            visits[s] += 1;
            let r = rewards.draw(s);
            v[s] += alpha * (r + gamma * v[next] - v[s]);
            observe(&StepEvent {
                step,
                episode,
                state: s,
                next,
                values: &v,
            });
        }
    });
    finish(v)
}

/// Policy evaluation with exponential smoothing:
///
/// ```text
/// p = v(s0) at the start of each episode
/// per step:  v(s) += alpha (r(s) + gamma ((1 - beta) v(s') + beta p) - v(s))
///            p = (1 - lambda) v(s) + lambda p
/// ```
///
/// `p` is refreshed after the value update, with the new `v(s)`. Previous-
/// state regularization is `lambda = 0`; no regularization is `beta = 0`.
pub fn algorithm1(mdp: &TabularMdp, cfg: &OnlineConfig) -> Result<ValueFunction> {
    algorithm1_observed(mdp, cfg, None, |_| {})
}

/// `algorithm1` with optional reward noise and an observer, as for
/// [`td0_observed`].
pub fn algorithm1_observed<F>(
    mdp: &TabularMdp,
    cfg: &OnlineConfig,
    reward_noise: Option<&[f64]>,
    mut observe: F,
) -> Result<ValueFunction>
where
    F: FnMut(&StepEvent<'_>),
{
    cfg.validate()?;
    let episodes = Episodes::new(mdp, cfg.start)?;
    let gamma = mdp.gamma();
    let mut rewards = RewardSource::new(mdp, reward_noise, cfg.seed)?;
    let lambda = cfg.spec.effective_lambda();
    let mut v = vec![0.0; mdp.n_states()];
    let mut visits = vec![0u64; mdp.n_states()];
    let mut p = 0.0;
    episodes.run(cfg, |event| match event {
        Event::Begin(s0) => p = v[s0],
        Event::Step { step, episode, state: s, next } => {
            let beta = cfg.spec.beta_at(step);
            let alpha = cfg.alpha.at(visits[s]);
            visits[s] += 1;
            let target = rewards.draw(s) + gamma * ((1.0 - beta) * v[next] + beta * p);
            v[s] += alpha * (target - v[s]);
            p = (1.0 - lambda) * v[s] + lambda * p;
            observe(&StepEvent {
                step,
                episode,
                state: s,
                next,
                values: &v,
            });
        }
    });
    finish(v)
}

/// `value(s) = theta * s` for scalar observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearValueModel {
    pub theta: f64,
}

impl LinearValueModel {
    pub fn value(&self, s: f64) -> f64 {
        self.theta * s
    }
}

/// Per-step report of the semi-gradient learner.
#[derive(Debug, Clone, Copy)]
pub struct WalkStep {
    pub step: usize,
    pub episode: usize,
    pub observation: f64,
    pub theta: f64,
}

/// Temporally regularized semi-gradient TD on the noisy walk:
///
/// ```text
/// theta += alpha (r + gamma ((1 - beta) v(s_{t+1}) + beta v~) - v(s_t)) * s_t
/// v~ = (1 - lambda) v(s_t) + lambda v~        (after the update)
/// ```
///
/// `v~` starts each episode at `v(s_0)`. With `lambda = 0` it is the previous
/// observation's value.
pub fn semi_gradient_td(env: &NoisyWalkConfig, cfg: &OnlineConfig) -> Result<LinearValueModel> {
    semi_gradient_td_observed(env, cfg, |_| {})
}

pub fn semi_gradient_td_observed<F>(
    env: &NoisyWalkConfig,
    cfg: &OnlineConfig,
    mut observe: F,
) -> Result<LinearValueModel>
where
    F: FnMut(&WalkStep),
{
    cfg.validate()?;
    env.validate()?;
    let lambda = cfg.spec.effective_lambda();
    let gamma = env.gamma;
    let steps = cfg.steps_per_episode;
    let mut rng = cfg.seed.rng();
    let mut model = LinearValueModel { theta: 0.0 };
    let mut global = 0usize;
    for episode in 0..cfg.episodes {
        let mut walk = NoisyWalk::new(rng.random::<f64>());
        let mut obs = walk.x + env.observation_std() * rng.sample::<f64, _>(StandardNormal);
        let mut trace = model.value(obs);
        for _ in 0..steps {
            let (next, next_obs, reward) = walk.step(env, &mut rng);
            let beta = cfg.spec.beta_at(global);
            let alpha = cfg.alpha.at(global as u64);
            let target = reward + gamma * ((1.0 - beta) * model.value(next_obs) + beta * trace);
            model.theta += alpha * (target - model.value(obs)) * obs;
            if !model.theta.is_finite() || model.theta.abs() > DIVERGENCE_LIMIT {
                return Err(Error::Divergence {
                    theta: model.theta,
                    step: global,
                });
            }
            trace = (1.0 - lambda) * model.value(obs) + lambda * trace;
            observe(&WalkStep {
                step: global,
                episode,
                observation: obs,
                theta: model.theta,
            });
            walk = next;
            obs = next_obs;
            global += 1;
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::StochasticMatrix;
    use crate::mdp::solve_exact;
    use crate::operators::{backward_matrix, regularized_solve};

    fn one_state() -> TabularMdp {
        TabularMdp::new(StochasticMatrix::identity(1), vec![1.0], 0.9).unwrap()
    }

    fn two_state() -> TabularMdp {
        let p = StochasticMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        TabularMdp::new(p, vec![1.0, 0.0], 0.5).unwrap()
    }

    fn noisy_cycle() -> TabularMdp {
        let p = StochasticMatrix::from_rows(&[
            vec![0.1, 0.9, 0.0],
            vec![0.0, 0.1, 0.9],
            vec![0.9, 0.0, 0.1],
        ])
        .unwrap();
        TabularMdp::new(p, vec![1.0, 0.0, 0.0], 0.9).unwrap()
    }

    fn visit(alpha0: f64) -> StepSize {
        StepSize::Visit { alpha0 }
    }

    #[test]
    fn step_sizes() {
        assert_eq!(StepSize::Constant(0.3).at(100), 0.3);
        assert_eq!(visit(1.0).at(0), 1.0);
        assert_eq!(visit(1.0).at(3), 0.25);
        assert_eq!(visit(10.0).at(4), 1.0);
        assert_eq!(visit(10.0).at(19), 0.5);
    }

    #[test]
    fn zero_step_size_leaves_values_at_zero() {
        let cfg = OnlineConfig::new(StepSize::Constant(0.0), RegularizerSpec::none(), 3, 100, 1);
        assert!(td0(&noisy_cycle(), &cfg).unwrap().as_slice().iter().all(|&x| x == 0.0));
        let cfg = cfg.with_spec(RegularizerSpec::exponential_smoothing(0.5, 0.5).unwrap());
        assert!(algorithm1(&noisy_cycle(), &cfg).unwrap().as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn one_state_converges_to_geometric_value() {
        // alpha0 / (1 + n) contracts the error like n^-(alpha0 (1 - gamma)); a
        // unit alpha0 is far too slow at gamma = 0.9.
        let cfg = OnlineConfig::new(visit(10.0), RegularizerSpec::none(), 1, 20_000, 2);
        assert!((td0(&one_state(), &cfg).unwrap()[0] - 10.0).abs() < 0.1);
        for (beta, lambda) in [(0.3, 0.0), (0.9, 0.5), (1.0, 0.9)] {
            let spec = RegularizerSpec::exponential_smoothing(beta, lambda).unwrap();
            let v = algorithm1(&one_state(), &cfg.with_spec(spec)).unwrap();
            assert!((v[0] - 10.0).abs() < 0.1, "beta {beta} lambda {lambda}: {}", v[0]);
        }
    }

    #[test]
    fn td0_matches_exact_solution() {
        let mdp = two_state();
        let cfg = OnlineConfig::new(visit(1.0), RegularizerSpec::none(), 1, 200_000, 3);
        let v = td0(&mdp, &cfg).unwrap();
        assert!(v.max_abs_diff(&solve_exact(&mdp).unwrap()) < 0.05);
    }

    #[test]
    fn td0_rejects_regularized_configs() {
        let cfg = OnlineConfig::new(visit(1.0), RegularizerSpec::previous_state(0.5).unwrap(), 1, 10, 0);
        assert!(td0(&two_state(), &cfg).is_err());
    }

    #[test]
    fn zero_beta_reproduces_td0_update_for_update() {
        let mdp = noisy_cycle();
        let base = OnlineConfig::new(visit(1.0), RegularizerSpec::none(), 4, 500, 9);
        let mut a = Vec::new();
        td0_observed(&mdp, &base, None, |e| a.push((e.step, e.state, e.values[e.state]))).unwrap();
        for spec in [
            RegularizerSpec::none(),
            RegularizerSpec::previous_state(0.0).unwrap(),
            RegularizerSpec::exponential_smoothing(0.0, 0.7).unwrap(),
        ] {
            let mut b = Vec::new();
            algorithm1_observed(&mdp, &base.with_spec(spec), None, |e| {
                b.push((e.step, e.state, e.values[e.state]))
            })
            .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn trace_is_refreshed_after_the_value_update() {
        // Deterministic flip chain; every quantity below is an exact binary
        // fraction.
        let p = StochasticMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let mdp = TabularMdp::new(p, vec![1.0, 0.0], 0.5).unwrap();
        let spec = RegularizerSpec::exponential_smoothing(0.5, 0.5).unwrap();
        let cfg = OnlineConfig::new(StepSize::Constant(0.5), spec, 1, 3, 0).with_start(StartState::Fixed(0));
        let mut trace = Vec::new();
        let v = algorithm1_observed(&mdp, &cfg, None, |e| trace.push(e.values.to_vec())).unwrap();
        assert_eq!(trace[0], vec![0.5, 0.0]);
        assert_eq!(trace[1], vec![0.5, 0.09375]);
        assert_eq!(trace[2], vec![0.783203125, 0.09375]);
        assert_eq!(v.as_slice(), &[0.783203125, 0.09375]);
    }

    #[test]
    fn smoothing_converges_to_its_operator_fixed_point() {
        let mdp = noisy_cycle();
        let spec = RegularizerSpec::exponential_smoothing(0.3, 0.2).unwrap();
        let reference = regularized_solve(&mdp, &backward_matrix(&mdp).unwrap(), &spec).unwrap();
        let cfg = OnlineConfig::new(visit(10.0), spec, 1, 1_000_000, 4);
        let v = algorithm1(&mdp, &cfg).unwrap();
        assert!(v.max_abs_diff(&reference) < 0.05, "{:?} vs {:?}", v, reference);
    }

    #[test]
    fn decayed_beta_recovers_the_unregularized_value() {
        for mdp in [one_state(), two_state()] {
            let spec = RegularizerSpec::previous_state(0.8).unwrap().with_decay(1e-4).unwrap();
            let cfg = OnlineConfig::new(visit(10.0), spec, 1, 300_000, 5);
            let v = algorithm1(&mdp, &cfg).unwrap();
            assert!(v.max_abs_diff(&solve_exact(&mdp).unwrap()) < 0.05);
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let spec = RegularizerSpec::exponential_smoothing(0.4, 0.6).unwrap();
        let cfg = OnlineConfig::new(visit(2.0), spec, 3, 1000, 77);
        let noise = [1.0, 0.0, 0.5];
        let a = algorithm1_observed(&noisy_cycle(), &cfg, Some(&noise), |_| {}).unwrap();
        let b = algorithm1_observed(&noisy_cycle(), &cfg, Some(&noise), |_| {}).unwrap();
        assert_eq!(a, b);
        let c = algorithm1_observed(&noisy_cycle(), &cfg.with_seed(SeedStream::new(78)), Some(&noise), |_| {}).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn reward_noise_is_validated() {
        let cfg = OnlineConfig::new(visit(1.0), RegularizerSpec::none(), 1, 10, 0);
        assert!(td0_observed(&two_state(), &cfg, Some(&[1.0]), |_| {}).is_err());
        assert!(td0_observed(&two_state(), &cfg, Some(&[1.0, -1.0]), |_| {}).is_err());
    }

    #[test]
    fn episodes_stop_at_the_terminal_state() {
        let p = StochasticMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let mdp = TabularMdp::new(p, vec![1.0, 0.0], 0.9)
            .unwrap()
            .with_episodic(crate::mdp::Episodic { start: 0, terminal: 1 })
            .unwrap();
        let cfg = OnlineConfig::new(StepSize::Constant(1.0), RegularizerSpec::none(), 5, 100, 0)
            .with_start(StartState::Fixed(0));
        let mut steps = 0;
        let v = td0_observed(&mdp, &cfg, None, |_| steps += 1).unwrap();
        assert_eq!(steps, 5);
        assert_eq!(v.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn semi_gradient_basics() {
        let env = NoisyWalkConfig::default().with_sigma2(0.04);
        let spec = RegularizerSpec::previous_state(0.5).unwrap();
        let frozen = OnlineConfig::new(StepSize::Constant(0.0), spec, 2, 100, 1);
        assert_eq!(semi_gradient_td(&env, &frozen).unwrap().theta, 0.0);
        let cfg = OnlineConfig::new(StepSize::Constant(0.01), spec, 2, 1000, 1);
        let mut a = Vec::new();
        let mut b = Vec::new();
        semi_gradient_td_observed(&env, &cfg, |s| a.push(s.theta)).unwrap();
        semi_gradient_td_observed(&env, &cfg, |s| b.push(s.theta)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2000);
    }

    #[test]
    fn oversized_steps_diverge() {
        let env = NoisyWalkConfig::default().with_sigma2(1.0);
        let cfg = OnlineConfig::new(StepSize::Constant(50.0), RegularizerSpec::none(), 1, 1000, 1);
        assert!(matches!(semi_gradient_td(&env, &cfg), Err(Error::Divergence { .. })));
    }
}
