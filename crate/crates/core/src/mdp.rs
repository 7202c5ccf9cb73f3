//! Tabular MDPs under a fixed policy.

use std::fmt::Write as _;
use std::ops::Index;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::markov::{check_dim, numbered_lines, parse_floats, StochasticMatrix};
use crate::rng::SeedStream;

/// Start and terminal states of an episodic task. The terminal state is
/// absorbing with zero reward in the transition matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Episodic {
    pub start: usize,
    pub terminal: usize,
}

/// Policy-induced chain `P`, state rewards `r` and discount `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    transition: StochasticMatrix,
    reward: Vec<f64>,
    gamma: f64,
    episodic: Option<Episodic>,
}

impl TabularMdp {
    pub fn new(transition: StochasticMatrix, reward: Vec<f64>, gamma: f64) -> Result<Self> {
        check_dim(transition.n(), reward.len())?;
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("gamma = {gamma} outside [0, 1)")));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidParameter("non-finite reward".into()));
        }
        Ok(TabularMdp {
            transition,
            reward,
            gamma,
            episodic: None,
        })
    }

    pub fn with_episodic(mut self, ep: Episodic) -> Result<Self> {
        let n = self.n_states();
        if ep.start >= n || ep.terminal >= n || ep.start == ep.terminal {
            return Err(Error::InvalidParameter(format!(
                "bad episodic states start={} terminal={}",
                ep.start, ep.terminal
            )));
        }
        if self.transition[(ep.terminal, ep.terminal)] != 1.0 || self.reward[ep.terminal] != 0.0 {
            return Err(Error::InvalidParameter(
                "terminal state must be absorbing with zero reward".into(),
            ));
        }
        self.episodic = Some(ep);
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.reward.len()
    }

    pub fn transition(&self) -> &StochasticMatrix {
        &self.transition
    }

    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn episodic(&self) -> Option<Episodic> {
        self.episodic
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.episodic.is_some_and(|e| e.terminal == s)
    }

    pub fn with_reward(&self, reward: Vec<f64>) -> Result<Self> {
        let mut m = TabularMdp::new(self.transition.clone(), reward, self.gamma)?;
        if let Some(ep) = self.episodic {
            m = m.with_episodic(ep)?;
        }
        Ok(m)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let mut m = TabularMdp::new(self.transition.clone(), self.reward.clone(), gamma)?;
        m.episodic = self.episodic;
        Ok(m)
    }

    /// Config-file form, read back by [`TabularMdp::from_text`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_states = {}", self.n_states());
        let _ = writeln!(s, "gamma = {:.16e}", self.gamma);
        let r: Vec<String> = self.reward.iter().map(|x| format!("{x:.16e}")).collect();
        let _ = writeln!(s, "reward = {}", r.join(" "));
        if let Some(ep) = self.episodic {
            let _ = writeln!(s, "start = {}", ep.start);
            let _ = writeln!(s, "terminal = {}", ep.terminal);
        }
        s.push_str("transition\n");
        s.push_str(&self.transition.to_text());
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = numbered_lines(text);
        let mut n_states = None;
        let mut gamma = None;
        let mut reward = None;
        let mut start = None;
        let mut terminal = None;
        let mut transition = None;
        let mut last_line = 0;
        while let Some((ln, line)) = lines.next() {
            last_line = ln;
            if line == "transition" {
                transition = Some(StochasticMatrix::read_block(&mut lines)?);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(ln, format!("expected key = value, got {line:?}")))?;
            let value = value.trim();
            let int = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::parse(ln, format!("bad integer {v:?}")))
            };
            match key.trim() {
                "n_states" => n_states = Some(int(value)?),
                "gamma" => {
                    gamma = Some(
                        value
                            .parse::<f64>()
                            .map_err(|_| Error::parse(ln, format!("bad gamma {value:?}")))?,
                    )
                }
                "reward" => reward = Some(parse_floats(ln, value)?),
                "start" => start = Some(int(value)?),
                "terminal" => terminal = Some(int(value)?),
                other => return Err(Error::parse(ln, format!("unknown key {other:?}"))),
            }
        }
        let missing = |what: &str| Error::parse(last_line, format!("missing {what}"));
        let transition = transition.ok_or_else(|| missing("transition"))?;
        let reward = reward.ok_or_else(|| missing("reward"))?;
        let gamma = gamma.ok_or_else(|| missing("gamma"))?;
        if let Some(n) = n_states {
            check_dim(n, reward.len())?;
        }
        let mdp = TabularMdp::new(transition, reward, gamma)?;
        match (start, terminal) {
            (Some(start), Some(terminal)) => mdp.with_episodic(Episodic { start, terminal }),
            (None, None) => Ok(mdp),
            _ => Err(missing("start/terminal pair")),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// State values, one per state.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    values: Vec<f64>,
}

impl ValueFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite value".into()));
        }
        Ok(ValueFunction { values })
    }

    pub fn zeros(n: usize) -> Self {
        ValueFunction {
            values: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// `|| self - other ||_inf`.
    pub fn max_abs_diff(&self, other: &ValueFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn mean_abs_diff(&self, other: &ValueFunction) -> f64 {
        let n = self.values.len().max(1) as f64;
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / n
    }
}

impl Index<usize> for ValueFunction {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// `r + gamma P v`.
pub fn bellman_apply(mdp: &TabularMdp, v: &ValueFunction) -> Result<ValueFunction> {
    let pv = mdp.transition.apply(v.as_slice())?;
    Ok(ValueFunction {
        values: mdp
            .reward
            .iter()
            .zip(pv)
            .map(|(r, x)| r + mdp.gamma * x)
            .collect(),
    })
}

/// Solves `(I - gamma M) v = r` for a stochastic `M`.
pub(crate) fn solve_discounted(m: &DMatrix<f64>, reward: &[f64], gamma: f64) -> Result<ValueFunction> {
    let n = reward.len();
    let a = DMatrix::<f64>::identity(n, n) - m * gamma;
    let x = a
        .lu()
        .solve(&DVector::from_column_slice(reward))
        .ok_or(Error::SingularSystem)?;
    ValueFunction::new(x.as_slice().to_vec()).map_err(|_| Error::SingularSystem)
}

/// Exact value of the policy: direct solve of `(I - gamma P) v = r`.
pub fn solve_exact(mdp: &TabularMdp) -> Result<ValueFunction> {
    solve_discounted(mdp.transition.as_matrix(), &mdp.reward, mdp.gamma)
}

/// Inverse-CDF sampler over the rows of a stochastic matrix.
#[derive(Debug, Clone)]
pub struct TransitionSampler {
    cumulative: Vec<Vec<f64>>,
}

impl TransitionSampler {
    pub fn new(m: &StochasticMatrix) -> Self {
        let cumulative = (0..m.n())
            .map(|i| {
                let mut acc = 0.0;
                m.row(i)
                    .into_iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect()
            })
            .collect();
        TransitionSampler { cumulative }
    }

    /// Next state from `s` given a uniform draw in `[0, 1)`.
    pub fn next_from_uniform(&self, s: usize, u: f64) -> usize {
        let row = &self.cumulative[s];
        let total = *row.last().unwrap_or(&1.0);
        let u = u * total;
        row.iter().position(|&c| c > u).unwrap_or_else(|| {
            // Rounding left the tail short of u; take the last reachable state.
            row.iter()
                .enumerate()
                .rev()
                .find(|(j, &c)| *j == 0 || c > row[j - 1])
                .map_or(row.len() - 1, |(j, _)| j)
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        self.next_from_uniform(s, rng.random::<f64>())
    }

    /// Draws from an arbitrary distribution given as probabilities.
    pub fn sample_from<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if acc > u {
                return i;
            }
        }
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// Samples `steps` transitions from `start`. Row `t` holds `(s_t, r(s_t))`;
/// the result has `steps + 1` rows.
pub fn sample_trajectory(
    mdp: &TabularMdp,
    start: usize,
    steps: usize,
    seed: SeedStream,
) -> Result<Vec<(usize, f64)>> {
    if start >= mdp.n_states() {
        return Err(Error::InvalidParameter(format!(
            "start state {start} out of range"
        )));
    }
    let sampler = TransitionSampler::new(&mdp.transition);
    let mut rng = seed.rng();
    let mut s = start;
    let mut out = Vec::with_capacity(steps + 1);
    out.push((s, mdp.reward[s]));
    for _ in 0..steps {
        s = sampler.sample(s, &mut rng);
        out.push((s, mdp.reward[s]));
    }
    Ok(out)
}
