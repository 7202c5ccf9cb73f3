use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedStream;

fn tenths() -> Vec<f64> {
    (0..10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingPlan {
    pub seeds: usize,
    pub n_states: usize,
    /// Number of matrix powers per curve.
    pub iterations: usize,
    /// Power at which the U-shaped cross-section is checked.
    pub check_iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasPlan {
    pub seeds: usize,
    pub n_states: usize,
    pub check_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariancePlan {
    pub runs: usize,
    /// TD updates per run; one update is one iteration.
    pub steps: usize,
    pub beta: f64,
    /// Tabular step size `min(1, alpha0 / (1 + visits))`.
    pub alpha0: f64,
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomPlan {
    pub seeds: usize,
    pub trajectories: usize,
    pub beta: f64,
    pub lambda: f64,
    /// Constant step size.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkPlan {
    pub reps: usize,
    pub episodes: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Observation noise for the smoothing sweep; `None` means the largest
    /// value of the noise grid.
    pub lambda_sigma2: Option<f64>,
    pub action_std: f64,
    pub oracle_positions: usize,
    pub oracle_rollouts: usize,
}

/// Grids, seed sets and horizons for every experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub seed: u64,
    pub betas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub sigma2s: Vec<f64>,
    pub n_smooths: Vec<usize>,
    pub mixing: MixingPlan,
    pub bias: BiasPlan,
    pub variance: VariancePlan,
    pub room: RoomPlan,
    pub walk: WalkPlan,
}

impl Default for SweepPlan {
    fn default() -> Self {
        SweepPlan {
            seed: 0,
            betas: tenths(),
            lambdas: tenths(),
            sigma2s: vec![0.0, 0.01, 0.04, 0.09, 0.16, 0.25],
            n_smooths: vec![0, 2, 4, 6, 8, 10],
            mixing: MixingPlan {
                seeds: 20,
                n_states: 10,
                iterations: 30,
                check_iteration: 5,
            },
            bias: BiasPlan {
                seeds: 30,
                n_states: 10,
                check_beta: 0.5,
            },
            variance: VariancePlan {
                runs: 100,
                steps: 2000,
                beta: 0.5,
                alpha0: 10.0,
                record_every: 10,
            },
            room: RoomPlan {
                seeds: 20,
                trajectories: 25,
                beta: 0.5,
                lambda: 0.5,
                alpha: 0.3,
            },
            walk: WalkPlan {
                reps: 1000,
                episodes: 10,
                alpha: 0.01,
                beta: 0.5,
                lambda_sigma2: None,
                action_std: 0.05,
                oracle_positions: 50,
                oracle_rollouts: 400,
            },
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn check_grid(name: &str, xs: &[f64], lo: f64, hi: f64, hi_inclusive: bool) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} grid is empty")));
    }
    for &x in xs {
        let ok = x >= lo && if hi_inclusive { x <= hi } else { x < hi };
        if !ok {
            return Err(Error::InvalidParameter(format!("{name} grid value {x} out of range")));
        }
    }
    Ok(())
}

fn positive(name: &str, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter(format!("{name} must be at least 1")));
    }
    Ok(())
}

impl SweepPlan {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn root(&self) -> SeedStream {
        SeedStream::new(self.seed)
    }

    pub fn walk_lambda_sigma2(&self) -> f64 {
        self.walk
            .lambda_sigma2
            .unwrap_or_else(|| self.sigma2s.iter().copied().fold(0.0, f64::max))
    }

    /// Applies one `key = value` override. List values are comma separated.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = key.trim();
        match k {
            "seed" => self.seed = parse(k, value)?,
            "betas" => self.betas = parse_list(k, value)?,
            "lambdas" => self.lambdas = parse_list(k, value)?,
            "sigma2s" => self.sigma2s = parse_list(k, value)?,
            "n_smooths" => self.n_smooths = parse_list(k, value)?,
            "mixing.seeds" => self.mixing.seeds = parse(k, value)?,
            "mixing.n_states" => self.mixing.n_states = parse(k, value)?,
            "mixing.iterations" => self.mixing.iterations = parse(k, value)?,
            "mixing.check_iteration" => self.mixing.check_iteration = parse(k, value)?,
            "bias.seeds" => self.bias.seeds = parse(k, value)?,
            "bias.n_states" => self.bias.n_states = parse(k, value)?,
            "bias.check_beta" => self.bias.check_beta = parse(k, value)?,
            "variance.runs" => self.variance.runs = parse(k, value)?,
            "variance.steps" => self.variance.steps = parse(k, value)?,
            "variance.beta" => self.variance.beta = parse(k, value)?,
            "variance.alpha0" => self.variance.alpha0 = parse(k, value)?,
            "variance.record_every" => self.variance.record_every = parse(k, value)?,
            "room.seeds" => self.room.seeds = parse(k, value)?,
            "room.trajectories" => self.room.trajectories = parse(k, value)?,
            "room.beta" => self.room.beta = parse(k, value)?,
            "room.lambda" => self.room.lambda = parse(k, value)?,
            "room.alpha" => self.room.alpha = parse(k, value)?,
            "walk.reps" => self.walk.reps = parse(k, value)?,
            "walk.episodes" => self.walk.episodes = parse(k, value)?,
            "walk.alpha" => self.walk.alpha = parse(k, value)?,
            "walk.beta" => self.walk.beta = parse(k, value)?,
            "walk.lambda_sigma2" => self.walk.lambda_sigma2 = Some(parse(k, value)?),
            "walk.action_std" => self.walk.action_std = parse(k, value)?,
            "walk.oracle_positions" => self.walk.oracle_positions = parse(k, value)?,
            "walk.oracle_rollouts" => self.walk.oracle_rollouts = parse(k, value)?,
            _ => return Err(Error::InvalidParameter(format!("unknown plan key {k:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key = value, got {line:?}"),
            })?;
            self.set(key, value).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        check_grid("beta", &self.betas, 0.0, 1.0, true)?;
        check_grid("lambda", &self.lambdas, 0.0, 1.0, false)?;
        check_grid("sigma2", &self.sigma2s, 0.0, f64::INFINITY, false)?;
        if self.n_smooths.is_empty() {
            return Err(Error::InvalidParameter("n_smooth grid is empty".into()));
        }
        if let Some(&n) = self.n_smooths.iter().find(|&&n| n > self.bias.n_states) {
            return Err(Error::InvalidParameter(format!(
                "n_smooth {n} exceeds bias.n_states {}",
                self.bias.n_states
            )));
        }
        for (name, b) in [
            ("bias.check_beta", self.bias.check_beta),
            ("variance.beta", self.variance.beta),
            ("room.beta", self.room.beta),
            ("walk.beta", self.walk.beta),
        ] {
            check_grid(name, &[b], 0.0, 1.0, true)?;
        }
        check_grid("room.lambda", &[self.room.lambda], 0.0, 1.0, false)?;
        for (name, n) in [
            ("mixing.seeds", self.mixing.seeds),
            ("mixing.iterations", self.mixing.iterations),
            ("mixing.check_iteration", self.mixing.check_iteration),
            ("bias.seeds", self.bias.seeds),
            ("variance.runs", self.variance.runs),
            ("variance.steps", self.variance.steps),
            ("variance.record_every", self.variance.record_every),
            ("room.seeds", self.room.seeds),
            ("walk.reps", self.walk.reps),
            ("walk.episodes", self.walk.episodes),
            ("walk.oracle_positions", self.walk.oracle_positions),
            ("walk.oracle_rollouts", self.walk.oracle_rollouts),
        ] {
            positive(name, n)?;
        }
        if self.mixing.check_iteration > self.mixing.iterations {
            return Err(Error::InvalidParameter("mixing.check_iteration exceeds mixing.iterations".into()));
        }
        if self.mixing.n_states < 2 || self.bias.n_states < 2 {
            return Err(Error::InvalidParameter("random chains need at least 2 states".into()));
        }
        for (name, a) in [
            ("variance.alpha0", self.variance.alpha0),
            ("room.alpha", self.room.alpha),
            ("walk.alpha", self.walk.alpha),
            ("walk.action_std", self.walk.action_std),
        ] {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if let Some(s) = self.walk.lambda_sigma2 {
            check_grid("walk.lambda_sigma2", &[s], 0.0, f64::INFINITY, false)?;
        }
        Ok(())
    }
}
