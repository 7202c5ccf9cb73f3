use rayon::prelude::*;

use super::{mean, Check, ExperimentOutput, ExperimentRecord, SweepPlan, Table};
use crate::envs::{theta_star, NoisyWalkConfig};
use crate::error::Result;
use crate::online::{semi_gradient_td, OnlineConfig, StepSize};
use crate::operators::RegularizerSpec;
use crate::rng::SeedStream;

const NAME: &str = "noisy_walk";
const LAMBDA_NAME: &str = "noisy_walk_lambda";

/// Final `theta` of each repetition. Repetition `r` uses the same seed for
/// every setting, so settings are compared on shared trajectories.
fn ensemble(plan: &SweepPlan, env: &NoisyWalkConfig, spec: RegularizerSpec, root: SeedStream) -> Result<Vec<f64>> {
    let wp = &plan.walk;
    (0..wp.reps as u64)
        .into_par_iter()
        .map(|r| {
            let cfg = OnlineConfig::new(StepSize::Constant(wp.alpha), spec, wp.episodes, env.episode_len, 0)
                .with_seed(root.child(r));
            Ok(semi_gradient_td(env, &cfg)?.theta)
        })
        .collect()
}

fn emit(
    records: &mut Vec<ExperimentRecord>,
    table: &str,
    thetas: &[f64],
    target: f64,
    step: u64,
    sigma2: f64,
    spec: &RegularizerSpec,
) -> f64 {
    let errs: Vec<f64> = thetas.iter().map(|t| (t - target).abs()).collect();
    for (r, (&t, &e)) in thetas.iter().zip(&errs).enumerate() {
        let rec = |metric: &str, v: f64| ExperimentRecord::new(table, Some(r as u64), step, metric, v).sigma2(sigma2).spec(spec);
        records.push(rec("theta_hat", t));
        records.push(rec("abs_theta_err", e));
    }
    let m = mean(&errs);
    records.push(ExperimentRecord::new(table, None, step, "abs_theta_err", m).sigma2(sigma2).spec(spec));
    records.push(ExperimentRecord::new(table, None, step, "theta_hat", mean(thetas)).sigma2(sigma2).spec(spec));
    m
}

/// Semi-gradient TD on the noisy walk: error to `theta*` across observation
/// noise levels, and across smoothing strengths at one noise level.
pub fn run_noisy_walk(plan: &SweepPlan) -> Result<ExperimentOutput> {
    plan.validate()?;
    let wp = &plan.walk;
    let root = plan.root().named(NAME);
    let base_env = NoisyWalkConfig {
        action_std: wp.action_std,
        ..NoisyWalkConfig::default()
    };
    let target = theta_star(&base_env, wp.oracle_positions, wp.oracle_rollouts, root.named("oracle"))?;
    let step = (wp.episodes * base_env.episode_len) as u64;
    let runs = root.named("runs");

    let plain = RegularizerSpec::none();
    let regularized = RegularizerSpec::previous_state(wp.beta)?;
    let mut records = vec![ExperimentRecord::new(NAME, None, 0, "theta_star", target)];
    let mut by_sigma = Vec::new();
    for &s2 in &plan.sigma2s {
        let env = base_env.with_sigma2(s2);
        let a = emit(&mut records, NAME, &ensemble(plan, &env, plain, runs)?, target, step, s2, &plain);
        let b = emit(&mut records, NAME, &ensemble(plan, &env, regularized, runs)?, target, step, s2, &regularized);
        by_sigma.push((s2, a, b));
    }
    let &(s_max, plain_err, reg_err) = by_sigma
        .iter()
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .expect("validated non-empty grid");
    let robust = Check::new(
        "walk_regularized_more_robust",
        NAME,
        reg_err < plain_err,
        format!(
            "at sigma2 = {s_max}, mean |theta - theta*| with beta = {} is below beta = 0",
            wp.beta
        ),
    )
    .with("sigma2", s_max)
    .with("err_beta0", plain_err)
    .with("err_beta", reg_err)
    .with("theta_star", target);

    let s2 = plan.walk_lambda_sigma2();
    let env = base_env.with_sigma2(s2);
    let mut lambda_records = vec![ExperimentRecord::new(LAMBDA_NAME, None, 0, "theta_star", target)];
    let mut curve = Vec::new();
    for &lambda in &plan.lambdas {
        let spec = RegularizerSpec::exponential_smoothing(wp.beta, lambda)?;
        let err = emit(&mut lambda_records, LAMBDA_NAME, &ensemble(plan, &env, spec, runs)?, target, step, s2, &spec);
        curve.push((lambda, err));
    }
    let argmin = curve
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut interior = Check::new(
        "walk_lambda_interior_minimum",
        LAMBDA_NAME,
        argmin > 0 && argmin + 1 < curve.len(),
        format!("at sigma2 = {s2}, the error over the lambda grid is minimized at an interior lambda"),
    )
    .with("sigma2", s2)
    .with("best_lambda", curve[argmin].0);
    for (l, e) in &curve {
        interior = interior.with(format!("err_lambda_{l}"), *e);
    }

    Ok(ExperimentOutput {
        tables: vec![
            Table {
                name: NAME.into(),
                records,
            },
            Table {
                name: LAMBDA_NAME.into(),
                records: lambda_records,
            },
        ],
        checks: vec![robust, interior],
        notes: vec![format!(
            "noisy_walk: action std {}, {} episodes of {} steps per repetition, constant alpha {}",
            wp.action_std, wp.episodes, base_env.episode_len, wp.alpha
        )],
    })
}
