use rayon::prelude::*;

use super::{mean, slope, Check, ExperimentOutput, ExperimentRecord, SweepPlan, Table};
use crate::envs::{random_mdp, smooth_rewards, RewardMode};
use crate::error::Result;
use crate::mdp::{solve_exact, TabularMdp};
use crate::operators::{backward_matrix, regularized_solve, RegularizerSpec};

const NAME: &str = "bias";

fn mean_abs_bias(mdp: &TabularMdp, beta: f64) -> Result<(f64, f64)> {
    let rev = backward_matrix(mdp)?;
    let exact = solve_exact(mdp)?;
    let reg = regularized_solve(mdp, &rev, &RegularizerSpec::previous_state(beta)?)?;
    Ok((exact.mean_abs_diff(&reg), exact.max_abs_diff(&reg)))
}

/// (mean, max) bias per grid beta, and mean bias at the check beta.
type BiasAtN = (Vec<(f64, f64)>, f64);

/// Bias of the previous-state fixed point as rewards along trajectories are
/// made similar. For each seed the same smoothing trajectory is used for
/// every `N`, so larger `N` extends the smoothing of smaller ones.
pub fn run_bias(plan: &SweepPlan) -> Result<ExperimentOutput> {
    plan.validate()?;
    let bp = &plan.bias;
    let root = plan.root().named(NAME);
    // Per seed, per N.
    let grid: Vec<Vec<BiasAtN>> = (0..bp.seeds as u64)
        .into_par_iter()
        .map(|k| {
            let seed = root.child(k);
            let base = random_mdp(bp.n_states, seed, RewardMode::Uniform)?;
            plan.n_smooths
                .iter()
                .map(|&n| {
                    let mdp = smooth_rewards(&base, n, seed.named("smooth"))?;
                    let per_beta = plan
                        .betas
                        .iter()
                        .map(|&b| mean_abs_bias(&mdp, b))
                        .collect::<Result<Vec<_>>>()?;
                    Ok((per_beta, mean_abs_bias(&mdp, bp.check_beta)?.0))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    for (k, per_n) in grid.iter().enumerate() {
        for (&n, (per_beta, _)) in plan.n_smooths.iter().zip(per_n) {
            for (&b, &(m, x)) in plan.betas.iter().zip(per_beta) {
                let rec = |metric: &str, v: f64| {
                    ExperimentRecord::new(NAME, Some(k as u64), 0, metric, v)
                        .beta(b)
                        .n_smooth(n)
                        .method("previous_state")
                };
                records.push(rec("mean_abs_bias", m));
                records.push(rec("max_abs_bias", x));
            }
        }
    }
    for (i, &n) in plan.n_smooths.iter().enumerate() {
        for (j, &b) in plan.betas.iter().enumerate() {
            let m = mean(&grid.iter().map(|s| s[i].0[j].0).collect::<Vec<_>>());
            records.push(
                ExperimentRecord::new(NAME, None, 0, "mean_abs_bias", m)
                    .beta(b)
                    .n_smooth(n)
                    .method("previous_state"),
            );
        }
    }

    let xs: Vec<f64> = plan.n_smooths.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = (0..plan.n_smooths.len())
        .map(|i| mean(&grid.iter().map(|s| s[i].1).collect::<Vec<_>>()))
        .collect();
    let fitted = slope(&xs, &ys);
    let mut trend = Check::new(
        "bias_decreases_with_n",
        NAME,
        fitted < 0.0,
        format!(
            "least-squares slope of seed-mean mean_abs_bias on N at beta = {} is negative",
            bp.check_beta
        ),
    )
    .with("slope", fitted)
    .with("beta", bp.check_beta)
    .with("seeds", bp.seeds as f64);
    for (x, y) in xs.iter().zip(&ys) {
        trend = trend.with(format!("mean_bias_n{x}"), *y);
    }

    Ok(ExperimentOutput {
        tables: vec![Table {
            name: NAME.into(),
            records,
        }],
        checks: vec![trend],
        notes: vec![],
    })
}
