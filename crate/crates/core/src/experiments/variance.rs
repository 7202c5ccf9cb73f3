use rayon::prelude::*;

use super::{mean, sample_variance, Check, ExperimentOutput, ExperimentRecord, SweepPlan, Table};
use crate::envs::VarianceMdp;
use crate::error::Result;
use crate::mdp::solve_exact;
use crate::online::{algorithm1_observed, OnlineConfig, StartState, StepSize};
use crate::operators::RegularizerSpec;

const NAME: &str = "variance";
const S1: usize = 0;

/// Estimates of `v(S1)` after every update, one row per run.
fn ensemble(plan: &SweepPlan, env: &VarianceMdp, spec: RegularizerSpec) -> Result<Vec<Vec<f64>>> {
    let vp = &plan.variance;
    let mdp = env.mdp()?;
    let noise = env.noise_var.to_vec();
    let root = plan.root().named(NAME);
    (0..vp.runs as u64)
        .into_par_iter()
        .map(|r| {
            // Runs share seeds across methods, so the comparison is paired.
            let cfg = OnlineConfig::new(StepSize::Visit { alpha0: vp.alpha0 }, spec, 1, vp.steps, 0)
                .with_seed(root.child(r))
                .with_start(StartState::Fixed(S1));
            let mut trace = Vec::with_capacity(vp.steps + 1);
            trace.push(0.0);
            algorithm1_observed(&mdp, &cfg, Some(&noise), |e| trace.push(e.values[S1]))?;
            Ok(trace)
        })
        .collect()
}

/// Cross-run spread of the estimate at the noisy state, with and without
/// previous-state regularization.
pub fn run_variance(plan: &SweepPlan) -> Result<ExperimentOutput> {
    plan.validate()?;
    let vp = &plan.variance;
    let env = VarianceMdp::default();
    let target = solve_exact(&env.mdp()?)?[S1];
    let specs = [RegularizerSpec::none(), RegularizerSpec::previous_state(vp.beta)?];

    let mut records = Vec::new();
    let mut tail_var = Vec::new();
    let mut tail_err = Vec::new();
    for spec in &specs {
        let runs = ensemble(plan, &env, *spec)?;
        let columns: Vec<Vec<f64>> = (0..=vp.steps).map(|t| runs.iter().map(|run| run[t]).collect()).collect();
        let var: Vec<f64> = columns.iter().map(|c| sample_variance(c)).collect();
        let err: Vec<f64> = columns
            .iter()
            .map(|c| mean(&c.iter().map(|x| (x - target).abs()).collect::<Vec<_>>()))
            .collect();
        for t in (0..=vp.steps).step_by(vp.record_every) {
            for (r, run) in runs.iter().enumerate() {
                records.push(ExperimentRecord::new(NAME, Some(r as u64), t as u64, "estimate_S1", run[t]).spec(spec));
            }
            let agg = |metric: &str, v: f64| ExperimentRecord::new(NAME, None, t as u64, metric, v).spec(spec);
            records.push(agg("mean_S1", mean(&columns[t])));
            records.push(agg("abs_err_S1", err[t]));
            records.push(agg("var_S1", var[t]));
        }
        let quartile = 3 * vp.steps / 4..=vp.steps;
        tail_var.push(mean(&var[quartile.clone()]));
        tail_err.push(mean(&err[quartile]));
    }

    let check = Check::new(
        "variance_reduced",
        NAME,
        tail_var[1] < tail_var[0],
        format!(
            "final-quartile cross-run variance of v(S1) with beta = {} is below beta = 0",
            vp.beta
        ),
    )
    .with("var_beta0", tail_var[0])
    .with("var_beta", tail_var[1])
    .with("abs_err_beta0", tail_err[0])
    .with("abs_err_beta", tail_err[1])
    .with("v_star_S1", target);

    Ok(ExperimentOutput {
        tables: vec![Table {
            name: NAME.into(),
            records,
        }],
        checks: vec![check],
        notes: vec![format!(
            "variance: one iteration is one tabular TD update; runs start in S1 and use alpha = min(1, {}/(1 + visits))",
            vp.alpha0
        )],
    })
}
