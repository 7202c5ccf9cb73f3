use rayon::prelude::*;

use super::{mean, Check, ExperimentOutput, ExperimentRecord, SweepPlan, Table};
use crate::envs::room_world;
use crate::error::Result;
use crate::mdp::{TabularMdp, ValueFunction};
use crate::online::{algorithm1_observed, OnlineConfig, StartState, StepSize};
use crate::operators::{backward_matrix, regularized_solve, RegularizerSpec};

const NAME: &str = "room";
/// Cap on a single trajectory; the walk terminates long before.
const MAX_STEPS: usize = 1_000_000;

/// Value table after each of `trajectories` episodes; entry 0 is the
/// zero initialization.
fn snapshots(mdp: &TabularMdp, plan: &SweepPlan, spec: RegularizerSpec, seed: u64) -> Result<Vec<Vec<f64>>> {
    let rp = &plan.room;
    let start = mdp.episodic().map_or(0, |e| e.start);
    let cfg = OnlineConfig::new(StepSize::Constant(rp.alpha), spec, rp.trajectories, MAX_STEPS, 0)
        .with_seed(plan.root().named(NAME).child(seed))
        .with_start(StartState::Fixed(start));
    let mut snaps = vec![vec![0.0; mdp.n_states()]; rp.trajectories + 1];
    algorithm1_observed(mdp, &cfg, None, |e| snaps[e.episode + 1].copy_from_slice(e.values))?;
    Ok(snaps)
}

/// How fast each method's estimate approaches its own fixed point on the
/// two-room walk, per trajectory.
pub fn run_room(plan: &SweepPlan) -> Result<ExperimentOutput> {
    plan.validate()?;
    let rp = &plan.room;
    let world = room_world();
    let mdp = world.mdp()?;
    let back = backward_matrix(&mdp)?;
    let methods = [
        RegularizerSpec::none(),
        RegularizerSpec::previous_state(rp.beta)?,
        RegularizerSpec::exponential_smoothing(rp.beta, rp.lambda)?,
    ];
    let n = mdp.n_states();

    let mut records = Vec::new();
    let mut final_err = Vec::new();
    for spec in &methods {
        let reference: ValueFunction = regularized_solve(&mdp, &back, spec)?;
        let runs: Vec<Vec<Vec<f64>>> = (0..rp.seeds as u64)
            .into_par_iter()
            .map(|k| snapshots(&mdp, plan, *spec, k))
            .collect::<Result<_>>()?;
        // errors[k][j][s]
        let errors: Vec<Vec<Vec<f64>>> = runs
            .iter()
            .map(|snaps| {
                snaps
                    .iter()
                    .map(|v| v.iter().zip(reference.as_slice()).map(|(a, b)| (a - b).abs()).collect())
                    .collect()
            })
            .collect();
        for (k, per_traj) in errors.iter().enumerate() {
            for (j, errs) in per_traj.iter().enumerate() {
                let rec = |metric: String, v: f64| ExperimentRecord::new(NAME, Some(k as u64), j as u64, metric, v).spec(spec);
                for (s, &e) in errs.iter().enumerate() {
                    records.push(rec(format!("abs_err_s{s:02}"), e));
                }
                records.push(rec("mean_abs_err".into(), mean(errs)));
            }
        }
        for j in 0..=rp.trajectories {
            let rec = |metric: String, v: f64| ExperimentRecord::new(NAME, None, j as u64, metric, v).spec(spec);
            for s in 0..n {
                records.push(rec(format!("abs_err_s{s:02}"), mean(&errors.iter().map(|e| e[j][s]).collect::<Vec<_>>())));
            }
            let m = mean(&errors.iter().map(|e| mean(&e[j])).collect::<Vec<_>>());
            records.push(rec("mean_abs_err".into(), m));
            if j == rp.trajectories {
                final_err.push(m);
            }
        }
    }

    let check = Check::new(
        "room_ordering",
        NAME,
        final_err[2] < final_err[1] && final_err[1] < final_err[0],
        format!(
            "seed-mean error after {} trajectories: exp_smoothing < previous_state < none",
            rp.trajectories
        ),
    )
    .with("none", final_err[0])
    .with("previous_state", final_err[1])
    .with("exp_smoothing", final_err[2]);

    Ok(ExperimentOutput {
        tables: vec![Table {
            name: NAME.into(),
            records,
        }],
        checks: vec![check],
        notes: vec![format!(
            "room: each method is scored against its own operator fixed point; constant alpha = {}",
            rp.alpha
        )],
    })
}
