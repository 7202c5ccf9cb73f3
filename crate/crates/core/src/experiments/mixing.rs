use rayon::prelude::*;

use super::{mean, Check, ExperimentOutput, ExperimentRecord, SweepPlan, Table};
use crate::envs::{random_mdp, RewardMode};
use crate::error::Result;
use crate::markov::{mix, mixing_error_curve, reversal, stationary, MixingError};

const NAME: &str = "mixing";
/// Curves must have decayed below this by the last power.
const VANISH_TOL: f64 = 1e-8;

struct SeedCurves {
    /// Unmixed chain, then one curve per grid beta.
    base: Vec<MixingError>,
    by_beta: Vec<Vec<MixingError>>,
}

/// Distance of `((1 - beta) P + beta P~)^i` to `P^inf` on random chains.
pub fn run_mixing(plan: &SweepPlan) -> Result<ExperimentOutput> {
    plan.validate()?;
    let mp = &plan.mixing;
    let root = plan.root().named(NAME);
    let curves: Vec<SeedCurves> = (0..mp.seeds as u64)
        .into_par_iter()
        .map(|k| -> Result<SeedCurves> {
            let mdp = random_mdp(mp.n_states, root.child(k), RewardMode::None)?;
            let p = mdp.transition();
            let mu = stationary(p)?;
            let rev = reversal(p, &mu)?;
            let base = mixing_error_curve(p, &mu, mp.iterations)?;
            let by_beta = plan
                .betas
                .iter()
                .map(|&b| mixing_error_curve(&mix(p, &rev, b)?, &mu, mp.iterations))
                .collect::<Result<_>>()?;
            Ok(SeedCurves { base, by_beta })
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    for (k, c) in curves.iter().enumerate() {
        for (&beta, curve) in plan.betas.iter().zip(&c.by_beta) {
            for e in curve {
                let rec = |metric: &str, v: f64| {
                    ExperimentRecord::new(NAME, Some(k as u64), e.iteration as u64, metric, v).beta(beta)
                };
                records.push(rec("dist_to_Pinf", e.max_abs));
                records.push(rec("dist_to_Pinf_frobenius", e.frobenius));
            }
        }
    }
    let seed_mean = |pick: &dyn Fn(&SeedCurves) -> f64| mean(&curves.iter().map(pick).collect::<Vec<_>>());
    for (j, &beta) in plan.betas.iter().enumerate() {
        for i in 0..mp.iterations {
            let m = seed_mean(&|c| c.by_beta[j][i].max_abs);
            let f = seed_mean(&|c| c.by_beta[j][i].frobenius);
            records.push(ExperimentRecord::new(NAME, None, i as u64 + 1, "mean_dist_to_Pinf", m).beta(beta));
            records.push(ExperimentRecord::new(NAME, None, i as u64 + 1, "mean_dist_to_Pinf_frobenius", f).beta(beta));
        }
    }

    let at = mp.check_iteration - 1;
    let base = seed_mean(&|c| c.base[at].max_abs);
    let interior: Vec<(f64, f64)> = plan
        .betas
        .iter()
        .enumerate()
        .filter(|(_, &b)| b > 0.0 && b < 1.0)
        .map(|(j, &b)| (b, seed_mean(&|c| c.by_beta[j][at].max_abs)))
        .collect();
    let (best_beta, best) = interior
        .iter()
        .copied()
        .fold((f64::NAN, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let improved_seeds = curves
        .iter()
        .filter(|c| {
            plan.betas
                .iter()
                .zip(&c.by_beta)
                .any(|(&b, curve)| b > 0.0 && b < 1.0 && curve[at].max_abs < c.base[at].max_abs)
        })
        .count();
    let u_shape = Check::new(
        "mixing_u_shape",
        NAME,
        best < base,
        format!(
            "seed-mean max-abs distance at power {}: some beta in (0,1) beats beta = 0",
            mp.check_iteration
        ),
    )
    .with("beta0", base)
    .with("best_interior", best)
    .with("best_beta", best_beta)
    .with("seeds_improved", improved_seeds as f64)
    .with("seeds", mp.seeds as f64);

    let last = curves
        .iter()
        .flat_map(|c| c.by_beta.iter().chain(std::iter::once(&c.base)))
        .map(|curve| curve[mp.iterations - 1].max_abs)
        .fold(0.0, f64::max);
    let vanish = Check::new(
        "mixing_curves_vanish",
        NAME,
        last < VANISH_TOL,
        format!("every curve is below {VANISH_TOL:e} at power {}", mp.iterations),
    )
    .with("max_final", last);

    Ok(ExperimentOutput {
        tables: vec![Table {
            name: NAME.into(),
            records,
        }],
        checks: vec![u_shape, vanish],
        notes: vec![],
    })
}
