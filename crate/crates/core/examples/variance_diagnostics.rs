//! Bellman-error variance along TD and ERC trajectories.
//!
//! `R_push = var(Q - BQ)` splits as `var Q + var BQ - 2 cov(Q, BQ)`. The
//! example prints the trajectory mean of `R_push` and of the index of
//! dispersion `var(Q) / mean(Q)` for each learner.
//!
//! ```bash
//! cargo run -p eigenpath --example variance_diagnostics
//! ```

use eigenpath::dynamics::run_learner;
use eigenpath::erc::{r_push, variance_decomposition};
use eigenpath::experiments::{dispersion_runs, ExperimentConfig, Learner};
use eigenpath::{bellman_backup, solve_q_star};

fn main() -> eigenpath::Result<()> {
    let cfg = ExperimentConfig {
        learners: vec![Learner::Td, Learner::Erc],
        ..Default::default()
    };
    let mdp = cfg.build_mdp()?;
    let policy = cfg.build_policy(&mdp)?;
    let q_star = solve_q_star(&mdp, &policy)?;

    let q0 = cfg.initial_table(&mdp, 0);
    let target = bellman_backup(&mdp, &policy, &q0)?;
    let vd = variance_decomposition(&q0, &target)?;
    println!(
        "seed 0 at step 0: var Q {:.4}, var BQ {:.4}, cov {:.4}, R_push {:.4} (identity gap {:.1e})",
        vd.var_q, vd.var_target, vd.covariance, vd.r_push_value, vd.identity_residual
    );

    for learner in &cfg.learners {
        let stepper = cfg.stepper(*learner).expect("sweep learner");
        let mut total = 0.0;
        for &seed in &cfg.seeds {
            let mut sum = 0.0;
            run_learner(&mdp, &policy, &cfg.initial_table(&mdp, seed), &q_star, &stepper, cfg.steps, |_, _, q| {
                let target = bellman_backup(&mdp, &policy, q).expect("shapes agree");
                sum += r_push(q, &target).expect("shapes agree");
            })?;
            total += sum / (cfg.steps + 1) as f64;
        }
        println!("{learner:<4} trajectory-mean R_push {:.4e}", total / cfg.seeds.len() as f64);
    }

    let runs = dispersion_runs(&cfg, &mdp, &policy)?;
    for learner in &cfg.learners {
        let means: Vec<f64> = runs
            .iter()
            .filter(|r| r.learner == *learner)
            .filter_map(|r| r.trajectory_mean())
            .collect();
        println!(
            "{learner:<4} trajectory-mean dispersion index {:.4e}",
            means.iter().sum::<f64>() / means.len() as f64
        );
    }
    Ok(())
}
