//! ERC against TD and the oracle-assisted ERC* on FrozenLake.
//!
//! All learners start from the same ten perturbed tables. ERC adds
//! `beta * var(Q - BQ)` to the squared Bellman error, which pulls the error
//! toward `span{e}` faster than plain TD.
//!
//! ```bash
//! cargo run -p eigenpath --example erc_vs_td
//! ```

use eigenpath::experiments::{burn_in, compare_curves, ExperimentConfig, Learner};

fn main() -> eigenpath::Result<()> {
    let cfg = ExperimentConfig::default();
    let mdp = cfg.build_mdp()?;
    let policy = cfg.build_policy(&mdp)?;
    let (curves, _) = compare_curves(&cfg, &mdp, &policy, false)?;

    println!(
        "beta {}, lr {}, gamma {}, {} seeds, {} steps",
        cfg.beta,
        cfg.lr,
        cfg.gamma,
        cfg.seeds.len(),
        cfg.steps
    );
    for step in [0, 500, 1000, 2500, cfg.steps] {
        let row: Vec<String> = curves
            .iter()
            .map(|c| format!("{}: {:.4e}", c.learner, c.distance.mean[step]))
            .collect();
        println!("step {step:>5}  distance  {}", row.join("  "));
    }
    for c in &curves {
        println!(
            "{:<9} final mean |Q - Q*| = {:.4e} (std {:.2e})",
            c.learner.as_str(),
            c.abs_error.mean[cfg.steps],
            c.abs_error.std[cfg.steps]
        );
    }
    let td = curves.iter().find(|c| c.learner == Learner::Td).expect("td runs by default");
    let erc = curves.iter().find(|c| c.learner == Learner::Erc).expect("erc runs by default");
    let above = (burn_in(cfg.steps)..=cfg.steps)
        .filter(|&k| erc.distance.mean[k] > td.distance.mean[k])
        .count();
    println!("steps after burn-in where erc is farther from span{{e}} than td: {above}");
    Ok(())
}
