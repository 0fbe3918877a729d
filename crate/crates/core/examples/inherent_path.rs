//! The inherent path of TD learning.
//!
//! From a perturbed `Q0`, expected TD sweeps first shrink the component of
//! the error `Q_t - Q*` orthogonal to `e`, then the remaining constant
//! offset. The distance to `span{e}` therefore reaches 10% of its initial
//! value before the error norm does. The ODE limit is checked against the
//! matrix-exponential closed form along the way.
//!
//! ```bash
//! cargo run -p eigenpath --example inherent_path
//! ```

use eigenpath::dynamics::{closed_form_error, integrate_td_ode};
use eigenpath::envs::build_frozenlake;
use eigenpath::experiments::{inherent_paths, ExperimentConfig};
use eigenpath::numeric::sup_distance;
use eigenpath::{build_induced_transition, solve_q_star, QTable};

fn main() -> eigenpath::Result<()> {
    let cfg = ExperimentConfig::default();
    let mdp = cfg.build_mdp()?;
    let policy = cfg.build_policy(&mdp)?;

    println!("seed  distance hits 10%  norm hits 10%");
    let runs = inherent_paths(&cfg, &mdp, &policy)?;
    let step = |hit: Option<usize>| hit.map_or_else(|| "never".to_string(), |k| k.to_string());
    for run in &runs {
        println!(
            "{:>4}  {:>17}  {:>13}",
            run.seed.unwrap_or_default(),
            step(run.distance_hit),
            step(run.norm_hit)
        );
    }
    let leading = runs.iter().filter(|r| r.distance_leads()).count();
    println!("distance leads in {leading} of {} runs", runs.len());

    let mdp = build_frozenlake();
    let q0 = QTable::zeros_for(&mdp);
    let q_star = solve_q_star(&mdp, &policy)?;
    let p_pi = build_induced_transition(&mdp, &policy)?;
    for t in [1.0, 5.0, 20.0] {
        let exact = closed_form_error(&p_pi, mdp.gamma(), &q0, &q_star, t)?;
        let rk4 = integrate_td_ode(&mdp, &policy, &q0, t, 1e-3)?;
        println!(
            "t = {t:>4}: closed form vs RK4 sup gap {:.2e}",
            sup_distance(&exact, rk4.last_error().expect("non-empty"))
        );
    }
    Ok(())
}
