//! Exact policy evaluation on slippery FrozenLake.
//!
//! Solves `(I - gamma P^pi) Q = r` for the uniform policy, cross-checks the
//! answer against value iteration and prints `Q*` as a state x action grid.
//!
//! ```bash
//! cargo run -p eigenpath --example solve_frozenlake
//! ```

use eigenpath::envs::build_frozenlake;
use eigenpath::{solve_q_star, value_iteration_oracle, Policy};

fn main() -> eigenpath::Result<()> {
    let mdp = build_frozenlake();
    let policy = Policy::uniform(mdp.n_states(), mdp.n_actions());

    let q_star = solve_q_star(&mdp, &policy)?;
    let oracle = value_iteration_oracle(&mdp, &policy, 1e-12)?;
    println!(
        "value iteration: {} sweeps, sup gap to the direct solve {:.2e}",
        oracle.iterations,
        q_star.sup_distance(&oracle.q)
    );

    println!("state      left      down     right        up");
    for s in 0..mdp.n_states() {
        let row: Vec<String> = (0..mdp.n_actions()).map(|a| format!("{:9.6}", q_star.get(s, a))).collect();
        println!("{s:>5} {}", row.join(" "));
    }
    let absorbing: Vec<usize> = (0..mdp.n_states()).filter(|&s| mdp.absorbing_states()[s]).collect();
    println!("absorbing states (holes and goal): {absorbing:?}");
    Ok(())
}
