//! Monte-Carlo ground truth with exploring starts.
//!
//! Each episode draws its own ChaCha stream from `(seed, episode)`, so the
//! estimate is identical for any thread count.
//!
//! ```bash
//! cargo run -p eigenpath --release --example monte_carlo
//! ```

use eigenpath::envs::{build_frozenlake, min_horizon, monte_carlo_q};
use eigenpath::{solve_q_star, Policy};

fn main() -> eigenpath::Result<()> {
    let mdp = build_frozenlake();
    let policy = Policy::uniform(mdp.n_states(), mdp.n_actions());
    let q_star = solve_q_star(&mdp, &policy)?;
    let horizon = min_horizon(mdp.gamma());
    println!("horizon {horizon} (gamma^h <= 1e-10)");

    for episodes in [1_000, 10_000, 100_000] {
        let estimate = monte_carlo_q(&mdp, &policy, episodes, horizon, 7)?;
        println!(
            "{episodes:>7} episodes: sup error {:.4}, pairs never visited {}",
            estimate.sup_error(&q_star),
            estimate.undefined().len()
        );
    }
    Ok(())
}
