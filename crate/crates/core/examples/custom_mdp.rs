//! Building, saving and reloading a hand-written MDP and policy.
//!
//! A two-state chain: state 0 moves to state 1 with reward 1; state 1 loops
//! on itself with reward 0.5. The JSON layout is the one the CLI reads.
//!
//! ```bash
//! cargo run -p eigenpath --example custom_mdp
//! ```

use eigenpath::{bellman_backup, solve_q_star, Policy, QTable, TabularMdp};

fn main() -> eigenpath::Result<()> {
    let dir = std::env::temp_dir().join("eigenpath-custom-mdp");
    std::fs::create_dir_all(&dir).map_err(|e| eigenpath::Error::Config(e.to_string()))?;

    // transition is flat over (state, action, next_state)
    let mdp = TabularMdp::new(2, 1, vec![0.0, 1.0, 0.0, 1.0], vec![1.0, 0.5], 0.9, vec![1.0, 0.0])?;
    let path = dir.join("chain.json");
    mdp.save(&path)?;
    let reloaded = TabularMdp::load(&path)?;
    assert_eq!(reloaded, mdp);
    println!("round-tripped {}", path.display());

    let policy = Policy::uniform(2, 1);
    let q_star = solve_q_star(&reloaded, &policy)?;
    println!("Q* = {:?}", q_star.as_slice());

    let backup = bellman_backup(&reloaded, &policy, &q_star)?;
    println!("|BQ* - Q*| = {:.1e}", backup.sup_distance(&q_star));

    let q = QTable::new(2, 1, vec![0.0, 0.0])?;
    println!("one backup from zero: {:?}", bellman_backup(&reloaded, &policy, &q)?.as_slice());
    Ok(())
}
