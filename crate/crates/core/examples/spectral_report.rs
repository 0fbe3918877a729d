//! Spectrum of the state-action transition matrix `P^pi`.
//!
//! The dominant eigenvalue of any row-stochastic matrix is 1 with the
//! all-ones direction `e` as eigenvector. FrozenLake has one unit eigenvalue
//! per absorbing state, so its spectrum has ties; the constructed 4x4 instance
//! has a strictly ordered real spectrum.
//!
//! ```bash
//! cargo run -p eigenpath --example spectral_report
//! ```

use eigenpath::envs::build_frozenlake;
use eigenpath::experiments::constructed_instance;
use eigenpath::spectral::{
    check_assumption_one, distance_to_one_eigensubspace, eigendecompose, project_to_one_eigensubspace, ASSUMPTION_TOL,
};
use eigenpath::{build_induced_transition, InducedTransition, Policy};

fn report(name: &str, p_pi: &InducedTransition) -> eigenpath::Result<()> {
    let decomp = eigendecompose(p_pi)?;
    let assumption = check_assumption_one(&decomp, ASSUMPTION_TOL);
    println!("{name}: {} x {}", p_pi.dim(), p_pi.dim());
    for (i, lambda) in decomp.eigenvalues.iter().take(8).enumerate() {
        println!("  lambda[{i}] = {:+.10} {:+.3e}i", lambda.re, lambda.im);
    }
    let top = decomp.eigenvector(0);
    let cos = top.iter().map(|z| z.re).sum::<f64>().abs() / (p_pi.dim() as f64).sqrt();
    println!("  |cos(h_1, e)| = {cos:.12}");
    println!("  eigenbasis sigma_min {:.3e}", decomp.basis_sigma_min);
    println!("  {}", assumption.summary());
    Ok(())
}

fn main() -> eigenpath::Result<()> {
    let mdp = build_frozenlake();
    let policy = Policy::uniform(mdp.n_states(), mdp.n_actions());
    report("frozenlake P^pi", &build_induced_transition(&mdp, &policy)?)?;
    report("constructed instance", &constructed_instance())?;

    let v = [1.0, 2.0, 6.0];
    println!(
        "projection of {v:?} onto span{{e}}: {:?}, distance {:.6}",
        project_to_one_eigensubspace(&v)?,
        distance_to_one_eigensubspace(&v)
    );
    Ok(())
}
