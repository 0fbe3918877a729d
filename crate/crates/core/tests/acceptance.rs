//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs as a plain binary (`harness = false`) so every line is printed by a
//! normal `cargo test`.

mod common;

use std::time::{Duration, Instant};

use eigenpath::dynamics::{record_inherent_path, Stepper};
use eigenpath::envs::{build_cliffwalking, build_frozenlake, min_horizon, monte_carlo_q, random_mdp};
use eigenpath::erc::{erc_update_sweep, r_push, ErcConfig};
use eigenpath::experiments::{
    burn_in, check_closed_form, check_erc_convergence, check_rate, cmd_compare, cmd_dispersion, cmd_path, cmd_solve,
    cmd_verify, compare_curves, constructed_instance, inherent_paths, CheckStatus, ExperimentConfig, Learner,
};
use eigenpath::spectral::eigendecompose;
use eigenpath::{build_induced_transition, solve_q_star, value_iteration_oracle, InducedTransition, Policy};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// 1. Dominant eigenpair of fuzzed stochastic matrices is (1, e).
fn eigenpair_property() -> Outcome {
    let mut rng = common::rng(2024);
    let (mut worst_lambda, mut worst_cos): (f64, f64) = (0.0, 1.0);
    for k in 0..1000 {
        let p = if k % 2 == 0 {
            let n = rng.random_range(1..=40);
            InducedTransition::from_matrix(common::fuzz_stochastic(&mut rng, n)).unwrap()
        } else {
            let (ns, na) = (rng.random_range(1..=8), rng.random_range(1..=4));
            let mdp = random_mdp(ns, na, 0.9, rng.random()).unwrap();
            build_induced_transition(&mdp, &common::random_policy(&mut rng, ns, na)).unwrap()
        };
        let d = eigendecompose(&p).unwrap();
        let n = d.dim();
        worst_lambda = worst_lambda.max((d.eigenvalues[0] - 1.0).norm());
        let h = d.eigenvector(0);
        let dot: f64 = h.iter().map(|z| z.re).sum::<f64>();
        let norm: f64 = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        worst_cos = worst_cos.min(dot.abs() / (norm * (n as f64).sqrt()));
    }
    outcome(
        worst_lambda <= 1e-8 && worst_cos >= 1.0 - 1e-8,
        format!("max |lambda_1 - 1| {worst_lambda:.2e}, min |cos(h_1, e)| 1 - {:.2e}", 1.0 - worst_cos),
    )
}

/// 2. Direct solve agrees with value iteration.
fn exact_solve() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut check = |mdp: &eigenpath::TabularMdp, pi: &Policy| {
        let exact = solve_q_star(mdp, pi).unwrap();
        let vi = value_iteration_oracle(mdp, pi, 1e-13).unwrap();
        worst = worst.max(exact.sup_distance(&vi.q));
    };
    check(&build_frozenlake(), &Policy::uniform(16, 4));
    check(&build_cliffwalking(), &Policy::uniform(48, 4));
    let mut rng = common::rng(77);
    for seed in 0..100 {
        let (ns, na) = (rng.random_range(1..=10), rng.random_range(1..=4));
        let mdp = random_mdp(ns, na, 0.9, seed).unwrap();
        check(&mdp, &common::random_policy(&mut rng, ns, na));
    }
    outcome(worst <= 1e-8, format!("max sup gap {worst:.2e} over 102 MDPs"))
}

/// 3. Matrix-exponential trajectory vs RK4 on FrozenLake.
fn closed_form_vs_ode() -> Outcome {
    let mdp = build_frozenlake();
    let c = check_closed_form(&mdp, &Policy::uniform(16, 4), &[0.1, 1.0, 5.0, 20.0], 1e-3, 1e-6).unwrap();
    outcome(c.status == CheckStatus::Pass, format!("max sup gap {:.2e}", c.measured))
}

/// 4. Decay rate of the dominant error coefficient.
fn dominant_rate() -> Outcome {
    let c = check_rate(&constructed_instance(), 0.9).unwrap();
    outcome(c.status == CheckStatus::Pass, c.detail)
}

/// 5. Distance to span{e} reaches 10% before the error norm.
fn inherent_path() -> Outcome {
    let cfg = ExperimentConfig {
        learner: Learner::Td,
        ..Default::default()
    };
    let mdp = cfg.build_mdp().unwrap();
    let runs = inherent_paths(&cfg, &mdp, &cfg.build_policy(&mdp).unwrap()).unwrap();
    let leading = runs.iter().filter(|r| r.distance_leads()).count();
    outcome(leading >= 9, format!("distance leads in {leading}/{} runs", runs.len()))
}

/// 6. ERC sweep equals the gradient step, by finite differences.
fn fd_gradient() -> Outcome {
    let mut rng = common::rng(606);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let (ns, na) = (rng.random_range(2..=5), rng.random_range(1..=3));
        let mdp = random_mdp(ns, na, 0.9, 1000 + k).unwrap();
        let pi = common::random_policy(&mut rng, ns, na);
        let q = common::random_table(&mut rng, ns, na, 2.0);
        for beta in [0.0, 0.1, 0.3, 1.0] {
            let lr = 0.05;
            let next = erc_update_sweep(&mdp, &pi, &q, &ErcConfig::new(beta, lr), 0).unwrap();
            worst = worst.max(common::fd_relative_gap(&mdp, &pi, &q, &next, beta, lr, 1e-6));
        }
    }
    outcome(worst <= 1e-5, format!("max relative error {worst:.2e}"))
}

/// 7. ERC converges to the regularized fixed point.
fn erc_convergence() -> Outcome {
    let cfg = ErcConfig::new(0.3, 0.01);
    let mut details = Vec::new();
    let mut pass = true;
    for (name, mdp) in [("frozenlake", build_frozenlake()), ("cliffwalking", build_cliffwalking())] {
        let pi = Policy::uniform(mdp.n_states(), mdp.n_actions());
        let run = check_erc_convergence(&mdp, &pi, &cfg, 1_000_000).unwrap();
        // residual recomputed from P^pi: q - (r + shift + gamma P q)
        let p = build_induced_transition(&mdp, &pi).unwrap();
        let n = p.dim();
        let q = run.q.as_slice();
        let bellman_error: Vec<f64> = (0..n)
            .map(|i| {
                let pq: f64 = (0..n).map(|j| p.matrix()[(i, j)] * q[j]).sum();
                q[i] - mdp.reward()[i] - mdp.gamma() * pq
            })
            .collect();
        let shift = 0.3 / 1.3 * bellman_error.iter().sum::<f64>() / n as f64;
        let residual = bellman_error.iter().map(|b| (b - shift).abs()).fold(0.0, f64::max);
        pass &= run.converged && run.last_change < 1e-10 && residual <= 1e-7;
        details.push(format!("{name}: {} sweeps, residual {residual:.2e}", run.sweeps));
    }
    outcome(pass, details.join("; "))
}

/// 8. ERC closer to span{e} than TD after burn-in, smaller final error.
fn erc_vs_td() -> Outcome {
    let cfg = ExperimentConfig {
        learners: vec![Learner::Td, Learner::Erc],
        ..Default::default()
    };
    let mdp = cfg.build_mdp().unwrap();
    let (curves, _) = compare_curves(&cfg, &mdp, &cfg.build_policy(&mdp).unwrap(), false).unwrap();
    let (td, erc) = (&curves[0], &curves[1]);
    let above = (burn_in(cfg.steps)..=cfg.steps)
        .filter(|&k| erc.distance.mean[k] > td.distance.mean[k])
        .count();
    let (td_final, erc_final) = (td.abs_error.mean[cfg.steps], erc.abs_error.mean[cfg.steps]);
    outcome(
        above == 0 && erc_final <= td_final,
        format!("steps with erc above td after burn-in: {above}; final mean |error| erc {erc_final:.3e} vs td {td_final:.3e}"),
    )
}

/// 9. var(Q) + var(BQ) - 2 cov(Q, BQ) = R_push.
fn variance_identity() -> Outcome {
    let mut rng = common::rng(909);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=64);
        let q = common::random_table(&mut rng, n, 1, 5.0);
        let t = common::random_table(&mut rng, n, 1, 5.0);
        let rhs = common::var(q.as_slice()) + common::var(t.as_slice()) - 2.0 * common::cov(q.as_slice(), t.as_slice());
        worst = worst.max((r_push(&q, &t).unwrap() - rhs).abs());
    }
    outcome(worst <= 1e-10, format!("max gap {worst:.2e}"))
}

/// 10. Monte-Carlo estimate within 0.02 of Q*.
fn monte_carlo() -> Outcome {
    let mdp = build_frozenlake();
    let pi = Policy::uniform(16, 4);
    let q_star = solve_q_star(&mdp, &pi).unwrap();
    let est = monte_carlo_q(&mdp, &pi, 100_000, min_horizon(0.9), 0).unwrap();
    let err = est.sup_error(&q_star);
    outcome(err <= 0.02, format!("sup error {err:.4} with 1e5 episodes"))
}

/// 11. beta = 0 reduces ERC and ERC* to TD bit for bit.
fn beta_zero_reduction() -> Outcome {
    let mut mismatches = 0;
    let mut traces = 0;
    let mdps = [
        build_frozenlake(),
        build_cliffwalking(),
        random_mdp(5, 3, 0.7, 1).unwrap(),
        random_mdp(2, 2, 0.0, 2).unwrap(),
    ];
    for mdp in &mdps {
        let pi = Policy::uniform(mdp.n_states(), mdp.n_actions());
        let q0 = common::random_table(&mut common::rng(mdp.n_pairs() as u64), mdp.n_states(), mdp.n_actions(), 1.0);
        for lr in [0.01, 0.5, 1.0] {
            let td = record_inherent_path(mdp, &pi, &q0, &Stepper::Td { lr }, 200).unwrap();
            let zero = ErcConfig::new(0.0, lr);
            for cfg in [zero.clone(), zero.clone().with_truncation(0.1, 0.2)] {
                for stepper in [Stepper::Erc(cfg.clone()), Stepper::ErcStar(cfg)] {
                    let other = record_inherent_path(mdp, &pi, &q0, &stepper, 200).unwrap();
                    traces += 1;
                    if other.to_csv(true) != td.to_csv(true) {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        beta: 0.0,
        steps: 300,
        learners: vec![Learner::Td, Learner::Erc, Learner::ErcStar],
        out: dir.path().to_path_buf(),
        ..Default::default()
    };
    let compare = cmd_compare(&cfg).unwrap();
    let same_curves = compare.curves[1].distance == compare.curves[0].distance
        && compare.curves[1].abs_error == compare.curves[0].abs_error
        && compare.curves[2].abs_error == compare.curves[0].abs_error;
    traces += 1;
    if !same_curves {
        mismatches += 1;
    }
    outcome(mismatches == 0, format!("{mismatches} of {traces} traces differ from td"))
}

/// 12. Same config, byte-identical CSV output.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run_all = |tag: &str, threads: &str| -> Vec<(String, Vec<u8>)> {
        std::env::set_var("EIGENPATH_THREADS", threads);
        let base = ExperimentConfig {
            steps: 400,
            full: true,
            episodes: 3000,
            mc_every: 100,
            ..Default::default()
        };
        let mut files = Vec::new();
        let mut collect = |sub: &str, produced: Vec<std::path::PathBuf>| {
            for p in produced {
                if p.extension().is_some_and(|e| e == "csv") {
                    let name = format!("{sub}/{}", p.file_name().unwrap().to_string_lossy());
                    files.push((name, std::fs::read(&p).unwrap()));
                }
            }
        };
        let at = |sub: &str| dir.path().join(format!("{tag}-{sub}"));
        let cfg = |sub: &str, learner| ExperimentConfig {
            out: at(sub),
            learner,
            ..base.clone()
        };
        collect("solve", cmd_solve(&cfg("solve", Learner::Td)).unwrap().files);
        collect("path", cmd_path(&cfg("path", Learner::Td)).unwrap().files);
        collect("ode", cmd_path(&cfg("ode", Learner::Ode)).unwrap().files);
        collect("mc", cmd_path(&cfg("mc", Learner::Mc)).unwrap().files);
        collect("compare", cmd_compare(&cfg("compare", Learner::Td)).unwrap().files);
        collect("dispersion", cmd_dispersion(&cfg("dispersion", Learner::Td)).unwrap().files);
        collect("verify", cmd_verify(&cfg("verify", Learner::Td)).unwrap().files);
        std::env::remove_var("EIGENPATH_THREADS");
        files
    };
    let first = run_all("a", "1");
    let second = run_all("b", "4");
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    outcome(
        differing.is_empty() && first.len() == second.len() && !first.is_empty(),
        format!("{} CSV files compared, differing: {differing:?}", first.len()),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("eigenpair of fuzzed P^pi", eigenpair_property, Duration::from_secs(30)),
        ("exact solve vs value iteration", exact_solve, Duration::from_secs(10)),
        ("closed form vs RK4", closed_form_vs_ode, Duration::from_secs(30)),
        ("dominant coefficient rate", dominant_rate, Duration::from_secs(5)),
        ("inherent path shape", inherent_path, Duration::from_secs(60)),
        ("ERC finite-difference gradient", fd_gradient, Duration::from_secs(60)),
        ("ERC convergence", erc_convergence, Duration::from_secs(120)),
        ("ERC vs TD comparison", erc_vs_td, Duration::from_secs(120)),
        ("variance identity", variance_identity, Duration::from_secs(5)),
        ("Monte-Carlo ground truth", monte_carlo, Duration::from_secs(120)),
        ("beta = 0 reduction", beta_zero_reduction, Duration::from_secs(10)),
        ("determinism", determinism, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let pass = result.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {name}: {} ({:.2}s{})",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail,
            elapsed.as_secs_f64(),
            if in_time { String::new() } else { format!(", over the {}s budget", budget.as_secs()) }
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
