mod common;

use eigenpath::dynamics::{closed_form_error, discrete_td_sweep, run_learner, Stepper};
use eigenpath::envs::{build_cliffwalking, build_frozenlake, min_horizon, monte_carlo_q, random_mdp};
use eigenpath::erc::{erc_star_update_sweep, erc_update_sweep, ErcConfig};
use eigenpath::experiments::{constructed_instance, ExperimentConfig};
use eigenpath::numeric::sup_distance;
use eigenpath::spectral::{decompose_error, distance_to_one_eigensubspace, eigendecompose, predict_error_trajectory};
use eigenpath::{build_induced_transition, solve_q_star, value_iteration_oracle, Policy, QTable, TabularMdp};
use rand::Rng;

#[test]
fn erc_update_matches_finite_difference_gradient() {
    // random 3-state 2-action MDP, beta 0.3, lr 0.05, h 1e-6
    let mdp = random_mdp(3, 2, 0.9, 11).unwrap();
    let pi = Policy::uniform(3, 2);
    let q = common::random_table(&mut common::rng(5), 3, 2, 2.0);
    let cfg = ErcConfig::new(0.3, 0.05);
    let next = erc_update_sweep(&mdp, &pi, &q, &cfg, 0).unwrap();
    let gap = common::fd_relative_gap(&mdp, &pi, &q, &next, 0.3, 0.05, 1e-6);
    assert!(gap <= 1e-5, "relative gap {gap:e}");
}

#[test]
fn literal_double_centering_fails_the_gradient_oracle() {
    // q + lr((1+beta)(BQ-q) - 2 beta mean(BQ-q)) is not a gradient step of
    // the objective; the oracle must be able to tell.
    let mdp = random_mdp(3, 2, 0.9, 2).unwrap();
    let pi = Policy::uniform(3, 2);
    let q = common::random_table(&mut common::rng(8), 3, 2, 2.0);
    let (beta, lr) = (0.3, 0.05);
    let bq = eigenpath::bellman_backup(&mdp, &pi, &q).unwrap();
    let diff: Vec<f64> = bq.as_slice().iter().zip(q.as_slice()).map(|(b, x)| b - x).collect();
    let m = diff.iter().sum::<f64>() / diff.len() as f64;
    let doubled = QTable::new(
        3,
        2,
        q.as_slice()
            .iter()
            .zip(&diff)
            .map(|(x, d)| x + lr * ((1.0 + beta) * d - 2.0 * beta * m))
            .collect(),
    )
    .unwrap();
    assert!(common::fd_relative_gap(&mdp, &pi, &q, &doubled, beta, lr, 1e-6) > 1e-3);
}

#[test]
fn projection_matches_grid_search() {
    let mut rng = common::rng(21);
    for _ in 0..5 {
        let v: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let candidates = 100_000;
        let (mut best_c, mut best_d) = (lo, f64::INFINITY);
        for k in 0..candidates {
            let c = lo + (hi - lo) * k as f64 / (candidates - 1) as f64;
            let d = v.iter().map(|x| (x - c).powi(2)).sum::<f64>().sqrt();
            if d < best_d {
                best_c = c;
                best_d = d;
            }
        }
        let proj = eigenpath::spectral::project_to_one_eigensubspace(&v).unwrap();
        let spacing = (hi - lo) / (candidates - 1) as f64;
        assert!((proj[0] - best_c).abs() <= spacing);
        let d = distance_to_one_eigensubspace(&v);
        assert!(d <= best_d + 1e-12 && best_d - d < 1e-8, "{d} vs grid {best_d}");
    }
}

fn check_against_value_iteration(mdp: &TabularMdp, pi: &Policy) {
    let exact = solve_q_star(mdp, pi).unwrap();
    let vi = value_iteration_oracle(mdp, pi, 1e-13).unwrap();
    let gap = exact.sup_distance(&vi.q);
    assert!(gap < 1e-8, "gap {gap:e}");
}

#[test]
fn exact_solve_agrees_with_value_iteration() {
    let fl = build_frozenlake();
    check_against_value_iteration(&fl, &Policy::uniform(16, 4));
    let cw = build_cliffwalking();
    check_against_value_iteration(&cw, &Policy::uniform(48, 4));
    let mut rng = common::rng(3);
    for seed in 0..20 {
        let (ns, na) = (rng.random_range(1..=10), rng.random_range(1..=4));
        let mdp = random_mdp(ns, na, 0.95, seed).unwrap();
        check_against_value_iteration(&mdp, &common::random_policy(&mut rng, ns, na));
    }
}

/// Slippery FrozenLake written out from the rules: intended direction and
/// both perpendicular ones with 1/3 each, walls keep the agent in place,
/// holes and the goal absorb, reward 1 on entering the goal.
fn frozenlake_by_hand(s: usize, a: usize) -> (Vec<f64>, f64) {
    const MAP: [&str; 4] = ["SFFF", "FHFH", "FFFH", "HFFG"];
    let cell = |s: usize| MAP[s / 4].as_bytes()[s % 4];
    let mut probs = vec![0.0; 16];
    if matches!(cell(s), b'H' | b'G') {
        probs[s] = 1.0;
        return (probs, 0.0);
    }
    let mut reward = 0.0;
    for dir in [(a + 3) % 4, a, (a + 1) % 4] {
        let (r, c) = ((s / 4) as i32, (s % 4) as i32);
        // 0 left, 1 down, 2 right, 3 up
        let (dr, dc) = [(0, -1), (1, 0), (0, 1), (-1, 0)][dir];
        let (nr, nc) = ((r + dr).clamp(0, 3), (c + dc).clamp(0, 3));
        let next = (nr * 4 + nc) as usize;
        probs[next] += 1.0 / 3.0;
        if cell(next) == b'G' {
            reward += 1.0 / 3.0;
        }
    }
    (probs, reward)
}

#[test]
fn frozenlake_entries_match_hand_enumeration() {
    let mdp = build_frozenlake();
    let mut rng = common::rng(99);
    for _ in 0..10 {
        let (s, a, s2) = (rng.random_range(0..16), rng.random_range(0..4), rng.random_range(0..16));
        let (probs, reward) = frozenlake_by_hand(s, a);
        assert!((mdp.p(s, a, s2) - probs[s2]).abs() < 1e-15, "P[{s}][{a}][{s2}]");
        assert!((mdp.r(s, a) - reward).abs() < 1e-15, "r[{s}][{a}]");
    }
    for s in 0..16 {
        for a in 0..4 {
            let (probs, reward) = frozenlake_by_hand(s, a);
            assert_eq!(mdp.next_state_probs(s, a).len(), 16);
            assert!(sup_distance(mdp.next_state_probs(s, a), &probs) < 1e-15);
            assert!((mdp.r(s, a) - reward).abs() < 1e-15);
        }
    }
}

#[test]
fn cliffwalking_spot_checks() {
    let mdp = build_cliffwalking();
    // 0 up, 1 right, 2 down, 3 left; start 36, goal 47, cliff 37..=46
    assert_eq!(mdp.p(36, 1, 36), 1.0);
    assert_eq!(mdp.r(36, 1), -100.0);
    assert_eq!(mdp.p(36, 0, 24), 1.0);
    assert_eq!(mdp.r(36, 0), -1.0);
    assert_eq!(mdp.p(35, 2, 47), 1.0);
    assert_eq!(mdp.r(35, 2), -1.0);
    assert_eq!(mdp.p(47, 3, 47), 1.0);
    assert_eq!(mdp.r(47, 3), 0.0);
    assert_eq!(mdp.p(0, 0, 0), 1.0);
}

#[test]
fn spectral_prediction_matches_closed_form() {
    let p = constructed_instance();
    let decomp = eigendecompose(&p).unwrap();
    let q0 = QTable::new(4, 1, vec![1.0, -2.0, 0.5, 3.0]).unwrap();
    let zero = QTable::zeros(4, 1);
    let coeffs = decompose_error(&decomp, q0.as_slice()).unwrap();
    let times = [0.5, 1.0, 5.0];
    let predicted = predict_error_trajectory(&decomp, &coeffs, 0.9, &times).unwrap();
    for (t, pred) in times.iter().zip(&predicted) {
        let exact = closed_form_error(&p, 0.9, &q0, &zero, *t).unwrap();
        assert!(sup_distance(pred, &exact) < 1e-10, "t = {t}");
    }

    // a generic random MDP, possibly with complex eigenpairs
    let mdp = random_mdp(3, 2, 0.9, 4).unwrap();
    let pi = Policy::uniform(3, 2);
    let p = build_induced_transition(&mdp, &pi).unwrap();
    let decomp = eigendecompose(&p).unwrap();
    assert!(decomp.diagonalizable);
    let q0 = common::random_table(&mut common::rng(1), 3, 2, 1.0);
    let q_star = solve_q_star(&mdp, &pi).unwrap();
    let e0: Vec<f64> = q0.as_slice().iter().zip(q_star.as_slice()).map(|(a, b)| a - b).collect();
    let coeffs = decompose_error(&decomp, &e0).unwrap();
    let predicted = predict_error_trajectory(&decomp, &coeffs, 0.9, &times).unwrap();
    for (t, pred) in times.iter().zip(&predicted) {
        let exact = closed_form_error(&p, 0.9, &q0, &q_star, *t).unwrap();
        assert!(sup_distance(pred, &exact) < 1e-9, "t = {t}");
    }
}

#[test]
fn erc_star_keeps_q_star_fixed() {
    let mdp = build_frozenlake();
    let pi = Policy::uniform(16, 4);
    let q_star = solve_q_star(&mdp, &pi).unwrap();
    let cfg = ErcConfig::new(0.3, 0.01);
    let next = erc_star_update_sweep(&mdp, &pi, &q_star, &q_star, &cfg, 0).unwrap();
    assert!(next.sup_distance(&q_star) <= 1e-12);
}

#[test]
fn td_sweeps_reach_q_star_on_a_two_state_chain() {
    // 0 -> 1 with reward 1, 1 absorbing with reward 0.5; gamma 0.5 so the
    // slowest mode contracts by 1 - 0.1 * 0.5 per sweep
    let mdp = TabularMdp::new(2, 1, vec![0.0, 1.0, 0.0, 1.0], vec![1.0, 0.5], 0.5, vec![1.0, 0.0]).unwrap();
    let pi = Policy::uniform(2, 1);
    let q_star = solve_q_star(&mdp, &pi).unwrap();
    assert!((q_star.get(1, 0) - 1.0).abs() < 1e-15 && (q_star.get(0, 0) - 1.5).abs() < 1e-15);
    let mut q = QTable::zeros(2, 1);
    for _ in 0..500 {
        q = discrete_td_sweep(&mdp, &pi, &q, 0.1).unwrap();
    }
    assert!(q.sup_distance(&q_star) < 1e-8);
}

#[test]
fn monte_carlo_error_shrinks_with_more_episodes() {
    let mdp = build_frozenlake();
    let pi = Policy::uniform(16, 4);
    let q_star = solve_q_star(&mdp, &pi).unwrap();
    let h = min_horizon(0.9);
    let improved = (0..5u64)
        .filter(|&seed| {
            let small = monte_carlo_q(&mdp, &pi, 10_000, h, seed).unwrap().sup_error(&q_star);
            let large = monte_carlo_q(&mdp, &pi, 100_000, h, seed).unwrap().sup_error(&q_star);
            large < small
        })
        .count();
    assert!(improved >= 4, "improved in {improved} of 5 seeds");
}

#[test]
fn monte_carlo_is_thread_count_independent() {
    let mdp = build_frozenlake();
    let pi = Policy::uniform(16, 4);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| monte_carlo_q(&mdp, &pi, 5_000, min_horizon(0.9), 3).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn erc_lowers_trajectory_mean_bellman_error_variance() {
    // R_push recomputed from a dense P^pi as the population variance of q - Bq
    let cfg = ExperimentConfig::default();
    let mdp = cfg.build_mdp().unwrap();
    let pi = cfg.build_policy(&mdp).unwrap();
    let q_star = solve_q_star(&mdp, &pi).unwrap();
    let dense = common::dense_p_pi(&mdp, &pi);
    let bellman_variance = |q: &[f64]| {
        let b: Vec<f64> = dense
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let pq: f64 = row.iter().zip(q).map(|(p, v)| p * v).sum();
                q[i] - mdp.reward()[i] - mdp.gamma() * pq
            })
            .collect();
        common::var(&b)
    };
    let trajectory_mean = |stepper: &Stepper| {
        let mut total = 0.0;
        for &seed in &cfg.seeds {
            let q0 = cfg.initial_table(&mdp, seed);
            let mut sum = 0.0;
            run_learner(&mdp, &pi, &q0, &q_star, stepper, cfg.steps, |_, _, q| {
                sum += bellman_variance(q.as_slice());
            })
            .unwrap();
            total += sum / (cfg.steps + 1) as f64;
        }
        total / cfg.seeds.len() as f64
    };
    let td = trajectory_mean(&Stepper::Td { lr: 0.01 });
    let erc = trajectory_mean(&Stepper::Erc(ErcConfig::new(0.3, 0.01)));
    assert!(erc < td, "erc {erc:e} vs td {td:e}");
}
