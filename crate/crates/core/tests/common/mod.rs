//! Oracles shared by the integration tests. Nothing here calls the library
//! routine it is used to check.
#![allow(dead_code)]

use eigenpath::{bellman_backup, Policy, QTable, TabularMdp};
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Row-stochastic matrix mixing dense, sparse and one-hot rows.
pub fn fuzz_stochastic(rng: &mut ChaCha8Rng, n: usize) -> Mat<f64> {
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        match rng.random_range(0..3) {
            0 => {
                let w: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
                let s: f64 = w.iter().sum();
                for j in 0..n {
                    m[(i, j)] = w[j] / s;
                }
            }
            1 => {
                let k = rng.random_range(1..=n.min(3));
                let cols: Vec<usize> = (0..k).map(|_| rng.random_range(0..n)).collect();
                for &c in &cols {
                    m[(i, c)] += 1.0 / k as f64;
                }
            }
            _ => m[(i, rng.random_range(0..n))] = 1.0,
        }
    }
    m
}

pub fn random_policy(rng: &mut ChaCha8Rng, n_states: usize, n_actions: usize) -> Policy {
    let mut probs = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states {
        let w: Vec<f64> = (0..n_actions).map(|_| rng.random::<f64>() + 0.05).collect();
        let s: f64 = w.iter().sum();
        probs.extend(w.iter().map(|x| x / s));
    }
    Policy::new(n_states, n_actions, probs).unwrap()
}

pub fn random_table(rng: &mut ChaCha8Rng, n_states: usize, n_actions: usize, scale: f64) -> QTable {
    let values = (0..n_states * n_actions).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
    QTable::new(n_states, n_actions, values).unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Two-pass population variance.
pub fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

pub fn cov(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64
}

/// `mean((q - y)^2) + beta * var(q - y)` with the target `y` held fixed.
pub fn erc_objective(q: &[f64], y: &[f64], beta: f64) -> f64 {
    let b: Vec<f64> = q.iter().zip(y).map(|(a, c)| a - c).collect();
    mean(&b.iter().map(|x| x * x).collect::<Vec<_>>()) + beta * var(&b)
}

/// Relative gap between `actual_increment` and `-lr (N/2) grad` of the ERC
/// objective, the gradient taken by central differences with step `h`.
pub fn fd_relative_gap(
    mdp: &TabularMdp,
    policy: &Policy,
    q: &QTable,
    actual_next: &QTable,
    beta: f64,
    lr: f64,
    h: f64,
) -> f64 {
    let y = bellman_backup(mdp, policy, q).unwrap().into_vec();
    let base = q.as_slice();
    let n = base.len();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let mut plus = base.to_vec();
        let mut minus = base.to_vec();
        plus[i] += h;
        minus[i] -= h;
        let grad = (erc_objective(&plus, &y, beta) - erc_objective(&minus, &y, beta)) / (2.0 * h);
        let predicted = -lr * 0.5 * n as f64 * grad;
        let actual = actual_next.as_slice()[i] - base[i];
        num += (actual - predicted).powi(2);
        den += actual * actual;
    }
    num.sqrt() / den.sqrt().max(f64::MIN_POSITIVE)
}

/// Dense `P^pi` assembled entry by entry from the MDP accessors.
pub fn dense_p_pi(mdp: &TabularMdp, policy: &Policy) -> Vec<Vec<f64>> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut m = vec![vec![0.0; ns * na]; ns * na];
    for s in 0..ns {
        for a in 0..na {
            for s2 in 0..ns {
                for a2 in 0..na {
                    m[s * na + a][s2 * na + a2] = mdp.p(s, a, s2) * policy.prob(s2, a2);
                }
            }
        }
    }
    m
}
