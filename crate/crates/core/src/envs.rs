//! Exact tabular models of the grid environments, a seeded random-MDP
//! generator, and a first-visit Monte-Carlo Q estimator.
//!
//! Terminal cells (holes, goals) are compiled to absorbing states with zero
//! reward, so the Q value of every terminal state-action pair is 0 and the
//! matrix Bellman equation applies without special cases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::dynamics::PathTrace;
use crate::error::{Error, Result};
use crate::mdp::{solve_q_star, Policy, QTable, TabularMdp};
use crate::numeric::sub;

/// Discount used when an environment is built without an explicit one.
pub const DEFAULT_GAMMA: f64 = 0.9;

/// Truncation target for Monte-Carlo returns: `gamma^horizon <= 1e-10`.
pub const MC_TAIL_TOL: f64 = 1e-10;

const EPISODE_CHUNK: usize = 1024;

/// How a move is perturbed before it is applied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SlipModel {
    Deterministic,
    /// Intended direction with probability `intended`; the remainder is split
    /// evenly between the two perpendicular directions.
    Perpendicular { intended: f64 },
}

/// Reward table for grid transitions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridRewards {
    /// Reward for any move that does not enter the goal or the cliff.
    pub step: f64,
    /// Reward for a move that enters the goal.
    pub goal: f64,
    /// Reward for a move into a cliff cell, which also resets to the start.
    pub cliff: f64,
}

/// Grid world description.
///
/// Layout characters: `S` start, `F` or `.` walkable, `H` hole (absorbing),
/// `G` goal (absorbing), `C` cliff (penalty and reset to start).
#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub name: String,
    pub layout: Vec<String>,
    /// Row/column deltas, indexed by action.
    pub actions: Vec<(i32, i32)>,
    pub slip: SlipModel,
    pub rewards: GridRewards,
}

impl EnvSpec {
    pub fn frozenlake4x4() -> Self {
        EnvSpec {
            name: "frozenlake4x4".into(),
            layout: ["SFFF", "FHFH", "FFFH", "HFFG"].map(String::from).to_vec(),
            // left, down, right, up
            actions: vec![(0, -1), (1, 0), (0, 1), (-1, 0)],
            slip: SlipModel::Perpendicular { intended: 1.0 / 3.0 },
            rewards: GridRewards {
                step: 0.0,
                goal: 1.0,
                cliff: 0.0,
            },
        }
    }

    pub fn cliffwalking() -> Self {
        let mut layout = vec![".".repeat(12); 3];
        layout.push(format!("S{}G", "C".repeat(10)));
        EnvSpec {
            name: "cliffwalking".into(),
            layout,
            // up, right, down, left
            actions: vec![(-1, 0), (0, 1), (1, 0), (0, -1)],
            slip: SlipModel::Deterministic,
            rewards: GridRewards {
                step: -1.0,
                goal: -1.0,
                cliff: -100.0,
            },
        }
    }

    fn dims(&self) -> (usize, usize) {
        (self.layout.len(), self.layout.first().map_or(0, String::len))
    }

    fn cell(&self, r: usize, c: usize) -> u8 {
        self.layout[r].as_bytes()[c]
    }

    fn start(&self) -> Result<usize> {
        let (_, cols) = self.dims();
        (0..self.layout.len())
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .find(|&(r, c)| self.cell(r, c) == b'S')
            .map(|(r, c)| r * cols + c)
            .ok_or_else(|| Error::Config(format!("{}: layout has no start cell", self.name)))
    }

    fn outcomes(&self, action: usize) -> Vec<((i32, i32), f64)> {
        let (dr, dc) = self.actions[action];
        match self.slip {
            SlipModel::Deterministic => vec![((dr, dc), 1.0)],
            SlipModel::Perpendicular { intended } => {
                let side = (1.0 - intended) / 2.0;
                vec![((-dc, dr), side), ((dr, dc), intended), ((dc, -dr), side)]
            }
        }
    }

    /// Compiles the grid into an MDP with the given discount.
    pub fn compile(&self, gamma: f64) -> Result<TabularMdp> {
        let (rows, cols) = self.dims();
        if rows == 0 || cols == 0 || self.layout.iter().any(|r| r.len() != cols) {
            return Err(Error::Config(format!("{}: layout must be a non-empty rectangle", self.name)));
        }
        let start = self.start()?;
        let (ns, na) = (rows * cols, self.actions.len());
        let mut transition = vec![0.0; ns * na * ns];
        let mut reward = vec![0.0; ns * na];
        let mut rho0 = vec![0.0; ns];
        rho0[start] = 1.0;

        for s in 0..ns {
            let (r, c) = (s / cols, s % cols);
            let terminal = matches!(self.cell(r, c), b'H' | b'G');
            for a in 0..na {
                let row = &mut transition[(s * na + a) * ns..(s * na + a + 1) * ns];
                if terminal {
                    row[s] = 1.0;
                    continue;
                }
                for ((dr, dc), prob) in self.outcomes(a) {
                    let nr = (r as i32 + dr).clamp(0, rows as i32 - 1) as usize;
                    let nc = (c as i32 + dc).clamp(0, cols as i32 - 1) as usize;
                    let (next, rew) = match self.cell(nr, nc) {
                        b'C' => (start, self.rewards.cliff),
                        b'G' => (nr * cols + nc, self.rewards.goal),
                        _ => (nr * cols + nc, self.rewards.step),
                    };
                    row[next] += prob;
                    reward[s * na + a] += prob * rew;
                }
            }
        }
        TabularMdp::new(ns, na, transition, reward, gamma, rho0)
    }
}

/// Slippery 4x4 FrozenLake with discount 0.9.
pub fn build_frozenlake() -> TabularMdp {
    EnvSpec::frozenlake4x4()
        .compile(DEFAULT_GAMMA)
        .expect("built-in layout is valid")
}

/// 4x12 CliffWalking with discount 0.9.
pub fn build_cliffwalking() -> TabularMdp {
    EnvSpec::cliffwalking()
        .compile(DEFAULT_GAMMA)
        .expect("built-in layout is valid")
}

/// MDP with flat-Dirichlet transition rows and rewards uniform in `[-1, 1]`.
pub fn random_mdp(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> Result<TabularMdp> {
    if n_states == 0 || n_actions == 0 {
        return Err(Error::param("random_mdp", "dimensions must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        let draws: Vec<f64> = (0..n_states).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = draws.iter().sum();
        transition.extend(draws.iter().map(|x| x / total));
    }
    let reward = (0..n_states * n_actions)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let rho0 = vec![1.0 / n_states as f64; n_states];
    TabularMdp::new(n_states, n_actions, transition, reward, gamma, rho0)
}

/// Resolves `frozenlake4x4`, `cliffwalking` or `random:<n_s>x<n_a>:<seed>`.
pub fn env_by_name(name: &str, gamma: f64) -> Result<TabularMdp> {
    match name {
        "frozenlake4x4" => EnvSpec::frozenlake4x4().compile(gamma),
        "cliffwalking" => EnvSpec::cliffwalking().compile(gamma),
        other => {
            let spec = other.strip_prefix("random:").ok_or_else(|| Error::UnknownEnv(name.into()))?;
            let parsed = spec.split_once(':').and_then(|(dims, seed)| {
                let (ns, na) = dims.split_once('x')?;
                Some((ns.parse().ok()?, na.parse().ok()?, seed.parse().ok()?))
            });
            let (ns, na, seed) = parsed.ok_or_else(|| Error::UnknownEnv(name.into()))?;
            random_mdp(ns, na, gamma, seed)
        }
    }
}

/// Smallest horizon with `gamma^h <= 1e-10`.
pub fn min_horizon(gamma: f64) -> usize {
    if gamma <= 0.0 {
        1
    } else {
        (MC_TAIL_TOL.ln() / gamma.ln()).ceil().max(1.0) as usize
    }
}

/// First-visit Monte-Carlo estimate of Q.
#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    /// Sample means; entries with a zero count hold 0 and are undefined.
    pub q_hat: QTable,
    pub episode_counts: Vec<u64>,
    pub horizon: usize,
    pub seed: u64,
}

impl McEstimate {
    pub fn value(&self, i: usize) -> Option<f64> {
        (self.episode_counts[i] > 0).then(|| self.q_hat.as_slice()[i])
    }

    pub fn undefined(&self) -> Vec<usize> {
        (0..self.episode_counts.len())
            .filter(|&i| self.episode_counts[i] == 0)
            .collect()
    }

    /// Sup-norm error against `truth` over defined entries only.
    pub fn sup_error(&self, truth: &QTable) -> f64 {
        (0..self.episode_counts.len())
            .filter_map(|i| self.value(i).map(|v| (v - truth.as_slice()[i]).abs()))
            .fold(0.0, f64::max)
    }
}

fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the cumulative total; take the last positive entry
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

struct Sampler<'a> {
    mdp: &'a TabularMdp,
    policy: &'a Policy,
    absorbing: Vec<bool>,
    starts: Vec<usize>,
    horizon: usize,
    seed: u64,
}

impl<'a> Sampler<'a> {
    fn new(mdp: &'a TabularMdp, policy: &'a Policy, horizon: usize, seed: u64) -> Self {
        let absorbing = mdp.absorbing_states();
        let na = mdp.n_actions();
        let mut starts: Vec<usize> = (0..mdp.n_pairs()).filter(|&i| !absorbing[i / na]).collect();
        if starts.is_empty() {
            starts = (0..mdp.n_pairs()).collect();
        }
        Sampler {
            mdp,
            policy,
            absorbing,
            starts,
            horizon,
            seed,
        }
    }

    /// Runs one exploring-start episode and returns `(pair, first-visit return)`.
    fn episode(&self, index: u64) -> Vec<(usize, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let na = self.mdp.n_actions();
        let gamma = self.mdp.gamma();

        let mut pair = self.starts[rng.random_range(0..self.starts.len())];
        let mut visited: Vec<(usize, f64)> = Vec::new();
        let mut rewards: Vec<f64> = Vec::new();
        let mut seen = vec![false; self.mdp.n_pairs()];
        for t in 0..self.horizon {
            let (s, a) = (pair / na, pair % na);
            if !seen[pair] {
                seen[pair] = true;
                visited.push((pair, t as f64));
            }
            rewards.push(self.mdp.r(s, a));
            let s_next = sample_index(self.mdp.next_state_probs(s, a), rng.random::<f64>());
            if self.absorbing[s_next] {
                break;
            }
            let a_next = sample_index(self.policy.action_probs(s_next), rng.random::<f64>());
            pair = s_next * na + a_next;
        }
        let mut returns = vec![0.0; rewards.len() + 1];
        for t in (0..rewards.len()).rev() {
            returns[t] = rewards[t] + gamma * returns[t + 1];
        }
        visited
            .into_iter()
            .map(|(p, t)| (p, returns[t as usize]))
            .collect()
    }
}

fn check_mc_args(mdp: &TabularMdp, policy: &Policy, episodes: usize, horizon: usize) -> Result<()> {
    if episodes == 0 {
        return Err(Error::param("episodes", "must be at least 1"));
    }
    let minimum = min_horizon(mdp.gamma());
    if horizon < minimum {
        return Err(Error::HorizonTooShort { given: horizon, minimum });
    }
    crate::mdp::bellman_backup(mdp, policy, &QTable::zeros_for(mdp)).map(|_| ())
}

/// First-visit Monte-Carlo Q estimate with exploring starts drawn uniformly
/// over non-terminal state-action pairs.
///
/// Episode `k` draws from its own ChaCha stream `(seed, k)` and per-chunk
/// sums are reduced in chunk order, so the estimate does not depend on the
/// number of worker threads.
pub fn monte_carlo_q(
    mdp: &TabularMdp,
    policy: &Policy,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_mc_args(mdp, policy, episodes, horizon)?;
    let sampler = Sampler::new(mdp, policy, horizon, seed);
    let n = mdp.n_pairs();
    let chunks: Vec<(Vec<f64>, Vec<u64>)> = (0..episodes.div_ceil(EPISODE_CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut sums = vec![0.0; n];
            let mut counts = vec![0u64; n];
            let end = ((chunk + 1) * EPISODE_CHUNK).min(episodes);
            for k in chunk * EPISODE_CHUNK..end {
                for (pair, g) in sampler.episode(k as u64) {
                    sums[pair] += g;
                    counts[pair] += 1;
                }
            }
            (sums, counts)
        })
        .collect();

    let mut sums = vec![0.0; n];
    let mut counts = vec![0u64; n];
    for (chunk_sums, chunk_counts) in chunks {
        for i in 0..n {
            sums[i] += chunk_sums[i];
            counts[i] += chunk_counts[i];
        }
    }
    let values = sums
        .iter()
        .zip(&counts)
        .map(|(s, c)| if *c > 0 { s / *c as f64 } else { 0.0 })
        .collect();
    Ok(McEstimate {
        q_hat: QTable::new(mdp.n_states(), mdp.n_actions(), values)?,
        episode_counts: counts,
        horizon,
        seed,
    })
}

/// Error path of the running Monte-Carlo estimate against the exact `Q*`.
///
/// Undefined entries count as 0, the usual zero initialization. A row is
/// logged before the first episode and after every `every` episodes; `time`
/// holds the episode count.
pub fn monte_carlo_path(
    mdp: &TabularMdp,
    policy: &Policy,
    episodes: usize,
    horizon: usize,
    seed: u64,
    every: usize,
) -> Result<PathTrace> {
    check_mc_args(mdp, policy, episodes, horizon)?;
    if every == 0 {
        return Err(Error::param("every", "must be at least 1"));
    }
    let q_star = solve_q_star(mdp, policy)?;
    let sampler = Sampler::new(mdp, policy, horizon, seed);
    let n = mdp.n_pairs();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0u64; n];
    let estimate = |sums: &[f64], counts: &[u64]| -> Vec<f64> {
        sums.iter()
            .zip(counts)
            .map(|(s, c)| if *c > 0 { s / *c as f64 } else { 0.0 })
            .collect()
    };
    let mut trace = PathTrace::default();
    trace.push(0.0, sub(&estimate(&sums, &counts), q_star.as_slice()));
    for k in 0..episodes {
        for (pair, g) in sampler.episode(k as u64) {
            sums[pair] += g;
            counts[pair] += 1;
        }
        if (k + 1) % every == 0 || k + 1 == episodes {
            trace.push((k + 1) as f64, sub(&estimate(&sums, &counts), q_star.as_slice()));
        }
    }
    Ok(trace)
}
