//! Finite MDPs, fixed policies, and the exact policy-evaluation machinery.
//!
//! State-action pairs are flattened as `s * n_actions + a` everywhere in the
//! crate. [`QTable`], [`InducedTransition`] and every CSV column that carries
//! per-pair values follow that order.

use std::path::Path;

use faer::prelude::*;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::sup_distance;

const STOCHASTIC_TOL: f64 = 1e-12;

/// Cap on value-iteration sweeps before reporting non-convergence.
pub const VALUE_ITERATION_CAP: u64 = 10_000_000;

fn check_distribution(what: impl FnOnce() -> String, row: &[f64]) -> Result<()> {
    if let Some(i) = row.iter().position(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::NotStochastic {
            what: what(),
            detail: format!("entry {i} is {}", row[i]),
        });
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::NotStochastic {
            what: what(),
            detail: format!("sums to {total:.17}"),
        });
    }
    Ok(())
}

/// A finite MDP with rewards defined on state-action pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// `P[s][a][s']` at `(s * n_actions + a) * n_states + s'`.
    transition: Vec<f64>,
    /// `r[s][a]` at `s * n_actions + a`.
    reward: Vec<f64>,
    gamma: f64,
    rho0: Vec<f64>,
}

impl TabularMdp {
    /// Validates and builds an MDP from flat row-major buffers.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
        rho0: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::param("n_states/n_actions", "must be positive"));
        }
        let n = n_states * n_actions;
        if transition.len() != n * n_states {
            return Err(Error::shape(
                "transition",
                format!("{n_states}x{n_actions}x{n_states}"),
                format!("{} entries", transition.len()),
            ));
        }
        if reward.len() != n {
            return Err(Error::shape(
                "reward",
                format!("{n_states}x{n_actions}"),
                format!("{} entries", reward.len()),
            ));
        }
        if rho0.len() != n_states {
            return Err(Error::shape("rho0", n_states, rho0.len()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::param("gamma", format!("{gamma} is outside [0, 1)")));
        }
        if let Some(i) = reward.iter().position(|r| !r.is_finite()) {
            return Err(Error::NonFinite { what: "reward", index: i });
        }
        for (pair, row) in transition.chunks_exact(n_states).enumerate() {
            let (s, a) = (pair / n_actions, pair % n_actions);
            check_distribution(|| format!("P[{s}][{a}]"), row)?;
        }
        check_distribution(|| "rho0".to_string(), &rho0)?;
        Ok(TabularMdp {
            n_states,
            n_actions,
            transition,
            reward,
            gamma,
            rho0,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Number of state-action pairs, the dimension of every Q vector.
    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho0(&self) -> &[f64] {
        &self.rho0
    }

    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    pub fn r(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    /// Next-state distribution `P[s][a][.]`.
    pub fn next_state_probs(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn p(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.transition[(s * self.n_actions + a) * self.n_states + s_next]
    }

    /// Copy of this MDP with a different discount.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::param("gamma", format!("{gamma} is outside [0, 1)")));
        }
        Ok(TabularMdp {
            gamma,
            ..self.clone()
        })
    }

    /// States that loop onto themselves with probability one and zero reward
    /// under every action.
    pub fn absorbing_states(&self) -> Vec<bool> {
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions).all(|a| self.p(s, a, s) == 1.0 && self.r(s, a) == 0.0)
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MdpDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MdpDocument = serde_json::from_str(text)?;
        doc.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// On-disk MDP layout with row-major nesting.
#[derive(Serialize, Deserialize)]
struct MdpDocument {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    rho0: Vec<f64>,
    reward: Vec<Vec<f64>>,
    transition: Vec<Vec<Vec<f64>>>,
}

impl From<&TabularMdp> for MdpDocument {
    fn from(mdp: &TabularMdp) -> Self {
        let (ns, na) = (mdp.n_states, mdp.n_actions);
        MdpDocument {
            n_states: ns,
            n_actions: na,
            gamma: mdp.gamma,
            rho0: mdp.rho0.clone(),
            reward: mdp.reward.chunks_exact(na).map(<[f64]>::to_vec).collect(),
            transition: (0..ns)
                .map(|s| (0..na).map(|a| mdp.next_state_probs(s, a).to_vec()).collect())
                .collect(),
        }
    }
}

impl TryFrom<MdpDocument> for TabularMdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        let (ns, na) = (doc.n_states, doc.n_actions);
        if doc.reward.len() != ns || doc.reward.iter().any(|row| row.len() != na) {
            return Err(Error::shape("reward", format!("{ns}x{na}"), "ragged rows"));
        }
        let transition_ok = doc.transition.len() == ns
            && doc
                .transition
                .iter()
                .all(|rows| rows.len() == na && rows.iter().all(|p| p.len() == ns));
        if !transition_ok {
            return Err(Error::shape(
                "transition",
                format!("{ns}x{na}x{ns}"),
                "ragged rows",
            ));
        }
        TabularMdp::new(
            ns,
            na,
            doc.transition.into_iter().flatten().flatten().collect(),
            doc.reward.into_iter().flatten().collect(),
            doc.gamma,
            doc.rho0,
        )
    }
}

/// Stationary stochastic policy `pi[s][a]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicyDocument", into = "PolicyDocument")]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PolicyDocument {
    probs: Vec<Vec<f64>>,
}

impl TryFrom<PolicyDocument> for Policy {
    type Error = Error;

    fn try_from(doc: PolicyDocument) -> Result<Self> {
        let ns = doc.probs.len();
        let na = doc.probs.first().map_or(0, Vec::len);
        if doc.probs.iter().any(|row| row.len() != na) {
            return Err(Error::shape("policy", format!("{ns}x{na}"), "ragged rows"));
        }
        Policy::new(ns, na, doc.probs.into_iter().flatten().collect())
    }
}

impl From<Policy> for PolicyDocument {
    fn from(p: Policy) -> Self {
        PolicyDocument {
            probs: p.probs.chunks_exact(p.n_actions).map(<[f64]>::to_vec).collect(),
        }
    }
}

impl Policy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::param("policy shape", "must be non-empty"));
        }
        if probs.len() != n_states * n_actions {
            return Err(Error::shape(
                "policy",
                format!("{n_states}x{n_actions}"),
                format!("{} entries", probs.len()),
            ));
        }
        for (s, row) in probs.chunks_exact(n_actions).enumerate() {
            check_distribution(|| format!("pi[{s}]"), row)?;
        }
        Ok(Policy {
            n_states,
            n_actions,
            probs,
        })
    }

    /// Uniform-random policy.
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Policy {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn action_probs(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn check_against(&self, mdp: &TabularMdp) -> Result<()> {
        if self.n_states != mdp.n_states || self.n_actions != mdp.n_actions {
            return Err(Error::shape(
                "policy vs mdp",
                format!("{}x{}", mdp.n_states, mdp.n_actions),
                format!("{}x{}", self.n_states, self.n_actions),
            ));
        }
        Ok(())
    }
}

/// Flat Q vector over state-action pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(Error::shape(
                "q table",
                n_states * n_actions,
                values.len(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "q table", index: i });
        }
        Ok(QTable {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        QTable {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    /// Zero table shaped for `mdp`.
    pub fn zeros_for(mdp: &TabularMdp) -> Self {
        Self::zeros(mdp.n_states, mdp.n_actions)
    }

    /// Table of the same shape with new values; used by update rules whose
    /// outputs are finite whenever their inputs are.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        QTable {
            n_states: self.n_states,
            n_actions: self.n_actions,
            values,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn index(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[self.index(s, a)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_distance(&self, other: &QTable) -> f64 {
        sup_distance(&self.values, &other.values)
    }

    fn check_against(&self, mdp: &TabularMdp) -> Result<()> {
        if self.n_states != mdp.n_states || self.n_actions != mdp.n_actions {
            return Err(Error::shape(
                "q table vs mdp",
                format!("{}x{}", mdp.n_states, mdp.n_actions),
                format!("{}x{}", self.n_states, self.n_actions),
            ));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "q table", index: i });
        }
        Ok(())
    }
}

/// Row-stochastic transition matrix over state-action pairs.
#[derive(Clone, Debug)]
pub struct InducedTransition {
    matrix: Mat<f64>,
}

impl InducedTransition {
    /// Wraps an arbitrary square matrix after checking row-stochasticity
    /// (rows sum to one within 1e-10, entries non-negative).
    pub fn from_matrix(matrix: Mat<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::shape(
                "induced transition",
                "non-empty square matrix",
                format!("{}x{}", matrix.nrows(), matrix.ncols()),
            ));
        }
        for i in 0..matrix.nrows() {
            let mut total = 0.0;
            for j in 0..matrix.ncols() {
                let p = matrix[(i, j)];
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::NotStochastic {
                        what: format!("row {i}"),
                        detail: format!("entry {j} is {p}"),
                    });
                }
                total += p;
            }
            if (total - 1.0).abs() > 1e-10 {
                return Err(Error::NotStochastic {
                    what: format!("row {i}"),
                    detail: format!("sums to {total:.17}"),
                });
            }
        }
        Ok(InducedTransition { matrix })
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `r + gamma * P q` as a dense matrix-vector product.
    pub fn backup(&self, reward: &[f64], gamma: f64, q: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let pq: f64 = (0..n).map(|j| self.matrix[(i, j)] * q[j]).sum();
                reward[i] + gamma * pq
            })
            .collect()
    }
}

/// Builds `P^pi[(s,a),(s',a')] = P(s'|s,a) * pi(a'|s')`.
pub fn build_induced_transition(mdp: &TabularMdp, policy: &Policy) -> Result<InducedTransition> {
    policy.check_against(mdp)?;
    let (ns, na) = (mdp.n_states, mdp.n_actions);
    let n = ns * na;
    let matrix = Mat::from_fn(n, n, |row, col| {
        let (s, a) = (row / na, row % na);
        let (s_next, a_next) = (col / na, col % na);
        mdp.p(s, a, s_next) * policy.prob(s_next, a_next)
    });
    Ok(InducedTransition { matrix })
}

/// Expected next-state value `sum_a' pi(a'|s') q(s',a')` for every state.
pub(crate) fn state_values(policy: &Policy, q: &[f64]) -> Vec<f64> {
    q.chunks_exact(policy.n_actions)
        .zip(policy.probs.chunks_exact(policy.n_actions))
        .map(|(qs, ps)| qs.iter().zip(ps).map(|(x, p)| x * p).sum())
        .collect()
}

/// `r + gamma * P^pi q` by direct summation over the transition tensor.
pub(crate) fn backup_unchecked(mdp: &TabularMdp, policy: &Policy, q: &[f64]) -> Vec<f64> {
    let v = state_values(policy, q);
    mdp.transition
        .chunks_exact(mdp.n_states)
        .zip(&mdp.reward)
        .map(|(row, r)| {
            let expected: f64 = row.iter().zip(&v).map(|(p, vs)| p * vs).sum();
            r + mdp.gamma * expected
        })
        .collect()
}

/// The policy-evaluation Bellman operator `q -> r + gamma * P^pi q`.
pub fn bellman_backup(mdp: &TabularMdp, policy: &Policy, q: &QTable) -> Result<QTable> {
    policy.check_against(mdp)?;
    q.check_against(mdp)?;
    Ok(q.with_values(backup_unchecked(mdp, policy, &q.values)))
}

/// Exact policy value `(I - gamma P^pi)^{-1} r` by partial-pivoted LU.
pub fn solve_q_star(mdp: &TabularMdp, policy: &Policy) -> Result<QTable> {
    let p_pi = build_induced_transition(mdp, policy)?;
    let n = p_pi.dim();
    let gamma = mdp.gamma;
    let system = Mat::from_fn(n, n, |i, j| {
        let identity = if i == j { 1.0 } else { 0.0 };
        identity - gamma * p_pi.matrix[(i, j)]
    });
    let lu = system.partial_piv_lu();

    let diag: Vec<f64> = (0..n).map(|i| lu.U()[(i, i)].abs()).collect();
    let max_pivot = diag.iter().cloned().fold(0.0_f64, f64::max);
    let min_pivot = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let rcond = if max_pivot > 0.0 { min_pivot / max_pivot } else { 0.0 };
    if rcond < 1e-14 {
        return Err(Error::Singular { rcond });
    }

    let rhs = Mat::from_fn(n, 1, |i, _| mdp.reward[i]);
    let sol = lu.solve(&rhs);
    let values: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { rcond });
    }
    Ok(QTable {
        n_states: mdp.n_states,
        n_actions: mdp.n_actions,
        values,
    })
}

/// Result of [`value_iteration_oracle`].
#[derive(Clone, Debug)]
pub struct ValueIteration {
    pub q: QTable,
    pub iterations: u64,
}

/// Iterates the Bellman backup from zero until the sup-norm change drops below `tol`.
pub fn value_iteration_oracle(mdp: &TabularMdp, policy: &Policy, tol: f64) -> Result<ValueIteration> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", format!("{tol} must be positive")));
    }
    policy.check_against(mdp)?;
    let mut q = vec![0.0; mdp.n_pairs()];
    let mut last_change = f64::INFINITY;
    for iteration in 1..=VALUE_ITERATION_CAP {
        let next = backup_unchecked(mdp, policy, &q);
        last_change = sup_distance(&next, &q);
        q = next;
        if last_change < tol {
            return Ok(ValueIteration {
                q: QTable {
                    n_states: mdp.n_states,
                    n_actions: mdp.n_actions,
                    values: q,
                },
                iterations: iteration,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: VALUE_ITERATION_CAP,
        last_change,
    })
}
