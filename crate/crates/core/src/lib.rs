//! Tabular numerics for the dynamics of temporal-difference learning.
//!
//! The crate builds the state-action transition matrix `P^pi` of a fixed
//! policy, solves the policy-evaluation Bellman equation exactly, and tracks
//! how the approximation error `Q_t - Q*` of TD-style learners moves toward
//! the 1-eigensubspace `span{e}` of `P^pi` before it vanishes. It also
//! implements the eigensubspace-regularized critic (ERC) update, which
//! penalizes the variance of the Bellman error to speed up that approach.
//!
//! Modules:
//! - [`mdp`]: MDPs, policies, `P^pi`, Bellman backup, exact solve.
//! - [`spectral`]: eigendecomposition, spectral-assumption checks, projections.
//! - [`dynamics`]: closed-form error, RK4 oracle, TD sweeps, path traces.
//! - [`erc`]: ERC/ERC* updates, loss, variance diagnostics.
//! - [`envs`]: FrozenLake, CliffWalking, random MDPs, Monte-Carlo.
//! - [`experiments`]: deterministic experiment drivers with CSV/SVG output.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod envs;
pub mod erc;
pub mod error;
pub mod experiments;
pub mod mdp;
pub mod numeric;
pub mod spectral;

pub use error::{Error, Result};
pub use mdp::{
    bellman_backup, build_induced_transition, solve_q_star, value_iteration_oracle, InducedTransition, Policy,
    QTable, TabularMdp,
};
