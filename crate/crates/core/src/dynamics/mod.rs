//! Continuous and discrete TD learning dynamics and the inherent error path.
//!
//! Under expected updates the approximation error `Q_t - Q*` follows the
//! linear ODE `d/dt Q = -(I - gamma P) Q + r`, whose solution is
//! `exp(-t (I - gamma P)) (Q_0 - Q*)`. This module evaluates that closed form,
//! integrates the ODE independently with fixed-step RK4, and runs the
//! discrete sweeps (TD, ERC, ERC*) while logging the error geometry.

mod expm;

use std::fmt::Write as _;

use faer::{Mat, Scale};

pub use expm::expm;

use crate::erc::{erc_star_update_sweep, erc_update_sweep, ErcConfig};
use crate::error::{Error, Result};
use crate::mdp::{backup_unchecked, bellman_backup, solve_q_star, InducedTransition, Policy, QTable, TabularMdp};
use crate::numeric::{fmt_f64, l2_norm, sub};
use crate::spectral::distance_to_one_eigensubspace;

/// Upper bound on RK4 steps per integration.
pub const MAX_ODE_STEPS: u64 = 100_000_000;

/// Time-indexed record of the approximation error `Q_t - Q*`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathTrace {
    pub times: Vec<f64>,
    pub errors: Vec<Vec<f64>>,
    pub error_norms: Vec<f64>,
    pub subspace_distances: Vec<f64>,
}

impl PathTrace {
    pub fn push(&mut self, time: f64, error: Vec<f64>) {
        self.times.push(time);
        self.error_norms.push(l2_norm(&error));
        self.subspace_distances.push(distance_to_one_eigensubspace(&error));
        self.errors.push(error);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_error(&self) -> Option<&[f64]> {
        self.errors.last().map(Vec::as_slice)
    }

    /// First index at which `series` falls to `fraction` of its initial value.
    pub fn first_below(series: &[f64], fraction: f64) -> Option<usize> {
        let start = *series.first()?;
        series.iter().position(|x| *x <= fraction * start)
    }

    /// CSV with `step,time,error_l2,subspace_distance`, plus `err_<i>`
    /// columns when `full` is set.
    pub fn to_csv(&self, full: bool) -> String {
        let mut out = String::from("step,time,error_l2,subspace_distance");
        let width = self.errors.first().map_or(0, Vec::len);
        if full {
            for i in 0..width {
                let _ = write!(out, ",err_{i}");
            }
        }
        out.push('\n');
        for k in 0..self.len() {
            let _ = write!(
                out,
                "{k},{},{},{}",
                fmt_f64(self.times[k]),
                fmt_f64(self.error_norms[k]),
                fmt_f64(self.subspace_distances[k])
            );
            if full {
                for x in &self.errors[k] {
                    out.push(',');
                    out.push_str(&fmt_f64(*x));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// `exp(-t (I - gamma P))`, the propagator of the error ODE over time `t`.
pub fn td_propagator(p_pi: &InducedTransition, gamma: f64, t: f64) -> Result<Mat<f64>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("{t} must be a finite non-negative time")));
    }
    let n = p_pi.dim();
    let generator = Mat::from_fn(n, n, |i, j| {
        let identity = if i == j { 1.0 } else { 0.0 };
        gamma * p_pi.matrix()[(i, j)] - identity
    });
    Ok(expm(&(&generator * Scale(t))))
}

fn apply(m: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

/// Closed-form approximation error `exp(-t (I - gamma P)) (q0 - q*)`.
pub fn closed_form_error(
    p_pi: &InducedTransition,
    gamma: f64,
    q0: &QTable,
    q_star: &QTable,
    t: f64,
) -> Result<Vec<f64>> {
    let n = p_pi.dim();
    if q0.len() != n || q_star.len() != n {
        return Err(Error::shape("closed_form_error", n, format!("{} / {}", q0.len(), q_star.len())));
    }
    let error0 = sub(q0.as_slice(), q_star.as_slice());
    if t == 0.0 {
        return Ok(error0);
    }
    let propagator = td_propagator(p_pi, gamma, t)?;
    Ok(apply(&propagator, &error0))
}

fn rk4_step(mdp: &TabularMdp, policy: &Policy, q: &[f64], h: f64) -> Vec<f64> {
    let drift = |x: &[f64]| -> Vec<f64> {
        backup_unchecked(mdp, policy, x)
            .into_iter()
            .zip(x)
            .map(|(b, xi)| b - xi)
            .collect()
    };
    let shifted = |base: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(b, ki)| b + c * ki).collect()
    };
    let k1 = drift(q);
    let k2 = drift(&shifted(q, &k1, h / 2.0));
    let k3 = drift(&shifted(q, &k2, h / 2.0));
    let k4 = drift(&shifted(q, &k3, h));
    (0..q.len())
        .map(|i| q[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Fixed-step classical RK4 integration of the TD ODE from `q0` to `t_end`.
///
/// Every step is logged. When `t_end` is not a multiple of `dt` the final
/// step is shortened to land on `t_end`.
pub fn integrate_td_ode(
    mdp: &TabularMdp,
    policy: &Policy,
    q0: &QTable,
    t_end: f64,
    dt: f64,
) -> Result<PathTrace> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("{dt} must be positive")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::param("t_end", format!("{t_end} must be finite and non-negative")));
    }
    let steps = (t_end / dt * (1.0 - 1e-12)).ceil();
    if steps > MAX_ODE_STEPS as f64 {
        return Err(Error::param("dt", format!("{steps} steps exceed the cap of {MAX_ODE_STEPS}")));
    }
    let steps = steps as u64;
    bellman_backup(mdp, policy, q0)?;
    let q_star = solve_q_star(mdp, policy)?;

    let mut trace = PathTrace::default();
    let mut q = q0.as_slice().to_vec();
    trace.push(0.0, sub(&q, q_star.as_slice()));
    for k in 1..=steps {
        let t_prev = (k - 1) as f64 * dt;
        let t = if k == steps { t_end } else { k as f64 * dt };
        q = rk4_step(mdp, policy, &q, t - t_prev);
        trace.push(t, sub(&q, q_star.as_slice()));
    }
    Ok(trace)
}

/// One synchronous expected TD sweep `q + lr (Bq - q)`.
pub fn discrete_td_sweep(mdp: &TabularMdp, policy: &Policy, q: &QTable, lr: f64) -> Result<QTable> {
    if !(lr > 0.0 && lr <= 1.0) {
        return Err(Error::param("lr", format!("{lr} is outside (0, 1]")));
    }
    let bq = bellman_backup(mdp, policy, q)?;
    Ok(q.with_values(td_combine(q.as_slice(), bq.as_slice(), lr)))
}

pub(crate) fn td_combine(q: &[f64], bq: &[f64], lr: f64) -> Vec<f64> {
    q.iter().zip(bq).map(|(x, b)| x + lr * (b - x)).collect()
}

/// Update rule driven by [`record_inherent_path`] and [`run_learner`].
#[derive(Clone, Debug, PartialEq)]
pub enum Stepper {
    /// RK4 on the continuous dynamics; each step advances time by `dt`.
    Ode { dt: f64 },
    /// Expected TD sweeps.
    Td { lr: f64 },
    /// Eigensubspace-regularized sweeps with bootstrapped targets.
    Erc(ErcConfig),
    /// Regularized sweeps that use the exact `Q*`.
    ErcStar(ErcConfig),
}

impl Stepper {
    pub fn name(&self) -> &'static str {
        match self {
            Stepper::Ode { .. } => "ode",
            Stepper::Td { .. } => "td",
            Stepper::Erc(_) => "erc",
            Stepper::ErcStar(_) => "erc_star",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Stepper::Ode { dt } if !(*dt > 0.0) => Err(Error::param("dt", format!("{dt} must be positive"))),
            Stepper::Td { lr } if !(*lr > 0.0 && *lr <= 1.0) => {
                Err(Error::param("lr", format!("{lr} is outside (0, 1]")))
            }
            Stepper::Erc(cfg) | Stepper::ErcStar(cfg) => cfg.validate(),
            _ => Ok(()),
        }
    }

    fn time_of(&self, step: usize) -> f64 {
        match self {
            Stepper::Ode { dt } => step as f64 * dt,
            _ => step as f64,
        }
    }
}

/// Runs `steps` updates from `q0`, calling `observe(step, time, q)` on the
/// initial table and after every update. Returns the final table.
pub fn run_learner(
    mdp: &TabularMdp,
    policy: &Policy,
    q0: &QTable,
    q_star: &QTable,
    stepper: &Stepper,
    steps: usize,
    mut observe: impl FnMut(usize, f64, &QTable),
) -> Result<QTable> {
    stepper.validate()?;
    bellman_backup(mdp, policy, q0)?;
    let mut q = q0.clone();
    observe(0, 0.0, &q);
    for step in 1..=steps {
        q = match stepper {
            Stepper::Ode { dt } => q.with_values(rk4_step(mdp, policy, q.as_slice(), *dt)),
            Stepper::Td { lr } => discrete_td_sweep(mdp, policy, &q, *lr)?,
            Stepper::Erc(cfg) => erc_update_sweep(mdp, policy, &q, cfg, step - 1)?,
            Stepper::ErcStar(cfg) => erc_star_update_sweep(mdp, policy, &q, q_star, cfg, step - 1)?,
        };
        observe(step, stepper.time_of(step), &q);
    }
    Ok(q)
}

/// Logs error norm and subspace distance along a learner's trajectory.
pub fn record_inherent_path(
    mdp: &TabularMdp,
    policy: &Policy,
    q0: &QTable,
    stepper: &Stepper,
    steps: usize,
) -> Result<PathTrace> {
    let q_star = solve_q_star(mdp, policy)?;
    let mut trace = PathTrace::default();
    run_learner(mdp, policy, q0, &q_star, stepper, steps, |_, t, q| {
        trace.push(t, sub(q.as_slice(), q_star.as_slice()));
    })?;
    Ok(trace)
}
