//! Eigensubspace-regularized critic (ERC) for tabular policy evaluation.
//!
//! The regularizer `R_push` is the population variance of the Bellman error
//! `B = Q - BQ`, i.e. its squared distance to `span{e}` divided by `N`.
//! Targets `BQ` and the centering mean are computed from the pre-update table
//! and held fixed within a sweep (stop-gradient).
//!
//! Gradient convention: the tabular update is the gradient step on
//! `(N/2) * L_ERC`, the per-entry `1/2 (Q - BQ)^2` scaling. With that
//! scaling the regularizer contributes `(1+beta)(Q - BQ) - beta * mean(Q - BQ)`,
//! so the centering term is `beta * mean(BQ - Q)`: half of the
//! `2 * mean(BQ - Q)` constant that appears when the variance is expanded
//! around a frozen mean.

use std::fmt::Write as _;

use crate::dynamics::td_combine;
use crate::error::{Error, Result};
use crate::mdp::{backup_unchecked, bellman_backup, Policy, QTable, TabularMdp};
use crate::numeric::{fmt_f64, l2_norm, mean, population_variance, sub, sup_norm};
use crate::spectral::distance_to_one_eigensubspace;

/// Step-size schedule `alpha_t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LearningRate {
    Constant(f64),
    /// `initial / (1 + t / decay_steps)`.
    Harmonic { initial: f64, decay_steps: f64 },
}

impl LearningRate {
    pub fn at(&self, step: usize) -> f64 {
        match *self {
            LearningRate::Constant(lr) => lr,
            LearningRate::Harmonic { initial, decay_steps } => initial / (1.0 + step as f64 / decay_steps),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            LearningRate::Constant(lr) => lr > 0.0 && lr <= 1.0,
            LearningRate::Harmonic { initial, decay_steps } => {
                initial > 0.0 && initial <= 1.0 && decay_steps > 0.0 && decay_steps.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param("lr", format!("{self:?} must stay within (0, 1]")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErcConfig {
    /// Regularization strength; zero turns every ERC operation into plain TD.
    pub beta: f64,
    pub lr: LearningRate,
    /// Clamp `beta * R_push` into `[r_min, r_max]`.
    pub truncation_enabled: bool,
    pub r_max: f64,
    pub r_min: f64,
}

impl Default for ErcConfig {
    fn default() -> Self {
        ErcConfig {
            beta: 0.3,
            lr: LearningRate::Constant(0.01),
            truncation_enabled: false,
            r_max: f64::INFINITY,
            r_min: 0.0,
        }
    }
}

impl ErcConfig {
    pub fn new(beta: f64, lr: f64) -> Self {
        ErcConfig {
            beta,
            lr: LearningRate::Constant(lr),
            ..Default::default()
        }
    }

    pub fn with_truncation(mut self, r_min: f64, r_max: f64) -> Self {
        self.truncation_enabled = true;
        self.r_min = r_min;
        self.r_max = r_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::param("beta", format!("{} must be finite and >= 0", self.beta)));
        }
        self.lr.validate()?;
        if self.truncation_enabled && !(self.r_min <= self.r_max) {
            return Err(Error::param(
                "r_min/r_max",
                format!("r_min {} exceeds r_max {}", self.r_min, self.r_max),
            ));
        }
        Ok(())
    }

    /// Regularizer term added to the loss: `beta * R_push`, clamped when
    /// truncation is on. Zero whenever `beta` is zero.
    pub fn regularizer(&self, r_push: f64) -> f64 {
        if self.beta == 0.0 {
            return 0.0;
        }
        let raw = self.beta * r_push;
        if self.truncation_enabled {
            raw.clamp(self.r_min, self.r_max)
        } else {
            raw
        }
    }

    /// Strength actually applied by the update rule. With truncation the
    /// beta-dependent correction is rescaled so its implied regularizer value
    /// equals the clamped one.
    pub fn effective_beta(&self, r_push: f64) -> f64 {
        if !self.truncation_enabled || self.beta == 0.0 || r_push <= 0.0 {
            return self.beta;
        }
        self.regularizer(r_push) / r_push
    }
}

/// Bellman error `Q - BQ` over the flat state-action index.
#[derive(Clone, Debug, PartialEq)]
pub struct BellmanErrorVector(Vec<f64>);

impl BellmanErrorVector {
    pub fn new(q: &QTable, target: &QTable) -> Result<Self> {
        if q.len() != target.len() {
            return Err(Error::shape("bellman error", q.len(), target.len()));
        }
        Ok(BellmanErrorVector(sub(q.as_slice(), target.as_slice())))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `(1/N) sum_i (B_i - mean(B))^2`.
    pub fn r_push(&self) -> f64 {
        population_variance(&self.0)
    }

    /// `(1/N) sum_i B_i^2`.
    pub fn loss_pe(&self) -> f64 {
        self.0.iter().map(|b| b * b).sum::<f64>() / self.0.len() as f64
    }
}

/// Population variance of the Bellman error `q - target`.
pub fn r_push(q: &QTable, target: &QTable) -> Result<f64> {
    Ok(BellmanErrorVector::new(q, target)?.r_push())
}

/// Mean squared Bellman error plus the (possibly truncated) regularizer.
pub fn erc_loss(q: &QTable, target: &QTable, cfg: &ErcConfig) -> Result<f64> {
    let b = BellmanErrorVector::new(q, target)?;
    Ok(b.loss_pe() + cfg.regularizer(b.r_push()))
}

/// One expected ERC sweep:
/// `q + lr ((1 + beta)(BQ - q) - beta * mean(BQ - q))`.
///
/// `step` indexes the learning-rate schedule. With `beta = 0` the result is
/// bit-identical to [`discrete_td_sweep`](crate::dynamics::discrete_td_sweep).
pub fn erc_update_sweep(
    mdp: &TabularMdp,
    policy: &Policy,
    q: &QTable,
    cfg: &ErcConfig,
    step: usize,
) -> Result<QTable> {
    cfg.validate()?;
    let bq = bellman_backup(mdp, policy, q)?;
    let lr = cfg.lr.at(step);
    if cfg.beta == 0.0 {
        return Ok(q.with_values(td_combine(q.as_slice(), bq.as_slice(), lr)));
    }
    let diff = sub(bq.as_slice(), q.as_slice());
    let beta = cfg.effective_beta(population_variance(&diff));
    let centering = mean(&diff);
    let values = q
        .as_slice()
        .iter()
        .zip(&diff)
        .map(|(x, d)| x + lr * ((1.0 + beta) * d - beta * centering))
        .collect();
    Ok(q.with_values(values))
}

/// One expected ERC* sweep, which pushes the approximation error itself
/// toward `span{e}` using the exact `Q*`:
/// `(1 - lr(1+beta)) q + lr BQ + lr beta (Q* + mean(q - Q*) e)`.
pub fn erc_star_update_sweep(
    mdp: &TabularMdp,
    policy: &Policy,
    q: &QTable,
    q_star: &QTable,
    cfg: &ErcConfig,
    step: usize,
) -> Result<QTable> {
    cfg.validate()?;
    if q_star.len() != q.len() {
        return Err(Error::shape("q_star", q.len(), q_star.len()));
    }
    let bq = bellman_backup(mdp, policy, q)?;
    let lr = cfg.lr.at(step);
    if cfg.beta == 0.0 {
        return Ok(q.with_values(td_combine(q.as_slice(), bq.as_slice(), lr)));
    }
    let approx_error = sub(q.as_slice(), q_star.as_slice());
    let beta = cfg.effective_beta(population_variance(&approx_error));
    let offset = mean(&approx_error);
    let values = q
        .as_slice()
        .iter()
        .zip(bq.as_slice())
        .zip(&approx_error)
        .map(|((x, b), err)| x + lr * ((b - x) - beta * (err - offset)))
        .collect();
    Ok(q.with_values(values))
}

/// The three terms of `R_push = var(Q) + var(BQ) - 2 cov(Q, BQ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceDecomposition {
    pub var_q: f64,
    pub var_target: f64,
    pub covariance: f64,
    pub r_push_value: f64,
    /// `|R_push - (var_q + var_target - 2 cov)|`.
    pub identity_residual: f64,
}

/// Population moments of `q` and `target` over the state-action index.
pub fn variance_decomposition(q: &QTable, target: &QTable) -> Result<VarianceDecomposition> {
    let b = BellmanErrorVector::new(q, target)?;
    let (qs, ts) = (q.as_slice(), target.as_slice());
    let (mq, mt) = (mean(qs), mean(ts));
    let n = qs.len() as f64;
    let covariance = qs.iter().zip(ts).map(|(x, y)| (x - mq) * (y - mt)).sum::<f64>() / n;
    let var_q = population_variance(qs);
    let var_target = population_variance(ts);
    let r_push_value = b.r_push();
    Ok(VarianceDecomposition {
        var_q,
        var_target,
        covariance,
        r_push_value,
        identity_residual: (r_push_value - (var_q + var_target - 2.0 * covariance)).abs(),
    })
}

/// Sup-norm residual of `q` against the Bellman equation with the shifted
/// reward `r + beta/(1+beta) mean(q - Bq)`. Converged ERC iterates drive it to zero.
pub fn regularized_fixed_point_check(
    mdp: &TabularMdp,
    policy: &Policy,
    q: &QTable,
    cfg: &ErcConfig,
) -> Result<f64> {
    cfg.validate()?;
    let bq = bellman_backup(mdp, policy, q)?;
    let bellman_error = sub(q.as_slice(), bq.as_slice());
    let shift = cfg.beta / (1.0 + cfg.beta) * mean(&bellman_error);
    // q - (r + shift + gamma P q) = (q - Bq) - shift
    let residual: Vec<f64> = bellman_error.iter().map(|b| b - shift).collect();
    Ok(sup_norm(&residual))
}

/// One row of the learner trace CSV.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearnerRow {
    pub step: usize,
    pub loss_pe: f64,
    pub r_push: f64,
    pub loss_total: f64,
    pub error_l2_vs_qstar: f64,
    pub subspace_distance: f64,
    pub var_q: f64,
    pub var_target: f64,
    pub covariance: f64,
}

impl LearnerRow {
    pub const HEADER: &'static str =
        "step,loss_pe,r_push,loss_total,error_l2_vs_qstar,subspace_distance,var_q,var_target,covariance";

    /// Measures `q` against its own Bellman target and against `q_star`.
    pub fn measure(
        mdp: &TabularMdp,
        policy: &Policy,
        q: &QTable,
        q_star: &QTable,
        cfg: &ErcConfig,
        step: usize,
    ) -> Self {
        let target = q.with_values(backup_unchecked(mdp, policy, q.as_slice()));
        let b = BellmanErrorVector(sub(q.as_slice(), target.as_slice()));
        let vd = variance_decomposition(q, &target).expect("shapes agree");
        let error = sub(q.as_slice(), q_star.as_slice());
        let loss_pe = b.loss_pe();
        LearnerRow {
            step,
            loss_pe,
            r_push: vd.r_push_value,
            loss_total: loss_pe + cfg.regularizer(vd.r_push_value),
            error_l2_vs_qstar: l2_norm(&error),
            subspace_distance: distance_to_one_eigensubspace(&error),
            var_q: vd.var_q,
            var_target: vd.var_target,
            covariance: vd.covariance,
        }
    }
}

pub fn learner_trace_csv(rows: &[LearnerRow]) -> String {
    let mut out = String::from(LearnerRow::HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.step,
            fmt_f64(r.loss_pe),
            fmt_f64(r.r_push),
            fmt_f64(r.loss_total),
            fmt_f64(r.error_l2_vs_qstar),
            fmt_f64(r.subspace_distance),
            fmt_f64(r.var_q),
            fmt_f64(r.var_target),
            fmt_f64(r.covariance)
        );
    }
    out
}
