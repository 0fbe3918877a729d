//! Executable checks of the tabular theory.
//!
//! Each check reports its measured residual next to the tolerance it is held
//! to. A check whose preconditions fail reports `Skipped` instead of passing
//! or failing.

use std::fmt::{self, Write as _};
use std::path::PathBuf;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{closed_form_error, integrate_td_ode};
use crate::envs::random_mdp;
use crate::erc::{erc_loss, erc_update_sweep, regularized_fixed_point_check, variance_decomposition, ErcConfig};
use crate::error::Result;
use crate::mdp::{bellman_backup, build_induced_transition, solve_q_star, InducedTransition, Policy, QTable, TabularMdp};
use crate::numeric::{fmt_f64, l2_norm, linear_fit, sub, sup_distance};
use crate::spectral::{check_assumption_one, decompose_error, eigendecompose, ASSUMPTION_TOL};

use super::{ExperimentConfig, OutputDir, RateInstance};

pub const CLOSED_FORM_TIMES: [f64; 4] = [0.1, 1.0, 5.0, 20.0];
pub const RK4_DT: f64 = 1e-3;
pub const CLOSED_FORM_TOL: f64 = 1e-6;
/// Relative tolerance on the fitted decay rate.
pub const RATE_REL_TOL: f64 = 0.01;
pub const FD_STEP: f64 = 1e-6;
pub const FD_REL_TOL: f64 = 1e-5;
pub const FD_BETAS: [f64; 4] = [0.0, 0.1, 0.3, 1.0];
pub const FD_MDPS: usize = 20;
/// Step size used by the finite-difference check.
pub const FD_LR: f64 = 0.05;
pub const CONVERGENCE_STEP_TOL: f64 = 1e-10;
pub const FIXED_POINT_TOL: f64 = 1e-7;
pub const MAX_CONVERGENCE_SWEEPS: usize = 1_000_000;
pub const IDENTITY_PAIRS: usize = 1000;
pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIPPED",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub status: CheckStatus,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    fn judged(name: &'static str, measured: f64, tolerance: f64, detail: String) -> Self {
        let status = if measured <= tolerance {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Check {
            name,
            status,
            measured,
            tolerance,
            detail,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<7} {:<22} measured {:.3e} (tol {:.1e}) {}",
            self.status.to_string(),
            self.name,
            self.measured,
            self.tolerance,
            self.detail
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

impl VerifyReport {
    /// No check failed. Skipped checks do not count as failures.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,status,measured,tolerance,detail\n");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{},{},{},{},\"{}\"",
                c.name,
                c.status,
                fmt_f64(c.measured),
                fmt_f64(c.tolerance),
                c.detail.replace('"', "'")
            );
        }
        out
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Sup-norm gap between the matrix-exponential error and RK4 on the TD ODE,
/// started from `Q0 = 0`, maximized over `times`.
pub fn check_closed_form(mdp: &TabularMdp, policy: &Policy, times: &[f64], dt: f64, tol: f64) -> Result<Check> {
    let q0 = QTable::zeros_for(mdp);
    let q_star = solve_q_star(mdp, policy)?;
    let p_pi = build_induced_transition(mdp, policy)?;
    let mut worst: f64 = 0.0;
    for &t in times {
        let exact = closed_form_error(&p_pi, mdp.gamma(), &q0, &q_star, t)?;
        let trace = integrate_td_ode(mdp, policy, &q0, t, dt)?;
        let numeric = trace.last_error().expect("trace has the initial row");
        worst = worst.max(sup_distance(&exact, numeric));
    }
    Ok(Check::judged(
        "closed_form_vs_rk4",
        worst,
        tol,
        format!("t in {times:?}, dt {dt}"),
    ))
}

/// Symmetric doubly-stochastic 4x4 `(1/4)(ee^T + sum_i lambda_i h_i h_i^T)`
/// over the non-constant Hadamard vectors, with eigenvalues
/// `1, 0.5, 0.25, 0.125`.
pub fn constructed_instance() -> InducedTransition {
    const H: [[f64; 4]; 3] = [[1.0, -1.0, 1.0, -1.0], [1.0, 1.0, -1.0, -1.0], [1.0, -1.0, -1.0, 1.0]];
    const LAMBDA: [f64; 3] = [0.5, 0.25, 0.125];
    let m = Mat::from_fn(4, 4, |i, j| {
        let spread: f64 = H.iter().zip(LAMBDA).map(|(h, l)| l * h[i] * h[j]).sum();
        0.25 * (1.0 + spread)
    });
    InducedTransition::from_matrix(m).expect("rows sum to one")
}

/// Fits `log |alpha_1(t)|` against `t`, where `alpha_1` is the coefficient of
/// the closed-form error on the dominant eigenvector, and compares the slope
/// with `gamma - 1`. Skipped when `p_pi` violates the spectral assumption.
pub fn check_rate(p_pi: &InducedTransition, gamma: f64) -> Result<Check> {
    const NAME: &str = "dominant_rate";
    let expected = gamma - 1.0;
    let tolerance = RATE_REL_TOL * expected.abs();
    let decomp = eigendecompose(p_pi)?;
    let report = check_assumption_one(&decomp, ASSUMPTION_TOL);
    if !report.holds {
        return Ok(Check {
            name: NAME,
            status: CheckStatus::Skipped,
            measured: f64::NAN,
            tolerance,
            detail: report.summary(),
        });
    }
    let n = p_pi.dim();
    let error0 = QTable::new(n, 1, (0..n).map(|i| 1.0 + i as f64).collect())?;
    let zero = QTable::zeros(n, 1);
    let times: Vec<f64> = (0..=20).map(f64::from).collect();
    let mut logs = Vec::with_capacity(times.len());
    for &t in &times {
        let error = closed_form_error(p_pi, gamma, &error0, &zero, t)?;
        let alpha = decompose_error(&decomp, &error)?.coefficients[0];
        logs.push(alpha.norm().ln());
    }
    let (slope, _) = linear_fit(&times, &logs);
    Ok(Check::judged(
        NAME,
        (slope - expected).abs(),
        tolerance,
        format!("slope {slope:.6} vs gamma - 1 = {expected:.6}"),
    ))
}

/// Relative gap between the ERC increment and `-lr (N/2) grad L_ERC`, the
/// gradient taken by central differences with the Bellman target frozen.
pub fn fd_gradient_error(mdp: &TabularMdp, policy: &Policy, q: &QTable, cfg: &ErcConfig) -> Result<f64> {
    let target = bellman_backup(mdp, policy, q)?;
    let updated = erc_update_sweep(mdp, policy, q, cfg, 0)?;
    let lr = cfg.lr.at(0);
    let n = q.len();
    let mut predicted = Vec::with_capacity(n);
    for i in 0..n {
        let mut plus = q.as_slice().to_vec();
        let mut minus = plus.clone();
        plus[i] += FD_STEP;
        minus[i] -= FD_STEP;
        let plus = QTable::new(q.n_states(), q.n_actions(), plus)?;
        let minus = QTable::new(q.n_states(), q.n_actions(), minus)?;
        let grad = (erc_loss(&plus, &target, cfg)? - erc_loss(&minus, &target, cfg)?) / (2.0 * FD_STEP);
        predicted.push(-lr * 0.5 * n as f64 * grad);
    }
    let actual = sub(updated.as_slice(), q.as_slice());
    let scale = l2_norm(&actual).max(f64::MIN_POSITIVE);
    Ok(l2_norm(&sub(&actual, &predicted)) / scale)
}

/// Finite-difference check over `n_mdps` random MDPs and every beta.
pub fn check_fd_gradient(n_mdps: usize, betas: &[f64], gamma: f64, seed: u64) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for k in 0..n_mdps as u64 {
        let (ns, na) = (2 + (k % 4) as usize, 1 + (k % 3) as usize);
        let mdp = random_mdp(ns, na, gamma, seed.wrapping_add(k))?;
        let policy = Policy::uniform(ns, na);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k) ^ 0x5eed);
        let q = QTable::new(ns, na, (0..ns * na).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        for &beta in betas {
            worst = worst.max(fd_gradient_error(&mdp, &policy, &q, &ErcConfig::new(beta, FD_LR))?);
        }
    }
    Ok(Check::judged(
        "erc_fd_gradient",
        worst,
        FD_REL_TOL,
        format!("{n_mdps} random MDPs, beta in {betas:?}, h {FD_STEP:e}"),
    ))
}

/// Outcome of iterating ERC sweeps from `Q0 = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRun {
    pub sweeps: usize,
    pub last_change: f64,
    pub converged: bool,
    pub residual: f64,
    pub q: QTable,
}

/// Iterates ERC until the sup-norm step change drops below `1e-10` or the
/// sweep cap is hit, then measures the regularized fixed-point residual.
pub fn check_erc_convergence(
    mdp: &TabularMdp,
    policy: &Policy,
    cfg: &ErcConfig,
    max_sweeps: usize,
) -> Result<ConvergenceRun> {
    let mut q = QTable::zeros_for(mdp);
    let mut last_change = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        let next = erc_update_sweep(mdp, policy, &q, cfg, sweeps)?;
        sweeps += 1;
        last_change = next.sup_distance(&q);
        q = next;
        if last_change < CONVERGENCE_STEP_TOL {
            break;
        }
    }
    let residual = regularized_fixed_point_check(mdp, policy, &q, cfg)?;
    Ok(ConvergenceRun {
        sweeps,
        last_change,
        converged: last_change < CONVERGENCE_STEP_TOL,
        residual,
        q,
    })
}

impl ConvergenceRun {
    pub fn to_check(&self) -> Check {
        let mut check = Check::judged(
            "erc_convergence",
            self.residual,
            FIXED_POINT_TOL,
            format!(
                "{} sweeps, last step change {:.3e}, residual of shifted Bellman equation",
                self.sweeps, self.last_change
            ),
        );
        if !self.converged {
            check.status = CheckStatus::Fail;
        }
        check
    }
}

/// `|R_push - (var Q + var BQ - 2 cov)|` maximized over random table pairs.
pub fn check_variance_identity(pairs: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let n = rng.random_range(1..=50);
        let mut draw = || -> Result<QTable> {
            QTable::new(n, 1, (0..n).map(|_| rng.random_range(-5.0..5.0)).collect())
        };
        let (q, target) = (draw()?, draw()?);
        worst = worst.max(variance_decomposition(&q, &target)?.identity_residual);
    }
    Ok(Check::judged(
        "variance_identity",
        worst,
        IDENTITY_TOL,
        format!("{pairs} random pairs"),
    ))
}

/// Runs every check against the configured environment.
pub fn run_battery(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let mdp = cfg.build_mdp()?;
    let policy = cfg.build_policy(&mdp)?;
    let seed = cfg.seeds[0];
    let rate_matrix = match cfg.rate_instance {
        RateInstance::Constructed => constructed_instance(),
        RateInstance::Identity => InducedTransition::from_matrix(Mat::identity(4, 4))?,
    };
    let checks = vec![
        check_closed_form(&mdp, &policy, &CLOSED_FORM_TIMES, RK4_DT, CLOSED_FORM_TOL)?,
        check_rate(&rate_matrix, cfg.gamma)?,
        check_fd_gradient(FD_MDPS, &FD_BETAS, cfg.gamma, seed)?,
        check_erc_convergence(&mdp, &policy, &cfg.erc_config(), MAX_CONVERGENCE_SWEEPS)?.to_check(),
        check_variance_identity(IDENTITY_PAIRS, seed)?,
    ];
    Ok(VerifyReport {
        checks,
        files: Vec::new(),
    })
}

/// Runs the battery and writes `verify.csv` and `verify.txt`.
pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    let mut report = run_battery(cfg)?;
    let mut out = OutputDir::create(cfg)?;
    out.write("verify.csv", &report.to_csv())?;
    out.write("verify.txt", &report.to_string())?;
    report.files = out.into_files();
    Ok(report)
}
