use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::Result;
use crate::mdp::{build_induced_transition, solve_q_star, QTable};
use crate::numeric::fmt_f64;
use crate::spectral::{check_assumption_one, eigendecompose, AssumptionReport, EigenDecomposition, Violation, ASSUMPTION_TOL};

use super::{ExperimentConfig, OutputDir};

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub q_star: QTable,
    pub spectrum: EigenDecomposition,
    pub assumption: AssumptionReport,
    pub files: Vec<PathBuf>,
}

/// Writes `mdp.json`, `q_star.csv`, `spectrum.csv` and `assumption.txt`.
pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    let mdp = cfg.build_mdp()?;
    let policy = cfg.build_policy(&mdp)?;
    let q_star = solve_q_star(&mdp, &policy)?;
    let p_pi = build_induced_transition(&mdp, &policy)?;
    let spectrum = eigendecompose(&p_pi)?;
    let assumption = check_assumption_one(&spectrum, ASSUMPTION_TOL);

    let mut out = OutputDir::create(cfg)?;
    out.write("mdp.json", &mdp.to_json()?)?;
    out.write("q_star.csv", &q_table_csv(&q_star))?;
    out.write("spectrum.csv", &spectrum.spectral_csv())?;
    out.write("assumption.txt", &assumption_text(&spectrum, &assumption))?;

    Ok(SolveOutcome {
        q_star,
        spectrum,
        assumption,
        files: out.into_files(),
    })
}

fn q_table_csv(q: &QTable) -> String {
    let mut out = String::from("state,action,q\n");
    for s in 0..q.n_states() {
        for a in 0..q.n_actions() {
            let _ = writeln!(out, "{s},{a},{}", fmt_f64(q.get(s, a)));
        }
    }
    out
}

fn assumption_text(spectrum: &EigenDecomposition, report: &AssumptionReport) -> String {
    let mut out = String::new();
    let dominant = spectrum.eigenvalues[0];
    let _ = writeln!(out, "holds: {}", report.holds);
    let _ = writeln!(out, "summary: {}", report.summary());
    let _ = writeln!(out, "dominant_eigenvalue: {} {:+}i", fmt_f64(dominant.re), dominant.im);
    let _ = writeln!(out, "diagonalizable: {}", spectrum.diagonalizable);
    let _ = writeln!(out, "basis_sigma_min: {}", fmt_f64(spectrum.basis_sigma_min));
    let _ = writeln!(out, "max_eigenpair_residual: {}", fmt_f64(spectrum.max_residual));
    for v in &report.violations {
        let line = match v {
            Violation::Complex { index, im } => format!("complex eigenvalue at {index}: im {}", fmt_f64(*im)),
            Violation::RankDeficient { sigma_min } => format!("rank-deficient eigenbasis: sigma_min {}", fmt_f64(*sigma_min)),
            Violation::MagnitudeTie { index, gap } => {
                format!("magnitude tie between {index} and {}: gap {}", index + 1, fmt_f64(*gap))
            }
        };
        let _ = writeln!(out, "violation: {line}");
    }
    out
}
