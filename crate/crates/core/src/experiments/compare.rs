use std::fmt::Write as _;
use std::path::PathBuf;

use crate::dynamics::run_learner;
use crate::erc::{learner_trace_csv, ErcConfig, LearnerRow};
use crate::error::{Error, Result};
use crate::mdp::{solve_q_star, Policy, TabularMdp};
use crate::numeric::{fmt_f64, sub};
use crate::spectral::distance_to_one_eigensubspace;

use super::plot::{AxisScale, Figure, Panel, Series};
use super::{aggregate, burn_in, ordered_parallel, ExperimentConfig, Learner, OutputDir};

const MAX_PLOTTED_POINTS: usize = 1000;

/// Per-step population mean and standard deviation across seeds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Band {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnerCurves {
    pub learner: Learner,
    /// Distance of `Q_t - Q*` to `span{e}`.
    pub distance: Band,
    /// Mean over entries of `|Q_t - Q*|`.
    pub abs_error: Band,
}

#[derive(Clone, Debug)]
pub struct CompareOutcome {
    pub steps: usize,
    pub burn_in: usize,
    pub curves: Vec<LearnerCurves>,
    pub files: Vec<PathBuf>,
}

impl CompareOutcome {
    pub fn curves(&self, learner: Learner) -> Option<&LearnerCurves> {
        self.curves.iter().find(|c| c.learner == learner)
    }

    /// Steps at or after burn-in where `a`'s mean distance exceeds `b`'s.
    pub fn distance_violations(&self, a: Learner, b: Learner) -> Option<usize> {
        let (a, b) = (self.curves(a)?, self.curves(b)?);
        Some(
            (self.burn_in..=self.steps)
                .filter(|&k| a.distance.mean[k] > b.distance.mean[k])
                .count(),
        )
    }

    pub fn final_abs_error(&self, learner: Learner) -> Option<f64> {
        self.curves(learner).map(|c| c.abs_error.mean[self.steps])
    }
}

struct SeedRun {
    distance: Vec<f64>,
    abs_error: Vec<f64>,
    rows: Vec<LearnerRow>,
}

fn check_learners(cfg: &ExperimentConfig) -> Result<()> {
    for l in &cfg.learners {
        if !matches!(l, Learner::Td | Learner::Erc | Learner::ErcStar) {
            return Err(Error::Config(format!("compare runs td, erc and erc_star, not {l}")));
        }
    }
    if !cfg.learners.contains(&Learner::Td) || !cfg.learners.contains(&Learner::Erc) {
        return Err(Error::Config("compare needs at least td and erc".into()));
    }
    let mut seen = cfg.learners.clone();
    seen.sort_by_key(|l| l.as_str());
    seen.dedup();
    if seen.len() != cfg.learners.len() {
        return Err(Error::Config("learners must be distinct".into()));
    }
    Ok(())
}

/// Learner-major, then seed, then step.
pub type PerSeedRows = Vec<Vec<Vec<LearnerRow>>>;

/// Runs every learner from the same per-seed `Q0` and aggregates per step.
/// With `keep_rows` the per-seed learner traces are returned as well,
/// indexed `[learner][seed]`.
pub fn compare_curves(
    cfg: &ExperimentConfig,
    mdp: &TabularMdp,
    policy: &Policy,
    keep_rows: bool,
) -> Result<(Vec<LearnerCurves>, PerSeedRows)> {
    let q_star = solve_q_star(mdp, policy)?;
    let jobs: Vec<(Learner, u64)> = cfg
        .learners
        .iter()
        .flat_map(|&l| cfg.seeds.iter().map(move |&s| (l, s)))
        .collect();
    let runs = ordered_parallel(&jobs, |&(learner, seed)| {
        let stepper = cfg
            .stepper(learner)
            .ok_or_else(|| Error::Config(format!("{learner} has no sweep")))?;
        let row_cfg = match learner {
            Learner::Td => ErcConfig {
                beta: 0.0,
                ..cfg.erc_config()
            },
            _ => cfg.erc_config(),
        };
        let q0 = cfg.initial_table(mdp, seed);
        let mut run = SeedRun {
            distance: Vec::with_capacity(cfg.steps + 1),
            abs_error: Vec::with_capacity(cfg.steps + 1),
            rows: Vec::new(),
        };
        run_learner(mdp, policy, &q0, &q_star, &stepper, cfg.steps, |step, _, q| {
            let error = sub(q.as_slice(), q_star.as_slice());
            run.distance.push(distance_to_one_eigensubspace(&error));
            run.abs_error
                .push(error.iter().map(|e| e.abs()).sum::<f64>() / error.len() as f64);
            if keep_rows {
                run.rows.push(LearnerRow::measure(mdp, policy, q, &q_star, &row_cfg, step));
            }
        })?;
        Ok(run)
    })?;

    let per_learner = cfg.seeds.len();
    let mut curves = Vec::new();
    let mut rows = Vec::new();
    for (chunk, &learner) in runs.chunks(per_learner).zip(&cfg.learners) {
        let distances: Vec<Vec<f64>> = chunk.iter().map(|r| r.distance.clone()).collect();
        let errors: Vec<Vec<f64>> = chunk.iter().map(|r| r.abs_error.clone()).collect();
        curves.push(LearnerCurves {
            learner,
            distance: aggregate(&distances),
            abs_error: aggregate(&errors),
        });
        rows.push(chunk.iter().map(|r| r.rows.clone()).collect());
    }
    Ok((curves, rows))
}

/// Writes `compare.csv`, `compare_summary.csv`, the two-panel
/// `compare.svg`, and with `full` one learner trace per learner and seed.
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<CompareOutcome> {
    cfg.validate()?;
    check_learners(cfg)?;
    let mdp = cfg.build_mdp()?;
    let policy = cfg.build_policy(&mdp)?;
    let (curves, rows) = compare_curves(cfg, &mdp, &policy, cfg.full)?;
    let outcome = CompareOutcome {
        steps: cfg.steps,
        burn_in: burn_in(cfg.steps),
        curves,
        files: Vec::new(),
    };

    let mut out = OutputDir::create(cfg)?;
    let mut table = String::from("step");
    for c in &outcome.curves {
        let l = c.learner;
        let _ = write!(
            table,
            ",{l}_distance_mean,{l}_distance_std,{l}_abs_error_mean,{l}_abs_error_std"
        );
    }
    table.push('\n');
    for k in 0..=cfg.steps {
        table.push_str(&k.to_string());
        for c in &outcome.curves {
            let _ = write!(
                table,
                ",{},{},{},{}",
                fmt_f64(c.distance.mean[k]),
                fmt_f64(c.distance.std[k]),
                fmt_f64(c.abs_error.mean[k]),
                fmt_f64(c.abs_error.std[k])
            );
        }
        table.push('\n');
    }
    out.write("compare.csv", &table)?;

    let mut summary = String::from("learner,final_distance_mean,final_abs_error_mean,distance_above_td_after_burn_in\n");
    for c in &outcome.curves {
        let violations = outcome
            .distance_violations(c.learner, Learner::Td)
            .expect("td is present");
        let _ = writeln!(
            summary,
            "{},{},{},{violations}",
            c.learner,
            fmt_f64(c.distance.mean[cfg.steps]),
            fmt_f64(c.abs_error.mean[cfg.steps])
        );
    }
    out.write("compare_summary.csv", &summary)?;

    let series = |band: fn(&LearnerCurves) -> &Band| -> Vec<Series> {
        outcome
            .curves
            .iter()
            .map(|c| {
                let points = band(c).mean.iter().enumerate().map(|(k, &v)| (k as f64, v)).collect();
                Series::new(c.learner.as_str(), points).thinned(MAX_PLOTTED_POINTS)
            })
            .collect()
    };
    let mut distance = Panel::new("distance to span{e}", "step", "mean distance", AxisScale::Linear, AxisScale::Log);
    distance.series = series(|c| &c.distance);
    let mut error = Panel::new(
        "approximation error",
        "step",
        "mean |Q - Q*|",
        AxisScale::Linear,
        AxisScale::Log,
    );
    error.series = series(|c| &c.abs_error);
    out.figure("compare", &Figure::new(vec![distance, error]))?;

    if cfg.full {
        for (learner, per_seed) in cfg.learners.iter().zip(&rows) {
            for (seed, seed_rows) in cfg.seeds.iter().zip(per_seed) {
                out.write(&format!("trace_{learner}_seed{seed}.csv"), &learner_trace_csv(seed_rows))?;
            }
        }
    }

    Ok(CompareOutcome {
        files: out.into_files(),
        ..outcome
    })
}
