use std::fmt::Write as _;
use std::path::PathBuf;

use crate::dynamics::run_learner;
use crate::error::{Error, Result};
use crate::mdp::{solve_q_star, Policy, TabularMdp};
use crate::numeric::{fmt_f64, mean, population_variance};

use super::plot::{AxisScale, Figure, Panel, Series};
use super::{ordered_parallel, ExperimentConfig, Learner, OutputDir};

/// Below this `|mean|` the index is undefined rather than huge.
pub const DISPERSION_MEAN_FLOOR: f64 = 1e-9;

const MAX_PLOTTED_POINTS: usize = 1000;

/// Population variance over mean of the entries, or `None` when the mean is
/// within [`DISPERSION_MEAN_FLOOR`] of zero.
pub fn dispersion_index(values: &[f64]) -> Option<f64> {
    let m = mean(values);
    (m.abs() >= DISPERSION_MEAN_FLOOR).then(|| population_variance(values) / m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DispersionRun {
    pub learner: Learner,
    pub seed: u64,
    /// Index of the Q table at every step, including the initial one.
    pub index: Vec<Option<f64>>,
}

impl DispersionRun {
    /// Mean over the steps where the index is defined.
    pub fn trajectory_mean(&self) -> Option<f64> {
        let defined: Vec<f64> = self.index.iter().flatten().copied().collect();
        (!defined.is_empty()).then(|| mean(&defined))
    }
}

#[derive(Clone, Debug)]
pub struct DispersionOutcome {
    pub runs: Vec<DispersionRun>,
    pub files: Vec<PathBuf>,
}

impl DispersionOutcome {
    /// Seed average of the per-run trajectory means, skipping runs where the
    /// index is never defined.
    pub fn trajectory_mean(&self, learner: Learner) -> Option<f64> {
        let means: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| r.learner == learner)
            .filter_map(DispersionRun::trajectory_mean)
            .collect();
        (!means.is_empty()).then(|| mean(&means))
    }
}

/// Index trajectories for every learner and seed, ordered learner-major.
pub fn dispersion_runs(cfg: &ExperimentConfig, mdp: &TabularMdp, policy: &Policy) -> Result<Vec<DispersionRun>> {
    let q_star = solve_q_star(mdp, policy)?;
    let jobs: Vec<(Learner, u64)> = cfg
        .learners
        .iter()
        .flat_map(|&l| cfg.seeds.iter().map(move |&s| (l, s)))
        .collect();
    ordered_parallel(&jobs, |&(learner, seed)| {
        let stepper = cfg
            .stepper(learner)
            .ok_or_else(|| Error::Config(format!("{learner} has no sweep")))?;
        let q0 = cfg.initial_table(mdp, seed);
        let mut index = Vec::with_capacity(cfg.steps + 1);
        run_learner(mdp, policy, &q0, &q_star, &stepper, cfg.steps, |_, _, q| {
            index.push(dispersion_index(q.as_slice()));
        })?;
        Ok(DispersionRun { learner, seed, index })
    })
}

/// Writes `dispersion.csv` (seed-averaged index per step, with the number of
/// seeds where it is defined), `dispersion_summary.csv` (per-seed
/// trajectory means) and `dispersion.svg`.
pub fn cmd_dispersion(cfg: &ExperimentConfig) -> Result<DispersionOutcome> {
    cfg.validate()?;
    if cfg.learners.is_empty() {
        return Err(Error::Config("dispersion needs at least one learner".into()));
    }
    if let Some(l) = cfg
        .learners
        .iter()
        .find(|l| !matches!(l, Learner::Td | Learner::Erc | Learner::ErcStar))
    {
        return Err(Error::Config(format!("dispersion runs td, erc and erc_star, not {l}")));
    }
    let mdp = cfg.build_mdp()?;
    let policy = cfg.build_policy(&mdp)?;
    let runs = dispersion_runs(cfg, &mdp, &policy)?;
    let per_learner = cfg.seeds.len();

    let mut out = OutputDir::create(cfg)?;
    let mut table = String::from("step");
    for l in &cfg.learners {
        let _ = write!(table, ",{l}_index_mean,{l}_defined_seeds");
    }
    table.push('\n');
    let mut panel = Panel::new(
        "index of dispersion",
        "step",
        "var(Q) / mean(Q)",
        AxisScale::Linear,
        AxisScale::Linear,
    );
    let mut curves: Vec<Vec<(f64, f64)>> = vec![Vec::new(); cfg.learners.len()];
    for k in 0..=cfg.steps {
        table.push_str(&k.to_string());
        for (li, group) in runs.chunks(per_learner).enumerate() {
            let defined: Vec<f64> = group.iter().filter_map(|r| r.index[k]).collect();
            if defined.is_empty() {
                let _ = write!(table, ",undefined,0");
            } else {
                let m = mean(&defined);
                curves[li].push((k as f64, m));
                let _ = write!(table, ",{},{}", fmt_f64(m), defined.len());
            }
        }
        table.push('\n');
    }
    out.write("dispersion.csv", &table)?;
    for (l, points) in cfg.learners.iter().zip(curves) {
        panel = panel.with_series(Series::new(l.as_str(), points).thinned(MAX_PLOTTED_POINTS));
    }
    out.figure("dispersion", &Figure::new(vec![panel]))?;

    let mut summary = String::from("learner,seed,trajectory_mean_index\n");
    for r in &runs {
        let value = r.trajectory_mean().map_or_else(|| "undefined".into(), fmt_f64);
        let _ = writeln!(summary, "{},{},{value}", r.learner, r.seed);
    }
    out.write("dispersion_summary.csv", &summary)?;

    Ok(DispersionOutcome {
        runs,
        files: out.into_files(),
    })
}
