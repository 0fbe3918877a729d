use std::fmt::Write as _;
use std::path::PathBuf;

use crate::dynamics::{integrate_td_ode, record_inherent_path, PathTrace};
use crate::envs::monte_carlo_path;
use crate::error::{Error, Result};
use crate::mdp::{Policy, QTable, TabularMdp};
use crate::numeric::fmt_f64;

use super::plot::{AxisScale, Figure, Panel, Series};
use super::{ordered_parallel, ExperimentConfig, Learner, OutputDir, PATH_HIT_FRACTION};

const MAX_PLOTTED_POINTS: usize = 1000;

/// One learning path and the rows where each series first falls to 10% of
/// its initial value.
#[derive(Clone, Debug)]
pub struct PathRun {
    /// `None` for the seed-free ODE trace.
    pub seed: Option<u64>,
    pub trace: PathTrace,
    pub distance_hit: Option<usize>,
    pub norm_hit: Option<usize>,
}

impl PathRun {
    fn new(seed: Option<u64>, trace: PathTrace) -> Self {
        PathRun {
            seed,
            distance_hit: PathTrace::first_below(&trace.subspace_distances, PATH_HIT_FRACTION),
            norm_hit: PathTrace::first_below(&trace.error_norms, PATH_HIT_FRACTION),
            trace,
        }
    }

    /// Distance reaches its threshold strictly earlier than the norm.
    pub fn distance_leads(&self) -> bool {
        match (self.distance_hit, self.norm_hit) {
            (Some(d), Some(n)) => d < n,
            (Some(_), None) => true,
            _ => false,
        }
    }

    fn label(&self) -> String {
        self.seed.map_or_else(|| "ode".into(), |s| format!("seed {s}"))
    }
}

#[derive(Clone, Debug)]
pub struct PathOutcome {
    pub learner: Learner,
    pub runs: Vec<PathRun>,
    pub files: Vec<PathBuf>,
}

impl PathOutcome {
    pub fn leading_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.distance_leads()).count()
    }
}

/// Computes the paths for `cfg.learner` without writing anything.
///
/// `td` runs one trace per seed from a perturbed `Q0`; `ode` integrates once
/// from `Q0 = 0` up to `steps * dt`; `mc` logs the running Monte-Carlo
/// estimate every `mc_every` episodes, one trace per seed.
pub fn inherent_paths(cfg: &ExperimentConfig, mdp: &TabularMdp, policy: &Policy) -> Result<Vec<PathRun>> {
    match cfg.learner {
        Learner::Td => {
            let stepper = cfg.stepper(Learner::Td).expect("td is a sweep learner");
            ordered_parallel(&cfg.seeds, |&seed| {
                let q0 = cfg.initial_table(mdp, seed);
                Ok(PathRun::new(Some(seed), record_inherent_path(mdp, policy, &q0, &stepper, cfg.steps)?))
            })
        }
        Learner::Ode => {
            let q0 = QTable::zeros_for(mdp);
            let trace = integrate_td_ode(mdp, policy, &q0, cfg.steps as f64 * cfg.dt, cfg.dt)?;
            Ok(vec![PathRun::new(None, trace)])
        }
        Learner::Mc => ordered_parallel(&cfg.seeds, |&seed| {
            let trace = monte_carlo_path(mdp, policy, cfg.episodes, cfg.mc_horizon(), seed, cfg.mc_every)?;
            Ok(PathRun::new(Some(seed), trace))
        }),
        other => Err(Error::Config(format!("path supports td, ode and mc, not {other}"))),
    }
}

/// Writes one trace CSV per run, `path_summary.csv`, and the overlay
/// `path.svg` of subspace distance against error norm.
pub fn cmd_path(cfg: &ExperimentConfig) -> Result<PathOutcome> {
    cfg.validate()?;
    if !matches!(cfg.learner, Learner::Td | Learner::Ode | Learner::Mc) {
        return Err(Error::Config(format!("path supports td, ode and mc, not {}", cfg.learner)));
    }
    let mdp = cfg.build_mdp()?;
    let policy = cfg.build_policy(&mdp)?;
    let runs = inherent_paths(cfg, &mdp, &policy)?;

    let mut out = OutputDir::create(cfg)?;
    let learner = cfg.learner;
    let mut panel = Panel::new(
        &format!("{learner} path"),
        "error norm",
        "distance to span{e}",
        AxisScale::Linear,
        AxisScale::Linear,
    );
    let mut summary = String::from("run,distance_hit_time,norm_hit_time,distance_leads\n");
    for run in &runs {
        let name = match run.seed {
            Some(seed) => format!("path_{learner}_seed{seed}.csv"),
            None => format!("path_{learner}.csv"),
        };
        out.write(&name, &run.trace.to_csv(cfg.full))?;
        let hit_time = |i: Option<usize>| i.map(|i| fmt_f64(run.trace.times[i])).unwrap_or_default();
        let _ = writeln!(
            summary,
            "{},{},{},{}",
            run.label(),
            hit_time(run.distance_hit),
            hit_time(run.norm_hit),
            run.distance_leads()
        );
        let points = run
            .trace
            .error_norms
            .iter()
            .copied()
            .zip(run.trace.subspace_distances.iter().copied())
            .collect();
        panel = panel.with_series(Series::new(run.label(), points).thinned(MAX_PLOTTED_POINTS));
    }
    out.write("path_summary.csv", &summary)?;
    out.figure("path", &Figure::new(vec![panel]))?;

    Ok(PathOutcome {
        learner,
        runs,
        files: out.into_files(),
    })
}
