//! Deterministic experiment drivers.
//!
//! Each `cmd_*` function takes an [`ExperimentConfig`], writes CSV and SVG
//! files under `config.out`, and returns the computed numbers so callers can
//! assert on them without re-reading files. Seeds run in parallel on a pool
//! sized by `EIGENPATH_THREADS`; results are always reduced in seed order.

mod compare;
mod config;
mod dispersion;
mod path;
pub mod plot;
mod solve;
mod verify;

use std::path::PathBuf;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub use compare::{cmd_compare, compare_curves, Band, CompareOutcome, LearnerCurves, PerSeedRows};
pub use config::{perturbed_zero_table, ExperimentConfig, Learner, PolicySource, RateInstance};
pub use dispersion::{cmd_dispersion, dispersion_index, dispersion_runs, DispersionOutcome, DispersionRun};
pub use path::{cmd_path, inherent_paths, PathOutcome, PathRun};
pub use solve::{cmd_solve, SolveOutcome};
pub use verify::{
    check_closed_form, check_erc_convergence, check_fd_gradient, check_rate, check_variance_identity,
    cmd_verify, constructed_instance, fd_gradient_error, run_battery, Check, CheckStatus, ConvergenceRun,
    VerifyReport,
};

/// Fraction of the initial value that counts as "reached" on a path.
pub const PATH_HIT_FRACTION: f64 = 0.1;

/// First step index compared after burn-in: 10% of the horizon, rounded up.
pub fn burn_in(steps: usize) -> usize {
    steps.div_ceil(10)
}

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "EIGENPATH_THREADS";

/// Thread cap from `EIGENPATH_THREADS`; `None` when unset.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(raw) => raw
            .trim()
            .parse()
            .ok()
            .filter(|&n: &usize| n > 0)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={raw:?} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

/// Pool sized by `EIGENPATH_THREADS`, or rayon's default when unset.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs `job` for every item in parallel and returns results in input order.
pub(crate) fn ordered_parallel<I, T>(items: &[I], job: impl Fn(&I) -> Result<T> + Sync) -> Result<Vec<T>>
where
    I: Sync,
    T: Send,
{
    let pool = thread_pool()?;
    pool.install(|| items.par_iter().map(&job).collect())
}

/// Tracks files written into the output directory.
pub(crate) struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    /// Creates the directory and records the resolved config inside it.
    pub(crate) fn create(cfg: &ExperimentConfig) -> Result<Self> {
        let root = cfg.out.clone();
        std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let mut dir = OutputDir {
            root,
            written: Vec::new(),
        };
        dir.write("config.toml", &cfg.to_toml()?)?;
        Ok(dir)
    }

    pub(crate) fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub(crate) fn figure(&mut self, stem: &str, figure: &plot::Figure) -> Result<()> {
        self.write(&format!("{stem}.svg"), &figure.to_svg())?;
        self.write(&format!("{stem}_svg.csv"), &figure.to_csv())
    }

    pub(crate) fn into_files(self) -> Vec<PathBuf> {
        self.written
    }
}

/// Population mean and standard deviation of equal-length series, per index.
pub(crate) fn aggregate(series: &[Vec<f64>]) -> Band {
    let len = series.first().map_or(0, Vec::len);
    let n = series.len() as f64;
    let mut band = Band {
        mean: Vec::with_capacity(len),
        std: Vec::with_capacity(len),
    };
    for k in 0..len {
        let m = series.iter().map(|s| s[k]).sum::<f64>() / n;
        let v = series.iter().map(|s| (s[k] - m).powi(2)).sum::<f64>() / n;
        band.mean.push(m);
        band.std.push(v.sqrt());
    }
    band
}
