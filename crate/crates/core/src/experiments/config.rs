use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::Stepper;
use crate::envs::{env_by_name, min_horizon};
use crate::erc::{ErcConfig, LearningRate};
use crate::error::{Error, Result};
use crate::mdp::{Policy, QTable, TabularMdp};

/// Update rule driven by an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    Td,
    Erc,
    ErcStar,
    Ode,
    Mc,
}

impl Learner {
    pub fn as_str(self) -> &'static str {
        match self {
            Learner::Td => "td",
            Learner::Erc => "erc",
            Learner::ErcStar => "erc_star",
            Learner::Ode => "ode",
            Learner::Mc => "mc",
        }
    }
}

impl fmt::Display for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Learner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "td" => Learner::Td,
            "erc" => Learner::Erc,
            "erc_star" => Learner::ErcStar,
            "ode" => Learner::Ode,
            "mc" => Learner::Mc,
            other => {
                return Err(Error::Config(format!(
                    "unknown learner `{other}` (expected td, erc, erc_star, ode or mc)"
                )))
            }
        })
    }
}

/// Where the evaluated policy comes from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySource {
    #[default]
    Uniform,
    /// JSON file in the `{"probs": [[..], ..]}` layout.
    File(PathBuf),
}

/// Stochastic matrix used by the rate check of the verification battery.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateInstance {
    /// Symmetric 4x4 with a simple, real, strictly ordered spectrum.
    #[default]
    Constructed,
    /// The 4x4 identity, which violates the spectral assumption.
    Identity,
}

/// Everything that determines an experiment's output bytes.
///
/// Serialized as TOML; every field has a default so a config file only lists
/// what it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `frozenlake4x4`, `cliffwalking`, `random:<n_s>x<n_a>:<seed>` or the
    /// path of a saved MDP (`*.json`).
    pub env: String,
    pub policy: PolicySource,
    pub gamma: f64,
    /// Learner for `path`.
    pub learner: Learner,
    /// Learners for `compare` and `dispersion`, in output column order.
    pub learners: Vec<Learner>,
    pub beta: f64,
    pub lr: f64,
    /// Switches every sweep learner to `lr / (1 + t / lr_decay_steps)`.
    pub lr_decay_steps: Option<f64>,
    pub truncation_enabled: bool,
    pub r_max: f64,
    pub r_min: f64,
    /// Sweeps for the TD-style learners.
    pub steps: usize,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// Half-width of the uniform per-entry perturbation added to `Q0 = 0`.
    pub q0_scale: f64,
    /// RK4 step for the `ode` learner, which integrates to `steps * dt`.
    pub dt: f64,
    /// Episodes per seed for the `mc` learner.
    pub episodes: usize,
    /// Monte-Carlo truncation horizon; defaults to the smallest `h` with
    /// `gamma^h <= 1e-10`.
    pub horizon: Option<usize>,
    /// Monte-Carlo path logging interval in episodes.
    pub mc_every: usize,
    /// Adds per-entry error columns and per-seed learner traces.
    pub full: bool,
    pub rate_instance: RateInstance,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let erc = ErcConfig::default();
        ExperimentConfig {
            env: "frozenlake4x4".into(),
            policy: PolicySource::Uniform,
            gamma: 0.9,
            learner: Learner::Td,
            learners: vec![Learner::Td, Learner::Erc, Learner::ErcStar],
            beta: erc.beta,
            lr: 0.01,
            lr_decay_steps: None,
            truncation_enabled: erc.truncation_enabled,
            r_max: erc.r_max,
            r_min: erc.r_min,
            steps: 5000,
            seeds: (0..10).collect(),
            out: PathBuf::from("out"),
            q0_scale: 1.0,
            dt: 0.01,
            episodes: 100_000,
            horizon: None,
            mc_every: 1000,
            full: false,
            rate_instance: RateInstance::Constructed,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Rejects values no command can run with. Errors are [`Error::Config`].
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma {} must lie in [0, 1)", self.gamma));
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if !(self.q0_scale >= 0.0) || !self.q0_scale.is_finite() {
            return bad(format!("q0_scale {} must be finite and >= 0", self.q0_scale));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt {} must be positive", self.dt));
        }
        if self.episodes == 0 || self.mc_every == 0 {
            return bad("episodes and mc_every must be at least 1".into());
        }
        if let Some(h) = self.horizon {
            let minimum = min_horizon(self.gamma);
            if h < minimum {
                return bad(format!("horizon {h} below the minimum {minimum} for gamma {}", self.gamma));
            }
        }
        super::thread_cap()?;
        self.erc_config()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn erc_config(&self) -> ErcConfig {
        ErcConfig {
            beta: self.beta,
            lr: match self.lr_decay_steps {
                Some(decay_steps) => LearningRate::Harmonic {
                    initial: self.lr,
                    decay_steps,
                },
                None => LearningRate::Constant(self.lr),
            },
            truncation_enabled: self.truncation_enabled,
            r_max: self.r_max,
            r_min: self.r_min,
        }
    }

    /// Stepper for a sweep-based learner; `None` for Monte-Carlo.
    pub fn stepper(&self, learner: Learner) -> Option<Stepper> {
        match learner {
            // a scheduled TD run is ERC with beta = 0, which is bitwise TD
            Learner::Td if self.lr_decay_steps.is_some() => Some(Stepper::Erc(ErcConfig {
                beta: 0.0,
                ..self.erc_config()
            })),
            Learner::Td => Some(Stepper::Td { lr: self.lr }),
            Learner::Erc => Some(Stepper::Erc(self.erc_config())),
            Learner::ErcStar => Some(Stepper::ErcStar(self.erc_config())),
            Learner::Ode => Some(Stepper::Ode { dt: self.dt }),
            Learner::Mc => None,
        }
    }

    pub fn mc_horizon(&self) -> usize {
        self.horizon.unwrap_or_else(|| min_horizon(self.gamma))
    }

    /// A name ending in `.json` loads a saved MDP; its stored discount is
    /// replaced by `gamma`.
    pub fn build_mdp(&self) -> Result<TabularMdp> {
        if self.env.ends_with(".json") {
            return TabularMdp::load(&self.env)?.with_gamma(self.gamma);
        }
        match env_by_name(&self.env, self.gamma) {
            Err(Error::UnknownEnv(name)) => Err(Error::Config(format!("unknown environment `{name}`"))),
            other => other,
        }
    }

    pub fn build_policy(&self, mdp: &TabularMdp) -> Result<Policy> {
        let policy = match &self.policy {
            PolicySource::Uniform => Policy::uniform(mdp.n_states(), mdp.n_actions()),
            PolicySource::File(path) => Policy::load(path)?,
        };
        if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
            return Err(Error::Config(format!(
                "policy is {}x{} but `{}` is {}x{}",
                policy.n_states(),
                policy.n_actions(),
                self.env,
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(policy)
    }

    /// `Q0 = 0` plus a per-entry uniform perturbation in
    /// `[-q0_scale, q0_scale)` drawn from a ChaCha stream keyed by `seed`.
    pub fn initial_table(&self, mdp: &TabularMdp, seed: u64) -> QTable {
        perturbed_zero_table(mdp, self.q0_scale, seed)
    }
}

pub fn perturbed_zero_table(mdp: &TabularMdp, scale: f64, seed: u64) -> QTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..mdp.n_pairs())
        .map(|_| if scale > 0.0 { scale * rng.random_range(-1.0..1.0) } else { 0.0 })
        .collect();
    QTable::new(mdp.n_states(), mdp.n_actions(), values).expect("finite perturbation")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_keeps_every_field() {
        let cfg = ExperimentConfig {
            policy: PolicySource::File("pi.json".into()),
            lr_decay_steps: Some(100.0),
            horizon: Some(400),
            learners: vec![Learner::Td, Learner::Erc],
            ..Default::default()
        };
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_file_falls_back_to_defaults() {
        let cfg = ExperimentConfig::from_toml("env = \"cliffwalking\"\nbeta = 0.5\n").unwrap();
        assert_eq!(cfg.env, "cliffwalking");
        assert_eq!(cfg.beta, 0.5);
        assert_eq!(cfg.steps, ExperimentConfig::default().steps);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        assert!(matches!(ExperimentConfig::from_toml("stepz = 3"), Err(Error::Config(_))));
        let cfg = ExperimentConfig {
            gamma: 1.0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = ExperimentConfig {
            seeds: vec![1, 1],
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = ExperimentConfig {
            env: "maze".into(),
            ..Default::default()
        };
        assert!(matches!(cfg.build_mdp(), Err(Error::Config(_))));
    }

    #[test]
    fn perturbation_is_seeded_and_bounded() {
        let cfg = ExperimentConfig::default();
        let mdp = cfg.build_mdp().unwrap();
        let a = cfg.initial_table(&mdp, 3);
        assert_eq!(a, cfg.initial_table(&mdp, 3));
        assert_ne!(a, cfg.initial_table(&mdp, 4));
        assert!(a.as_slice().iter().all(|x| x.abs() <= 1.0));
        let zero = ExperimentConfig {
            q0_scale: 0.0,
            ..Default::default()
        };
        assert!(zero.initial_table(&mdp, 9).as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn learner_names_parse() {
        for l in [Learner::Td, Learner::Erc, Learner::ErcStar, Learner::Ode, Learner::Mc] {
            assert_eq!(l.as_str().parse::<Learner>().unwrap(), l);
        }
        assert!("sarsa".parse::<Learner>().is_err());
    }
}
