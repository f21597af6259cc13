//! Experiment configuration: TOML schema, defaults, and hashing.
//!
//! The trainer defaults are keyed on environment, objective, initial
//! fidelity and link length; any field can be pinned explicitly in the
//! `[trainer]` section. A `scale` factor multiplies episode counts,
//! iteration counts and evaluation budgets so that full-scale and
//! desk-scale runs share one code path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baseline::GridSearchSpec;
use crate::env::EnvKind;
use crate::optim::{TrainerConfig, UtilityKind};
use crate::policy::FourierBasisSpec;
use crate::quantum::{
    LinkParameters, DEFAULT_ATTENUATION_LENGTH_KM, DEFAULT_COHERENCE_TIME_S, DEFAULT_K_LOSS,
    DEFAULT_SIGNAL_SPEED_KM_PER_S,
};

use super::HarnessError;

/// Which secret-key-rate family to optimize; combined with the
/// environment's state representation this picks the concrete utility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Bb84,
    SixState,
}

impl ObjectiveKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "bb84" => Some(ObjectiveKind::Bb84),
            "six_state" | "sixstate" => Some(ObjectiveKind::SixState),
            _ => None,
        }
    }

    pub fn utility_for(&self, env: EnvKind) -> UtilityKind {
        match (self, env.is_bell_diagonal()) {
            (ObjectiveKind::Bb84, false) => UtilityKind::Bb84Werner,
            (ObjectiveKind::Bb84, true) => UtilityKind::Bb84Bds,
            (ObjectiveKind::SixState, false) => UtilityKind::SixStateWerner,
            (ObjectiveKind::SixState, true) => UtilityKind::SixStateBds,
        }
    }
}

impl std::fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ObjectiveKind::Bb84 => write!(f, "bb84"),
            ObjectiveKind::SixState => write!(f, "six_state"),
        }
    }
}

/// Trainer defaults per configuration row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainDefaults {
    pub learning_rate: f64,
    pub dependent_order: u32,
    pub independent_order: u32,
    pub iterations: usize,
    pub episodes_per_iteration: usize,
}

/// Default hyperparameters keyed on `(environment, objective, F0, L)`.
/// Six-state rows exist only for the three-memory environment; the
/// two-memory environments fall back to their BB84 rows.
pub fn train_defaults(
    env: EnvKind,
    objective: ObjectiveKind,
    f0: f64,
    length_km: f64,
) -> TrainDefaults {
    let d = |learning_rate, dependent_order, independent_order, iterations, episodes| {
        TrainDefaults {
            learning_rate,
            dependent_order,
            independent_order,
            iterations,
            episodes_per_iteration: episodes,
        }
    };
    let high_f0 = (f0 - 0.9).abs() <= (f0 - 0.83).abs();
    match (env, objective) {
        (EnvKind::Wn2m2, _) => d(1e-4, 5, 20, 500, 10_000),
        (EnvKind::Bn2m2, _) => {
            if high_f0 {
                d(2.5e-4, 2, 20, 250, 10_000)
            } else if length_km >= 47.5 {
                d(1e-4, 2, 2, 500, 10_000)
            } else if length_km >= 42.5 {
                d(5e-5, 2, 10, 250, 100_000)
            } else {
                d(1e-4, 5, 20, 500, 10_000)
            }
        }
        (EnvKind::Wn2m3, ObjectiveKind::Bb84) => {
            if high_f0 {
                d(2.5e-4, 5, 5, 200, 10_000)
            } else if (32.5..37.5).contains(&length_km) || length_km >= 47.5 {
                d(1e-4, 5, 5, 250, 10_000)
            } else {
                d(2.5e-4, 5, 5, 500, 10_000)
            }
        }
        (EnvKind::Wn2m3, ObjectiveKind::SixState) => d(2.5e-4, 5, 5, 500, 10_000),
    }
}

fn default_lengths() -> Vec<f64> {
    (1..=10).map(|k| 5.0 * k as f64).collect()
}

fn default_scale() -> f64 {
    1.0
}

fn default_seed() -> u64 {
    12345
}

fn default_output_dir() -> String {
    "out".to_string()
}

fn default_eval_trials() -> usize {
    10
}

fn default_eval_episodes() -> usize {
    250_000
}

fn default_grid_episodes() -> usize {
    20_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub environment: String,
    pub utility: String,
    pub f0: f64,
    #[serde(default = "default_lengths")]
    pub link_lengths_km: Vec<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    #[serde(default = "default_attenuation")]
    pub attenuation_length_km: f64,
    #[serde(default = "default_k_loss")]
    pub k_loss: f64,
    #[serde(default = "default_coherence")]
    pub coherence_time_s: f64,
    #[serde(default = "default_signal_speed")]
    pub signal_speed_km_per_s: f64,
}

fn default_attenuation() -> f64 {
    DEFAULT_ATTENUATION_LENGTH_KM
}

fn default_k_loss() -> f64 {
    DEFAULT_K_LOSS
}

fn default_coherence() -> f64 {
    DEFAULT_COHERENCE_TIME_S
}

fn default_signal_speed() -> f64 {
    DEFAULT_SIGNAL_SPEED_KM_PER_S
}

impl Default for LinkSection {
    fn default() -> Self {
        LinkSection {
            attenuation_length_km: default_attenuation(),
            k_loss: default_k_loss(),
            coherence_time_s: default_coherence(),
            signal_speed_km_per_s: default_signal_speed(),
        }
    }
}

/// Optional overrides of the trainer defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerSection {
    pub learning_rate: Option<f64>,
    pub episodes_per_iteration: Option<usize>,
    pub iterations: Option<usize>,
    pub dependent_order: Option<u32>,
    pub independent_order: Option<u32>,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub adam_epsilon: f64,
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_adam_eps() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub consume_lo: Option<f64>,
    pub consume_hi: Option<f64>,
    pub discard_lo: Option<f64>,
    pub discard_hi: Option<f64>,
    pub eval_episodes: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "default_eval_trials")]
    pub trials: usize,
    #[serde(default = "default_eval_episodes")]
    pub episodes_per_trial: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            trials: default_eval_trials(),
            episodes_per_trial: default_eval_episodes(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub link: LinkSection,
    #[serde(default)]
    pub trainer: TrainerSection,
    #[serde(default)]
    pub grid_search: GridSection,
    #[serde(default)]
    pub evaluation: EvalSection,
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub environment: EnvKind,
    pub objective: ObjectiveKind,
    pub f0: f64,
    pub link_lengths_km: Vec<f64>,
    pub link: LinkSection,
    pub trainer: TrainerSection,
    pub grid: GridSection,
    pub evaluation: EvalSection,
    pub seed: u64,
    pub scale: f64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        Self::from_config_file(file)
    }

    pub fn from_config_file(file: ConfigFile) -> Result<Self, HarnessError> {
        let environment = EnvKind::parse(&file.experiment.environment).ok_or_else(|| {
            HarnessError::Config(format!(
                "unknown environment '{}' (expected wn2m2, bn2m2 or wn2m3)",
                file.experiment.environment
            ))
        })?;
        let objective = ObjectiveKind::parse(&file.experiment.utility).ok_or_else(|| {
            HarnessError::Config(format!(
                "unknown utility '{}' (expected bb84 or six_state)",
                file.experiment.utility
            ))
        })?;
        if file.experiment.link_lengths_km.is_empty() {
            return Err(HarnessError::Config("link_lengths_km is empty".into()));
        }
        if !(file.experiment.scale > 0.0) {
            return Err(HarnessError::Config(format!(
                "scale must be positive, got {}",
                file.experiment.scale
            )));
        }
        let config = ExperimentConfig {
            environment,
            objective,
            f0: file.experiment.f0,
            link_lengths_km: file.experiment.link_lengths_km,
            link: file.link,
            trainer: file.trainer,
            grid: file.grid_search,
            evaluation: file.evaluation,
            seed: file.experiment.seed,
            scale: file.experiment.scale,
            output_dir: PathBuf::from(file.experiment.output_dir),
        };
        // Surface invalid physical parameters immediately.
        config.link_parameters(config.link_lengths_km[0])?;
        Ok(config)
    }

    pub fn utility(&self) -> UtilityKind {
        self.objective.utility_for(self.environment)
    }

    pub fn link_parameters(&self, length_km: f64) -> Result<LinkParameters, HarnessError> {
        LinkParameters {
            link_length_km: length_km,
            attenuation_length_km: self.link.attenuation_length_km,
            k_loss: self.link.k_loss,
            coherence_time_s: self.link.coherence_time_s,
            signal_speed_km_per_s: self.link.signal_speed_km_per_s,
            initial_fidelity: self.f0,
        }
        .validated()
        .map_err(|e| HarnessError::Config(e.to_string()))
    }

    fn scaled(&self, n: usize) -> usize {
        ((n as f64 * self.scale).round() as usize).max(1)
    }

    /// Trainer configuration and basis orders for one link length, after
    /// defaults, overrides and scaling.
    pub fn trainer_for(&self, length_km: f64) -> (TrainerConfig, FourierBasisSpec) {
        let defaults = train_defaults(self.environment, self.objective, self.f0, length_km);
        let learning_rate = self.trainer.learning_rate.unwrap_or(defaults.learning_rate);
        let episodes = self
            .trainer
            .episodes_per_iteration
            .unwrap_or(defaults.episodes_per_iteration);
        let iterations = self.trainer.iterations.unwrap_or(defaults.iterations);
        let basis = FourierBasisSpec::new(
            self.trainer
                .dependent_order
                .unwrap_or(defaults.dependent_order),
            self.trainer
                .independent_order
                .unwrap_or(defaults.independent_order),
        );
        let mut trainer = TrainerConfig::new(
            learning_rate,
            self.scaled(episodes),
            self.scaled(iterations),
            self.seed,
        );
        trainer.adam_beta1 = self.trainer.adam_beta1;
        trainer.adam_beta2 = self.trainer.adam_beta2;
        trainer.adam_epsilon = self.trainer.adam_epsilon;
        (trainer, basis)
    }

    /// Grid-search spec after defaults and scaling.
    pub fn grid_spec(&self) -> GridSearchSpec {
        let base = GridSearchSpec::for_initial_fidelity(
            self.f0,
            self.grid.eval_episodes.unwrap_or_else(default_grid_episodes),
        );
        let consume_range = (
            self.grid.consume_lo.unwrap_or(base.consume_range.0),
            self.grid.consume_hi.unwrap_or(base.consume_range.1),
        );
        let discard_range = (
            self.grid.discard_lo.unwrap_or(base.discard_range.0),
            self.grid.discard_hi.unwrap_or(base.discard_range.1),
        );
        GridSearchSpec {
            consume_range,
            discard_range,
            eval_episodes: self.scaled(base.eval_episodes),
        }
    }

    /// `(trials, episodes_per_trial)` for policy evaluation after scaling.
    pub fn eval_budget(&self) -> (usize, usize) {
        (
            self.scaled(self.evaluation.trials),
            self.scaled(self.evaluation.episodes_per_trial),
        )
    }

    /// Stable hash over the resolved configuration; every emitted record
    /// carries it so results are reproducible from the record alone.
    pub fn config_hash(&self) -> String {
        let canonical =
            serde_json::to_string(self).expect("config serialization cannot fail");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut out = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[experiment]
environment = "wn2m2"
utility = "bb84"
f0 = 0.9
link_lengths_km = [10.0]
seed = 7
"#;

    #[test]
    fn minimal_config_resolves_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.environment, EnvKind::Wn2m2);
        assert_eq!(cfg.utility(), UtilityKind::Bb84Werner);
        assert_eq!(cfg.evaluation.trials, 10);
        assert_eq!(cfg.evaluation.episodes_per_trial, 250_000);
        let (trainer, basis) = cfg.trainer_for(10.0);
        assert_eq!(trainer.learning_rate, 1e-4);
        assert_eq!(trainer.episodes_per_iteration, 10_000);
        assert_eq!(trainer.iterations, 500);
        assert_eq!(basis, FourierBasisSpec::new(5, 20));
        let grid = cfg.grid_spec();
        assert_eq!(grid.consume_range, (0.90, 0.94));
        assert_eq!(grid.discard_range, (0.87, 0.89));
        let link = cfg.link_parameters(10.0).unwrap();
        assert_eq!(link.k_loss, 0.9);
        assert_eq!(link.coherence_time_s, 0.1);
    }

    #[test]
    fn scale_multiplies_budgets() {
        let text = MINIMAL.replace("seed = 7", "seed = 7\nscale = 0.1");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        let (trainer, _) = cfg.trainer_for(10.0);
        assert_eq!(trainer.episodes_per_iteration, 1000);
        assert_eq!(trainer.iterations, 50);
        assert_eq!(cfg.eval_budget(), (1, 25_000));
        assert_eq!(cfg.grid_spec().eval_episodes, 2000);
    }

    #[test]
    fn unknown_fields_and_values_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("[experiment]\nenvironment = \"foo\"").is_err());
        let bad_env = MINIMAL.replace("wn2m2", "wn9m9");
        assert!(ExperimentConfig::from_toml_str(&bad_env).is_err());
        let bad_field = format!("{MINIMAL}\n[trainer]\nlearning_rat = 0.1\n");
        assert!(ExperimentConfig::from_toml_str(&bad_field).is_err());
        let bad_f0 = MINIMAL.replace("f0 = 0.9", "f0 = 0.1");
        assert!(ExperimentConfig::from_toml_str(&bad_f0).is_err());
    }

    #[test]
    fn table_defaults_cover_the_rows() {
        let d = train_defaults(EnvKind::Bn2m2, ObjectiveKind::Bb84, 0.83, 45.0);
        assert_eq!(d.learning_rate, 5e-5);
        assert_eq!(d.episodes_per_iteration, 100_000);
        let d = train_defaults(EnvKind::Bn2m2, ObjectiveKind::Bb84, 0.83, 50.0);
        assert_eq!(d.dependent_order, 2);
        assert_eq!(d.independent_order, 2);
        let d = train_defaults(EnvKind::Wn2m3, ObjectiveKind::Bb84, 0.9, 25.0);
        assert_eq!(d.iterations, 200);
        let d = train_defaults(EnvKind::Wn2m3, ObjectiveKind::Bb84, 0.83, 35.0);
        assert_eq!(d.learning_rate, 1e-4);
        let d = train_defaults(EnvKind::Wn2m3, ObjectiveKind::SixState, 0.9, 5.0);
        assert_eq!(d.iterations, 500);
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let b = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        let c =
            ExperimentConfig::from_toml_str(&MINIMAL.replace("seed = 7", "seed = 8")).unwrap();
        assert_ne!(a.config_hash(), c.config_hash());
    }
}
