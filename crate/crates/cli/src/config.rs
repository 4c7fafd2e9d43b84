use std::path::Path;

use dgsp_core::audit::AuditConfig;
use dgsp_core::sim::{MetricWeights, WorldConfig};
use dgsp_core::sweep::{ParetoSpec, TransitionSpec};
use dgsp_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Which mechanisms `evaluate` scores, on which requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSpec {
    pub seed: u64,
    pub rounds: usize,
    /// Realized clicks and orders instead of their expectations.
    pub sampled: bool,
    pub sigmas: Vec<f64>,
    /// Objective used for the `objective` column; defaults to `[train].weights` or pure RPM.
    pub weights: Option<MetricWeights>,
}

impl Default for EvaluateSpec {
    fn default() -> Self {
        Self {
            seed: 777,
            rounds: 5_000,
            sampled: false,
            sigmas: vec![0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0],
            weights: None,
        }
    }
}

/// Objectives audited when no checkpoint is given: one trained model each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    #[serde(flatten)]
    pub audit: AuditConfig,
    pub configs: Vec<MetricWeights>,
}

impl Default for AuditSection {
    fn default() -> Self {
        let w = |a| MetricWeights::new(a).expect("simplex");
        Self {
            audit: AuditConfig::default(),
            configs: vec![
                w([1.0, 0.0, 0.0, 0.0, 0.0]),
                w([0.5, 0.5, 0.0, 0.0, 0.0]),
                w([0.5, 0.0, 0.5, 0.0, 0.0]),
                w([0.5, 0.0, 0.0, 0.5, 0.0]),
                w([0.5, 0.0, 0.0, 0.0, 0.5]),
                w([0.6, 0.1, 0.1, 0.1, 0.1]),
            ],
        }
    }
}

/// Everything a run can be configured with; every section is optional in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub world: WorldConfig,
    pub train: TrainConfig,
    pub evaluate: EvaluateSpec,
    pub audit: AuditSection,
    pub pareto: ParetoSpec,
    pub transition: TransitionSpec,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, seed: Option<u64>) -> Result<Self, Failure> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Failure::Validation(format!("cannot read {}: {e}", p.display()))
                })?;
                toml::from_str(&text)
                    .map_err(|e| Failure::Validation(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = seed {
            cfg.world.seed = s;
        }
        Ok(cfg)
    }

    /// Checks the sections a command uses and reports every problem at once.
    pub fn validate(&self, sections: &[Section]) -> Result<(), Failure> {
        let mut problems = Vec::new();
        let mut check = |name: &str, r: dgsp_core::Result<()>| {
            if let Err(e) = r {
                problems.push(format!("[{name}] {e}"));
            }
        };
        for s in sections {
            match s {
                Section::World => check("world", self.world.validate()),
                Section::Train => check("train", self.train.validate()),
                // sweeps set the weights per point
                Section::TrainTemplate => check("train", self.template().validate()),
                Section::Evaluate => check(
                    "evaluate",
                    if self.evaluate.rounds == 0 {
                        Err(dgsp_core::Error::Config("rounds must be positive".into()))
                    } else {
                        Ok(())
                    },
                ),
                Section::Audit => check("audit", self.audit.audit.validate()),
                Section::Pareto => check("pareto", self.pareto.validate()),
                Section::Transition => check("transition", self.transition.validate()),
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Failure::Validation(problems.join("\n")))
        }
    }

    /// The training section with pure RPM filled in when no weights are given.
    pub fn template(&self) -> TrainConfig {
        TrainConfig {
            weights: Some(self.train.weights.unwrap_or_else(MetricWeights::rpm_only)),
            ..self.train.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Section {
    World,
    Train,
    TrainTemplate,
    Evaluate,
    Audit,
    Pareto,
    Transition,
}
