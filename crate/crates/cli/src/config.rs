//! Experiment configuration files. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use semisup_core::simulation::{ExperimentConfig, Method, MissingnessMechanism};

use crate::dto::{MechanismDto, ModelDto, ThetaDto};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum RunConfig {
    /// Fit-and-score replications, as behind the FSC weight curve.
    Replication(ReplicationConfig),
    /// Error rate of the hard-assignment rule per iteration.
    Iteration(IterationConfig),
    /// Relative efficiency grid for univariate models.
    Efficiency(EfficiencyConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicationConfig {
    pub theta_true: ThetaDto,
    pub mechanism: MechanismDto,
    pub n: usize,
    pub n_test: usize,
    pub replications: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    pub methods: Vec<String>,
    pub model: ModelDto,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationConfig {
    /// Must have a common covariance.
    pub theta_true: ThetaDto,
    pub n1c: usize,
    pub n2c: usize,
    pub n_unclassified: usize,
    pub replications: usize,
    pub k_max: usize,
    /// Hold the mixing proportion at its true value.
    #[serde(default)]
    pub known_priors: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyConfig {
    pub pi1_list: Vec<f64>,
    pub delta_list: Vec<f64>,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let config: Self = serde_json::from_str(&text).map_err(|e| CliError::Input {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if let Some(out) = config.out() {
            if out.trim().is_empty() {
                return Err(CliError::Input {
                    path: path.display().to_string(),
                    message: "out must be a nonempty path".into(),
                });
            }
        }
        Ok(config)
    }

    pub fn preset(name: &str) -> CliResult<Self> {
        Ok(match name {
            "figure1" => Self::Replication(ReplicationConfig::from_experiment(
                &ExperimentConfig::figure1(0),
            )),
            "eq2" => {
                let base = ExperimentConfig::eq2(0);
                let MissingnessMechanism::FixedCounts { n1c, n2c } = base.mechanism else {
                    unreachable!("preset uses fixed counts")
                };
                Self::Iteration(IterationConfig {
                    theta_true: ThetaDto::from(&base.theta_true),
                    n1c,
                    n2c,
                    n_unclassified: base.n - n1c - n2c,
                    replications: base.replications,
                    k_max: 10,
                    known_priors: true,
                    seed: 0,
                    out: None,
                })
            }
            "table1" => Self::Efficiency(EfficiencyConfig {
                pi1_list: vec![0.1, 0.2, 0.3, 0.4, 0.5],
                delta_list: vec![1.0, 2.0, 3.0, 4.0],
                gamma: 1.0,
                out: None,
            }),
            other => {
                return Err(CliError::Usage(format!(
                    "unknown preset {other:?}; expected figure1, eq2 or table1"
                )))
            }
        })
    }

    pub fn out(&self) -> Option<&str> {
        match self {
            Self::Replication(c) => c.out.as_deref(),
            Self::Iteration(c) => c.out.as_deref(),
            Self::Efficiency(c) => c.out.as_deref(),
        }
    }

    /// The settings that determine the results, without output paths.
    pub fn without_paths(&self) -> Self {
        let mut c = self.clone();
        match &mut c {
            Self::Replication(r) => r.out = None,
            Self::Iteration(r) => r.out = None,
            Self::Efficiency(r) => r.out = None,
        }
        c
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Self::Replication(c) => Some(c.seed),
            Self::Iteration(c) => Some(c.seed),
            Self::Efficiency(_) => None,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Self::Replication(c) => c.seed = seed,
            Self::Iteration(c) => c.seed = seed,
            Self::Efficiency(_) => {}
        }
    }

    pub fn set_replications(&mut self, n: usize) {
        match self {
            Self::Replication(c) => c.replications = n,
            Self::Iteration(c) => c.replications = n,
            Self::Efficiency(_) => {}
        }
    }
}

impl ReplicationConfig {
    pub fn from_experiment(c: &ExperimentConfig) -> Self {
        Self {
            theta_true: ThetaDto::from(&c.theta_true),
            mechanism: MechanismDto::from_mechanism(&c.mechanism),
            n: c.n,
            n_test: c.n_test,
            replications: c.replications,
            alpha_grid: c.alpha_grid.clone(),
            seed: c.seed,
            methods: c.methods.iter().map(|m| m.name().to_string()).collect(),
            model: c.model.into(),
            out: None,
        }
    }

    pub fn to_experiment(&self) -> CliResult<ExperimentConfig> {
        let theta = self.theta_true.to_params()?;
        let methods = self
            .methods
            .iter()
            .map(|m| Method::parse(m))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ExperimentConfig {
            mechanism: self.mechanism.to_mechanism(&theta)?,
            theta_true: theta,
            n: self.n,
            n_test: self.n_test,
            replications: self.replications,
            alpha_grid: self.alpha_grid.clone(),
            seed: self.seed,
            methods,
            model: self.model.into(),
        })
    }
}

impl IterationConfig {
    pub fn to_experiment(&self) -> CliResult<ExperimentConfig> {
        Ok(ExperimentConfig {
            theta_true: self.theta_true.to_params()?,
            mechanism: MissingnessMechanism::FixedCounts {
                n1c: self.n1c,
                n2c: self.n2c,
            },
            n: self.n1c + self.n2c + self.n_unclassified,
            n_test: 1,
            replications: self.replications,
            alpha_grid: None,
            seed: self.seed,
            methods: vec![Method::Cml],
            model: semisup_core::estimation::CovarianceModel::Homoscedastic,
        })
    }
}
