//! Serialized forms of model parameters and run metadata.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use semisup_core::estimation::CovarianceModel;
use semisup_core::simulation::MissingnessMechanism;
use semisup_core::{Covariance, DiscriminantCoeffs, FullParams, MissingnessParams, MixtureParams};

use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceDto {
    Common(Vec<Vec<f64>>),
    PerClass(Vec<Vec<f64>>, Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaDto {
    pub pi1: f64,
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    pub covariance: CovarianceDto,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>]) -> CliResult<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(
            semisup_core::Error::InvalidInput("covariance matrices must be square".into()).into(),
        );
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl From<&MixtureParams> for ThetaDto {
    fn from(theta: &MixtureParams) -> Self {
        Self {
            pi1: theta.pi1(),
            mu1: theta.mu1().iter().copied().collect(),
            mu2: theta.mu2().iter().copied().collect(),
            covariance: match theta.covariance() {
                Covariance::Common(s) => CovarianceDto::Common(rows(s)),
                Covariance::PerClass(a, b) => CovarianceDto::PerClass(rows(a), rows(b)),
            },
        }
    }
}

impl ThetaDto {
    pub fn to_params(&self) -> CliResult<MixtureParams> {
        let covariance = match &self.covariance {
            CovarianceDto::Common(s) => Covariance::Common(matrix(s)?),
            CovarianceDto::PerClass(a, b) => Covariance::PerClass(matrix(a)?, matrix(b)?),
        };
        Ok(MixtureParams::new(
            self.pi1,
            DVector::from_vec(self.mu1.clone()),
            DVector::from_vec(self.mu2.clone()),
            covariance,
        )?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissingnessDto {
    pub xi0: f64,
    pub xi1: f64,
}

impl From<&MissingnessParams> for MissingnessDto {
    fn from(xi: &MissingnessParams) -> Self {
        Self {
            xi0: xi.xi0,
            xi1: xi.xi1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminantDto {
    pub beta0: f64,
    pub beta: Vec<f64>,
}

impl From<&DiscriminantCoeffs> for DiscriminantDto {
    fn from(b: &DiscriminantCoeffs) -> Self {
        Self {
            beta0: b.beta0,
            beta: b.beta.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelDto {
    Homoscedastic,
    Heteroscedastic,
}

impl From<ModelDto> for CovarianceModel {
    fn from(m: ModelDto) -> Self {
        match m {
            ModelDto::Homoscedastic => Self::Homoscedastic,
            ModelDto::Heteroscedastic => Self::Heteroscedastic,
        }
    }
}

impl From<CovarianceModel> for ModelDto {
    fn from(m: CovarianceModel) -> Self {
        match m {
            CovarianceModel::Homoscedastic => Self::Homoscedastic,
            CovarianceModel::Heteroscedastic => Self::Heteroscedastic,
        }
    }
}

/// The entropy-logistic variant takes its mixture from the experiment's
/// generating parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanismDto {
    Mcar { gamma: f64 },
    FixedCounts { n1c: usize, n2c: usize },
    EntropyLogistic { xi0: f64, xi1: f64 },
}

impl MechanismDto {
    pub fn from_mechanism(m: &MissingnessMechanism) -> Self {
        match m {
            MissingnessMechanism::Mcar { gamma } => Self::Mcar { gamma: *gamma },
            MissingnessMechanism::FixedCounts { n1c, n2c } => Self::FixedCounts {
                n1c: *n1c,
                n2c: *n2c,
            },
            MissingnessMechanism::EntropyLogistic(psi) => Self::EntropyLogistic {
                xi0: psi.xi.xi0,
                xi1: psi.xi.xi1,
            },
        }
    }

    pub fn to_mechanism(&self, theta: &MixtureParams) -> CliResult<MissingnessMechanism> {
        Ok(match *self {
            Self::Mcar { gamma } => MissingnessMechanism::Mcar { gamma },
            Self::FixedCounts { n1c, n2c } => MissingnessMechanism::FixedCounts { n1c, n2c },
            Self::EntropyLogistic { xi0, xi1 } => MissingnessMechanism::EntropyLogistic(
                FullParams::new(theta.clone(), MissingnessParams::new(xi0, xi1)?),
            ),
        })
    }
}

/// Enough to rerun a command exactly: the tool version, the seed and a hash
/// of the resolved settings (including input file contents, where any).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config_hash: String,
}

impl Metadata {
    pub fn new(command: &str, seed: Option<u64>, config: &impl Serialize) -> Self {
        Self {
            tool: "semisup".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config_hash: hash_of(config),
        }
    }
}

pub fn hash_of(value: &impl Serialize) -> String {
    hex::encode(Sha256::digest(crate::json::to_string(value).as_bytes()))
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
