//! Classifiers with probability outputs and their serialized form.

mod boost;
mod codec;
mod forest;
mod grid;
mod linear;
mod mlp;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use boost::{train_adaboost, AdaBoost, Stump};
pub use codec::{decode_base64, ParamReader, ParamWriter};
pub use forest::{train_rf, Criterion, ForestParams, MaxFeatures, RandomForest, Tree, TreeParams};
pub use grid::{grid_with, hyperparameter_grid, GridOverrides};
pub use linear::{lr_objective, train_lr, train_lr_traced, LogisticModel, LrTrace};
pub use mlp::{train_mlp, train_mlp_unchecked, validate_widths, Mlp};

pub const MODEL_FORMAT: &str = "coughscreen-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lr,
    Mlp,
    Rf,
    Ab,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Lr, Family::Mlp, Family::Rf, Family::Ab];

    pub fn name(self) -> &'static str {
        match self {
            Family::Lr => "lr",
            Family::Mlp => "mlp",
            Family::Rf => "rf",
            Family::Ab => "ab",
        }
    }

    /// Whether the family is fed z-scored features.
    pub fn wants_scaling(self) -> bool {
        matches!(self, Family::Lr | Family::Mlp)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lr" | "logistic" => Ok(Family::Lr),
            "mlp" => Ok(Family::Mlp),
            "rf" | "forest" => Ok(Family::Rf),
            "ab" | "adaboost" => Ok(Family::Ab),
            "svm" | "cnn" => Err(Error::Config(format!("model family {s} is not implemented"))),
            other => Err(Error::Config(format!("unknown model family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Hyperparameters {
    Lr {
        c: f64,
    },
    Mlp {
        alpha: f64,
        widths: Vec<usize>,
    },
    Rf {
        n_estimators: usize,
        max_features: MaxFeatures,
        max_depth: usize,
        criterion: Criterion,
        bootstrap: bool,
    },
    Ab {
        n_estimators: usize,
        learning_rate: f64,
    },
}

impl Hyperparameters {
    pub fn family(&self) -> Family {
        match self {
            Hyperparameters::Lr { .. } => Family::Lr,
            Hyperparameters::Mlp { .. } => Family::Mlp,
            Hyperparameters::Rf { .. } => Family::Rf,
            Hyperparameters::Ab { .. } => Family::Ab,
        }
    }
}

impl fmt::Display for Hyperparameters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hyperparameters::Lr { c } => write!(f, "lr(C={c:e})"),
            Hyperparameters::Mlp { alpha, widths } => write!(f, "mlp(alpha={alpha:e}, widths={widths:?})"),
            Hyperparameters::Rf {
                n_estimators,
                max_features,
                max_depth,
                criterion,
                bootstrap,
            } => write!(
                f,
                "rf(n={n_estimators}, max_features={max_features:?}, depth={max_depth}, {criterion:?}, bootstrap={bootstrap})"
            ),
            Hyperparameters::Ab {
                n_estimators,
                learning_rate,
            } => write!(f, "ab(n={n_estimators}, lr={learning_rate:e})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub hyper: Hyperparameters,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(hyper: Hyperparameters, seed: u64) -> Self {
        Self { hyper, seed }
    }

    pub fn family(&self) -> Family {
        self.hyper.family()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedParams {
    Lr(LogisticModel),
    Mlp(Mlp),
    Rf(RandomForest),
    Ab(AdaBoost),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub n_features: usize,
    pub params: FittedParams,
}

/// On-disk form: readable header plus a base64 little-endian parameter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEnvelope {
    pub format: String,
    pub version: u32,
    pub spec: ModelSpec,
    pub n_features: usize,
    pub params: String,
}

fn check_labels(y: &[f64]) -> Result<()> {
    if let Some(bad) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(Error::Schema(format!("labels must be 0 or 1, found {bad}")));
    }
    Ok(())
}

/// Fits the model described by `spec` on `x`, `y`.
pub fn fit(spec: &ModelSpec, x: &Matrix, y: &[f64]) -> Result<TrainedModel> {
    check_labels(y)?;
    let params = match &spec.hyper {
        Hyperparameters::Lr { c } => FittedParams::Lr(train_lr(x, y, *c)?),
        Hyperparameters::Mlp { alpha, widths } => {
            FittedParams::Mlp(train_mlp(x, y, *alpha, widths, spec.seed)?)
        }
        Hyperparameters::Rf {
            n_estimators,
            max_features,
            max_depth,
            criterion,
            bootstrap,
        } => FittedParams::Rf(train_rf(
            x,
            y,
            ForestParams {
                n_estimators: *n_estimators,
                tree: TreeParams {
                    max_depth: *max_depth,
                    max_features: *max_features,
                    criterion: *criterion,
                },
                bootstrap: *bootstrap,
            },
            spec.seed,
        )?),
        Hyperparameters::Ab {
            n_estimators,
            learning_rate,
        } => FittedParams::Ab(train_adaboost(x, y, *n_estimators, *learning_rate)?),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        n_features: x.n_cols(),
        params,
    })
}

impl TrainedModel {
    pub fn family(&self) -> Family {
        self.spec.family()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.params {
            FittedParams::Lr(m) => m.predict_row(row),
            FittedParams::Mlp(m) => m.predict_row(row),
            FittedParams::Rf(m) => m.predict_row(row),
            FittedParams::Ab(m) => m.predict_row(row),
        }
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features {
            return Err(Error::Layout {
                expected: self.n_features,
                actual: x.n_cols(),
            });
        }
        x.ensure_finite()?;
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }

    pub fn to_envelope(&self) -> ModelEnvelope {
        let mut w = ParamWriter::new();
        match &self.params {
            FittedParams::Lr(m) => m.encode(&mut w),
            FittedParams::Mlp(m) => m.encode(&mut w),
            FittedParams::Rf(m) => m.encode(&mut w),
            FittedParams::Ab(m) => m.encode(&mut w),
        }
        ModelEnvelope {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            spec: self.spec.clone(),
            n_features: self.n_features,
            params: w.into_base64(),
        }
    }

    pub fn from_envelope(env: &ModelEnvelope) -> Result<Self> {
        if env.format != MODEL_FORMAT {
            return Err(Error::Schema(format!("not a model file (format {:?})", env.format)));
        }
        if env.version != MODEL_VERSION {
            return Err(Error::Schema(format!(
                "model format version {} unsupported (expected {MODEL_VERSION})",
                env.version
            )));
        }
        let bytes = decode_base64(&env.params)?;
        let mut r = ParamReader::new(&bytes);
        let params = match env.spec.family() {
            Family::Lr => FittedParams::Lr(LogisticModel::decode(&mut r)?),
            Family::Mlp => FittedParams::Mlp(Mlp::decode(&mut r)?),
            Family::Rf => FittedParams::Rf(RandomForest::decode(&mut r)?),
            Family::Ab => FittedParams::Ab(AdaBoost::decode(&mut r)?),
        };
        r.finish()?;
        let model = TrainedModel {
            spec: env.spec.clone(),
            n_features: env.n_features,
            params,
        };
        model.check_shape()?;
        Ok(model)
    }

    fn check_shape(&self) -> Result<()> {
        let inner = match &self.params {
            FittedParams::Lr(m) => m.weights.len(),
            FittedParams::Mlp(m) => m.n_features(),
            FittedParams::Rf(_) | FittedParams::Ab(_) => self.n_features,
        };
        let stumps_ok = match &self.params {
            FittedParams::Ab(m) => m.stumps.iter().all(|s| s.feature < self.n_features),
            _ => true,
        };
        if inner != self.n_features || !stumps_ok {
            return Err(Error::Decode(format!(
                "model parameters do not match declared width {}",
                self.n_features
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_envelope())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_envelope(&serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_parsing() {
        assert_eq!("LR".parse::<Family>().unwrap(), Family::Lr);
        assert_eq!("adaboost".parse::<Family>().unwrap(), Family::Ab);
        assert!(matches!("svm".parse::<Family>(), Err(Error::Config(_))));
        assert!("xgb".parse::<Family>().is_err());
    }

    #[test]
    fn zero_weight_lr_is_half() {
        let m = TrainedModel {
            spec: ModelSpec::new(Hyperparameters::Lr { c: 1.0 }, 0),
            n_features: 3,
            params: FittedParams::Lr(LogisticModel {
                weights: vec![0.0; 3],
                bias: 0.0,
            }),
        };
        let x = Matrix::from_rows(&[[1.0, -2.0, 3.0], [0.0, 0.0, 9.0]]).unwrap();
        assert_eq!(m.predict_proba(&x).unwrap(), vec![0.5, 0.5]);
        let narrow = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(matches!(
            m.predict_proba(&narrow),
            Err(Error::Layout { expected: 3, actual: 2 })
        ));
    }

    #[test]
    fn envelope_rejects_wrong_version_and_labels() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let m = fit(&ModelSpec::new(Hyperparameters::Lr { c: 1.0 }, 0), &x, &[0.0, 1.0]).unwrap();
        let mut env = m.to_envelope();
        env.version = 99;
        assert!(matches!(TrainedModel::from_envelope(&env), Err(Error::Schema(_))));
        assert!(fit(&ModelSpec::new(Hyperparameters::Lr { c: 1.0 }, 0), &x, &[0.0, 2.0]).is_err());
    }
}
