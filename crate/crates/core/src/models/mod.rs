//! The six regression families behind one fit/predict contract.
//!
//! Every model consumes a [`DesignMatrix`], is a pure function of
//! `(X, y, spec.seed)`, and serializes to a versioned JSON artifact.

mod boosting;
mod forest;
mod gam;
mod gp;
mod linear;
mod params;
mod svr;
pub mod tree;
mod tune;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::preprocess::{DesignMatrix, FeatureLayout};

pub use boosting::{fit_gradient_boosting, Booster};
pub use forest::{fit_random_forest, Forest};
pub use gam::{fit_additive, AdditiveModel, BSplineBasis, Component};
pub use gp::{fit_gaussian_process, GaussianProcess};
pub use linear::{fit_linear, LinearModel};
pub use params::{param_table, ParamDef};
pub use svr::{fit_support_vector, solve_epsilon_svr, SvrModel, SvrSolution};
pub use tune::{cv_rmse, default_grid, kfold_indices, tune, Grid, GridPoint};

/// Artifact format tag and version written into every saved model.
pub const MODEL_FORMAT: &str = "wq-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Linear,
    RandomForest,
    GradientBoosting,
    GaussianProcess,
    SupportVector,
    Additive,
}

impl ModelKind {
    /// Report order.
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Linear,
        ModelKind::RandomForest,
        ModelKind::GaussianProcess,
        ModelKind::SupportVector,
        ModelKind::Additive,
        ModelKind::GradientBoosting,
    ];

    pub fn token(self) -> &'static str {
        match self {
            ModelKind::Linear => "lm",
            ModelKind::RandomForest => "rf",
            ModelKind::GradientBoosting => "gb",
            ModelKind::GaussianProcess => "gp",
            ModelKind::SupportVector => "svm",
            ModelKind::Additive => "gam",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Linear => "LM",
            ModelKind::RandomForest => "RF",
            ModelKind::GradientBoosting => "GB",
            ModelKind::GaussianProcess => "GP",
            ModelKind::SupportVector => "SVM",
            ModelKind::Additive => "GAM",
        }
    }

    pub fn is_tree_ensemble(self) -> bool {
        matches!(self, ModelKind::RandomForest | ModelKind::GradientBoosting)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lm" | "linear" => Ok(ModelKind::Linear),
            "rf" | "random_forest" | "random-forest" => Ok(ModelKind::RandomForest),
            "gb" | "gbm" | "xgboost" | "gradient_boosting" | "gradient-boosting" => {
                Ok(ModelKind::GradientBoosting)
            }
            "gp" | "gaussian_process" | "gaussian-process" => Ok(ModelKind::GaussianProcess),
            "svm" | "svr" | "support_vector" | "support-vector" => Ok(ModelKind::SupportVector),
            "gam" | "additive" => Ok(ModelKind::Additive),
            _ => Err(Error::InvalidArgument(format!("unknown model kind `{s}`"))),
        }
    }
}

/// Model family, hyperparameter overrides and seed. Parameters not present
/// in `params` take the documented default from [`param_table`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub params: std::collections::BTreeMap<String, f64>,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            params: Default::default(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        params::check(self.kind, key, value)?;
        self.params.insert(key.to_string(), value);
        Ok(())
    }

    /// Value of a parameter, falling back to its default.
    pub fn get(&self, key: &str) -> Result<f64> {
        let def = params::lookup(self.kind, key)?;
        Ok(self.params.get(key).copied().unwrap_or(def.default))
    }

    pub fn validate(&self) -> Result<()> {
        for (k, &v) in &self.params {
            params::check(self.kind, k, v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingSummary {
    pub n_train: usize,
    pub train_rmse: f64,
    /// Cross-validated RMSE when the model was produced by the tuning harness.
    pub cv_rmse: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedState {
    Linear(LinearModel),
    RandomForest(Forest),
    GradientBoosting(Booster),
    GaussianProcess(GaussianProcess),
    SupportVector(SvrModel),
    Additive(AdditiveModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub layout: FeatureLayout,
    pub summary: TrainingSummary,
    pub state: FittedState,
}

#[derive(Serialize, Deserialize)]
struct Artifact<T> {
    format: String,
    version: u32,
    model: T,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    fn check_layout(&self, layout: &FeatureLayout) -> Result<()> {
        if layout.columns != self.layout.columns {
            return Err(Error::ColumnMismatch {
                expected: self.layout.columns.clone(),
                got: layout.columns.clone(),
            });
        }
        Ok(())
    }

    /// Predictions for a design matrix whose columns match training.
    pub fn predict(&self, dm: &DesignMatrix) -> Result<Vec<f64>> {
        self.check_layout(&dm.layout)?;
        self.predict_matrix(&dm.x)
    }

    /// Predictions for rows already laid out in training column order.
    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.layout.len() {
            return Err(Error::ColumnMismatch {
                expected: self.layout.columns.clone(),
                got: (0..x.cols()).map(|j| format!("x{j}")).collect(),
            });
        }
        Ok(match &self.state {
            FittedState::Linear(m) => x.iter_rows().map(|r| m.predict_row(r)).collect(),
            FittedState::RandomForest(m) => m.predict(x),
            FittedState::GradientBoosting(m) => m.predict(x),
            FittedState::GaussianProcess(m) => m.predict_mean(x),
            FittedState::SupportVector(m) => m.predict(x),
            FittedState::Additive(m) => x.iter_rows().map(|r| m.predict_row(r)).collect(),
        })
    }

    /// Mean and predictive variance; only Gaussian-process models carry a
    /// variance.
    pub fn predict_with_variance(&self, dm: &DesignMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_layout(&dm.layout)?;
        match &self.state {
            FittedState::GaussianProcess(m) => Ok(m.predict_with_variance(&dm.x)),
            _ => Err(Error::UnsupportedModelKind(self.kind().token().into())),
        }
    }

    /// Total split gain per design-matrix column, for tree ensembles.
    pub fn split_gains(&self) -> Result<Vec<f64>> {
        match &self.state {
            FittedState::RandomForest(m) => Ok(m.split_gains(self.layout.len())),
            FittedState::GradientBoosting(m) => Ok(m.split_gains(self.layout.len())),
            _ => Err(Error::UnsupportedModelKind(self.kind().token().into())),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Artifact {
            format: MODEL_FORMAT.into(),
            version: MODEL_FORMAT_VERSION,
            model: self,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let a: Artifact<TrainedModel> = serde_json::from_str(text)?;
        if a.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!("unexpected format tag `{}`", a.format)));
        }
        if a.version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {}", a.version)));
        }
        Ok(a.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Fits the model family named by `spec.kind`.
pub fn fit(spec: &ModelSpec, data: &DesignMatrix) -> Result<TrainedModel> {
    spec.validate()?;
    if data.n() == 0 {
        return Err(Error::EmptyInput("no training rows"));
    }
    if data.x.rows() != data.y.len() {
        return Err(Error::LengthMismatch(data.x.rows(), data.y.len()));
    }
    let mut model = match spec.kind {
        ModelKind::Linear => fit_linear(data)?,
        ModelKind::RandomForest => fit_random_forest(data, spec)?,
        ModelKind::GradientBoosting => fit_gradient_boosting(data, spec)?,
        ModelKind::GaussianProcess => fit_gaussian_process(data, spec)?,
        ModelKind::SupportVector => fit_support_vector(data, spec)?,
        ModelKind::Additive => fit_additive(data, spec)?,
    };
    model.spec = spec.clone();
    let pred = model.predict_matrix(&data.x)?;
    model.summary.n_train = data.n();
    model.summary.train_rmse = crate::eval::rmse(&pred, &data.y)?;
    Ok(model)
}

pub(crate) fn trained(
    spec: &ModelSpec,
    data: &DesignMatrix,
    state: FittedState,
    warnings: Vec<String>,
) -> TrainedModel {
    TrainedModel {
        spec: spec.clone(),
        layout: data.layout.clone(),
        summary: TrainingSummary {
            warnings,
            ..Default::default()
        },
        state,
    }
}
