use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::{mean, Matrix};
use crate::preprocess::DesignMatrix;

use super::forest::tree_rng;
use super::tree::{depth_param, grow, BinnedMatrix, Tree, TreeParams};
use super::{trained, FittedState, ModelSpec, TrainedModel};

/// Squared-error gradient boosting: `f(x) = mean(y) + Σ_t η·tree_t(x)`, each
/// tree fit to the current residuals with leaf value `Σr/(n+λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booster {
    pub base: f64,
    /// Leaf values already include the learning rate.
    pub trees: Vec<Tree>,
    /// Training RMSE before the first round and after every round.
    pub loss_history: Vec<f64>,
}

impl Booster {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base + self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }

    pub fn split_gains(&self, p: usize) -> Vec<f64> {
        let mut g = vec![0.0; p];
        for t in &self.trees {
            t.add_gains(&mut g);
        }
        g
    }
}

fn rmse_of(pred: &[f64], y: &[f64]) -> f64 {
    (pred.iter().zip(y).map(|(p, o)| (p - o).powi(2)).sum::<f64>() / y.len() as f64).sqrt()
}

pub fn fit_gradient_boosting(data: &DesignMatrix, spec: &ModelSpec) -> Result<TrainedModel> {
    let n_rounds = spec.get("n_rounds")? as usize;
    let lr = spec.get("learning_rate")?;
    let subsample = spec.get("subsample")?;
    let colsample = spec.get("colsample")?;
    let params = TreeParams {
        max_depth: depth_param(spec.get("max_depth")?),
        min_samples_leaf: spec.get("min_samples_leaf")? as usize,
        lambda: spec.get("lambda")?,
        features_per_split: None,
    };
    let binned = BinnedMatrix::new(&data.x, spec.get("max_bins")? as usize);
    let (n, p) = (data.n(), data.p());
    let n_rows = ((subsample * n as f64).round() as usize).clamp(1, n);
    let n_cols = ((colsample * p as f64).round() as usize).clamp(1, p.max(1));

    let base = mean(&data.y);
    let mut pred = vec![base; n];
    let mut residual = vec![0.0; n];
    let mut loss_history = vec![rmse_of(&pred, &data.y)];
    let mut trees = Vec::with_capacity(n_rounds);

    for round in 0..n_rounds {
        let mut rng = tree_rng(spec.seed, round as u64);
        for i in 0..n {
            residual[i] = data.y[i] - pred[i];
        }
        let rows: Vec<usize> = if n_rows == n {
            (0..n).collect()
        } else {
            let mut r = sample(&mut rng, n, n_rows).into_vec();
            r.sort_unstable();
            r
        };
        let mut cols: Vec<usize> = if n_cols >= p {
            (0..p).collect()
        } else {
            sample(&mut rng, p, n_cols).into_vec()
        };
        cols.sort_unstable();

        let mut tree = grow(&binned, &residual, rows, &cols, &params, &mut rng);
        tree.scale_leaves(lr);
        for (i, pi) in pred.iter_mut().enumerate() {
            *pi += tree.predict_binned(&binned, i);
        }
        loss_history.push(rmse_of(&pred, &data.y));
        trees.push(tree);
    }

    Ok(trained(
        spec,
        data,
        FittedState::GradientBoosting(Booster {
            base,
            trees,
            loss_history,
        }),
        Vec::new(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fit, FittedState, ModelKind};

    #[test]
    fn constant_target_stays_put() {
        let rows: Vec<[f64; 1]> = (0..20).map(|i| [i as f64]).collect();
        let d = DesignMatrix::numeric(Matrix::from_rows(&rows).unwrap(), vec![4.0; 20]).unwrap();
        let spec = ModelSpec::new(ModelKind::GradientBoosting)
            .with("n_rounds", 10.0)
            .with("learning_rate", 0.5)
            .with("lambda", 0.0)
            .with("subsample", 1.0);
        let m = fit(&spec, &d).unwrap();
        assert!(m.predict(&d).unwrap().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn two_points_single_stump() {
        let d = DesignMatrix::numeric(Matrix::from_rows(&[[0.0], [1.0]]).unwrap(), vec![0.0, 10.0]).unwrap();
        let spec = ModelSpec::new(ModelKind::GradientBoosting)
            .with("n_rounds", 1.0)
            .with("learning_rate", 1.0)
            .with("max_depth", 1.0)
            .with("min_samples_leaf", 1.0)
            .with("lambda", 0.0)
            .with("subsample", 1.0)
            .with("colsample", 1.0);
        let m = fit(&spec, &d).unwrap();
        let FittedState::GradientBoosting(b) = &m.state else { unreachable!() };
        assert_eq!(b.base, 5.0);
        assert_eq!(m.predict(&d).unwrap(), vec![0.0, 10.0]);
    }
}
