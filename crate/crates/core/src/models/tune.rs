use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::preprocess::DesignMatrix;

use super::{fit, ModelKind, ModelSpec, TrainedModel};

/// One candidate setting: parameter overrides on top of a base spec.
pub type GridPoint = BTreeMap<String, f64>;
pub type Grid = Vec<GridPoint>;

fn product(axes: &[(&str, &[f64])]) -> Grid {
    let mut grid: Grid = vec![GridPoint::new()];
    for (name, values) in axes {
        grid = grid
            .into_iter()
            .flat_map(|g| {
                values.iter().map(move |&v| {
                    let mut g = g.clone();
                    g.insert(name.to_string(), v);
                    g
                })
            })
            .collect();
    }
    grid
}

/// Small per-family search grids used by the comparison harness.
pub fn default_grid(kind: ModelKind) -> Grid {
    match kind {
        ModelKind::Linear | ModelKind::GaussianProcess => vec![GridPoint::new()],
        ModelKind::RandomForest => product(&[("min_samples_leaf", &[5.0, 20.0])]),
        ModelKind::GradientBoosting => product(&[("learning_rate", &[0.05, 0.1]), ("max_depth", &[4.0, 6.0])]),
        ModelKind::SupportVector => product(&[("c", &[0.3, 1.0, 3.0])]),
        ModelKind::Additive => product(&[("knots", &[10.0, 14.0])]),
    }
}

/// Seeded partition of `0..n` into `k` folds of near-equal size, each sorted.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::TooFewRecords { needed: k, got: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds: Vec<Vec<usize>> = (0..k).map(|f| idx.iter().skip(f).step_by(k).copied().collect()).collect();
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Mean held-out RMSE over `k` seeded folds.
pub fn cv_rmse(spec: &ModelSpec, data: &DesignMatrix, k: usize, seed: u64) -> Result<f64> {
    let folds = kfold_indices(data.n(), k, seed)?;
    let scores: Vec<f64> = folds
        .par_iter()
        .enumerate()
        .map(|(f, held)| {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, v)| v.iter().copied())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            let m = fit(spec, &data.select_rows(&train))?;
            let test = data.select_rows(held);
            crate::eval::rmse(&m.predict(&test)?, &test.y)
        })
        .collect::<Result<_>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Picks the grid point with the lowest cross-validated RMSE (first wins on
/// ties, failing points count as +∞), then refits it on all of `data`.
/// `None` skips the search and fits `base` as given.
pub fn tune(base: &ModelSpec, data: &DesignMatrix, grid: Option<&Grid>, folds: usize, seed: u64) -> Result<TrainedModel> {
    let Some(grid) = grid else {
        return fit(base, data);
    };
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut best: Option<(f64, ModelSpec)> = None;
    let mut last_err = None;
    for point in grid {
        let mut spec = base.clone();
        for (k, &v) in point {
            spec.set(k, v)?;
        }
        let score = match cv_rmse(&spec, data, folds, seed) {
            Ok(s) if s.is_finite() => s,
            Ok(_) => f64::INFINITY,
            Err(e) => {
                last_err = Some(e);
                f64::INFINITY
            }
        };
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, spec));
        }
    }
    let (score, spec) = best.expect("grid is non-empty");
    if !score.is_finite() {
        if let Some(e) = last_err {
            return Err(e);
        }
    }
    let mut model = fit(&spec, data)?;
    model.summary.cv_rmse = Some(score);
    Ok(model)
}
