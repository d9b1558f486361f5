use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::Matrix;
use crate::preprocess::DesignMatrix;

use super::tree::{depth_param, grow, BinnedMatrix, Tree, TreeParams};
use super::{trained, FittedState, ModelSpec, TrainedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let k = self.trees.len() as f64;
        x.iter_rows()
            .map(|r| self.trees.iter().map(|t| t.predict_row(r)).sum::<f64>() / k)
            .collect()
    }

    pub fn split_gains(&self, p: usize) -> Vec<f64> {
        let mut g = vec![0.0; p];
        for t in &self.trees {
            t.add_gains(&mut g);
        }
        g
    }
}

/// Independent stream for tree `t`, so trees can be grown in any order.
pub(crate) fn tree_rng(seed: u64, t: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    rng
}

pub fn fit_random_forest(data: &DesignMatrix, spec: &ModelSpec) -> Result<TrainedModel> {
    let n_trees = spec.get("n_trees")? as usize;
    let max_features = spec.get("max_features")? as usize;
    let bootstrap = spec.get("bootstrap")? != 0.0;
    let p = data.p();
    let params = TreeParams {
        max_depth: depth_param(spec.get("max_depth")?),
        min_samples_leaf: spec.get("min_samples_leaf")? as usize,
        lambda: 0.0,
        features_per_split: Some(if max_features == 0 { p.div_ceil(3).max(1) } else { max_features.min(p) }),
    };
    let binned = BinnedMatrix::new(&data.x, spec.get("max_bins")? as usize);
    let allowed: Vec<usize> = (0..p).collect();
    let n = data.n();

    let trees: Vec<Tree> = (0..n_trees as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(spec.seed, t);
            let idx: Vec<usize> = if bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(&binned, &data.y, idx, &allowed, &params, &mut rng)
        })
        .collect();

    Ok(trained(spec, data, FittedState::RandomForest(Forest { trees }), Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fit, ModelKind};

    fn data(n: usize) -> DesignMatrix {
        let rows: Vec<[f64; 2]> = (0..n).map(|i| [i as f64, ((i * 37) % n) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| (r[0] / 10.0).sin() + 0.01 * r[1]).collect();
        DesignMatrix::numeric(Matrix::from_rows(&rows).unwrap(), y).unwrap()
    }

    #[test]
    fn constant_target_is_exact() {
        let mut d = data(50);
        d.y = vec![4.25; 50];
        let m = fit(&ModelSpec::new(ModelKind::RandomForest).with("n_trees", 10.0), &d).unwrap();
        assert!(m.predict(&d).unwrap().iter().all(|&v| v == 4.25));
    }

    #[test]
    fn single_unbootstrapped_tree_memorizes() {
        let d = data(60);
        let spec = ModelSpec::new(ModelKind::RandomForest)
            .with("n_trees", 1.0)
            .with("bootstrap", 0.0)
            .with("min_samples_leaf", 1.0)
            .with("max_features", 2.0);
        let m = fit(&spec, &d).unwrap();
        assert_eq!(m.predict(&d).unwrap(), d.y);
    }

    #[test]
    fn seeded_fits_are_identical() {
        let d = data(80);
        let spec = ModelSpec::new(ModelKind::RandomForest).with("n_trees", 20.0).with_seed(9);
        let a = fit(&spec, &d).unwrap().predict(&d).unwrap();
        let b = fit(&spec, &d).unwrap().predict(&d).unwrap();
        assert_eq!(a, b);
    }
}
