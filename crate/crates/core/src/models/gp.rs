use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::matrix::{mean, sample_variance, Matrix, Standardizer};
use crate::preprocess::DesignMatrix;

use super::{trained, FittedState, ModelSpec, TrainedModel};

const LENGTHSCALE_GRID: [f64; 6] = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0];
const VARIANCE_GRID: [f64; 3] = [0.5, 1.0, 2.0];
const REFINE_FACTORS: [f64; 2] = [0.5, 2.0];
const NUGGET_ESCALATIONS: usize = 3;

/// Exact GP regression with a squared-exponential ARD kernel on standardized
/// inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianProcess {
    pub standardizer: Standardizer,
    /// Standardized training inputs.
    pub train_x: Matrix,
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub nugget: f64,
    pub prior_mean: f64,
    /// `(K + σₙ²I)⁻¹ (y − prior_mean)`.
    pub alpha: Vec<f64>,
    #[serde(skip)]
    factor: Option<Cholesky>,
}

impl PartialEq for GaussianProcess {
    fn eq(&self, o: &Self) -> bool {
        self.standardizer == o.standardizer
            && self.train_x == o.train_x
            && self.lengthscales == o.lengthscales
            && self.signal_variance == o.signal_variance
            && self.nugget == o.nugget
            && self.prior_mean == o.prior_mean
            && self.alpha == o.alpha
    }
}

fn scaled(x: &Matrix, ls: &[f64]) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        for (v, l) in out.row_mut(i).iter_mut().zip(ls) {
            *v /= l;
        }
    }
    out
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `K + nugget·I` for inputs already divided by their lengthscales.
fn kernel_matrix(u: &Matrix, signal: f64, nugget: f64) -> Vec<f64> {
    let n = u.rows();
    let mut k = vec![0.0; n * n];
    k.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for j in 0..n {
            row[j] = signal * (-0.5 * sq_dist(u.row(i), u.row(j))).exp();
        }
        row[i] += nugget;
    });
    k
}

fn factor_with_escalation(u: &Matrix, signal: f64, nugget: f64) -> Result<(Cholesky, f64)> {
    let mut nug = nugget;
    for _ in 0..=NUGGET_ESCALATIONS {
        let k = kernel_matrix(u, signal, nug);
        if let Some(c) = Cholesky::new(&k, u.rows(), 0.0) {
            return Ok((c, nug));
        }
        nug = if nug > 0.0 { nug * 10.0 } else { 1e-10 * signal.max(1e-300) };
    }
    Err(Error::SingularKernel)
}

/// Log marginal likelihood, or `None` if the kernel cannot be factored.
fn log_marginal(u: &Matrix, y: &[f64], signal: f64, nugget: f64) -> Option<f64> {
    let n = u.rows();
    let chol = Cholesky::new(&kernel_matrix(u, signal, nugget), n, 0.0)?;
    let mut z = y.to_vec();
    chol.solve_lower(&mut z);
    let quad: f64 = z.iter().map(|v| v * v).sum();
    Some(-0.5 * quad - 0.5 * chol.log_det() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln())
}

fn subsample_rows(n: usize, cap: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if n <= cap {
        (0..n).collect()
    } else {
        let mut idx = sample(rng, n, cap).into_vec();
        idx.sort_unstable();
        idx
    }
}

impl GaussianProcess {
    fn kvec(&self, row: &[f64], buf: &mut [f64]) -> Vec<f64> {
        self.standardizer.transform_row(row, buf);
        (0..self.train_x.rows())
            .map(|i| {
                let d: f64 = buf
                    .iter()
                    .zip(self.train_x.row(i))
                    .zip(&self.lengthscales)
                    .map(|((a, b), l)| ((a - b) / l).powi(2))
                    .sum();
                self.signal_variance * (-0.5 * d).exp()
            })
            .collect()
    }

    pub fn predict_mean(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows())
            .into_par_iter()
            .map(|i| {
                let mut buf = vec![0.0; x.cols()];
                let k = self.kvec(x.row(i), &mut buf);
                self.prior_mean + k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    /// Posterior mean and predictive variance (including the nugget).
    pub fn predict_with_variance(&self, x: &Matrix) -> (Vec<f64>, Vec<f64>) {
        let rebuilt;
        let chol = match &self.factor {
            Some(c) => c,
            None => {
                let u = scaled(&self.train_x, &self.lengthscales);
                rebuilt = Cholesky::new(&kernel_matrix(&u, self.signal_variance, self.nugget), u.rows(), 0.0)
                    .expect("factor existed at fit time");
                &rebuilt
            }
        };
        let prior_var = self.signal_variance + self.nugget;
        (0..x.rows())
            .into_par_iter()
            .map(|i| {
                let mut buf = vec![0.0; x.cols()];
                let mut k = self.kvec(x.row(i), &mut buf);
                let m = self.prior_mean + k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
                chol.solve_lower(&mut k);
                let explained: f64 = k.iter().map(|v| v * v).sum();
                (m, (prior_var - explained).clamp(0.0, prior_var))
            })
            .unzip()
    }
}

pub fn fit_gaussian_process(data: &DesignMatrix, spec: &ModelSpec) -> Result<TrainedModel> {
    let p = data.p();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let idx = subsample_rows(data.n(), spec.get("max_train_points")? as usize, &mut rng);
    let sub = data.select_rows(&idx);

    let standardizer = Standardizer::fit(&sub.x);
    let xs = standardizer.transform(&sub.x);
    let zero_mean = spec.get("zero_mean")? != 0.0;
    let prior_mean = if zero_mean { 0.0 } else { mean(&sub.y) };
    let yc: Vec<f64> = sub.y.iter().map(|v| v - prior_mean).collect();
    let var_y = {
        let v = sample_variance(&sub.y, mean(&sub.y));
        if v > 0.0 { v } else { 1.0 }
    };
    let nugget = spec.get("nugget_ratio")? * var_y;

    let fixed_ls = spec.get("lengthscale")?;
    let fixed_sig = spec.get("signal_variance")?;
    let mut lengthscales = vec![if fixed_ls > 0.0 { fixed_ls } else { 1.0 }; p];
    let mut signal = if fixed_sig > 0.0 { fixed_sig } else { var_y };

    if fixed_ls == 0.0 || fixed_sig == 0.0 {
        let tidx = subsample_rows(xs.rows(), spec.get("tune_points")? as usize, &mut rng);
        let tx = xs.select_rows(&tidx);
        let ty: Vec<f64> = tidx.iter().map(|&i| yc[i]).collect();
        let ls_grid: Vec<f64> = if fixed_ls > 0.0 { vec![fixed_ls] } else { LENGTHSCALE_GRID.to_vec() };
        let sig_grid: Vec<f64> = if fixed_sig > 0.0 {
            vec![fixed_sig]
        } else {
            VARIANCE_GRID.iter().map(|f| f * var_y).collect()
        };
        let mut best = f64::NEG_INFINITY;
        for &l in &ls_grid {
            for &s in &sig_grid {
                let ls = vec![l; p];
                if let Some(v) = log_marginal(&scaled(&tx, &ls), &ty, s, nugget) {
                    if v > best {
                        best = v;
                        lengthscales = ls;
                        signal = s;
                    }
                }
            }
        }
        if fixed_ls == 0.0 {
            for d in 0..p {
                for f in REFINE_FACTORS {
                    let mut ls = lengthscales.clone();
                    ls[d] *= f;
                    if let Some(v) = log_marginal(&scaled(&tx, &ls), &ty, signal, nugget) {
                        if v > best {
                            best = v;
                            lengthscales = ls;
                        }
                    }
                }
            }
        }
    }

    let u = scaled(&xs, &lengthscales);
    let (factor, used_nugget) = factor_with_escalation(&u, signal, nugget)?;
    let mut warnings = Vec::new();
    if used_nugget != nugget {
        warnings.push(format!("nugget escalated from {nugget} to {used_nugget}"));
    }
    if idx.len() < data.n() {
        warnings.push(format!("trained on a seeded subsample of {} of {} rows", idx.len(), data.n()));
    }
    let alpha = factor.solve(&yc);
    let gp = GaussianProcess {
        standardizer,
        train_x: xs,
        lengthscales,
        signal_variance: signal,
        nugget: used_nugget,
        prior_mean,
        alpha,
        factor: Some(factor),
    };
    Ok(trained(spec, data, FittedState::GaussianProcess(gp), warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fit, ModelKind};

    fn gp_of(m: &TrainedModel) -> &GaussianProcess {
        match &m.state {
            FittedState::GaussianProcess(g) => g,
            _ => unreachable!(),
        }
    }

    #[test]
    fn single_point_closed_form() {
        let d = DesignMatrix::numeric(Matrix::from_rows(&[[0.3, 2.0]]).unwrap(), vec![2.5]).unwrap();
        let (sig, nug) = (1.7, 0.2);
        let spec = ModelSpec::new(ModelKind::GaussianProcess)
            .with("zero_mean", 1.0)
            .with("lengthscale", 1.0)
            .with("signal_variance", sig)
            .with("nugget_ratio", nug);
        let m = fit(&spec, &d).unwrap();
        let pred = m.predict(&d).unwrap()[0];
        assert!((pred - 2.5 * sig / (sig + nug)).abs() < 1e-12);
    }

    #[test]
    fn reverts_to_prior_far_away() {
        let rows: Vec<[f64; 1]> = (0..20).map(|i| [i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| (i as f64 / 3.0).sin() + 2.0).collect();
        let d = DesignMatrix::numeric(Matrix::from_rows(&rows).unwrap(), y.clone()).unwrap();
        let m = fit(&ModelSpec::new(ModelKind::GaussianProcess), &d).unwrap();
        let g = gp_of(&m);
        let far = DesignMatrix::numeric(Matrix::from_rows(&[[1e6]]).unwrap(), vec![0.0]).unwrap();
        let (mu, var) = m.predict_with_variance(&far).unwrap();
        assert!((mu[0] - mean(&y)).abs() < 1e-12);
        assert!((var[0] - (g.signal_variance + g.nugget)).abs() < 1e-12);
    }

    #[test]
    fn interpolates_noiseless_line() {
        let rows: Vec<[f64; 1]> = (0..5).map(|i| [i as f64]).collect();
        let y: Vec<f64> = (0..5).map(f64::from).collect();
        let d = DesignMatrix::numeric(Matrix::from_rows(&rows).unwrap(), y.clone()).unwrap();
        let spec = ModelSpec::new(ModelKind::GaussianProcess)
            .with("lengthscale", 1.0)
            .with("signal_variance", 1.0)
            .with("nugget_ratio", 1e-12);
        let m = fit(&spec, &d).unwrap();
        for (p, o) in m.predict(&d).unwrap().iter().zip(&y) {
            assert!((p - o).abs() < 1e-6, "{p} vs {o}");
        }
    }
}
