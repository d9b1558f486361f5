use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{mean, sample_variance, Matrix, Standardizer};
use crate::preprocess::DesignMatrix;

use super::{trained, FittedState, ModelSpec, TrainedModel};

/// Kernel rows kept in memory during SMO.
const CACHE_BYTES: usize = 256 << 20;
const TAU: f64 = 1e-12;

/// Solution of the ε-insensitive SVR dual in coefficient form
/// `θ_i = α_i − α*_i`, with prediction `Σ θ_i k(x_i, x) + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrSolution {
    pub theta: Vec<f64>,
    pub bias: f64,
    /// `½θᵀKθ − zᵀθ + ε Σ|θ_i|`.
    pub objective: f64,
    /// Maximal violating-pair gap at termination.
    pub kkt_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct RowCache<F> {
    compute: F,
    rows: HashMap<usize, Arc<Vec<f64>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<F: Fn(usize) -> Vec<f64>> RowCache<F> {
    fn get(&mut self, i: usize) -> Arc<Vec<f64>> {
        if let Some(r) = self.rows.get(&i) {
            return r.clone();
        }
        if self.rows.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.rows.remove(&old);
            }
        }
        let r = Arc::new((self.compute)(i));
        self.rows.insert(i, r.clone());
        self.order.push_back(i);
        r
    }
}

/// SMO over the 2n-variable dual with second-order working-set selection.
#[allow(clippy::too_many_arguments)]
fn smo<F: Fn(usize) -> Vec<f64>>(
    n: usize,
    diag: &[f64],
    rows: &mut RowCache<F>,
    z: &[f64],
    eps: f64,
    c: f64,
    tol: f64,
    max_iter: usize,
) -> SvrSolution {
    let l = 2 * n;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let mut beta = vec![0.0; l];
    let p: Vec<f64> = (0..l).map(|t| if t < n { eps - z[t] } else { eps + z[t - n] }).collect();
    let mut grad = p.clone();
    let upper = |b: f64| b >= c;
    let lower = |b: f64| b <= 0.0;

    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    let mut converged = false;
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..l {
            let y = sign(t);
            let in_up = if y > 0.0 { !upper(beta[t]) } else { !lower(beta[t]) };
            if in_up && -y * grad[t] >= gmax {
                gmax = -y * grad[t];
                i = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        let ki = if i != usize::MAX { Some(rows.get(i % n)) } else { None };
        for t in 0..l {
            let y = sign(t);
            let in_low = if y > 0.0 { !lower(beta[t]) } else { !upper(beta[t]) };
            if !in_low {
                continue;
            }
            let v = -y * grad[t];
            gmin = gmin.min(v);
            if let Some(ki) = &ki {
                let b = gmax - v;
                if b > 0.0 {
                    let a = diag[i % n] + diag[t % n] - 2.0 * ki[t % n];
                    let a = if a > 0.0 { a } else { TAU };
                    let score = -b * b / a;
                    if score <= best {
                        best = score;
                        j = t;
                    }
                }
            }
        }
        gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap < tol {
            converged = true;
            break;
        }
        iterations += 1;

        let ki = ki.unwrap();
        let kj = rows.get(j % n);
        let (yi, yj) = (sign(i), sign(j));
        let qij = yi * yj * ki[j % n];
        let (old_i, old_j) = (beta[i], beta[j]);
        if yi != yj {
            let quad = diag[i % n] + diag[j % n] + 2.0 * qij;
            let delta = (-grad[i] - grad[j]) / if quad > 0.0 { quad } else { TAU };
            let diff = beta[i] - beta[j];
            beta[i] += delta;
            beta[j] += delta;
            if diff > 0.0 {
                if beta[j] < 0.0 {
                    beta[j] = 0.0;
                    beta[i] = diff;
                }
            } else if beta[i] < 0.0 {
                beta[i] = 0.0;
                beta[j] = -diff;
            }
            if diff > 0.0 {
                if beta[i] > c {
                    beta[i] = c;
                    beta[j] = c - diff;
                }
            } else if beta[j] > c {
                beta[j] = c;
                beta[i] = c + diff;
            }
        } else {
            let quad = diag[i % n] + diag[j % n] - 2.0 * qij;
            let delta = (grad[i] - grad[j]) / if quad > 0.0 { quad } else { TAU };
            let sum = beta[i] + beta[j];
            beta[i] -= delta;
            beta[j] += delta;
            if sum > c {
                if beta[i] > c {
                    beta[i] = c;
                    beta[j] = sum - c;
                }
            } else if beta[j] < 0.0 {
                beta[j] = 0.0;
                beta[i] = sum;
            }
            if sum > c {
                if beta[j] > c {
                    beta[j] = c;
                    beta[i] = sum - c;
                }
            } else if beta[i] < 0.0 {
                beta[i] = 0.0;
                beta[j] = sum;
            }
        }
        let (di, dj) = (beta[i] - old_i, beta[j] - old_j);
        for t in 0..l {
            let yt = sign(t);
            grad[t] += yt * (yi * ki[t % n] * di + yj * kj[t % n] * dj);
        }
    }

    let (mut ub, mut lb, mut sum_free, mut n_free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..l {
        let y = sign(t);
        let yg = y * grad[t];
        if upper(beta[t]) {
            if y < 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else if lower(beta[t]) {
            if y > 0.0 { ub = ub.min(yg) } else { lb = lb.max(yg) }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    let theta: Vec<f64> = (0..n).map(|k| beta[k] - beta[k + n]).collect();

    let mut quad = 0.0;
    for (a, &ta) in theta.iter().enumerate() {
        if ta != 0.0 {
            let ka = rows.get(a);
            quad += ta * theta.iter().zip(ka.iter()).map(|(t, k)| t * k).sum::<f64>();
        }
    }
    let objective = 0.5 * quad - theta.iter().zip(z).map(|(t, y)| t * y).sum::<f64>()
        + eps * theta.iter().map(|t| t.abs()).sum::<f64>();

    SvrSolution {
        theta,
        bias: -rho,
        objective,
        kkt_gap: gap,
        iterations,
        converged,
    }
}

fn iteration_cap(max_iter: usize, n: usize) -> usize {
    match max_iter {
        0 => (100 * n).max(10_000_000),
        m => m,
    }
}

/// Solves the ε-SVR dual for a precomputed `n×n` kernel matrix (row-major).
/// A `max_iter` of 0 selects `max(10^7, 100 n)`.
pub fn solve_epsilon_svr(
    kernel: &[f64],
    z: &[f64],
    epsilon: f64,
    c: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SvrSolution> {
    let n = z.len();
    if kernel.len() != n * n {
        return Err(Error::LengthMismatch(kernel.len(), n * n));
    }
    let diag: Vec<f64> = (0..n).map(|i| kernel[i * n + i]).collect();
    let mut rows = RowCache {
        compute: |i: usize| kernel[i * n..(i + 1) * n].to_vec(),
        rows: HashMap::new(),
        order: VecDeque::new(),
        capacity: n.max(1),
    };
    Ok(smo(n, &diag, &mut rows, z, epsilon, c, tol, iteration_cap(max_iter, n)))
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).exp()
}

/// RBF ε-SVR fit on standardized inputs and a standardized target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub standardizer: Standardizer,
    pub y_mean: f64,
    pub y_scale: f64,
    pub gamma: f64,
    /// Standardized support vectors.
    pub support: Matrix,
    pub coef: Vec<f64>,
    pub bias: f64,
}

impl SvrModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows())
            .into_par_iter()
            .map(|i| {
                let mut buf = vec![0.0; x.cols()];
                self.standardizer.transform_row(x.row(i), &mut buf);
                let f: f64 = self
                    .support
                    .iter_rows()
                    .zip(&self.coef)
                    .map(|(s, c)| c * rbf(s, &buf, self.gamma))
                    .sum();
                self.y_mean + self.y_scale * (f + self.bias)
            })
            .collect()
    }

    pub fn n_support(&self) -> usize {
        self.coef.len()
    }
}

pub fn fit_support_vector(data: &DesignMatrix, spec: &ModelSpec) -> Result<TrainedModel> {
    let cap = spec.get("max_train_points")? as usize;
    let mut warnings = Vec::new();
    let sub = if data.n() > cap {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut idx = sample(&mut rng, data.n(), cap).into_vec();
        idx.sort_unstable();
        warnings.push(format!("trained on a seeded subsample of {cap} of {} rows", data.n()));
        data.select_rows(&idx)
    } else {
        data.clone()
    };
    let n = sub.n();
    let p = sub.p();
    let standardizer = Standardizer::fit(&sub.x);
    let xs = standardizer.transform(&sub.x);
    let y_mean = mean(&sub.y);
    let y_scale = if n > 1 { sample_variance(&sub.y, y_mean).sqrt() } else { 0.0 };
    let gamma = match spec.get("gamma")? {
        g if g > 0.0 => g,
        _ => 1.0 / p.max(1) as f64,
    };

    if !(y_scale > 0.0) {
        let m = SvrModel {
            standardizer,
            y_mean,
            y_scale: 0.0,
            gamma,
            support: Matrix::zeros(0, p),
            coef: Vec::new(),
            bias: 0.0,
        };
        return Ok(trained(spec, data, FittedState::SupportVector(m), warnings));
    }

    let z: Vec<f64> = sub.y.iter().map(|v| (v - y_mean) / y_scale).collect();
    let max_iter = iteration_cap(spec.get("max_iter")? as usize, n);
    let diag = vec![1.0; n];
    let xs_ref = &xs;
    let mut rows = RowCache {
        compute: move |i: usize| {
            let a = xs_ref.row(i);
            (0..n).map(|j| rbf(a, xs_ref.row(j), gamma)).collect()
        },
        rows: HashMap::new(),
        order: VecDeque::new(),
        capacity: (CACHE_BYTES / (8 * n)).max(2),
    };
    let sol = smo(
        n,
        &diag,
        &mut rows,
        &z,
        spec.get("epsilon_ratio")?,
        spec.get("c")?,
        spec.get("tol")?,
        max_iter,
    );
    if !sol.converged {
        warnings.push(format!(
            "NoConvergence: SMO stopped after {} iterations with gap {}",
            sol.iterations, sol.kkt_gap
        ));
    }
    let sv: Vec<usize> = (0..n).filter(|&i| sol.theta[i] != 0.0).collect();
    let m = SvrModel {
        standardizer,
        y_mean,
        y_scale,
        gamma,
        support: xs.select_rows(&sv),
        coef: sv.iter().map(|&i| sol.theta[i]).collect(),
        bias: sol.bias,
    };
    Ok(trained(spec, data, FittedState::SupportVector(m), warnings))
}
