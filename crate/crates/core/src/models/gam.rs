use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::Cholesky;
use crate::matrix::{mean, sample_variance, Matrix};
use crate::preprocess::DesignMatrix;

use super::{trained, FittedState, ModelSpec, TrainedModel};

/// Smoothing grid, as multiples of `tr(BᵀB) / tr(S)`.
const LAMBDA_EXPONENTS: std::ops::RangeInclusive<i32> = -4..=4;
const TINY_RIDGE: f64 = 1e-10;

/// Cubic B-spline basis on equally spaced knots over `[lo, hi]`;
/// `knots` knots give `knots + 2` basis functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BSplineBasis {
    pub lo: f64,
    pub hi: f64,
    pub knots: usize,
}

impl BSplineBasis {
    pub fn new(lo: f64, hi: f64, knots: usize) -> Self {
        BSplineBasis { lo, hi, knots: knots.max(2) }
    }

    pub fn n_basis(&self) -> usize {
        self.knots + 2
    }

    fn intervals(&self) -> usize {
        self.knots - 1
    }

    fn step(&self) -> f64 {
        (self.hi - self.lo) / self.intervals() as f64
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let t = (x.clamp(self.lo, self.hi) - self.lo) / self.step();
        let s = (t.floor() as usize).min(self.intervals() - 1);
        (s, t - s as f64)
    }

    /// First basis index with non-zero weight and the four weights at `x`
    /// (clamped into the domain).
    pub fn eval(&self, x: f64) -> (usize, [f64; 4]) {
        let (s, u) = self.locate(x);
        let v = 1.0 - u;
        (
            s,
            [
                v * v * v / 6.0,
                (3.0 * u * u * u - 6.0 * u * u + 4.0) / 6.0,
                (-3.0 * u * u * u + 3.0 * u * u + 3.0 * u + 1.0) / 6.0,
                u * u * u / 6.0,
            ],
        )
    }

    /// Derivatives of the four non-zero basis functions with respect to `x`.
    pub fn eval_deriv(&self, x: f64) -> (usize, [f64; 4]) {
        let (s, u) = self.locate(x);
        let h = self.step();
        let v = 1.0 - u;
        (
            s,
            [
                -v * v / 2.0 / h,
                (3.0 * u * u - 4.0 * u) / 2.0 / h,
                (-3.0 * u * u + 2.0 * u + 1.0) / 2.0 / h,
                u * u / 2.0 / h,
            ],
        )
    }

    /// Spline value, continued linearly outside `[lo, hi]`.
    pub fn value(&self, coef: &[f64], x: f64) -> f64 {
        let dot = |(s, w): (usize, [f64; 4])| w.iter().zip(&coef[s..s + 4]).map(|(a, b)| a * b).sum::<f64>();
        let edge = if x < self.lo {
            self.lo
        } else if x > self.hi {
            self.hi
        } else {
            return dot(self.eval(x));
        };
        dot(self.eval(edge)) + dot(self.eval_deriv(edge)) * (x - edge)
    }
}

/// One additive term, centered to zero mean over the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Component {
    Spline {
        column: usize,
        basis: BSplineBasis,
        coef: Vec<f64>,
        lambda: f64,
        shift: f64,
    },
    /// One-hot group: one effect per column.
    Categorical {
        columns: Vec<usize>,
        effects: Vec<f64>,
        shift: f64,
    },
    /// Constant input; contributes nothing.
    Zero { column: usize },
}

impl Component {
    pub fn value(&self, row: &[f64]) -> f64 {
        match self {
            Component::Spline { column, basis, coef, shift, .. } => basis.value(coef, row[*column]) - shift,
            Component::Categorical { columns, effects, shift } => {
                columns.iter().zip(effects).map(|(&c, e)| row[c] * e).sum::<f64>() - shift
            }
            Component::Zero { .. } => 0.0,
        }
    }
}

/// `y ≈ intercept + Σ f_j(x_j)`, fit by backfitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveModel {
    pub intercept: f64,
    pub components: Vec<Component>,
    pub sweeps: usize,
    pub converged: bool,
}

impl AdditiveModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.components.iter().map(|c| c.value(row)).sum::<f64>()
    }

    /// Per-component contributions for each row of `x`.
    pub fn component_values(&self, x: &Matrix) -> Vec<Vec<f64>> {
        self.components
            .iter()
            .map(|c| x.iter_rows().map(|r| c.value(r)).collect())
            .collect()
    }
}

/// Precomputed pieces of one smoother.
enum Smoother {
    Spline {
        column: usize,
        basis: BSplineBasis,
        rows: Vec<(usize, [f64; 4])>,
        gram: Vec<f64>,
        penalty: Vec<f64>,
    },
    Categorical {
        columns: Vec<usize>,
        level: Vec<Option<usize>>,
        counts: Vec<usize>,
    },
    Zero(usize),
}

fn second_difference_penalty(k: usize) -> Vec<f64> {
    let mut s = vec![0.0; k * k];
    for r in 0..k.saturating_sub(2) {
        let d = [(r, 1.0), (r + 1, -2.0), (r + 2, 1.0)];
        for &(a, va) in &d {
            for &(b, vb) in &d {
                s[a * k + b] += va * vb;
            }
        }
    }
    s
}

fn trace(a: &[f64], k: usize) -> f64 {
    (0..k).map(|i| a[i * k + i]).sum()
}

/// Penalized fit of `r` on a spline basis. Returns coefficients and λ.
fn fit_spline(
    rows: &[(usize, [f64; 4])],
    gram: &[f64],
    penalty: &[f64],
    k: usize,
    r: &[f64],
    fixed_lambda: f64,
) -> (Vec<f64>, f64) {
    let mut rhs = vec![0.0; k];
    for (&(s, w), &ri) in rows.iter().zip(r) {
        for (a, wa) in w.iter().enumerate() {
            rhs[s + a] += wa * ri;
        }
    }
    let rr: f64 = r.iter().map(|v| v * v).sum();
    let n = r.len() as f64;
    let scale = trace(gram, k) / trace(penalty, k).max(f64::MIN_POSITIVE);
    let grid: Vec<f64> = if fixed_lambda > 0.0 {
        vec![fixed_lambda]
    } else {
        LAMBDA_EXPONENTS.map(|e| scale * 10f64.powi(e)).collect()
    };

    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    for lambda in grid {
        let mut a: Vec<f64> = gram.iter().zip(penalty).map(|(g, s)| g + lambda * s).collect();
        let chol = match Cholesky::new(&a, k, 0.0) {
            Some(c) => c,
            None => {
                let ridge = TINY_RIDGE * trace(gram, k).max(1.0);
                for i in 0..k {
                    a[i * k + i] += ridge;
                }
                match Cholesky::new(&a, k, 0.0) {
                    Some(c) => c,
                    None => continue,
                }
            }
        };
        let beta = chol.solve(&rhs);
        let inv = chol.inverse();
        let edf: f64 = (0..k).map(|i| (0..k).map(|j| inv[i * k + j] * gram[j * k + i]).sum::<f64>()).sum();
        let g_beta: Vec<f64> = (0..k).map(|i| (0..k).map(|j| gram[i * k + j] * beta[j]).sum()).collect();
        let rss = (rr - 2.0 * dot(&beta, &rhs) + dot(&beta, &g_beta)).max(0.0);
        let denom = (n - edf).max(1e-9);
        let gcv = n * rss / (denom * denom);
        if best.as_ref().is_none_or(|b| gcv < b.0) {
            best = Some((gcv, beta, lambda));
        }
    }
    match best {
        Some((_, beta, lambda)) => (beta, lambda),
        None => (vec![0.0; k], f64::NAN),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn fit_additive(data: &DesignMatrix, spec: &ModelSpec) -> Result<TrainedModel> {
    let knots = spec.get("knots")? as usize;
    let fixed_lambda = spec.get("lambda")?;
    let tol = spec.get("tol")?;
    let max_sweeps = spec.get("max_sweeps")? as usize;
    let n = data.n();

    let mut smoothers = Vec::new();
    for (_, cols) in data.layout.variables() {
        if cols.len() > 1 || data.layout.group_of(cols[0]).is_some() {
            let level: Vec<Option<usize>> = data
                .x
                .iter_rows()
                .map(|r| cols.iter().position(|&c| r[c] != 0.0))
                .collect();
            let mut counts = vec![0; cols.len()];
            for l in level.iter().flatten() {
                counts[*l] += 1;
            }
            smoothers.push(Smoother::Categorical {
                columns: cols,
                level,
                counts,
            });
            continue;
        }
        let j = cols[0];
        let col = data.x.column(j);
        let (lo, hi) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !(hi > lo) {
            smoothers.push(Smoother::Zero(j));
            continue;
        }
        let basis = BSplineBasis::new(lo, hi, knots);
        let k = basis.n_basis();
        let rows: Vec<(usize, [f64; 4])> = col.iter().map(|&v| basis.eval(v)).collect();
        let mut gram = vec![0.0; k * k];
        for (s, w) in &rows {
            for a in 0..4 {
                for b in 0..4 {
                    gram[(s + a) * k + s + b] += w[a] * w[b];
                }
            }
        }
        smoothers.push(Smoother::Spline {
            column: j,
            basis,
            rows,
            gram,
            penalty: second_difference_penalty(k),
        });
    }

    let intercept = mean(&data.y);
    let y_sd = sample_variance(&data.y, intercept).sqrt();
    let threshold = tol * if y_sd > 0.0 { y_sd } else { 1.0 };
    let mut fitted = vec![vec![0.0; n]; smoothers.len()];
    let mut total: Vec<f64> = vec![intercept; n];
    let mut components: Vec<Component> = smoothers
        .iter()
        .map(|s| match s {
            Smoother::Spline { column, .. } | Smoother::Zero(column) => Component::Zero { column: *column },
            Smoother::Categorical { columns, .. } => Component::Categorical {
                columns: columns.clone(),
                effects: vec![0.0; columns.len()],
                shift: 0.0,
            },
        })
        .collect();

    let mut sweeps = 0;
    let mut converged = smoothers.is_empty();
    let mut partial = vec![0.0; n];
    while !converged && sweeps < max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for (j, sm) in smoothers.iter().enumerate() {
            for i in 0..n {
                partial[i] = data.y[i] - total[i] + fitted[j][i];
            }
            let (new, comp) = match sm {
                Smoother::Zero(c) => (vec![0.0; n], Component::Zero { column: *c }),
                Smoother::Spline {
                    column,
                    basis,
                    rows,
                    gram,
                    penalty,
                } => {
                    let (coef, lambda) = fit_spline(rows, gram, penalty, basis.n_basis(), &partial, fixed_lambda);
                    let raw: Vec<f64> = rows
                        .iter()
                        .map(|(s, w)| w.iter().zip(&coef[*s..s + 4]).map(|(a, b)| a * b).sum())
                        .collect();
                    let shift = mean(&raw);
                    (
                        raw.iter().map(|v| v - shift).collect(),
                        Component::Spline {
                            column: *column,
                            basis: *basis,
                            coef,
                            lambda,
                            shift,
                        },
                    )
                }
                Smoother::Categorical { columns, level, counts } => {
                    let mut sums = vec![0.0; columns.len()];
                    for (l, r) in level.iter().zip(&partial) {
                        if let Some(l) = l {
                            sums[*l] += r;
                        }
                    }
                    let effects: Vec<f64> = sums
                        .iter()
                        .zip(counts)
                        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
                        .collect();
                    let raw: Vec<f64> = level.iter().map(|l| l.map_or(0.0, |l| effects[l])).collect();
                    let shift = mean(&raw);
                    (
                        raw.iter().map(|v| v - shift).collect(),
                        Component::Categorical {
                            columns: columns.clone(),
                            effects,
                            shift,
                        },
                    )
                }
            };
            for i in 0..n {
                let d = new[i] - fitted[j][i];
                max_change = max_change.max(d.abs());
                total[i] += d;
            }
            fitted[j] = new;
            components[j] = comp;
        }
        converged = max_change <= threshold;
    }

    let warnings = if converged {
        Vec::new()
    } else {
        vec![format!("NoConvergence: backfitting stopped after {sweeps} sweeps")]
    };
    let model = AdditiveModel {
        intercept,
        components,
        sweeps,
        converged,
    };
    Ok(trained(spec, data, FittedState::Additive(model), warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fit, ModelKind};

    #[test]
    fn basis_is_partition_of_unity() {
        let b = BSplineBasis::new(-2.0, 5.0, 10);
        assert_eq!(b.n_basis(), 12);
        for i in 0..=70 {
            let (_, w) = b.eval(-2.0 + i as f64 * 0.1);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reproduces_a_line_and_extrapolates_it() {
        let rows: Vec<[f64; 1]> = (0..50).map(|i| [i as f64 / 7.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] - 1.0).collect();
        let d = DesignMatrix::numeric(Matrix::from_rows(&rows).unwrap(), y).unwrap();
        let m = fit(&ModelSpec::new(ModelKind::Additive), &d).unwrap();
        for x in [-5.0, 0.0, 3.3, 7.0, 20.0] {
            let p = m.predict_matrix(&Matrix::from_rows(&[[x]]).unwrap()).unwrap()[0];
            assert!((p - (3.0 * x - 1.0)).abs() < 1e-6, "{x}: {p}");
        }
    }

    #[test]
    fn components_are_centered() {
        let rows: Vec<[f64; 2]> = (0..120).map(|i| [(i % 17) as f64, (i * 7 % 23) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| (r[0] / 3.0).sin() + 0.1 * r[1] * r[1]).collect();
        let d = DesignMatrix::numeric(Matrix::from_rows(&rows).unwrap(), y).unwrap();
        let m = fit(&ModelSpec::new(ModelKind::Additive), &d).unwrap();
        let FittedState::Additive(g) = &m.state else { unreachable!() };
        assert!(g.converged);
        for c in g.component_values(&d.x) {
            assert!(mean(&c).abs() < 1e-9);
        }
    }
}
