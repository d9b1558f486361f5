use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::matrix::mean;
use crate::preprocess::DesignMatrix;

use super::{trained, FittedState, ModelKind, ModelSpec, TrainedModel};

/// Ridge added to the (unit-diagonal) Gram matrix when it is singular.
const RIDGE: f64 = 1e-8;
const PIVOT_TOL: f64 = 1e-12;

/// Ordinary least squares with intercept, in raw feature units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>()
    }
}

/// Solves the normal equations on centered, unit-scaled columns; constant
/// columns get a zero coefficient. A singular system is retried with a
/// `1e-8·I` ridge and a rank-deficiency warning.
pub fn least_squares(data: &DesignMatrix) -> Result<(LinearModel, Vec<String>)> {
    let (n, p) = (data.n(), data.p());
    if n == 0 {
        return Err(Error::DegenerateInput("no rows".into()));
    }
    let y_mean = mean(&data.y);
    let mut cols = Vec::new();
    let mut means = vec![0.0; p];
    let mut scales = vec![0.0; p];
    for j in 0..p {
        let c = data.x.column(j);
        let m = mean(&c);
        let s = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        means[j] = m;
        scales[j] = s;
        if s > 0.0 && s.is_finite() {
            cols.push(j);
        }
    }
    let k = cols.len();
    let mut gram = vec![0.0; k * k];
    let mut rhs = vec![0.0; k];
    let mut z = vec![0.0; k];
    for i in 0..n {
        let row = data.x.row(i);
        for (a, &j) in cols.iter().enumerate() {
            z[a] = (row[j] - means[j]) / scales[j];
        }
        let yc = data.y[i] - y_mean;
        for a in 0..k {
            rhs[a] += z[a] * yc;
            for b in 0..=a {
                gram[a * k + b] += z[a] * z[b];
            }
        }
    }
    for a in 0..k {
        rhs[a] /= n as f64;
        for b in 0..=a {
            gram[a * k + b] /= n as f64;
            gram[b * k + a] = gram[a * k + b];
        }
    }

    let mut warnings = Vec::new();
    let chol = match Cholesky::new(&gram, k, PIVOT_TOL) {
        Some(c) => c,
        None => {
            for a in 0..k {
                gram[a * k + a] += RIDGE;
            }
            warnings.push(format!("RankDeficient: normal equations singular, ridge {RIDGE} added"));
            Cholesky::new(&gram, k, PIVOT_TOL)
                .ok_or_else(|| Error::DegenerateInput("normal equations singular even with ridge".into()))?
        }
    };
    let beta_z = chol.solve(&rhs);
    let mut coefficients = vec![0.0; p];
    for (a, &j) in cols.iter().enumerate() {
        coefficients[j] = beta_z[a] / scales[j];
    }
    let intercept = y_mean - cols.iter().map(|&j| coefficients[j] * means[j]).sum::<f64>();
    Ok((
        LinearModel {
            intercept,
            coefficients,
        },
        warnings,
    ))
}

pub fn fit_linear(data: &DesignMatrix) -> Result<TrainedModel> {
    let (m, warnings) = least_squares(data)?;
    Ok(trained(
        &ModelSpec::new(ModelKind::Linear),
        data,
        FittedState::Linear(m),
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn dm(xs: &[f64], ys: &[f64]) -> DesignMatrix {
        let rows: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
        DesignMatrix::numeric(Matrix::from_rows(&rows).unwrap(), ys.to_vec()).unwrap()
    }

    #[test]
    fn noiseless_line() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let (m, w) = least_squares(&dm(&xs, &ys)).unwrap();
        assert!((m.coefficients[0] - 2.0).abs() < 1e-10);
        assert!((m.intercept - 1.0).abs() < 1e-10);
        assert!(w.is_empty());
    }

    #[test]
    fn constant_target() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let (m, _) = least_squares(&dm(&xs, &[3.0; 10])).unwrap();
        assert!((m.intercept - 3.0).abs() < 1e-10);
        assert!(m.coefficients[0].abs() < 1e-10);
    }

    #[test]
    fn three_point_hand_solution() {
        let (m, _) = least_squares(&dm(&[0.0, 1.0, 2.0], &[1.0, 2.0, 2.0])).unwrap();
        assert!((m.coefficients[0] - 0.5).abs() < 1e-12);
        assert!((m.intercept - 7.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_columns_engage_ridge() {
        let rows: Vec<[f64; 2]> = (0..20).map(|i| [i as f64, 2.0 * i as f64]).collect();
        let ys: Vec<f64> = (0..20).map(|i| 3.0 * i as f64 + 1.0).collect();
        let d = DesignMatrix::numeric(Matrix::from_rows(&rows).unwrap(), ys.clone()).unwrap();
        let (m, w) = least_squares(&d).unwrap();
        assert_eq!(w.len(), 1);
        for (r, y) in rows.iter().zip(&ys) {
            assert!((m.predict_row(r) - y).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_row_predicts_intercept() {
        let (m, _) = least_squares(&dm(&[0.0, 1.0, 2.0], &[1.0, 2.0, 2.0])).unwrap();
        assert_eq!(m.predict_row(&[0.0]), m.intercept);
    }
}
