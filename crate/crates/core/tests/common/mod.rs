//! Oracles and fixtures shared by the integration tests. Each oracle is an
//! independent implementation and deliberately avoids the library's own
//! helpers.
#![allow(dead_code, clippy::needless_range_loop)]

use wq_core::geo::{enrich, LatLon};
use wq_core::synth::{california_coastline, generate, synthetic_raster, SynthSpec};
use wq_core::SampleRecord;

pub fn rmse_oracle(pred: &[f64], obs: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..pred.len() {
        s += (pred[i] - obs[i]) * (pred[i] - obs[i]);
    }
    (s / pred.len() as f64).sqrt()
}

pub fn r2_oracle(pred: &[f64], obs: &[f64]) -> f64 {
    let m = obs.iter().sum::<f64>() / obs.len() as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for i in 0..obs.len() {
        ss_res += (obs[i] - pred[i]).powi(2);
        ss_tot += (obs[i] - m).powi(2);
    }
    1.0 - ss_res / ss_tot
}

/// Great-circle distance via the spherical law of cosines on unit vectors,
/// a different formulation from haversine.
pub fn great_circle_oracle(a: LatLon, b: LatLon) -> f64 {
    let v = |p: LatLon| {
        let (la, lo) = (p.lat.to_radians(), p.lon.to_radians());
        [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
    };
    let (u, w) = (v(a), v(b));
    let cross = [
        u[1] * w[2] - u[2] * w[1],
        u[2] * w[0] - u[0] * w[2],
        u[0] * w[1] - u[1] * w[0],
    ];
    let sin = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
    let cos = u[0] * w[0] + u[1] * w[1] + u[2] * w[2];
    6371.0088 * sin.atan2(cos)
}

/// Dense solve by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

pub fn svr_objective(k: &[f64], z: &[f64], eps: f64, theta: &[f64]) -> f64 {
    let n = z.len();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            q += theta[i] * k[i * n + j] * theta[j];
        }
    }
    0.5 * q - z.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + eps * theta.iter().map(|t| t.abs()).sum::<f64>()
}

/// Minimum of the ε-SVR dual
/// `½θᵀKθ − zᵀθ + ε Σ|θ|` subject to `Σθ = 0`, `−C ≤ θ ≤ C`,
/// found by enumerating every assignment of each coordinate to one of
/// {−C, free negative, 0, free positive, +C} and solving the equality
/// constrained quadratic on the free set.
pub fn svr_brute_force(k: &[f64], z: &[f64], eps: f64, c: f64) -> f64 {
    let n = z.len();
    let mut best = f64::INFINITY;
    let patterns = 5usize.pow(n as u32);
    for code in 0..patterns {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 5) as u8;
            rest /= 5;
        }
        let mut theta = vec![0.0; n];
        let mut free = Vec::new();
        let mut sign = Vec::new();
        for i in 0..n {
            match state[i] {
                0 => theta[i] = -c,
                1 => {
                    free.push(i);
                    sign.push(-1.0);
                }
                2 => theta[i] = 0.0,
                3 => {
                    free.push(i);
                    sign.push(1.0);
                }
                _ => theta[i] = c,
            }
        }
        let fixed_sum: f64 = theta.iter().sum();
        if free.is_empty() {
            if fixed_sum.abs() < 1e-12 {
                best = best.min(svr_objective(k, z, eps, &theta));
            }
            continue;
        }
        // KKT system for the free block with the equality multiplier
        let m = free.len();
        let mut a = vec![vec![0.0; m + 1]; m + 1];
        let mut b = vec![0.0; m + 1];
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                a[r][s] = k[i * n + j];
            }
            a[r][m] = 1.0;
            a[m][r] = 1.0;
            let coupling: f64 = (0..n).map(|j| k[i * n + j] * theta[j]).sum();
            b[r] = z[i] - eps * sign[r] - coupling;
        }
        b[m] = -fixed_sum;
        let Some(sol) = solve_dense(a, b) else { continue };
        let mut ok = true;
        for (r, &i) in free.iter().enumerate() {
            let v = sol[r];
            if v * sign[r] < -1e-12 || v.abs() > c + 1e-12 {
                ok = false;
            }
            theta[i] = v;
        }
        if ok {
            best = best.min(svr_objective(k, z, eps, &theta));
        }
    }
    best
}

/// Synthetic records labelled with the synthetic coastline and climate
/// raster, as the enrich stage would.
pub fn enriched_synth(spec: &SynthSpec) -> Vec<SampleRecord> {
    let mut records = generate(spec).expect("valid spec");
    enrich(&mut records, &california_coastline(), &synthetic_raster(spec.bbox, 0.25)).expect("enrich");
    records
}
