//! Histogram regression trees shared by the random forest and the booster.
//!
//! Features are binned by rank, so bin boundaries are actual data values and
//! the learned splits are invariant to monotone rescaling of any column.
//! Split quality is the regularized squared-error gain
//! `G_L²/(n_L+λ) + G_R²/(n_R+λ) − G²/(n+λ)`; with `λ = 0` this is exactly the
//! reduction in sum of squared errors.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

/// Rank-based bins for every column of a matrix.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    n: usize,
    /// Column-major bin ids.
    bins: Vec<Vec<u16>>,
    /// Upper edge (inclusive) of every bin, per feature. Edges are data values.
    edges: Vec<Vec<f64>>,
}

impl BinnedMatrix {
    pub fn new(x: &Matrix, max_bins: usize) -> Self {
        let max_bins = max_bins.clamp(2, u16::MAX as usize);
        let n = x.rows();
        let mut bins = Vec::with_capacity(x.cols());
        let mut edges = Vec::with_capacity(x.cols());
        for j in 0..x.cols() {
            let col = x.column(j);
            let mut sorted = col.clone();
            sorted.sort_by(f64::total_cmp);
            let mut uniq = sorted.clone();
            uniq.dedup();
            let e = if uniq.len() <= max_bins {
                uniq
            } else {
                let mut e: Vec<f64> = (1..=max_bins)
                    .map(|k| sorted[(k * n).div_ceil(max_bins) - 1])
                    .collect();
                e.dedup();
                e
            };
            let b = col
                .iter()
                .map(|&v| e.partition_point(|&edge| edge < v).min(e.len() - 1) as u16)
                .collect();
            bins.push(b);
            edges.push(e);
        }
        BinnedMatrix { n, bins, edges }
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.bins.len()
    }

    fn n_bins(&self, j: usize) -> usize {
        self.edges[j].len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        /// Bin id matching `threshold` in the training binning.
        #[serde(skip)]
        bin: u16,
        gain: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Prediction for a training row, walking the bin ids.
    pub(crate) fn predict_binned(&self, data: &BinnedMatrix, row: usize) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    bin,
                    left,
                    right,
                    ..
                } => i = if data.bins[*feature][row] <= *bin { *left } else { *right },
            }
        }
    }

    pub fn add_gains(&self, out: &mut [f64]) {
        for n in &self.nodes {
            if let Node::Split { feature, gain, .. } = n {
                out[*feature] += gain;
            }
        }
    }

    pub fn scale_leaves(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= factor;
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub lambda: f64,
    /// Random subset of this many candidate features at every split.
    pub features_per_split: Option<usize>,
}

struct Best {
    feature: usize,
    bin: u16,
    gain: f64,
}

/// Best split of one feature for the rows in `idx`.
fn best_split_for_feature(
    data: &BinnedMatrix,
    target: &[f64],
    idx: &[usize],
    j: usize,
    params: &TreeParams,
    total: f64,
) -> Option<(u16, f64)> {
    let nb = data.n_bins(j);
    if nb < 2 {
        return None;
    }
    let mut sum = vec![0.0; nb];
    let mut cnt = vec![0usize; nb];
    let col = &data.bins[j];
    for &i in idx {
        let b = col[i] as usize;
        sum[b] += target[i];
        cnt[b] += 1;
    }
    let n = idx.len();
    let lam = params.lambda;
    let parent = total * total / (n as f64 + lam);
    let (mut gl, mut nl) = (0.0, 0usize);
    let mut best: Option<(u16, f64)> = None;
    for b in 0..nb - 1 {
        gl += sum[b];
        nl += cnt[b];
        if cnt[b] == 0 {
            continue;
        }
        let nr = n - nl;
        if nl < params.min_samples_leaf || nr < params.min_samples_leaf {
            if nr < params.min_samples_leaf {
                break;
            }
            continue;
        }
        let gr = total - gl;
        let gain = gl * gl / (nl as f64 + lam) + gr * gr / (nr as f64 + lam) - parent;
        if best.is_none_or(|(_, g)| gain > g) {
            best = Some((b as u16, gain));
        }
    }
    best
}

/// Grows one tree on the rows `idx` (duplicates allowed) fitting `target`.
/// Leaf value is `Σ target / (count + λ)`.
pub fn grow<R: Rng>(
    data: &BinnedMatrix,
    target: &[f64],
    idx: Vec<usize>,
    allowed: &[usize],
    params: &TreeParams,
    rng: &mut R,
) -> Tree {
    let mut nodes = Vec::new();
    // (row set, depth, slot to patch)
    let mut stack: Vec<(Vec<usize>, usize, usize)> = Vec::new();
    nodes.push(Node::Leaf { value: 0.0 });
    stack.push((idx, 0, 0));

    while let Some((rows, depth, slot)) = stack.pop() {
        let n = rows.len();
        let total: f64 = rows.iter().map(|&i| target[i]).sum();
        let leaf_value = total / (n as f64 + params.lambda);
        nodes[slot] = Node::Leaf { value: leaf_value };

        let depth_ok = params.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || n < 2 * params.min_samples_leaf || n < 2 {
            continue;
        }
        let sumsq: f64 = rows.iter().map(|&i| target[i] * target[i]).sum();

        let candidates: Vec<usize> = match params.features_per_split {
            Some(m) if m < allowed.len() => {
                let mut picked: Vec<usize> = sample(rng, allowed.len(), m).into_iter().map(|k| allowed[k]).collect();
                picked.sort_unstable();
                picked
            }
            _ => allowed.to_vec(),
        };

        let per_feature: Vec<Option<(u16, f64)>> = if n >= 20_000 && candidates.len() > 1 {
            candidates
                .par_iter()
                .map(|&j| best_split_for_feature(data, target, &rows, j, params, total))
                .collect()
        } else {
            candidates
                .iter()
                .map(|&j| best_split_for_feature(data, target, &rows, j, params, total))
                .collect()
        };
        let mut best: Option<Best> = None;
        for (&j, r) in candidates.iter().zip(per_feature) {
            if let Some((bin, gain)) = r {
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Best { feature: j, bin, gain });
                }
            }
        }
        let Some(best) = best else { continue };
        // numerical noise on pure nodes must not produce splits
        if !(best.gain > 1e-12 * (sumsq + 1e-300)) {
            continue;
        }

        let col = &data.bins[best.feature];
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| col[i] <= best.bin);
        let left = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        let right = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: data.edges[best.feature][best.bin as usize],
            bin: best.bin,
            gain: best.gain,
            left,
            right,
        };
        stack.push((right_rows, depth + 1, right));
        stack.push((left_rows, depth + 1, left));
    }
    Tree { nodes }
}

pub(crate) fn depth_param(v: f64) -> Option<usize> {
    if v == 0.0 {
        None
    } else {
        Some(v as usize)
    }
}
