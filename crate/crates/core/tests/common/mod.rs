//! Shared generators and independent reference computations for the
//! integration tests.
#![allow(dead_code)]

use bgn::model::{ActivationParams, BannModel, LayerParams};
use bgn::regress::RegressionProblem;
use bgn::Dataset;
use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| normal(rng))
}

/// Random features with labels from a random nonlinear function plus noise.
pub fn random_dataset(rng: &mut ChaCha8Rng, m: usize, d0: usize, dl: usize) -> Dataset {
    let x = random_matrix(rng, m, d0);
    let a = random_matrix(rng, dl, d0);
    let b = random_matrix(rng, dl, d0);
    let y = Array2::from_shape_fn((m, dl), |(i, j)| {
        let mut s = 0.0;
        for k in 0..d0 {
            s += a[[j, k]] * x[[i, k]] + b[[j, k]] * x[[i, k]].powi(2).sin();
        }
        s * 3.0 + 0.3 * normal(rng) + 10.0
    });
    Dataset::new(x, y).unwrap()
}

/// A random sign-activation network.
pub fn random_model(rng: &mut ChaCha8Rng, arch: &[usize]) -> BannModel {
    let mut layers: Vec<LayerParams> = arch
        .windows(2)
        .map(|w| {
            LayerParams::new(random_matrix(rng, w[1], w[0]), Array1::from_shape_fn(w[1], |_| normal(rng)))
                .unwrap()
        })
        .collect();
    let output = layers.pop().unwrap();
    BannModel::new(ActivationParams::sign(), layers, output).unwrap()
}

/// Direct objective of a partition: Σ_j Σ_side (n_side/m)·Var(r_side,j),
/// computed by explicit two-pass means.
pub fn partition_objective(residuals: ArrayView2<f64>, negative: &[bool]) -> f64 {
    let m = residuals.nrows() as f64;
    let mut total = 0.0;
    for side in [true, false] {
        let rows: Vec<usize> = (0..residuals.nrows()).filter(|&i| negative[i] == side).collect();
        if rows.is_empty() {
            continue;
        }
        for j in 0..residuals.ncols() {
            let mean = rows.iter().map(|&i| residuals[[i, j]]).sum::<f64>() / rows.len() as f64;
            let ss: f64 = rows.iter().map(|&i| (residuals[[i, j]] - mean).powi(2)).sum();
            total += ss / m;
        }
    }
    total
}

/// Minimum objective over every threshold realizable on the projections:
/// below everything, between each pair of distinct values, above everything.
pub fn brute_force_split(projections: &[f64], residuals: ArrayView2<f64>) -> f64 {
    let mut values = projections.to_vec();
    values.sort_by(|a, b| a.total_cmp(b));
    values.dedup();
    let mut cuts = vec![f64::NEG_INFINITY];
    cuts.extend(values.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    cuts.push(f64::INFINITY);
    cuts.iter()
        .map(|&tau| {
            let negative: Vec<bool> = projections.iter().map(|&p| p < tau).collect();
            partition_objective(residuals, &negative)
        })
        .fold(f64::INFINITY, f64::min)
}

/// `(c, d)` minimizing Σ(r − c·s − d)² per coordinate, from the 2×2 normal
/// equations; the one-sided case has the minimizer family c + d = mean and
/// resolves to c = 0.
pub fn cd_oracle(residuals: ArrayView2<f64>, side: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = side.len() as f64;
    let s1: f64 = side.iter().sum();
    let s2: f64 = side.iter().map(|s| s * s).sum();
    let det = s2 * n - s1 * s1;
    let mut c = Vec::new();
    let mut d = Vec::new();
    for j in 0..residuals.ncols() {
        let col = residuals.column(j);
        let sr: f64 = col.iter().zip(side).map(|(r, s)| r * s).sum();
        let r1: f64 = col.sum();
        if det.abs() < 1e-12 {
            c.push(0.0);
            d.push(r1 / n);
        } else {
            c.push((n * sr - s1 * r1) / det);
            d.push((s2 * r1 - s1 * sr) / det);
        }
    }
    (c, d)
}

/// Least 0-1 error over all assignments of one ±1 label per region.
pub fn classification_oracle(assignment: &[usize], regions: usize, labels: &[f64]) -> f64 {
    assert!(regions <= 8);
    let mut best = usize::MAX;
    for mask in 0u32..(1 << regions) {
        let errors = assignment
            .iter()
            .zip(labels)
            .filter(|(&p, &y)| {
                let guess = if mask >> p & 1 == 1 { 1.0 } else { -1.0 };
                guess != y
            })
            .count();
        best = best.min(errors);
    }
    best as f64 / labels.len() as f64
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn diabetes() -> Dataset {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/data/diabetes.csv");
    bgn::load_csv(path, &bgn::LabelSpec::Trailing(1)).unwrap()
}

/// Largest violation of the lasso subgradient conditions, checked on
/// independently standardized columns (population scale).
pub fn standardized_kkt(problem: &RegressionProblem, weights: &Array1<f64>, lambda: f64) -> f64 {
    let n = problem.n() as f64;
    let ym = problem.targets.sum() / n;
    let mut z = Vec::new();
    let mut beta = Vec::new();
    for (j, col) in problem.design.columns().into_iter().enumerate() {
        let mu = col.sum() / n;
        let sd = (col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n).sqrt();
        z.push(col.mapv(|v| (v - mu) / sd));
        beta.push(weights[j] * sd);
    }
    let mut residual = problem.targets.mapv(|v| v - ym);
    for (zj, bj) in z.iter().zip(&beta) {
        residual.scaled_add(-bj, zj);
    }
    let mut worst: f64 = 0.0;
    for (zj, bj) in z.iter().zip(&beta) {
        let g = zj.dot(&residual) / n;
        let violation = if *bj == 0.0 {
            (g.abs() - lambda).max(0.0)
        } else {
            (g - lambda * bj.signum()).abs()
        };
        worst = worst.max(violation);
    }
    worst
}
