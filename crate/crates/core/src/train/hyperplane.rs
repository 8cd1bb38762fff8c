//! Hyperplane placement: regression-oriented normal, exhaustive bias scan,
//! and the closed-form output coefficients of a new neuron.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::model::dot;
use crate::regress::{auto_lambda_fit, least_squares_fit, RegressionProblem};

use super::{HyperplaneSolver, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasSplit {
    pub b: f64,
    /// `Σ_j [(n₋/m)Var(r₋,j) + (n₊/m)Var(r₊,j)]` at the chosen split.
    pub objective: f64,
    /// Number of examples on the negative side.
    pub negatives: usize,
}

/// Scans the `m + 1` splits of the examples sorted by projection onto `w`
/// and returns the bias minimizing the weighted within-side variance.
///
/// Splits between equal projections cannot be realized by any bias and are
/// skipped. Ties in the objective keep the first split in ascending scan
/// order.
pub fn optimal_bias(
    w: ArrayView1<f64>,
    features: ArrayView2<f64>,
    residuals: ArrayView2<f64>,
) -> Result<BiasSplit> {
    if w.len() != features.ncols() {
        return Err(Error::shape("hyperplane weights", features.ncols(), w.len()));
    }
    if residuals.nrows() != features.nrows() {
        return Err(Error::shape("residual rows", features.nrows(), residuals.nrows()));
    }
    if w.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroWeights);
    }
    let m = features.nrows();
    if m == 0 {
        return Err(Error::Data("no examples to split".into()));
    }
    let dl = residuals.ncols();
    let proj: Vec<f64> = features.outer_iter().map(|x| dot(w, x)).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]));

    let mut total = vec![0.0; dl];
    let mut total_sq = 0.0;
    for row in residuals.outer_iter() {
        for (j, &r) in row.iter().enumerate() {
            total[j] += r;
            total_sq += r * r;
        }
    }
    let mf = m as f64;
    let gain_of = |prefix: &[f64], s: usize| -> f64 {
        let mut g = 0.0;
        for j in 0..dl {
            if s > 0 {
                g += prefix[j] * prefix[j] / s as f64;
            }
            if s < m {
                let rest = total[j] - prefix[j];
                g += rest * rest / (m - s) as f64;
            }
        }
        g
    };
    let tol = 1e-12 * total_sq;
    let mut prefix = vec![0.0; dl];
    let mut best_s = 0;
    let mut best_gain = gain_of(&prefix, 0);
    for s in 1..=m {
        let idx = order[s - 1];
        for (j, p) in prefix.iter_mut().enumerate() {
            *p += residuals[[idx, j]];
        }
        if s < m && proj[idx] == proj[order[s]] {
            continue;
        }
        let g = gain_of(&prefix, s);
        if g > best_gain + tol {
            best_gain = g;
            best_s = s;
        }
    }

    let b = if best_s == 0 {
        -(proj[order[0]] - 1.0)
    } else if best_s == m {
        -(proj[order[m - 1]] + 1.0)
    } else {
        let lo = proj[order[best_s - 1]];
        let hi = proj[order[best_s]];
        let mid = lo + (hi - lo) / 2.0;
        // adjacent floats: the midpoint may round onto `lo`
        -(if mid > lo { mid } else { hi })
    };
    Ok(BiasSplit {
        b,
        objective: ((total_sq - best_gain) / mf).max(0.0),
        negatives: best_s,
    })
}

/// Side of each example: `+1` when `w·x + b >= 0`, else `-1`.
pub fn hyperplane_sides(w: ArrayView1<f64>, b: f64, features: ArrayView2<f64>) -> Vec<f64> {
    features
        .outer_iter()
        .map(|x| if dot(w, x) + b < 0.0 { -1.0 } else { 1.0 })
        .collect()
}

/// Closed-form least-squares `(c, d)` for `r ≈ c·side + d`, per output.
///
/// With `ρ±` the mean residual on each side, `c = (ρ₊ − ρ₋)/2` and
/// `d = (ρ₊ + ρ₋)/2`. An empty side yields `c = 0`, `d` = the other side's
/// mean.
pub fn compute_cd(residuals: ArrayView2<f64>, side: &[f64]) -> Result<(Array1<f64>, Array1<f64>)> {
    if residuals.nrows() == 0 {
        return Err(Error::Data("empty residual set".into()));
    }
    if side.len() != residuals.nrows() {
        return Err(Error::shape("side vector", residuals.nrows(), side.len()));
    }
    let dl = residuals.ncols();
    let mut pos = vec![0.0; dl];
    let mut neg = vec![0.0; dl];
    let (mut n_pos, mut n_neg) = (0usize, 0usize);
    for (row, &s) in residuals.outer_iter().zip(side) {
        let acc = if s > 0.0 {
            n_pos += 1;
            &mut pos
        } else {
            n_neg += 1;
            &mut neg
        };
        for (a, r) in acc.iter_mut().zip(row.iter()) {
            *a += r;
        }
    }
    let mut c = Array1::zeros(dl);
    let mut d = Array1::zeros(dl);
    for j in 0..dl {
        match (n_pos, n_neg) {
            (0, n) => d[j] = neg[j] / n as f64,
            (n, 0) => d[j] = pos[j] / n as f64,
            (np, nn) => {
                let rho_pos = pos[j] / np as f64;
                let rho_neg = neg[j] / nn as f64;
                c[j] = (rho_pos - rho_neg) / 2.0;
                d[j] = (rho_pos + rho_neg) / 2.0;
            }
        }
    }
    Ok((c, d))
}

/// One row per (example, output) pair: the multivariate residual matrix seen
/// as `m·dl` univariate examples.
pub fn stacked_problem(features: ArrayView2<f64>, residuals: ArrayView2<f64>) -> Result<RegressionProblem> {
    let (m, d) = features.dim();
    let dl = residuals.ncols();
    if dl == 1 {
        return RegressionProblem::new(features.to_owned(), residuals.column(0).to_owned(), true);
    }
    let mut design = Array2::zeros((m * dl, d));
    let mut targets = Array1::zeros(m * dl);
    for i in 0..m {
        for j in 0..dl {
            design.row_mut(i * dl + j).assign(&features.row(i));
            targets[i * dl + j] = residuals[[i, j]];
        }
    }
    RegressionProblem::new(design, targets, true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub w: Array1<f64>,
    pub b: f64,
    pub objective: f64,
    /// λ that produced `w` (unchanged for the least-squares solver).
    pub lambda: f64,
}

/// Regression for the normal (its bias discarded), then the exhaustive bias
/// scan against the full residual matrix.
pub fn fit_hyperplane(
    features: ArrayView2<f64>,
    residuals: ArrayView2<f64>,
    cfg: &TrainConfig,
    current_lambda: f64,
) -> Result<Hyperplane> {
    let problem = stacked_problem(features, residuals)?;
    let (w, lambda) = match cfg.solver {
        HyperplaneSolver::Lasso => {
            let fit = auto_lambda_fit(&problem, &cfg.lasso, current_lambda)?;
            if fit.exhausted {
                return Err(Error::ZeroWeights);
            }
            (fit.lasso.fit.weights, fit.lambda)
        }
        HyperplaneSolver::LeastSquares => {
            let fit = least_squares_fit(&problem)?;
            if fit.is_zero() {
                return Err(Error::ZeroWeights);
            }
            (fit.weights, current_lambda)
        }
    };
    let split = optimal_bias(w.view(), features, residuals)?;
    Ok(Hyperplane {
        w,
        b: split.b,
        objective: split.objective,
        lambda,
    })
}
