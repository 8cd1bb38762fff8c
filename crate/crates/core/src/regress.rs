//! Linear solvers used to orient hyperplanes: ordinary least squares through
//! jittered normal equations, and Lasso by cyclic coordinate descent with a
//! geometric regularization schedule.
//!
//! The Lasso objective is `(1/(2n)) ‖Zβ + b − y‖² + λ‖β‖₁` over internally
//! standardized columns `Z`; coefficients are mapped back to raw feature
//! space on return. The bias is never penalized.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    /// `n × p`
    pub design: Array2<f64>,
    pub targets: Array1<f64>,
    pub fit_bias: bool,
}

impl RegressionProblem {
    pub fn new(design: Array2<f64>, targets: Array1<f64>, fit_bias: bool) -> Result<Self> {
        if design.nrows() == 0 || design.ncols() == 0 {
            return Err(Error::InvalidArgument(
                "regression design must be at least 1×1".into(),
            ));
        }
        if design.nrows() != targets.len() {
            return Err(Error::shape("regression targets", design.nrows(), targets.len()));
        }
        if design.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "regression problem contains non-finite values".into(),
            ));
        }
        Ok(Self {
            design,
            targets,
            fit_bias,
        })
    }

    pub fn n(&self) -> usize {
        self.design.nrows()
    }

    pub fn p(&self) -> usize {
        self.design.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub weights: Array1<f64>,
    pub bias: f64,
}

impl LinearFit {
    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    pub fn nonzero_weights(&self) -> usize {
        self.weights.iter().filter(|&&w| w != 0.0).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub fit: LinearFit,
    pub converged: bool,
    pub sweeps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    pub lambda0: f64,
    pub divisor: f64,
    pub max_halvings: usize,
    pub cd_max_iters: usize,
    pub cd_tol: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            lambda0: 1e5,
            divisor: 1.5,
            max_halvings: 200,
            cd_max_iters: 10_000,
            cd_tol: 1e-8,
        }
    }
}

impl LassoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return Err(Error::Config(format!("lambda0 must be > 0, got {}", self.lambda0)));
        }
        if !(self.divisor > 1.0 && self.divisor.is_finite()) {
            return Err(Error::Config(format!("divisor must be > 1, got {}", self.divisor)));
        }
        if self.max_halvings < 1 || self.cd_max_iters < 1 {
            return Err(Error::Config("Lasso iteration caps must be >= 1".into()));
        }
        if !(self.cd_tol > 0.0) {
            return Err(Error::Config(format!("cd_tol must be > 0, got {}", self.cd_tol)));
        }
        Ok(())
    }
}

fn column_means(design: &Array2<f64>) -> Array1<f64> {
    design.mean_axis(Axis(0)).expect("non-empty design")
}

/// Least squares, minimum-norm on rank deficiency via a `1e-10·trace/p`
/// ridge on the normal equations.
pub fn least_squares_fit(problem: &RegressionProblem) -> Result<LinearFit> {
    let p = problem.p();
    let (x, y, x_mean, y_mean) = if problem.fit_bias {
        let xm = column_means(&problem.design);
        let ym = problem.targets.mean().unwrap_or(0.0);
        (
            &problem.design - &xm.view().insert_axis(Axis(0)),
            problem.targets.mapv(|v| v - ym),
            xm,
            ym,
        )
    } else {
        (
            problem.design.clone(),
            problem.targets.clone(),
            Array1::zeros(p),
            0.0,
        )
    };
    let mut gram = x.t().dot(&x);
    let rhs = x.t().dot(&y);
    let trace: f64 = gram.diag().sum();
    let weights = if trace == 0.0 {
        Array1::zeros(p)
    } else {
        let jitter = 1e-10 * trace / p as f64;
        for i in 0..p {
            gram[[i, i]] += jitter;
        }
        cholesky_solve(&gram, &rhs)?
    };
    let bias = if problem.fit_bias {
        y_mean - x_mean.dot(&weights)
    } else {
        0.0
    };
    Ok(LinearFit { weights, bias })
}

fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::Solver(format!(
                        "normal equations not positive definite at pivot {i}"
                    )));
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    let mut z = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * z[k];
        }
        z[i] = s / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    Ok(x)
}

/// Column-standardized copy of a problem with its Gram matrix. Constant
/// columns are flagged and excluded from the descent.
pub(crate) struct Standardized {
    /// Column-major standardized design.
    pub columns: Vec<Array1<f64>>,
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
    pub active: Vec<bool>,
    pub target: Array1<f64>,
    pub target_mean: f64,
    /// `ZᵀZ / n`
    pub gram: Array2<f64>,
    /// `Zᵀ(y − ȳ) / n`
    pub correlation: Array1<f64>,
}

impl Standardized {
    pub fn new(problem: &RegressionProblem) -> Self {
        let n = problem.n() as f64;
        let p = problem.p();
        let mut columns = Vec::with_capacity(p);
        let mut mean = Array1::zeros(p);
        let mut scale = Array1::ones(p);
        let mut active = vec![false; p];
        for (j, col) in problem.design.axis_iter(Axis(1)).enumerate() {
            let first = col[0];
            let constant = col.iter().all(|&v| v == first);
            let mu = if problem.fit_bias { col.sum() / n } else { 0.0 };
            let sd = (col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n).sqrt();
            if constant && (problem.fit_bias || first == 0.0) || !(sd > 0.0) {
                columns.push(Array1::zeros(problem.n()));
                continue;
            }
            mean[j] = mu;
            scale[j] = sd;
            active[j] = true;
            columns.push(col.mapv(|v| (v - mu) / sd));
        }
        let target_mean = if problem.fit_bias {
            problem.targets.sum() / n
        } else {
            0.0
        };
        let target = problem.targets.mapv(|v| v - target_mean);
        let mut gram = Array2::zeros((p, p));
        let mut correlation = Array1::zeros(p);
        for j in 0..p {
            if !active[j] {
                continue;
            }
            correlation[j] = inner(columns[j].view(), target.view()) / n;
            for k in 0..=j {
                if active[k] {
                    let g = inner(columns[j].view(), columns[k].view()) / n;
                    gram[[j, k]] = g;
                    gram[[k, j]] = g;
                }
            }
        }
        Self {
            columns,
            mean,
            scale,
            active,
            target,
            target_mean,
            gram,
            correlation,
        }
    }

    fn unstandardize(&self, beta: &Array1<f64>, fit_bias: bool) -> LinearFit {
        let weights = Array1::from_iter(
            beta.iter()
                .zip(self.scale.iter())
                .map(|(b, s)| if *b == 0.0 { 0.0 } else { b / s }),
        );
        let bias = if fit_bias {
            self.target_mean - self.mean.dot(&weights)
        } else {
            0.0
        };
        LinearFit { weights, bias }
    }

    fn objective(&self, beta: &Array1<f64>, lambda: f64) -> f64 {
        let mut residual = self.target.clone();
        for (col, b) in self.columns.iter().zip(beta.iter()) {
            if *b != 0.0 {
                residual.scaled_add(-b, col);
            }
        }
        let n = residual.len() as f64;
        residual.dot(&residual) / (2.0 * n) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }
}

#[inline]
fn soft_threshold(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

fn inner(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

struct Descent {
    beta: Array1<f64>,
    converged: bool,
    sweeps: usize,
}

/// Cyclic coordinate descent in covariance form: `fitted = Gβ` is kept up to
/// date so each coordinate costs `O(1)` plus `O(p)` when it moves.
fn coordinate_descent(
    std: &Standardized,
    lambda: f64,
    cfg: &LassoConfig,
    mut on_sweep: impl FnMut(&Array1<f64>),
) -> Descent {
    let p = std.columns.len();
    let mut beta = Array1::<f64>::zeros(p);
    let mut fitted = Array1::<f64>::zeros(p);
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < cfg.cd_max_iters {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for j in 0..p {
            if !std.active[j] {
                continue;
            }
            let norm = std.gram[[j, j]];
            let old = beta[j];
            let rho = std.correlation[j] - fitted[j] + norm * old;
            let new = soft_threshold(rho, lambda) / norm;
            if new != old {
                let delta = new - old;
                fitted.scaled_add(delta, &std.gram.column(j));
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        on_sweep(&beta);
        if max_change < cfg.cd_tol {
            converged = true;
            break;
        }
    }
    Descent {
        beta,
        converged,
        sweeps,
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    Ok(())
}

fn lasso_on(std: &Standardized, fit_bias: bool, lambda: f64, cfg: &LassoConfig) -> LassoFit {
    let d = coordinate_descent(std, lambda, cfg, |_| {});
    LassoFit {
        fit: std.unstandardize(&d.beta, fit_bias),
        converged: d.converged,
        sweeps: d.sweeps,
    }
}

/// Lasso by cyclic coordinate descent (ascending coordinate order).
///
/// Non-convergence within `cd_max_iters` is reported through
/// [`LassoFit::converged`], not as an error.
pub fn lasso_fit(problem: &RegressionProblem, lambda: f64, cfg: &LassoConfig) -> Result<LassoFit> {
    check_lambda(lambda)?;
    Ok(lasso_on(&Standardized::new(problem), problem.fit_bias, lambda, cfg))
}

/// Lasso objective after each coordinate-descent sweep.
pub fn lasso_objective_trace(
    problem: &RegressionProblem,
    lambda: f64,
    cfg: &LassoConfig,
) -> Vec<f64> {
    let std = Standardized::new(problem);
    let mut trace = vec![std.objective(&Array1::zeros(problem.p()), lambda)];
    coordinate_descent(&std, lambda, cfg, |beta| {
        trace.push(std.objective(beta, lambda));
    });
    trace
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoLambdaFit {
    pub lasso: LassoFit,
    /// λ of the returned fit.
    pub lambda: f64,
    pub divisions: usize,
    /// All weights stayed zero through `max_halvings` divisions.
    pub exhausted: bool,
}

/// Fits at `current_lambda`, dividing λ by `cfg.divisor` while every weight
/// is exactly zero.
pub fn auto_lambda_fit(
    problem: &RegressionProblem,
    cfg: &LassoConfig,
    current_lambda: f64,
) -> Result<AutoLambdaFit> {
    if !(current_lambda > 0.0 && current_lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "current lambda must be > 0, got {current_lambda}"
        )));
    }
    let std = Standardized::new(problem);
    let mut lambda = current_lambda;
    let mut divisions = 0;
    loop {
        let lasso = lasso_on(&std, problem.fit_bias, lambda, cfg);
        if !lasso.fit.is_zero() {
            return Ok(AutoLambdaFit {
                lasso,
                lambda,
                divisions,
                exhausted: false,
            });
        }
        if divisions == cfg.max_halvings {
            return Ok(AutoLambdaFit {
                lasso,
                lambda,
                divisions,
                exhausted: true,
            });
        }
        lambda /= cfg.divisor;
        divisions += 1;
    }
}
