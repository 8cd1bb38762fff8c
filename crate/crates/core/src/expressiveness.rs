//! Explicit single-hidden-layer networks approximating `x²` on `[0, 1]` and
//! `xy` on `[−m, m]²`, with grid-measured error certificates.
//!
//! Both use the step activation (`0` below the threshold, `1` at or above).

use ndarray::{array, Array1, Array2};

use crate::error::{Error, Result};
use crate::model::{ActivationParams, BannModel, LayerParams};

/// Staircase thresholds `√((k+½)/r)` and increments `k/r − (k−1)/r`.
///
/// The increments are differences of the rounded levels, so every partial
/// sum is exactly a rounded level and the endpoints come out exact.
fn staircase(r: usize) -> (Vec<f64>, Vec<f64>) {
    let rf = r as f64;
    let thresholds = (0..r).map(|k| ((k as f64 + 0.5) / rf).sqrt()).collect();
    let increments = (0..r)
        .map(|k| (k + 1) as f64 / rf - k as f64 / rf)
        .collect();
    (thresholds, increments)
}

/// Width-`r` network with output levels `{0, 1/r, …, 1}`:
/// `sup |B(x) − x²| ≤ 1/(2r)` on `[0, 1]`, exact at 0 and 1.
pub fn build_square_approximator(r: usize) -> Result<BannModel> {
    if r == 0 {
        return Err(Error::InvalidArgument("r must be at least 1".into()));
    }
    let (thresholds, increments) = staircase(r);
    let hidden = LayerParams::new(
        Array2::ones((r, 1)),
        thresholds.iter().map(|t| -t).collect(),
    )?;
    let output = LayerParams::new(
        Array2::from_shape_vec((1, r), increments).expect("r increments"),
        array![0.0],
    )?;
    BannModel::new(ActivationParams::step(), vec![hidden], output)
}

/// Staircase resolution used by the product network for a budget `delta`.
pub fn product_resolution(delta: f64) -> usize {
    (1.0 / (2.0 * delta)).ceil() as usize
}

/// Network for `xy` on `[−m, m]²` built from `xy = m²(u² − v²)` with
/// `u = |x+y|/(2m)` and `v = |x−y|/(2m)`, each square a staircase of
/// resolution `r = ⌈1/(2δ)⌉` and each absolute value a mirrored neuron pair.
///
/// Width is `4r`; the error is at most `2m²δ`, and the output is exactly 0
/// on both axes and symmetric in its arguments.
pub fn build_product_approximator(m: f64, delta: f64) -> Result<BannModel> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidArgument(format!("m must be positive, got {m}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    let r = product_resolution(delta);
    let (thresholds, increments) = staircase(r);
    let s = 1.0 / (2.0 * m);
    let m2 = m * m;
    let mut weights = Array2::zeros((4 * r, 2));
    let mut biases = Array1::zeros(4 * r);
    let mut out = Array2::zeros((1, 4 * r));
    // per level: u-pair then v-pair. At most one neuron of a pair fires, so
    // on either axis the running output sum returns to exactly 0 per level.
    let directions = [[s, s], [-s, -s], [s, -s], [-s, s]];
    for k in 0..r {
        let c = m2 * increments[k];
        for (q, dir) in directions.iter().enumerate() {
            let row = 4 * k + q;
            weights[[row, 0]] = dir[0];
            weights[[row, 1]] = dir[1];
            biases[row] = -thresholds[k];
            out[[0, row]] = if q < 2 { c } else { -c };
        }
    }
    BannModel::new(
        ActivationParams::step(),
        vec![LayerParams::new(weights, biases)?],
        LayerParams::new(out, array![0.0])?,
    )
}

/// Claimed bound versus the maximum error measured on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub bound: f64,
    pub max_error: f64,
    pub grid_points: usize,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.max_error <= self.bound
    }
}

fn check_grid(points: usize) -> Result<()> {
    if points < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2 points per axis".into()));
    }
    Ok(())
}

/// Max `|B(x) − x²|` over `points` evenly spaced `x` in `[0, 1]`.
pub fn square_certificate(model: &BannModel, r: usize, points: usize) -> Result<Certificate> {
    check_grid(points)?;
    let mut max_error: f64 = 0.0;
    for i in 0..points {
        let x = i as f64 / (points - 1) as f64;
        let y = model.forward(array![x].view())?[0];
        max_error = max_error.max((y - x * x).abs());
    }
    Ok(Certificate {
        bound: 1.0 / (2.0 * r as f64),
        max_error,
        grid_points: points,
    })
}

/// Max `|B(x, y) − xy|` over a `points × points` grid of `[−m, m]²`,
/// against the bound `3m²δ`.
pub fn product_certificate(model: &BannModel, m: f64, delta: f64, points: usize) -> Result<Certificate> {
    check_grid(points)?;
    let coord = |i: usize| -m + 2.0 * m * i as f64 / (points - 1) as f64;
    let mut max_error: f64 = 0.0;
    for i in 0..points {
        for j in 0..points {
            let (x, y) = (coord(i), coord(j));
            let b = model.forward(array![x, y].view())?[0];
            max_error = max_error.max((b - x * y).abs());
        }
    }
    Ok(Certificate {
        bound: 3.0 * m * m * delta,
        max_error,
        grid_points: points * points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_endpoints_exact() {
        for r in [1, 2, 3, 7, 10, 49, 50, 333] {
            let b = build_square_approximator(r).unwrap();
            assert_eq!(b.forward(array![0.0].view()).unwrap()[0], 0.0);
            assert_eq!(b.forward(array![1.0].view()).unwrap()[0], 1.0);
            assert_eq!(b.architecture(), vec![1, r, 1]);
        }
        assert!(build_square_approximator(0).is_err());
    }

    #[test]
    fn single_line_square() {
        let b = build_square_approximator(1).unwrap();
        assert_eq!(b.hidden[0].biases[0], -(0.5f64).sqrt());
        let cert = square_certificate(&b, 1, 1001).unwrap();
        assert!(cert.max_error <= 0.5 && cert.max_error > 0.49);
    }

    #[test]
    fn product_axes_exact() {
        let b = build_product_approximator(2.0, 0.05).unwrap();
        assert_eq!(b.architecture(), vec![2, 40, 1]);
        for v in [-2.0, -1.3, -0.01, 0.0, 0.7, 1.999, 2.0] {
            assert_eq!(b.forward(array![0.0, v].view()).unwrap()[0], 0.0);
            assert_eq!(b.forward(array![v, 0.0].view()).unwrap()[0], 0.0);
        }
        assert!(build_product_approximator(0.0, 0.1).is_err());
        assert!(build_product_approximator(1.0, 1.0).is_err());
    }
}
