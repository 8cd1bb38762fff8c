//! Greedy construction of a single hidden layer.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::model::{activate, ActivationParams, LayerParams};

use super::hyperplane::{compute_cd, fit_hyperplane, hyperplane_sides};
use super::{IterationRecord, TrainConfig};

/// One hidden neuron together with its output coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Neuron {
    pub w: Array1<f64>,
    pub b: f64,
    /// Output weights, one per label coordinate.
    pub c: Array1<f64>,
    /// Intercept contribution, one per label coordinate.
    pub d: Array1<f64>,
}

/// Labels minus the current layer's prediction, `m × dl`.
///
/// Each entry is kept as an unevaluated sum `hi + lo` (compensated
/// arithmetic), so that the MSE change of late neurons with tiny gains stays
/// measurable against the rounding of earlier updates.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix {
    values: Array2<f64>,
    low: Array2<f64>,
}

/// Error-free sum: `a + b = s + e` exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

impl ResidualMatrix {
    pub fn from_labels(labels: ArrayView2<f64>) -> Self {
        Self {
            values: labels.to_owned(),
            low: Array2::zeros(labels.raw_dim()),
        }
    }

    /// Rounded residuals.
    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    /// Mean over examples of the squared residual norm.
    pub fn mse(&self) -> f64 {
        self.values.iter().map(|r| r * r).sum::<f64>() / self.values.nrows() as f64
    }

    /// `mse(before) − mse(self)` evaluated as `Σ (a − b)(a + b) / m` on the
    /// compensated entries.
    pub fn decrease_from(&self, before: &ResidualMatrix) -> f64 {
        let mut total = 0.0;
        for (((ah, al), bh), bl) in before
            .values
            .iter()
            .zip(before.low.iter())
            .zip(self.values.iter())
            .zip(self.low.iter())
        {
            let diff = (ah - bh) + (al - bl);
            total += diff * (ah + bh + (al + bl));
        }
        total / self.values.nrows() as f64
    }

    fn apply(&mut self, side: &[f64], c: &Array1<f64>, d: &Array1<f64>, sign: f64) {
        for ((mut hi, mut lo), &s) in self
            .values
            .outer_iter_mut()
            .zip(self.low.outer_iter_mut())
            .zip(side)
        {
            for j in 0..hi.len() {
                // c·s is exact for s = ±1
                let (dh, dl) = two_sum(sign * c[j] * s, sign * d[j]);
                let (sum, err) = two_sum(hi[j], dh);
                let tail = err + lo[j] + dl;
                let (h, l) = two_sum(sum, tail);
                hi[j] = h;
                lo[j] = l;
            }
        }
    }

    /// Per-coordinate residual sums on the `(+, −)` sides.
    pub fn side_sums(&self, side: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let dl = self.values.ncols();
        let mut pos = vec![0.0; dl];
        let mut neg = vec![0.0; dl];
        let mut pos_lo = vec![0.0; dl];
        let mut neg_lo = vec![0.0; dl];
        for ((row, low), &s) in self.values.outer_iter().zip(self.low.outer_iter()).zip(side) {
            let (acc, acc_lo) = if s > 0.0 {
                (&mut pos, &mut pos_lo)
            } else {
                (&mut neg, &mut neg_lo)
            };
            for j in 0..dl {
                acc[j] += row[j];
                acc_lo[j] += low[j];
            }
        }
        for j in 0..dl {
            pos[j] += pos_lo[j];
            neg[j] += neg_lo[j];
        }
        (pos, neg)
    }

    fn max_side_sum(&self, side: &[f64]) -> f64 {
        let (pos, neg) = self.side_sums(side);
        pos.iter().chain(neg.iter()).fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Quantities measured around a single neuron addition.
#[derive(Debug, Clone, PartialEq)]
pub struct AddOutcome {
    pub mse_before: f64,
    pub mse_after: f64,
    /// Realized decrease of the training MSE.
    pub drop: f64,
    /// `(1/m) Σ_j [(Σ₊ r_j)²/n₊ + (Σ₋ r_j)²/n₋]` from the pre-update residuals.
    pub predicted_drop: f64,
    /// `Σ_j (c_j² − d_j²)`; equals the drop once residuals sum to zero.
    pub cd_drop: f64,
    /// Largest per-side, per-coordinate residual sum after the update.
    pub side_sum_error: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReplaceOutcome {
    pub attempts: usize,
    pub accepted: usize,
    pub side_sum_error: f64,
}

/// Training-time state of a layer under construction.
#[derive(Debug, Clone)]
pub struct LayerState {
    inputs: Array2<f64>,
    labels: Array2<f64>,
    residuals: ResidualMatrix,
    neurons: Vec<Neuron>,
    sides: Vec<Vec<f64>>,
    lambda: f64,
    /// Residuals and λ from before the newest addition.
    undo: Option<(ResidualMatrix, f64)>,
}

impl LayerState {
    pub fn new(inputs: Array2<f64>, labels: ArrayView2<f64>, lambda: f64) -> Result<Self> {
        if inputs.nrows() != labels.nrows() {
            return Err(Error::shape("layer labels", inputs.nrows(), labels.nrows()));
        }
        if inputs.nrows() == 0 {
            return Err(Error::Data("no training rows".into()));
        }
        Ok(Self {
            residuals: ResidualMatrix::from_labels(labels),
            labels: labels.to_owned(),
            inputs,
            neurons: Vec::new(),
            sides: Vec::new(),
            lambda,
            undo: None,
        })
    }

    /// Rebuilds the state from a fixed list of neurons.
    pub fn with_neurons(mut self, neurons: Vec<Neuron>) -> Self {
        self.residuals = ResidualMatrix::from_labels(self.labels.view());
        self.sides.clear();
        self.undo = None;
        for n in &neurons {
            let side = hyperplane_sides(n.w.view(), n.b, self.inputs.view());
            self.residuals.apply(&side, &n.c, &n.d, -1.0);
            self.sides.push(side);
        }
        self.neurons = neurons;
        self
    }

    pub fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    pub fn residuals(&self) -> &ResidualMatrix {
        &self.residuals
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn train_mse(&self) -> f64 {
        self.residuals.mse()
    }

    pub fn width(&self) -> usize {
        self.neurons.len()
    }

    fn push(&mut self, neuron: Neuron, side: Vec<f64>, lambda: f64) -> AddOutcome {
        let m = self.inputs.nrows() as f64;
        let before = self.residuals.clone();
        let mse_before = before.mse();
        let (pos, neg) = before.side_sums(&side);
        let n_pos = side.iter().filter(|&&s| s > 0.0).count();
        let n_neg = side.len() - n_pos;
        let mut predicted = 0.0;
        for j in 0..pos.len() {
            if n_pos > 0 {
                predicted += pos[j] * pos[j] / n_pos as f64;
            }
            if n_neg > 0 {
                predicted += neg[j] * neg[j] / n_neg as f64;
            }
        }
        predicted /= m;
        let cd_drop = neuron
            .c
            .iter()
            .zip(neuron.d.iter())
            .map(|(c, d)| c * c - d * d)
            .sum();

        self.residuals.apply(&side, &neuron.c, &neuron.d, -1.0);
        let drop = self.residuals.decrease_from(&before);
        let side_sum_error = self.residuals.max_side_sum(&side);
        self.neurons.push(neuron);
        self.sides.push(side);
        self.undo = Some((before, self.lambda));
        self.lambda = lambda;
        AddOutcome {
            mse_before,
            mse_after: self.residuals.mse(),
            drop,
            predicted_drop: predicted,
            cd_drop,
            side_sum_error,
            lambda,
        }
    }

    /// Fits a new hyperplane to the current residuals, appends it with its
    /// optimal `(c, d)` and removes its contribution from the residuals.
    pub fn add_neuron(&mut self, cfg: &TrainConfig) -> Result<AddOutcome> {
        let h = fit_hyperplane(self.inputs.view(), self.residuals.values(), cfg, self.lambda)?;
        let side = hyperplane_sides(h.w.view(), h.b, self.inputs.view());
        let (c, d) = compute_cd(self.residuals.values(), &side)?;
        Ok(self.push(Neuron { w: h.w, b: h.b, c, d }, side, h.lambda))
    }

    /// Appends a zero-weight neuron whose only effect is the intercept.
    pub fn add_intercept_neuron(&mut self) -> AddOutcome {
        let side = vec![1.0; self.inputs.nrows()];
        let (c, d) = compute_cd(self.residuals.values(), &side).expect("non-empty residuals");
        let neuron = Neuron {
            w: Array1::zeros(self.inputs.ncols()),
            b: 0.0,
            c,
            d,
        };
        let lambda = self.lambda;
        self.push(neuron, side, lambda)
    }

    /// Removes the newest neuron, restoring the residuals it was fitted on
    /// (bit-exactly when nothing else changed since its addition).
    pub fn pop_neuron(&mut self) -> Option<Neuron> {
        let neuron = self.neurons.pop()?;
        let side = self.sides.pop().expect("sides track neurons");
        match self.undo.take() {
            Some((residuals, lambda)) => {
                self.residuals = residuals;
                self.lambda = lambda;
            }
            None => self.residuals.apply(&side, &neuron.c, &neuron.d, 1.0),
        }
        Some(neuron)
    }

    /// Refits the oldest neurons one at a time against the current residuals,
    /// keeping each refit only while it strictly lowers the training MSE.
    /// The first rejected refit is undone bit-exactly and ends the pass.
    pub fn replace_pass(&mut self, cfg: &TrainConfig) -> Result<ReplaceOutcome> {
        let mut out = ReplaceOutcome::default();
        self.undo = None;
        let t = self.neurons.len();
        if t < 2 {
            return Ok(out);
        }
        for k in 0..(t - 1).min(cfg.replace_cap) {
            out.attempts += 1;
            let saved_residuals = self.residuals.clone();
            let mse_before = saved_residuals.mse();
            let old = &self.neurons[k];
            self.residuals.apply(&self.sides[k], &old.c, &old.d, 1.0);
            let refit = match fit_hyperplane(
                self.inputs.view(),
                self.residuals.values(),
                cfg,
                self.lambda,
            ) {
                Ok(h) => h,
                Err(Error::ZeroWeights) => {
                    self.residuals = saved_residuals;
                    break;
                }
                Err(e) => {
                    self.residuals = saved_residuals;
                    return Err(e);
                }
            };
            let side = hyperplane_sides(refit.w.view(), refit.b, self.inputs.view());
            let (c, d) = compute_cd(self.residuals.values(), &side)?;
            self.residuals.apply(&side, &c, &d, -1.0);
            if self.residuals.decrease_from(&saved_residuals) > 0.0
                && self.residuals.mse() < mse_before
            {
                out.accepted += 1;
                out.side_sum_error = out.side_sum_error.max(self.residuals.max_side_sum(&side));
                self.neurons[k] = Neuron {
                    w: refit.w,
                    b: refit.b,
                    c,
                    d,
                };
                self.sides[k] = side;
                self.lambda = refit.lambda;
            } else {
                self.residuals = saved_residuals;
                break;
            }
        }
        Ok(out)
    }

    /// Hidden layer (rows are the neurons' hyperplanes) and linear head
    /// (`C` with one column per neuron, intercept `Σ d`).
    pub fn layer_params(&self) -> (LayerParams, LayerParams) {
        neurons_to_params(&self.neurons, self.inputs.ncols(), self.labels.ncols())
    }
}

pub(crate) fn neurons_to_params(
    neurons: &[Neuron],
    inputs: usize,
    outputs: usize,
) -> (LayerParams, LayerParams) {
    let width = neurons.len();
    let mut w = Array2::zeros((width, inputs));
    let mut b = Array1::zeros(width);
    let mut c = Array2::zeros((outputs, width));
    let mut d = Array1::zeros(outputs);
    for (t, n) in neurons.iter().enumerate() {
        w.row_mut(t).assign(&n.w);
        b[t] = n.b;
        c.column_mut(t).assign(&n.c);
        for j in 0..outputs {
            d[j] += n.d[j];
        }
    }
    (
        LayerParams {
            weights: w,
            biases: b,
        },
        LayerParams {
            weights: c,
            biases: d,
        },
    )
}

/// Prediction of a single hidden layer plus head, evaluated like `forward`.
pub(crate) fn layer_predict(
    hidden: &LayerParams,
    head: &LayerParams,
    activation: &ActivationParams,
    inputs: ArrayView2<f64>,
) -> Array2<f64> {
    let mut out = Array2::zeros((inputs.nrows(), head.outputs()));
    for (x, mut dst) in inputs.outer_iter().zip(out.outer_iter_mut()) {
        let h = activate(hidden.affine(x).view(), activation);
        dst.assign(&head.affine(h.view()));
    }
    out
}

pub(crate) fn mean_sq_error(pred: &Array2<f64>, labels: ArrayView2<f64>) -> f64 {
    let total: f64 = pred
        .outer_iter()
        .zip(labels.outer_iter())
        .map(|(p, y)| {
            p.iter()
                .zip(y.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum();
    total / pred.len_of(Axis(0)) as f64
}

/// Inputs of one layer build. Validation inputs are optional.
#[derive(Debug, Clone, Copy)]
pub struct LayerData<'a> {
    pub train_x: ArrayView2<'a, f64>,
    pub train_y: ArrayView2<'a, f64>,
    pub val: Option<(ArrayView2<'a, f64>, ArrayView2<'a, f64>)>,
}

#[derive(Debug, Clone)]
pub struct LayerOutcome {
    pub hidden: LayerParams,
    pub head: LayerParams,
    pub records: Vec<IterationRecord>,
    /// Validation MSE of the returned (rolled back) layer.
    pub best_val_mse: Option<f64>,
    pub train_mse: f64,
    pub lambda: f64,
    /// The first fit gave an all-zero normal; the layer is a single
    /// intercept-only neuron.
    pub intercept_only: bool,
}

fn count_nonzero(layer: &LayerParams) -> usize {
    layer
        .weights
        .iter()
        .chain(layer.biases.iter())
        .filter(|v| **v != 0.0)
        .count()
}

/// Grows one hidden layer neuron by neuron until `T` neurons or until the
/// validation MSE stalls for `patience` additions, then rolls back to the
/// best validation width.
///
/// `layer_index` is 1-based and only used for reporting; `frozen_nnz` is the
/// nonzero count of the already-frozen layers below.
pub fn build_layer(
    data: LayerData<'_>,
    cfg: &TrainConfig,
    layer_index: usize,
    lambda: f64,
    allow_intercept_fallback: bool,
    frozen_nnz: usize,
) -> Result<LayerOutcome> {
    if data.train_x.nrows() < 2 {
        return Err(Error::Data("a layer needs at least 2 training rows".into()));
    }
    let activation = ActivationParams::sign();
    let mut state = LayerState::new(data.train_x.to_owned(), data.train_y, lambda)?;
    let mut records = Vec::new();
    let mut best: Option<(f64, Vec<Neuron>)> = None;
    let mut stall = 0;
    let mut intercept_only = false;

    for t in 1..=cfg.max_neurons_per_layer {
        let added = match state.add_neuron(cfg) {
            Ok(out) => out,
            Err(Error::ZeroWeights) if t == 1 && allow_intercept_fallback => {
                intercept_only = true;
                state.add_intercept_neuron()
            }
            Err(Error::ZeroWeights) if t == 1 => return Err(Error::ZeroWeights),
            Err(Error::ZeroWeights) => break,
            Err(e) => return Err(e),
        };
        if t > 1 && !(added.drop > 0.0 && added.mse_after < added.mse_before) {
            state.pop_neuron();
            break;
        }
        let replaced = if t > 1 && !intercept_only {
            state.replace_pass(cfg)?
        } else {
            ReplaceOutcome::default()
        };

        let (hidden, head) = state.layer_params();
        let val_mse = data.val.map(|(vx, vy)| {
            let pred = layer_predict(&hidden, &head, &activation, vx);
            mean_sq_error(&pred, vy)
        });
        records.push(IterationRecord {
            layer: layer_index,
            t,
            train_mse: state.train_mse(),
            val_mse,
            mse_before: added.mse_before,
            mse_after_add: added.mse_after,
            drop: added.drop,
            predicted_drop: added.predicted_drop,
            cd_drop: added.cd_drop,
            replacements: replaced.accepted,
            lambda: state.lambda(),
            nnz: frozen_nnz + count_nonzero(&hidden) + count_nonzero(&head),
            side_sum_error: added.side_sum_error.max(replaced.side_sum_error),
        });

        if intercept_only {
            break;
        }
        if let Some(v) = val_mse {
            let improved = match &best {
                None => true,
                Some((b, _)) => v < b * (1.0 - cfg.min_layer_gain),
            };
            if improved {
                best = Some((v, state.neurons().to_vec()));
                stall = 0;
            } else {
                stall += 1;
                if stall >= cfg.patience {
                    break;
                }
            }
        }
    }

    let lambda_out = state.lambda();
    let (best_val_mse, state) = match best {
        Some((v, neurons)) if !intercept_only => {
            let width = neurons.len();
            let state = if width == state.width() && neurons.as_slice() == state.neurons() {
                state
            } else {
                LayerState::new(data.train_x.to_owned(), data.train_y, lambda_out)?
                    .with_neurons(neurons)
            };
            (Some(v), state)
        }
        _ => {
            let v = records.last().and_then(|r| r.val_mse);
            (v, state)
        }
    };
    let (hidden, head) = state.layer_params();
    Ok(LayerOutcome {
        hidden,
        head,
        records,
        best_val_mse,
        train_mse: state.train_mse(),
        lambda: lambda_out,
        intercept_only,
    })
}
