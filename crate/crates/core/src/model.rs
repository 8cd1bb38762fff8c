//! Binary-activated network model: layers, exact forward semantics,
//! activation reparametrization and sparsity accounting.
//!
//! A model is a stack of hidden layers, each an affine map followed by the
//! two-valued activation `f(z) = h1 if z < t else h2`, and a final affine
//! output layer with identity activation.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Parameters of the two-valued activation `f(z) = h1 if z < t, h2 otherwise`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationParams {
    pub t: f64,
    pub h1: f64,
    pub h2: f64,
}

impl Default for ActivationParams {
    fn default() -> Self {
        Self::sign()
    }
}

impl ActivationParams {
    pub fn new(t: f64, h1: f64, h2: f64) -> Result<Self> {
        let params = Self { t, h1, h2 };
        params.validate()?;
        Ok(params)
    }

    /// `t = 0, h1 = -1, h2 = +1`.
    pub const fn sign() -> Self {
        Self {
            t: 0.0,
            h1: -1.0,
            h2: 1.0,
        }
    }

    /// `t = 0, h1 = 0, h2 = 1`.
    pub const fn step() -> Self {
        Self {
            t: 0.0,
            h1: 0.0,
            h2: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t.is_finite() && self.h1.is_finite() && self.h2.is_finite()) {
            return Err(Error::InvalidArgument(
                "activation parameters must be finite".into(),
            ));
        }
        if self.h1 >= self.h2 {
            return Err(Error::InvalidArgument(format!(
                "activation requires h1 < h2 (got h1={}, h2={})",
                self.h1, self.h2
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        if z < self.t {
            self.h1
        } else {
            self.h2
        }
    }
}

/// Applies the activation elementwise.
pub fn activate(z: ArrayView1<f64>, params: &ActivationParams) -> Array1<f64> {
    z.mapv(|v| params.apply(v))
}

/// Sequential left-to-right dot product.
///
/// Every affine evaluation in the crate goes through this function so that
/// training-time hyperplane sides agree bit-for-bit with `forward`.
#[inline]
pub(crate) fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// Shape `(outputs, inputs)`; row `i` is neuron `i`'s incoming weights.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl LayerParams {
    pub fn new(weights: Array2<f64>, biases: Array1<f64>) -> Result<Self> {
        if weights.nrows() != biases.len() {
            return Err(Error::shape(
                "layer biases",
                weights.nrows(),
                biases.len(),
            ));
        }
        if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "layer parameters must be finite".into(),
            ));
        }
        Ok(Self { weights, biases })
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    /// `W x + b` with the crate's sequential dot product.
    pub fn affine(&self, x: ArrayView1<f64>) -> Array1<f64> {
        Array1::from_iter(
            self.weights
                .outer_iter()
                .zip(self.biases.iter())
                .map(|(row, b)| dot(row, x) + b),
        )
    }

    fn row_sums(&self) -> Array1<f64> {
        self.weights.sum_axis(Axis(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BannModel {
    pub activation: ActivationParams,
    pub hidden: Vec<LayerParams>,
    pub output: LayerParams,
}

impl BannModel {
    pub fn new(
        activation: ActivationParams,
        hidden: Vec<LayerParams>,
        output: LayerParams,
    ) -> Result<Self> {
        activation.validate()?;
        let mut width = hidden.first().map_or(output.inputs(), |l| l.inputs());
        for (k, layer) in hidden.iter().chain(std::iter::once(&output)).enumerate() {
            if layer.weights.nrows() != layer.biases.len() {
                return Err(Error::shape(
                    format!("layer {} biases", k + 1),
                    layer.weights.nrows(),
                    layer.biases.len(),
                ));
            }
            if layer.inputs() != width {
                return Err(Error::shape(
                    format!("layer {} inputs", k + 1),
                    width,
                    layer.inputs(),
                ));
            }
            width = layer.outputs();
        }
        Ok(Self {
            activation,
            hidden,
            output,
        })
    }

    /// Number of layers including the output layer.
    pub fn depth(&self) -> usize {
        self.hidden.len() + 1
    }

    pub fn input_dim(&self) -> usize {
        self.hidden
            .first()
            .map_or(self.output.inputs(), |l| l.inputs())
    }

    pub fn output_dim(&self) -> usize {
        self.output.outputs()
    }

    /// Architecture `<d0, d1, ..., dl>`.
    pub fn architecture(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.hidden.iter().map(|l| l.outputs()));
        dims.push(self.output_dim());
        dims
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::shape("layer 1 input", self.input_dim(), x.len()));
        }
        let mut a = x.to_owned();
        for layer in &self.hidden {
            a = activate(layer.affine(a.view()).view(), &self.activation);
        }
        Ok(self.output.affine(a.view()))
    }

    /// Row-wise `forward` over a feature matrix.
    pub fn predict(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.input_dim() {
            return Err(Error::shape(
                "layer 1 input",
                self.input_dim(),
                features.ncols(),
            ));
        }
        let mut out = Array2::zeros((features.nrows(), self.output_dim()));
        for (row, mut dst) in features.outer_iter().zip(out.outer_iter_mut()) {
            dst.assign(&self.forward(row)?);
        }
        Ok(out)
    }

    /// Output of the composition `L_k ∘ … ∘ L_1`, for `1 <= k <= l-1`.
    pub fn hidden_pattern(&self, x: ArrayView1<f64>, k: usize) -> Result<Array1<f64>> {
        if k == 0 || k > self.hidden.len() {
            return Err(Error::InvalidArgument(format!(
                "hidden layer index {k} out of range 1..={}",
                self.hidden.len()
            )));
        }
        if x.len() != self.input_dim() {
            return Err(Error::shape("layer 1 input", self.input_dim(), x.len()));
        }
        let mut a = x.to_owned();
        for layer in &self.hidden[..k] {
            a = activate(layer.affine(a.view()).view(), &self.activation);
        }
        Ok(a)
    }

    /// Applies `L_k ∘ … ∘ L_1` to every row.
    pub fn hidden_patterns(&self, features: ArrayView2<f64>, k: usize) -> Result<Array2<f64>> {
        if k == 0 || k > self.hidden.len() {
            return Err(Error::InvalidArgument(format!(
                "hidden layer index {k} out of range 1..={}",
                self.hidden.len()
            )));
        }
        let width = self.hidden[k - 1].outputs();
        let mut out = Array2::zeros((features.nrows(), width));
        for (row, mut dst) in features.outer_iter().zip(out.outer_iter_mut()) {
            dst.assign(&self.hidden_pattern(row, k)?);
        }
        Ok(out)
    }

    fn layers(&self) -> impl Iterator<Item = &LayerParams> {
        self.hidden.iter().chain(std::iter::once(&self.output))
    }

    /// Total number of weights and biases.
    pub fn parameter_count(&self) -> usize {
        self.layers()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }
}

/// Mean over examples of the squared Euclidean prediction error.
pub fn mse(model: &BannModel, data: &Dataset) -> Result<f64> {
    if data.len() == 0 {
        return Err(Error::Data("mse of an empty dataset".into()));
    }
    if data.output_dim() != model.output_dim() {
        return Err(Error::shape(
            "output layer",
            data.output_dim(),
            model.output_dim(),
        ));
    }
    let predictions = model.predict(data.features.view())?;
    let total: f64 = predictions
        .outer_iter()
        .zip(data.labels.outer_iter())
        .map(|(p, y)| {
            p.iter()
                .zip(y.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum();
    Ok(total / data.len() as f64)
}

/// Returns an equivalent model using `target` as its activation.
///
/// With `a = (h1 - h2) / (h1* - h2*)` and `k = a h1* - h1`, every hidden
/// activation satisfies `h = a h* - k`. Layers after the first are scaled by
/// `a` and their biases absorb `-k` times each neuron's incoming row sum;
/// layers feeding an activation also shift their bias by `t* - t`.
pub fn reparametrize_activation(model: &BannModel, target: ActivationParams) -> Result<BannModel> {
    if target.h1 == target.h2 {
        return Err(Error::InvalidArgument(
            "degenerate target activation (h1 == h2)".into(),
        ));
    }
    target.validate()?;
    let src = model.activation;
    if src == target {
        return Ok(model.clone());
    }
    let scale = (src.h1 - src.h2) / (target.h1 - target.h2);
    let offset = scale * target.h1 - src.h1;
    let shift = target.t - src.t;

    let mut hidden = Vec::with_capacity(model.hidden.len());
    for (idx, layer) in model.hidden.iter().enumerate() {
        if idx == 0 {
            hidden.push(LayerParams {
                weights: layer.weights.clone(),
                biases: layer.biases.mapv(|b| b + shift),
            });
        } else {
            let sums = layer.row_sums();
            hidden.push(LayerParams {
                weights: layer.weights.mapv(|w| w * scale),
                biases: Array1::from_iter(
                    layer
                        .biases
                        .iter()
                        .zip(sums.iter())
                        .map(|(b, s)| b - offset * s + shift),
                ),
            });
        }
    }
    let output = if model.hidden.is_empty() {
        model.output.clone()
    } else {
        let sums = model.output.row_sums();
        LayerParams {
            weights: model.output.weights.mapv(|w| w * scale),
            biases: Array1::from_iter(
                model
                    .output
                    .biases
                    .iter()
                    .zip(sums.iter())
                    .map(|(b, s)| b - offset * s),
            ),
        }
    };
    Ok(BannModel {
        activation: target,
        hidden,
        output,
    })
}

/// Counts weights and biases with `|value| > tol`.
pub fn count_nonzero_parameters(model: &BannModel, tol: f64) -> usize {
    model
        .layers()
        .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
        .filter(|v| v.abs() > tol)
        .count()
}

pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    activation: ActivationParams,
    hidden: Vec<LayerFile>,
    output: LayerFile,
}

impl From<&LayerParams> for LayerFile {
    fn from(layer: &LayerParams) -> Self {
        Self {
            weights: layer.weights.outer_iter().map(|r| r.to_vec()).collect(),
            biases: layer.biases.to_vec(),
        }
    }
}

impl LayerFile {
    fn into_layer(self, inputs_hint: usize) -> Result<LayerParams> {
        let rows = self.weights.len();
        let cols = self.weights.first().map_or(inputs_hint, Vec::len);
        if let Some(bad) = self.weights.iter().find(|r| r.len() != cols) {
            return Err(Error::shape("weight row", cols, bad.len()));
        }
        let flat: Vec<f64> = self.weights.into_iter().flatten().collect();
        let weights = Array2::from_shape_vec((rows, cols), flat)
            .map_err(|e| Error::Data(e.to_string()))?;
        LayerParams::new(weights, Array1::from(self.biases))
    }
}

impl BannModel {
    /// Serializes to the versioned JSON model document.
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_FILE_VERSION,
            activation: self.activation,
            hidden: self.hidden.iter().map(LayerFile::from).collect(),
            output: LayerFile::from(&self.output),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.version != MODEL_FILE_VERSION {
            return Err(Error::UnknownVersion(file.version));
        }
        let mut width = 0;
        let mut hidden = Vec::with_capacity(file.hidden.len());
        for layer in file.hidden {
            let layer = layer.into_layer(width)?;
            width = layer.outputs();
            hidden.push(layer);
        }
        let output = file.output.into_layer(width)?;
        BannModel::new(file.activation, hidden, output)
    }
}
