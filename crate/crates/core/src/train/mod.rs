//! Greedy network construction.
//!
//! A layer is grown one neuron at a time: each neuron's hyperplane is fitted
//! to the current residuals, its output coefficients are solved in closed
//! form, and the residuals are updated. Deeper layers are trained on the
//! sign patterns produced by the frozen layers below.

mod hyperplane;
mod layer;
mod network;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regress::LassoConfig;

pub use hyperplane::{
    compute_cd, fit_hyperplane, hyperplane_sides, optimal_bias, stacked_problem, BiasSplit,
    Hyperplane,
};
pub use layer::{
    build_layer, AddOutcome, LayerData, LayerOutcome, LayerState, Neuron, ReplaceOutcome,
    ResidualMatrix,
};
pub use network::{build_network, build_network_split, LayerSummary, TrainReport};

/// Regression used to orient each new hyperplane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperplaneSolver {
    #[default]
    Lasso,
    LeastSquares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// `T`: neurons per layer at most.
    pub max_neurons_per_layer: usize,
    pub max_hidden_layers: usize,
    /// `r`: replacement attempts per pass at most.
    pub replace_cap: usize,
    /// `q`: additions without validation improvement before a layer stops.
    pub patience: usize,
    pub lasso: LassoConfig,
    pub solver: HyperplaneSolver,
    pub val_fraction: f64,
    pub seed: u64,
    /// Relative validation improvement required to reset patience.
    pub min_layer_gain: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_neurons_per_layer: 1000,
            max_hidden_layers: 3,
            replace_cap: 10,
            patience: 20,
            lasso: LassoConfig::default(),
            solver: HyperplaneSolver::Lasso,
            val_fraction: 0.2,
            seed: 0,
            min_layer_gain: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_neurons_per_layer < 1 {
            return Err(Error::Config("max_neurons_per_layer must be at least 1".into()));
        }
        if self.max_hidden_layers < 1 {
            return Err(Error::Config("max_hidden_layers must be at least 1".into()));
        }
        if self.patience < 1 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config(format!(
                "val_fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        if !(self.min_layer_gain >= 0.0 && self.min_layer_gain < 1.0) {
            return Err(Error::Config(format!(
                "min_layer_gain must lie in [0, 1), got {}",
                self.min_layer_gain
            )));
        }
        self.lasso.validate()
    }
}

/// One accepted neuron addition (and the replacement pass that followed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based hidden layer index.
    pub layer: usize,
    /// Neuron count after the addition.
    pub t: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
    /// Training MSE right before the addition.
    pub mse_before: f64,
    /// Training MSE right after the addition, before replacements.
    pub mse_after_add: f64,
    pub drop: f64,
    pub predicted_drop: f64,
    pub cd_drop: f64,
    pub replacements: usize,
    pub lambda: f64,
    /// Nonzero parameters of the network as it stands after this iteration.
    pub nnz: usize,
    /// Largest per-side residual sum left by this iteration's updates.
    pub side_sum_error: f64,
}
