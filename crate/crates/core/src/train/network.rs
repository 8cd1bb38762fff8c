use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{count_nonzero_parameters, mse, ActivationParams, BannModel, LayerParams};

use super::layer::{build_layer, LayerData};
use super::{IterationRecord, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub layer: usize,
    /// Width after rollback.
    pub width: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
    /// Whether the layer made it into the returned model.
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Every accepted addition, including those of a discarded final layer.
    pub records: Vec<IterationRecord>,
    pub layers: Vec<LayerSummary>,
    pub architecture: Vec<usize>,
    /// Training MSE of the returned model.
    pub final_train_mse: f64,
    pub final_val_mse: Option<f64>,
    pub nonzero_parameters: usize,
}

impl TrainReport {
    pub fn hidden_layers(&self) -> usize {
        self.architecture.len() - 2
    }

    /// Width of the widest hidden layer.
    pub fn width(&self) -> usize {
        let n = self.architecture.len();
        self.architecture[1..n - 1].iter().copied().max().unwrap_or(0)
    }
}

fn nnz(layers: &[LayerParams]) -> usize {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
        .filter(|v| **v != 0.0)
        .count()
}

/// Builds hidden layer 1 on the raw features, then deeper layers on the sign
/// patterns of the frozen stack, keeping a layer only if it lowers the
/// validation MSE.
pub fn build_network(
    train: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(BannModel, TrainReport)> {
    cfg.validate()?;
    let val = val.filter(|v| !v.is_empty());
    if val.is_none() && cfg.max_hidden_layers > 1 {
        return Err(Error::Config(
            "adding layers needs a non-empty validation set".into(),
        ));
    }
    if train.len() < 2 {
        return Err(Error::Data("need at least 2 training rows".into()));
    }
    if let Some(v) = val {
        if v.input_dim() != train.input_dim() || v.output_dim() != train.output_dim() {
            return Err(Error::Data(format!(
                "validation set is {}x{}, training set is {}x{}",
                v.input_dim(),
                v.output_dim(),
                train.input_dim(),
                train.output_dim()
            )));
        }
    }
    let activation = ActivationParams::sign();

    let first = build_layer(
        LayerData {
            train_x: train.features.view(),
            train_y: train.labels.view(),
            val: val.map(|v| (v.features.view(), v.labels.view())),
        },
        cfg,
        1,
        cfg.lasso.lambda0,
        true,
        0,
    )?;
    let mut lambda = first.lambda;
    let mut records = first.records;
    let mut layers = vec![LayerSummary {
        layer: 1,
        width: first.hidden.outputs(),
        train_mse: first.train_mse,
        val_mse: first.best_val_mse,
        kept: true,
    }];
    let mut hidden = vec![first.hidden];
    let mut head = first.head;
    let mut incumbent = first.best_val_mse;
    let mut model = BannModel::new(activation, hidden.clone(), head.clone())?;

    if !first.intercept_only {
        while hidden.len() < cfg.max_hidden_layers {
            let k = hidden.len();
            let (val_set, incumbent_val) = match (val, incumbent) {
                (Some(v), Some(i)) => (v, i),
                _ => break,
            };
            let tx = model.hidden_patterns(train.features.view(), k)?;
            let vx = model.hidden_patterns(val_set.features.view(), k)?;
            let outcome = match build_layer(
                LayerData {
                    train_x: tx.view(),
                    train_y: train.labels.view(),
                    val: Some((vx.view(), val_set.labels.view())),
                },
                cfg,
                k + 1,
                lambda,
                false,
                nnz(&hidden),
            ) {
                Ok(o) => o,
                Err(Error::ZeroWeights) => break,
                Err(e) => return Err(e),
            };
            lambda = outcome.lambda;
            records.extend(outcome.records);
            let candidate = outcome.best_val_mse.unwrap_or(f64::INFINITY);
            let kept = candidate < incumbent_val;
            layers.push(LayerSummary {
                layer: k + 1,
                width: outcome.hidden.outputs(),
                train_mse: outcome.train_mse,
                val_mse: outcome.best_val_mse,
                kept,
            });
            if !kept {
                break;
            }
            hidden.push(outcome.hidden);
            head = outcome.head;
            incumbent = Some(candidate);
            model = BannModel::new(activation, hidden.clone(), head.clone())?;
        }
    }

    let final_val_mse = match val {
        Some(v) => Some(mse(&model, v)?),
        None => None,
    };
    let report = TrainReport {
        records,
        layers,
        architecture: model.architecture(),
        final_train_mse: mse(&model, train)?,
        final_val_mse,
        nonzero_parameters: count_nonzero_parameters(&model, 0.0),
    };
    Ok((model, report))
}

/// Holds out the last `⌊val_fraction·m⌋` rows of a seeded shuffle for
/// validation, then calls [`build_network`].
pub fn build_network_split(data: &Dataset, cfg: &TrainConfig) -> Result<(BannModel, TrainReport)> {
    cfg.validate()?;
    let m = data.len();
    let n_val = (cfg.val_fraction * m as f64 + 1e-9).floor() as usize;
    if n_val == 0 || m - n_val < 2 {
        return Err(Error::Config(format!(
            "validation fraction {} of {m} rows leaves an empty part",
            cfg.val_fraction
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let (train_idx, val_idx) = order.split_at(m - n_val);
    build_network(&data.select(train_idx), Some(&data.select(val_idx)), cfg)
}
