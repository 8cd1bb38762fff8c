//! Greedy construction of binary-activated neural networks for regression.
//!
//! Hidden units use a two-level threshold activation; networks are grown one
//! neuron at a time against the current residuals, then one layer at a time
//! on the sign patterns of the frozen layers below.
//!
//! ```
//! use bgn::{build_network, Dataset, TrainConfig};
//! use ndarray::{array, Array2};
//!
//! let x = Array2::from_shape_fn((40, 1), |(i, _)| i as f64);
//! let y = x.mapv(|v| if v < 20.0 { 1.0 } else { 5.0 });
//! let train = Dataset::new(x, y).unwrap();
//! let cfg = TrainConfig { max_hidden_layers: 1, ..TrainConfig::default() };
//! let (model, report) = build_network(&train, None, &cfg).unwrap();
//! assert!(report.final_train_mse < 1e-12);
//! assert_eq!(model.predict(array![[3.0]].view()).unwrap()[[0, 0]], 1.0);
//! ```

pub mod bounds;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod expressiveness;
pub mod model;
pub mod regress;
pub mod train;

pub use bounds::{
    bound_chain, classification_lower_bound, partition_regions, regression_lower_bound,
    RegionPartition,
};
pub use dataset::{load_csv, split_dataset, Dataset, LabelSpec, Split, SplitSpec};
pub use error::{Error, Result};
pub use expressiveness::{build_product_approximator, build_square_approximator};
pub use model::{
    count_nonzero_parameters, mse, reparametrize_activation, ActivationParams, BannModel,
    LayerParams,
};
pub use regress::{auto_lambda_fit, lasso_fit, least_squares_fit, LassoConfig, RegressionProblem};
pub use train::{build_network, build_network_split, TrainConfig, TrainReport};
