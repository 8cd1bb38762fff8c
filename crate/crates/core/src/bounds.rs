//! Region partitions induced by hidden layers and the loss lower bounds they
//! imply.

use std::collections::HashMap;

use ndarray::ArrayView2;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::BannModel;

/// Examples grouped by their activation pattern after hidden layer `depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPartition {
    pub depth: usize,
    /// Distinct patterns in order of first occurrence.
    pub patterns: Vec<Vec<f64>>,
    /// Row indices per pattern, ascending.
    pub regions: Vec<Vec<usize>>,
    pub examples: usize,
}

impl RegionPartition {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Region index of every example.
    pub fn assignment(&self) -> Vec<usize> {
        let mut out = vec![0; self.examples];
        for (p, rows) in self.regions.iter().enumerate() {
            for &i in rows {
                out[i] = p;
            }
        }
        out
    }
}

/// Groups the rows of `dataset` by the exact output of `L_k ∘ … ∘ L_1`.
pub fn partition_regions(model: &BannModel, dataset: &Dataset, k: usize) -> Result<RegionPartition> {
    let patterns = model.hidden_patterns(dataset.features.view(), k)?;
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut out = RegionPartition {
        depth: k,
        patterns: Vec::new(),
        regions: Vec::new(),
        examples: dataset.len(),
    };
    for (i, row) in patterns.outer_iter().enumerate() {
        // activations come from a two-element set, so bitwise keys are exact
        let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
        let p = *index.entry(key).or_insert_with(|| {
            out.patterns.push(row.to_vec());
            out.regions.push(Vec::new());
            out.regions.len() - 1
        });
        out.regions[p].push(i);
    }
    Ok(out)
}

fn check_rows(partition: &RegionPartition, labels: ArrayView2<f64>) -> Result<()> {
    if labels.nrows() != partition.examples {
        return Err(Error::shape("partition labels", partition.examples, labels.nrows()));
    }
    if partition.examples == 0 {
        return Err(Error::Data("empty partition".into()));
    }
    Ok(())
}

/// `Σ_j Σ_p (n_p/m)·Var(y_{p,j})` with population variances: the training
/// MSE of the best predictor that is constant on every region.
pub fn regression_lower_bound(partition: &RegionPartition, labels: ArrayView2<f64>) -> Result<f64> {
    check_rows(partition, labels)?;
    let m = partition.examples as f64;
    let mut total = 0.0;
    for rows in &partition.regions {
        let n = rows.len() as f64;
        for j in 0..labels.ncols() {
            let mean = rows.iter().map(|&i| labels[[i, j]]).sum::<f64>() / n;
            let ss: f64 = rows
                .iter()
                .map(|&i| {
                    let e = labels[[i, j]] - mean;
                    e * e
                })
                .sum();
            total += ss / m;
        }
    }
    Ok(total)
}

/// `(1 − Σ_p (n_p/m)|mean(y_p)|)/2` for labels in `{−1, +1}`: the 0-1 error
/// of the best classifier that is constant on every region.
pub fn classification_lower_bound(partition: &RegionPartition, labels: ArrayView2<f64>) -> Result<f64> {
    check_rows(partition, labels)?;
    if labels.ncols() != 1 {
        return Err(Error::shape("classification labels", 1, labels.ncols()));
    }
    if let Some(v) = labels.iter().find(|v| **v != 1.0 && **v != -1.0) {
        return Err(Error::Data(format!("classification labels must be -1 or +1, found {v}")));
    }
    // n_p − |Σ y| is twice the minority count: an exact integer
    let mut minority = 0.0;
    for rows in &partition.regions {
        let sum: f64 = rows.iter().map(|&i| labels[[i, 0]]).sum();
        minority += (rows.len() as f64 - sum.abs()) / 2.0;
    }
    Ok(minority / partition.examples as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthBound {
    pub depth: usize,
    pub regions: usize,
    pub bound: f64,
}

/// Region count and regression bound after every hidden layer.
pub fn bound_chain(model: &BannModel, dataset: &Dataset) -> Result<Vec<DepthBound>> {
    if dataset.output_dim() != model.output_dim() {
        return Err(Error::shape("output layer", dataset.output_dim(), model.output_dim()));
    }
    (1..=model.hidden.len())
        .map(|k| {
            let p = partition_regions(model, dataset, k)?;
            Ok(DepthBound {
                depth: k,
                regions: p.len(),
                bound: regression_lower_bound(&p, dataset.labels.view())?,
            })
        })
        .collect()
}
