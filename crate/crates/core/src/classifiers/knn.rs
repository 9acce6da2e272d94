//! k-nearest neighbors with uniform votes and Euclidean distance.

use serde::{Deserialize, Serialize};

use super::{squared_distance, ClassProbs, LabeledDataset};
use crate::error::{Error, Result};
use crate::label::Label;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    k: usize,
    dim: usize,
    features: Vec<Vec<f64>>,
    labels: Vec<Label>,
}

pub fn train_knn(data: &LabeledDataset, k: usize) -> Result<KnnModel> {
    if k == 0 || k > data.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must be in 1..={} (training size)",
            data.len()
        )));
    }
    Ok(KnnModel {
        k,
        dim: data.dim(),
        features: data.features().to_vec(),
        labels: data.labels().to_vec(),
    })
}

impl KnnModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Training indices of the `k` nearest neighbors, nearest first; equal
    /// distances keep training order.
    pub fn neighbors(&self, x: &[f64]) -> Vec<usize> {
        let mut dist: Vec<(f64, usize)> = self
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| (squared_distance(f, x), i))
            .collect();
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, by_distance);
            dist.truncate(self.k);
        }
        dist.sort_by(by_distance);
        dist.into_iter().map(|(_, i)| i).collect()
    }

    /// Vote fractions of the nearest neighbors.
    pub fn proba(&self, x: &[f64]) -> ClassProbs {
        let neighbors = self.neighbors(x);
        let sick = neighbors
            .iter()
            .filter(|&&i| self.labels[i] == Label::Sick)
            .count() as f64;
        let p_sick = sick / neighbors.len() as f64;
        [1.0 - p_sick, p_sick]
    }
}
