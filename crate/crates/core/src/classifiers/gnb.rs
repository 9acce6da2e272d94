//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use super::{ClassProbs, LabeledDataset};
use crate::error::Result;

/// Fraction of the largest feature variance added to every variance.
pub const DEFAULT_VAR_SMOOTHING: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    dim: usize,
    log_priors: [f64; 2],
    means: [Vec<f64>; 2],
    variances: [Vec<f64>; 2],
}

fn mean_and_variance<'a>(rows: impl Iterator<Item = &'a Vec<f64>> + Clone, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.clone().count() as f64;
    let mut mean = vec![0.0; dim];
    for r in rows.clone() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    (mean, var)
}

pub fn train_gnb(data: &LabeledDataset, var_smoothing: f64) -> Result<GnbModel> {
    data.require_trainable()?;
    let dim = data.dim();
    let (_, all_var) = mean_and_variance(data.features().iter(), dim);
    let largest = all_var.iter().copied().fold(0.0, f64::max);
    let epsilon = (var_smoothing * largest).max(f64::MIN_POSITIVE);

    let counts = data.class_counts();
    let n = data.len() as f64;
    let mut means: [Vec<f64>; 2] = Default::default();
    let mut variances: [Vec<f64>; 2] = Default::default();
    for class in 0..2 {
        let rows = data
            .features()
            .iter()
            .zip(data.labels())
            .filter(move |(_, l)| l.index() == class)
            .map(|(r, _)| r);
        let (m, mut v) = mean_and_variance(rows, dim);
        v.iter_mut().for_each(|x| *x += epsilon);
        means[class] = m;
        variances[class] = v;
    }
    Ok(GnbModel {
        dim,
        log_priors: [(counts[0] as f64 / n).ln(), (counts[1] as f64 / n).ln()],
        means,
        variances,
    })
}

impl GnbModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn joint_log_likelihood(&self, class: usize, x: &[f64]) -> f64 {
        let mut acc = self.log_priors[class];
        for ((v, m), var) in x.iter().zip(&self.means[class]).zip(&self.variances[class]) {
            acc -= 0.5 * (2.0 * std::f64::consts::PI * var).ln();
            acc -= 0.5 * (v - m) * (v - m) / var;
        }
        acc
    }

    pub fn proba(&self, x: &[f64]) -> ClassProbs {
        let jll = [self.joint_log_likelihood(0, x), self.joint_log_likelihood(1, x)];
        let top = jll[0].max(jll[1]);
        let e = [(jll[0] - top).exp(), (jll[1] - top).exp()];
        let z = e[0] + e[1];
        [e[0] / z, e[1] / z]
    }
}
