//! Two-class classifiers that emit class-posterior estimates.
//!
//! All models produce rows `[P(C|x), P(S|x)]` so their outputs can be fused.

mod forest;
mod gnb;
mod grid;
mod knn;
mod platt;
mod svm;

pub use forest::{train_rf, ForestModel, ForestParams, TreeNode};
pub use gnb::{train_gnb, GnbModel, DEFAULT_VAR_SMOOTHING};
pub use grid::{grid_search_svm, GridCell, GridSearchOutcome, SvmGrid};
pub use knn::{train_knn, KnnModel};
pub use platt::PlattSigmoid;
pub use svm::{train_svm, train_svm_uncalibrated, SvmModel, SvmParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{argmax, Label};

/// `[P(C|x), P(S|x)]`.
pub type ClassProbs = [f64; 2];

/// Feature rows with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<Label>,
    dim: usize,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let dim = features.first().map_or(0, Vec::len);
        for row in &features {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset("non-finite feature value".into()));
            }
        }
        Ok(LabeledDataset {
            features,
            labels,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Sample counts indexed by [`Label::index`].
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            dim: self.dim,
        }
    }

    /// Keeps only the given feature columns, in the given order.
    pub fn select_features(&self, columns: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self
                .features
                .iter()
                .map(|row| columns.iter().map(|&c| row[c]).collect())
                .collect(),
            labels: self.labels.clone(),
            dim: columns.len(),
        }
    }

    /// Training needs at least two samples of each class.
    pub fn require_trainable(&self) -> Result<()> {
        let counts = self.class_counts();
        if counts.iter().any(|&c| c < 2) {
            return Err(Error::InvalidDataset(format!(
                "training needs at least 2 samples per class, got C={} S={}",
                counts[0], counts[1]
            )));
        }
        Ok(())
    }
}

/// Per-sample class posteriors of one classifier on one fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityMatrix {
    pub classifier_id: String,
    pub fold_id: usize,
    pub sample_ids: Vec<String>,
    pub rows: Vec<ClassProbs>,
}

impl ProbabilityMatrix {
    pub fn new(
        classifier_id: impl Into<String>,
        fold_id: usize,
        sample_ids: Vec<String>,
        rows: Vec<ClassProbs>,
    ) -> Result<Self> {
        if sample_ids.len() != rows.len() {
            return Err(Error::InvalidProbabilities(format!(
                "{} sample ids for {} rows",
                sample_ids.len(),
                rows.len()
            )));
        }
        for (id, row) in sample_ids.iter().zip(&rows) {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row[0] + row[1] - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidProbabilities(format!(
                    "row for {id} is not a distribution: {row:?}"
                )));
            }
        }
        Ok(ProbabilityMatrix {
            classifier_id: classifier_id.into(),
            fold_id,
            sample_ids,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn predictions(&self) -> Vec<Label> {
        self.rows.iter().map(argmax).collect()
    }
}

/// Which classifier to train, with its hyper-parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassifierSpec {
    /// RBF SVM. With both `c` and `gamma` set the parameters are fixed,
    /// otherwise they are chosen by grid search.
    Svm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default)]
        grid: SvmGrid,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
    Gnb {
        #[serde(default = "default_var_smoothing")]
        var_smoothing: f64,
    },
    Rf {
        #[serde(default = "default_trees")]
        trees: usize,
        #[serde(default = "default_true")]
        bootstrap: bool,
    },
}

fn default_tolerance() -> f64 {
    1e-3
}
fn default_k() -> usize {
    5
}
fn default_var_smoothing() -> f64 {
    DEFAULT_VAR_SMOOTHING
}
fn default_trees() -> usize {
    10
}
fn default_true() -> bool {
    true
}

impl ClassifierSpec {
    pub fn svm_grid() -> Self {
        ClassifierSpec::Svm {
            c: None,
            gamma: None,
            grid: SvmGrid::default(),
            tolerance: default_tolerance(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Svm { .. } => "SVM",
            ClassifierSpec::Knn { .. } => "k-NN",
            ClassifierSpec::Gnb { .. } => "NB",
            ClassifierSpec::Rf { .. } => "RF",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClassifierSpec::Svm { c, gamma, grid, tolerance } => {
                if c.is_some() != gamma.is_some() {
                    return Err(Error::Config("svm: set both c and gamma, or neither".into()));
                }
                if let (Some(c), Some(g)) = (c, gamma) {
                    SvmParams::new(*c, *g)?;
                }
                if !(*tolerance > 0.0) {
                    return Err(Error::Config("svm: tolerance must be positive".into()));
                }
                grid.validate()
            }
            ClassifierSpec::Knn { k } if *k == 0 => Err(Error::Config("knn: k must be positive".into())),
            ClassifierSpec::Gnb { var_smoothing } if !(*var_smoothing >= 0.0) => {
                Err(Error::Config("gnb: var_smoothing must be non-negative".into()))
            }
            ClassifierSpec::Rf { trees, .. } if *trees == 0 => {
                Err(Error::Config("rf: trees must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// Trains on `data`; `seed` feeds every stochastic step.
    pub fn train(&self, data: &LabeledDataset, seed: u64) -> Result<Model> {
        self.validate()?;
        Ok(match self {
            ClassifierSpec::Svm {
                c,
                gamma,
                grid,
                tolerance,
            } => {
                let params = match (c, gamma) {
                    (Some(c), Some(g)) => SvmParams {
                        tolerance: *tolerance,
                        ..SvmParams::new(*c, *g)?
                    },
                    _ => {
                        let outcome = grid_search_svm(
                            data,
                            grid,
                            *tolerance,
                            crate::seed::derive(seed, "grid", 0),
                        )?;
                        log::debug!(
                            "event=grid_search c={} gamma={} f1={}",
                            outcome.best.c,
                            outcome.best.gamma,
                            outcome.best_score
                        );
                        outcome.best
                    }
                };
                Model::Svm(train_svm(data, &params, crate::seed::derive(seed, "platt", 0))?)
            }
            ClassifierSpec::Knn { k } => Model::Knn(train_knn(data, *k)?),
            ClassifierSpec::Gnb { var_smoothing } => Model::Gnb(train_gnb(data, *var_smoothing)?),
            ClassifierSpec::Rf { trees, bootstrap } => Model::Rf(train_rf(
                data,
                &ForestParams {
                    trees: *trees,
                    bootstrap: *bootstrap,
                    max_features: None,
                },
                seed,
            )?),
        })
    }
}

/// A trained classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Svm(SvmModel),
    Knn(KnnModel),
    Gnb(GnbModel),
    Rf(ForestModel),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Svm(m) => m.dim(),
            Model::Knn(m) => m.dim(),
            Model::Gnb(m) => m.dim(),
            Model::Rf(m) => m.dim(),
        }
    }

    fn check_dims(&self, samples: &[Vec<f64>]) -> Result<()> {
        let dim = self.dim();
        match samples.iter().find(|s| s.len() != dim) {
            Some(s) => Err(Error::DimensionMismatch {
                expected: dim,
                actual: s.len(),
            }),
            None => Ok(()),
        }
    }

    /// One `[P(C), P(S)]` row per sample.
    pub fn predict_proba(&self, samples: &[Vec<f64>]) -> Result<Vec<ClassProbs>> {
        self.check_dims(samples)?;
        Ok(samples
            .iter()
            .map(|x| match self {
                Model::Svm(m) => m.proba(x),
                Model::Knn(m) => m.proba(x),
                Model::Gnb(m) => m.proba(x),
                Model::Rf(m) => m.proba(x),
            })
            .collect())
    }

    pub fn predict(&self, samples: &[Vec<f64>]) -> Result<Vec<Label>> {
        Ok(self.predict_proba(samples)?.iter().map(argmax).collect())
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Versioned on-disk model container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub format_version: u32,
    pub classifier_id: String,
    pub model: Model,
}

impl SavedModel {
    pub fn new(classifier_id: impl Into<String>, model: Model) -> Self {
        SavedModel {
            format_version: MODEL_FORMAT_VERSION,
            classifier_id: classifier_id.into(),
            model,
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let saved: SavedModel = serde_json::from_slice(bytes)?;
        if saved.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format version {}",
                saved.format_version
            )));
        }
        Ok(saved)
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
