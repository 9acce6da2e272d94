//! Stratified cross-validation, binary metrics and experiment orchestration.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierSpec, LabeledDataset, Model, ProbabilityMatrix};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::io::FeatureTable;
use crate::label::Label;
use crate::selection::{chi2_scores, select_top_n};
use crate::seed;

/// Assignment of every sample to one of `k` test folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Fold index per sample, in sample order.
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// Rebuilds a plan from stored assignments.
    pub fn from_assignments(k: usize, seed: u64, assignments: Vec<usize>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!("fold count must be at least 2, got {k}")));
        }
        if let Some(&f) = assignments.iter().find(|&&f| f >= k) {
            return Err(Error::InvalidParameter(format!("fold index {f} out of range for k={k}")));
        }
        Ok(FoldPlan { k, seed, assignments })
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// `(train, test)` sample indices for `fold`, both ascending.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.assignments.len()).partition(|&i| self.assignments[i] != fold)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffles each class with the seed and deals it round-robin into `k`
/// folds. The dealing position carries over between classes so fold sizes
/// differ by at most one.
pub fn stratified_kfold(labels: &[Label], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("fold count must be at least 2, got {k}")));
    }
    let mut rng = seed::rng(seed);
    let mut assignments = vec![0; labels.len()];
    let mut offset = 0;
    for class in Label::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::InvalidParameter(format!(
                "k={k} exceeds the {} samples of class {class}",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            assignments[i] = (offset + j) % k;
        }
        offset = (offset + members.len()) % k;
    }
    Ok(FoldPlan { k, seed, assignments })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_labels(predicted: &[Label], truth: &[Label], positive: Label) -> Self {
        assert_eq!(predicted.len(), truth.len(), "prediction and truth lengths differ");
        let mut c = Confusion::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p == positive, t == positive) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    /// The same counts with the roles of the classes swapped.
    pub fn swapped(self) -> Self {
        Confusion {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }

    pub fn add(self, o: Confusion) -> Self {
        Confusion {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Precision, recall, F-measure and accuracy of one confusion table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub accuracy: f64,
    /// Set when any ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

impl Scores {
    pub fn from_confusion(c: &Confusion) -> Self {
        let mut degenerate = false;
        let mut ratio = |num: usize, den: usize| {
            if den == 0 {
                degenerate = true;
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let accuracy = ratio(c.tp + c.tn, c.total());
        let f_measure = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            degenerate = true;
            0.0
        };
        Scores {
            precision,
            recall,
            f_measure,
            accuracy,
            degenerate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub confusion: Confusion,
    #[serde(flatten)]
    pub scores: Scores,
}

/// Pooled binary metrics with the fold breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub positive_class: Label,
    pub confusion: Confusion,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub accuracy: f64,
    pub degenerate: bool,
    /// Mean of the F-measures obtained with each class taken as positive.
    pub macro_f1: f64,
    pub per_fold: Vec<FoldMetrics>,
}

impl MetricsRecord {
    pub fn from_confusion(confusion: Confusion, positive_class: Label) -> Self {
        let s = Scores::from_confusion(&confusion);
        let other = Scores::from_confusion(&confusion.swapped());
        MetricsRecord {
            positive_class,
            confusion,
            precision: s.precision,
            recall: s.recall,
            f_measure: s.f_measure,
            accuracy: s.accuracy,
            degenerate: s.degenerate,
            macro_f1: (s.f_measure + other.f_measure) / 2.0,
            per_fold: Vec::new(),
        }
    }
}

/// Binary metrics of `predicted` against `truth` with `positive` as the
/// positive class.
pub fn f_measure(predicted: &[Label], truth: &[Label], positive: Label) -> MetricsRecord {
    MetricsRecord::from_confusion(Confusion::from_labels(predicted, truth, positive), positive)
}

/// Everything produced by one cross-validated experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config_fingerprint: String,
    pub classifier_id: String,
    pub sample_ids: Vec<String>,
    pub labels: Vec<Label>,
    pub fold_plan: FoldPlan,
    pub metrics: MetricsRecord,
    /// One matrix per fold, covering exactly that fold's test samples.
    pub probability_matrices: Vec<ProbabilityMatrix>,
}

/// Artifacts fitted on the training part of one fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedFold {
    /// Feature columns kept by chi-square selection, if any.
    pub selected: Option<Vec<usize>>,
    pub model: Model,
}

/// What to fit inside each fold.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldProtocol<'a> {
    pub classifier: &'a ClassifierSpec,
    pub top_n: Option<usize>,
    pub seed: u64,
}

/// Fits selection and classifier on the training samples of `fold` only.
pub fn fit_fold(
    data: &LabeledDataset,
    plan: &FoldPlan,
    fold: usize,
    protocol: &FoldProtocol<'_>,
) -> Result<FittedFold> {
    let (train_idx, _) = plan.split(fold);
    let mut train = data.subset(&train_idx);
    let selected = match protocol.top_n {
        Some(n) => {
            let cols = select_top_n(&chi2_scores(&train)?, n)?;
            train = train.select_features(&cols);
            Some(cols)
        }
        None => None,
    };
    let model = protocol
        .classifier
        .train(&train, seed::derive(protocol.seed, "fold", fold as u64))?;
    Ok(FittedFold { selected, model })
}

/// Runs every fold (in parallel) and pools the test predictions.
pub fn cross_validate(
    table: &FeatureTable,
    plan: &FoldPlan,
    protocol: &FoldProtocol<'_>,
    classifier_id: &str,
) -> Result<(MetricsRecord, Vec<ProbabilityMatrix>)> {
    if plan.len() != table.len() {
        return Err(Error::DimensionMismatch {
            expected: table.len(),
            actual: plan.len(),
        });
    }
    let data = table.to_dataset()?;
    let folds: Vec<(ProbabilityMatrix, Confusion)> = (0..plan.k)
        .into_par_iter()
        .map(|fold| {
            let fitted = fit_fold(&data, plan, fold, protocol)?;
            let (_, test_idx) = plan.split(fold);
            let test: Vec<Vec<f64>> = test_idx
                .iter()
                .map(|&i| match &fitted.selected {
                    Some(cols) => cols.iter().map(|&c| data.features()[i][c]).collect(),
                    None => data.features()[i].clone(),
                })
                .collect();
            let rows = fitted.model.predict_proba(&test)?;
            let matrix = ProbabilityMatrix::new(
                classifier_id,
                fold,
                test_idx.iter().map(|&i| table.sample_ids[i].clone()).collect(),
                rows,
            )?;
            let truth: Vec<Label> = test_idx.iter().map(|&i| data.labels()[i]).collect();
            let confusion = Confusion::from_labels(&matrix.predictions(), &truth, Label::Sick);
            log::info!(
                "event=fold_done classifier={classifier_id} fold={fold} test={} f1={:.4}",
                test_idx.len(),
                Scores::from_confusion(&confusion).f_measure
            );
            Ok((matrix, confusion))
        })
        .collect::<Result<_>>()?;

    let pooled = folds.iter().fold(Confusion::default(), |acc, (_, c)| acc.add(*c));
    let mut metrics = MetricsRecord::from_confusion(pooled, Label::Sick);
    metrics.per_fold = folds
        .iter()
        .enumerate()
        .map(|(fold, (_, c))| FoldMetrics {
            fold,
            confusion: *c,
            scores: Scores::from_confusion(c),
        })
        .collect();
    Ok((metrics, folds.into_iter().map(|(m, _)| m).collect()))
}

/// Loads or extracts features, builds the fold plan and cross-validates.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let table = config.load_features()?;
    evaluate_table(config, &table)
}

/// Cross-validates `config` on an already materialized feature table.
pub fn evaluate_table(config: &ExperimentConfig, table: &FeatureTable) -> Result<ExperimentResult> {
    config.validate()?;
    let plan = stratified_kfold(&table.labels, config.folds.k, config.seed)?;
    let protocol = FoldProtocol {
        classifier: &config.classifier,
        top_n: config.selection.map(|s| s.top_n),
        seed: config.seed,
    };
    let (metrics, probability_matrices) = cross_validate(table, &plan, &protocol, &config.id)?;
    log::info!(
        "event=experiment_done id={} f1={:.4} macro_f1={:.4}",
        config.id,
        metrics.f_measure,
        metrics.macro_f1
    );
    Ok(ExperimentResult {
        config_fingerprint: config.fingerprint()?,
        classifier_id: config.id.clone(),
        sample_ids: table.sample_ids.clone(),
        labels: table.labels.clone(),
        fold_plan: plan,
        metrics,
        probability_matrices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Control as C, Sick as S};

    #[test]
    fn precision_recall_example() {
        let c = Confusion {
            tp: 8,
            fp: 2,
            fn_: 2,
            tn: 5,
        };
        let m = MetricsRecord::from_confusion(c, S);
        assert!((m.precision - 0.8).abs() < 1e-12);
        assert!((m.recall - 0.8).abs() < 1e-12);
        assert!((m.f_measure - 0.8).abs() < 1e-12);
        assert!(!m.degenerate);
    }

    #[test]
    fn all_negative_predictions_are_degenerate() {
        let m = f_measure(&[C, C, C], &[S, C, S], S);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.f_measure, 0.0);
        assert!(m.degenerate);
        let perfect = f_measure(&[C, S], &[C, S], S);
        assert_eq!(perfect.f_measure, 1.0);
        assert_eq!(perfect.macro_f1, 1.0);
    }

    #[test]
    fn aia_fold_sizes() {
        let mut labels = vec![S; 210];
        labels.extend(vec![C; 208]);
        let plan = stratified_kfold(&labels, 10, 42).unwrap();
        for f in 0..10 {
            let (_, test) = plan.split(f);
            let s = test.iter().filter(|&&i| labels[i] == S).count();
            let c = test.len() - s;
            assert_eq!(s, 21);
            assert!((20..=21).contains(&c));
            assert!((41..=42).contains(&test.len()));
        }
        assert_eq!(plan, stratified_kfold(&labels, 10, 42).unwrap());
    }

    #[test]
    fn k_must_be_at_least_two() {
        assert!(stratified_kfold(&[C, S, C, S], 1, 0).is_err());
        assert!(stratified_kfold(&[C, S, C, S], 3, 0).is_err());
    }
}
