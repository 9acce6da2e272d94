//! Chi-square feature scoring over non-negative features.

use serde::{Deserialize, Serialize};

use crate::classifiers::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chi2Report {
    /// One non-negative statistic per feature.
    pub scores: Vec<f64>,
    /// Feature indices by descending score, ties by ascending index.
    pub ranking: Vec<usize>,
}

impl Chi2Report {
    pub fn dim(&self) -> usize {
        self.scores.len()
    }
}

/// Scores each feature by the chi-square statistic of its class-wise value
/// sums against the sums expected from class frequencies.
pub fn chi2_scores(data: &LabeledDataset) -> Result<Chi2Report> {
    let d = data.dim();
    let n = data.len();
    if n == 0 {
        return Err(Error::InvalidDataset("chi-square needs samples".into()));
    }
    let mut observed = vec![[0.0f64; 2]; d];
    for (x, l) in data.features().iter().zip(data.labels()) {
        for (j, &v) in x.iter().enumerate() {
            if v < 0.0 {
                return Err(Error::NegativeFeature { index: j, value: v });
            }
            observed[j][l.index()] += v;
        }
    }
    let counts = data.class_counts();
    let frac = [counts[0] as f64 / n as f64, counts[1] as f64 / n as f64];
    let scores: Vec<f64> = observed
        .iter()
        .map(|obs| {
            let total = obs[0] + obs[1];
            (0..2)
                .map(|k| {
                    let expected = frac[k] * total;
                    if expected > 0.0 {
                        (obs[k] - expected).powi(2) / expected
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect();
    let mut ranking: Vec<usize> = (0..d).collect();
    ranking.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(Chi2Report { scores, ranking })
}

/// The first `n` entries of the ranking.
pub fn select_top_n(report: &Chi2Report, n: usize) -> Result<Vec<usize>> {
    if n == 0 || n > report.dim() {
        return Err(Error::InvalidParameter(format!(
            "cannot select {n} of {} features",
            report.dim()
        )));
    }
    Ok(report.ranking[..n].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Label;

    fn report(scores: Vec<f64>) -> Chi2Report {
        let mut ranking: Vec<usize> = (0..scores.len()).collect();
        ranking.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Chi2Report { scores, ranking }
    }

    #[test]
    fn top_two_of_tied_scores() {
        assert_eq!(select_top_n(&report(vec![0.0, 5.0, 5.0, 1.0]), 2).unwrap(), vec![1, 2]);
        assert_eq!(select_top_n(&report(vec![0.0, 5.0, 5.0, 1.0]), 4).unwrap(), vec![1, 2, 3, 0]);
        assert!(select_top_n(&report(vec![1.0]), 2).is_err());
    }

    #[test]
    fn class_specific_feature_scores_highest() {
        let x = vec![
            vec![1.0, 0.0, 2.0],
            vec![1.0, 0.0, 2.0],
            vec![1.0, 3.0, 2.0],
            vec![1.0, 3.0, 2.0],
        ];
        let y = vec![Label::Control, Label::Control, Label::Sick, Label::Sick];
        let r = chi2_scores(&LabeledDataset::new(x, y).unwrap()).unwrap();
        assert_eq!(r.scores[0], 0.0);
        assert_eq!(r.scores[2], 0.0);
        // observed (0, 6), expected (3, 3): 9/3 + 9/3.
        assert!((r.scores[1] - 6.0).abs() < 1e-12);
        assert_eq!(r.ranking[0], 1);
    }

    #[test]
    fn negative_feature_names_index() {
        let x = vec![vec![0.0, 1.0], vec![1.0, -0.5]];
        let y = vec![Label::Control, Label::Sick];
        match chi2_scores(&LabeledDataset::new(x, y).unwrap()) {
            Err(Error::NegativeFeature { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
    }
}
