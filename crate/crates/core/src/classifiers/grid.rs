//! Exhaustive (C, γ) search scored by cross-validated F-measure.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::svm::{fit_indices, DistanceMatrix};
use super::{LabeledDataset, SvmParams};
use crate::error::{Error, Result};
use crate::evaluation::{f_measure, stratified_kfold};
use crate::label::Label;

/// Lattice of powers of two: `C = 2^c`, `γ = 2^g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmGrid {
    pub c_exponents: Vec<i32>,
    pub gamma_exponents: Vec<i32>,
    pub folds: usize,
}

impl Default for SvmGrid {
    /// `C ∈ {2^-5, 2^-3, …, 2^15}`, `γ ∈ {2^-15, 2^-13, …, 2^3}`, 5 folds.
    fn default() -> Self {
        SvmGrid {
            c_exponents: (-5..=15).step_by(2).collect(),
            gamma_exponents: (-15..=3).step_by(2).collect(),
            folds: 5,
        }
    }
}

impl SvmGrid {
    pub fn single(c: f64, gamma: f64) -> Self {
        SvmGrid {
            c_exponents: vec![c.log2().round() as i32],
            gamma_exponents: vec![gamma.log2().round() as i32],
            folds: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_exponents.is_empty() || self.gamma_exponents.is_empty() {
            return Err(Error::Config("svm grid must not be empty".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("svm grid needs at least 2 folds".into()));
        }
        Ok(())
    }

    fn cells(&self) -> Vec<(f64, f64)> {
        self.c_exponents
            .iter()
            .flat_map(|&c| {
                self.gamma_exponents
                    .iter()
                    .map(move |&g| (2f64.powi(c), 2f64.powi(g)))
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub c: f64,
    pub gamma: f64,
    /// Mean validation F-measure; `None` when a fold failed to converge.
    pub score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchOutcome {
    pub best: SvmParams,
    pub best_score: f64,
    pub cells: Vec<GridCell>,
}

/// Picks the lattice point with the best mean F-measure (class S positive)
/// over stratified internal folds. Ties go to the smaller C, then the
/// smaller γ.
pub fn grid_search_svm(
    data: &LabeledDataset,
    grid: &SvmGrid,
    tolerance: f64,
    seed: u64,
) -> Result<GridSearchOutcome> {
    grid.validate()?;
    data.require_trainable()?;
    let min_class = data.class_counts().into_iter().min().unwrap_or(0);
    let plan = stratified_kfold(data.labels(), grid.folds.min(min_class), seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..plan.k).map(|f| plan.split(f)).collect();
    let dist = DistanceMatrix::new(data.features());

    let cells: Vec<GridCell> = grid
        .cells()
        .into_par_iter()
        .map(|(c, gamma)| {
            let params = SvmParams {
                tolerance,
                ..SvmParams::new(c, gamma).expect("lattice values are positive")
            };
            let mut total = 0.0;
            for (train, test) in &splits {
                let model = match fit_indices(data, &dist, train, &params) {
                    Ok(m) => m,
                    Err(e) => {
                        log::warn!("event=grid_cell_failed c={c} gamma={gamma} error=\"{e}\"");
                        return GridCell { c, gamma, score: None };
                    }
                };
                let predicted: Vec<Label> = test
                    .iter()
                    .map(|&i| {
                        if model.decision_value(&data.features()[i]) > 0.0 {
                            Label::Sick
                        } else {
                            Label::Control
                        }
                    })
                    .collect();
                let truth: Vec<Label> = test.iter().map(|&i| data.labels()[i]).collect();
                total += f_measure(&predicted, &truth, Label::Sick).f_measure;
            }
            GridCell {
                c,
                gamma,
                score: Some(total / splits.len() as f64),
            }
        })
        .collect();

    let best = cells
        .iter()
        .filter_map(|cell| cell.score.map(|s| (s, cell)))
        .min_by(|(sa, a), (sb, b)| {
            sb.total_cmp(sa)
                .then(a.c.total_cmp(&b.c))
                .then(a.gamma.total_cmp(&b.gamma))
        })
        .map(|(s, cell)| (s, *cell));
    let Some((best_score, cell)) = best else {
        return Err(Error::NotConverged {
            iterations: 0,
            violation: f64::NAN,
        });
    };
    Ok(GridSearchOutcome {
        best: SvmParams {
            tolerance,
            ..SvmParams::new(cell.c, cell.gamma)?
        },
        best_score,
        cells,
    })
}
