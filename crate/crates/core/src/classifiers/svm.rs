//! C-SVM with an RBF kernel, trained by SMO with second-order working-set
//! selection, and Platt-calibrated probabilities.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::platt::PlattSigmoid;
use super::{squared_distance, ClassProbs, LabeledDataset};
use crate::error::{Error, Result};
use crate::seed;

const TAU: f64 = 1e-12;
const PLATT_FOLDS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    /// Stop once the maximal KKT violation `m(α) - M(α)` drops below this.
    pub tolerance: f64,
    /// Iteration cap, in multiples of the training-set size.
    pub max_passes: usize,
}

impl SvmParams {
    pub fn new(c: f64, gamma: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        Ok(SvmParams {
            c,
            gamma,
            tolerance: 1e-3,
            max_passes: 10_000,
        })
    }
}

/// Pairwise squared distances of a training set, shared across kernels.
pub(crate) struct DistanceMatrix {
    n: usize,
    d2: Vec<f64>,
}

impl DistanceMatrix {
    pub(crate) fn new(x: &[Vec<f64>]) -> Self {
        let n = x.len();
        let mut d2 = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = squared_distance(&x[i], &x[j]);
                d2[i * n + j] = d;
                d2[j * n + i] = d;
            }
        }
        DistanceMatrix { n, d2 }
    }

    #[inline]
    pub(crate) fn get(&self, i: usize, j: usize) -> f64 {
        self.d2[i * self.n + j]
    }

    /// RBF kernel matrix restricted to `idx`.
    pub(crate) fn kernel(&self, idx: &[usize], gamma: f64) -> Vec<f64> {
        let m = idx.len();
        let mut k = vec![0.0; m * m];
        for (a, &i) in idx.iter().enumerate() {
            k[a * m + a] = 1.0;
            for (b, &j) in idx.iter().enumerate().skip(a + 1) {
                let v = (-gamma * self.get(i, j)).exp();
                k[a * m + b] = v;
                k[b * m + a] = v;
            }
        }
        k
    }
}

/// Result of the dual optimization on one kernel matrix.
#[derive(Clone, Debug)]
pub(crate) struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
}

/// Solves `min ½ αᵀQα − eᵀα` s.t. `yᵀα = 0`, `0 ≤ α ≤ C`, `Q_ij = y_i y_j K_ij`.
pub(crate) fn solve_dual(kernel: &[f64], y: &[f64], params: &SvmParams) -> Result<DualSolution> {
    let n = y.len();
    debug_assert_eq!(kernel.len(), n * n);
    let c = params.c;
    let max_iter = params.max_passes.saturating_mul(n.max(1));
    let k = |i: usize, j: usize| kernel[i * n + j];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut best_violation = f64::INFINITY;
    let mut iterations = 0;

    loop {
        // i maximizes -y_t G_t over I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let in_up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            if in_up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else { break };

        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
            if !in_low {
                continue;
            }
            let yg = y[t] * grad[t];
            if yg >= gmax2 {
                gmax2 = yg;
            }
            let grad_diff = gmax + yg;
            if grad_diff > 0.0 {
                let quad = k(i, i) + k(t, t) - 2.0 * k(i, t);
                let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= obj_min {
                    obj_min = obj;
                    j_sel = Some(t);
                }
            }
        }

        let violation = gmax + gmax2;
        best_violation = best_violation.min(violation);
        let Some(j) = j_sel else { break };
        if violation < params.tolerance {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::NotConverged {
                iterations,
                violation: best_violation,
            });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * k(i, j);
        if y[i] != y[j] {
            let quad = k(i, i) + k(j, j) + 2.0 * q_ij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = k(i, i) + k(j, j) - 2.0 * q_ij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(i, t) * di + y[j] * k(j, t) * dj);
        }
    }

    let rho = compute_rho(&alpha, &grad, y, c);
    Ok(DualSolution {
        alpha,
        rho,
        iterations,
    })
}

fn compute_rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Trained RBF SVM. Positive decision values point toward class S.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub params: SvmParams,
    dim: usize,
    support_vectors: Vec<Vec<f64>>,
    /// `α_i y_i` per support vector.
    coefficients: Vec<f64>,
    /// Training-set index of each support vector.
    support_indices: Vec<usize>,
    rho: f64,
    platt: Option<PlattSigmoid>,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn support_indices(&self) -> &[usize] {
        &self.support_indices
    }

    /// `α_i y_i` for each support vector, aligned with [`Self::support_indices`].
    pub fn dual_coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn sigmoid(&self) -> Option<&PlattSigmoid> {
        self.platt.as_ref()
    }

    pub fn decision_value(&self, x: &[f64]) -> f64 {
        let s: f64 = self
            .support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, coef)| coef * (-self.params.gamma * squared_distance(sv, x)).exp())
            .sum();
        s - self.rho
    }

    /// Platt probabilities; without a fitted sigmoid the sign of the
    /// decision value gives a hard 0/1 row.
    pub fn proba(&self, x: &[f64]) -> ClassProbs {
        let f = self.decision_value(x);
        let p_sick = match &self.platt {
            Some(s) => s.positive_probability(f),
            None if f > 0.0 => 1.0,
            None => 0.0,
        };
        [1.0 - p_sick, p_sick]
    }
}

/// Trains on the rows `idx` of `data`, reusing precomputed distances.
pub(crate) fn fit_indices(
    data: &LabeledDataset,
    dist: &DistanceMatrix,
    idx: &[usize],
    params: &SvmParams,
) -> Result<SvmModel> {
    let y: Vec<f64> = idx.iter().map(|&i| data.labels()[i].sign()).collect();
    let kernel = dist.kernel(idx, params.gamma);
    let sol = solve_dual(&kernel, &y, params)?;
    log::trace!("event=smo_done n={} iterations={}", idx.len(), sol.iterations);
    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    let mut support_indices = Vec::new();
    for (a, (&alpha, &yi)) in sol.alpha.iter().zip(&y).enumerate() {
        if alpha > 0.0 {
            support_vectors.push(data.features()[idx[a]].clone());
            coefficients.push(alpha * yi);
            support_indices.push(a);
        }
    }
    Ok(SvmModel {
        params: *params,
        dim: data.dim(),
        support_vectors,
        coefficients,
        support_indices,
        rho: sol.rho,
        platt: None,
    })
}

/// Decision values of `data` rows obtained by internal cross-validation.
fn cross_validated_decisions(
    data: &LabeledDataset,
    dist: &DistanceMatrix,
    params: &SvmParams,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = data.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(seed));
    let mut decisions = vec![0.0; n];
    for fold in 0..PLATT_FOLDS {
        let begin = fold * n / PLATT_FOLDS;
        let end = (fold + 1) * n / PLATT_FOLDS;
        if begin == end {
            continue;
        }
        let train: Vec<usize> = perm[..begin].iter().chain(&perm[end..]).copied().collect();
        let positives = train.iter().filter(|&&i| data.labels()[i].sign() > 0.0).count();
        let negatives = train.len() - positives;
        let fixed = match (positives, negatives) {
            (0, 0) => Some(0.0),
            (_, 0) => Some(1.0),
            (0, _) => Some(-1.0),
            _ => None,
        };
        match fixed {
            Some(v) => perm[begin..end].iter().for_each(|&i| decisions[i] = v),
            None => {
                let model = fit_indices(data, dist, &train, params)?;
                for &i in &perm[begin..end] {
                    decisions[i] = model.decision_value(&data.features()[i]);
                }
            }
        }
    }
    Ok(decisions)
}

/// Trains without probability calibration; probabilities are hard 0/1.
pub fn train_svm_uncalibrated(data: &LabeledDataset, params: &SvmParams) -> Result<SvmModel> {
    data.require_trainable()?;
    let dist = DistanceMatrix::new(data.features());
    let all: Vec<usize> = (0..data.len()).collect();
    fit_indices(data, &dist, &all, params)
}

/// Trains on all of `data` and fits a Platt sigmoid to 5-fold
/// cross-validated decision values.
pub fn train_svm(data: &LabeledDataset, params: &SvmParams, seed: u64) -> Result<SvmModel> {
    data.require_trainable()?;
    SvmParams::new(params.c, params.gamma)?;
    let dist = DistanceMatrix::new(data.features());
    let decisions = cross_validated_decisions(data, &dist, params, seed)?;
    let positives: Vec<bool> = data.labels().iter().map(|l| l.sign() > 0.0).collect();
    let sigmoid = PlattSigmoid::fit(&decisions, &positives);
    let all: Vec<usize> = (0..data.len()).collect();
    let mut model = fit_indices(data, &dist, &all, params)?;
    model.platt = Some(sigmoid);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Label;

    fn two_points(copies: usize) -> LabeledDataset {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..copies {
            x.push(vec![0.0, 0.0]);
            y.push(Label::Control);
            x.push(vec![2.0, 2.0]);
            y.push(Label::Sick);
        }
        LabeledDataset::new(x, y).unwrap()
    }

    #[test]
    fn symmetric_problem_has_bisector_boundary() {
        let data = two_points(5);
        let model = train_svm(&data, &SvmParams::new(10.0, 1.0).unwrap(), 1).unwrap();
        let tol = model.params.tolerance;
        assert!(model.decision_value(&[1.0, 1.0]).abs() < tol);
        // Points equidistant from both classes sit on the boundary too.
        assert!(model.decision_value(&[2.0, 0.0]).abs() < tol);
        let p = model.proba(&[1.0, 1.0]);
        assert!((p[1] - 0.5).abs() < 0.02, "{p:?}");
        assert!(model.decision_value(&[2.0, 2.0]) > 0.0);
    }

    #[test]
    fn dual_feasibility() {
        let data = two_points(3);
        let params = SvmParams::new(0.5, 0.3).unwrap();
        let model = train_svm_uncalibrated(&data, &params).unwrap();
        let sum: f64 = model.dual_coefficients().iter().sum();
        assert!(sum.abs() < 1e-9);
        for &coef in model.dual_coefficients() {
            assert!(coef.abs() <= params.c + 1e-12);
        }
    }

    #[test]
    fn iteration_cap_reports_violation() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1, (i % 3) as f64]).collect();
        let y: Vec<Label> = (0..20)
            .map(|i| if i % 2 == 0 { Label::Control } else { Label::Sick })
            .collect();
        let data = LabeledDataset::new(x, y).unwrap();
        let params = SvmParams {
            max_passes: 0,
            ..SvmParams::new(100.0, 1.0).unwrap()
        };
        match train_svm_uncalibrated(&data, &params) {
            Err(Error::NotConverged { violation, .. }) => assert!(violation > params.tolerance),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(SvmParams::new(0.0, 1.0).is_err());
        assert!(SvmParams::new(1.0, -1.0).is_err());
    }
}
