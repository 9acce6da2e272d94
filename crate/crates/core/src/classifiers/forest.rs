//! Random forest of fully grown CART trees (Gini impurity).

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ClassProbs, LabeledDataset};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: usize,
    pub bootstrap: bool,
    /// Features drawn per split; `None` means `floor(sqrt(d))`.
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 10,
            bootstrap: true,
            max_features: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        probs: ClassProbs,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    fn leaf_probs(&self, x: &[f64]) -> ClassProbs {
        let mut node = 0;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { probs } => return *probs,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    dim: usize,
    trees: Vec<Tree>,
}

impl ForestModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Mean of the per-tree leaf class frequencies.
    pub fn proba(&self, x: &[f64]) -> ClassProbs {
        let mut acc = [0.0; 2];
        for t in &self.trees {
            let p = t.leaf_probs(x);
            acc[0] += p[0];
            acc[1] += p[1];
        }
        let n = self.trees.len() as f64;
        [acc[0] / n, acc[1] / n]
    }
}

fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: Vec<usize>,
    max_features: usize,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Builder<'_> {
    fn counts(&self, samples: &[usize]) -> [usize; 2] {
        let mut c = [0; 2];
        for &s in samples {
            c[self.y[s]] += 1;
        }
        c
    }

    /// Best threshold on one feature, or `None` if the feature is constant
    /// over `samples`.
    fn split_feature(&self, samples: &[usize], feature: usize, total: [usize; 2]) -> Option<BestSplit> {
        let mut pairs: Vec<(f64, usize)> = samples.iter().map(|&s| (self.x[s][feature], self.y[s])).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs.first()?.0 == pairs.last()?.0 {
            return None;
        }
        let n = pairs.len();
        let mut left = [0usize; 2];
        let mut best: Option<BestSplit> = None;
        for i in 0..n - 1 {
            left[pairs[i].1] += 1;
            if pairs[i].0 == pairs[i + 1].0 {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let nl = (i + 1) as f64;
            let nr = (n - i - 1) as f64;
            let impurity = (nl * gini(left) + nr * gini(right)) / n as f64;
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                let (lo, hi) = (pairs[i].0, pairs[i + 1].0);
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(BestSplit {
                    feature,
                    threshold,
                    impurity,
                });
            }
        }
        best
    }

    fn build(&mut self, samples: Vec<usize>) -> usize {
        let counts = self.counts(&samples);
        let id = self.nodes.len();
        let n = samples.len() as f64;
        self.nodes.push(TreeNode::Leaf {
            probs: [counts[0] as f64 / n, counts[1] as f64 / n],
        });
        if counts[0] == 0 || counts[1] == 0 || samples.len() < 2 {
            return id;
        }

        let dim = self.x[0].len();
        let mut features: Vec<usize> = (0..dim).collect();
        features.shuffle(&mut self.rng);
        let mut evaluated = 0;
        let mut best: Option<BestSplit> = None;
        for f in features {
            if evaluated >= self.max_features {
                break;
            }
            if let Some(split) = self.split_feature(&samples, f, counts) {
                evaluated += 1;
                if best.as_ref().is_none_or(|b| split.impurity < b.impurity) {
                    best = Some(split);
                }
            }
        }
        let Some(best) = best else { return id };

        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&s| self.x[s][best.feature] <= best.threshold);
        let l = self.build(left);
        let r = self.build(right);
        self.nodes[id] = TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        id
    }
}

/// Grows `params.trees` trees; tree `t` draws from the sub-seed `(seed, t)`.
pub fn train_rf(data: &LabeledDataset, params: &ForestParams, seed: u64) -> Result<ForestModel> {
    data.require_trainable()?;
    if params.trees == 0 {
        return Err(Error::InvalidParameter("forest needs at least one tree".into()));
    }
    let dim = data.dim();
    if dim == 0 {
        return Err(Error::InvalidDataset("no features".into()));
    }
    let max_features = params
        .max_features
        .unwrap_or_else(|| (dim as f64).sqrt().floor() as usize)
        .clamp(1, dim);
    let y: Vec<usize> = data.labels().iter().map(|l| l.index()).collect();
    let n = data.len();

    let trees = (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive(seed, "tree", t as u64));
            let samples: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut builder = Builder {
                x: data.features(),
                y: y.clone(),
                max_features,
                rng,
                nodes: Vec::new(),
            };
            builder.build(samples);
            Tree {
                nodes: builder.nodes,
            }
        })
        .collect();
    Ok(ForestModel { dim, trees })
}
