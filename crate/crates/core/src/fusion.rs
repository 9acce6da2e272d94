//! Late fusion of class posteriors by the max, sum and product rules.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassProbs, ProbabilityMatrix};
use crate::error::{Error, Result};
use crate::evaluation::{Confusion, Scores};
use crate::label::{argmax, Label};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionRule {
    Max,
    Sum,
    Product,
}

impl FusionRule {
    pub const ALL: [FusionRule; 3] = [FusionRule::Max, FusionRule::Sum, FusionRule::Product];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionRule::Max => "max",
            FusionRule::Sum => "sum",
            FusionRule::Product => "product",
        }
    }

    /// Combines one sample's rows class by class. Scores are not
    /// renormalized.
    pub fn combine(self, rows: &[ClassProbs]) -> ClassProbs {
        let mut out = match self {
            FusionRule::Max => [f64::NEG_INFINITY; 2],
            FusionRule::Sum => [0.0; 2],
            FusionRule::Product => [1.0; 2],
        };
        for row in rows {
            for k in 0..2 {
                out[k] = match self {
                    FusionRule::Max => out[k].max(row[k]),
                    FusionRule::Sum => out[k] + row[k],
                    FusionRule::Product => out[k] * row[k],
                };
            }
        }
        out
    }
}

impl fmt::Display for FusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusionRule::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown fusion rule {s:?}")))
    }
}

/// Whether a member's probabilities were produced here or imported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Handcrafted,
    Imported,
}

impl Provenance {
    /// `H` or `N` (non-handcrafted).
    pub fn code(self) -> char {
        match self {
            Provenance::Handcrafted => 'H',
            Provenance::Imported => 'N',
        }
    }
}

/// One classifier's posteriors over every sample, ordered by sample id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub id: String,
    pub provenance: Provenance,
    pub sample_ids: Vec<String>,
    pub folds: Vec<usize>,
    pub rows: Vec<ClassProbs>,
}

impl Member {
    /// Pools per-fold matrices; a sample may appear in only one fold.
    pub fn from_matrices(id: impl Into<String>, provenance: Provenance, matrices: &[ProbabilityMatrix]) -> Result<Self> {
        let id = id.into();
        let mut entries: Vec<(String, usize, ClassProbs)> = matrices
            .iter()
            .flat_map(|m| {
                m.sample_ids
                    .iter()
                    .zip(&m.rows)
                    .map(move |(s, r)| (s.clone(), m.fold_id, *r))
            })
            .collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Misaligned(format!("{id}: sample {} appears twice", w[0].0)));
        }
        Ok(Member {
            id,
            provenance,
            sample_ids: entries.iter().map(|e| e.0.clone()).collect(),
            folds: entries.iter().map(|e| e.1).collect(),
            rows: entries.iter().map(|e| e.2).collect(),
        })
    }

    pub fn predictions(&self) -> Vec<Label> {
        self.rows.iter().map(argmax).collect()
    }
}

/// Fused scores and decisions, in the members' sample order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusedOutput {
    pub rule: FusionRule,
    pub sample_ids: Vec<String>,
    pub scores: Vec<ClassProbs>,
    pub predictions: Vec<Label>,
}

impl FusedOutput {
    /// Scores rescaled to sum to one, for display only.
    pub fn normalized_scores(&self) -> Vec<ClassProbs> {
        self.scores
            .iter()
            .map(|s| {
                let t = s[0] + s[1];
                if t > 0.0 {
                    [s[0] / t, s[1] / t]
                } else {
                    [0.5, 0.5]
                }
            })
            .collect()
    }
}

fn check_aligned(members: &[&Member]) -> Result<()> {
    let first = members
        .first()
        .ok_or_else(|| Error::InvalidParameter("fusion needs at least one member".into()))?;
    for m in &members[1..] {
        if m.sample_ids != first.sample_ids {
            return Err(Error::Misaligned(format!(
                "{} and {} cover different samples",
                first.id, m.id
            )));
        }
        if m.folds != first.folds {
            return Err(Error::Misaligned(format!(
                "{} and {} use different fold plans",
                first.id, m.id
            )));
        }
    }
    Ok(())
}

/// Applies `rule` per sample; the decision is the argmax with ties to C.
pub fn fuse(members: &[&Member], rule: FusionRule) -> Result<FusedOutput> {
    check_aligned(members)?;
    let n = members[0].rows.len();
    let mut buf = Vec::with_capacity(members.len());
    let scores: Vec<ClassProbs> = (0..n)
        .map(|i| {
            buf.clear();
            buf.extend(members.iter().map(|m| m.rows[i]));
            rule.combine(&buf)
        })
        .collect();
    Ok(FusedOutput {
        rule,
        sample_ids: members[0].sample_ids.clone(),
        predictions: scores.iter().map(argmax).collect(),
        scores,
    })
}

/// Every subset of `0..m` with at least two members: by size, then
/// lexicographically.
pub fn enumerate_combinations(m: usize) -> Result<Vec<Vec<usize>>> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "fusion needs at least 2 members, got {m}"
        )));
    }
    if m >= usize::BITS as usize {
        return Err(Error::InvalidParameter(format!("too many members: {m}")));
    }
    let mut subsets: Vec<Vec<usize>> = (0u64..1 << m)
        .filter(|mask| mask.count_ones() >= 2)
        .map(|mask| (0..m).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(subsets)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub members: Vec<String>,
    /// One `H`/`N` code per member.
    pub types: String,
    pub rule: FusionRule,
    pub f_measure: f64,
    pub accuracy: f64,
}

/// Evaluates every (subset, rule) pair against `truth` and ranks by
/// descending F-measure (class S positive). Equal scores keep the
/// enumeration order.
pub fn sweep(members: &[Member], rules: &[FusionRule], truth: &HashMap<String, Label>) -> Result<Vec<SweepEntry>> {
    let refs: Vec<&Member> = members.iter().collect();
    check_aligned(&refs)?;
    let labels: Vec<Label> = members[0]
        .sample_ids
        .iter()
        .map(|id| {
            truth
                .get(id)
                .copied()
                .ok_or_else(|| Error::Misaligned(format!("no ground truth for sample {id}")))
        })
        .collect::<Result<_>>()?;
    let cells: Vec<(Vec<usize>, FusionRule)> = enumerate_combinations(members.len())?
        .into_iter()
        .flat_map(|s| rules.iter().map(move |&r| (s.clone(), r)))
        .collect();
    let mut entries: Vec<SweepEntry> = cells
        .into_par_iter()
        .map(|(subset, rule)| {
            let chosen: Vec<&Member> = subset.iter().map(|&i| &members[i]).collect();
            let fused = fuse(&chosen, rule)?;
            let scores = Scores::from_confusion(&Confusion::from_labels(&fused.predictions, &labels, Label::Sick));
            Ok(SweepEntry {
                members: chosen.iter().map(|m| m.id.clone()).collect(),
                types: chosen.iter().map(|m| m.provenance.code()).collect(),
                rule,
                f_measure: scores.f_measure,
                accuracy: scores.accuracy,
            })
        })
        .collect::<Result<_>>()?;
    entries.sort_by(|a, b| b.f_measure.total_cmp(&a.f_measure));
    Ok(entries)
}

/// `rank,classifiers,types,rule,f_measure,accuracy`.
pub fn sweep_csv(entries: &[SweepEntry], fingerprint: Option<&str>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    if let Some(fp) = fingerprint {
        buf.extend_from_slice(format!("# config_fingerprint={fp}\n").as_bytes());
    }
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(["rank", "classifiers", "types", "rule", "f_measure", "accuracy"])?;
    for (i, e) in entries.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            e.members.join("+"),
            e.types.clone(),
            e.rule.to_string(),
            e.f_measure.to_string(),
            e.accuracy.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::MalformedTable(e.to_string()))
}

/// Aligned plain-text table of the ranking.
pub fn sweep_table(entries: &[SweepEntry]) -> String {
    let names: Vec<String> = entries.iter().map(|e| e.members.join(", ")).collect();
    let width = names.iter().map(String::len).max().unwrap_or(0).max("Classifiers".len());
    let types_width = entries.iter().map(|e| e.types.len()).max().unwrap_or(0).max("Types".len());
    let mut out = format!(
        "{:>4}  {:<width$}  {:<types_width$}  {:<7}  {:>9}\n",
        "Rank", "Classifiers", "Types", "Rule", "F-measure"
    );
    for (i, (e, name)) in entries.iter().zip(&names).enumerate() {
        out.push_str(&format!(
            "{:>4}  {:<width$}  {:<types_width$}  {:<7}  {:>9.4}\n",
            i + 1,
            name,
            e.types,
            e.rule.as_str(),
            e.f_measure
        ));
    }
    out
}
