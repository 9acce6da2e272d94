//! Average rankings over score tables and one-sided Wilcoxon signed-rank
//! tests.

use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest effective sample size evaluated with the exact distribution.
pub const EXACT_MAX_N: usize = 20;

/// Rows of method scores, optionally grouped (e.g. by dataset).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub groups: Option<Vec<String>>,
    pub rows: Vec<String>,
    pub methods: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl ScoreTable {
    pub fn new(groups: Option<Vec<String>>, rows: Vec<String>, methods: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != rows.len() || groups.as_ref().is_some_and(|g| g.len() != rows.len()) {
            return Err(Error::MalformedTable("row label count does not match the data".into()));
        }
        if values.is_empty() {
            return Err(Error::MalformedTable("score table has no rows".into()));
        }
        if methods.len() < 2 {
            return Err(Error::MalformedTable("score table needs at least 2 methods".into()));
        }
        for (label, row) in rows.iter().zip(&values) {
            if row.len() != methods.len() {
                return Err(Error::MalformedTable(format!(
                    "row {label} has {} entries, expected {}",
                    row.len(),
                    methods.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::MalformedTable(format!("row {label} has a non-finite entry")));
            }
        }
        Ok(ScoreTable {
            groups,
            rows,
            methods,
            values,
        })
    }

    /// Header `row,<methods…>` or `group,row,<methods…>`.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let bytes = crate::io::read_file(path)?;
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .flexible(true)
            .from_reader(bytes.as_slice());
        let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let grouped = header.first().is_some_and(|h| h == "group");
        let skip = if grouped { 2 } else { 1 };
        if header.len() <= skip {
            return Err(Error::MalformedTable(format!("{}: no method columns", path.display())));
        }
        let methods = header[skip..].to_vec();
        let (mut groups, mut rows, mut values) = (Vec::new(), Vec::new(), Vec::new());
        for record in reader.records() {
            let record = record?;
            if record.len() != header.len() {
                return Err(Error::MalformedTable(format!(
                    "{}: row has {} fields, header has {}",
                    path.display(),
                    record.len(),
                    header.len()
                )));
            }
            if grouped {
                groups.push(record[0].trim().to_string());
            }
            rows.push(record[skip - 1].trim().to_string());
            values.push(
                record
                    .iter()
                    .skip(skip)
                    .map(|f| {
                        f.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::MalformedTable(format!("{f:?} is not a number")))
                    })
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        ScoreTable::new(grouped.then_some(groups), rows, methods, values)
    }
}

/// Ranks by descending value (1 = best); ties share the mean of their ranks.
pub fn rank_descending(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    average_tied_ranks(&order, |i| values[i])
}

fn average_tied_ranks(order: &[usize], key: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut ranks = vec![0.0; order.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && key(order[end]) == key(order[start]) {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let shared = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = shared;
        }
        start = end;
    }
    ranks
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupRanks {
    pub group: String,
    pub average_ranks: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FriedmanRanks {
    pub methods: Vec<String>,
    pub row_ranks: Vec<Vec<f64>>,
    /// Mean rank per method over all rows.
    pub average_ranks: Vec<f64>,
    /// Per-group means, in first-appearance order, when the table is grouped.
    pub groups: Vec<GroupRanks>,
    /// Mean of the group averages, or `average_ranks` when ungrouped.
    pub overall: Vec<f64>,
}

fn column_means<'a>(rows: impl Iterator<Item = &'a Vec<f64>>, m: usize) -> Vec<f64> {
    let mut sum = vec![0.0; m];
    let mut n = 0usize;
    for r in rows {
        for (s, v) in sum.iter_mut().zip(r) {
            *s += v;
        }
        n += 1;
    }
    sum.into_iter().map(|s| s / n as f64).collect()
}

pub fn friedman_avg_ranks(table: &ScoreTable) -> FriedmanRanks {
    let m = table.methods.len();
    let row_ranks: Vec<Vec<f64>> = table.values.iter().map(|r| rank_descending(r)).collect();
    let average_ranks = column_means(row_ranks.iter(), m);
    let mut groups = Vec::new();
    if let Some(labels) = &table.groups {
        let mut names: Vec<&String> = Vec::new();
        for g in labels {
            if !names.contains(&g) {
                names.push(g);
            }
        }
        for name in names {
            let rows = row_ranks.iter().zip(labels).filter(|(_, g)| *g == name).map(|(r, _)| r);
            groups.push(GroupRanks {
                group: name.clone(),
                average_ranks: column_means(rows, m),
            });
        }
    }
    let overall = if groups.is_empty() {
        average_ranks.clone()
    } else {
        column_means(groups.iter().map(|g| &g.average_ranks), m)
    };
    FriedmanRanks {
        methods: table.methods.clone(),
        row_ranks,
        average_ranks,
        groups,
        overall,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    NormalApprox,
}

/// One-sided test of "a is greater than b".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Rank sum of the pairs where b exceeds a.
    pub statistic: f64,
    pub n_effective: usize,
    pub p_value: f64,
    pub method: WilcoxonMethod,
    /// Standardized statistic without continuity correction.
    pub z: f64,
    /// Lower-tail normal probability of `z`; shown for comparison with
    /// tables that report the uncorrected approximation.
    pub p_normal_uncorrected: f64,
    /// All differences were zero; `p_value` is 1.
    pub degenerate: bool,
}

fn std_normal_cdf(z: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").cdf(z)
}

/// Number of the `2^n` sign assignments whose negative rank sum is at most
/// `limit`, with ranks given in half units.
fn exact_lower_tail(half_ranks: &[usize], limit: usize) -> f64 {
    let total: usize = half_ranks.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    for &r in half_ranks {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let hits: u64 = counts[..=limit.min(total)].iter().sum();
    hits as f64 / (1u64 << half_ranks.len()) as f64
}

/// Paired one-sided signed-rank test with alternative "a > b".
///
/// Zero differences are dropped and tied magnitudes share average ranks.
/// Up to [`EXACT_MAX_N`] pairs the p-value is exact; above that it uses the
/// tie-corrected normal approximation with continuity correction.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("scores must be finite".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            n_effective: 0,
            p_value: 1.0,
            method: WilcoxonMethod::Exact,
            z: 0.0,
            p_normal_uncorrected: 1.0,
            degenerate: true,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let ranks = average_tied_ranks(&order, |i| diffs[i].abs());
    let statistic: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d < 0.0).map(|(r, _)| r).sum();

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted: Vec<f64> = ranks.clone();
    sorted.sort_by(f64::total_cmp);
    for chunk in sorted.chunk_by(|x, y| x == y) {
        let t = chunk.len() as f64;
        tie_term += t * t * t - t;
    }
    let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0).sqrt();
    let (z, p_normal_uncorrected) = if sd > 0.0 {
        let z = (statistic - mean) / sd;
        (z, std_normal_cdf(z))
    } else {
        (0.0, 1.0)
    };

    let (p_value, method) = if n <= EXACT_MAX_N {
        // Average ranks are multiples of one half.
        let half: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
        let limit = (statistic * 2.0).round() as usize;
        (exact_lower_tail(&half, limit), WilcoxonMethod::Exact)
    } else {
        let p = if sd > 0.0 {
            std_normal_cdf((statistic - mean + 0.5) / sd)
        } else {
            1.0
        };
        (p.min(1.0), WilcoxonMethod::NormalApprox)
    };
    Ok(WilcoxonResult {
        statistic,
        n_effective: n,
        p_value,
        method,
        z,
        p_normal_uncorrected,
        degenerate: false,
    })
}

/// Tests whether the five best fused scores exceed the five best unfused ones.
pub fn fusion_significance(top5_fused: &[f64], top5_unfused: &[f64]) -> Result<WilcoxonResult> {
    if top5_fused.len() != 5 || top5_unfused.len() != 5 {
        return Err(Error::InvalidParameter(format!(
            "expected 5 scores per side, got {} and {}",
            top5_fused.len(),
            top5_unfused.len()
        )));
    }
    wilcoxon_signed_rank(top5_fused, top5_unfused)
}

/// Plain-text rank table: one line per row, then averages.
pub fn ranks_table(table: &ScoreTable, ranks: &FriedmanRanks) -> String {
    let label_width = table
        .rows
        .iter()
        .map(String::len)
        .chain(ranks.groups.iter().map(|g| g.group.len() + 9))
        .max()
        .unwrap_or(0)
        .max("Overall average".len());
    let col: Vec<usize> = ranks.methods.iter().map(|m| m.len().max(6)).collect();
    let line = |label: &str, values: &[f64]| {
        let mut s = format!("{label:<label_width$}");
        for (v, w) in values.iter().zip(&col) {
            s.push_str(&format!("  {v:>w$.2}"));
        }
        s.push('\n');
        s
    };
    let mut out = format!("{:<label_width$}", "");
    for (m, w) in ranks.methods.iter().zip(&col) {
        out.push_str(&format!("  {m:>w$}"));
    }
    out.push('\n');
    for (label, r) in table.rows.iter().zip(&ranks.row_ranks) {
        out.push_str(&line(label, r));
    }
    for g in &ranks.groups {
        out.push_str(&line(&format!("{} average", g.group), &g.average_ranks));
    }
    out.push_str(&line("Overall average", &ranks.overall));
    out
}
