//! On-disk layout shared by experiments, imports and fusion.
//!
//! ```text
//! <dir>/fold_plan.csv                  sample_id,label,fold
//! <dir>/registry.json                  members and the fold-plan fingerprint
//! <dir>/members/<id>/config.json       configuration that produced the member
//! <dir>/members/<id>/probabilities.csv sample_id,fold,p_C,p_S
//! <dir>/members/<id>/metrics.json      pooled metrics (experiments only)
//! ```
//!
//! Every file declares a fingerprint; loading recomputes it and refuses
//! mismatches.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::{ClassProbs, ProbabilityMatrix};
use crate::config::{fingerprint_of, ExperimentConfig};
use crate::error::{Error, Result};
use crate::evaluation::{ExperimentResult, FoldPlan, MetricsRecord};
use crate::fusion::{Member, Provenance};
use crate::io::{probability_csv, read_file, read_probability_csv, write_file};
use crate::label::Label;

pub const REGISTRY_VERSION: u32 = 1;

/// Row sums within this distance of one are renormalized silently.
pub const SILENT_RENORM_TOL: f64 = 1e-3;
/// Row sums within this distance of one are renormalized with a warning;
/// anything further is rejected.
pub const MAX_RENORM_TOL: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub k: usize,
    pub seed: u64,
    pub sample_ids: Vec<String>,
    pub labels: Vec<Label>,
    pub assignments: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberEntry {
    pub id: String,
    pub provenance: Provenance,
    pub config_fingerprint: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    pub format_version: u32,
    pub fold_plan_fingerprint: String,
    pub members: Vec<MemberEntry>,
}

/// Describes an imported probability file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportRecord {
    pub id: String,
    pub source: String,
    pub source_sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct MetricsFile {
    config_fingerprint: String,
    classifier_id: String,
    metrics: MetricsRecord,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportReport {
    pub rows: usize,
    /// Rows rescaled with a sum error up to [`SILENT_RENORM_TOL`].
    pub renormalized_silently: usize,
    /// Rows rescaled with a larger sum error, up to [`MAX_RENORM_TOL`].
    pub renormalized_with_warning: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Workspace {
    dir: PathBuf,
    plan: PlanRecord,
    registry: Registry,
}

fn plan_csv(plan: &PlanRecord, fingerprint: &str) -> Result<Vec<u8>> {
    let mut buf = format!("# config_fingerprint={fingerprint}\n# k={} seed={}\n", plan.k, plan.seed).into_bytes();
    let mut w = csv::Writer::from_writer(&mut buf);
    w.write_record(["sample_id", "label", "fold"])?;
    for ((id, label), fold) in plan.sample_ids.iter().zip(&plan.labels).zip(&plan.assignments) {
        w.write_record([id.as_str(), label.code(), &fold.to_string()])?;
    }
    drop(w);
    Ok(buf)
}

fn parse_plan_csv(path: &Path) -> Result<(PlanRecord, Option<String>)> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::MalformedTable(format!("{} is not UTF-8", path.display())))?;
    let mut fingerprint = None;
    let (mut k, mut seed) = (None, None);
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some(fp) = line.strip_prefix("# config_fingerprint=") {
            fingerprint = Some(fp.trim().to_string());
        }
        for part in line.trim_start_matches('#').split_whitespace() {
            match part.split_once('=') {
                Some(("k", v)) => k = v.parse().ok(),
                Some(("seed", v)) => seed = v.parse().ok(),
                _ => {}
            }
        }
    }
    let (Some(k), Some(seed)) = (k, seed) else {
        return Err(Error::MalformedTable(format!("{}: missing k/seed line", path.display())));
    };
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut plan = PlanRecord {
        k,
        seed,
        sample_ids: Vec::new(),
        labels: Vec::new(),
        assignments: Vec::new(),
    };
    for record in reader.records() {
        let record = record?;
        if record.len() != 3 {
            return Err(Error::MalformedTable(format!("{}: expected 3 fields", path.display())));
        }
        plan.sample_ids.push(record[0].to_string());
        plan.labels
            .push(record[1].parse().map_err(|_| Error::MalformedTable(format!("bad label {:?}", &record[1])))?);
        plan.assignments
            .push(record[2].parse().map_err(|_| Error::MalformedTable(format!("bad fold {:?}", &record[2])))?);
    }
    FoldPlan::from_assignments(k, seed, plan.assignments.clone())?;
    Ok((plan, fingerprint))
}

fn check_fingerprint(path: &Path, declared: Option<String>, recomputed: &str) -> Result<()> {
    match declared {
        Some(d) if d == recomputed => Ok(()),
        other => Err(Error::FingerprintMismatch {
            path: path.to_path_buf(),
            declared: other.unwrap_or_else(|| "<none>".into()),
            recomputed: recomputed.to_string(),
        }),
    }
}

fn pretty_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

impl Workspace {
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn plan(&self) -> &PlanRecord {
        &self.plan
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    fn member_dir(&self, id: &str) -> PathBuf {
        self.dir.join("members").join(id)
    }

    pub fn exists(dir: &Path) -> bool {
        dir.join("registry.json").is_file()
    }

    /// Opens a workspace and verifies the fold-plan fingerprint.
    pub fn open(dir: &Path) -> Result<Self> {
        let registry_path = dir.join("registry.json");
        let registry: Registry = serde_json::from_slice(&read_file(&registry_path)?)?;
        if registry.format_version != REGISTRY_VERSION {
            return Err(Error::Config(format!(
                "unsupported workspace version {}",
                registry.format_version
            )));
        }
        let plan_path = dir.join("fold_plan.csv");
        let (plan, declared) = parse_plan_csv(&plan_path)?;
        let recomputed = fingerprint_of(&plan)?;
        check_fingerprint(&plan_path, declared, &recomputed)?;
        check_fingerprint(&registry_path, Some(registry.fold_plan_fingerprint.clone()), &recomputed)?;
        Ok(Workspace {
            dir: dir.to_path_buf(),
            plan,
            registry,
        })
    }

    /// Creates a workspace around the fold plan of `result`, or opens the
    /// existing one and checks that it uses the same plan.
    pub fn for_result(dir: &Path, result: &ExperimentResult) -> Result<Self> {
        let plan = PlanRecord {
            k: result.fold_plan.k,
            seed: result.fold_plan.seed,
            sample_ids: result.sample_ids.clone(),
            labels: result.labels.clone(),
            assignments: result.fold_plan.assignments.clone(),
        };
        if Workspace::exists(dir) {
            let ws = Workspace::open(dir)?;
            if ws.plan != plan {
                return Err(Error::Misaligned(format!(
                    "{} holds a different fold plan or sample set",
                    dir.display()
                )));
            }
            return Ok(ws);
        }
        let fingerprint = fingerprint_of(&plan)?;
        write_file(&dir.join("fold_plan.csv"), &plan_csv(&plan, &fingerprint)?)?;
        let ws = Workspace {
            dir: dir.to_path_buf(),
            plan,
            registry: Registry {
                format_version: REGISTRY_VERSION,
                fold_plan_fingerprint: fingerprint,
                members: Vec::new(),
            },
        };
        ws.save_registry()?;
        Ok(ws)
    }

    fn save_registry(&self) -> Result<()> {
        write_file(&self.dir.join("registry.json"), &pretty_json(&self.registry)?)
    }

    fn register(&mut self, entry: MemberEntry) -> Result<()> {
        self.registry.members.retain(|m| m.id != entry.id);
        self.registry.members.push(entry);
        self.registry.members.sort_by(|a, b| a.id.cmp(&b.id));
        self.save_registry()
    }

    /// Stores an experiment's matrices and metrics under its classifier id.
    pub fn add_experiment(&mut self, config: &ExperimentConfig, result: &ExperimentResult) -> Result<()> {
        let fingerprint = config.fingerprint()?;
        if fingerprint != result.config_fingerprint {
            return Err(Error::FingerprintMismatch {
                path: self.dir.clone(),
                declared: result.config_fingerprint.clone(),
                recomputed: fingerprint,
            });
        }
        let dir = self.member_dir(&result.classifier_id);
        write_file(&dir.join("config.json"), &pretty_json(config)?)?;
        write_file(
            &dir.join("probabilities.csv"),
            &probability_csv(&result.probability_matrices, Some(&fingerprint))?,
        )?;
        write_file(
            &dir.join("metrics.json"),
            &pretty_json(&MetricsFile {
                config_fingerprint: fingerprint.clone(),
                classifier_id: result.classifier_id.clone(),
                metrics: result.metrics.clone(),
            })?,
        )?;
        self.register(MemberEntry {
            id: result.classifier_id.clone(),
            provenance: Provenance::Handcrafted,
            config_fingerprint: fingerprint,
        })
    }

    /// Validates an external probability CSV against the fold plan and
    /// registers it as `id`.
    pub fn import_probabilities(&mut self, id: &str, source: &Path) -> Result<ImportReport> {
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(Error::Config(format!("invalid classifier id {id:?}")));
        }
        let raw = read_file(source)?;
        let file = read_probability_csv(source)?;
        let index: HashMap<&str, usize> = self
            .plan
            .sample_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut rows: Vec<Option<ClassProbs>> = vec![None; self.plan.sample_ids.len()];
        let mut report = ImportReport::default();
        for row in &file.rows {
            let &i = index
                .get(row.sample_id.as_str())
                .ok_or_else(|| Error::InvalidProbabilities(format!("unknown sample id {}", row.sample_id)))?;
            if row.fold != self.plan.assignments[i] {
                return Err(Error::InvalidProbabilities(format!(
                    "sample {} is listed in fold {} but belongs to fold {}",
                    row.sample_id, row.fold, self.plan.assignments[i]
                )));
            }
            if rows[i].is_some() {
                return Err(Error::InvalidProbabilities(format!("sample {} appears twice", row.sample_id)));
            }
            let p = row.probs;
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidProbabilities(format!(
                    "sample {}: probabilities {p:?} outside [0, 1]",
                    row.sample_id
                )));
            }
            let sum = p[0] + p[1];
            let err = (sum - 1.0).abs();
            if err > MAX_RENORM_TOL {
                return Err(Error::InvalidProbabilities(format!(
                    "sample {}: row sums to {sum}",
                    row.sample_id
                )));
            } else if err > SILENT_RENORM_TOL {
                report.renormalized_with_warning += 1;
            } else if err > 0.0 {
                report.renormalized_silently += 1;
            }
            rows[i] = Some(if err > 0.0 { [p[0] / sum, p[1] / sum] } else { p });
            report.rows += 1;
        }
        let mut missing_folds: Vec<usize> = rows
            .iter()
            .zip(&self.plan.assignments)
            .filter(|(r, _)| r.is_none())
            .map(|(_, &f)| f)
            .collect();
        missing_folds.sort_unstable();
        missing_folds.dedup();
        if !missing_folds.is_empty() {
            let folds: Vec<String> = missing_folds.iter().map(usize::to_string).collect();
            return Err(Error::InvalidProbabilities(format!(
                "coverage gap: fold(s) {} incomplete",
                folds.join(", ")
            )));
        }
        if report.renormalized_with_warning > 0 {
            log::warn!(
                "event=renormalized id={id} rows={} tolerance={SILENT_RENORM_TOL}",
                report.renormalized_with_warning
            );
        }

        let record = ImportRecord {
            id: id.to_string(),
            source: source.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            source_sha256: hex::encode(Sha256::digest(&raw)),
        };
        let fingerprint = fingerprint_of(&record)?;
        let rows: Vec<ClassProbs> = rows.into_iter().map(|r| r.expect("coverage checked")).collect();
        let matrices = self.matrices_from_rows(id, &rows)?;
        let dir = self.member_dir(id);
        write_file(&dir.join("config.json"), &pretty_json(&record)?)?;
        write_file(&dir.join("probabilities.csv"), &probability_csv(&matrices, Some(&fingerprint))?)?;
        let _ = std::fs::remove_file(dir.join("metrics.json"));
        self.register(MemberEntry {
            id: id.to_string(),
            provenance: Provenance::Imported,
            config_fingerprint: fingerprint,
        })?;
        Ok(report)
    }

    fn matrices_from_rows(&self, id: &str, rows: &[ClassProbs]) -> Result<Vec<ProbabilityMatrix>> {
        (0..self.plan.k)
            .map(|fold| {
                let idx: Vec<usize> = (0..rows.len()).filter(|&i| self.plan.assignments[i] == fold).collect();
                ProbabilityMatrix::new(
                    id,
                    fold,
                    idx.iter().map(|&i| self.plan.sample_ids[i].clone()).collect(),
                    idx.iter().map(|&i| rows[i]).collect(),
                )
            })
            .collect()
    }

    /// Loads a registered member after checking its fingerprints.
    pub fn load_member(&self, id: &str) -> Result<Member> {
        let entry = self
            .registry
            .members
            .iter()
            .find(|m| m.id == id)
            .ok_or_else(|| Error::Config(format!("no member {id:?} in {}", self.dir.display())))?;
        let dir = self.member_dir(id);
        let config_path = dir.join("config.json");
        let config: serde_json::Value = serde_json::from_slice(&read_file(&config_path)?)?;
        let recomputed = fingerprint_of(&config)?;
        check_fingerprint(&config_path, Some(entry.config_fingerprint.clone()), &recomputed)?;
        let proba_path = dir.join("probabilities.csv");
        let file = read_probability_csv(&proba_path)?;
        check_fingerprint(&proba_path, file.fingerprint, &recomputed)?;

        let mut by_fold: Vec<(Vec<String>, Vec<ClassProbs>)> = vec![(Vec::new(), Vec::new()); self.plan.k];
        for row in file.rows {
            let slot = by_fold
                .get_mut(row.fold)
                .ok_or_else(|| Error::InvalidProbabilities(format!("fold {} out of range", row.fold)))?;
            slot.0.push(row.sample_id);
            slot.1.push(row.probs);
        }
        let matrices = by_fold
            .into_iter()
            .enumerate()
            .map(|(fold, (ids, rows))| ProbabilityMatrix::new(id, fold, ids, rows))
            .collect::<Result<Vec<_>>>()?;
        let member = Member::from_matrices(id, entry.provenance, &matrices)?;
        let mut expected = self.plan.sample_ids.clone();
        expected.sort();
        if member.sample_ids != expected {
            return Err(Error::Misaligned(format!("member {id} does not cover the fold plan")));
        }
        Ok(member)
    }

    /// Ground-truth labels by sample id.
    pub fn truth(&self) -> HashMap<String, Label> {
        self.plan
            .sample_ids
            .iter()
            .cloned()
            .zip(self.plan.labels.iter().copied())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> PlanRecord {
        PlanRecord {
            k: 2,
            seed: 42,
            sample_ids: vec!["C/a".into(), "C/b".into(), "S/c".into(), "S/d".into()],
            labels: vec![Label::Control, Label::Control, Label::Sick, Label::Sick],
            assignments: vec![0, 1, 1, 0],
        }
    }

    fn workspace(dir: &Path) -> Workspace {
        let plan = plan();
        let fingerprint = fingerprint_of(&plan).unwrap();
        write_file(&dir.join("fold_plan.csv"), &plan_csv(&plan, &fingerprint).unwrap()).unwrap();
        let ws = Workspace {
            dir: dir.to_path_buf(),
            plan,
            registry: Registry {
                format_version: REGISTRY_VERSION,
                fold_plan_fingerprint: fingerprint,
                members: Vec::new(),
            },
        };
        ws.save_registry().unwrap();
        Workspace::open(dir).unwrap()
    }

    #[test]
    fn import_policy() {
        let tmp = tempfile::tempdir().unwrap();
        let mut ws = workspace(tmp.path());
        let src = tmp.path().join("in.csv");

        write_file(
            &src,
            b"sample_id,fold,p_C,p_S\nC/a,0,0.9,0.1\nS/d,0,0.2,0.79\nC/b,1,0.6,0.4\nS/c,1,0.3,0.7000001\n",
        )
        .unwrap();
        let report = ws.import_probabilities("cnn", &src).unwrap();
        assert_eq!(report.rows, 4);
        assert_eq!(report.renormalized_with_warning, 1);
        assert_eq!(report.renormalized_silently, 1);
        let m = ws.load_member("cnn").unwrap();
        assert_eq!(m.provenance, Provenance::Imported);
        assert!(m.rows.iter().all(|r| (r[0] + r[1] - 1.0).abs() < 1e-12));

        write_file(&src, b"sample_id,fold,p_C,p_S\nC/a,0,0.9,0.1\nS/d,0,0.2,0.8\n").unwrap();
        let err = ws.import_probabilities("partial", &src).unwrap_err();
        assert!(err.to_string().contains("fold(s) 1"), "{err}");

        write_file(&src, b"sample_id,fold,p_C,p_S\nC/zz,0,0.9,0.1\n").unwrap();
        assert!(ws.import_probabilities("ghost", &src).unwrap_err().to_string().contains("unknown sample"));

        write_file(
            &src,
            b"sample_id,fold,p_C,p_S\nC/a,0,0.5,0.3\nS/d,0,0.2,0.8\nC/b,1,0.6,0.4\nS/c,1,0.3,0.7\n",
        )
        .unwrap();
        assert!(ws.import_probabilities("bad_sum", &src).is_err());
    }

    #[test]
    fn tampered_member_is_refused() {
        let tmp = tempfile::tempdir().unwrap();
        let mut ws = workspace(tmp.path());
        let src = tmp.path().join("in.csv");
        write_file(
            &src,
            b"sample_id,fold,p_C,p_S\nC/a,0,0.9,0.1\nS/d,0,0.2,0.8\nC/b,1,0.6,0.4\nS/c,1,0.3,0.7\n",
        )
        .unwrap();
        ws.import_probabilities("cnn", &src).unwrap();
        let cfg = tmp.path().join("members/cnn/config.json");
        let text = std::fs::read_to_string(&cfg).unwrap().replace("in.csv", "other.csv");
        std::fs::write(&cfg, text).unwrap();
        assert!(matches!(ws.load_member("cnn"), Err(Error::FingerprintMismatch { .. })));
    }

    #[test]
    fn tampered_plan_is_refused() {
        let tmp = tempfile::tempdir().unwrap();
        workspace(tmp.path());
        let p = tmp.path().join("fold_plan.csv");
        let text = std::fs::read_to_string(&p).unwrap().replace("C/b,C,1", "C/b,C,0");
        std::fs::write(&p, text).unwrap();
        assert!(matches!(Workspace::open(tmp.path()), Err(Error::FingerprintMismatch { .. })));
    }
}
