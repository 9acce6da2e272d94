//! CSV formats for feature tables and probability matrices.
//!
//! Files written here start with a `# config_fingerprint=<hex>` line that
//! identifies the configuration which produced them.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassProbs, LabeledDataset, ProbabilityMatrix};
use crate::error::{Error, Result};
use crate::label::Label;

const FINGERPRINT_PREFIX: &str = "# config_fingerprint=";

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Splits off the fingerprint comment and returns a reader over the rest.
fn open_table(path: &Path) -> Result<(Option<String>, csv::Reader<std::io::Cursor<Vec<u8>>>)> {
    let bytes = read_file(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Error::MalformedTable(format!("{} is not UTF-8", path.display())))?;
    let fingerprint = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix(FINGERPRINT_PREFIX))
        .map(|s| s.trim().to_string());
    let reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(std::io::Cursor::new(bytes));
    Ok((fingerprint, reader))
}

fn table_writer(fingerprint: Option<&str>) -> csv::Writer<Vec<u8>> {
    let mut buf = Vec::new();
    if let Some(fp) = fingerprint {
        buf.extend_from_slice(format!("{FINGERPRINT_PREFIX}{fp}\n").as_bytes());
    }
    csv::Writer::from_writer(buf)
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::MalformedTable(format!("{what}: {field:?} is not a number")))
}

fn parse_label(field: &str) -> Result<Label> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::MalformedTable(format!("unknown label {field:?}")))
}

/// Feature rows keyed by sample id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub sample_ids: Vec<String>,
    pub labels: Vec<Label>,
    pub features: Vec<Vec<f64>>,
    /// Fingerprint declared by the file this table was read from.
    #[serde(skip)]
    pub fingerprint: Option<String>,
}

impl FeatureTable {
    pub fn new(sample_ids: Vec<String>, labels: Vec<Label>, features: Vec<Vec<f64>>) -> Result<Self> {
        if sample_ids.len() != labels.len() || labels.len() != features.len() {
            return Err(Error::InvalidDataset("feature table columns have different lengths".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = sample_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::InvalidDataset(format!("duplicate sample id {dup}")));
        }
        // Validates dimensions and finiteness.
        LabeledDataset::new(features.clone(), labels.clone())?;
        Ok(FeatureTable {
            sample_ids,
            labels,
            features,
            fingerprint: None,
        })
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn to_dataset(&self) -> Result<LabeledDataset> {
        LabeledDataset::new(self.features.clone(), self.labels.clone())
    }

    /// `sample_id,label,f0,f1,…`.
    pub fn to_csv(&self, fingerprint: Option<&str>) -> Result<Vec<u8>> {
        let mut w = table_writer(fingerprint);
        let mut header = vec!["sample_id".to_string(), "label".to_string()];
        header.extend((0..self.dim()).map(|j| format!("f{j}")));
        w.write_record(&header)?;
        for ((id, label), row) in self.sample_ids.iter().zip(&self.labels).zip(&self.features) {
            let mut record = vec![id.clone(), label.code().to_string()];
            record.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        w.into_inner().map_err(|e| Error::MalformedTable(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path, fingerprint: Option<&str>) -> Result<()> {
        write_file(path, &self.to_csv(fingerprint)?)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let (fingerprint, mut reader) = open_table(path)?;
        let header = reader.headers()?.clone();
        if header.len() < 3 || &header[0] != "sample_id" || &header[1] != "label" {
            return Err(Error::MalformedTable(format!(
                "{}: expected header sample_id,label,f0,...",
                path.display()
            )));
        }
        let (mut ids, mut labels, mut features) = (Vec::new(), Vec::new(), Vec::new());
        for record in reader.records() {
            let record = record?;
            ids.push(record[0].to_string());
            labels.push(parse_label(&record[1])?);
            features.push(
                record
                    .iter()
                    .skip(2)
                    .map(|f| parse_f64(f, "feature"))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let mut table = FeatureTable::new(ids, labels, features)?;
        table.fingerprint = fingerprint;
        Ok(table)
    }
}

/// One line of a probability CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRow {
    pub sample_id: String,
    pub fold: usize,
    pub probs: ClassProbs,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityFile {
    pub fingerprint: Option<String>,
    pub rows: Vec<ProbabilityRow>,
}

/// `sample_id,fold,p_C,p_S`, fold by fold.
pub fn probability_csv(matrices: &[ProbabilityMatrix], fingerprint: Option<&str>) -> Result<Vec<u8>> {
    let mut w = table_writer(fingerprint);
    w.write_record(["sample_id", "fold", "p_C", "p_S"])?;
    for m in matrices {
        for (id, row) in m.sample_ids.iter().zip(&m.rows) {
            w.write_record([
                id.clone(),
                m.fold_id.to_string(),
                row[0].to_string(),
                row[1].to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| Error::MalformedTable(e.to_string()))
}

/// Parses a probability CSV without checking the rows.
pub fn read_probability_csv(path: &Path) -> Result<ProbabilityFile> {
    let (fingerprint, mut reader) = open_table(path)?;
    let header = reader.headers()?.clone();
    if header.iter().map(str::trim).collect::<Vec<_>>() != ["sample_id", "fold", "p_C", "p_S"] {
        return Err(Error::MalformedTable(format!(
            "{}: expected header sample_id,fold,p_C,p_S",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != 4 {
            return Err(Error::MalformedTable(format!("row has {} fields", record.len())));
        }
        rows.push(ProbabilityRow {
            sample_id: record[0].trim().to_string(),
            fold: record[1]
                .trim()
                .parse()
                .map_err(|_| Error::MalformedTable(format!("bad fold {:?}", &record[1])))?,
            probs: [parse_f64(&record[2], "p_C")?, parse_f64(&record[3], "p_S")?],
        });
    }
    Ok(ProbabilityFile { fingerprint, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_csv_round_trip() {
        let t = FeatureTable::new(
            vec!["C/a.png".into(), "S/b.png".into()],
            vec![Label::Control, Label::Sick],
            vec![vec![0.1, 1.0 / 3.0], vec![0.0, 2.5e-17]],
        )
        .unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("f.csv");
        t.write_csv(&p, Some("abc")).unwrap();
        let back = FeatureTable::read_csv(&p).unwrap();
        assert_eq!(back.features, t.features);
        assert_eq!(back.sample_ids, t.sample_ids);
        assert_eq!(back.fingerprint.as_deref(), Some("abc"));
    }

    #[test]
    fn probability_csv_round_trip() {
        let m = ProbabilityMatrix::new("x", 3, vec!["C/a".into()], vec![[0.25, 0.75]]).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("p.csv");
        write_file(&p, &probability_csv(&[m], Some("ff")).unwrap()).unwrap();
        let f = read_probability_csv(&p).unwrap();
        assert_eq!(f.fingerprint.as_deref(), Some("ff"));
        assert_eq!(
            f.rows,
            vec![ProbabilityRow {
                sample_id: "C/a".into(),
                fold: 3,
                probs: [0.25, 0.75]
            }]
        );
    }

    #[test]
    fn malformed_tables() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("bad.csv");
        write_file(&p, b"id,fold,a,b\nx,0,0.5,0.5\n").unwrap();
        assert!(matches!(read_probability_csv(&p), Err(Error::MalformedTable(_))));
        write_file(&p, b"sample_id,fold,p_C,p_S\nx,0,half,0.5\n").unwrap();
        assert!(matches!(read_probability_csv(&p), Err(Error::MalformedTable(_))));
        assert!(matches!(
            read_probability_csv(&tmp.path().join("none.csv")),
            Err(Error::MissingPath(_))
        ));
    }
}
