//! Experiment configuration and its fingerprint.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifiers::ClassifierSpec;
use crate::dataset::{extract_features, Dataset};
use crate::descriptors::Descriptor;
use crate::error::{Error, Result};
use crate::io::FeatureTable;
use crate::preprocess::{edge_enhance, pseudo_color_hsv, to_grayscale, EdgeFilter};
use crate::raster::ImageBuffer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetName {
    #[serde(rename = "AIA")]
    Aia,
    #[serde(rename = "TW")]
    Tw,
    #[serde(rename = "D")]
    D,
}

impl DatasetName {
    pub const ALL: [DatasetName; 3] = [DatasetName::Aia, DatasetName::Tw, DatasetName::D];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::Aia => "AIA",
            DatasetName::Tw => "TW",
            DatasetName::D => "D",
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DatasetName::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown dataset {s:?}, expected AIA, TW or D")))
    }
}

/// `<root>/<name>/{C,S}/`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    pub root: PathBuf,
    pub name: DatasetName,
}

/// One image transform of the pre-processing chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PreprocessStep {
    /// RGB to luma; a no-op on gray images.
    Grayscale,
    /// Gray to the HSV pseudo-color map; RGB input is converted to gray first.
    PseudoColorHsv,
    Edge { filter: EdgeFilter },
}

impl PreprocessStep {
    pub fn apply(&self, img: &ImageBuffer) -> Result<ImageBuffer> {
        let gray = |img: &ImageBuffer| {
            if img.channels() == 1 {
                Ok(img.clone())
            } else {
                to_grayscale(img)
            }
        };
        match self {
            PreprocessStep::Grayscale => gray(img),
            PreprocessStep::PseudoColorHsv => pseudo_color_hsv(&gray(img)?),
            PreprocessStep::Edge { filter } => Ok(edge_enhance(img, *filter)),
        }
    }
}

pub fn apply_chain(img: ImageBuffer, steps: &[PreprocessStep]) -> Result<ImageBuffer> {
    steps.iter().try_fold(img, |img, step| step.apply(&img))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    pub top_n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldConfig {
    #[serde(default = "default_k")]
    pub k: usize,
}

impl Default for FoldConfig {
    fn default() -> Self {
        FoldConfig { k: default_k() }
    }
}

fn default_k() -> usize {
    10
}

pub const DEFAULT_SEED: u64 = 42;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// A complete, reproducible experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Classifier identifier used in workspaces and fusion reports.
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetRef>,
    #[serde(default)]
    pub preprocessing: Vec<PreprocessStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptor: Option<Descriptor>,
    /// Precomputed feature CSV used instead of `descriptor`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    pub classifier: ClassifierSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionConfig>,
    #[serde(default)]
    pub folds: FoldConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_slice(bytes).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(Error::Config(format!(
                "id {:?} must be non-empty and use only letters, digits, '-', '_' or '.'",
                self.id
            )));
        }
        match (&self.descriptor, &self.features) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("set either descriptor or features, not both".into()))
            }
            (None, None) => return Err(Error::Config("one of descriptor or features is required".into())),
            (Some(_), None) if self.dataset.is_none() => {
                return Err(Error::Config("descriptor extraction needs a dataset".into()))
            }
            _ => {}
        }
        if self.features.is_some() && !self.preprocessing.is_empty() {
            return Err(Error::Config("preprocessing does not apply to a feature file".into()));
        }
        if self.folds.k < 2 {
            return Err(Error::Config(format!("folds.k must be at least 2, got {}", self.folds.k)));
        }
        if let Some(s) = self.selection {
            if s.top_n == 0 {
                return Err(Error::Config("selection.top_n must be positive".into()));
            }
        }
        self.classifier.validate()
    }

    /// Hex SHA-256 of the canonical JSON form (object keys sorted).
    pub fn fingerprint(&self) -> Result<String> {
        fingerprint_of(self)
    }

    /// Extracts features from the dataset or reads the feature file.
    pub fn load_features(&self) -> Result<FeatureTable> {
        match (&self.descriptor, &self.features, &self.dataset) {
            (_, Some(path), _) => FeatureTable::read_csv(path),
            (Some(descriptor), None, Some(ds)) => {
                let dataset = Dataset::ingest(&ds.root, ds.name)?;
                extract_features(&dataset, &self.preprocessing, descriptor)
            }
            _ => Err(Error::Config("nothing to load features from".into())),
        }
    }
}

/// Hex SHA-256 of the canonical JSON form of any serializable value.
pub fn fingerprint_of<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Value keeps object keys in sorted order.
    let canonical = serde_json::to_vec(&serde_json::to_value(value)?)?;
    Ok(hex::encode(Sha256::digest(&canonical)))
}
