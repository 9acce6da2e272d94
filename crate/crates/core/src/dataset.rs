//! Dataset ingestion from `<root>/<name>/{C,S}/` image folders.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{apply_chain, DatasetName, PreprocessStep};
use crate::descriptors::Descriptor;
use crate::error::{Error, Result};
use crate::io::FeatureTable;
use crate::label::Label;
use crate::raster::ImageBuffer;

const IMAGE_EXTENSIONS: [&str; 5] = ["png", "jpg", "jpeg", "tif", "tiff"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    /// `<label>/<file name>`, unique within a dataset.
    pub id: String,
    pub label: Label,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: DatasetName,
    pub dir: PathBuf,
    /// Class C first, then S; file names in byte order within a class.
    pub samples: Vec<Sample>,
}

/// Image counts per class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub control: usize,
    pub sick: usize,
}

impl Dataset {
    pub fn ingest(root: &Path, name: DatasetName) -> Result<Self> {
        let dir = root.join(name.as_str());
        if !dir.is_dir() {
            return Err(Error::MissingPath(dir));
        }
        let mut samples = Vec::new();
        for label in Label::ALL {
            let class_dir = dir.join(label.code());
            if !class_dir.is_dir() {
                return Err(Error::MissingPath(class_dir));
            }
            let mut names: Vec<String> = std::fs::read_dir(&class_dir)
                .map_err(|e| Error::io(&class_dir, e))?
                .filter_map(|entry| entry.ok())
                .filter(|entry| entry.path().is_file())
                .filter_map(|entry| entry.file_name().into_string().ok())
                .filter(|name| {
                    Path::new(name)
                        .extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
                })
                .collect();
            if names.is_empty() {
                return Err(Error::EmptyClassFolder(class_dir));
            }
            names.sort();
            samples.extend(names.into_iter().map(|n| Sample {
                id: format!("{}/{n}", label.code()),
                label,
                path: class_dir.join(n),
            }));
        }
        Ok(Dataset { name, dir, samples })
    }

    pub fn manifest(&self) -> Manifest {
        let sick = self.samples.iter().filter(|s| s.label == Label::Sick).count();
        Manifest {
            control: self.samples.len() - sick,
            sick,
        }
    }
}

/// Decodes, pre-processes and describes every sample, in sample order.
pub fn extract_features(
    dataset: &Dataset,
    steps: &[PreprocessStep],
    descriptor: &Descriptor,
) -> Result<FeatureTable> {
    let features = dataset
        .samples
        .par_iter()
        .map(|s| {
            let img = apply_chain(ImageBuffer::open(&s.path)?, steps)?;
            Ok(descriptor.extract(&img)?.values)
        })
        .collect::<Result<Vec<_>>>()?;
    log::info!(
        "event=extracted dataset={} descriptor={} samples={}",
        dataset.name,
        descriptor.name(),
        features.len()
    );
    FeatureTable::new(
        dataset.samples.iter().map(|s| s.id.clone()).collect(),
        dataset.samples.iter().map(|s| s.label).collect(),
        features,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_png(path: &Path, v: u8) {
        image::GrayImage::from_pixel(16, 16, image::Luma([v])).save(path).unwrap();
    }

    #[test]
    fn ingest_orders_and_counts() {
        let tmp = tempfile::tempdir().unwrap();
        let d = tmp.path().join("TW");
        std::fs::create_dir_all(d.join("C")).unwrap();
        std::fs::create_dir_all(d.join("S")).unwrap();
        write_png(&d.join("C/b.png"), 1);
        write_png(&d.join("C/a.png"), 2);
        write_png(&d.join("S/z.PNG"), 3);
        std::fs::write(d.join("S/notes.txt"), "x").unwrap();
        let ds = Dataset::ingest(tmp.path(), DatasetName::Tw).unwrap();
        let ids: Vec<_> = ds.samples.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["C/a.png", "C/b.png", "S/z.PNG"]);
        assert_eq!(ds.manifest(), Manifest { control: 2, sick: 1 });
    }

    #[test]
    fn empty_class_folder_is_named() {
        let tmp = tempfile::tempdir().unwrap();
        let d = tmp.path().join("D");
        std::fs::create_dir_all(d.join("C")).unwrap();
        std::fs::create_dir_all(d.join("S")).unwrap();
        write_png(&d.join("C/a.png"), 2);
        match Dataset::ingest(tmp.path(), DatasetName::D) {
            Err(Error::EmptyClassFolder(p)) => assert!(p.ends_with("S")),
            other => panic!("{other:?}"),
        }
    }
}
