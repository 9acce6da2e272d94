//! Texture descriptors: uniform LBP, robust LBP and LPQ histograms.

mod lbp;
mod lpq;

pub use lbp::{
    circular_transitions, is_uniform, lbp, lbp_code_map, rlbp, rlbp_bin, uniform_bin, LbpParams,
    UniformTable,
};
pub use lpq::{lpq, lpq_code_map, lpq_decorrelation, LpqParams, LPQ_BINS};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::raster::ImageBuffer;

/// A descriptor together with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Descriptor {
    Lbp(LbpParams),
    Rlbp(LbpParams),
    Lpq(LpqParams),
}

impl Descriptor {
    pub fn name(&self) -> String {
        match self {
            Descriptor::Lbp(p) => format!("LBP({},{})", p.neighbors, p.radius),
            Descriptor::Rlbp(p) => format!("RLBP({},{})", p.neighbors, p.radius),
            Descriptor::Lpq(p) => format!("LPQ({})", p.window),
        }
    }

    /// Histogram length for a single-channel image.
    pub fn bins(&self) -> usize {
        match self {
            Descriptor::Lbp(p) | Descriptor::Rlbp(p) => UniformTable::bin_count(p.neighbors),
            Descriptor::Lpq(_) => LPQ_BINS,
        }
    }

    fn extract_gray(&self, img: &ImageBuffer) -> Result<FeatureVector> {
        match self {
            Descriptor::Lbp(p) => lbp(img, p),
            Descriptor::Rlbp(p) => rlbp(img, p),
            Descriptor::Lpq(p) => lpq(img, p),
        }
    }

    /// Extracts a histogram from a 1- or 3-channel image.
    ///
    /// Three-channel images are described per channel; the channel
    /// histograms are concatenated and rescaled to sum to one.
    pub fn extract(&self, img: &ImageBuffer) -> Result<FeatureVector> {
        if img.channels() == 1 {
            return self.extract_gray(img);
        }
        let channels = img.channels() as usize;
        let mut values = Vec::with_capacity(self.bins() * channels);
        for c in 0..channels {
            let part = self.extract_gray(&img.channel(c)?)?;
            values.extend(part.values.iter().map(|v| v / channels as f64));
        }
        Ok(FeatureVector {
            values,
            descriptor: *self,
        })
    }
}

/// An L1-normalized descriptor histogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub descriptor: Descriptor,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub(crate) fn normalized_histogram(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    let total = total as f64;
    counts.iter().map(|&c| c as f64 / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_json_shape() {
        let d: Descriptor = serde_json::from_str(r#"{"kind":"lpq","window":13}"#).unwrap();
        assert_eq!(d, Descriptor::Lpq(LpqParams::new(13).unwrap()));
        let d: Descriptor = serde_json::from_str(r#"{"kind":"rlbp"}"#).unwrap();
        assert_eq!(d, Descriptor::Rlbp(LbpParams::default()));
        assert!(serde_json::from_str::<Descriptor>(r#"{"kind":"lbp","nope":1}"#).is_err());
    }

    #[test]
    fn rgb_extraction_concatenates_channels() {
        let img = ImageBuffer::filled(16, 16, 3, 40).unwrap();
        let d = Descriptor::Lbp(LbpParams::default());
        let fv = d.extract(&img).unwrap();
        assert_eq!(fv.len(), 3 * 59);
        assert!((fv.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
