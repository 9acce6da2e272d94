//! Uniform local binary patterns and the robust single-bit-repair variant.

use serde::{Deserialize, Serialize};

use super::{normalized_histogram, Descriptor, FeatureVector};
use crate::error::{Error, Result};
use crate::raster::ImageBuffer;

/// Interpolated samples this close to the center count as ties.
const TIE_EPS: f64 = 1e-9;

/// Neighbor count and sampling radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLbpParams")]
pub struct LbpParams {
    pub neighbors: u32,
    pub radius: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLbpParams {
    #[serde(default = "default_neighbors")]
    neighbors: u32,
    #[serde(default = "default_radius")]
    radius: f64,
}

fn default_neighbors() -> u32 {
    8
}

fn default_radius() -> f64 {
    2.0
}

impl TryFrom<RawLbpParams> for LbpParams {
    type Error = Error;

    fn try_from(raw: RawLbpParams) -> Result<Self> {
        LbpParams::new(raw.neighbors, raw.radius)
    }
}

impl Default for LbpParams {
    fn default() -> Self {
        LbpParams {
            neighbors: 8,
            radius: 2.0,
        }
    }
}

impl LbpParams {
    /// Supported neighbor counts are 4 through 16.
    pub fn new(neighbors: u32, radius: f64) -> Result<Self> {
        if !(4..=16).contains(&neighbors) {
            return Err(Error::InvalidParameter(format!(
                "LBP neighbor count must be in 4..=16, got {neighbors}"
            )));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "LBP radius must be positive, got {radius}"
            )));
        }
        Ok(LbpParams { neighbors, radius })
    }

    fn margin(&self) -> usize {
        self.radius.ceil() as usize
    }
}

/// Number of 0/1 changes when the low `bits` bits of `pattern` are read as a
/// circular list.
pub fn circular_transitions(pattern: u32, bits: u32) -> u32 {
    let mask = if bits == 32 { u32::MAX } else { (1 << bits) - 1 };
    let p = pattern & mask;
    let rotated = (p >> 1) | ((p & 1) << (bits - 1));
    (p ^ rotated).count_ones()
}

pub fn is_uniform(pattern: u32, bits: u32) -> bool {
    circular_transitions(pattern, bits) <= 2
}

/// Maps every `P`-bit pattern to a histogram bin.
///
/// Uniform patterns get bins `0..P(P-1)+2` in ascending pattern order and
/// all non-uniform patterns share the last bin.
#[derive(Clone, Debug)]
pub struct UniformTable {
    bits: u32,
    bins: Vec<u16>,
}

impl UniformTable {
    pub fn new(bits: u32) -> Self {
        let size = 1usize << bits;
        let nonuniform = (Self::bin_count(bits) - 1) as u16;
        let mut next = 0u16;
        let bins = (0..size as u32)
            .map(|p| {
                if is_uniform(p, bits) {
                    next += 1;
                    next - 1
                } else {
                    nonuniform
                }
            })
            .collect();
        UniformTable { bits, bins }
    }

    /// `P(P-1) + 2` uniform patterns plus the pooled bin.
    pub fn bin_count(bits: u32) -> usize {
        (bits * (bits - 1) + 3) as usize
    }

    pub fn nonuniform_bin(&self) -> usize {
        Self::bin_count(self.bits) - 1
    }

    pub fn bin(&self, pattern: u32) -> usize {
        self.bins[pattern as usize] as usize
    }

    /// Robust binning: a non-uniform pattern that becomes uniform after
    /// flipping a single bit is counted in the bin of the repaired pattern.
    /// When several flips work, the lowest bit index wins.
    pub fn robust_bin(&self, pattern: u32) -> usize {
        let bin = self.bin(pattern);
        if bin != self.nonuniform_bin() {
            return bin;
        }
        (0..self.bits)
            .map(|k| pattern ^ (1 << k))
            .find(|&p| is_uniform(p, self.bits))
            .map_or(bin, |p| self.bin(p))
    }
}

/// Uniform bin of an 8-bit pattern.
pub fn uniform_bin(pattern: u8) -> usize {
    UniformTable::new(8).bin(u32::from(pattern))
}

/// Robust bin of an 8-bit pattern.
pub fn rlbp_bin(pattern: u8) -> usize {
    UniformTable::new(8).robust_bin(u32::from(pattern))
}

/// Per-neighbor integer base offset and fractional part.
#[derive(Clone, Copy, Debug)]
struct SamplePoint {
    x0: isize,
    y0: isize,
    fx: f64,
    fy: f64,
}

fn sample_points(params: &LbpParams) -> Vec<SamplePoint> {
    let snap = |v: f64| {
        if (v - v.round()).abs() < 1e-9 {
            v.round()
        } else {
            v
        }
    };
    (0..params.neighbors)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * f64::from(k) / f64::from(params.neighbors);
            let dx = snap(params.radius * theta.cos());
            let dy = snap(-params.radius * theta.sin());
            SamplePoint {
                x0: dx.floor() as isize,
                y0: dy.floor() as isize,
                fx: dx - dx.floor(),
                fy: dy - dy.floor(),
            }
        })
        .collect()
}

/// Per-pixel LBP codes over the interior region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeMap {
    /// Offset of the first coded pixel from the image origin, in both axes.
    pub margin: usize,
    pub width: usize,
    pub height: usize,
    pub codes: Vec<u32>,
}

impl CodeMap {
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.codes[y * self.width + x]
    }
}

/// Computes the LBP code of every pixel whose whole circle lies inside the image.
///
/// Bit `k` corresponds to the neighbor at angle `2πk/P` (counter-clockwise,
/// starting to the right of the center) and is set when the bilinearly
/// interpolated neighbor is at least the center value.
pub fn lbp_code_map(img: &ImageBuffer, params: &LbpParams) -> Result<CodeMap> {
    img.require_channels(1)?;
    let margin = params.margin();
    let min = 2 * margin + 1;
    let (w, h) = (img.width(), img.height());
    if w < min || h < min {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min,
            what: "LBP radius",
        });
    }
    let points = sample_points(params);
    let data = img.data();
    let px = |x: isize, y: isize| f64::from(data[y as usize * w + x as usize]);
    let (cw, ch) = (w - 2 * margin, h - 2 * margin);
    let mut codes = Vec::with_capacity(cw * ch);
    for cy in margin..h - margin {
        for cx in margin..w - margin {
            let center = f64::from(data[cy * w + cx]);
            let mut code = 0u32;
            for (k, sp) in points.iter().enumerate() {
                let x = cx as isize + sp.x0;
                let y = cy as isize + sp.y0;
                let p00 = px(x, y);
                let top = if sp.fx > 0.0 { p00 + sp.fx * (px(x + 1, y) - p00) } else { p00 };
                let value = if sp.fy > 0.0 {
                    let p10 = px(x, y + 1);
                    let bottom = if sp.fx > 0.0 {
                        p10 + sp.fx * (px(x + 1, y + 1) - p10)
                    } else {
                        p10
                    };
                    top + sp.fy * (bottom - top)
                } else {
                    top
                };
                if value + TIE_EPS >= center {
                    code |= 1 << k;
                }
            }
            codes.push(code);
        }
    }
    Ok(CodeMap {
        margin,
        width: cw,
        height: ch,
        codes,
    })
}

fn histogram(img: &ImageBuffer, params: &LbpParams, robust: bool) -> Result<Vec<f64>> {
    let map = lbp_code_map(img, params)?;
    let table = UniformTable::new(params.neighbors);
    let mut counts = vec![0u64; UniformTable::bin_count(params.neighbors)];
    for &code in &map.codes {
        let bin = if robust { table.robust_bin(code) } else { table.bin(code) };
        counts[bin] += 1;
    }
    Ok(normalized_histogram(&counts))
}

/// Normalized histogram of uniform LBP codes (59 bins at `P = 8`).
pub fn lbp(img: &ImageBuffer, params: &LbpParams) -> Result<FeatureVector> {
    Ok(FeatureVector {
        values: histogram(img, params, false)?,
        descriptor: Descriptor::Lbp(*params),
    })
}

/// Like [`lbp`], but non-uniform codes that a single bit flip turns uniform
/// are counted as that uniform code.
pub fn rlbp(img: &ImageBuffer, params: &LbpParams) -> Result<FeatureVector> {
    Ok(FeatureVector {
        values: histogram(img, params, true)?,
        descriptor: Descriptor::Rlbp(*params),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_census() {
        let count = (0u32..256).filter(|&p| is_uniform(p, 8)).count();
        assert_eq!(count, 58);
        assert_eq!(UniformTable::bin_count(8), 59);
    }

    #[test]
    fn transition_examples() {
        assert_eq!(circular_transitions(0b0000_1111, 8), 2);
        assert_eq!(circular_transitions(0b0101_0101, 8), 8);
        assert_eq!(circular_transitions(0b1111_1111, 8), 0);
        assert_eq!(circular_transitions(0b1110_1111, 8), 2);
        assert_eq!(circular_transitions(0b1110_1101, 8), 4);
    }

    #[test]
    fn alternating_pattern_is_pooled_by_both_variants() {
        let table = UniformTable::new(8);
        assert_eq!(table.bin(0b0101_0101), 58);
        // Every single flip of 01010101 still leaves 6 transitions.
        for k in 0..8 {
            assert_eq!(circular_transitions(0b0101_0101 ^ (1 << k), 8), 6);
        }
        assert_eq!(table.robust_bin(0b0101_0101), 58);
    }

    #[test]
    fn robust_repair_of_isolated_bit() {
        let table = UniformTable::new(8);
        // 11101101 has an isolated 0 at bit 1 and at bit 4; bit 1 is repaired
        // first, giving 11101111.
        let repaired = table.robust_bin(0b1110_1101);
        assert_eq!(repaired, table.bin(0b1110_1111));
        assert_ne!(repaired, table.nonuniform_bin());
        // Uniform codes keep their own bin.
        assert_eq!(table.robust_bin(0b1110_1111), table.bin(0b1110_1111));
    }

    #[test]
    fn constant_image_single_bin() {
        let img = ImageBuffer::filled(9, 9, 1, 100).unwrap();
        let fv = lbp(&img, &LbpParams::default()).unwrap();
        let table = UniformTable::new(8);
        let bin = table.bin(0xFF);
        assert_eq!(fv.values.len(), 59);
        assert_eq!(fv.values[bin], 1.0);
        assert_eq!(fv.values.iter().filter(|&&v| v != 0.0).count(), 1);
        assert_eq!(rlbp(&img, &LbpParams::default()).unwrap().values, fv.values);
    }

    #[test]
    fn too_small_and_rgb_rejected() {
        let img = ImageBuffer::filled(4, 4, 1, 0).unwrap();
        assert!(matches!(
            lbp(&img, &LbpParams::default()),
            Err(Error::ImageTooSmall { min: 5, .. })
        ));
        let rgb = ImageBuffer::filled(8, 8, 3, 0).unwrap();
        assert!(lbp(&rgb, &LbpParams::default()).is_err());
    }

    #[test]
    fn axis_neighbors_are_integer_at_radius_two() {
        let pts = sample_points(&LbpParams::default());
        assert_eq!((pts[0].x0, pts[0].y0, pts[0].fx, pts[0].fy), (2, 0, 0.0, 0.0));
        assert_eq!((pts[2].x0, pts[2].y0, pts[2].fx, pts[2].fy), (0, -2, 0.0, 0.0));
        assert_eq!((pts[4].x0, pts[4].fx), (-2, 0.0));
        assert!(pts[1].fx > 0.0 && pts[1].fy > 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(LbpParams::new(3, 1.0).is_err());
        assert!(LbpParams::new(8, 0.0).is_err());
        assert!(serde_json::from_str::<LbpParams>(r#"{"neighbors":2}"#).is_err());
    }
}
