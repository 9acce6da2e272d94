//! Grayscale conversion, HSV pseudo-coloring and additive edge enhancement.
//!
//! Every transform preserves width and height.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::raster::ImageBuffer;

/// BT.601 luma with round-half-up, computed in integer arithmetic.
pub fn to_grayscale(img: &ImageBuffer) -> Result<ImageBuffer> {
    img.require_channels(3)?;
    let data = img
        .data()
        .chunks_exact(3)
        .map(|p| {
            let weighted = 299 * u32::from(p[0]) + 587 * u32::from(p[1]) + 114 * u32::from(p[2]);
            ((weighted + 500) / 1000).min(255) as u8
        })
        .collect();
    ImageBuffer::new(img.width(), img.height(), 1, data)
}

/// Largest hue of the pseudo-color sweep, in degrees.
pub const HUE_SWEEP_DEGREES: f64 = 300.0;

/// Full-saturation, full-value HSV to 8-bit RGB.
fn hsv_to_rgb(hue_degrees: f64) -> [u8; 3] {
    let h = (hue_degrees / 60.0).rem_euclid(6.0);
    let sector = h.floor();
    let x = 1.0 - ((h % 2.0) - 1.0).abs();
    let (r, g, b) = match sector as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let q = |c: f64| (c * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

/// Gray level to RGB lookup table of the pseudo-color map.
pub fn hsv_lut() -> &'static [[u8; 3]; 256] {
    static LUT: OnceLock<[[u8; 3]; 256]> = OnceLock::new();
    LUT.get_or_init(|| {
        let mut lut = [[0u8; 3]; 256];
        for (g, entry) in lut.iter_mut().enumerate() {
            *entry = hsv_to_rgb(g as f64 * HUE_SWEEP_DEGREES / 255.0);
        }
        lut
    })
}

/// Maps gray level `g` to hue `g * 300 / 255` at full saturation and value.
pub fn pseudo_color_hsv(img: &ImageBuffer) -> Result<ImageBuffer> {
    img.require_channels(1)?;
    let lut = hsv_lut();
    let mut data = Vec::with_capacity(img.data().len() * 3);
    for &g in img.data() {
        data.extend_from_slice(&lut[g as usize]);
    }
    ImageBuffer::new(img.width(), img.height(), 3, data)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeFilter {
    Laplacian,
    Sobel,
    Scharr,
}

type Stencil = [[i32; 3]; 3];

const LAPLACIAN: Stencil = [[0, 1, 0], [1, -4, 1], [0, 1, 0]];
const SOBEL_X: Stencil = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]];
const SCHARR_X: Stencil = [[-3, 0, 3], [-10, 0, 10], [-3, 0, 3]];

fn transpose(s: &Stencil) -> Stencil {
    let mut t = [[0; 3]; 3];
    for (r, row) in s.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            t[c][r] = v;
        }
    }
    t
}

impl EdgeFilter {
    /// The stencils of this filter: one for Laplacian, `[Gx, Gy]` otherwise.
    pub fn kernels(self) -> Vec<Stencil> {
        match self {
            EdgeFilter::Laplacian => vec![LAPLACIAN],
            EdgeFilter::Sobel => vec![SOBEL_X, transpose(&SOBEL_X)],
            EdgeFilter::Scharr => vec![SCHARR_X, transpose(&SCHARR_X)],
        }
    }
}

/// Reflect-101 index: `-1 -> 1`, `n -> n - 2`.
#[inline]
fn reflect101(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

fn respond(img: &ImageBuffer, kernel: &Stencil, x: usize, y: usize, ch: usize) -> i32 {
    let (w, h) = (img.width(), img.height());
    let mut acc = 0;
    for (ky, row) in kernel.iter().enumerate() {
        let sy = reflect101(y as isize + ky as isize - 1, h);
        for (kx, &k) in row.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let sx = reflect101(x as isize + kx as isize - 1, w);
            acc += k * i32::from(img.get(sx, sy, ch));
        }
    }
    acc
}

/// Adds the per-channel edge magnitude to the image, saturating at 255.
pub fn edge_enhance(img: &ImageBuffer, filter: EdgeFilter) -> ImageBuffer {
    let kernels = filter.kernels();
    let channels = img.channels() as usize;
    let mut data = Vec::with_capacity(img.data().len());
    for y in 0..img.height() {
        for x in 0..img.width() {
            for ch in 0..channels {
                let magnitude: u32 = match kernels.as_slice() {
                    [single] => respond(img, single, x, y, ch).unsigned_abs(),
                    [gx, gy] => {
                        let a = f64::from(respond(img, gx, x, y, ch));
                        let b = f64::from(respond(img, gy, x, y, ch));
                        (a * a + b * b).sqrt().round() as u32
                    }
                    _ => unreachable!("edge filters have one or two stencils"),
                };
                let v = u32::from(img.get(x, y, ch)) + magnitude;
                data.push(v.min(255) as u8);
            }
        }
    }
    ImageBuffer::new(img.width(), img.height(), img.channels(), data)
        .expect("dimensions are preserved")
}
