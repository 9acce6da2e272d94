//! Local phase quantization.
//!
//! For each pixel the short-term Fourier transform over an `N×N` window is
//! evaluated at `u1 = (a, 0)`, `u2 = (0, a)`, `u3 = (a, a)` and `u4 = (a, -a)`
//! with `a = 1/N`. The signs of the real and imaginary parts form an 8-bit
//! code; bit `j` follows the order `Re u1..u4, Im u1..u4`.

use nalgebra::{DMatrix, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::{normalized_histogram, Descriptor, FeatureVector};
use crate::error::{Error, Result};
use crate::raster::ImageBuffer;

pub const LPQ_BINS: usize = 256;

/// Coefficients with magnitude below this are treated as exactly zero.
const ZERO_TOL: f64 = 1e-8;

/// Correlation coefficient of neighboring pixels in the decorrelation model.
const DEFAULT_RHO: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLpqParams")]
pub struct LpqParams {
    /// Odd window side length.
    pub window: usize,
    /// Whiten the eight coefficients before quantization.
    pub decorrelate: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLpqParams {
    window: usize,
    #[serde(default)]
    decorrelate: bool,
}

impl TryFrom<RawLpqParams> for LpqParams {
    type Error = Error;

    fn try_from(raw: RawLpqParams) -> Result<Self> {
        Ok(LpqParams {
            decorrelate: raw.decorrelate,
            ..LpqParams::new(raw.window)?
        })
    }
}

impl LpqParams {
    pub fn new(window: usize) -> Result<Self> {
        if window < 3 || window % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "LPQ window must be odd and at least 3, got {window}"
            )));
        }
        Ok(LpqParams {
            window,
            decorrelate: false,
        })
    }

    pub fn with_decorrelation(mut self) -> Self {
        self.decorrelate = true;
        self
    }

    /// The frequency `a = 1/N`.
    pub fn frequency(&self) -> f64 {
        1.0 / self.window as f64
    }

    fn half(&self) -> usize {
        self.window / 2
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Complex {
    re: f64,
    im: f64,
}

impl Complex {
    fn mul(self, o: Complex) -> Complex {
        Complex {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    fn conj(self) -> Complex {
        Complex {
            re: self.re,
            im: -self.im,
        }
    }

    fn add(self, o: Complex) -> Complex {
        Complex {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }

    fn scale(self, s: f64) -> Complex {
        Complex {
            re: self.re * s,
            im: self.im * s,
        }
    }
}

/// `exp(-2πi a d)` for `d = -r..=r`, exactly symmetric in `d`.
fn basis(params: &LpqParams) -> Vec<Complex> {
    let r = params.half() as isize;
    let a = params.frequency();
    (-r..=r)
        .map(|d| {
            let phase = 2.0 * std::f64::consts::PI * a * d.unsigned_abs() as f64;
            let (s, c) = phase.sin_cos();
            Complex {
                re: c,
                im: if d >= 0 { -s } else { s },
            }
        })
        .collect()
}

/// Whitening transform for the Gaussian pixel-correlation model
/// `cov(i, j) = rho^|p_i - p_j|`.
///
/// Returns the 8×8 matrix `Vᵀ` that maps the coefficient vector
/// `[Re u1..u4, Im u1..u4]` to decorrelated coefficients.
pub fn lpq_decorrelation(params: &LpqParams, rho: f64) -> SMatrix<f64, 8, 8> {
    let n = params.window;
    let r = params.half() as isize;
    let w = basis(params);
    let positions: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .collect();

    let mut filters = DMatrix::<f64>::zeros(8, n * n);
    for (col, &(dx, dy)) in positions.iter().enumerate() {
        let wx = w[(dx + r) as usize];
        let wy = w[(dy + r) as usize];
        let coeffs = [wx, wy, wx.mul(wy), wx.mul(wy.conj())];
        for (f, c) in coeffs.iter().enumerate() {
            filters[(f, col)] = c.re;
            filters[(f + 4, col)] = c.im;
        }
    }

    let cov = DMatrix::from_fn(n * n, n * n, |i, j| {
        let (xi, yi) = positions[i];
        let (xj, yj) = positions[j];
        let dist = (((xi - xj).pow(2) + (yi - yj).pow(2)) as f64).sqrt();
        rho.powf(dist)
    });
    let d = &filters * cov * filters.transpose();
    // Nearly-unit scaling separates repeated singular values.
    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(8, |i, _| {
        1.0 + (7 - i) as f64 * 1e-6
    }));
    let svd = (&a * d * &a).svd(false, true);
    let v_t = svd.v_t.expect("V requested");
    SMatrix::<f64, 8, 8>::from_fn(|i, j| v_t[(i, j)])
}

/// Per-pixel LPQ codes over the region where the full window fits.
pub fn lpq_code_map(img: &ImageBuffer, params: &LpqParams) -> Result<Vec<u8>> {
    img.require_channels(1)?;
    let n = params.window;
    let (w, h) = (img.width(), img.height());
    if w < n || h < n {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: n,
            what: "LPQ window",
        });
    }
    let basis = basis(params);
    let (vw, vh) = (w - n + 1, h - n + 1);
    let data = img.data();

    // Horizontal pass: plain window sum and the a-frequency response.
    let mut row_dc = vec![0.0; h * vw];
    let mut row_ac = vec![Complex::default(); h * vw];
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        for x in 0..vw {
            let mut dc = 0.0;
            let mut ac = Complex::default();
            for (d, b) in basis.iter().enumerate() {
                let v = f64::from(row[x + d]);
                dc += v;
                ac = ac.add(b.scale(v));
            }
            row_dc[y * vw + x] = dc;
            row_ac[y * vw + x] = ac;
        }
    }

    let whitening = params
        .decorrelate
        .then(|| lpq_decorrelation(params, DEFAULT_RHO));

    let mut codes = Vec::with_capacity(vw * vh);
    for y in 0..vh {
        for x in 0..vw {
            let mut f1 = Complex::default();
            let mut f2 = Complex::default();
            let mut f3 = Complex::default();
            let mut f4 = Complex::default();
            for (e, b) in basis.iter().enumerate() {
                let idx = (y + e) * vw + x;
                let ac = row_ac[idx];
                f1 = f1.add(ac);
                f2 = f2.add(b.scale(row_dc[idx]));
                f3 = f3.add(ac.mul(*b));
                f4 = f4.add(ac.mul(b.conj()));
            }
            let mut coeffs =
                SVector::<f64, 8>::from([f1.re, f2.re, f3.re, f4.re, f1.im, f2.im, f3.im, f4.im]);
            if let Some(v_t) = &whitening {
                coeffs = v_t * coeffs;
            }
            let mut code = 0u8;
            for (j, &c) in coeffs.iter().enumerate() {
                if c >= -ZERO_TOL {
                    code |= 1 << j;
                }
            }
            codes.push(code);
        }
    }
    Ok(codes)
}

/// Normalized 256-bin histogram of LPQ codes.
pub fn lpq(img: &ImageBuffer, params: &LpqParams) -> Result<FeatureVector> {
    let mut counts = [0u64; LPQ_BINS];
    for code in lpq_code_map(img, params)? {
        counts[code as usize] += 1;
    }
    Ok(FeatureVector {
        values: normalized_histogram(&counts),
        descriptor: Descriptor::Lpq(*params),
    })
}
