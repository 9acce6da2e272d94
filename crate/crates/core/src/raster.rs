//! 8-bit rasters and image decoding.

use std::path::Path;

use crate::error::{Error, Result};

/// Row-major 8-bit raster with one or three interleaved channels.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: u8,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: u8, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels as usize))
            .ok_or_else(|| Error::InvalidImage("dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(ImageBuffer {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: u8, value: u8) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            vec![value; width * height * channels as usize],
        )
    }

    /// Builds a single-channel image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn_gray(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        ImageBuffer {
            width,
            height,
            channels: 1,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, channel: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels as usize + channel]
    }

    /// Copies one channel out as a single-channel image.
    pub fn channel(&self, channel: usize) -> Result<ImageBuffer> {
        if channel >= self.channels as usize {
            return Err(Error::InvalidParameter(format!(
                "channel {channel} out of range for {}-channel image",
                self.channels
            )));
        }
        let stride = self.channels as usize;
        let data = self.data.iter().skip(channel).step_by(stride).copied().collect();
        Ok(ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        })
    }

    pub fn require_channels(&self, expected: u8) -> Result<()> {
        if self.channels == expected {
            Ok(())
        } else {
            Err(Error::ChannelMismatch {
                expected,
                actual: self.channels,
            })
        }
    }

    /// Decodes a PNG, JPEG or TIFF file to 8 bits per channel.
    ///
    /// Grayscale sources stay single-channel; everything else becomes RGB
    /// (alpha is dropped).
    pub fn open(path: &Path) -> Result<Self> {
        let decoded = image::open(path).map_err(|source| Error::Decode {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_dynamic(&decoded))
    }

    pub fn from_dynamic(img: &image::DynamicImage) -> Self {
        if img.color().has_color() {
            let rgb = img.to_rgb8();
            let (w, h) = rgb.dimensions();
            ImageBuffer {
                width: w as usize,
                height: h as usize,
                channels: 3,
                data: rgb.into_raw(),
            }
        } else {
            let gray = img.to_luma8();
            let (w, h) = gray.dimensions();
            ImageBuffer {
                width: w as usize,
                height: h as usize,
                channels: 1,
                data: gray.into_raw(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_lengths_and_channel_counts() {
        assert!(ImageBuffer::new(2, 2, 1, vec![0; 3]).is_err());
        assert!(ImageBuffer::new(2, 2, 2, vec![0; 8]).is_err());
        assert!(ImageBuffer::new(2, 2, 3, vec![0; 12]).is_ok());
    }

    #[test]
    fn channel_extraction() {
        let img = ImageBuffer::new(2, 1, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(img.channel(1).unwrap().data(), &[2, 5]);
        assert!(img.channel(3).is_err());
    }
}
