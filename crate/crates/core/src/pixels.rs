//! Small float pixel buffer with the bilinear resampling used by patch
//! extraction and augmentation.
//!
//! Values are `f64` in `[0, 1]`, stored row-major as `[y][x][channel]`.
//! Resampling follows the half-pixel-center convention: output pixel `j`
//! samples the source at `(j + 0.5) * scale - 0.5`, so a same-size resize
//! is an identity copy and an exact 2x downscale averages each 2x2 block.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PixelBuffer {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl PixelBuffer {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::constant(height, width, channels, 0.0)
    }

    pub fn constant(height: usize, width: usize, channels: usize, value: f64) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "pixel data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, value: f64) {
        self.data[(y * self.width + x) * self.channels + c] = value;
    }

    /// Bilinear sample at continuous pixel coordinates, clamped to the
    /// image border.
    pub fn sample_bilinear(&self, y: f64, x: f64, c: usize) -> f64 {
        let xc = x.clamp(0.0, (self.width - 1) as f64);
        let yc = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = xc.floor() as usize;
        let y0 = yc.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = xc - x0 as f64;
        let fy = yc - y0 as f64;
        let top = self.get(y0, x0, c) * (1.0 - fx) + self.get(y0, x1, c) * fx;
        let bottom = self.get(y1, x0, c) * (1.0 - fx) + self.get(y1, x1, c) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Resamples the continuous sub-rectangle `[y0, y1) x [x0, x1)`
    /// (pixel units) to `out_h x out_w`.
    pub fn resample_region(
        &self,
        y0: f64,
        x0: f64,
        y1: f64,
        x1: f64,
        out_h: usize,
        out_w: usize,
    ) -> Result<PixelBuffer> {
        if !(y1 > y0 && x1 > x0) {
            return Err(Error::Extraction(format!(
                "region [{y0}, {y1}) x [{x0}, {x1}) has no area"
            )));
        }
        if out_h == 0 || out_w == 0 {
            return Err(Error::Extraction("zero output size".to_string()));
        }
        let sy = (y1 - y0) / out_h as f64;
        let sx = (x1 - x0) / out_w as f64;
        let mut out = PixelBuffer::zeros(out_h, out_w, self.channels);
        for oy in 0..out_h {
            let src_y = y0 + (oy as f64 + 0.5) * sy - 0.5;
            for ox in 0..out_w {
                let src_x = x0 + (ox as f64 + 0.5) * sx - 0.5;
                for c in 0..self.channels {
                    out.set(oy, ox, c, self.sample_bilinear(src_y, src_x, c));
                }
            }
        }
        Ok(out)
    }

    pub fn resize_bilinear(&self, out_h: usize, out_w: usize) -> Result<PixelBuffer> {
        self.resample_region(
            0.0,
            0.0,
            self.height as f64,
            self.width as f64,
            out_h,
            out_w,
        )
    }

    pub fn flip_horizontal(&self) -> PixelBuffer {
        let mut out = PixelBuffer::zeros(self.height, self.width, self.channels);
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    out.set(y, x, c, self.get(y, self.width - 1 - x, c));
                }
            }
        }
        out
    }

    /// Per-channel mean over all pixels.
    pub fn channel_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.channels];
        for px in self.data.chunks_exact(self.channels) {
            for (s, v) in sums.iter_mut().zip(px) {
                *s += v;
            }
        }
        let n = (self.height * self.width) as f64;
        sums.iter_mut().for_each(|s| *s /= n);
        sums
    }

    /// Channel-averaged copy (used before single-channel analyses).
    pub fn to_grayscale(&self) -> PixelBuffer {
        if self.channels == 1 {
            return self.clone();
        }
        let mut out = PixelBuffer::zeros(self.height, self.width, 1);
        for y in 0..self.height {
            for x in 0..self.width {
                let mut acc = 0.0;
                for c in 0..self.channels {
                    acc += self.get(y, x, c);
                }
                out.set(y, x, 0, acc / self.channels as f64);
            }
        }
        out
    }

    /// Writes the buffer as an 8-bit PNG (1 or 3 channels).
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let quantize = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let bytes: Vec<u8> = self.data.iter().copied().map(quantize).collect();
        let (w, h) = (self.width as u32, self.height as u32);
        let result = match self.channels {
            1 => image::GrayImage::from_raw(w, h, bytes)
                .expect("sized buffer")
                .save(path),
            3 => image::RgbImage::from_raw(w, h, bytes)
                .expect("sized buffer")
                .save(path),
            c => {
                return Err(Error::Image {
                    path: path.to_path_buf(),
                    reason: format!("unsupported channel count {c}"),
                })
            }
        };
        result.map_err(|e| Error::Image {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    /// Loads an 8-bit PNG as values in `[0, 1]`; grayscale stays
    /// single-channel, anything else becomes RGB.
    pub fn load_png(path: &Path) -> Result<PixelBuffer> {
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let buffer = match img {
            image::DynamicImage::ImageLuma8(g) => {
                let (w, h) = (g.width() as usize, g.height() as usize);
                let data = g.into_raw().iter().map(|&b| f64::from(b) / 255.0).collect();
                PixelBuffer::from_vec(h, w, 1, data)?
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = (rgb.width() as usize, rgb.height() as usize);
                let data = rgb
                    .into_raw()
                    .iter()
                    .map(|&b| f64::from(b) / 255.0)
                    .collect();
                PixelBuffer::from_vec(h, w, 3, data)?
            }
        };
        Ok(buffer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(n: usize) -> PixelBuffer {
        let mut img = PixelBuffer::zeros(n, n, 1);
        for y in 0..n {
            for x in 0..n {
                img.set(y, x, 0, ((x + y) % 2) as f64);
            }
        }
        img
    }

    #[test]
    fn same_size_resize_is_identity() {
        let img = checkerboard(8);
        let out = img.resize_bilinear(8, 8).unwrap();
        assert_eq!(img, out);
    }

    #[test]
    fn double_downscale_averages_blocks() {
        // Closed-form oracle: each output pixel is the mean of its 2x2 block.
        let img = checkerboard(8);
        let out = img.resize_bilinear(4, 4).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                let mean = (img.get(2 * y, 2 * x, 0)
                    + img.get(2 * y, 2 * x + 1, 0)
                    + img.get(2 * y + 1, 2 * x, 0)
                    + img.get(2 * y + 1, 2 * x + 1, 0))
                    / 4.0;
                assert!((out.get(y, x, 0) - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_stays_constant_under_resample() {
        let img = PixelBuffer::constant(10, 14, 1, 0.7);
        let out = img.resample_region(1.3, 2.7, 8.1, 11.9, 5, 6).unwrap();
        for &v in out.data() {
            assert!((v - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn flip_is_involution() {
        let img = checkerboard(7);
        assert_eq!(img.flip_horizontal().flip_horizontal(), img);
    }

    #[test]
    fn zero_area_region_rejected() {
        let img = checkerboard(8);
        assert!(img.resample_region(2.0, 2.0, 2.0, 5.0, 4, 4).is_err());
    }

    #[test]
    fn png_round_trip_preserves_quantized_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let mut img = PixelBuffer::zeros(5, 4, 1);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = (i as f64 / 19.0 * 255.0).round() / 255.0;
        }
        img.save_png(&path).unwrap();
        let loaded = PixelBuffer::load_png(&path).unwrap();
        assert_eq!(loaded.height(), 5);
        assert_eq!(loaded.width(), 4);
        for (a, b) in img.data().iter().zip(loaded.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
