use std::path::Path;

use image::{ImageBuffer, Rgb};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Planar `channels x height x width` raster with values nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels * height * width != data.len() || data.is_empty() {
            return Err(Error::dim(format!(
                "{channels}x{height}x{width} image needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image data".into()));
        }
        Ok(Self { channels, height, width, data })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        Self { channels, height, width, data: vec![value; channels * height * width] }
    }

    pub fn from_fn(channels: usize, height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self { channels, height, width, data }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(channels, height, width)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub fn clamped(&self) -> Self {
        Self { data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(), ..self.clone() }
    }

    /// Clamps and rounds to the 16-bit grid used on disk.
    pub fn quantized(&self) -> Self {
        Self { data: self.data.iter().map(|&v| from_u16(to_u16(v))).collect(), ..self.clone() }
    }

    /// Mean absolute finite-difference gradient, a crude sharpness measure.
    pub fn gradient_energy(&self) -> f64 {
        let (c, h, w) = self.dims();
        let mut sum = 0.0;
        let mut count = 0usize;
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let v = self.get(ch, y, x) as f64;
                    if x + 1 < w {
                        sum += (self.get(ch, y, x + 1) as f64 - v).abs();
                        count += 1;
                    }
                    if y + 1 < h {
                        sum += (self.get(ch, y + 1, x) as f64 - v).abs();
                        count += 1;
                    }
                }
            }
        }
        if count == 0 { 0.0 } else { sum / count as f64 }
    }

    /// `1 x C x H x W` tensor.
    pub fn to_tensor(&self) -> Tensor<f32> {
        Tensor::new(vec![1, self.channels, self.height, self.width], self.data.clone())
            .expect("image data is finite and sized")
    }

    /// Stacks same-shaped images into an `N x C x H x W` batch.
    pub fn stack(images: &[&Image]) -> Result<Tensor<f32>> {
        let first = images.first().ok_or_else(|| Error::Argument("cannot stack zero images".into()))?;
        let mut data = Vec::with_capacity(first.data.len() * images.len());
        for img in images {
            if img.dims() != first.dims() {
                return Err(Error::dim(format!("cannot stack {:?} with {:?}", img.dims(), first.dims())));
            }
            data.extend_from_slice(&img.data);
        }
        Tensor::new(vec![images.len(), first.channels, first.height, first.width], data)
    }

    /// Splits an `N x C x H x W` batch back into images.
    pub fn unstack(batch: &Tensor<f32>) -> Result<Vec<Image>> {
        let (n, c, h, w) = batch.dims4()?;
        let plane = c * h * w;
        Ok((0..n)
            .map(|i| Image { channels: c, height: h, width: w, data: batch.data()[i * plane..(i + 1) * plane].to_vec() })
            .collect())
    }

    /// Writes a 16-bit RGB PNG after clamping to `[0, 1]`.
    pub fn save_png16(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let raw = self.interleaved(to_u16)?;
        let buf: ImageBuffer<Rgb<u16>, Vec<u16>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, raw).expect("buffer sized from image");
        buf.save(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })
    }

    /// Writes an 8-bit RGB PNG for viewing.
    pub fn save_png8(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let raw = self.interleaved(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)?;
        let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, raw).expect("buffer sized from image");
        buf.save(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })
    }

    /// Reads any PNG as RGB, widening 8-bit data to the 16-bit grid.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let decoded = image::open(path).map_err(|source| Error::Image { path: path.to_path_buf(), source })?;
        let rgb = decoded.into_rgb16();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        let raw = rgb.into_raw();
        Ok(Self::from_fn(3, h, w, |c, y, x| from_u16(raw[(y * w + x) * 3 + c])))
    }

    fn interleaved<P>(&self, f: impl Fn(f32) -> P) -> Result<Vec<P>> {
        if self.channels != 3 {
            return Err(Error::Argument(format!("PNG output needs 3 channels, image has {}", self.channels)));
        }
        let (h, w) = (self.height, self.width);
        let mut raw = Vec::with_capacity(3 * h * w);
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    raw.push(f(self.get(c, y, x)));
                }
            }
        }
        Ok(raw)
    }
}

fn to_u16(v: f32) -> u16 {
    (v.clamp(0.0, 1.0) as f64 * 65535.0).round() as u16
}

fn from_u16(v: u16) -> f32 {
    (v as f64 / 65535.0) as f32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png16_round_trip_matches_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::from_fn(3, 5, 7, |c, y, x| ((c * 31 + y * 7 + x) % 17) as f32 / 16.3 - 0.02);
        let path = dir.path().join("a.png");
        img.save_png16(&path).unwrap();
        let back = Image::load_png(&path).unwrap();
        assert_eq!(back, img.quantized());
        assert_eq!(back.quantized(), back);
    }

    #[test]
    fn stack_and_unstack() {
        let a = Image::filled(3, 4, 4, 0.25);
        let b = Image::filled(3, 4, 4, 0.5);
        let t = Image::stack(&[&a, &b]).unwrap();
        assert_eq!(t.shape(), [2, 3, 4, 4]);
        assert_eq!(Image::unstack(&t).unwrap(), vec![a, b]);
    }
}
