use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::Image;
use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// `10 log10(peak^2 / MSE)` over every channel and pixel; `+inf` when equal.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::dim(format!("psnr of {:?} and {:?}", a.dims(), b.dims())));
    }
    let mse = a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// PSNR after clamping and 16-bit quantization of both images, i.e. on
/// exactly what would be written to disk.
pub fn image_psnr(a: &Image, b: &Image) -> Result<f64> {
    psnr(&a.quantized(), &b.quantized(), 1.0)
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = w.iter().sum();
    w.map(|v| v / sum)
}

/// Valid-mode separable Gaussian filter of one plane.
fn filter(plane: &[f64], h: usize, w: usize, g: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|k| g[k] * plane[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|k| g[k] * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), peak 1,
/// averaged over valid window positions and then channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::dim(format!("ssim of {:?} and {:?}", a.dims(), b.dims())));
    }
    let (c, h, w) = a.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::dim(format!("ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}")));
    }
    let g = gaussian_window();
    let (c1, c2) = (K1 * K1, K2 * K2);
    let plane = h * w;
    let mut total = 0.0;
    for ch in 0..c {
        let x: Vec<f64> = a.data()[ch * plane..(ch + 1) * plane].iter().map(|&v| v as f64).collect();
        let y: Vec<f64> = b.data()[ch * plane..(ch + 1) * plane].iter().map(|&v| v as f64).collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let [mx, my, sxx, syy, sxy] = [&x, &y, &xx, &yy, &xy].map(|p| filter(p, h, w, &g));
        let mut sum = 0.0;
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            sum += ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        total += sum / mx.len() as f64;
    }
    Ok(total / c as f64)
}

/// A decibel value that serializes `+inf` as the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Db(pub f64);

impl Serialize for Db {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Db {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Db(v)),
            Raw::Text(t) if t == "inf" => Ok(Db(f64::INFINITY)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern() -> Image {
        Image::from_fn(3, 16, 16, |c, y, x| if (x / 2 + y / 2 + c) % 2 == 0 { 0.9 } else { 0.1 })
    }

    #[test]
    fn psnr_examples() {
        let a = pattern();
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        let b = Image::from_fn(3, 16, 16, |c, y, x| a.get(c, y, x) - 0.1);
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-5);
        assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
    }

    #[test]
    fn ssim_examples() {
        let a = pattern();
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let inv = Image::from_fn(3, 16, 16, |c, y, x| 1.0 - a.get(c, y, x));
        assert!(ssim(&a, &inv).unwrap() < 0.5);
        assert!(ssim(&Image::filled(3, 10, 16, 0.0), &Image::filled(3, 10, 16, 0.0)).is_err());
    }

    #[test]
    fn inf_serializes_as_string() {
        assert_eq!(serde_json::to_string(&Db(f64::INFINITY)).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&Db(20.5)).unwrap(), "20.5");
        let back: Vec<Db> = serde_json::from_str("[\"inf\", 3.0]").unwrap();
        assert_eq!(back, vec![Db(f64::INFINITY), Db(3.0)]);
    }
}
