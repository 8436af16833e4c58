//! Image quality over effective (masked) pixels, and compression ratios.

use thiserror::Error;

use crate::image::{luminance, Image};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("images differ in size: {0}x{1} vs {2}x{3}")]
    Dims(u32, u32, u32, u32),
    #[error("mask has {got} entries for {expected} pixels")]
    MaskSize { expected: usize, got: usize },
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("images must be at least 11x11 for SSIM")]
    TooSmall,
    #[error("sizes must be positive")]
    ZeroSize,
}

fn check(a: &Image, b: &Image, mask: &[bool]) -> Result<(), MetricError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricError::Dims(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ));
    }
    if mask.len() != a.pixels().len() {
        return Err(MetricError::MaskSize {
            expected: a.pixels().len(),
            got: mask.len(),
        });
    }
    if !mask.iter().any(|&m| m) {
        return Err(MetricError::EmptyMask);
    }
    Ok(())
}

/// Mean squared error over the masked pixels and all three channels.
pub fn masked_mse(a: &Image, b: &Image, mask: &[bool]) -> Result<f64, MetricError> {
    check(a, b, mask)?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((pa, pb), &m) in a.pixels().iter().zip(b.pixels()).zip(mask) {
        if m {
            for c in 0..3 {
                let d = pa[c] - pb[c];
                sum += d * d;
            }
            n += 3;
        }
    }
    Ok(sum / n as f64)
}

/// `10 log10(1 / MSE)` in dB; identical images give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image, mask: &[bool]) -> Result<f64, MetricError> {
    let mse = masked_mse(a, b, mask)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

pub fn rmse(a: &Image, b: &Image, mask: &[bool]) -> Result<f64, MetricError> {
    Ok(masked_mse(a, b, mask)?.sqrt())
}

pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut w = [0.0; SSIM_WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let x = i as f64 - r;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    w
}

/// Single-scale SSIM on luminance with an 11x11 Gaussian window. Windows are
/// centered on masked pixels whose full window fits in the image, and only
/// masked pixels contribute to a window (weights renormalized), so values
/// outside the mask never matter.
pub fn ssim(a: &Image, b: &Image, mask: &[bool]) -> Result<f64, MetricError> {
    check(a, b, mask)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricError::TooSmall);
    }
    let la: Vec<f64> = a.pixels().iter().map(|p| luminance(*p)).collect();
    let lb: Vec<f64> = b.pixels().iter().map(|p| luminance(*p)).collect();
    let g = gaussian_window();
    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    let r = SSIM_WINDOW / 2;
    let mut total = 0.0;
    let mut count = 0usize;
    for cy in r..h - r {
        for cx in r..w - r {
            if !mask[cy * w + cx] {
                continue;
            }
            let (mut sw, mut ma, mut mb) = (0.0, 0.0, 0.0);
            for dy in 0..SSIM_WINDOW {
                for dx in 0..SSIM_WINDOW {
                    let i = (cy + dy - r) * w + (cx + dx - r);
                    if mask[i] {
                        let wt = g[dy] * g[dx];
                        sw += wt;
                        ma += wt * la[i];
                        mb += wt * lb[i];
                    }
                }
            }
            ma /= sw;
            mb /= sw;
            let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
            for dy in 0..SSIM_WINDOW {
                for dx in 0..SSIM_WINDOW {
                    let i = (cy + dy - r) * w + (cx + dx - r);
                    if mask[i] {
                        let wt = g[dy] * g[dx];
                        let (da, db) = (la[i] - ma, lb[i] - mb);
                        vaa += wt * da * da;
                        vbb += wt * db * db;
                        vab += wt * da * db;
                    }
                }
            }
            vaa /= sw;
            vbb /= sw;
            vab /= sw;
            // written so that identical inputs give exactly 1
            let num = (2.0 * ma * mb + c1) * (2.0 * vab + c2);
            let den = (ma * ma + mb * mb + c1) * (vaa + vbb + c2);
            total += num / den;
            count += 1;
        }
    }
    if count == 0 {
        return Err(MetricError::EmptyMask);
    }
    Ok(total / count as f64)
}

/// Raw bytes over compressed bytes.
pub fn compression_rate(raw_bytes: f64, compressed_bytes: f64) -> Result<f64, MetricError> {
    if !(raw_bytes > 0.0 && compressed_bytes > 0.0) {
        return Err(MetricError::ZeroSize);
    }
    Ok(raw_bytes / compressed_bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: u32, h: u32, f: impl Fn(u32, u32) -> f64) -> Image {
        let data = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| [f(x, y); 3])
            .collect();
        Image::new(w, h, data, None).unwrap()
    }

    #[test]
    fn psnr_closed_form() {
        let a = img(8, 8, |_, _| 0.3);
        let b = img(8, 8, |_, _| 0.4);
        let mask = vec![true; 64];
        let v = psnr(&a, &b, &mask).unwrap();
        assert!((v - 20.0).abs() < 1e-9, "{v}");
        assert_eq!(psnr(&a, &a, &mask).unwrap(), f64::INFINITY);
    }

    #[test]
    fn errors() {
        let a = img(12, 12, |_, _| 0.0);
        let b = img(11, 12, |_, _| 0.0);
        assert!(matches!(
            psnr(&a, &b, &[true; 144]),
            Err(MetricError::Dims(..))
        ));
        assert_eq!(psnr(&a, &a, &[false; 144]), Err(MetricError::EmptyMask));
        let small = img(10, 10, |_, _| 0.0);
        assert_eq!(
            ssim(&small, &small, &[true; 100]),
            Err(MetricError::TooSmall)
        );
    }

    #[test]
    fn ssim_identity_and_anticorrelation() {
        let a = img(24, 20, |x, y| {
            ((x * 7 + y * 3) % 11) as f64 / 10.0 * 0.8 + 0.1
        });
        let mask = vec![true; 480];
        assert_eq!(ssim(&a, &a, &mask).unwrap(), 1.0);
        let inv = img(24, 20, |x, y| {
            1.0 - (((x * 7 + y * 3) % 11) as f64 / 10.0 * 0.8 + 0.1)
        });
        assert!(ssim(&a, &inv, &mask).unwrap() < 0.0);
    }

    #[test]
    fn ssim_constant_closed_form() {
        let a = img(16, 16, |_, _| 0.5);
        let b = img(16, 16, |_, _| 0.6);
        let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
        let mu_b = luminance([0.6; 3]);
        let mu_a = luminance([0.5; 3]);
        let expected = (2.0 * mu_a * mu_b + c1) * c2 / ((mu_a * mu_a + mu_b * mu_b + c1) * c2);
        let v = ssim(&a, &b, &[true; 256]).unwrap();
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
    }

    #[test]
    fn compression_examples() {
        let r = compression_rate(2.003e9, 0.79e6).unwrap();
        assert!((r - 2535.44).abs() < 0.01);
        assert_eq!(compression_rate(5.0, 5.0).unwrap(), 1.0);
        assert!(compression_rate(0.0, 1.0).is_err());
    }
}
