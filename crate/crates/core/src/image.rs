//! RGB images with an optional coverage mask, plus depth maps.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("pixel buffer has {got} entries, expected {expected}")]
    Size { expected: usize, got: usize },
    #[error("malformed depth file: {0}")]
    Depth(String),
    #[error(transparent)]
    Codec(#[from] ::image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major linear RGB in `[0, 1]`. `mask` marks the "effective" pixels that see geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: u32,
    height: u32,
    data: Vec<[f64; 3]>,
    mask: Option<Vec<bool>>,
}

impl Image {
    pub fn new(
        width: u32,
        height: u32,
        data: Vec<[f64; 3]>,
        mask: Option<Vec<bool>>,
    ) -> Result<Self, ImageError> {
        let expected = width as usize * height as usize;
        if data.len() != expected {
            return Err(ImageError::Size {
                expected,
                got: data.len(),
            });
        }
        if let Some(m) = &mask {
            if m.len() != expected {
                return Err(ImageError::Size {
                    expected,
                    got: m.len(),
                });
            }
        }
        Ok(Self {
            width,
            height,
            data,
            mask,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [f64; 3]) -> Self {
        Self {
            width,
            height,
            data: vec![rgb; width as usize * height as usize],
            mask: None,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.data
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn set_mask(&mut self, mask: Option<Vec<bool>>) -> Result<(), ImageError> {
        if let Some(m) = &mask {
            if m.len() != self.data.len() {
                return Err(ImageError::Size {
                    expected: self.data.len(),
                    got: m.len(),
                });
            }
        }
        self.mask = mask;
        Ok(())
    }

    pub fn get(&self, x: u32, y: u32) -> [f64; 3] {
        self.data[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [f64; 3]) {
        let w = self.width;
        self.data[(y * w + x) as usize] = rgb;
    }

    /// Rec. 601 luma per pixel.
    pub fn luminance(&self) -> Vec<f64> {
        self.data.iter().map(|p| luminance(*p)).collect()
    }

    /// 8-bit quantization used for PNG output and golden hashes.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().flat_map(|p| p.map(quantize_u8)).collect()
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        ::image::save_buffer(
            path,
            &self.to_rgb8(),
            self.width,
            self.height,
            ::image::ExtendedColorType::Rgb8,
        )?;
        Ok(())
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        let img = ::image::open(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        let data = img
            .pixels()
            .map(|p| p.0.map(|c| c as f64 / 255.0))
            .collect();
        Self::new(w, h, data, None)
    }
}

pub fn luminance(p: [f64; 3]) -> f64 {
    0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
}

pub fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Camera-space depth per pixel; pixels without geometry hold [`DepthImage::BACKGROUND`].
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f64>,
}

const DEPTH_MAGIC: &[u8; 4] = b"DPTH";

impl DepthImage {
    pub const BACKGROUND: f64 = f64::INFINITY;

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.depth[(y * self.width + x) as usize]
    }

    pub fn is_background(&self, x: u32, y: u32) -> bool {
        self.get(x, y) == Self::BACKGROUND
    }

    /// `DPTH`, width, height (u32 LE), then row-major f32 LE depths.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.depth.len());
        out.extend_from_slice(DEPTH_MAGIC);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        for d in &self.depth {
            out.extend_from_slice(&(*d as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ImageError> {
        if bytes.len() < 12 || &bytes[..4] != DEPTH_MAGIC {
            return Err(ImageError::Depth("missing DPTH header".into()));
        }
        let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let n = width as usize * height as usize;
        if bytes.len() != 12 + 4 * n {
            return Err(ImageError::Depth(format!(
                "expected {} bytes, found {}",
                12 + 4 * n,
                bytes.len()
            )));
        }
        let depth = bytes[12..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Ok(Self {
            width,
            height,
            depth,
        })
    }

    /// Grayscale preview: near is bright, background black.
    pub fn preview(&self) -> Image {
        let finite: Vec<f64> = self
            .depth
            .iter()
            .copied()
            .filter(|d| d.is_finite())
            .collect();
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = (hi - lo).max(1e-12);
        let data = self
            .depth
            .iter()
            .map(|d| {
                if d.is_finite() {
                    let v = 1.0 - 0.8 * (d - lo) / span;
                    [v; 3]
                } else {
                    [0.0; 3]
                }
            })
            .collect();
        Image::new(self.width, self.height, data, None).expect("consistent size")
    }
}
