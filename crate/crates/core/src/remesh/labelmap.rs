//! Superpixel label maps.

use std::collections::VecDeque;
use std::path::Path;

use image::{ImageBuffer, Luma};

use super::RemeshError;
use crate::Vec2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub width: u32,
    pub height: u32,
    /// Row-major superpixel ids.
    pub labels: Vec<u32>,
    pub k: u32,
}

impl LabelMap {
    pub fn new(width: u32, height: u32, labels: Vec<u32>, k: u32) -> Result<Self, RemeshError> {
        let map = Self {
            width,
            height,
            labels,
            k,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.labels[(y * self.width + x) as usize]
    }

    /// Label of the texel containing `uv`; the `u = 1` and `v = 1` edges fold
    /// into the last texel.
    pub fn at_uv(&self, uv: &Vec2) -> u32 {
        let x = ((uv.x * self.width as f64).floor() as i64).clamp(0, self.width as i64 - 1);
        let y = ((uv.y * self.height as f64).floor() as i64).clamp(0, self.height as i64 - 1);
        self.get(x as u32, y as u32)
    }

    /// Label of texel `(x, y)` with coordinates clamped into the map.
    pub(crate) fn clamped(&self, x: i64, y: i64) -> u32 {
        let x = x.clamp(0, self.width as i64 - 1) as u32;
        let y = y.clamp(0, self.height as i64 - 1) as u32;
        self.get(x, y)
    }

    /// Every label below `k`, every superpixel non-empty and 4-connected.
    pub fn validate(&self) -> Result<(), RemeshError> {
        let n = self.width as usize * self.height as usize;
        if self.labels.len() != n {
            return Err(RemeshError::Size(format!(
                "{} labels for a {}x{} map",
                self.labels.len(),
                self.width,
                self.height
            )));
        }
        let mut sizes = vec![0usize; self.k as usize];
        for (index, &label) in self.labels.iter().enumerate() {
            if label >= self.k {
                return Err(RemeshError::LabelRange {
                    index,
                    label,
                    k: self.k,
                });
            }
            sizes[label as usize] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(RemeshError::EmptySuperpixel(empty as u32));
        }
        let mut seen = vec![false; n];
        let mut seeds = vec![None; self.k as usize];
        for (i, &l) in self.labels.iter().enumerate() {
            seeds[l as usize].get_or_insert(i);
        }
        for (label, seed) in seeds.iter().enumerate() {
            let reached = flood(self, seed.expect("non-empty"), &mut seen);
            if reached != sizes[label] {
                return Err(RemeshError::Disconnected(label as u32));
            }
        }
        Ok(())
    }

    /// Writes the labels as a 16-bit grayscale PNG.
    pub fn save_png16(&self, path: impl AsRef<Path>) -> Result<(), RemeshError> {
        if self.k > u16::MAX as u32 + 1 {
            return Err(RemeshError::Size(format!(
                "k = {} does not fit 16 bits",
                self.k
            )));
        }
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(
            self.width,
            self.height,
            self.labels.iter().map(|&l| l as u16).collect(),
        )
        .expect("sized buffer");
        buf.save(path)?;
        Ok(())
    }

    /// Reads a 16-bit label PNG; `k` is one more than the largest label.
    pub fn load_png16(path: impl AsRef<Path>) -> Result<Self, RemeshError> {
        let img = image::open(path)?.into_luma16();
        let (width, height) = img.dimensions();
        let labels: Vec<u32> = img.into_raw().into_iter().map(u32::from).collect();
        let k = labels.iter().copied().max().map_or(0, |m| m + 1);
        Self::new(width, height, labels, k)
    }
}

/// Marks and counts the 4-connected component of `start`'s label.
pub(crate) fn flood(map: &LabelMap, start: usize, seen: &mut [bool]) -> usize {
    let w = map.width as usize;
    let h = map.height as usize;
    let label = map.labels[start];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut count = 0;
    while let Some(i) = queue.pop_front() {
        count += 1;
        let (x, y) = (i % w, i / w);
        let mut visit = |j: usize| {
            if !seen[j] && map.labels[j] == label {
                seen[j] = true;
                queue.push_back(j);
            }
        };
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < w {
            visit(i + 1);
        }
        if y > 0 {
            visit(i - w);
        }
        if y + 1 < h {
            visit(i + w);
        }
    }
    count
}
