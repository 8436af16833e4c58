//! Superpixel energy `E = C + γG + βB` on a luminance texture.
//!
//! * `C` rewards superpixels whose texels agree on the sign of the gradient:
//!   `Σ_k (mean of sign Δ(i) over A_k)²`, where `Δ` is the forward-difference
//!   gradient signed by its dominant axis component.
//! * `G` rewards a narrow Laplacian histogram centered at zero: per superpixel,
//!   the mass of the modal bin of a 16-bin histogram over `[-1, 1]`, counted
//!   only when the modal bin is the one holding zero.
//! * `B` rewards compact boundaries: `Σ_i Σ_k (n_ik / 9)²`, with `n_ik` the
//!   number of texels of superpixel `k` in the 3x3 patch around `i`.

use super::{LabelMap, RemeshError};

pub const HIST_BINS: usize = 16;
/// Bin holding a Laplacian of exactly zero: `[0, 1/8)`.
pub(crate) const ZERO_BIN: usize = HIST_BINS / 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub c: f64,
    pub g: f64,
    pub b: f64,
    pub e: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl EnergyBreakdown {
    pub(crate) fn combine(c: f64, g: f64, b: f64, gamma: f64, beta: f64) -> Self {
        Self {
            c,
            g,
            b,
            e: c + gamma * g + beta * b,
            gamma,
            beta,
        }
    }
}

/// Per-texel quantities the energy depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureFeatures {
    pub width: u32,
    pub height: u32,
    /// Sign of the dominant-axis forward difference, in `{-1, 0, 1}`.
    pub sign: Vec<i8>,
    /// Histogram bin of the Laplacian.
    pub bin: Vec<u8>,
}

impl TextureFeatures {
    pub fn new(width: u32, height: u32, luminance: &[f64]) -> Result<Self, RemeshError> {
        let (w, h) = (width as usize, height as usize);
        if luminance.len() != w * h || w == 0 || h == 0 {
            return Err(RemeshError::Size(format!(
                "{} luminance values for a {width}x{height} texture",
                luminance.len()
            )));
        }
        let at = |x: usize, y: usize| luminance[y * w + x];
        let mut sign = Vec::with_capacity(w * h);
        let mut bin = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let l = at(x, y);
                let gx = if x + 1 < w { at(x + 1, y) - l } else { 0.0 };
                let gy = if y + 1 < h { at(x, y + 1) - l } else { 0.0 };
                let dominant = if gx.abs() >= gy.abs() { gx } else { gy };
                sign.push(if dominant > 0.0 {
                    1
                } else if dominant < 0.0 {
                    -1
                } else {
                    0
                });
                // replicated borders
                let lap = at(x.saturating_sub(1), y)
                    + at((x + 1).min(w - 1), y)
                    + at(x, y.saturating_sub(1))
                    + at(x, (y + 1).min(h - 1))
                    - 4.0 * l;
                let b = ((lap.clamp(-1.0, 1.0) + 1.0) * (HIST_BINS as f64 / 2.0)).floor() as usize;
                bin.push(b.min(HIST_BINS - 1) as u8);
            }
        }
        Ok(Self {
            width,
            height,
            sign,
            bin,
        })
    }
}

/// `(S_k / Z_k)²`.
pub(crate) fn c_term(sign_sum: i64, size: usize) -> f64 {
    if size == 0 {
        return 0.0;
    }
    let m = sign_sum as f64 / size as f64;
    m * m
}

/// Zero-bin mass if that bin is modal, else 0.
pub(crate) fn g_term(hist: &[u32; HIST_BINS], size: usize) -> f64 {
    if size == 0 {
        return 0.0;
    }
    let max = *hist.iter().max().unwrap();
    if hist[ZERO_BIN] == max {
        hist[ZERO_BIN] as f64 / size as f64
    } else {
        0.0
    }
}

/// `Σ_i Σ_k n_ik²` over all texel patches (an integer; `B` is this over 81).
pub(crate) fn patch_square_sum(map: &LabelMap) -> i64 {
    let (w, h) = (map.width as i64, map.height as i64);
    let mut total = 0i64;
    let mut counts: Vec<(u32, i64)> = Vec::with_capacity(9);
    for y in 0..h {
        for x in 0..w {
            counts.clear();
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let l = map.get(nx as u32, ny as u32);
                    match counts.iter_mut().find(|(k, _)| *k == l) {
                        Some((_, c)) => *c += 1,
                        None => counts.push((l, 1)),
                    }
                }
            }
            total += counts.iter().map(|(_, c)| c * c).sum::<i64>();
        }
    }
    total
}

/// Evaluates the three terms for a label map over a luminance texture.
pub fn energy(
    map: &LabelMap,
    luminance: &[f64],
    gamma: f64,
    beta: f64,
) -> Result<EnergyBreakdown, RemeshError> {
    let feat = TextureFeatures::new(map.width, map.height, luminance)?;
    energy_from_features(map, &feat, gamma, beta)
}

pub(crate) fn energy_from_features(
    map: &LabelMap,
    feat: &TextureFeatures,
    gamma: f64,
    beta: f64,
) -> Result<EnergyBreakdown, RemeshError> {
    if map.width != feat.width || map.height != feat.height {
        return Err(RemeshError::Size(format!(
            "label map {}x{} vs texture {}x{}",
            map.width, map.height, feat.width, feat.height
        )));
    }
    let k = map.k as usize;
    let mut size = vec![0usize; k];
    let mut sum = vec![0i64; k];
    let mut hist = vec![[0u32; HIST_BINS]; k];
    for (i, &l) in map.labels.iter().enumerate() {
        if l as usize >= k {
            return Err(RemeshError::LabelRange {
                index: i,
                label: l,
                k: map.k,
            });
        }
        let l = l as usize;
        size[l] += 1;
        sum[l] += feat.sign[i] as i64;
        hist[l][feat.bin[i] as usize] += 1;
    }
    if let Some(empty) = size.iter().position(|&s| s == 0) {
        return Err(RemeshError::EmptySuperpixel(empty as u32));
    }
    let c = (0..k).map(|l| c_term(sum[l], size[l])).sum();
    let g = (0..k).map(|l| g_term(&hist[l], size[l])).sum();
    let b = patch_square_sum(map) as f64 / 81.0;
    Ok(EnergyBreakdown::combine(c, g, b, gamma, beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn columns(w: u32, h: u32, split: u32) -> LabelMap {
        let labels = (0..w * h).map(|i| u32::from(i % w >= split)).collect();
        LabelMap::new(w, h, labels, 2).unwrap()
    }

    #[test]
    fn flat_texture() {
        let labels: Vec<u32> = (0..64).map(|i| (i % 8 / 4 + i / 32 * 2) as u32).collect();
        let map = LabelMap::new(8, 8, labels, 4).unwrap();
        let e = energy(&map, &[0.4; 64], 1.0, 0.5).unwrap();
        assert_eq!(e.c, 0.0);
        assert_eq!(e.g, 4.0);
        assert_eq!(e.e, e.c + e.gamma * e.g + e.beta * e.b);
    }

    #[test]
    fn edge_aligned_split_maximizes_c() {
        // step between columns 3 and 4; only column 3 has a non-zero forward difference
        let lum: Vec<f64> = (0..64).map(|i| if i % 8 < 4 { 0.2 } else { 0.8 }).collect();
        let scores: Vec<f64> = (1..8)
            .map(|split| energy(&columns(8, 8, split), &lum, 1.0, 0.5).unwrap().c)
            .collect();
        let best = (0..scores.len())
            .max_by(|&a, &b| scores[a].total_cmp(&scores[b]))
            .unwrap()
            + 1;
        assert_eq!(best, 4);
        // the straddling split (0..6 | 6..8) improves when moved onto the edge
        assert!(scores[3] > scores[5]);
        assert_eq!(scores[3], 1.0 / 16.0);
    }

    #[test]
    fn blocky_boundaries_score_higher() {
        let blocky: Vec<u32> = (0..64u32).map(|i| i % 8 / 4 + i / 32 * 2).collect();
        let mut jagged = blocky.clone();
        // texel (3, 1) joins its right neighbour's superpixel
        jagged[8 + 3] = 1;
        let lum = vec![0.5; 64];
        let a = energy(&LabelMap::new(8, 8, blocky, 4).unwrap(), &lum, 1.0, 0.5).unwrap();
        let b = energy(&LabelMap::new(8, 8, jagged, 4).unwrap(), &lum, 1.0, 0.5).unwrap();
        assert!(a.b > b.b);
    }

    #[test]
    fn patch_sum_closed_form() {
        // single label: every patch holds all its in-image texels
        let map = LabelMap::new(3, 3, vec![0; 9], 1).unwrap();
        // corner patches 4 texels, edges 6, center 9
        assert_eq!(patch_square_sum(&map), 4 * 16 + 4 * 36 + 81);
    }
}
