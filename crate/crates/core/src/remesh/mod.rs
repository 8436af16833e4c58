//! Texture-aware remeshing.
//!
//! The texture atlas is partitioned into superpixels by hill-climbing the
//! energy `E = C + γG + βB`, and mesh faces are then cut along superpixel
//! boundaries so that per-vertex shading can follow texture edges.

mod energy;
mod labelmap;
mod split;
mod subdivide;
mod superpixel;

pub use energy::{energy, EnergyBreakdown, TextureFeatures, HIST_BINS};
pub use labelmap::LabelMap;
pub use split::{remesh, split_seams, RemeshReport, RemeshResult, SeamSplit};
pub use subdivide::{subdivide_midpoint, subdivide_to_budget};
pub use superpixel::{grid_labels, segment_superpixels, SegmentConfig, Segmentation};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RemeshError {
    #[error("superpixel {0} is empty")]
    EmptySuperpixel(u32),
    #[error("superpixel {0} is not 4-connected")]
    Disconnected(u32),
    #[error("label {label} at texel {index} is not below k = {k}")]
    LabelRange { index: usize, label: u32, k: u32 },
    #[error("k = {k} exceeds the {texels} texels")]
    TooManySuperpixels { k: u32, texels: usize },
    #[error("size mismatch: {0}")]
    Size(String),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error(transparent)]
    Codec(#[from] ::image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
