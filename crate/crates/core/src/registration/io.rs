//! JSON documents consumed and produced by the registration commands.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::bundle::{Observation, ReconState};
use super::refine::PixelMatch;
use super::{Correspondence2D2D, Correspondence2D3D, RegistrationError};
use crate::camera::{CameraJson, CameraPose};
use crate::{Vec2, Vec3};

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T, RegistrationError> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

pub fn save_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<(), RegistrationError> {
    std::fs::write(path, serde_json::to_vec_pretty(value)?)?;
    Ok(())
}

/// Pixel pairs between two views, each row `[x0, y0, x1, y1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFile {
    pub views: [usize; 2],
    pub pairs: Vec<[f64; 4]>,
}

impl PairFile {
    pub fn correspondences(&self) -> Vec<Correspondence2D2D> {
        self.pairs
            .iter()
            .map(|p| Correspondence2D2D {
                x0: Vec2::new(p[0], p[1]),
                x1: Vec2::new(p[2], p[3]),
            })
            .collect()
    }

    pub fn from_correspondences(views: [usize; 2], corrs: &[Correspondence2D2D]) -> Self {
        Self {
            views,
            pairs: corrs
                .iter()
                .map(|c| [c.x0.x, c.x0.y, c.x1.x, c.x1.y])
                .collect(),
        }
    }
}

/// World points with their pixels in one view, each row `[X, Y, Z, x, y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFile {
    pub view: usize,
    pub points: Vec<[f64; 5]>,
}

impl PointFile {
    pub fn correspondences(&self) -> Vec<Correspondence2D3D> {
        self.points
            .iter()
            .map(|p| Correspondence2D3D {
                world: Vec3::new(p[0], p[1], p[2]),
                pixel: Vec2::new(p[3], p[4]),
            })
            .collect()
    }

    pub fn from_correspondences(view: usize, corrs: &[Correspondence2D3D]) -> Self {
        Self {
            view,
            points: corrs
                .iter()
                .map(|c| [c.world.x, c.world.y, c.world.z, c.pixel.x, c.pixel.y])
                .collect(),
        }
    }
}

/// Rendered-to-acquired pixel matches for depth-assisted refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchFile {
    pub matches: Vec<PixelMatch>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ObservationJson {
    view: usize,
    point: usize,
    pixel: [f64; 2],
    weight: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ReconJson {
    poses: Vec<CameraJson>,
    points: Vec<[f64; 3]>,
    observations: Vec<ObservationJson>,
}

impl ReconState {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RegistrationError> {
        let doc: ReconJson = load_json(path)?;
        let poses = doc
            .poses
            .iter()
            .map(CameraPose::from_json)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| RegistrationError::Invalid(e.to_string()))?;
        let state = ReconState {
            poses,
            points: doc
                .points
                .iter()
                .map(|p| Vec3::new(p[0], p[1], p[2]))
                .collect(),
            observations: doc
                .observations
                .iter()
                .map(|o| Observation {
                    view: o.view,
                    point: o.point,
                    pixel: Vec2::new(o.pixel[0], o.pixel[1]),
                    weight: o.weight,
                })
                .collect(),
        };
        state.validate()?;
        Ok(state)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RegistrationError> {
        let doc = ReconJson {
            poses: self.poses.iter().map(CameraPose::to_json).collect(),
            points: self.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            observations: self
                .observations
                .iter()
                .map(|o| ObservationJson {
                    view: o.view,
                    point: o.point,
                    pixel: [o.pixel.x, o.pixel.y],
                    weight: o.weight,
                })
                .collect(),
        };
        save_json(&doc, path)
    }
}
