//! Turning captured samples into network training data.
//!
//! Order of operations: cull occluded and back-facing samples, split each
//! lumisphere into a median diffuse color and per-sample residuals, mirror
//! view directions about the vertex normal, then encode `(u, v, d)` and the
//! residual into `[-1, 1]^5` inputs and `[0, 1]^3` targets.

use thiserror::Error;

use crate::camera::CameraPose;
use crate::dataset::{DirectionSpace, SlfDataset, UNIT_TOL};
use crate::mesh::Mesh;
use crate::renderer;
use crate::{Vec2, Vec3};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("empty lumisphere")]
    EmptyLumisphere,
    #[error("dataset already holds residuals")]
    AlreadyResidual,
    #[error("expected {0:?} direction space")]
    DirectionSpace(DirectionSpace),
    #[error("dataset has no residuals")]
    NotResidual,
    #[error("direction is not unit length (norm {0})")]
    NonUnit(f64),
    #[error("sample {0} has no camera provenance")]
    MissingProvenance(usize),
    #[error("sample {sample} references camera {camera}, only {count} given")]
    UnknownCamera {
        sample: usize,
        camera: u32,
        count: usize,
    },
    #[error("sample {sample}: residual {value} outside [-1, 1]")]
    ResidualRange { sample: usize, value: f32 },
    #[error("dataset is for {dataset} vertices, mesh has {mesh}")]
    MeshMismatch { dataset: u32, mesh: usize },
}

/// Per-channel lower median of a vertex's observations.
pub fn diffuse_component(obs: &[[f32; 3]]) -> Result<[f32; 3], PreprocessError> {
    if obs.is_empty() {
        return Err(PreprocessError::EmptyLumisphere);
    }
    let mid = (obs.len() - 1) / 2;
    let mut out = [0.0; 3];
    let mut channel: Vec<f32> = Vec::with_capacity(obs.len());
    for (c, slot) in out.iter_mut().enumerate() {
        channel.clear();
        channel.extend(obs.iter().map(|o| o[c]));
        channel.sort_by(f32::total_cmp);
        *slot = channel[mid];
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeparationReport {
    /// Vertices without samples; their diffuse entry is black.
    pub skipped: Vec<u32>,
}

/// Replaces raw colors by `rgb - diffuse` and attaches the diffuse table.
pub fn to_residuals(ds: &SlfDataset) -> Result<(SlfDataset, SeparationReport), PreprocessError> {
    if ds.residual {
        return Err(PreprocessError::AlreadyResidual);
    }
    let groups = ds.samples_by_vertex();
    let mut diffuse = vec![[0.0f32; 3]; ds.vertex_count as usize];
    let mut report = SeparationReport::default();
    let mut obs = Vec::new();
    for (v, idx) in groups.iter().enumerate() {
        if idx.is_empty() {
            report.skipped.push(v as u32);
            continue;
        }
        obs.clear();
        obs.extend(idx.iter().map(|&i| ds.samples[i].rgb));
        diffuse[v] = diffuse_component(&obs)?;
    }
    let mut out = ds.clone();
    for s in &mut out.samples {
        let d = diffuse[s.vertex_id as usize];
        for c in 0..3 {
            s.rgb[c] -= d[c];
        }
    }
    out.residual = true;
    out.diffuse = Some(diffuse);
    Ok((out, report))
}

/// Undoes [`to_residuals`].
pub fn from_residuals(ds: &SlfDataset) -> Result<SlfDataset, PreprocessError> {
    let diffuse = match (&ds.diffuse, ds.residual) {
        (Some(d), true) => d,
        _ => return Err(PreprocessError::NotResidual),
    };
    let mut out = ds.clone();
    for s in &mut out.samples {
        let d = diffuse[s.vertex_id as usize];
        for c in 0..3 {
            s.rgb[c] += d[c];
        }
    }
    out.residual = false;
    out.diffuse = None;
    Ok(out)
}

/// `2 (n . d) n - d` without input checks.
pub fn reflect(d: &Vec3, n: &Vec3) -> Vec3 {
    n * (2.0 * n.dot(d)) - d
}

/// Mirrors the outgoing direction about the normal so that specular lobes
/// from differently oriented vertices line up.
pub fn invert_direction(d: &Vec3, n: &Vec3) -> Result<Vec3, PreprocessError> {
    for v in [d, n] {
        let norm = v.norm();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(PreprocessError::NonUnit(norm));
        }
    }
    Ok(reflect(d, n))
}

fn to_vec3(d: [f32; 3]) -> Vec3 {
    Vec3::new(d[0] as f64, d[1] as f64, d[2] as f64)
}

/// Rewrites raw directions into the inverted space using the mesh normals.
pub fn to_inverted(ds: &SlfDataset, mesh: &Mesh) -> Result<SlfDataset, PreprocessError> {
    if ds.direction_space != DirectionSpace::Raw {
        return Err(PreprocessError::DirectionSpace(DirectionSpace::Raw));
    }
    check_mesh(ds, mesh)?;
    let mut out = ds.clone();
    for s in &mut out.samples {
        let d = to_vec3(s.direction).normalize();
        let r = invert_direction(&d, &mesh.normals()[s.vertex_id as usize])?.normalize();
        s.direction = [r.x as f32, r.y as f32, r.z as f32];
    }
    out.direction_space = DirectionSpace::Inverted;
    Ok(out)
}

fn check_mesh(ds: &SlfDataset, mesh: &Mesh) -> Result<(), PreprocessError> {
    if ds.vertex_count as usize != mesh.vertex_count() {
        return Err(PreprocessError::MeshMismatch {
            dataset: ds.vertex_count,
            mesh: mesh.vertex_count(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CullReport {
    /// Samples whose vertex is hidden in the source camera.
    pub occluded: usize,
    /// Samples with `n . d < 0` under the interpolated normal.
    pub back_facing: usize,
    /// Indices (into the input) of every removed sample.
    pub removed: Vec<usize>,
}

/// Drops samples whose vertex fails the z-buffer test in its source camera,
/// and samples that look at the vertex from below its tangent plane.
pub fn cull_occluded(
    ds: &SlfDataset,
    mesh: &Mesh,
    cameras: &[CameraPose],
) -> Result<(SlfDataset, CullReport), PreprocessError> {
    if ds.direction_space != DirectionSpace::Raw {
        return Err(PreprocessError::DirectionSpace(DirectionSpace::Raw));
    }
    check_mesh(ds, mesh)?;
    for (i, s) in ds.samples.iter().enumerate() {
        match s.camera {
            None => return Err(PreprocessError::MissingProvenance(i)),
            Some(c) if c as usize >= cameras.len() => {
                return Err(PreprocessError::UnknownCamera {
                    sample: i,
                    camera: c,
                    count: cameras.len(),
                })
            }
            _ => {}
        }
    }
    let mut visibility: Vec<Option<Vec<bool>>> = vec![None; cameras.len()];
    let mut report = CullReport::default();
    let mut out = ds.clone();
    out.samples.clear();
    for (i, s) in ds.samples.iter().enumerate() {
        let cam = s.camera.expect("checked above") as usize;
        let vis = visibility[cam].get_or_insert_with(|| {
            let buf = renderer::rasterize(mesh, &cameras[cam], false);
            renderer::visible_vertices(mesh, &cameras[cam], &buf)
        });
        let v = s.vertex_id as usize;
        if !vis[v] {
            report.occluded += 1;
            report.removed.push(i);
        } else if mesh.normals()[v].dot(&to_vec3(s.direction)) < 0.0 {
            report.back_facing += 1;
            report.removed.push(i);
        } else {
            out.samples.push(*s);
        }
    }
    Ok((out, report))
}

/// Network input row `(2u - 1, 2v - 1, dx, dy, dz)`.
pub fn encode_input(uv: &Vec2, d: &Vec3) -> [f32; 5] {
    [
        (2.0 * uv.x - 1.0) as f32,
        (2.0 * uv.y - 1.0) as f32,
        d.x as f32,
        d.y as f32,
        d.z as f32,
    ]
}

pub fn decode_input(row: &[f32; 5]) -> (Vec2, Vec3) {
    (
        Vec2::new((row[0] as f64 + 1.0) / 2.0, (row[1] as f64 + 1.0) / 2.0),
        Vec3::new(row[2] as f64, row[3] as f64, row[4] as f64),
    )
}

/// Residual in `[-1, 1]` to sigmoid target in `[0, 1]`.
pub fn encode_target(r: f32) -> f32 {
    (r + 1.0) * 0.5
}

pub fn decode_target(q: f32) -> f32 {
    2.0 * q - 1.0
}

/// Row-major training tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub inputs: Vec<f32>,
    pub targets: Vec<f32>,
    pub vertex_ids: Vec<u32>,
}

impl TrainingSet {
    pub const INPUT_DIM: usize = 5;
    pub const OUTPUT_DIM: usize = 3;

    pub fn len(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_ids.is_empty()
    }

    /// Subset by row indices, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut out = Self {
            inputs: Vec::with_capacity(rows.len() * 5),
            targets: Vec::with_capacity(rows.len() * 3),
            vertex_ids: Vec::with_capacity(rows.len()),
        };
        for &r in rows {
            out.inputs.extend_from_slice(&self.inputs[r * 5..r * 5 + 5]);
            out.targets
                .extend_from_slice(&self.targets[r * 3..r * 3 + 3]);
            out.vertex_ids.push(self.vertex_ids[r]);
        }
        out
    }
}

pub fn encode_training_tuples(
    ds: &SlfDataset,
    mesh: &Mesh,
) -> Result<TrainingSet, PreprocessError> {
    if !ds.residual {
        return Err(PreprocessError::NotResidual);
    }
    if ds.direction_space != DirectionSpace::Inverted {
        return Err(PreprocessError::DirectionSpace(DirectionSpace::Inverted));
    }
    check_mesh(ds, mesh)?;
    let n = ds.samples.len();
    let mut set = TrainingSet {
        inputs: Vec::with_capacity(n * 5),
        targets: Vec::with_capacity(n * 3),
        vertex_ids: Vec::with_capacity(n),
    };
    for (i, s) in ds.samples.iter().enumerate() {
        for &r in &s.rgb {
            if !(-1.0..=1.0).contains(&r) {
                return Err(PreprocessError::ResidualRange {
                    sample: i,
                    value: r,
                });
            }
        }
        let uv = mesh.uvs()[s.vertex_id as usize];
        set.inputs
            .extend_from_slice(&encode_input(&uv, &to_vec3(s.direction)));
        set.targets.extend(s.rgb.iter().map(|&r| encode_target(r)));
        set.vertex_ids.push(s.vertex_id);
    }
    Ok(set)
}

/// Full preprocessing chain; returns the residual, inverted dataset plus both reports.
pub fn prepare(
    raw: &SlfDataset,
    mesh: &Mesh,
    cameras: &[CameraPose],
) -> Result<(SlfDataset, CullReport, SeparationReport), PreprocessError> {
    let (culled, cull) = cull_occluded(raw, mesh, cameras)?;
    let (residual, sep) = to_residuals(&culled)?;
    let inverted = to_inverted(&residual, mesh)?;
    Ok((inverted, cull, sep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RaySample;

    #[test]
    fn odd_median() {
        let d = diffuse_component(&[[0.2, 0.0, 0.0], [0.9, 0.0, 0.0], [0.5, 0.0, 0.0]]).unwrap();
        assert_eq!(d[0], 0.5);
    }

    #[test]
    fn even_count_takes_lower_median() {
        let d = diffuse_component(&[[0.4; 3], [0.1; 3], [0.3; 3], [0.2; 3]]).unwrap();
        assert_eq!(d, [0.2; 3]);
    }

    #[test]
    fn single_and_empty() {
        assert_eq!(
            diffuse_component(&[[0.3, 0.6, 0.9]]).unwrap(),
            [0.3, 0.6, 0.9]
        );
        assert!(diffuse_component(&[]).is_err());
    }

    #[test]
    fn examples_of_inversion() {
        let n = Vec3::z();
        assert_eq!(invert_direction(&n, &n).unwrap(), n);
        let s = 0.5f64.sqrt();
        let r = invert_direction(&Vec3::new(s, 0.0, s), &n).unwrap();
        assert!((r - Vec3::new(-s, 0.0, s)).norm() < 1e-15);
        assert!(invert_direction(&Vec3::new(0.0, 0.0, 1.1), &n).is_err());
    }

    #[test]
    fn constant_lumisphere_has_zero_residuals() {
        let ds = SlfDataset {
            mesh_ref: String::new(),
            vertex_count: 2,
            samples: (0..5)
                .map(|i| RaySample {
                    vertex_id: 1,
                    direction: [0.0, 0.0, 1.0],
                    rgb: [0.25, 0.5, 0.75],
                    camera: Some(i),
                })
                .collect(),
            direction_space: DirectionSpace::Raw,
            residual: false,
            diffuse: None,
        };
        let (res, report) = to_residuals(&ds).unwrap();
        assert_eq!(report.skipped, vec![0]);
        assert!(res.samples.iter().all(|s| s.rgb == [0.0; 3]));
        assert_eq!(from_residuals(&res).unwrap(), ds);
    }

    #[test]
    fn target_map() {
        assert_eq!(encode_target(0.0), 0.5);
        let row = encode_input(&Vec2::new(0.5, 0.5), &Vec3::z());
        assert_eq!(&row[..2], &[0.0, 0.0]);
        for r in [-1.0f32, -0.3, 0.0, 0.77, 1.0] {
            assert!((decode_target(encode_target(r)) - r).abs() < 1e-7);
        }
    }
}
