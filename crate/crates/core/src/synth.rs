//! Analytic scenes: procedural meshes, Phong materials, camera rigs and captured sample sets.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{intrinsics_from_fov, CameraPose};
use crate::dataset::{DirectionSpace, RaySample, SlfDataset};
use crate::image::Image;
use crate::mesh::{Mesh, MeshError};
use crate::renderer;
use crate::{Vec2, Vec3};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid material {index}: {msg}")]
    Material { index: usize, msg: String },
    #[error("scene needs at least one light")]
    NoLights,
    #[error("invalid scene: {0}")]
    Scene(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub kd: [f64; 3],
    pub ks: [f64; 3],
    pub shininess: f64,
}

impl Material {
    pub fn validate(&self) -> Result<(), String> {
        for c in 0..3 {
            if !(0.0..=1.0).contains(&self.kd[c]) || !(0.0..=1.0).contains(&self.ks[c]) {
                return Err("albedo outside [0,1]".into());
            }
            if self.kd[c] + self.ks[c] > 1.0 {
                return Err(format!("kd + ks exceeds 1 in channel {c}"));
            }
        }
        if !(self.shininess.is_finite() && self.shininess > 0.0) {
            return Err("shininess must be finite and positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointLight {
    pub position: [f64; 3],
    pub intensity: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Icosphere {
        level: u32,
        radius: f64,
    },
    Torus {
        major: f64,
        minor: f64,
        segments: u32,
        rings: u32,
    },
    /// Square grid in the `z = 0` plane, facing `+z`.
    Plane {
        size: f64,
        cells: u32,
    },
    Obj {
        path: PathBuf,
    },
}

/// Which material each surface point uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Assignment {
    Uniform,
    PerVertex {
        ids: Vec<u32>,
    },
    /// Row-major material id per texel; texel `(x, y)` covers `u in [x/w, (x+1)/w)`, `v in [y/h, (y+1)/h)`.
    Texture {
        width: u32,
        height: u32,
        labels: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub primitive: Primitive,
    pub materials: Vec<Material>,
    #[serde(default = "uniform")]
    pub assignment: Assignment,
    pub lights: Vec<PointLight>,
    #[serde(default)]
    pub ambient: [f64; 3],
}

fn uniform() -> Assignment {
    Assignment::Uniform
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub name: String,
    pub mesh: Mesh,
    pub materials: Vec<Material>,
    pub assignment: Assignment,
    /// Material index per vertex.
    pub vertex_material: Vec<u32>,
    pub lights: Vec<PointLight>,
    pub ambient: Vec3,
}

impl SceneConfig {
    /// The glossy sphere used throughout the tests and the default pipeline.
    pub fn glossy_sphere(level: u32) -> Self {
        Self {
            primitive: Primitive::Icosphere { level, radius: 1.0 },
            materials: vec![Material {
                kd: [0.45, 0.3, 0.2],
                ks: [0.5, 0.5, 0.5],
                shininess: 24.0,
            }],
            assignment: Assignment::Uniform,
            lights: vec![
                PointLight {
                    position: [3.0, 2.0, 3.0],
                    intensity: [14.0, 14.0, 14.0],
                },
                PointLight {
                    position: [-3.0, -1.0, 1.5],
                    intensity: [6.0, 6.0, 7.0],
                },
            ],
            ambient: [0.08, 0.08, 0.08],
        }
    }

    /// Same sphere with no specular term.
    pub fn lambertian_sphere(level: u32) -> Self {
        let mut cfg = Self::glossy_sphere(level);
        cfg.materials[0].ks = [0.0; 3];
        cfg
    }
}

pub fn make_scene(cfg: &SceneConfig) -> Result<Scene, SynthError> {
    if cfg.lights.is_empty() {
        return Err(SynthError::NoLights);
    }
    if cfg.materials.is_empty() {
        return Err(SynthError::Scene("no materials".into()));
    }
    for (index, m) in cfg.materials.iter().enumerate() {
        m.validate()
            .map_err(|msg| SynthError::Material { index, msg })?;
    }
    let (name, mesh) = match &cfg.primitive {
        Primitive::Icosphere { level, radius } => {
            (format!("icosphere-{level}"), icosphere(*level, *radius)?)
        }
        Primitive::Torus {
            major,
            minor,
            segments,
            rings,
        } => (
            "torus".to_string(),
            torus(*major, *minor, *segments, *rings)?,
        ),
        Primitive::Plane { size, cells } => ("plane".to_string(), plane(*size, *cells)?),
        Primitive::Obj { path } => (path.display().to_string(), Mesh::load_obj(path)?),
    };
    let vertex_material: Vec<u32> = match &cfg.assignment {
        Assignment::Uniform => vec![0; mesh.vertex_count()],
        Assignment::PerVertex { ids } => {
            if ids.len() != mesh.vertex_count() {
                return Err(SynthError::Scene(format!(
                    "{} material ids for {} vertices",
                    ids.len(),
                    mesh.vertex_count()
                )));
            }
            ids.clone()
        }
        Assignment::Texture {
            width,
            height,
            labels,
        } => {
            if labels.len() != (*width as usize) * (*height as usize) || labels.is_empty() {
                return Err(SynthError::Scene("material texture size mismatch".into()));
            }
            mesh.uvs()
                .iter()
                .map(|uv| texel_label(*width, *height, labels, uv))
                .collect()
        }
    };
    let count = cfg.materials.len() as u32;
    let check_ids: Box<dyn Iterator<Item = &u32>> = match &cfg.assignment {
        Assignment::Texture { labels, .. } => Box::new(labels.iter()),
        _ => Box::new(vertex_material.iter()),
    };
    for &id in check_ids {
        if id >= count {
            return Err(SynthError::Scene(format!("material id {id} out of range")));
        }
    }
    Ok(Scene {
        name,
        mesh,
        materials: cfg.materials.clone(),
        assignment: cfg.assignment.clone(),
        vertex_material,
        lights: cfg.lights.clone(),
        ambient: Vec3::from(cfg.ambient),
    })
}

/// Label of the texel containing `uv` (the `u = 1` / `v = 1` edges fold into the last texel).
pub fn texel_label(width: u32, height: u32, labels: &[u32], uv: &Vec2) -> u32 {
    let x = ((uv.x * width as f64).floor() as i64).clamp(0, width as i64 - 1) as usize;
    let y = ((uv.y * height as f64).floor() as i64).clamp(0, height as i64 - 1) as usize;
    labels[y * width as usize + x]
}

impl Scene {
    /// Material at a surface point with texture coordinate `uv` (per-vertex assignments
    /// have no texture, so they fall back to `fallback`).
    pub fn material_at_uv(&self, uv: &Vec2, fallback: u32) -> &Material {
        match &self.assignment {
            Assignment::Texture {
                width,
                height,
                labels,
            } => &self.materials[texel_label(*width, *height, labels, uv) as usize],
            Assignment::Uniform => &self.materials[0],
            Assignment::PerVertex { .. } => &self.materials[fallback as usize],
        }
    }

    pub fn vertex_radiance(&self, v: usize, view_dir: &Vec3) -> [f64; 3] {
        let m = &self.materials[self.vertex_material[v] as usize];
        phong_radiance(
            &self.mesh.positions()[v],
            &self.mesh.normals()[v],
            view_dir,
            m,
            &self.lights,
            &self.ambient,
        )
    }

    /// Diffuse texture of the material map (kd as RGB), or `None` without a texture assignment.
    pub fn albedo_texture(&self) -> Option<Image> {
        match &self.assignment {
            Assignment::Texture {
                width,
                height,
                labels,
            } => {
                let data = labels
                    .iter()
                    .map(|&l| self.materials[l as usize].kd)
                    .collect();
                Some(Image::new(*width, *height, data, None).expect("sized"))
            }
            _ => None,
        }
    }
}

/// Phong shading with inverse-square falloff. The specular lobe only lights
/// points that the light reaches (`n . l > 0`).
pub fn phong_radiance(
    point: &Vec3,
    normal: &Vec3,
    view_dir: &Vec3,
    m: &Material,
    lights: &[PointLight],
    ambient: &Vec3,
) -> [f64; 3] {
    let mut rgb = [0.0; 3];
    for c in 0..3 {
        rgb[c] = ambient[c] * m.kd[c];
    }
    for light in lights {
        let to_light = Vec3::from(light.position) - point;
        let dist2 = to_light.norm_squared();
        let l = to_light / dist2.sqrt();
        let ndl = normal.dot(&l);
        if ndl <= 0.0 {
            continue;
        }
        let r = normal * (2.0 * ndl) - l;
        let specular = r.dot(view_dir).max(0.0).powf(m.shininess);
        for c in 0..3 {
            rgb[c] += (m.kd[c] * ndl + m.ks[c] * specular) * light.intensity[c] / dist2;
        }
    }
    rgb.map(|v| v.clamp(0.0, 1.0))
}

/// Quantizes a radiance value to a multiple of 2^-24. Such values, and the
/// difference of any two of them, are exact in f32, which keeps the
/// diffuse/residual split lossless.
pub fn observe(v: f64) -> f32 {
    const SCALE: f64 = (1u64 << 24) as f64;
    ((v.clamp(0.0, 1.0) * SCALE).round() / SCALE) as f32
}

pub fn observe_rgb(rgb: [f64; 3]) -> [f32; 3] {
    rgb.map(observe)
}

/// Subdivided icosahedron projected onto a sphere; `10 * 4^level + 2` vertices.
pub fn icosphere(level: u32, radius: f64) -> Result<Mesh, MeshError> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut pos: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, pos: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                pos.push(((pos[a as usize] + pos[b as usize]) * 0.5).normalize());
                (pos.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut pos);
            let bc = midpoint(b, c, &mut pos);
            let ca = midpoint(c, a, &mut pos);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let normals = pos.clone();
    let uvs = pos.iter().map(spherical_uv).collect();
    let positions = pos.iter().map(|p| p * radius).collect();
    Mesh::new(positions, normals, uvs, faces)
}

/// Longitude/colatitude of a unit vector mapped to `[0,1]^2`.
pub fn spherical_uv(n: &Vec3) -> Vec2 {
    let u = n.y.atan2(n.x) / (2.0 * PI) + 0.5;
    let v = n.z.clamp(-1.0, 1.0).acos() / PI;
    Vec2::new(u.clamp(0.0, 1.0), v.clamp(0.0, 1.0))
}

/// Torus around the z axis with `segments` steps around the main ring and
/// `rings` around the tube. Vertices are not duplicated along the wrap seams.
pub fn torus(major: f64, minor: f64, segments: u32, rings: u32) -> Result<Mesh, MeshError> {
    if segments < 3 || rings < 3 || !(major > minor && minor > 0.0) {
        return Err(MeshError::Invariant(
            "torus needs major > minor > 0 and >= 3 steps".into(),
        ));
    }
    let mut positions = Vec::new();
    let mut normals = Vec::new();
    let mut uvs = Vec::new();
    for i in 0..segments {
        let a = 2.0 * PI * i as f64 / segments as f64;
        for j in 0..rings {
            let b = 2.0 * PI * j as f64 / rings as f64;
            let n = Vec3::new(b.cos() * a.cos(), b.cos() * a.sin(), b.sin());
            let center = Vec3::new(major * a.cos(), major * a.sin(), 0.0);
            positions.push(center + n * minor);
            normals.push(n);
            uvs.push(Vec2::new(
                i as f64 / segments as f64,
                j as f64 / rings as f64,
            ));
        }
    }
    let id = |i: u32, j: u32| (i % segments) * rings + (j % rings);
    let mut faces = Vec::new();
    for i in 0..segments {
        for j in 0..rings {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    Mesh::new(positions, normals, uvs, faces)
}

/// `cells x cells` grid of quads centered at the origin in `z = 0`, normal `+z`.
/// `u` follows `+x` and `v` follows `-y`, so texture rows run top to bottom
/// for a camera above the plane looking down with `+y` up.
pub fn plane(size: f64, cells: u32) -> Result<Mesh, MeshError> {
    if cells == 0 || !(size > 0.0) {
        return Err(MeshError::Invariant(
            "plane needs positive size and cells".into(),
        ));
    }
    let n = cells + 1;
    let mut positions = Vec::new();
    let mut uvs = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let u = i as f64 / cells as f64;
            let v = j as f64 / cells as f64;
            positions.push(Vec3::new((u - 0.5) * size, (0.5 - v) * size, 0.0));
            uvs.push(Vec2::new(u, v));
        }
    }
    let mut faces = Vec::new();
    for j in 0..cells {
        for i in 0..cells {
            let a = j * n + i;
            let b = a + 1;
            let c = a + n + 1;
            let d = a + n;
            // counter-clockwise seen from +z
            faces.push([a, d, c]);
            faces.push([a, c, b]);
        }
    }
    let normals = vec![Vec3::z(); positions.len()];
    Mesh::new(positions, normals, uvs, faces)
}

/// Camera placement parameters shared by the rigs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigParams {
    pub radius: f64,
    pub fov_y: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for RigParams {
    fn default() -> Self {
        Self {
            radius: 4.0,
            fov_y: 0.6,
            width: 128,
            height: 128,
        }
    }
}

fn orbit_camera(p: &RigParams, azimuth: f64, elevation: f64) -> CameraPose {
    let eye = Vec3::new(
        elevation.cos() * azimuth.cos(),
        elevation.cos() * azimuth.sin(),
        elevation.sin(),
    ) * p.radius;
    let k = intrinsics_from_fov(p.fov_y, p.width, p.height);
    CameraPose::look_at(eye, Vec3::zeros(), Vec3::z(), k, p.width, p.height)
}

/// `count` cameras evenly spaced in azimuth at a fixed elevation (radians).
pub fn ring_rig(count: u32, elevation: f64, p: &RigParams) -> Vec<CameraPose> {
    (0..count)
        .map(|i| orbit_camera(p, 2.0 * PI * i as f64 / count as f64, elevation))
        .collect()
}

/// Fibonacci-sphere layout with a seeded random rotation about the z axis.
pub fn fibonacci_rig(count: u32, seed: u64, p: &RigParams) -> Vec<CameraPose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset: f64 = rng.random_range(0.0..2.0 * PI);
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            // keep away from the poles where look_at's up vector degenerates
            let elevation = z.clamp(-0.999, 0.999).asin();
            orbit_camera(p, offset + golden * i as f64, elevation)
        })
        .collect()
}

/// Seeded random viewpoints: uniform azimuth, elevation uniform in `[lo, hi]` (radians).
pub fn random_rig(count: u32, elevation: (f64, f64), seed: u64, p: &RigParams) -> Vec<CameraPose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let az = rng.random_range(0.0..2.0 * PI);
            let el = rng.random_range(elevation.0..=elevation.1);
            orbit_camera(p, az, el)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Capture {
    pub dataset: SlfDataset,
    /// Ground-truth frames: per-vertex radiance for that view, Gouraud-shaded.
    pub images: Vec<Image>,
    pub samples_per_camera: Vec<usize>,
}

/// Observes every z-buffer-visible vertex from every camera. Samples come out
/// ordered by camera, then vertex.
pub fn capture_dataset(scene: &Scene, cameras: &[CameraPose]) -> Capture {
    let mesh = &scene.mesh;
    let per_camera: Vec<(Vec<RaySample>, Image)> = cameras
        .par_iter()
        .enumerate()
        .map(|(ci, cam)| {
            let c = cam.center();
            let buf = renderer::rasterize(mesh, cam, false);
            let visible = renderer::visible_vertices(mesh, cam, &buf);
            let mut colors = vec![[0.0; 3]; mesh.vertex_count()];
            let mut samples = Vec::new();
            for v in 0..mesh.vertex_count() {
                let Some(d) = crate::try_normalize(&(c - mesh.positions()[v])) else {
                    continue;
                };
                let rgb = observe_rgb(scene.vertex_radiance(v, &d));
                colors[v] = rgb.map(|x| x as f64);
                if visible[v] {
                    samples.push(RaySample {
                        vertex_id: v as u32,
                        direction: [d.x as f32, d.y as f32, d.z as f32],
                        rgb,
                        camera: Some(ci as u32),
                    });
                }
            }
            let front = renderer::rasterize(mesh, cam, true);
            (samples, renderer::shade(mesh, &front, &colors))
        })
        .collect();
    let mut samples = Vec::new();
    let mut images = Vec::new();
    let mut samples_per_camera = Vec::new();
    for (ci, (s, img)) in per_camera.into_iter().enumerate() {
        if s.is_empty() {
            log::warn!("camera {ci} sees no vertices");
        }
        samples_per_camera.push(s.len());
        samples.extend(s);
        images.push(img);
    }
    Capture {
        dataset: SlfDataset {
            mesh_ref: scene.name.clone(),
            vertex_count: mesh.vertex_count() as u32,
            samples,
            direction_space: DirectionSpace::Raw,
            residual: false,
            diffuse: None,
        },
        images,
        samples_per_camera,
    }
}

/// Ground-truth frame from per-vertex radiance (the same shading the capture images use).
pub fn render_vertex_phong(scene: &Scene, cam: &CameraPose) -> Image {
    let mesh = &scene.mesh;
    let c = cam.center();
    let colors: Vec<[f64; 3]> = (0..mesh.vertex_count())
        .map(|v| match crate::try_normalize(&(c - mesh.positions()[v])) {
            Some(d) => observe_rgb(scene.vertex_radiance(v, &d)).map(|x| x as f64),
            None => [0.0; 3],
        })
        .collect();
    let buf = renderer::rasterize(mesh, cam, true);
    renderer::shade(mesh, &buf, &colors)
}

/// Per-pixel Phong: position, normal and uv are interpolated to each pixel and
/// the material is looked up in the texture. This is the sharp reference that
/// per-vertex renderings are compared against.
pub fn render_pixel_phong(scene: &Scene, cam: &CameraPose) -> Image {
    let mesh = &scene.mesh;
    let c = cam.center();
    let buf = renderer::rasterize(mesh, cam, true);
    let data = buf
        .face
        .iter()
        .zip(&buf.bary)
        .map(|(&f, b)| {
            if f == renderer::NO_FACE {
                return [0.0; 3];
            }
            let face = mesh.faces()[f as usize];
            let mut p = Vec3::zeros();
            let mut n = Vec3::zeros();
            let mut uv = Vec2::zeros();
            for (j, &v) in face.iter().enumerate() {
                p += mesh.positions()[v as usize] * b[j];
                n += mesh.normals()[v as usize] * b[j];
                uv += mesh.uvs()[v as usize] * b[j];
            }
            let n = crate::try_normalize(&n).unwrap_or(n);
            let d = crate::try_normalize(&(c - p)).unwrap_or(n);
            let m = scene.material_at_uv(&uv, scene.vertex_material[face[0] as usize]);
            phong_radiance(&p, &n, &d, m, &scene.lights, &scene.ambient)
        })
        .collect();
    Image::new(buf.width, buf.height, data, Some(buf.mask())).expect("sized")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(kd: f64, ks: f64) -> Material {
        Material {
            kd: [kd; 3],
            ks: [ks; 3],
            shininess: 10.0,
        }
    }

    #[test]
    fn icosphere_counts() {
        let m = icosphere(3, 1.0).unwrap();
        assert_eq!(m.vertex_count(), 642);
        assert_eq!(m.face_count(), 1280);
        for (p, n) in m.positions().iter().zip(m.normals()) {
            assert!((p.normalize() - n).norm() < 1e-6);
        }
    }

    #[test]
    fn head_on_diffuse() {
        let light = PointLight {
            position: [0.0, 0.0, 1.0],
            intensity: [1.0; 3],
        };
        let rgb = phong_radiance(
            &Vec3::zeros(),
            &Vec3::z(),
            &Vec3::x(),
            &mat(0.4, 0.0),
            &[light],
            &Vec3::zeros(),
        );
        assert_eq!(rgb, [0.4; 3]);
    }

    #[test]
    fn light_below_is_dark() {
        let light = PointLight {
            position: [0.0, 0.0, -1.0],
            intensity: [1.0; 3],
        };
        let rgb = phong_radiance(
            &Vec3::zeros(),
            &Vec3::z(),
            &Vec3::z(),
            &mat(0.4, 0.5),
            &[light],
            &Vec3::zeros(),
        );
        assert_eq!(rgb, [0.0; 3]);
    }

    #[test]
    fn mirror_view_gets_full_specular() {
        let s = 0.5f64.sqrt();
        let light = PointLight {
            position: [2.0 * s, 0.0, 2.0 * s],
            intensity: [1.0; 3],
        };
        let view = Vec3::new(-s, 0.0, s);
        let rgb = phong_radiance(
            &Vec3::zeros(),
            &Vec3::z(),
            &view,
            &mat(0.0, 0.6),
            &[light],
            &Vec3::zeros(),
        );
        for c in rgb {
            assert!((c - 0.6 / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_lights_rejected() {
        let mut cfg = SceneConfig::glossy_sphere(1);
        cfg.lights.clear();
        assert!(matches!(make_scene(&cfg), Err(SynthError::NoLights)));
    }

    #[test]
    fn scene_is_deterministic() {
        let cfg = SceneConfig::glossy_sphere(2);
        let a = make_scene(&cfg).unwrap();
        let b = make_scene(&cfg).unwrap();
        assert_eq!(a.mesh, b.mesh);
        assert_eq!(a.vertex_material, b.vertex_material);
    }

    #[test]
    fn observed_differences_are_exact_in_f32() {
        let a = observe(0.734_123_456_789);
        let b = observe(0.211_987_654_321);
        let r = a - b;
        assert_eq!(b + r, a);
        assert_eq!((a as f64) - (b as f64), r as f64);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = SceneConfig::glossy_sphere(3);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: SceneConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
