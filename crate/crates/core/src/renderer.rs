//! CPU rasterizer and the per-vertex network shading path.
//!
//! Frames are produced in three steps: back-face culling picks the visible
//! vertices, their inverted view directions go through the network in one
//! batch, and the resulting per-vertex colors are rasterized with
//! perspective-correct interpolation behind a z-buffer.

use thiserror::Error;

use crate::camera::CameraPose;
use crate::image::{DepthImage, Image};
use crate::mesh::Mesh;
use crate::network::DslfNet;
use crate::preprocess;
use crate::{Vec2, Vec3};

/// Near clipping plane in camera-space depth.
pub const NEAR: f64 = 1e-3;

/// Face id stored for pixels that see no geometry.
pub const NO_FACE: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("network expects {got} inputs, the encoder produces 5")]
    Arch { got: usize },
    #[error("diffuse table has {got} entries for {expected} vertices")]
    Diffuse { expected: usize, got: usize },
}

/// Per-pixel visible surface: depth, face id and perspective-correct barycentrics.
#[derive(Debug, Clone)]
pub struct ItemBuffer {
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f64>,
    pub face: Vec<u32>,
    pub bary: Vec<[f64; 3]>,
}

impl ItemBuffer {
    fn empty(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            depth: vec![DepthImage::BACKGROUND; n],
            face: vec![NO_FACE; n],
            bary: vec![[0.0; 3]; n],
        }
    }

    pub fn mask(&self) -> Vec<bool> {
        self.face.iter().map(|&f| f != NO_FACE).collect()
    }

    pub fn face_at(&self, x: u32, y: u32) -> u32 {
        self.face[(y * self.width + x) as usize]
    }
}

#[derive(Clone, Copy)]
struct ClipVertex {
    pc: Vec3,
    bary: [f64; 3],
}

fn clip_near(poly: &[ClipVertex]) -> Vec<ClipVertex> {
    let mut out = Vec::with_capacity(4);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let a_in = a.pc.z >= NEAR;
        let b_in = b.pc.z >= NEAR;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let s = (NEAR - a.pc.z) / (b.pc.z - a.pc.z);
            let mut bary = [0.0; 3];
            for k in 0..3 {
                bary[k] = a.bary[k] + s * (b.bary[k] - a.bary[k]);
            }
            let mut pc = a.pc + (b.pc - a.pc) * s;
            pc.z = NEAR;
            out.push(ClipVertex { pc, bary });
        }
    }
    out
}

fn edge(a: &Vec2, b: &Vec2, p: &Vec2) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Whether the face's geometric normal points toward the camera center.
pub fn face_front_facing(mesh: &Mesh, cam: &CameraPose, face: usize) -> bool {
    mesh.face_cross(face)
        .dot(&(cam.center() - mesh.face_centroid(face)))
        > 0.0
}

/// Z-buffers every face (or only front faces with `cull`). Faces are drawn in
/// id order with a strict depth test, so exact ties keep the lower face id.
pub fn rasterize(mesh: &Mesh, cam: &CameraPose, cull: bool) -> ItemBuffer {
    let (w, h) = (cam.width, cam.height);
    let mut buf = ItemBuffer::empty(w, h);
    let k = cam.k;
    for f in 0..mesh.face_count() {
        if cull && !face_front_facing(mesh, cam, f) {
            continue;
        }
        let tri = mesh.face_vertices(f);
        let poly: Vec<ClipVertex> = (0..3)
            .map(|i| {
                let mut bary = [0.0; 3];
                bary[i] = 1.0;
                ClipVertex {
                    pc: cam.to_camera(&tri[i]),
                    bary,
                }
            })
            .collect();
        if poly.iter().all(|v| v.pc.z >= NEAR) {
            raster_polygon(&mut buf, &k, &poly, f as u32);
        } else {
            let clipped = clip_near(&poly);
            if clipped.len() >= 3 {
                raster_polygon(&mut buf, &k, &clipped, f as u32);
            }
        }
    }
    buf
}

fn raster_polygon(buf: &mut ItemBuffer, k: &crate::Mat3, poly: &[ClipVertex], face: u32) {
    let screen: Vec<(Vec2, f64)> = poly
        .iter()
        .map(|v| {
            let hp = k * v.pc;
            (Vec2::new(hp.x / hp.z, hp.y / hp.z), 1.0 / v.pc.z)
        })
        .collect();
    for i in 1..poly.len() - 1 {
        let idx = [0, i, i + 1];
        let p = idx.map(|j| screen[j].0);
        let area = edge(&p[0], &p[1], &p[2]);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        let min_x = p
            .iter()
            .map(|q| q.x)
            .fold(f64::INFINITY, f64::min)
            .ceil()
            .max(0.0);
        let max_x = p
            .iter()
            .map(|q| q.x)
            .fold(f64::NEG_INFINITY, f64::max)
            .floor()
            .min(buf.width as f64 - 1.0);
        let min_y = p
            .iter()
            .map(|q| q.y)
            .fold(f64::INFINITY, f64::min)
            .ceil()
            .max(0.0);
        let max_y = p
            .iter()
            .map(|q| q.y)
            .fold(f64::NEG_INFINITY, f64::max)
            .floor()
            .min(buf.height as f64 - 1.0);
        if min_x > max_x || min_y > max_y {
            continue;
        }
        let sign = area.signum();
        for y in min_y as u32..=max_y as u32 {
            for x in min_x as u32..=max_x as u32 {
                let c = Vec2::new(x as f64, y as f64);
                let w = [
                    edge(&p[1], &p[2], &c) * sign,
                    edge(&p[2], &p[0], &c) * sign,
                    edge(&p[0], &p[1], &c) * sign,
                ];
                if w[0] < 0.0 || w[1] < 0.0 || w[2] < 0.0 {
                    continue;
                }
                let a = [0, 1, 2].map(|j| w[j] / area.abs() * screen[idx[j]].1);
                let s = a[0] + a[1] + a[2];
                let z = 1.0 / s;
                let pix = (y * buf.width + x) as usize;
                if z < buf.depth[pix] {
                    let mut bary = [0.0; 3];
                    for j in 0..3 {
                        let wj = a[j] / s;
                        for (b, vb) in bary.iter_mut().zip(poly[idx[j]].bary) {
                            *b += wj * vb;
                        }
                    }
                    buf.depth[pix] = z;
                    buf.face[pix] = face;
                    buf.bary[pix] = bary;
                }
            }
        }
    }
}

/// Faces facing the camera and the vertices they reference (both ascending).
#[derive(Debug, Clone, PartialEq)]
pub struct CullResult {
    pub faces: Vec<u32>,
    pub vertices: Vec<u32>,
}

pub fn backface_cull(mesh: &Mesh, cam: &CameraPose) -> CullResult {
    let mut keep_vertex = vec![false; mesh.vertex_count()];
    let mut faces = Vec::new();
    for f in 0..mesh.face_count() {
        if face_front_facing(mesh, cam, f) {
            faces.push(f as u32);
            for &v in &mesh.faces()[f] {
                keep_vertex[v as usize] = true;
            }
        }
    }
    let vertices = (0..mesh.vertex_count() as u32)
        .filter(|&v| keep_vertex[v as usize])
        .collect();
    CullResult { faces, vertices }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewDirection {
    pub vertex: u32,
    /// Unit direction from the vertex toward the camera center.
    pub d: Vec3,
    /// `d` mirrored about the vertex normal.
    pub d_inv: Vec3,
}

/// View directions for `vertices`; grazing ones (`n . d <= 0`) go to the second list.
pub fn vertex_view_directions(
    mesh: &Mesh,
    vertices: &[u32],
    cam: &CameraPose,
) -> (Vec<ViewDirection>, Vec<u32>) {
    let c = cam.center();
    let mut out = Vec::with_capacity(vertices.len());
    let mut dropped = Vec::new();
    for &v in vertices {
        let p = mesh.positions()[v as usize];
        let n = mesh.normals()[v as usize];
        let d = match crate::try_normalize(&(c - p)) {
            Some(d) if n.dot(&d) > 0.0 => d,
            _ => {
                dropped.push(v);
                continue;
            }
        };
        out.push(ViewDirection {
            vertex: v,
            d,
            d_inv: preprocess::reflect(&d, &n),
        });
    }
    (out, dropped)
}

/// Vertex visibility through the z-buffer. A vertex counts as visible when it
/// projects inside the image in front of the near plane and none of the faces
/// owning the surrounding 3x3 pixels (other than its own incident faces) cuts
/// the segment between the camera center and the vertex.
pub fn visible_vertices(mesh: &Mesh, cam: &CameraPose, buf: &ItemBuffer) -> Vec<bool> {
    let c = cam.center();
    let (w, h) = (buf.width as i64, buf.height as i64);
    let mut candidates: Vec<u32> = Vec::with_capacity(9);
    (0..mesh.vertex_count())
        .map(|v| {
            let p = mesh.positions()[v];
            if cam.to_camera(&p).z <= NEAR {
                return false;
            }
            let px = match cam.project(&p) {
                Some(px) if cam.in_image(&px) => px,
                _ => return false,
            };
            let (cx, cy) = (px.x.round() as i64, px.y.round() as i64);
            candidates.clear();
            for y in (cy - 1).max(0)..=(cy + 1).min(h - 1) {
                for x in (cx - 1).max(0)..=(cx + 1).min(w - 1) {
                    let f = buf.face[(y * w + x) as usize];
                    if f != NO_FACE && !candidates.contains(&f) {
                        candidates.push(f);
                    }
                }
            }
            let dir = p - c;
            let vid = v as u32;
            !candidates.iter().any(|&f| {
                !mesh.faces()[f as usize].contains(&vid)
                    && matches!(
                        crate::raycast::intersect_triangle(&c, &dir, &mesh.face_vertices(f as usize)),
                        Some((t, _, _)) if t > 0.0 && t < 1.0 - 1e-9
                    )
            })
        })
        .collect()
}

/// Gouraud shading of per-vertex colors over an item buffer; background stays black.
pub fn shade(mesh: &Mesh, buf: &ItemBuffer, colors: &[[f64; 3]]) -> Image {
    let data = buf
        .face
        .iter()
        .zip(&buf.bary)
        .map(|(&f, b)| {
            if f == NO_FACE {
                return [0.0; 3];
            }
            let face = mesh.faces()[f as usize];
            let mut rgb = [0.0; 3];
            for (j, &v) in face.iter().enumerate() {
                for (ch, out) in rgb.iter_mut().enumerate() {
                    *out += b[j] * colors[v as usize][ch];
                }
            }
            rgb
        })
        .collect();
    Image::new(buf.width, buf.height, data, Some(buf.mask())).expect("buffer sizes agree")
}

/// Per-vertex frame colors: `diffuse + decode(net(u, v, d_inv))`, clamped.
/// Vertices outside the culled set or with grazing view directions keep their diffuse color.
pub fn vertex_colors(
    mesh: &Mesh,
    net: &DslfNet,
    diffuse: &[[f32; 3]],
    cam: &CameraPose,
) -> Result<Vec<[f64; 3]>, RenderError> {
    if net.input_dim() != 5 {
        return Err(RenderError::Arch {
            got: net.input_dim(),
        });
    }
    if diffuse.len() != mesh.vertex_count() {
        return Err(RenderError::Diffuse {
            expected: mesh.vertex_count(),
            got: diffuse.len(),
        });
    }
    let mut colors: Vec<[f64; 3]> = diffuse.iter().map(|d| d.map(|c| c as f64)).collect();
    let culled = backface_cull(mesh, cam);
    let (dirs, _) = vertex_view_directions(mesh, &culled.vertices, cam);
    let inputs: Vec<f32> = dirs
        .iter()
        .flat_map(|vd| preprocess::encode_input(&mesh.uvs()[vd.vertex as usize], &vd.d_inv))
        .collect();
    let out = net.forward(&inputs, dirs.len());
    for (i, vd) in dirs.iter().enumerate() {
        let c = &mut colors[vd.vertex as usize];
        for ch in 0..3 {
            let r = preprocess::decode_target(out[i * 3 + ch]) as f64;
            c[ch] = (c[ch] + r).clamp(0.0, 1.0);
        }
    }
    Ok(colors)
}

/// One frame at the camera's resolution, masked to covered pixels.
pub fn render_frame(
    mesh: &Mesh,
    net: &DslfNet,
    diffuse: &[[f32; 3]],
    cam: &CameraPose,
) -> Result<Image, RenderError> {
    let colors = vertex_colors(mesh, net, diffuse, cam)?;
    let buf = rasterize(mesh, cam, true);
    Ok(shade(mesh, &buf, &colors))
}

/// Camera-space depth of the nearest surface (two-sided); background is +inf.
pub fn render_depth(mesh: &Mesh, cam: &CameraPose) -> DepthImage {
    let buf = rasterize(mesh, cam, false);
    DepthImage {
        width: buf.width,
        height: buf.height,
        depth: buf.depth,
    }
}
