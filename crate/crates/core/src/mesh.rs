//! Indexed triangle meshes and the OBJ subset used by the pipeline.
//!
//! Only `v`, `vt`, `vn` and triangular `f` records are understood. Every face
//! corner must reference a texture coordinate; normals are optional and are
//! rebuilt from area-weighted face normals when absent.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::{Vec2, Vec3};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid mesh: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Triangle mesh with one position, unit normal and texture coordinate per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    positions: Vec<Vec3>,
    normals: Vec<Vec3>,
    uvs: Vec<Vec2>,
    faces: Vec<[u32; 3]>,
}

const NORMAL_TOL: f64 = 1e-6;

impl Mesh {
    /// Builds a mesh and checks every invariant; nothing is repaired.
    pub fn new(
        positions: Vec<Vec3>,
        normals: Vec<Vec3>,
        uvs: Vec<Vec2>,
        faces: Vec<[u32; 3]>,
    ) -> Result<Self, MeshError> {
        let n = positions.len();
        if normals.len() != n || uvs.len() != n {
            return Err(MeshError::Invariant(format!(
                "attribute lengths differ: {} positions, {} normals, {} uvs",
                n,
                normals.len(),
                uvs.len()
            )));
        }
        for (i, p) in positions.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(MeshError::Invariant(format!("vertex {i} is not finite")));
            }
        }
        for (i, nrm) in normals.iter().enumerate() {
            if (nrm.norm() - 1.0).abs() > NORMAL_TOL {
                return Err(MeshError::Invariant(format!(
                    "normal {i} has norm {}",
                    nrm.norm()
                )));
            }
        }
        for (i, uv) in uvs.iter().enumerate() {
            if !(0.0..=1.0).contains(&uv.x) || !(0.0..=1.0).contains(&uv.y) {
                return Err(MeshError::Invariant(format!(
                    "uv {i} = ({}, {}) outside [0,1]^2",
                    uv.x, uv.y
                )));
            }
        }
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v as usize >= n) {
                return Err(MeshError::Invariant(format!(
                    "face {fi} references vertex beyond {n}"
                )));
            }
        }
        let mesh = Self {
            positions,
            normals,
            uvs,
            faces,
        };
        for fi in 0..mesh.faces.len() {
            if mesh.is_degenerate(fi) {
                return Err(MeshError::Invariant(format!("face {fi} is degenerate")));
            }
        }
        Ok(mesh)
    }

    /// Builds a mesh whose normals are area-weighted averages of face normals.
    pub fn with_computed_normals(
        positions: Vec<Vec3>,
        uvs: Vec<Vec2>,
        faces: Vec<[u32; 3]>,
    ) -> Result<Self, MeshError> {
        let normals = area_weighted_normals(&positions, &faces)?;
        Self::new(positions, normals, uvs, faces)
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn uvs(&self) -> &[Vec2] {
        &self.uvs
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn face_vertices(&self, face: usize) -> [Vec3; 3] {
        let f = self.faces[face];
        [
            self.positions[f[0] as usize],
            self.positions[f[1] as usize],
            self.positions[f[2] as usize],
        ]
    }

    /// Unnormalized geometric normal `(b - a) x (c - a)`; its length is twice the area.
    pub fn face_cross(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.face_vertices(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.face_cross(face).norm()
    }

    pub fn face_centroid(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.face_vertices(face);
        (a + b + c) / 3.0
    }

    /// Area of the face's triangle in texture space.
    pub fn face_uv_area(&self, face: usize) -> f64 {
        let f = self.faces[face];
        let a = self.uvs[f[0] as usize];
        let b = self.uvs[f[1] as usize];
        let c = self.uvs[f[2] as usize];
        0.5 * ((b - a).perp(&(c - a))).abs()
    }

    fn is_degenerate(&self, face: usize) -> bool {
        let [a, b, c] = self.face_vertices(face);
        let longest = (b - a)
            .norm_squared()
            .max((c - b).norm_squared())
            .max((a - c).norm_squared());
        let cross = self.face_cross(face).norm();
        !(cross > f64::EPSILON * longest) || longest == 0.0
    }

    /// Returns a copy with every face's winding reversed and normals negated.
    pub fn flipped(&self) -> Self {
        Self {
            positions: self.positions.clone(),
            normals: self.normals.iter().map(|n| -n).collect(),
            uvs: self.uvs.clone(),
            faces: self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect(),
        }
    }

    /// Concatenates two meshes, offsetting the second one's indices.
    pub fn merged(&self, other: &Mesh) -> Self {
        let off = self.positions.len() as u32;
        let mut out = self.clone();
        out.positions.extend_from_slice(&other.positions);
        out.normals.extend_from_slice(&other.normals);
        out.uvs.extend_from_slice(&other.uvs);
        out.faces.extend(
            other
                .faces
                .iter()
                .map(|f| [f[0] + off, f[1] + off, f[2] + off]),
        );
        out
    }

    /// Loads a mesh from the supported OBJ subset.
    pub fn load_obj(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_obj(&text)
    }

    pub fn parse_obj(text: &str) -> Result<Self, MeshError> {
        parse_obj(text)
    }

    pub fn to_obj_string(&self) -> String {
        let mut s = String::with_capacity(self.positions.len() * 96);
        let _ = writeln!(
            s,
            "# {} vertices, {} faces",
            self.vertex_count(),
            self.face_count()
        );
        for p in &self.positions {
            let _ = writeln!(s, "v {} {} {}", p.x, p.y, p.z);
        }
        for t in &self.uvs {
            let _ = writeln!(s, "vt {} {}", t.x, t.y);
        }
        for n in &self.normals {
            let _ = writeln!(s, "vn {} {} {}", n.x, n.y, n.z);
        }
        for f in &self.faces {
            let [a, b, c] = f.map(|i| i + 1);
            let _ = writeln!(s, "f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}");
        }
        s
    }

    pub fn save_obj(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        std::fs::write(path, self.to_obj_string())?;
        Ok(())
    }
}

/// Area-weighted vertex normals (the cross product length already carries the area).
pub fn area_weighted_normals(
    positions: &[Vec3],
    faces: &[[u32; 3]],
) -> Result<Vec<Vec3>, MeshError> {
    let mut acc = vec![Vec3::zeros(); positions.len()];
    for f in faces {
        let [a, b, c] = f.map(|i| positions[i as usize]);
        let cross = (b - a).cross(&(c - a));
        for &i in f {
            acc[i as usize] += cross;
        }
    }
    acc.into_iter()
        .enumerate()
        .map(|(i, n)| {
            crate::try_normalize(&n).ok_or_else(|| {
                MeshError::Invariant(format!("vertex {i} has no incident area for a normal"))
            })
        })
        .collect()
}

fn parse_err(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_floats<const N: usize>(
    parts: &mut std::str::SplitWhitespace<'_>,
    line: usize,
) -> Result<[f64; N], MeshError> {
    let mut out = [0.0; N];
    for o in out.iter_mut() {
        let tok = parts
            .next()
            .ok_or_else(|| parse_err(line, format!("expected {N} numbers")))?;
        *o = tok
            .parse()
            .map_err(|_| parse_err(line, format!("bad number {tok:?}")))?;
    }
    Ok(out)
}

fn resolve_index(tok: &str, count: usize, line: usize, what: &str) -> Result<usize, MeshError> {
    let raw: i64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("bad {what} index {tok:?}")))?;
    let idx = match raw {
        0 => {
            return Err(parse_err(
                line,
                format!("{what} index 0 (OBJ indices are 1-based)"),
            ))
        }
        r if r > 0 => r as usize - 1,
        r => {
            let back = (-r) as usize;
            if back > count {
                return Err(parse_err(
                    line,
                    format!("relative {what} index {r} out of range"),
                ));
            }
            count - back
        }
    };
    if idx >= count {
        return Err(parse_err(
            line,
            format!("{what} index {} out of range ({count} defined)", idx + 1),
        ));
    }
    Ok(idx)
}

fn parse_obj(text: &str) -> Result<Mesh, MeshError> {
    let mut pos = Vec::new();
    let mut tex = Vec::new();
    let mut nrm = Vec::new();
    // (position, uv, normal) corner triples per face
    let mut corners: Vec<[(usize, usize, Option<usize>); 3]> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let key = parts.next().unwrap_or_default();
        match key {
            "v" => {
                let [x, y, z] = parse_floats::<3>(&mut parts, line)?;
                pos.push(Vec3::new(x, y, z));
            }
            "vt" => {
                let [u, v] = parse_floats::<2>(&mut parts, line)?;
                tex.push(Vec2::new(u, v));
            }
            "vn" => {
                let [x, y, z] = parse_floats::<3>(&mut parts, line)?;
                nrm.push(Vec3::new(x, y, z));
            }
            "f" => {
                let toks: Vec<&str> = parts.collect();
                if toks.len() != 3 {
                    return Err(parse_err(
                        line,
                        format!("only triangles are supported, got {} corners", toks.len()),
                    ));
                }
                let mut face = [(0, 0, None); 3];
                for (c, tok) in toks.iter().enumerate() {
                    let fields: Vec<&str> = tok.split('/').collect();
                    if fields.len() < 2 || fields[1].is_empty() {
                        return Err(parse_err(
                            line,
                            format!("corner {tok:?} has no texture coordinate"),
                        ));
                    }
                    if fields.len() > 3 {
                        return Err(parse_err(line, format!("malformed corner {tok:?}")));
                    }
                    let p = resolve_index(fields[0], pos.len(), line, "position")?;
                    let t = resolve_index(fields[1], tex.len(), line, "texture")?;
                    let n = match fields.get(2) {
                        Some(s) if !s.is_empty() => {
                            Some(resolve_index(s, nrm.len(), line, "normal")?)
                        }
                        _ => None,
                    };
                    face[c] = (p, t, n);
                }
                corners.push(face);
            }
            "o" | "g" | "s" | "l" | "mtllib" | "usemtl" => {}
            other => return Err(parse_err(line, format!("unsupported record {other:?}"))),
        }
    }

    let has_normals = corners.iter().flatten().all(|c| c.2.is_some());
    if !has_normals && corners.iter().flatten().any(|c| c.2.is_some()) {
        return Err(MeshError::Invariant(
            "normals must be given for every face corner or for none".into(),
        ));
    }

    let mut map: HashMap<(usize, usize, Option<usize>), u32> = HashMap::new();
    let mut positions = Vec::new();
    let mut uvs = Vec::new();
    let mut normals = Vec::new();
    let mut source_pos = Vec::new();
    let mut faces = Vec::with_capacity(corners.len());
    for face in &corners {
        let mut f = [0u32; 3];
        for (c, key) in face.iter().enumerate() {
            let next = positions.len() as u32;
            let idx = *map.entry(*key).or_insert_with(|| {
                positions.push(pos[key.0]);
                uvs.push(tex[key.1]);
                normals.push(key.2.map(|n| nrm[n]).unwrap_or_else(Vec3::zeros));
                source_pos.push(key.0);
                next
            });
            f[c] = idx;
        }
        faces.push(f);
    }

    if has_normals {
        let mut renormalized = 0usize;
        for (i, n) in normals.iter_mut().enumerate() {
            let len = n.norm();
            if !(len > 0.0 && len.is_finite()) {
                return Err(MeshError::Invariant(format!(
                    "vertex {i} has a zero normal"
                )));
            }
            if (len - 1.0).abs() > NORMAL_TOL {
                renormalized += 1;
            }
            *n /= len;
        }
        if renormalized > 0 {
            log::warn!("renormalized {renormalized} non-unit OBJ normals");
        }
    } else {
        // accumulate over shared positions so uv seams get one consistent normal
        let mut acc = vec![Vec3::zeros(); pos.len()];
        for f in &faces {
            let [a, b, c] = f.map(|i| positions[i as usize]);
            let cross = (b - a).cross(&(c - a));
            for &i in f {
                acc[source_pos[i as usize]] += cross;
            }
        }
        for (i, n) in normals.iter_mut().enumerate() {
            *n = crate::try_normalize(&acc[source_pos[i]]).ok_or_else(|| {
                MeshError::Invariant(format!("vertex {i} has no incident area for a normal"))
            })?;
        }
    }

    Mesh::new(positions, normals, uvs, faces)
}
