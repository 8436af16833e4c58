//! Uniform one-to-four midpoint subdivision, the texture-blind baseline.

use std::collections::HashMap;

use super::RemeshError;
use crate::mesh::Mesh;

/// Splits every face into four through its edge midpoints, `levels` times.
/// Midpoints are shared between neighbouring faces.
pub fn subdivide_midpoint(mesh: &Mesh, levels: u32) -> Result<Mesh, RemeshError> {
    let mut cur = mesh.clone();
    for _ in 0..levels {
        let mut positions = cur.positions().to_vec();
        let mut normals = cur.normals().to_vec();
        let mut uvs = cur.uvs().to_vec();
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut faces = Vec::with_capacity(4 * cur.face_count());
        for f in cur.faces() {
            let mut m = [0u32; 3];
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                m[e] = *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    let (a, b) = (a as usize, b as usize);
                    positions.push((cur.positions()[a] + cur.positions()[b]) / 2.0);
                    normals.push((cur.normals()[a] + cur.normals()[b]).normalize());
                    uvs.push((cur.uvs()[a] + cur.uvs()[b]) / 2.0);
                    (positions.len() - 1) as u32
                });
            }
            faces.push([f[0], m[0], m[2]]);
            faces.push([m[0], f[1], m[1]]);
            faces.push([m[2], m[1], f[2]]);
            faces.push([m[0], m[1], m[2]]);
        }
        cur = Mesh::new(positions, normals, uvs, faces)?;
    }
    Ok(cur)
}

/// The least-subdivided mesh with at least `budget` vertices, and its level.
pub fn subdivide_to_budget(mesh: &Mesh, budget: usize) -> Result<(Mesh, u32), RemeshError> {
    let mut level = 0;
    let mut cur = mesh.clone();
    while cur.vertex_count() < budget {
        cur = subdivide_midpoint(&cur, 1)?;
        level += 1;
    }
    Ok((cur, level))
}
