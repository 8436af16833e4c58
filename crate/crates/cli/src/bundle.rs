//! Viewer bundle: a directory holding everything needed to re-render a
//! trained light field elsewhere.
//!
//! | file | content |
//! |------|---------|
//! | `mesh.bin` | `"DMSH"`, version, vertex count, face count (u32 LE), then positions, normals (f32 x3), uvs (f32 x2) and faces (u32 x3) |
//! | `net.dnet`, `net.json` | network weights and their layout manifest |
//! | `diffuse.bin` | per-vertex diffuse color, f32 x3 LE |
//! | `diffuse.png` | the same colors baked into a uv atlas; row `y` covers `v in [y/s, (y+1)/s)` |
//! | `reference_camera.json`, `reference.png` | one camera and the frame rendered for it |
//! | `reference_colors.bin` | per-vertex colors of that frame, f32 x3 LE |
//! | `bundle.json` | counts, architecture tag and size + SHA-256 of every other file |
//!
//! Positions and normals are stored in single precision, so the reference
//! frame is rendered from the mesh as it reads back from `mesh.bin`; loading
//! the bundle and rendering the reference camera reproduces it exactly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dslf_core::camera::CameraPose;
use dslf_core::image::Image;
use dslf_core::mesh::Mesh;
use dslf_core::network::{DslfNet, NetManifest, Skip};
use dslf_core::renderer;
use dslf_core::{sha256_hex, Vec2, Vec3};

use crate::{create_dir, read_bytes, read_text, write_bytes, write_json, CliError};

pub const MANIFEST: &str = "bundle.json";
pub const MESH_BIN: &str = "mesh.bin";
pub const NET: &str = "net.dnet";
pub const NET_MANIFEST: &str = "net.json";
pub const DIFFUSE_BIN: &str = "diffuse.bin";
pub const DIFFUSE_PNG: &str = "diffuse.png";
pub const REFERENCE_CAMERA: &str = "reference_camera.json";
pub const REFERENCE_FRAME: &str = "reference.png";
pub const REFERENCE_COLORS: &str = "reference_colors.bin";

pub const MESH_MAGIC: &[u8; 4] = b"DMSH";
pub const MESH_VERSION: u32 = 1;
pub const BUNDLE_VERSION: u32 = 1;

/// Mesh as indexed little-endian binary.
pub fn mesh_to_bytes(mesh: &Mesh) -> Vec<u8> {
    let (n, m) = (mesh.vertex_count(), mesh.face_count());
    let mut out = Vec::with_capacity(16 + n * 32 + m * 12);
    out.extend_from_slice(MESH_MAGIC);
    for v in [MESH_VERSION, n as u32, m as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut put = |x: f64| out.extend_from_slice(&(x as f32).to_le_bytes());
    mesh.positions()
        .iter()
        .chain(mesh.normals())
        .flat_map(|p| [p.x, p.y, p.z])
        .for_each(&mut put);
    mesh.uvs()
        .iter()
        .flat_map(|t| [t.x, t.y])
        .for_each(&mut put);
    for f in mesh.faces() {
        for i in f {
            out.extend_from_slice(&i.to_le_bytes());
        }
    }
    out
}

pub fn mesh_from_bytes(bytes: &[u8]) -> Result<Mesh, CliError> {
    let bad = |msg: String| CliError::Bundle(format!("mesh: {msg}"));
    if bytes.len() < 16 || &bytes[..4] != MESH_MAGIC {
        return Err(bad("not a DMSH file".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    if word(4) != MESH_VERSION {
        return Err(bad(format!("unsupported version {}", word(4))));
    }
    let (n, m) = (word(8) as usize, word(12) as usize);
    let expected = 16 + n * 32 + m * 12;
    if bytes.len() != expected {
        return Err(bad(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let float =
        |i: usize| f32::from_le_bytes(bytes[16 + 4 * i..20 + 4 * i].try_into().unwrap()) as f64;
    let vec3 = |base: usize, k: usize| {
        Vec3::new(
            float(base + 3 * k),
            float(base + 3 * k + 1),
            float(base + 3 * k + 2),
        )
    };
    let positions = (0..n).map(|k| vec3(0, k)).collect();
    // renormalize in double precision so the unit-length check sees no f32 rounding
    let normals = (0..n).map(|k| vec3(3 * n, k).normalize()).collect();
    let uvs = (0..n)
        .map(|k| Vec2::new(float(6 * n + 2 * k), float(6 * n + 2 * k + 1)))
        .collect();
    let faces = (0..m)
        .map(|f| std::array::from_fn(|j| word(16 + 32 * n + 12 * f + 4 * j)))
        .collect();
    Ok(Mesh::new(positions, normals, uvs, faces)?)
}

fn colors_to_bytes(colors: impl Iterator<Item = [f32; 3]>) -> Vec<u8> {
    colors.flatten().flat_map(f32::to_le_bytes).collect()
}

pub fn colors_from_bytes(bytes: &[u8], count: usize) -> Result<Vec<[f32; 3]>, CliError> {
    if bytes.len() != count * 12 {
        return Err(CliError::Bundle(format!(
            "color table has {} bytes, expected {} for {count} vertices",
            bytes.len(),
            count * 12
        )));
    }
    Ok(bytes
        .chunks_exact(12)
        .map(|c| {
            std::array::from_fn(|i| f32::from_le_bytes(c[4 * i..4 * i + 4].try_into().unwrap()))
        })
        .collect())
}

/// Bakes per-vertex colors into a `size x size` uv atlas. Texel centers sit at
/// `((x + 0.5) / size, (y + 0.5) / size)`; texels no face covers take the mean
/// of covered neighbors over two dilation passes so bilinear lookups near
/// chart borders stay on the surface color.
pub fn bake_atlas(mesh: &Mesh, colors: &[[f32; 3]], size: u32) -> Image {
    let s = size as usize;
    let mut data = vec![[0.0f64; 3]; s * s];
    let mut filled = vec![false; s * s];
    for face in mesh.faces() {
        let p: [Vec2; 3] = face.map(|v| mesh.uvs()[v as usize] * size as f64 - Vec2::new(0.5, 0.5));
        let area = (p[1] - p[0]).perp(&(p[2] - p[0]));
        if area.abs() < 1e-12 {
            continue;
        }
        let lo = p.iter().fold(Vec2::repeat(f64::INFINITY), |a, q| a.inf(q));
        let hi = p
            .iter()
            .fold(Vec2::repeat(f64::NEG_INFINITY), |a, q| a.sup(q));
        let x0 = lo.x.ceil().max(0.0) as usize;
        let y0 = lo.y.ceil().max(0.0) as usize;
        let x1 = (hi.x.floor() as i64).min(s as i64 - 1);
        let y1 = (hi.y.floor() as i64).min(s as i64 - 1);
        for y in y0 as i64..=y1 {
            for x in x0 as i64..=x1 {
                let q = Vec2::new(x as f64, y as f64);
                let b = [
                    (p[2] - p[1]).perp(&(q - p[1])) / area,
                    (p[0] - p[2]).perp(&(q - p[2])) / area,
                    (p[1] - p[0]).perp(&(q - p[0])) / area,
                ];
                if b.iter().any(|&w| w < -1e-9) {
                    continue;
                }
                let i = y as usize * s + x as usize;
                for (ch, out) in data[i].iter_mut().enumerate() {
                    *out = (0..3)
                        .map(|j| b[j] * colors[face[j] as usize][ch] as f64)
                        .sum::<f64>()
                        .clamp(0.0, 1.0);
                }
                filled[i] = true;
            }
        }
    }
    for _ in 0..2 {
        let prev = filled.clone();
        let src = data.clone();
        for y in 0..s {
            for x in 0..s {
                let i = y * s + x;
                if prev[i] {
                    continue;
                }
                let mut sum = [0.0; 3];
                let mut k = 0.0;
                let neighbors = [
                    (x.wrapping_sub(1), y),
                    (x + 1, y),
                    (x, y.wrapping_sub(1)),
                    (x, y + 1),
                ];
                for (nx, ny) in neighbors {
                    if nx < s && ny < s && prev[ny * s + nx] {
                        for c in 0..3 {
                            sum[c] += src[ny * s + nx][c];
                        }
                        k += 1.0;
                    }
                }
                if k > 0.0 {
                    data[i] = sum.map(|v| v / k);
                    filled[i] = true;
                }
            }
        }
    }
    Image::new(size, size, data, None).expect("atlas is size x size")
}

/// Architecture tag a viewer checks before running the network.
pub fn arch_tag(skip: Skip) -> String {
    match skip {
        Skip::None => "dslf-mlp/skip-none".into(),
        Skip::Concat { layer } => format!("dslf-mlp/skip-concat-{layer}"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: String,
    pub version: u32,
    pub arch: String,
    pub vertex_count: usize,
    pub face_count: usize,
    pub atlas_size: u32,
    pub mesh: String,
    pub net: String,
    pub net_manifest: String,
    pub diffuse: String,
    pub diffuse_atlas: String,
    pub reference_camera: String,
    pub reference_frame: String,
    pub reference_colors: String,
    pub files: Vec<FileEntry>,
}

/// Writes a bundle into `out` and returns the paths written, manifest last.
pub fn export_bundle(
    mesh: &Mesh,
    net: &DslfNet,
    diffuse: &[[f32; 3]],
    camera: &CameraPose,
    atlas_size: u32,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    if diffuse.len() != mesh.vertex_count() {
        return Err(CliError::Bundle(format!(
            "{} diffuse colors for {} vertices",
            diffuse.len(),
            mesh.vertex_count()
        )));
    }
    let mesh_bytes = mesh_to_bytes(mesh);
    let mesh = mesh_from_bytes(&mesh_bytes)?;
    let colors = renderer::vertex_colors(&mesh, net, diffuse, camera)?;
    let frame = renderer::render_frame(&mesh, net, diffuse, camera)?;
    create_dir(out)?;
    write_bytes(&out.join(MESH_BIN), &mesh_bytes)?;
    write_bytes(&out.join(NET), &net.to_bytes())?;
    write_json(&out.join(NET_MANIFEST), &net.manifest())?;
    write_bytes(
        &out.join(DIFFUSE_BIN),
        &colors_to_bytes(diffuse.iter().copied()),
    )?;
    bake_atlas(&mesh, diffuse, atlas_size).save_png(out.join(DIFFUSE_PNG))?;
    camera.save(out.join(REFERENCE_CAMERA))?;
    frame.save_png(out.join(REFERENCE_FRAME))?;
    write_bytes(
        &out.join(REFERENCE_COLORS),
        &colors_to_bytes(colors.iter().map(|c| c.map(|v| v as f32))),
    )?;
    let names = [
        MESH_BIN,
        NET,
        NET_MANIFEST,
        DIFFUSE_BIN,
        DIFFUSE_PNG,
        REFERENCE_CAMERA,
        REFERENCE_FRAME,
        REFERENCE_COLORS,
    ];
    let mut files = Vec::new();
    let mut entries = Vec::new();
    for name in names {
        let path = out.join(name);
        let bytes = read_bytes(&path)?;
        entries.push(FileEntry {
            path: name.into(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
        files.push(path);
    }
    let manifest = BundleManifest {
        format: "dslf-bundle".into(),
        version: BUNDLE_VERSION,
        arch: arch_tag(net.arch().skip),
        vertex_count: mesh.vertex_count(),
        face_count: mesh.face_count(),
        atlas_size,
        mesh: MESH_BIN.into(),
        net: NET.into(),
        net_manifest: NET_MANIFEST.into(),
        diffuse: DIFFUSE_BIN.into(),
        diffuse_atlas: DIFFUSE_PNG.into(),
        reference_camera: REFERENCE_CAMERA.into(),
        reference_frame: REFERENCE_FRAME.into(),
        reference_colors: REFERENCE_COLORS.into(),
        files: entries,
    };
    let path = out.join(MANIFEST);
    write_json(&path, &manifest)?;
    files.push(path);
    Ok(files)
}

/// A bundle read back with every checksum verified.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub manifest: BundleManifest,
    pub mesh: Mesh,
    pub net: DslfNet,
    pub diffuse: Vec<[f32; 3]>,
    pub camera: CameraPose,
    pub reference_colors: Vec<[f32; 3]>,
}

pub fn load_bundle(dir: &Path) -> Result<Bundle, CliError> {
    let manifest: BundleManifest = serde_json::from_str(&read_text(&dir.join(MANIFEST))?)?;
    if manifest.format != "dslf-bundle" || manifest.version != BUNDLE_VERSION {
        return Err(CliError::Bundle(format!(
            "unsupported bundle {} v{}",
            manifest.format, manifest.version
        )));
    }
    let read = |name: &str| -> Result<Vec<u8>, CliError> {
        let entry = manifest
            .files
            .iter()
            .find(|e| e.path == name)
            .ok_or_else(|| CliError::Bundle(format!("{name} is not listed in the manifest")))?;
        let bytes = read_bytes(&dir.join(name))?;
        if bytes.len() as u64 != entry.bytes || sha256_hex(&bytes) != entry.sha256 {
            return Err(CliError::Bundle(format!("checksum mismatch for {name}")));
        }
        Ok(bytes)
    };
    let mesh = mesh_from_bytes(&read(&manifest.mesh)?)?;
    let net = DslfNet::from_bytes(&read(&manifest.net)?)?;
    let net_manifest: NetManifest = serde_json::from_slice(&read(&manifest.net_manifest)?)?;
    if net_manifest != net.manifest() || manifest.arch != arch_tag(net.arch().skip) {
        return Err(CliError::Bundle(
            "network does not match its manifest".into(),
        ));
    }
    if mesh.vertex_count() != manifest.vertex_count || mesh.face_count() != manifest.face_count {
        return Err(CliError::Bundle(
            "mesh does not match the manifest counts".into(),
        ));
    }
    let diffuse = colors_from_bytes(&read(&manifest.diffuse)?, mesh.vertex_count())?;
    let reference_colors =
        colors_from_bytes(&read(&manifest.reference_colors)?, mesh.vertex_count())?;
    read(&manifest.diffuse_atlas)?;
    read(&manifest.reference_frame)?;
    let camera_doc = serde_json::from_slice(&read(&manifest.reference_camera)?)?;
    let camera = CameraPose::from_json(&camera_doc)?;
    Ok(Bundle {
        manifest,
        mesh,
        net,
        diffuse,
        camera,
        reference_colors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use dslf_core::synth::{icosphere, plane};

    #[test]
    fn mesh_binary_round_trips_through_single_precision() {
        let mesh = icosphere(2, 1.0).unwrap();
        let bytes = mesh_to_bytes(&mesh);
        assert_eq!(
            bytes.len(),
            16 + mesh.vertex_count() * 32 + mesh.face_count() * 12
        );
        let back = mesh_from_bytes(&bytes).unwrap();
        assert_eq!(back.faces(), mesh.faces());
        for (a, b) in back.positions().iter().zip(mesh.positions()) {
            assert!((a - b).amax() < 1e-7);
        }
        // a second trip is lossless
        assert_eq!(mesh_to_bytes(&back), bytes);
        assert!(mesh_from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn atlas_of_constant_colors_is_constant() {
        let mesh = plane(2.0, 3).unwrap();
        let atlas = bake_atlas(&mesh, &vec![[0.25, 0.5, 0.75]; mesh.vertex_count()], 32);
        for p in atlas.pixels() {
            for (c, want) in p.iter().zip([0.25, 0.5, 0.75]) {
                assert!((c - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn atlas_interpolates_linearly_across_a_plane() {
        let mesh = plane(2.0, 4).unwrap();
        // color = u in the red channel, v in green
        let colors: Vec<[f32; 3]> = mesh
            .uvs()
            .iter()
            .map(|t| [t.x as f32, t.y as f32, 0.0])
            .collect();
        let atlas = bake_atlas(&mesh, &colors, 16);
        for y in 0..16 {
            for x in 0..16 {
                let p = atlas.get(x, y);
                assert!((p[0] - (x as f64 + 0.5) / 16.0).abs() < 1e-6);
                assert!((p[1] - (y as f64 + 0.5) / 16.0).abs() < 1e-6);
            }
        }
    }
}
