//! Surface light field sample sets and their binary container.
//!
//! Layout (all little-endian):
//!
//! ```text
//! "DSLF" | version u32 | mesh_ref len u32 | mesh_ref utf-8 | flags u32
//! vertex_count u32 | sample_count u64
//! vertex_id u32 * N | direction f32 * 3N | rgb f32 * 3N
//! [camera u32 * N]          if FLAG_PROVENANCE
//! [diffuse f32 * 3V]        if FLAG_DIFFUSE
//! ```

use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::mesh::Mesh;

pub const MAGIC: &[u8; 4] = b"DSLF";
pub const VERSION: u32 = 1;

const FLAG_INVERTED: u32 = 1;
const FLAG_RESIDUAL: u32 = 1 << 1;
const FLAG_DIFFUSE: u32 = 1 << 2;
const FLAG_PROVENANCE: u32 = 1 << 3;

pub const UNIT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("not a dataset file (bad magic)")]
    BadMagic,
    #[error("unsupported dataset version {0}")]
    Version(u32),
    #[error("truncated dataset: needed {needed} bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("{0} trailing bytes after dataset")]
    Trailing(usize),
    #[error("dataset violates invariants: {0}")]
    Invalid(ValidationReport),
    #[error("mesh reference is not utf-8")]
    MeshRef,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Whether sample directions are the raw outgoing view direction or its mirror about the normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionSpace {
    Raw,
    Inverted,
}

/// One observed ray: the vertex it leaves, its unit direction and its color.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaySample {
    pub vertex_id: u32,
    pub direction: [f32; 3],
    pub rgb: [f32; 3],
    /// Index of the camera that observed the ray, when known.
    pub camera: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlfDataset {
    pub mesh_ref: String,
    pub vertex_count: u32,
    pub samples: Vec<RaySample>,
    pub direction_space: DirectionSpace,
    /// `true` when `rgb` holds `observation - diffuse` instead of raw radiance.
    pub residual: bool,
    pub diffuse: Option<Vec<[f32; 3]>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    VertexOutOfRange {
        sample: usize,
        vertex_id: u32,
        vertex_count: u32,
    },
    NonUnitDirection {
        sample: usize,
        norm: f64,
    },
    ColorOutOfRange {
        sample: usize,
        channel: usize,
        value: f32,
    },
    NonFinite {
        sample: usize,
    },
    MissingDiffuse,
    DiffuseLength {
        expected: u32,
        got: usize,
    },
    DiffuseOutOfRange {
        vertex: usize,
    },
    PartialProvenance {
        sample: usize,
    },
    MeshVertexCount {
        dataset: u32,
        mesh: usize,
    },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::VertexOutOfRange {
                sample,
                vertex_id,
                vertex_count,
            } => write!(
                f,
                "sample {sample}: vertex {vertex_id} out of range ({vertex_count} vertices)"
            ),
            Issue::NonUnitDirection { sample, norm } => {
                write!(f, "sample {sample}: direction norm {norm}")
            }
            Issue::ColorOutOfRange {
                sample,
                channel,
                value,
            } => {
                write!(
                    f,
                    "sample {sample}: channel {channel} = {value} out of range"
                )
            }
            Issue::NonFinite { sample } => write!(f, "sample {sample}: non-finite value"),
            Issue::MissingDiffuse => write!(f, "residual dataset without diffuse table"),
            Issue::DiffuseLength { expected, got } => {
                write!(f, "diffuse table has {got} entries, expected {expected}")
            }
            Issue::DiffuseOutOfRange { vertex } => {
                write!(f, "diffuse of vertex {vertex} outside [0,1]")
            }
            Issue::PartialProvenance { sample } => {
                write!(
                    f,
                    "sample {sample}: camera provenance missing while others have it"
                )
            }
            Issue::MeshVertexCount { dataset, mesh } => {
                write!(f, "dataset expects {dataset} vertices, mesh has {mesh}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shown: Vec<String> = self.issues.iter().take(8).map(|i| i.to_string()).collect();
        write!(f, "{}", shown.join("; "))?;
        if self.issues.len() > 8 {
            write!(f, "; ... ({} issues total)", self.issues.len())?;
        }
        Ok(())
    }
}

fn norm3(v: [f32; 3]) -> f64 {
    v.iter()
        .map(|&c| (c as f64) * (c as f64))
        .sum::<f64>()
        .sqrt()
}

impl SlfDataset {
    pub fn has_provenance(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.camera.is_some())
    }

    /// Every violated invariant, independent of any mesh.
    pub fn check(&self) -> ValidationReport {
        let mut issues = Vec::new();
        let (lo, hi) = if self.residual {
            (-1.0, 1.0)
        } else {
            (0.0, 1.0)
        };
        let provenance = self.samples.first().is_some_and(|s| s.camera.is_some());
        for (i, s) in self.samples.iter().enumerate() {
            if s.vertex_id >= self.vertex_count {
                issues.push(Issue::VertexOutOfRange {
                    sample: i,
                    vertex_id: s.vertex_id,
                    vertex_count: self.vertex_count,
                });
            }
            if !s
                .direction
                .iter()
                .chain(s.rgb.iter())
                .all(|v| v.is_finite())
            {
                issues.push(Issue::NonFinite { sample: i });
                continue;
            }
            let n = norm3(s.direction);
            if (n - 1.0).abs() > UNIT_TOL {
                issues.push(Issue::NonUnitDirection { sample: i, norm: n });
            }
            for (c, &v) in s.rgb.iter().enumerate() {
                if !(lo..=hi).contains(&v) {
                    issues.push(Issue::ColorOutOfRange {
                        sample: i,
                        channel: c,
                        value: v,
                    });
                }
            }
            if s.camera.is_some() != provenance {
                issues.push(Issue::PartialProvenance { sample: i });
            }
        }
        match &self.diffuse {
            None if self.residual => issues.push(Issue::MissingDiffuse),
            None => {}
            Some(d) => {
                if d.len() != self.vertex_count as usize {
                    issues.push(Issue::DiffuseLength {
                        expected: self.vertex_count,
                        got: d.len(),
                    });
                }
                for (v, rgb) in d.iter().enumerate() {
                    if !rgb.iter().all(|c| (0.0..=1.0).contains(c)) {
                        issues.push(Issue::DiffuseOutOfRange { vertex: v });
                    }
                }
            }
        }
        ValidationReport { issues }
    }

    /// [`SlfDataset::check`] plus agreement with the mesh the samples belong to.
    pub fn validate(&self, mesh: &Mesh) -> ValidationReport {
        let mut report = self.check();
        if self.vertex_count as usize != mesh.vertex_count() {
            report.issues.push(Issue::MeshVertexCount {
                dataset: self.vertex_count,
                mesh: mesh.vertex_count(),
            });
        }
        report
    }

    /// Deterministic serialization; fails if the dataset is invalid.
    pub fn to_bytes(&self) -> Result<Vec<u8>, DatasetError> {
        let report = self.check();
        if !report.is_empty() {
            return Err(DatasetError::Invalid(report));
        }
        let n = self.samples.len();
        let provenance = self.has_provenance();
        let mut flags = 0;
        if self.direction_space == DirectionSpace::Inverted {
            flags |= FLAG_INVERTED;
        }
        if self.residual {
            flags |= FLAG_RESIDUAL;
        }
        if self.diffuse.is_some() {
            flags |= FLAG_DIFFUSE;
        }
        if provenance {
            flags |= FLAG_PROVENANCE;
        }
        let mut out = Vec::with_capacity(32 + self.mesh_ref.len() + n * 32);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.mesh_ref.len() as u32).to_le_bytes());
        out.extend_from_slice(self.mesh_ref.as_bytes());
        out.extend_from_slice(&flags.to_le_bytes());
        out.extend_from_slice(&self.vertex_count.to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        for s in &self.samples {
            out.extend_from_slice(&s.vertex_id.to_le_bytes());
        }
        for s in &self.samples {
            for c in s.direction {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        for s in &self.samples {
            for c in s.rgb {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        if provenance {
            for s in &self.samples {
                out.extend_from_slice(&s.camera.unwrap_or(u32::MAX).to_le_bytes());
            }
        }
        if let Some(d) = &self.diffuse {
            for rgb in d {
                for c in rgb {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DatasetError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(DatasetError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(DatasetError::Version(version));
        }
        let len = r.u32()? as usize;
        let mesh_ref = std::str::from_utf8(r.take(len)?)
            .map_err(|_| DatasetError::MeshRef)?
            .to_owned();
        let flags = r.u32()?;
        let vertex_count = r.u32()?;
        let n = r.u64()? as usize;
        // bound the allocation by what the file can actually hold
        if n > bytes.len() / 28 + 1 {
            return Err(DatasetError::Truncated {
                offset: r.pos,
                needed: n.saturating_mul(28),
            });
        }
        let ids: Vec<u32> = (0..n).map(|_| r.u32()).collect::<Result<_, _>>()?;
        let dirs: Vec<[f32; 3]> = (0..n).map(|_| r.f32x3()).collect::<Result<_, _>>()?;
        let rgbs: Vec<[f32; 3]> = (0..n).map(|_| r.f32x3()).collect::<Result<_, _>>()?;
        let cams: Option<Vec<u32>> = if flags & FLAG_PROVENANCE != 0 {
            Some((0..n).map(|_| r.u32()).collect::<Result<_, _>>()?)
        } else {
            None
        };
        let diffuse = if flags & FLAG_DIFFUSE != 0 {
            Some(
                (0..vertex_count)
                    .map(|_| r.f32x3())
                    .collect::<Result<Vec<_>, _>>()?,
            )
        } else {
            None
        };
        if r.pos != bytes.len() {
            return Err(DatasetError::Trailing(bytes.len() - r.pos));
        }
        let samples = (0..n)
            .map(|i| RaySample {
                vertex_id: ids[i],
                direction: dirs[i],
                rgb: rgbs[i],
                camera: cams.as_ref().map(|c| c[i]),
            })
            .collect();
        let ds = Self {
            mesh_ref,
            vertex_count,
            samples,
            direction_space: if flags & FLAG_INVERTED != 0 {
                DirectionSpace::Inverted
            } else {
                DirectionSpace::Raw
            },
            residual: flags & FLAG_RESIDUAL != 0,
            diffuse,
        };
        let report = ds.check();
        if !report.is_empty() {
            return Err(DatasetError::Invalid(report));
        }
        Ok(ds)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<u64, DatasetError> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, &bytes)?;
        Ok(bytes.len() as u64)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Sample indices grouped per vertex, in sample order.
    pub fn samples_by_vertex(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.vertex_count as usize];
        for (i, s) in self.samples.iter().enumerate() {
            if let Some(g) = groups.get_mut(s.vertex_id as usize) {
                g.push(i);
            }
        }
        groups
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DatasetError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(DatasetError::Truncated {
                offset: self.pos,
                needed: n,
            }),
        }
    }

    fn u32(&mut self) -> Result<u32, DatasetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DatasetError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32x3(&mut self) -> Result<[f32; 3], DatasetError> {
        let b = self.take(12)?;
        Ok([0, 4, 8].map(|o| f32::from_le_bytes(b[o..o + 4].try_into().unwrap())))
    }
}
