//! Experiment harnesses built from the other modules.
//!
//! * [`DslfExperiment`]: capture a glossy sphere from a camera ring, train the
//!   network on the residuals and score it on seeded held-out viewpoints
//!   against a diffuse-only and a nearest-view baseline.
//! * [`run_ablation`]: holdout KL of trunk-depth variants over several seeds.
//! * [`RemeshExperiment`]: per-vertex rendering of a two-material plane after
//!   texture-aware remeshing versus uniform midpoint subdivision, both scored
//!   against a per-pixel Phong render.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{intrinsics_from_fov, CameraPose};
use crate::dataset::{DatasetError, SlfDataset};
use crate::image::Image;
use crate::mesh::Mesh;
use crate::metrics::{self, MetricError};
use crate::network::{Arch, DslfNet, NetError, TrainReport, TrainSchedule};
use crate::preprocess::{self, CullReport, PreprocessError, TrainingSet};
use crate::remesh::{self, RemeshError, SegmentConfig};
use crate::renderer::{self, RenderError};
use crate::synth::{
    self, Assignment, Material, PointLight, Primitive, RigParams, Scene, SceneConfig, SynthError,
};
use crate::{Vec2, Vec3};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Remesh(#[from] RemeshError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{0}")]
    Invalid(String),
}

pub const METHOD_DSLF: &str = "dslf";
pub const METHOD_DIFFUSE: &str = "diffuse_only";
pub const METHOD_NEAREST: &str = "nearest_view";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DslfExperiment {
    pub scene: SceneConfig,
    pub rig: RigParams,
    pub train_views: u32,
    /// Elevation of the training ring, radians.
    pub train_elevation: f64,
    pub heldout_views: u32,
    /// Elevation range of the held-out viewpoints, radians.
    pub heldout_elevation: (f64, f64),
    pub view_seed: u64,
    pub arch: Arch,
    pub net_seed: u64,
    pub schedule: TrainSchedule,
    pub holdout_fraction: f64,
}

impl DslfExperiment {
    /// Level-3 glossy sphere, 60 cameras on a ring at 20 degrees, 20 held-out
    /// views between 5 and 35 degrees, quarter-width network, desk schedule.
    pub fn desk(seed: u64) -> Self {
        Self {
            scene: SceneConfig::glossy_sphere(3),
            rig: RigParams::default(),
            train_views: 60,
            train_elevation: 20f64.to_radians(),
            heldout_views: 20,
            heldout_elevation: (5f64.to_radians(), 35f64.to_radians()),
            view_seed: seed,
            arch: Arch::scaled(0.25),
            net_seed: seed,
            schedule: TrainSchedule::desk(seed),
            holdout_fraction: 0.1,
        }
    }

    pub fn train_cameras(&self) -> Vec<CameraPose> {
        synth::ring_rig(self.train_views, self.train_elevation, &self.rig)
    }

    pub fn heldout_cameras(&self) -> Vec<CameraPose> {
        synth::random_rig(
            self.heldout_views,
            self.heldout_elevation,
            self.view_seed,
            &self.rig,
        )
    }

    /// Builds the scene, captures it and runs the preprocessing chain.
    pub fn prepare(&self) -> Result<PreparedData, EvalError> {
        let scene = synth::make_scene(&self.scene)?;
        let cameras = self.train_cameras();
        let capture = synth::capture_dataset(&scene, &cameras);
        let (culled, cull) = preprocess::cull_occluded(&capture.dataset, &scene.mesh, &cameras)?;
        let (residual, _) = preprocess::to_residuals(&culled)?;
        let inverted = preprocess::to_inverted(&residual, &scene.mesh)?;
        let tuples = preprocess::encode_training_tuples(&inverted, &scene.mesh)?;
        let diffuse = inverted
            .diffuse
            .clone()
            .expect("residual datasets carry a diffuse table");
        Ok(PreparedData {
            scene,
            cameras,
            raw: capture.dataset,
            culled,
            residual: inverted,
            diffuse,
            tuples,
            cull,
        })
    }

    pub fn train(&self, data: &PreparedData) -> Result<TrainReport, EvalError> {
        let net = DslfNet::init(self.arch.clone(), self.net_seed)?;
        Ok(crate::network::train(
            &net,
            &data.tuples,
            &self.schedule,
            self.holdout_fraction,
        )?)
    }

    /// Prepare, train and compare in one go.
    pub fn run(&self) -> Result<DslfOutcome, EvalError> {
        let data = self.prepare()?;
        let report = self.train(&data)?;
        let comparison = compare_heldout(&data, &report.best, &self.heldout_cameras())?;
        let compression = Compression::measure(&data.raw, &report.best, &data.diffuse)?;
        Ok(DslfOutcome {
            data,
            report,
            comparison,
            compression,
        })
    }
}

/// Everything the training and evaluation stages need from the capture.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub scene: Scene,
    pub cameras: Vec<CameraPose>,
    /// Samples as captured.
    pub raw: SlfDataset,
    /// Raw samples that survived culling; the nearest-view baseline reads these.
    pub culled: SlfDataset,
    /// Residual samples in inverted direction space.
    pub residual: SlfDataset,
    pub diffuse: Vec<[f32; 3]>,
    pub tuples: TrainingSet,
    pub cull: CullReport,
}

#[derive(Debug, Clone)]
pub struct DslfOutcome {
    pub data: PreparedData,
    pub report: TrainReport,
    pub comparison: Comparison,
    pub compression: Compression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewScore {
    pub view: usize,
    pub method: String,
    pub psnr: f64,
    pub ssim: f64,
}

/// Mean scores per method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub table: Vec<MethodScore>,
    pub views: Vec<ViewScore>,
}

impl Comparison {
    pub fn method(&self, name: &str) -> Option<&MethodScore> {
        self.table.iter().find(|m| m.method == name)
    }

    /// `method,psnr,ssim` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,psnr,ssim\n");
        for m in &self.table {
            s.push_str(&format!("{},{:.4},{:.4}\n", m.method, m.psnr, m.ssim));
        }
        s
    }

    fn from_views(views: Vec<ViewScore>) -> Self {
        let mut table: Vec<MethodScore> = Vec::new();
        for v in &views {
            if !table.iter().any(|m| m.method == v.method) {
                let rows: Vec<&ViewScore> = views.iter().filter(|w| w.method == v.method).collect();
                let n = rows.len() as f64;
                table.push(MethodScore {
                    method: v.method.clone(),
                    psnr: rows.iter().map(|r| r.psnr).sum::<f64>() / n,
                    ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
                });
            }
        }
        Self { table, views }
    }
}

/// For every vertex, the captured color whose direction is closest to the
/// direction toward `cam`. Vertices never observed keep `fallback`.
pub fn nearest_view_colors(
    mesh: &Mesh,
    raw: &SlfDataset,
    cam: &CameraPose,
    fallback: &[[f32; 3]],
) -> Vec<[f64; 3]> {
    let c = cam.center();
    let mut best: Vec<(f64, [f64; 3])> = fallback
        .iter()
        .map(|d| (f64::NEG_INFINITY, d.map(f64::from)))
        .collect();
    for s in &raw.samples {
        let v = s.vertex_id as usize;
        let Some(want) = crate::try_normalize(&(c - mesh.positions()[v])) else {
            continue;
        };
        let d = Vec3::new(
            s.direction[0] as f64,
            s.direction[1] as f64,
            s.direction[2] as f64,
        );
        let score = d.dot(&want);
        if score > best[v].0 {
            best[v] = (score, s.rgb.map(f64::from));
        }
    }
    best.into_iter().map(|(_, rgb)| rgb).collect()
}

/// Scores the network and both baselines on `views` against per-vertex
/// ground-truth frames, over the covered pixels of each frame.
pub fn compare_heldout(
    data: &PreparedData,
    net: &DslfNet,
    views: &[CameraPose],
) -> Result<Comparison, EvalError> {
    compare_views(&data.scene, &data.culled, &data.diffuse, net, views)
}

/// [`compare_heldout`] from its parts: the scene supplies mesh and ground
/// truth, `culled` feeds the nearest-view baseline.
pub fn compare_views(
    scene: &Scene,
    culled: &SlfDataset,
    diffuse: &[[f32; 3]],
    net: &DslfNet,
    views: &[CameraPose],
) -> Result<Comparison, EvalError> {
    let mesh = &scene.mesh;
    let diffuse_colors: Vec<[f64; 3]> = diffuse.iter().map(|d| d.map(f64::from)).collect();
    let mut scores = Vec::new();
    for (i, cam) in views.iter().enumerate() {
        let truth = synth::render_vertex_phong(scene, cam);
        let mask = truth.mask().expect("rendered frames carry a mask").to_vec();
        let buf = renderer::rasterize(mesh, cam, true);
        let frames = [
            (
                METHOD_DSLF,
                renderer::render_frame(mesh, net, diffuse, cam)?,
            ),
            (METHOD_DIFFUSE, renderer::shade(mesh, &buf, &diffuse_colors)),
            (
                METHOD_NEAREST,
                renderer::shade(mesh, &buf, &nearest_view_colors(mesh, culled, cam, diffuse)),
            ),
        ];
        for (method, frame) in frames {
            scores.push(ViewScore {
                view: i,
                method: method.to_string(),
                psnr: metrics::psnr(&frame, &truth, &mask)?,
                ssim: metrics::ssim(&frame, &truth, &mask)?,
            });
        }
    }
    Ok(Comparison::from_views(scores))
}

/// Byte counts behind the compression rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Compression {
    pub raw_bytes: u64,
    pub net_bytes: u64,
    pub diffuse_bytes: u64,
    pub ratio: f64,
}

impl Compression {
    /// Diffuse tables are stored as little-endian f32 triples.
    pub fn diffuse_bytes(diffuse: &[[f32; 3]]) -> u64 {
        diffuse.len() as u64 * 12
    }

    pub fn from_sizes(
        raw_bytes: u64,
        net_bytes: u64,
        diffuse_bytes: u64,
    ) -> Result<Self, EvalError> {
        let ratio =
            metrics::compression_rate(raw_bytes as f64, (net_bytes + diffuse_bytes) as f64)?;
        Ok(Self {
            raw_bytes,
            net_bytes,
            diffuse_bytes,
            ratio,
        })
    }

    /// Sizes of the serialized sample file, network and diffuse table.
    pub fn measure(
        raw: &SlfDataset,
        net: &DslfNet,
        diffuse: &[[f32; 3]],
    ) -> Result<Self, EvalError> {
        Self::from_sizes(
            raw.to_bytes()?.len() as u64,
            net.to_bytes().len() as u64,
            Self::diffuse_bytes(diffuse),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub layers: Vec<usize>,
    pub seed: u64,
    /// Lowest holdout KL reached during training.
    pub holdout_kl: f64,
}

/// Trains one network per (layer set, seed) on `tuples`. Stream and trunk
/// widths come from `base`; `schedule.seed` is replaced by each seed.
pub fn run_ablation(
    tuples: &TrainingSet,
    base: &Arch,
    layer_sets: &[Vec<usize>],
    seeds: &[u64],
    schedule: &TrainSchedule,
    holdout_fraction: f64,
) -> Result<Vec<AblationRow>, EvalError> {
    if holdout_fraction <= 0.0 {
        return Err(EvalError::Invalid(
            "the ablation needs a holdout split".into(),
        ));
    }
    let widths =
        |layers: &[crate::network::LayerSpec]| layers.iter().map(|l| l.out_dim).collect::<Vec<_>>();
    let direction = widths(&base.direction);
    let position = widths(&base.position);
    let trunk = widths(&base.trunk);
    if trunk.len() != 4 {
        return Err(EvalError::Invalid(
            "the base architecture needs four trunk layers".into(),
        ));
    }
    let mut rows = Vec::new();
    for layers in layer_sets {
        let arch = Arch::trunk_ablation(
            &direction,
            &position,
            [trunk[0], trunk[1], trunk[2]],
            layers,
        )?;
        for &seed in seeds {
            let net = DslfNet::init(arch.clone(), seed)?;
            let mut sched = schedule.clone();
            sched.seed = seed;
            let report = crate::network::train(&net, tuples, &sched, holdout_fraction)?;
            let holdout_kl = report
                .log
                .iter()
                .filter_map(|e| e.holdout_kl)
                .fold(f64::INFINITY, f64::min);
            log::info!("ablation {layers:?} seed {seed}: holdout KL {holdout_kl:.6e}");
            rows.push(AblationRow {
                layers: layers.clone(),
                seed,
                holdout_kl,
            });
        }
    }
    Ok(rows)
}

/// Mean holdout KL per layer set, in first-seen order.
pub fn ablation_means(rows: &[AblationRow]) -> Vec<(Vec<usize>, f64)> {
    let mut out: Vec<(Vec<usize>, f64)> = Vec::new();
    for r in rows {
        if out.iter().any(|(l, _)| *l == r.layers) {
            continue;
        }
        let kls: Vec<f64> = rows
            .iter()
            .filter(|s| s.layers == r.layers)
            .map(|s| s.holdout_kl)
            .collect();
        out.push((r.layers.clone(), kls.iter().sum::<f64>() / kls.len() as f64));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemeshExperiment {
    /// Material texture resolution (square).
    pub texture_size: u32,
    /// Texels `[x0, x1) x [y0, y1)` that use the second material.
    pub inset: [u32; 4],
    pub plane_size: f64,
    pub plane_cells: u32,
    pub materials: [Material; 2],
    pub light: PointLight,
    pub segment: SegmentConfig,
    pub image_size: u32,
}

impl Default for RemeshExperiment {
    fn default() -> Self {
        Self {
            texture_size: 64,
            inset: [21, 13, 43, 50],
            plane_size: 2.0,
            plane_cells: 4,
            materials: [
                Material {
                    kd: [0.7, 0.6, 0.45],
                    ks: [0.2, 0.2, 0.2],
                    shininess: 12.0,
                },
                Material {
                    kd: [0.1, 0.15, 0.35],
                    ks: [0.4, 0.4, 0.4],
                    shininess: 30.0,
                },
            ],
            light: PointLight {
                position: [0.4, 0.3, 2.0],
                intensity: [4.0, 4.0, 4.0],
            },
            segment: SegmentConfig::default(),
            image_size: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemeshOutcome {
    pub segmentation_moves: usize,
    pub energy_trace_len: usize,
    pub split_faces: usize,
    pub non_simple: usize,
    pub aware_vertices: usize,
    pub aware_faces: usize,
    pub uniform_level: u32,
    pub uniform_vertices: usize,
    pub aware_rmse: f64,
    pub uniform_rmse: f64,
    /// Same pipeline with the material map itself as the label map: the best
    /// any segmentation could do.
    pub oracle_vertices: usize,
    pub oracle_rmse: f64,
    /// Relative uv-area change of the remeshed mesh.
    pub area_error: f64,
}

impl RemeshExperiment {
    pub fn scene(&self) -> Result<Scene, EvalError> {
        let n = self.texture_size;
        let [x0, y0, x1, y1] = self.inset;
        let labels = (0..n * n)
            .map(|i| {
                let (x, y) = (i % n, i / n);
                u32::from((x0..x1).contains(&x) && (y0..y1).contains(&y))
            })
            .collect();
        Ok(synth::make_scene(&SceneConfig {
            primitive: Primitive::Plane {
                size: self.plane_size,
                cells: self.plane_cells,
            },
            materials: self.materials.to_vec(),
            assignment: Assignment::Texture {
                width: n,
                height: n,
                labels,
            },
            lights: vec![self.light],
            ambient: [0.05; 3],
        })?)
    }

    pub fn camera(&self) -> CameraPose {
        let k = intrinsics_from_fov(PI / 4.0, self.image_size, self.image_size);
        CameraPose::look_at(
            Vec3::new(0.0, -0.3, 3.0),
            Vec3::zeros(),
            Vec3::y(),
            k,
            self.image_size,
            self.image_size,
        )
    }

    /// The material map as a label map.
    pub fn material_labels(&self, scene: &Scene) -> Result<remesh::LabelMap, EvalError> {
        let Assignment::Texture {
            width,
            height,
            labels,
        } = &scene.assignment
        else {
            return Err(EvalError::Invalid("untextured scene".into()));
        };
        Ok(remesh::LabelMap::new(*width, *height, labels.clone(), 2)?)
    }

    pub fn run(&self) -> Result<RemeshOutcome, EvalError> {
        let scene = self.scene()?;
        let texture = scene.albedo_texture().expect("textured scene");
        let n = self.texture_size;
        let seg = remesh::segment_superpixels(n, n, &texture.luminance(), &self.segment)?;
        let aware = remesh::remesh(&scene.mesh, &seg.labels)?;
        let before: f64 = (0..scene.mesh.face_count())
            .map(|f| scene.mesh.face_uv_area(f))
            .sum();
        let after: f64 = (0..aware.mesh.face_count())
            .map(|f| aware.mesh.face_uv_area(f))
            .sum();
        let seams = remesh::split_seams(&aware.mesh, &aware.face_labels)?;
        let (uniform, level) = remesh::subdivide_to_budget(&scene.mesh, seams.mesh.vertex_count())?;

        let cam = self.camera();
        let truth = synth::render_pixel_phong(&scene, &cam);
        let mask = truth.mask().expect("rendered frames carry a mask").to_vec();
        let aware_frame = render_textured_vertices(&scene, &seams.mesh, &cam);
        let uniform_frame = render_textured_vertices(&scene, &uniform, &cam);
        let ideal = remesh::remesh(&scene.mesh, &self.material_labels(&scene)?)?;
        let ideal = remesh::split_seams(&ideal.mesh, &ideal.face_labels)?;
        let oracle_frame = render_textured_vertices(&scene, &ideal.mesh, &cam);
        Ok(RemeshOutcome {
            segmentation_moves: seg.block_moves + seg.pixel_moves,
            energy_trace_len: seg.trace.len(),
            split_faces: aware.report.split_faces.len(),
            non_simple: aware.report.non_simple.len(),
            aware_vertices: seams.mesh.vertex_count(),
            aware_faces: seams.mesh.face_count(),
            uniform_level: level,
            uniform_vertices: uniform.vertex_count(),
            aware_rmse: metrics::rmse(&aware_frame, &truth, &mask)?,
            uniform_rmse: metrics::rmse(&uniform_frame, &truth, &mask)?,
            oracle_vertices: ideal.mesh.vertex_count(),
            oracle_rmse: metrics::rmse(&oracle_frame, &truth, &mask)?,
            area_error: (after - before).abs() / before,
        })
    }
}

/// Material of each vertex, read from the texture just inside the first face
/// that uses it, so a vertex on a material edge takes its own face's side.
pub fn vertex_materials(scene: &Scene, mesh: &Mesh) -> Vec<Material> {
    let mut owner: Vec<Option<usize>> = vec![None; mesh.vertex_count()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        for &v in f {
            owner[v as usize].get_or_insert(fi);
        }
    }
    (0..mesh.vertex_count())
        .map(|v| {
            let uv = mesh.uvs()[v];
            let probe = match owner[v] {
                Some(fi) => {
                    let f = mesh.faces()[fi];
                    let c: Vec2 = f.iter().map(|&i| mesh.uvs()[i as usize]).sum::<Vec2>() / 3.0;
                    uv + (c - uv) * 1e-6
                }
                None => uv,
            };
            *scene.material_at_uv(&probe, 0)
        })
        .collect()
}

/// Per-vertex Phong colors of `mesh` (a refinement of the scene's surface)
/// interpolated across faces.
pub fn render_textured_vertices(scene: &Scene, mesh: &Mesh, cam: &CameraPose) -> Image {
    let c = cam.center();
    let materials = vertex_materials(scene, mesh);
    let colors: Vec<[f64; 3]> = (0..mesh.vertex_count())
        .map(|v| {
            let p = mesh.positions()[v];
            let n = mesh.normals()[v];
            let d = crate::try_normalize(&(c - p)).unwrap_or(n);
            synth::phong_radiance(&p, &n, &d, &materials[v], &scene.lights, &scene.ambient)
        })
        .collect();
    let buf = renderer::rasterize(mesh, cam, true);
    renderer::shade(mesh, &buf, &colors)
}
