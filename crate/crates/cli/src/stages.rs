//! Stage implementations. Each one reads its inputs from explicit paths,
//! writes its outputs into one directory and returns the files it wrote.
//! Missing inputs fail with [`CliError::MissingArtifact`] naming the path.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use dslf_core::camera::{self, load_camera_list, save_camera_list, CameraPose};
use dslf_core::dataset::SlfDataset;
use dslf_core::evaluate::{self, Compression};
use dslf_core::image::Image;
use dslf_core::mesh::Mesh;
use dslf_core::network::{self, DslfNet};
use dslf_core::preprocess;
use dslf_core::registration::{
    self, BaConfig, Correspondence2D3D, MatchFile, Observation, PairFile, PointFile, RansacConfig,
    ReconState,
};
use dslf_core::remesh::{self, LabelMap};
use dslf_core::renderer;
use dslf_core::synth::{self, Primitive, Scene, SceneConfig};
use dslf_core::{Mat3, Vec2, Vec3};

use crate::config::{RegisterParams, RemeshParams, SynthParams, TrainParams};
use crate::{create_dir, read_bytes, read_text, require, write_bytes, write_json, CliError};

pub const SCENE: &str = "scene.json";
pub const MESH: &str = "mesh.obj";
pub const ALBEDO: &str = "albedo.png";
pub const CAMERAS: &str = "cameras.json";
pub const HELDOUT_CAMERAS: &str = "heldout_cameras.json";
pub const SAMPLES: &str = "samples.dslf";
pub const RECON: &str = "recon.json";
pub const REGISTERED_CAMERAS: &str = "registered_cameras.json";
pub const REGISTRATION: &str = "registration.json";
pub const RELATIVE_POSE: &str = "relative_pose.json";
pub const POSE: &str = "pose.json";
pub const PNP: &str = "pnp.json";
pub const BA: &str = "ba.json";
pub const REFINE: &str = "refine.json";
pub const LABELS: &str = "labels.png";
pub const REMESH: &str = "remesh.json";
pub const CULLED: &str = "culled.dslf";
pub const RESIDUAL: &str = "residual.dslf";
pub const PREPROCESS: &str = "preprocess.json";
pub const NET: &str = "net.dnet";
pub const NET_MANIFEST: &str = "net.json";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const TRAIN: &str = "train.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const VIEWS_CSV: &str = "views.csv";
pub const METRICS: &str = "metrics.json";

fn load_mesh(path: &Path) -> Result<Mesh, CliError> {
    Ok(Mesh::load_obj(require(path)?)?)
}

fn load_cameras(path: &Path) -> Result<Vec<CameraPose>, CliError> {
    Ok(load_camera_list(require(path)?)?)
}

fn load_camera(path: &Path) -> Result<CameraPose, CliError> {
    Ok(CameraPose::load(require(path)?)?)
}

fn load_dataset(path: &Path) -> Result<SlfDataset, CliError> {
    Ok(SlfDataset::load(require(path)?)?)
}

pub fn load_net(path: &Path) -> Result<DslfNet, CliError> {
    Ok(DslfNet::from_bytes(&read_bytes(path)?)?)
}

fn diffuse_of(ds: &SlfDataset, path: &Path) -> Result<Vec<[f32; 3]>, CliError> {
    ds.diffuse
        .clone()
        .ok_or_else(|| CliError::Schema(format!("{} carries no diffuse table", path.display())))
}

/// The scene described by `scene_json` with its geometry read from `mesh`.
pub fn load_scene(scene_json: &Path, mesh: &Path) -> Result<Scene, CliError> {
    let cfg: SceneConfig = serde_json::from_str(&read_text(scene_json)?)?;
    scene_with_mesh(&cfg, mesh)
}

fn scene_with_mesh(cfg: &SceneConfig, mesh: &Path) -> Result<Scene, CliError> {
    require(mesh)?;
    let cfg = SceneConfig {
        primitive: Primitive::Obj {
            path: mesh.to_path_buf(),
        },
        ..cfg.clone()
    };
    let mut scene = synth::make_scene(&cfg)?;
    scene.name = MESH.into();
    Ok(scene)
}

/// Builds the scene (optionally on a replacement mesh), places the training
/// ring and the held-out viewpoints and captures one sample per visible
/// vertex per training camera.
pub fn synth(
    params: &SynthParams,
    view_seed: u64,
    mesh: Option<&Path>,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    create_dir(out)?;
    let mut scene = match mesh {
        Some(path) => scene_with_mesh(&params.scene, path)?,
        None => synth::make_scene(&params.scene)?,
    };
    // the dataset's mesh reference names the sibling mesh file
    scene.name = MESH.into();
    let mut files = vec![out.join(SCENE), out.join(MESH)];
    write_json(&files[0], &params.scene)?;
    scene.mesh.save_obj(&files[1])?;
    if let Some(texture) = scene.albedo_texture() {
        let path = out.join(ALBEDO);
        texture.save_png(&path)?;
        files.push(path);
    }
    let train = synth::ring_rig(
        params.train_views,
        params.train_elevation_deg.to_radians(),
        &params.rig,
    );
    let [lo, hi] = params.heldout_elevation_deg;
    let heldout = synth::random_rig(
        params.heldout_views,
        (lo.to_radians(), hi.to_radians()),
        view_seed,
        &params.rig,
    );
    let capture = synth::capture_dataset(&scene, &train);
    log::info!(
        "captured {} samples of {} vertices from {} cameras",
        capture.dataset.samples.len(),
        scene.mesh.vertex_count(),
        train.len()
    );
    for (name, cams) in [(CAMERAS, &train), (HELDOUT_CAMERAS, &heldout)] {
        let path = out.join(name);
        save_camera_list(cams, &path)?;
        files.push(path);
    }
    let path = out.join(SAMPLES);
    capture.dataset.save(&path)?;
    files.push(path);
    Ok(files)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RelativePoseDoc {
    #[serde(rename = "R")]
    r: [f64; 9],
    /// Unit translation of view 1 relative to view 0.
    t: [f64; 3],
    inliers: Vec<usize>,
    front_counts: [usize; 4],
}

fn row_major(m: &Mat3) -> [f64; 9] {
    std::array::from_fn(|i| m[(i / 3, i % 3)])
}

/// Relative pose of two views from pixel pairs: essential matrix by RANSAC,
/// then the cheirality-checked decomposition.
pub fn register_init(
    pairs: &Path,
    camera0: &Path,
    camera1: &Path,
    ransac: &RansacConfig,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let corrs = registration::load_json::<PairFile>(require(pairs)?)?.correspondences();
    let (c0, c1) = (load_camera(camera0)?, load_camera(camera1)?);
    let est = registration::estimate_essential(&corrs, &c0.k, &c1.k, ransac)?;
    let inl: Vec<_> = est.inliers.iter().map(|&i| corrs[i]).collect();
    let rel = registration::decompose_essential(&est.e, &inl, &c0.k, &c1.k)?;
    create_dir(out)?;
    let path = out.join(RELATIVE_POSE);
    write_json(
        &path,
        &RelativePoseDoc {
            r: row_major(&rel.r),
            t: [rel.t.x, rel.t.y, rel.t.z],
            inliers: est.inliers,
            front_counts: rel.front_counts,
        },
    )?;
    Ok(vec![path])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PnpDoc {
    inliers: Vec<usize>,
    rms: f64,
}

/// Absolute pose from 2D-3D correspondences. `intrinsics` is a camera
/// document whose `K` and resolution are used; its pose is ignored.
pub fn register_pnp(
    points: &Path,
    intrinsics: &Path,
    ransac: &RansacConfig,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let corrs = registration::load_json::<PointFile>(require(points)?)?.correspondences();
    let cam = load_camera(intrinsics)?;
    let res = registration::pnp_pose(&corrs, &cam.k, (cam.width, cam.height), ransac)?;
    create_dir(out)?;
    let files = vec![out.join(POSE), out.join(PNP)];
    res.pose.save(&files[0])?;
    write_json(
        &files[1],
        &PnpDoc {
            inliers: res.inliers,
            rms: res.rms,
        },
    )?;
    Ok(files)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BaDoc {
    trace: Vec<f64>,
    accepted_steps: usize,
    iterations: usize,
    converged: bool,
    rms: f64,
}

pub fn register_ba(recon: &Path, cfg: &BaConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let state = ReconState::load(require(recon)?)?;
    let res = registration::bundle_adjust(&state, cfg)?;
    create_dir(out)?;
    let files = vec![out.join(RECON), out.join(BA)];
    res.state.save(&files[0])?;
    write_json(
        &files[1],
        &BaDoc {
            trace: res.trace,
            accepted_steps: res.accepted_steps,
            iterations: res.iterations,
            converged: res.converged,
            rms: res.rms,
        },
    )?;
    Ok(files)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RefineDoc {
    used: usize,
    dropped: usize,
    inliers: Vec<usize>,
}

/// Refines `init` by lifting matched rendered pixels through the mesh's depth.
pub fn register_refine(
    mesh: &Path,
    init: &Path,
    matches: &Path,
    ransac: &RansacConfig,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let mesh = load_mesh(mesh)?;
    let init = load_camera(init)?;
    let matches: MatchFile = registration::load_json(require(matches)?)?;
    let depth = renderer::render_depth(&mesh, &init);
    let res = registration::refine_pose_with_depth(&depth, &matches.matches, &init, ransac)?;
    create_dir(out)?;
    let files = vec![out.join(POSE), out.join(REFINE)];
    res.pose.save(&files[0])?;
    write_json(
        &files[1],
        &RefineDoc {
            used: res.used,
            dropped: res.dropped,
            inliers: res.inliers,
        },
    )?;
    Ok(files)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewError {
    pub view: usize,
    pub pnp_rotation_deg: f64,
    pub pnp_center: f64,
    pub ba_rotation_deg: f64,
    pub ba_center: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegistrationReport {
    pub points: usize,
    pub observations: usize,
    pub pnp_rms: f64,
    pub ba_rms: f64,
    pub ba_converged: bool,
    /// Scale of the similarity that maps the adjusted points onto the mesh.
    pub alignment_scale: f64,
    pub mean_pnp_rotation_deg: f64,
    pub mean_pnp_center: f64,
    pub mean_rotation_deg: f64,
    pub mean_center: f64,
    pub views: Vec<ViewError>,
}

/// Least-squares similarity `(s, R, t)` with `dst ~ s R src + t`.
fn similarity(src: &[Vec3], dst: &[Vec3]) -> (f64, Mat3, Vec3) {
    let n = src.len() as f64;
    let (ms, md) = (src.iter().sum::<Vec3>() / n, dst.iter().sum::<Vec3>() / n);
    let mut cov = Mat3::zeros();
    let mut var = 0.0;
    for (a, b) in src.iter().zip(dst) {
        cov += (b - md) * (a - ms).transpose();
        var += (a - ms).norm_squared();
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Mat3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = u * d * v_t;
    let s = (svd.singular_values.component_mul(&d.diagonal())).sum() / var;
    (s, r, md - s * r * ms)
}

/// Re-estimates every camera from noisy projections of a seeded subset of
/// mesh vertices: PnP per view, bundle adjustment over all views, then a
/// similarity fit of the adjusted points onto the mesh to bring the cameras
/// back into the mesh frame. The input cameras are the ground truth that the
/// noise is added to and that the report compares against.
pub fn register(
    mesh: &Path,
    cameras: &Path,
    params: &RegisterParams,
    seed: u64,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let mesh = load_mesh(mesh)?;
    let truth = load_cameras(cameras)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise =
        Normal::new(0.0, params.pixel_noise).map_err(|e| CliError::Schema(e.to_string()))?;
    let take = params.points.min(mesh.vertex_count());
    let mut tracked: Vec<usize> =
        rand::seq::index::sample(&mut rng, mesh.vertex_count(), take).into_vec();
    tracked.sort_unstable();
    let points: Vec<Vec3> = tracked.iter().map(|&v| mesh.positions()[v]).collect();
    let mut observations = Vec::new();
    let mut poses = Vec::new();
    let mut pnp_sq = (0.0, 0usize);
    for (view, cam) in truth.iter().enumerate() {
        let buf = renderer::rasterize(&mesh, cam, false);
        let visible = renderer::visible_vertices(&mesh, cam, &buf);
        let seen: Vec<usize> = (0..tracked.len())
            .filter(|&i| visible[tracked[i]])
            .collect();
        let corrs: Vec<Correspondence2D3D> = seen
            .iter()
            .map(|&i| {
                let px = cam.project(&points[i]).expect("visible vertices project");
                Correspondence2D3D {
                    world: points[i],
                    pixel: px + Vec2::new(noise.sample(&mut rng), noise.sample(&mut rng)),
                }
            })
            .collect();
        let ransac = RansacConfig {
            threshold: params.threshold,
            seed: seed.wrapping_add(view as u64),
            ..RansacConfig::default()
        };
        let res = registration::pnp_pose(&corrs, &cam.k, (cam.width, cam.height), &ransac)?;
        pnp_sq.0 += res.rms * res.rms * res.inliers.len() as f64;
        pnp_sq.1 += res.inliers.len();
        observations.extend(res.inliers.iter().map(|&j| Observation {
            view,
            point: seen[j],
            pixel: corrs[j].pixel,
            weight: 1,
        }));
        poses.push(res.pose);
    }
    let state = ReconState {
        poses,
        points: points.clone(),
        observations,
    };
    let ba = registration::bundle_adjust(
        &state,
        &BaConfig {
            max_iterations: params.ba_iterations,
            ..BaConfig::default()
        },
    )?;
    // only points that were observed carry information about the gauge
    let mut observed = vec![false; points.len()];
    for o in &state.observations {
        observed[o.point] = true;
    }
    let (src, dst): (Vec<Vec3>, Vec<Vec3>) = (0..points.len())
        .filter(|&i| observed[i])
        .map(|i| (ba.state.points[i], points[i]))
        .unzip();
    let (scale, rot, shift) = similarity(&src, &dst);
    let registered: Vec<CameraPose> = ba
        .state
        .poses
        .iter()
        .map(|p| {
            let r = camera::nearest_rotation(&(p.r * rot.transpose()));
            CameraPose {
                t: scale * p.t - r * shift,
                r,
                ..p.clone()
            }
        })
        .collect();
    let error = |pose: &CameraPose, cam: &CameraPose| {
        (
            camera::rotation_angle_between(&pose.r, &cam.r).to_degrees(),
            (pose.center() - cam.center()).norm(),
        )
    };
    let views: Vec<ViewError> = truth
        .iter()
        .enumerate()
        .map(|(view, cam)| {
            let (pnp_rotation_deg, pnp_center) = error(&state.poses[view], cam);
            let (ba_rotation_deg, ba_center) = error(&registered[view], cam);
            ViewError {
                view,
                pnp_rotation_deg,
                pnp_center,
                ba_rotation_deg,
                ba_center,
            }
        })
        .collect();
    let n = views.len() as f64;
    let mean = |f: fn(&ViewError) -> f64| views.iter().map(f).sum::<f64>() / n;
    let report = RegistrationReport {
        points: src.len(),
        observations: state.observations.len(),
        pnp_rms: (pnp_sq.0 / pnp_sq.1.max(1) as f64).sqrt(),
        ba_rms: ba.rms,
        ba_converged: ba.converged,
        alignment_scale: scale,
        mean_pnp_rotation_deg: mean(|v| v.pnp_rotation_deg),
        mean_pnp_center: mean(|v| v.pnp_center),
        mean_rotation_deg: mean(|v| v.ba_rotation_deg),
        mean_center: mean(|v| v.ba_center),
        views,
    };
    log::info!(
        "registered {} cameras: mean rotation error {:.4} deg (PnP {:.4}), mean center error {:.5} (PnP {:.5})",
        truth.len(),
        report.mean_rotation_deg,
        report.mean_pnp_rotation_deg,
        report.mean_center,
        report.mean_pnp_center
    );
    create_dir(out)?;
    let files = vec![
        out.join(RECON),
        out.join(REGISTERED_CAMERAS),
        out.join(REGISTRATION),
    ];
    state.save(&files[0])?;
    save_camera_list(&registered, &files[1])?;
    write_json(&files[2], &report)?;
    Ok(files)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemeshDoc {
    pub segmentation_moves: usize,
    pub segmentation_converged: bool,
    pub split_faces: usize,
    pub non_simple: usize,
    pub new_vertices: usize,
    pub input_vertices: usize,
    pub output_vertices: usize,
    pub output_faces: usize,
}

/// Segments `texture` into superpixels and splits the mesh along the
/// superpixel boundaries in uv space; vertices on a boundary are duplicated
/// so each region owns its copy.
pub fn remesh(
    mesh: &Path,
    texture: &Path,
    params: &RemeshParams,
    seed: u64,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let mesh = load_mesh(mesh)?;
    let texture = Image::load_png(require(texture)?)?;
    let seg = remesh::segment_superpixels(
        texture.width(),
        texture.height(),
        &texture.luminance(),
        &params.segment_config(seed),
    )?;
    let split = remesh::remesh(&mesh, &seg.labels)?;
    let seams = remesh::split_seams(&split.mesh, &split.face_labels)?;
    let doc = RemeshDoc {
        segmentation_moves: seg.block_moves + seg.pixel_moves,
        segmentation_converged: seg.converged,
        split_faces: split.report.split_faces.len(),
        non_simple: split.report.non_simple.len(),
        new_vertices: split.report.new_vertices,
        input_vertices: mesh.vertex_count(),
        output_vertices: seams.mesh.vertex_count(),
        output_faces: seams.mesh.face_count(),
    };
    log::info!(
        "remeshed {} -> {} vertices ({} faces split)",
        doc.input_vertices,
        doc.output_vertices,
        doc.split_faces
    );
    create_dir(out)?;
    let files = vec![out.join(MESH), out.join(LABELS), out.join(REMESH)];
    seams.mesh.save_obj(&files[0])?;
    save_labels(&seg.labels, &files[1])?;
    write_json(&files[2], &doc)?;
    Ok(files)
}

fn save_labels(labels: &LabelMap, path: &Path) -> Result<(), CliError> {
    Ok(labels.save_png16(path)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessDoc {
    pub samples: usize,
    pub occluded: usize,
    pub back_facing: usize,
    pub kept: usize,
    /// Vertices without any surviving sample; their diffuse color is black.
    pub unobserved_vertices: usize,
}

/// Occlusion culling, diffuse/residual separation and the reflected-direction
/// transform. Writes the culled raw samples and the training-ready residuals.
pub fn preprocess(
    mesh: &Path,
    samples: &Path,
    cameras: &Path,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let mesh = load_mesh(mesh)?;
    let raw = load_dataset(samples)?;
    let cams = load_cameras(cameras)?;
    let (culled, cull) = preprocess::cull_occluded(&raw, &mesh, &cams)?;
    let (residual, sep) = preprocess::to_residuals(&culled)?;
    let inverted = preprocess::to_inverted(&residual, &mesh)?;
    let doc = PreprocessDoc {
        samples: raw.samples.len(),
        occluded: cull.occluded,
        back_facing: cull.back_facing,
        kept: culled.samples.len(),
        unobserved_vertices: sep.skipped.len(),
    };
    create_dir(out)?;
    let files = vec![out.join(CULLED), out.join(RESIDUAL), out.join(PREPROCESS)];
    culled.save(&files[0])?;
    inverted.save(&files[1])?;
    write_json(&files[2], &doc)?;
    Ok(files)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainDoc {
    pub train_rows: usize,
    pub holdout_rows: usize,
    pub best_epoch: u32,
    pub param_count: usize,
    pub final_train_kl: f64,
    pub best_holdout_kl: Option<f64>,
}

/// Trains a network on the residual dataset; the snapshot with the lowest
/// holdout loss is kept.
pub fn train(
    mesh: &Path,
    dataset: &Path,
    params: &TrainParams,
    net_seed: u64,
    train_seed: u64,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let mesh = load_mesh(mesh)?;
    let ds = load_dataset(dataset)?;
    let tuples = preprocess::encode_training_tuples(&ds, &mesh)?;
    let net = DslfNet::init(params.arch.build()?, net_seed)?;
    let report = network::train(
        &net,
        &tuples,
        &params.schedule(train_seed),
        params.holdout_fraction,
    )?;
    let mut log_csv = String::from("epoch,lr,train_kl,holdout_kl\n");
    for e in &report.log {
        let hold = e.holdout_kl.map(|k| format!("{k:.9e}")).unwrap_or_default();
        log_csv.push_str(&format!(
            "{},{:e},{:.9e},{}\n",
            e.epoch, e.lr, e.train_kl, hold
        ));
    }
    let doc = TrainDoc {
        train_rows: report.train_rows,
        holdout_rows: report.holdout_rows,
        best_epoch: report.best_epoch,
        param_count: report.best.params().len(),
        final_train_kl: report.log.last().map(|e| e.train_kl).unwrap_or(f64::NAN),
        best_holdout_kl: report
            .log
            .iter()
            .filter_map(|e| e.holdout_kl)
            .reduce(f64::min),
    };
    create_dir(out)?;
    let files = vec![
        out.join(NET),
        out.join(NET_MANIFEST),
        out.join(TRAIN_LOG),
        out.join(TRAIN),
    ];
    write_bytes(&files[0], &report.best.to_bytes())?;
    write_json(&files[1], &report.best.manifest())?;
    write_bytes(&files[2], log_csv.as_bytes())?;
    write_json(&files[3], &doc)?;
    Ok(files)
}

pub fn frame_name(view: usize) -> String {
    format!("view_{view:03}.png")
}

/// One PNG per camera, shaded with the network's per-vertex colors.
pub fn render(
    mesh: &Path,
    net: &Path,
    dataset: &Path,
    cameras: &Path,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let mesh = load_mesh(mesh)?;
    let net = load_net(net)?;
    let diffuse = diffuse_of(&load_dataset(dataset)?, dataset)?;
    let cams = load_cameras(cameras)?;
    create_dir(out)?;
    let mut files = Vec::new();
    for (i, cam) in cams.iter().enumerate() {
        let frame = renderer::render_frame(&mesh, &net, &diffuse, cam)?;
        let path = out.join(frame_name(i));
        frame.save_png(&path)?;
        files.push(path);
    }
    Ok(files)
}

/// Paths read by [`eval`].
#[derive(Debug, Clone)]
pub struct EvalInputs {
    pub scene: PathBuf,
    pub mesh: PathBuf,
    /// Raw captured samples; their file size is the uncompressed light field.
    pub samples: PathBuf,
    pub culled: PathBuf,
    pub residual: PathBuf,
    pub net: PathBuf,
    pub cameras: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsDoc {
    pub comparison: evaluate::Comparison,
    pub compression: Compression,
}

/// Scores the network, the diffuse-only baseline and the nearest-view
/// baseline on the given viewpoints and measures the compression rate.
pub fn eval(inputs: &EvalInputs, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let scene = load_scene(&inputs.scene, &inputs.mesh)?;
    let raw_bytes = read_bytes(&inputs.samples)?.len() as u64;
    let culled = load_dataset(&inputs.culled)?;
    let diffuse = diffuse_of(&load_dataset(&inputs.residual)?, &inputs.residual)?;
    let net_bytes = read_bytes(&inputs.net)?;
    let net = DslfNet::from_bytes(&net_bytes)?;
    let cams = load_cameras(&inputs.cameras)?;
    let comparison = evaluate::compare_views(&scene, &culled, &diffuse, &net, &cams)?;
    let compression = Compression::from_sizes(
        raw_bytes,
        net_bytes.len() as u64,
        Compression::diffuse_bytes(&diffuse),
    )?;
    for m in &comparison.table {
        log::info!("{}: PSNR {:.2} dB, SSIM {:.4}", m.method, m.psnr, m.ssim);
    }
    log::info!("compression {:.2}:1", compression.ratio);
    let mut views = String::from("view,method,psnr,ssim\n");
    for v in &comparison.views {
        views.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            v.view, v.method, v.psnr, v.ssim
        ));
    }
    create_dir(out)?;
    let files = vec![
        out.join(METRICS_CSV),
        out.join(VIEWS_CSV),
        out.join(METRICS),
    ];
    write_bytes(&files[0], comparison.to_csv().as_bytes())?;
    write_bytes(&files[1], views.as_bytes())?;
    write_json(
        &files[2],
        &MetricsDoc {
            comparison,
            compression,
        },
    )?;
    Ok(files)
}

/// Writes the viewer bundle for camera `reference_view` of `cameras`.
pub fn export(
    mesh: &Path,
    net: &Path,
    dataset: &Path,
    cameras: &Path,
    reference_view: usize,
    atlas_size: u32,
    out: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let mesh = load_mesh(mesh)?;
    let net = load_net(net)?;
    let diffuse = diffuse_of(&load_dataset(dataset)?, dataset)?;
    let cams = load_cameras(cameras)?;
    let cam = cams.get(reference_view).ok_or_else(|| {
        CliError::Schema(format!(
            "reference view {reference_view} of {} cameras",
            cams.len()
        ))
    })?;
    crate::bundle::export_bundle(&mesh, &net, &diffuse, cam, atlas_size, out)
}
