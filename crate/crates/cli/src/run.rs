//! Whole-pipeline runs.
//!
//! A run lives in a fresh directory `run-<UTC timestamp>` under the output
//! root, never reusing an existing one. It holds `config.json` (the canonical
//! config), one subdirectory per stage and `manifest.json`: config hash,
//! seeds and the size and SHA-256 of every stage output. The manifest holds
//! nothing time-dependent, so two runs of one config produce identical
//! manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dslf_core::sha256_hex;

use crate::bundle::FileEntry;
use crate::config::{PipelineConfig, Seeds, Stage};
use crate::stages::{self, EvalInputs};
use crate::{create_dir, read_bytes, write_bytes, write_json, CliError};

pub const CONFIG: &str = "config.json";
pub const MANIFEST: &str = "manifest.json";
pub const BUNDLE_DIR: &str = "bundle";
pub const CAPTURE_DIR: &str = "capture";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    /// Paths relative to the run directory, `/`-separated.
    pub outputs: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seeds: Seeds,
    pub stages: Vec<StageRecord>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

/// Creates `root/run-<timestamp>`, appending `-2`, `-3`, ... if that name is taken.
pub fn create_run_dir(root: &Path) -> Result<PathBuf, CliError> {
    create_dir(root)?;
    let stamp = chrono::Utc::now()
        .format("run-%Y%m%dT%H%M%S%.3fZ")
        .to_string();
    for k in 1.. {
        let name = if k == 1 {
            stamp.clone()
        } else {
            format!("{stamp}-{k}")
        };
        let dir = root.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(source) => return Err(CliError::Io { path: dir, source }),
        }
    }
    unreachable!("the suffix search always terminates")
}

fn record(run: &Path, files: &[PathBuf]) -> Result<Vec<FileEntry>, CliError> {
    files
        .iter()
        .map(|f| {
            let bytes = read_bytes(f)?;
            let rel = f.strip_prefix(run).unwrap_or(f);
            Ok(FileEntry {
                path: rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/"),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            })
        })
        .collect()
}

/// Runs the requested stages in pipeline order inside a new run directory.
/// The manifest is rewritten after every stage, so a failed run still
/// records what it completed.
pub fn run_pipeline(cfg: &PipelineConfig, root: &Path) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let dir = create_run_dir(root)?;
    write_bytes(
        &dir.join(CONFIG),
        format!("{}\n", cfg.canonical_json()).as_bytes(),
    )?;
    let mut manifest = RunManifest {
        config_hash: cfg.hash(),
        seeds: cfg.seeds,
        stages: Vec::new(),
    };
    let sd = |s: Stage| dir.join(s.name());
    let synth_dir = sd(Stage::Synth);
    let scene = synth_dir.join(stages::SCENE);
    let heldout = synth_dir.join(stages::HELDOUT_CAMERAS);
    let mut mesh = synth_dir.join(stages::MESH);
    let mut samples = synth_dir.join(stages::SAMPLES);
    let mut cameras = synth_dir.join(stages::CAMERAS);
    let pre = sd(Stage::Preprocess);
    let (culled, residual) = (pre.join(stages::CULLED), pre.join(stages::RESIDUAL));
    let net = sd(Stage::Train).join(stages::NET);
    let seeds = cfg.seeds;

    for &stage in &cfg.stages {
        log::info!("stage {}", stage.name());
        let out = sd(stage);
        let files = match stage {
            Stage::Synth => stages::synth(&cfg.synth, seeds.views, None, &out)?,
            Stage::Register => {
                let files = stages::register(&mesh, &cameras, &cfg.register, seeds.register, &out)?;
                cameras = out.join(stages::REGISTERED_CAMERAS);
                files
            }
            Stage::Remesh => {
                let mut files = stages::remesh(
                    &mesh,
                    &synth_dir.join(stages::ALBEDO),
                    &cfg.remesh,
                    seeds.segment,
                    &out,
                )?;
                mesh = out.join(stages::MESH);
                // observe the scene again at the new vertices
                let capture = out.join(CAPTURE_DIR);
                files.extend(stages::synth(
                    &cfg.synth,
                    seeds.views,
                    Some(&mesh),
                    &capture,
                )?);
                samples = capture.join(stages::SAMPLES);
                files
            }
            Stage::Preprocess => stages::preprocess(&mesh, &samples, &cameras, &out)?,
            Stage::Train => {
                stages::train(&mesh, &residual, &cfg.train, seeds.net, seeds.train, &out)?
            }
            Stage::Render => stages::render(&mesh, &net, &residual, &heldout, &out)?,
            Stage::Eval => stages::eval(
                &EvalInputs {
                    scene: scene.clone(),
                    mesh: mesh.clone(),
                    samples: samples.clone(),
                    culled: culled.clone(),
                    residual: residual.clone(),
                    net: net.clone(),
                    cameras: heldout.clone(),
                },
                &out,
            )?,
            Stage::Export => stages::export(
                &mesh,
                &net,
                &residual,
                &heldout,
                cfg.export.reference_view,
                cfg.export.atlas_size,
                &out.join(BUNDLE_DIR),
            )?,
        };
        manifest.stages.push(StageRecord {
            stage,
            outputs: record(&dir, &files)?,
        });
        write_json(&dir.join(MANIFEST), &manifest)?;
    }
    Ok(RunOutcome { dir, manifest })
}

/// Sets the size of the global worker pool. Only the first call has an effect.
pub fn configure_workers(workers: Option<usize>) {
    if let Some(n) = workers {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_err()
        {
            log::warn!("worker pool already initialized; ignoring workers = {n}");
        }
    }
}
