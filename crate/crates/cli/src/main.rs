use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use dslf_cli::config::{PipelineConfig, RegisterParams, RemeshParams, SynthParams, TrainParams};
use dslf_cli::run::{configure_workers, run_pipeline};
use dslf_cli::stages::{self, EvalInputs};
use dslf_core::registration::{BaConfig, RansacConfig};

/// Surface light field pipeline.
#[derive(Parser)]
#[command(name = "dslf", version)]
struct Cli {
    /// Seed for the stage's randomness; for `pipeline`, replaces every named seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (also read from DSLF_WORKERS).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory; for `pipeline`, the root that receives the run directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a scene, place cameras and capture per-vertex samples.
    Synth {
        /// Synth parameters (scene, rig, view counts); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Capture on this OBJ instead of the configured primitive.
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
    /// Relative pose of two views from pixel pairs.
    RegisterInit {
        #[arg(long)]
        pairs: PathBuf,
        /// Camera document supplying view 0's intrinsics.
        #[arg(long)]
        camera0: PathBuf,
        #[arg(long)]
        camera1: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        threshold: f64,
    },
    /// Absolute pose from 2D-3D correspondences.
    RegisterPnp {
        #[arg(long)]
        points: PathBuf,
        /// Camera document supplying intrinsics and resolution.
        #[arg(long)]
        camera: PathBuf,
        #[arg(long, default_value_t = 3.0)]
        threshold: f64,
    },
    /// Bundle adjustment of a reconstruction document.
    RegisterBa {
        #[arg(long)]
        recon: PathBuf,
        #[arg(long, default_value_t = 100)]
        iterations: usize,
    },
    /// Depth-assisted refinement of one camera against a mesh.
    RegisterRefine {
        #[arg(long)]
        mesh: PathBuf,
        /// Initial camera the matches were rendered from.
        #[arg(long)]
        camera: PathBuf,
        #[arg(long)]
        matches: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        threshold: f64,
    },
    /// Synthetic registration of a camera rig (PnP then bundle adjustment).
    Register {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Superpixel segmentation of a texture and mesh splitting along it.
    Remesh {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        texture: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Occlusion culling, diffuse separation and direction transform.
    Preprocess {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
    },
    /// Train the network on a residual dataset.
    Train {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Render one frame per camera.
    Render {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        net: PathBuf,
        /// Residual dataset carrying the diffuse table.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
    },
    /// Score the network and the baselines on held-out cameras.
    Eval {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        culled: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
    },
    /// Write a viewer bundle.
    Export {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        /// Index of the reference camera in `cameras`.
        #[arg(long, default_value_t = 0)]
        view: usize,
        #[arg(long, default_value_t = 256)]
        atlas_size: u32,
    },
    /// Run the configured stages into a new run directory.
    Pipeline {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn workers(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("DSLF_WORKERS") {
        Ok(v) => Ok(Some(
            v.parse()
                .context("DSLF_WORKERS must be a positive integer")?,
        )),
        Err(_) => Ok(None),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let ransac = |threshold: f64| RansacConfig {
        threshold,
        seed,
        ..RansacConfig::default()
    };
    let workers = workers(cli.workers)?;
    let files = match cli.command {
        Command::Pipeline { config } => {
            let mut cfg = match config {
                Some(p) => PipelineConfig::load(&p)?,
                None => PipelineConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg = cfg.with_seed(s);
            }
            configure_workers(workers.or(cfg.workers));
            let root = cli.out.unwrap_or_else(|| PathBuf::from("runs"));
            let run = run_pipeline(&cfg, &root)?;
            println!("{}", run.dir.display());
            return Ok(());
        }
        command => {
            configure_workers(workers);
            match command {
                Command::Synth { config, mesh } => {
                    let params: SynthParams = load_or_default(config.as_deref())?;
                    stages::synth(&params, seed, mesh.as_deref(), &out)?
                }
                Command::RegisterInit {
                    pairs,
                    camera0,
                    camera1,
                    threshold,
                } => stages::register_init(&pairs, &camera0, &camera1, &ransac(threshold), &out)?,
                Command::RegisterPnp {
                    points,
                    camera,
                    threshold,
                } => stages::register_pnp(&points, &camera, &ransac(threshold), &out)?,
                Command::RegisterBa { recon, iterations } => stages::register_ba(
                    &recon,
                    &BaConfig {
                        max_iterations: iterations,
                        ..BaConfig::default()
                    },
                    &out,
                )?,
                Command::RegisterRefine {
                    mesh,
                    camera,
                    matches,
                    threshold,
                } => stages::register_refine(&mesh, &camera, &matches, &ransac(threshold), &out)?,
                Command::Register {
                    mesh,
                    cameras,
                    config,
                } => {
                    let params: RegisterParams = load_or_default(config.as_deref())?;
                    stages::register(&mesh, &cameras, &params, seed, &out)?
                }
                Command::Remesh {
                    mesh,
                    texture,
                    config,
                } => {
                    let params: RemeshParams = load_or_default(config.as_deref())?;
                    stages::remesh(&mesh, &texture, &params, seed, &out)?
                }
                Command::Preprocess {
                    mesh,
                    samples,
                    cameras,
                } => stages::preprocess(&mesh, &samples, &cameras, &out)?,
                Command::Train {
                    mesh,
                    dataset,
                    config,
                } => {
                    let params: TrainParams = load_or_default(config.as_deref())?;
                    stages::train(&mesh, &dataset, &params, seed, seed, &out)?
                }
                Command::Render {
                    mesh,
                    net,
                    dataset,
                    cameras,
                } => stages::render(&mesh, &net, &dataset, &cameras, &out)?,
                Command::Eval {
                    scene,
                    mesh,
                    samples,
                    culled,
                    dataset,
                    net,
                    cameras,
                } => stages::eval(
                    &EvalInputs {
                        scene,
                        mesh,
                        samples,
                        culled,
                        residual: dataset,
                        net,
                        cameras,
                    },
                    &out,
                )?,
                Command::Export {
                    mesh,
                    net,
                    dataset,
                    cameras,
                    view,
                    atlas_size,
                } => stages::export(&mesh, &net, &dataset, &cameras, view, atlas_size, &out)?,
                Command::Pipeline { .. } => unreachable!("handled above"),
            }
        }
    };
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}
