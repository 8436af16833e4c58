//! Pipeline orchestration.
//!
//! Every stage of the toolkit is a function with explicit input and output
//! paths ([`stages`]); the `dslf` binary exposes each one as a subcommand and
//! [`run::run_pipeline`] chains them inside a fresh run directory described by
//! a [`config::PipelineConfig`]. [`bundle`] writes and reads the self-contained
//! directory consumed by the interactive viewer.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod bundle;
pub mod config;
pub mod run;
pub mod stages;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),
    #[error("invalid configuration: {0}")]
    Schema(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bundle: {0}")]
    Bundle(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Synth(#[from] dslf_core::synth::SynthError),
    #[error(transparent)]
    Mesh(#[from] dslf_core::mesh::MeshError),
    #[error(transparent)]
    Camera(#[from] dslf_core::camera::CameraError),
    #[error(transparent)]
    Dataset(#[from] dslf_core::dataset::DatasetError),
    #[error(transparent)]
    Preprocess(#[from] dslf_core::preprocess::PreprocessError),
    #[error(transparent)]
    Net(#[from] dslf_core::network::NetError),
    #[error(transparent)]
    Render(#[from] dslf_core::renderer::RenderError),
    #[error(transparent)]
    Registration(#[from] dslf_core::registration::RegistrationError),
    #[error(transparent)]
    Remesh(#[from] dslf_core::remesh::RemeshError),
    #[error(transparent)]
    Eval(#[from] dslf_core::evaluate::EvalError),
    #[error(transparent)]
    Image(#[from] dslf_core::image::ImageError),
}

/// Fails with [`CliError::MissingArtifact`] unless `path` exists.
pub fn require(path: &Path) -> Result<&Path, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::MissingArtifact(path.to_path_buf()))
    }
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(require(path)?).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(require(path)?).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    write_bytes(path, &text)
}

pub(crate) fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
