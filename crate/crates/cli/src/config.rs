//! The pipeline document: one JSON file naming the stages to run, every seed
//! and the parameters of each stage.
//!
//! Unknown fields are rejected everywhere so that a typo cannot silently fall
//! back to a default. Missing sections take the desk-scale defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use dslf_core::network::{Arch, LrStage, TrainSchedule};
use dslf_core::remesh::SegmentConfig;
use dslf_core::synth::{Assignment, RigParams, SceneConfig};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Synth,
    Register,
    Remesh,
    Preprocess,
    Train,
    Render,
    Eval,
    Export,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Synth,
        Stage::Register,
        Stage::Remesh,
        Stage::Preprocess,
        Stage::Train,
        Stage::Render,
        Stage::Eval,
        Stage::Export,
    ];

    /// Directory name inside a run directory.
    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Register => "register",
            Stage::Remesh => "remesh",
            Stage::Preprocess => "preprocess",
            Stage::Train => "train",
            Stage::Render => "render",
            Stage::Eval => "eval",
            Stage::Export => "export",
        }
    }
}

/// Every source of randomness in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    /// Held-out viewpoint placement.
    pub views: u64,
    /// Network initialization.
    pub net: u64,
    /// Holdout split and minibatch order.
    pub train: u64,
    /// Registration noise and RANSAC sampling.
    pub register: u64,
    /// Superpixel segmentation.
    pub segment: u64,
}

impl Seeds {
    pub fn all(seed: u64) -> Self {
        Self {
            views: seed,
            net: seed,
            train: seed,
            register: seed,
            segment: seed,
        }
    }
}

impl Default for Seeds {
    fn default() -> Self {
        Self::all(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub scene: SceneConfig,
    pub rig: RigParams,
    pub train_views: u32,
    pub train_elevation_deg: f64,
    pub heldout_views: u32,
    pub heldout_elevation_deg: [f64; 2],
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            scene: SceneConfig::glossy_sphere(3),
            rig: RigParams::default(),
            train_views: 60,
            train_elevation_deg: 20.0,
            heldout_views: 20,
            heldout_elevation_deg: [5.0, 35.0],
        }
    }
}

/// Synthetic registration: a seeded subset of mesh vertices is observed with
/// pixel noise by every training camera that sees it; each camera is
/// re-estimated by PnP, then all cameras are bundle-adjusted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegisterParams {
    /// Mesh vertices used as tracked points.
    pub points: usize,
    /// Standard deviation of the pixel noise.
    pub pixel_noise: f64,
    /// RANSAC inlier threshold in pixels.
    pub threshold: f64,
    pub ba_iterations: usize,
}

impl Default for RegisterParams {
    fn default() -> Self {
        Self {
            points: 200,
            pixel_noise: 0.5,
            threshold: 3.0,
            ba_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemeshParams {
    pub k: u32,
    pub gamma: f64,
    pub beta: f64,
    pub max_sweeps: usize,
}

impl Default for RemeshParams {
    fn default() -> Self {
        let d = SegmentConfig::default();
        Self {
            k: d.k,
            gamma: d.gamma,
            beta: d.beta,
            max_sweeps: d.max_sweeps,
        }
    }
}

impl RemeshParams {
    pub fn segment_config(&self, seed: u64) -> SegmentConfig {
        SegmentConfig {
            k: self.k,
            gamma: self.gamma,
            beta: self.beta,
            seed,
            max_sweeps: self.max_sweeps,
        }
    }
}

/// Either a width factor applied to the full architecture or an explicit one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArchSpec {
    Scaled { scale: f64 },
    Explicit(Arch),
}

impl ArchSpec {
    pub fn build(&self) -> Result<Arch, CliError> {
        let arch = match self {
            ArchSpec::Scaled { scale } => {
                if !(*scale > 0.0 && *scale <= 1.0) {
                    return Err(CliError::Schema(format!(
                        "arch scale {scale} must be in (0, 1]"
                    )));
                }
                Arch::scaled(*scale)
            }
            ArchSpec::Explicit(arch) => arch.clone(),
        };
        arch.validate()?;
        Ok(arch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub arch: ArchSpec,
    pub batch_size: usize,
    pub iterations_per_epoch: usize,
    pub stages: Vec<LrStage>,
    pub holdout_fraction: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        let desk = TrainSchedule::desk(0);
        Self {
            arch: ArchSpec::Scaled { scale: 0.25 },
            batch_size: desk.batch_size,
            iterations_per_epoch: desk.iterations_per_epoch,
            stages: desk.stages,
            holdout_fraction: 0.1,
        }
    }
}

impl TrainParams {
    pub fn schedule(&self, seed: u64) -> TrainSchedule {
        TrainSchedule {
            batch_size: self.batch_size,
            iterations_per_epoch: self.iterations_per_epoch,
            stages: self.stages.clone(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportParams {
    /// Side length of the diffuse texture atlas.
    pub atlas_size: u32,
    /// Held-out view used as the bundle's reference camera.
    pub reference_view: usize,
}

impl Default for ExportParams {
    fn default() -> Self {
        Self {
            atlas_size: 256,
            reference_view: 0,
        }
    }
}

fn default_stages() -> Vec<Stage> {
    vec![
        Stage::Synth,
        Stage::Preprocess,
        Stage::Train,
        Stage::Render,
        Stage::Eval,
        Stage::Export,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_stages")]
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub seeds: Seeds,
    /// Worker threads; a resource limit only, never part of the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub synth: SynthParams,
    #[serde(default)]
    pub register: RegisterParams,
    #[serde(default)]
    pub remesh: RemeshParams,
    #[serde(default)]
    pub train: TrainParams,
    #[serde(default)]
    pub export: ExportParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stages: default_stages(),
            seeds: Seeds::default(),
            workers: None,
            synth: SynthParams::default(),
            register: RegisterParams::default(),
            remesh: RemeshParams::default(),
            train: TrainParams::default(),
            export: ExportParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_json(&crate::read_text(path)?)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Schema(msg));
        if self.stages.is_empty() {
            return bad("no stages requested".into());
        }
        if !self.stages.windows(2).all(|w| w[0] < w[1]) {
            return bad(format!(
                "stages must be distinct and in pipeline order ({}), got {:?}",
                Stage::ALL.map(Stage::name).join(", "),
                self.stages.iter().map(|s| s.name()).collect::<Vec<_>>()
            ));
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        let s = &self.synth;
        if s.train_views == 0 || s.heldout_views == 0 {
            return bad("synth needs at least one training and one held-out view".into());
        }
        let [lo, hi] = s.heldout_elevation_deg;
        if !(lo <= hi && lo > -90.0 && hi < 90.0) || s.train_elevation_deg.abs() >= 90.0 {
            return bad(
                "elevations must lie strictly between -90 and 90 degrees, low <= high".into(),
            );
        }
        if self.requests(Stage::Remesh) && !matches!(s.scene.assignment, Assignment::Texture { .. })
        {
            return bad("the remesh stage needs a scene with a texture material assignment".into());
        }
        if self.register.points < 6 {
            return bad("register.points must be at least 6".into());
        }
        if !(self.register.pixel_noise >= 0.0 && self.register.threshold > 0.0) {
            return bad("register noise must be non-negative and the threshold positive".into());
        }
        if self.remesh.k == 0 {
            return bad("remesh.k must be positive".into());
        }
        self.train.arch.build()?;
        self.train.schedule(0).validate()?;
        if !(0.0..1.0).contains(&self.train.holdout_fraction) {
            return bad("train.holdout_fraction must be in [0, 1)".into());
        }
        if self.export.atlas_size == 0 {
            return bad("export.atlas_size must be positive".into());
        }
        if self.export.reference_view >= s.heldout_views as usize {
            return bad(format!(
                "export.reference_view {} is not one of the {} held-out views",
                self.export.reference_view, s.heldout_views
            ));
        }
        Ok(())
    }

    pub fn requests(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    /// Replaces every named seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seeds = Seeds::all(seed);
        self
    }

    /// Canonical JSON of everything that affects outputs (the worker count is left out).
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.workers = None;
        serde_json::to_string_pretty(&c).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        dslf_core::sha256_hex(self.canonical_json().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_takes_defaults() {
        let cfg = PipelineConfig::from_json("{}").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
    }

    #[test]
    fn canonical_json_round_trips() {
        let cfg = PipelineConfig::default().with_seed(9);
        assert_eq!(
            PipelineConfig::from_json(&cfg.canonical_json()).unwrap(),
            cfg
        );
    }

    #[test]
    fn workers_do_not_change_the_hash() {
        let a = PipelineConfig::default();
        let b = PipelineConfig {
            workers: Some(3),
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), a.clone().with_seed(1).hash());
    }

    #[test]
    fn schema_violations_are_rejected() {
        for doc in [
            r#"{"stagez": ["synth"]}"#,
            r#"{"stages": ["train", "synth"]}"#,
            r#"{"stages": ["synth", "synth"]}"#,
            r#"{"stages": []}"#,
            r#"{"stages": ["synth", "remesh"]}"#,
            r#"{"train": {"holdout_fraction": 1.5}}"#,
            r#"{"train": {"arch": {"scale": 0}}}"#,
            r#"{"export": {"reference_view": 20}}"#,
            r#"{"synth": {"train_views": 0}}"#,
        ] {
            assert!(
                matches!(
                    PipelineConfig::from_json(doc),
                    Err(CliError::Schema(_)) | Err(CliError::Net(_))
                ),
                "{doc}"
            );
        }
    }
}
