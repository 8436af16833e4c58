//! Mini-batch training with a seeded split, seeded shuffling and best-holdout snapshots.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backward::{backward_from_cache, kl_loss};
use super::{forward_pass, AdamState, DslfNet, NetError};
use crate::preprocess::TrainingSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrStage {
    pub epochs: u32,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub batch_size: usize,
    pub iterations_per_epoch: usize,
    pub stages: Vec<LrStage>,
    pub seed: u64,
}

impl TrainSchedule {
    /// 20 epochs of 1000 iterations at batch 512; the rate drops from 1e-4 to
    /// 1e-5 after 70% of the iterations.
    pub fn desk(seed: u64) -> Self {
        Self {
            batch_size: 512,
            iterations_per_epoch: 1000,
            stages: vec![
                LrStage {
                    epochs: 14,
                    lr: 1e-4,
                },
                LrStage {
                    epochs: 6,
                    lr: 1e-5,
                },
            ],
            seed,
        }
    }

    /// Batch 1500, 60000 iterations per epoch, 10 epochs at 1e-4 then 10 at 1e-5.
    pub fn full(seed: u64) -> Self {
        Self {
            batch_size: 1500,
            iterations_per_epoch: 60_000,
            stages: vec![
                LrStage {
                    epochs: 10,
                    lr: 1e-4,
                },
                LrStage {
                    epochs: 10,
                    lr: 1e-5,
                },
            ],
            seed,
        }
    }

    pub fn epochs(&self) -> u32 {
        self.stages.iter().map(|s| s.epochs).sum()
    }

    pub fn total_iterations(&self) -> usize {
        self.epochs() as usize * self.iterations_per_epoch
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.batch_size == 0 {
            return Err(NetError::Train("batch size must be positive".into()));
        }
        if self.stages.is_empty() || self.epochs() == 0 {
            return Err(NetError::Train("schedule has no epochs".into()));
        }
        if self
            .stages
            .iter()
            .any(|s| !(s.lr >= 0.0 && s.lr.is_finite()))
        {
            return Err(NetError::Train(
                "learning rates must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 0 is the state before training.
    pub epoch: u32,
    pub lr: f64,
    pub train_kl: f64,
    /// `None` without a holdout split.
    pub holdout_kl: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Snapshot with the lowest holdout KL (training KL when there is no holdout).
    pub best: DslfNet,
    pub best_epoch: u32,
    pub last: DslfNet,
    pub log: Vec<EpochLog>,
    pub train_rows: usize,
    pub holdout_rows: usize,
}

/// Mean KL of `net` over every row of `set`.
pub fn evaluate_kl(net: &DslfNet, set: &TrainingSet) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let q = net.forward(&set.inputs, set.len());
    kl_loss(&q, &set.targets)
}

pub fn train(
    net: &DslfNet,
    data: &TrainingSet,
    schedule: &TrainSchedule,
    holdout_fraction: f64,
) -> Result<TrainReport, NetError> {
    schedule.validate()?;
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(NetError::Train("holdout fraction must be in [0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut rows: Vec<usize> = (0..data.len()).collect();
    rows.shuffle(&mut rng);
    let n_hold = (data.len() as f64 * holdout_fraction).round() as usize;
    let holdout = data.select(&rows[..n_hold]);
    let train_set = data.select(&rows[n_hold..]);
    if train_set.len() < schedule.batch_size {
        return Err(NetError::Train(format!(
            "{} training tuples, batch size {}",
            train_set.len(),
            schedule.batch_size
        )));
    }

    let mut net = net.clone();
    let arch = net.arch().clone();
    let mut adam = AdamState::new(net.params().len());
    let eval = |net: &DslfNet, epoch: u32, lr: f64| EpochLog {
        epoch,
        lr,
        train_kl: evaluate_kl(net, &train_set),
        holdout_kl: (!holdout.is_empty()).then(|| evaluate_kl(net, &holdout)),
    };
    let score = |e: &EpochLog| e.holdout_kl.unwrap_or(e.train_kl);
    let mut log = vec![eval(&net, 0, 0.0)];
    let mut best = net.clone();
    let mut best_epoch = 0;
    let mut best_score = score(&log[0]);

    let b = schedule.batch_size;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut xb = vec![0.0f32; b * 5];
    let mut yb = vec![0.0f32; b * 3];
    let mut epoch = 0;
    for stage in &schedule.stages {
        for _ in 0..stage.epochs {
            epoch += 1;
            for _ in 0..schedule.iterations_per_epoch {
                for r in 0..b {
                    if cursor == order.len() {
                        order.shuffle(&mut rng);
                        cursor = 0;
                    }
                    let row = order[cursor];
                    cursor += 1;
                    xb[r * 5..r * 5 + 5].copy_from_slice(&train_set.inputs[row * 5..row * 5 + 5]);
                    yb[r * 3..r * 3 + 3].copy_from_slice(&train_set.targets[row * 3..row * 3 + 3]);
                }
                let cache = forward_pass(&arch, net.params(), &xb, b);
                let g = backward_from_cache(&arch, net.params(), &cache, &yb);
                adam.step(net.params_mut(), &g.grads, stage.lr);
            }
            let entry = eval(&net, epoch, stage.lr);
            log::info!(
                "epoch {epoch}: lr {:.1e} train KL {:.6e} holdout KL {:?}",
                stage.lr,
                entry.train_kl,
                entry.holdout_kl
            );
            if score(&entry) < best_score {
                best_score = score(&entry);
                best = net.clone();
                best_epoch = epoch;
            }
            log.push(entry);
        }
    }
    Ok(TrainReport {
        best,
        best_epoch,
        last: net,
        log,
        train_rows: train_set.len(),
        holdout_rows: holdout.len(),
    })
}
