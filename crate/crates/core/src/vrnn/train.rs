//! Mini-batch SGD with momentum, learning-rate schedules and a linear
//! sequence-length curriculum.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::CurveDataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::{derived_rng, Label};

use super::{loss_and_gradients, sample_masks, sequence_loss, VrnnModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheduler {
    Cos,
    Exp,
    Const,
}

impl std::str::FromStr for Scheduler {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cos" => Ok(Scheduler::Cos),
            "exp" => Ok(Scheduler::Exp),
            "const" => Ok(Scheduler::Const),
            other => Err(format!("unknown scheduler '{other}' (expected cos, exp or const)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VrnnTrainConfig {
    pub initial_lr: f64,
    pub final_lr_fraction: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub scheduler: Scheduler,
    pub curriculum_initial_len: usize,
    pub seed: u64,
}

impl Default for VrnnTrainConfig {
    fn default() -> Self {
        Self {
            initial_lr: 0.027,
            final_lr_fraction: 0.0008,
            momentum: 0.9,
            batch_size: 22,
            epochs: 100,
            scheduler: Scheduler::Cos,
            curriculum_initial_len: 5,
            seed: 0,
        }
    }
}

impl VrnnTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::invalid("initial learning rate must be positive"));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return Err(Error::invalid("final learning-rate fraction must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.curriculum_initial_len == 0 {
            return Err(Error::invalid("batch size, epochs and initial curriculum length must be positive"));
        }
        Ok(())
    }
}

/// Position of `epoch` (1-based) in `[0, 1]` across `epochs` epochs.
fn progress(epoch: usize, epochs: usize) -> f64 {
    if epochs <= 1 {
        0.0
    } else {
        (epoch - 1) as f64 / (epochs - 1) as f64
    }
}

/// Learning rate at `epoch` (1-based). `cos` and `exp` move from
/// `initial_lr` at the first epoch to `initial_lr * final_lr_fraction` at
/// the last one, along a half cosine or a geometric path.
pub fn learning_rate(cfg: &VrnnTrainConfig, epoch: usize) -> f64 {
    let p = progress(epoch, cfg.epochs);
    let start = cfg.initial_lr;
    let end = cfg.initial_lr * cfg.final_lr_fraction;
    match cfg.scheduler {
        Scheduler::Const => start,
        Scheduler::Exp => start * cfg.final_lr_fraction.powf(p),
        Scheduler::Cos => end + (start - end) * 0.5 * (1.0 + (std::f64::consts::PI * p).cos()),
    }
}

/// Curriculum sequence length at `epoch` (1-based): a linear ramp from
/// `initial` at the first epoch to `full` at the last, rounded half up.
/// Integer arithmetic keeps the rounding exact.
pub fn curriculum_length(initial: usize, full: usize, epoch: usize, epochs: usize) -> usize {
    if epochs <= 1 || full <= initial {
        return if epochs <= 1 { full.max(initial) } else { initial };
    }
    let span = (epochs - 1) as u128;
    let numer = initial as u128 * span + (full - initial) as u128 * (epoch - 1) as u128;
    ((2 * numer + span) / (2 * span)) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub sequence_length: usize,
    /// Mean per-sequence loss over the batches that were applied.
    pub loss: f64,
    pub skipped_batches: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
}

/// Trains `model` on every curve of `dataset` with teacher forcing.
///
/// Each epoch reshuffles the curves, truncates them to the curriculum length
/// and draws fresh dropout masks per sequence. All randomness derives from
/// `cfg.seed`. Batches whose loss is non-finite are skipped and counted.
pub fn train<T: Scalar>(
    model: &VrnnModel<T>,
    dataset: &CurveDataset<T>,
    cfg: &VrnnTrainConfig,
) -> Result<(VrnnModel<T>, TrainingLog)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::data("training dataset is empty"));
    }
    if dataset.config_dim != model.config_dim {
        return Err(Error::DimensionMismatch {
            expected: model.config_dim,
            got: dataset.config_dim,
        });
    }
    if let Some(c) = dataset.curves.iter().find(|c| c.len() < cfg.curriculum_initial_len) {
        return Err(Error::data(format!(
            "curve '{}' has {} epochs, shorter than the initial curriculum length {}",
            c.id,
            c.len(),
            cfg.curriculum_initial_len
        )));
    }

    let full = dataset.max_len().expect("non-empty dataset");
    let mut model = model.clone();
    let mut velocity = model.zeros_like();
    let mut log = TrainingLog::default();

    for epoch in 1..=cfg.epochs {
        let lr = T::of(learning_rate(cfg, epoch));
        let momentum = T::of(cfg.momentum);
        let len = curriculum_length(cfg.curriculum_initial_len, full, epoch, cfg.epochs);
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut derived_rng(cfg.seed, &[Label::Str("shuffle"), Label::from(epoch)]));

        let mut loss_sum = 0.0;
        let mut counted = 0usize;
        let mut skipped = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<Result<(T, super::Gradients<T>)>> = batch
                .par_iter()
                .map(|&i| {
                    let curve = &dataset.curves[i];
                    let mut rng = derived_rng(cfg.seed, &[Label::Str("masks"), Label::from(epoch), Label::from(i)]);
                    let masks = sample_masks(&model, &mut rng);
                    let targets = &curve.values[..len.min(curve.len())];
                    loss_and_gradients(&model, &curve.config, targets, &masks)
                })
                .collect();

            let mut sum = model.zeros_like();
            let mut batch_loss = T::zero();
            let mut failed = false;
            for r in results {
                match r {
                    Ok((loss, g)) => {
                        batch_loss += loss;
                        for (acc, gp) in sum.params_mut().zip(g.params()) {
                            acc.iter_mut().zip(gp).for_each(|(a, &b)| *a += b);
                        }
                    }
                    Err(Error::NonFiniteLoss) => failed = true,
                    Err(e) => return Err(e),
                }
            }
            let inv = T::one() / T::of_usize(batch.len());
            if failed || !batch_loss.is_finite() || !sum.is_finite() {
                skipped += 1;
                continue;
            }
            for ((w, v), g) in model.params_mut().zip(velocity.params_mut()).zip(sum.params()) {
                for k in 0..w.len() {
                    v[k] = momentum * v[k] - lr * g[k] * inv;
                    w[k] += v[k];
                }
            }
            loss_sum += batch_loss.as_f64();
            counted += batch.len();
        }
        log.epochs.push(EpochRecord {
            epoch,
            learning_rate: lr.as_f64(),
            sequence_length: len,
            loss: if counted > 0 { loss_sum / counted as f64 } else { f64::NAN },
            skipped_batches: skipped,
        });
    }
    Ok((model, log))
}

/// Mean full-length teacher-forced loss over a dataset, each curve under
/// masks drawn from `(seed, curve index)`.
pub fn mean_sequence_loss<T: Scalar>(model: &VrnnModel<T>, dataset: &CurveDataset<T>, seed: u64) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::data("dataset is empty"));
    }
    let losses = dataset
        .curves
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let masks = sample_masks(model, &mut derived_rng(seed, &[Label::Str("eval-masks"), Label::from(i)]));
            sequence_loss(model, &c.config, &c.values, &masks).map(|l| l.as_f64())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(scheduler: Scheduler) -> VrnnTrainConfig {
        VrnnTrainConfig {
            scheduler,
            epochs: 10,
            ..Default::default()
        }
    }

    #[test]
    fn const_schedule_is_flat() {
        let c = cfg(Scheduler::Const);
        assert!((1..=10).all(|e| learning_rate(&c, e) == 0.027));
    }

    #[test]
    fn cos_endpoints() {
        let c = cfg(Scheduler::Cos);
        assert!((learning_rate(&c, 1) - 0.027).abs() < 1e-12);
        assert!((learning_rate(&c, 10) - 2.16e-5).abs() < 1e-12);
    }

    #[test]
    fn schedules_decrease_monotonically() {
        for s in [Scheduler::Cos, Scheduler::Exp] {
            let c = cfg(s);
            let lrs: Vec<f64> = (1..=10).map(|e| learning_rate(&c, e)).collect();
            assert!(lrs.windows(2).all(|w| w[1] < w[0]), "{s:?}: {lrs:?}");
        }
    }

    #[test]
    fn curriculum_ramp() {
        let lens: Vec<usize> = (1..=10).map(|e| curriculum_length(5, 50, e, 10)).collect();
        assert_eq!(lens, vec![5, 10, 15, 20, 25, 30, 35, 40, 45, 50]);
    }

    #[test]
    fn curriculum_rounds_half_up() {
        // 1 + 2 * (e - 1) / 4 at e = 2 is 1.5
        assert_eq!(curriculum_length(1, 3, 2, 5), 2);
        assert_eq!(curriculum_length(1, 3, 1, 5), 1);
        assert_eq!(curriculum_length(1, 3, 5, 5), 3);
        assert_eq!(curriculum_length(4, 9, 1, 1), 9);
    }

    #[test]
    fn validation() {
        let mut c = VrnnTrainConfig::default();
        c.validate().unwrap();
        c.momentum = 1.0;
        assert!(c.validate().is_err());
    }
}
