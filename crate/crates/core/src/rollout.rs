//! Autoregressive rollouts of a one-step predictor and their aggregation
//! into a per-epoch Gaussian.
//!
//! Each of the `R` trajectories owns a random stream derived from
//! `(seed, trajectory index)` and consumes it in step order, so trajectories
//! can run in parallel and a longer horizon reproduces the shorter one as a
//! prefix.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CurveDataset, HyperparameterConfig};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, sample_prediction, ForestTrainConfig, PredictiveGaussian, RegressionForest};
use crate::scalar::{pivot_mean, Scalar};
use crate::seed::{derived_rng, Label, Rng};
use crate::vrnn::{sample_masks, Conditioning, RecurrentState, VrnnModel};

/// A model that extends a curve one sampled value at a time.
pub trait OneStepPredictor<T: Scalar>: Sync {
    /// Per-trajectory state: the rolling input and anything sampled once per
    /// trajectory.
    type State: Send;

    /// Number of lagged values the predictor reads per step (`K`).
    fn window(&self) -> usize;

    /// Shortest observed prefix [`prime`](Self::prime) accepts.
    fn min_observed(&self) -> usize;

    fn config_dim(&self) -> usize;

    /// Builds the state for one trajectory from the observed prefix
    /// `[y_1, ..., y_M]`.
    fn prime(&self, config: &HyperparameterConfig<T>, observed: &[T], rng: &mut Rng) -> Result<Self::State>;

    /// Samples the next value and appends it to the rolling input.
    fn step(&self, state: &mut Self::State, rng: &mut Rng) -> T;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub num_rollouts: usize,
    /// Last epoch to predict.
    pub horizon: usize,
    pub seed: u64,
}

impl RolloutConfig {
    pub const DEFAULT_ROLLOUTS: usize = 100;
}

/// Sampled trajectories for epochs `first_epoch..=first_epoch + len - 1`
/// with their per-epoch mean and population variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutResult<T> {
    pub first_epoch: usize,
    /// `trajectories[r][k]` is rollout `r` at epoch `first_epoch + k`.
    pub trajectories: Vec<Vec<T>>,
    pub mean: Vec<T>,
    pub variance: Vec<T>,
}

impl<T: Scalar> RolloutResult<T> {
    /// Aggregates a rectangular, non-empty trajectory matrix:
    /// `mean[k] = (1/R) Σ_r y[r][k]`, `variance[k] = (1/R) Σ_r (y[r][k] - mean[k])²`.
    pub fn from_trajectories(first_epoch: usize, trajectories: Vec<Vec<T>>) -> Result<Self> {
        let r = trajectories.len();
        if r == 0 {
            return Err(Error::invalid("at least one trajectory is required"));
        }
        let steps = trajectories[0].len();
        if trajectories.iter().any(|t| t.len() != steps) {
            return Err(Error::invalid("trajectories have different lengths"));
        }
        let n = T::of_usize(r);
        let mean: Vec<T> = (0..steps)
            .map(|k| pivot_mean(trajectories.iter().map(|t| t[k])).expect("non-empty").0)
            .collect();
        let mut variance = vec![T::zero(); steps];
        for t in &trajectories {
            for k in 0..steps {
                let d = t[k] - mean[k];
                variance[k] += d * d;
            }
        }
        variance.iter_mut().for_each(|v| *v = *v / n);
        Ok(Self {
            first_epoch,
            trajectories,
            mean,
            variance,
        })
    }

    pub fn num_rollouts(&self) -> usize {
        self.trajectories.len()
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn last_epoch(&self) -> usize {
        self.first_epoch + self.len() - 1
    }

    /// Aggregated Gaussian at a 1-indexed epoch.
    pub fn gaussian_at(&self, epoch: usize) -> Option<PredictiveGaussian<T>> {
        let k = epoch.checked_sub(self.first_epoch)?;
        Some(PredictiveGaussian {
            mean: *self.mean.get(k)?,
            variance: self.variance[k],
        })
    }

    /// CSV with header `epoch,mean,variance`.
    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        write_lines(path, "epoch,mean,variance", self.mean.iter().zip(&self.variance).enumerate().map(|(k, (m, v))| {
            format!("{},{},{}", self.first_epoch + k, m, v)
        }))
    }

    /// CSV with header `epoch,rollout_idx,value`, one row per sample.
    pub fn write_trajectories_csv(&self, path: &Path) -> Result<()> {
        let rows = self.trajectories.iter().enumerate().flat_map(|(r, traj)| {
            traj.iter()
                .enumerate()
                .map(move |(k, v)| format!("{},{},{}", self.first_epoch + k, r, v))
        });
        write_lines(path, "epoch,rollout_idx,value", rows)
    }
}

pub(crate) fn write_lines(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let go = || -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        for row in rows {
            writeln!(w, "{row}")?;
        }
        w.flush()
    };
    go().map_err(|e| Error::io(path, e))
}

/// Extends `observed = [y_1, ..., y_M]` to epoch `cfg.horizon` with
/// `cfg.num_rollouts` independent trajectories.
pub fn roll_out<T: Scalar, P: OneStepPredictor<T>>(
    predictor: &P,
    config: &HyperparameterConfig<T>,
    observed: &[T],
    cfg: &RolloutConfig,
) -> Result<RolloutResult<T>> {
    let m = observed.len();
    if cfg.num_rollouts == 0 {
        return Err(Error::invalid("number of rollouts must be positive"));
    }
    if cfg.horizon <= m {
        return Err(Error::invalid(format!(
            "horizon {} must exceed the {m} observed epochs",
            cfg.horizon
        )));
    }
    if m < predictor.min_observed() {
        return Err(Error::invalid(format!(
            "predictor needs at least {} observed epochs, got {m}",
            predictor.min_observed()
        )));
    }
    if config.dim() != predictor.config_dim() {
        return Err(Error::DimensionMismatch {
            expected: predictor.config_dim(),
            got: config.dim(),
        });
    }
    if observed.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("observed prefix contains a non-finite value"));
    }
    let steps = cfg.horizon - m;
    let trajectories = (0..cfg.num_rollouts)
        .into_par_iter()
        .map(|r| {
            let mut rng = derived_rng(cfg.seed, &[Label::Str("rollout"), Label::from(r)]);
            let mut state = predictor.prime(config, observed, &mut rng)?;
            Ok((0..steps).map(|_| predictor.step(&mut state, &mut rng)).collect())
        })
        .collect::<Result<Vec<Vec<T>>>>()?;
    RolloutResult::from_trajectories(m + 1, trajectories)
}

/// Random-forest predictor over inputs `[θ, y_{t-K}, ..., y_{t-1}]` that
/// samples each next value from the forest's Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedForestPredictor<T> {
    pub forest: RegressionForest<T>,
    pub window: usize,
    pub config_dim: usize,
}

/// Rolling input `[θ, last K values]` of a windowed predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowState<T> {
    features: Vec<T>,
    config_dim: usize,
}

impl<T: Scalar> WindowState<T> {
    /// The lagged values, oldest first.
    pub fn window_values(&self) -> &[T] {
        &self.features[self.config_dim..]
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    /// Drops the oldest value and appends `y`.
    pub fn push(&mut self, y: T) {
        self.features[self.config_dim..].rotate_left(1);
        *self.features.last_mut().expect("window is non-empty") = y;
    }
}

/// Wraps a forest trained on `[θ, K lagged values]` rows.
pub fn windowed_forest_predictor<T: Scalar>(forest: RegressionForest<T>, window: usize) -> Result<WindowedForestPredictor<T>> {
    if window == 0 {
        return Err(Error::invalid("window size must be positive"));
    }
    if forest.feature_dim <= window {
        return Err(Error::DimensionMismatch {
            expected: window + 1,
            got: forest.feature_dim,
        });
    }
    let config_dim = forest.feature_dim - window;
    Ok(WindowedForestPredictor {
        forest,
        window,
        config_dim,
    })
}

impl<T: Scalar> OneStepPredictor<T> for WindowedForestPredictor<T> {
    type State = WindowState<T>;

    fn window(&self) -> usize {
        self.window
    }

    fn min_observed(&self) -> usize {
        self.window
    }

    fn config_dim(&self) -> usize {
        self.config_dim
    }

    fn prime(&self, config: &HyperparameterConfig<T>, observed: &[T], _rng: &mut Rng) -> Result<Self::State> {
        if observed.len() < self.window {
            return Err(Error::invalid(format!(
                "window of {} needs at least that many observed epochs, got {}",
                self.window,
                observed.len()
            )));
        }
        let mut features = config.values.clone();
        features.extend_from_slice(&observed[observed.len() - self.window..]);
        Ok(WindowState {
            features,
            config_dim: self.config_dim,
        })
    }

    fn step(&self, state: &mut Self::State, rng: &mut Rng) -> T {
        let g = self.forest.predict_unchecked(&state.features);
        let y = sample_prediction(&g, rng);
        state.push(y);
        y
    }
}

/// MC-dropout predictor: one mask draw per trajectory, deterministic
/// network output at every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VrnnPredictor<T> {
    pub model: VrnnModel<T>,
}

pub fn vrnn_predictor<T: Scalar>(model: VrnnModel<T>) -> Result<VrnnPredictor<T>> {
    model.validate()?;
    Ok(VrnnPredictor { model })
}

pub struct VrnnRolloutState<T> {
    conditioning: Conditioning<T>,
    recurrent: RecurrentState<T>,
    /// Value fed at the next step.
    last: T,
}

impl<T> VrnnRolloutState<T> {
    /// Masked encodings drawn at priming; unchanged by later steps.
    pub fn conditioning(&self) -> &Conditioning<T> {
        &self.conditioning
    }
}

impl<T: Scalar> OneStepPredictor<T> for VrnnPredictor<T> {
    type State = VrnnRolloutState<T>;

    fn window(&self) -> usize {
        1
    }

    fn min_observed(&self) -> usize {
        0
    }

    fn config_dim(&self) -> usize {
        self.model.config_dim
    }

    /// Samples masks, then feeds `y_0 = 0, y_1, ..., y_{M-1}`; `y_M` is fed
    /// by the first [`step`](Self::step).
    fn prime(&self, config: &HyperparameterConfig<T>, observed: &[T], rng: &mut Rng) -> Result<Self::State> {
        let masks = sample_masks(&self.model, rng);
        let conditioning = self.model.condition(config, &masks)?;
        let mut recurrent = self.model.zero_state();
        let mut last = T::zero();
        for &y in observed {
            self.model.step(&conditioning, last, &mut recurrent);
            last = y;
        }
        Ok(VrnnRolloutState {
            conditioning,
            recurrent,
            last,
        })
    }

    fn step(&self, state: &mut Self::State, _rng: &mut Rng) -> T {
        let y = self.model.step(&state.conditioning, state.last, &mut state.recurrent);
        state.last = y;
        y
    }
}

/// Supervised rows for a windowed forest: for each curve and each
/// `t = K+1..=T`, features `[θ, y_{t-K}, ..., y_{t-1}]` and target `y_t`.
pub fn make_training_windows<T: Scalar>(dataset: &CurveDataset<T>, window: usize) -> Result<(Vec<Vec<T>>, Vec<T>)> {
    if window == 0 {
        return Err(Error::invalid("window size must be positive"));
    }
    if let Some(c) = dataset.curves.iter().find(|c| c.len() <= window) {
        return Err(Error::data(format!(
            "curve '{}' has {} epochs; a window of {window} needs at least {}",
            c.id,
            c.len(),
            window + 1
        )));
    }
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for c in &dataset.curves {
        for t in window..c.len() {
            let mut row = c.config.values.clone();
            row.extend_from_slice(&c.values[t - window..t]);
            features.push(row);
            targets.push(c.values[t]);
        }
    }
    Ok((features, targets))
}

/// Builds windows from `dataset` and fits the forest behind a windowed predictor.
pub fn fit_windowed_forest<T: Scalar>(
    dataset: &CurveDataset<T>,
    window: usize,
    cfg: &ForestTrainConfig,
) -> Result<WindowedForestPredictor<T>> {
    let (x, y) = make_training_windows(dataset, window)?;
    let forest = fit_forest(&x, &y, cfg)?;
    windowed_forest_predictor(forest, window)
}
