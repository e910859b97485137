//! Comparison methods that do not roll out: the last seen value and a
//! static forest over `[θ, t]`.

use serde::{Deserialize, Serialize};

use crate::data::{CurveDataset, HyperparameterConfig};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestTrainConfig, PredictiveGaussian, RegressionForest};
use crate::scalar::Scalar;

/// Predicts the last observed value for every future epoch. Reports no
/// variance.
pub fn lsv_predict<T: Scalar>(observed: &[T], target_epoch: usize) -> Result<T> {
    let last = *observed
        .last()
        .ok_or_else(|| Error::invalid("last-seen-value prediction needs at least one observed epoch"))?;
    if target_epoch <= observed.len() {
        return Err(Error::invalid(format!(
            "target epoch {target_epoch} is already observed ({} epochs)",
            observed.len()
        )));
    }
    Ok(last)
}

/// Forest mapping `[θ, t]` straight to `y_t`, blind to the observed prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticForestModel<T> {
    pub forest: RegressionForest<T>,
    /// Longest training curve.
    pub max_epoch: usize,
}

impl<T: Scalar> StaticForestModel<T> {
    pub fn config_dim(&self) -> usize {
        self.forest.feature_dim - 1
    }

    pub fn validate(&self) -> Result<()> {
        self.forest.validate()?;
        if self.forest.feature_dim < 2 || self.max_epoch == 0 {
            return Err(Error::data("static model needs at least one config feature plus the epoch"));
        }
        Ok(())
    }
}

/// One row per `(curve, epoch)`: features `[θ, t]` with `t` as a raw real.
pub fn fit_static<T: Scalar>(dataset: &CurveDataset<T>, cfg: &ForestTrainConfig) -> Result<StaticForestModel<T>> {
    if dataset.is_empty() {
        return Err(Error::data("cannot fit a static model on an empty dataset"));
    }
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for c in &dataset.curves {
        for (k, &y) in c.values.iter().enumerate() {
            let mut row = c.config.values.clone();
            row.push(T::of_usize(k + 1));
            features.push(row);
            targets.push(y);
        }
    }
    let forest = fit_forest(&features, &targets, cfg)?;
    Ok(StaticForestModel {
        forest,
        max_epoch: dataset.max_len().expect("non-empty dataset"),
    })
}

pub fn static_predict<T: Scalar>(
    model: &StaticForestModel<T>,
    config: &HyperparameterConfig<T>,
    target_epoch: usize,
) -> Result<PredictiveGaussian<T>> {
    if config.dim() != model.config_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.config_dim(),
            got: config.dim(),
        });
    }
    if target_epoch == 0 {
        return Err(Error::invalid("epochs are 1-indexed"));
    }
    let mut x = config.values.clone();
    x.push(T::of_usize(target_epoch));
    model.forest.predict(&x)
}
