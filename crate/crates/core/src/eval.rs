//! Observed-epoch sweeps over a test set: per-target MSE and median
//! log-likelihood, summaries averaged over targets, and tidy CSV output.
//!
//! A cell is one `(method, observed M, target t)` triple. Every method sees
//! `y_1..y_M` of each test curve and returns a prediction per target. Each
//! `(method, M, curve)` gets its own seed, so cells can run in any order.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{lsv_predict, static_predict, StaticForestModel};
use crate::data::{CurveDataset, HyperparameterConfig, NormalizationScheme};
use crate::error::{Error, Result};
use crate::rollout::{roll_out, write_lines, OneStepPredictor, RolloutConfig, VrnnPredictor, WindowedForestPredictor};
use crate::scalar::Scalar;
use crate::seed::{derive_seed, Label};

/// Floor applied to predictive variances before scoring log-likelihood.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// `log N(y; mean, variance)`.
pub fn gaussian_log_density(y: f64, mean: f64, variance: f64) -> f64 {
    let d = y - mean;
    -0.5 * ((2.0 * std::f64::consts::PI * variance).ln() + d * d / variance)
}

/// Log-likelihood with the variance floored at [`VARIANCE_FLOOR`].
pub fn floored_log_likelihood(y: f64, mean: f64, variance: f64) -> f64 {
    gaussian_log_density(y, mean, variance.max(VARIANCE_FLOOR))
}

/// Lower median: the element at index `(n - 1) / 2` of the sorted values.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v[(v.len() - 1) / 2])
}

/// A point forecast with an optional predictive variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<T> {
    pub mean: T,
    pub variance: Option<T>,
}

/// Per-call settings shared by all methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictContext {
    pub num_rollouts: usize,
    pub seed: u64,
}

/// Anything that forecasts targets of a partially observed curve.
pub trait CurvePredictor<T: Scalar>: Sync {
    /// One prediction per entry of `targets`; every target exceeds
    /// `observed.len()`.
    fn predict(
        &self,
        config: &HyperparameterConfig<T>,
        observed: &[T],
        targets: &[usize],
        ctx: PredictContext,
    ) -> Result<Vec<Prediction<T>>>;
}

/// Last seen value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Lsv;

impl<T: Scalar> CurvePredictor<T> for Lsv {
    fn predict(&self, _: &HyperparameterConfig<T>, observed: &[T], targets: &[usize], _: PredictContext) -> Result<Vec<Prediction<T>>> {
        targets
            .iter()
            .map(|&t| {
                Ok(Prediction {
                    mean: lsv_predict(observed, t)?,
                    variance: None,
                })
            })
            .collect()
    }
}

impl<T: Scalar> CurvePredictor<T> for StaticForestModel<T> {
    fn predict(&self, config: &HyperparameterConfig<T>, _: &[T], targets: &[usize], _: PredictContext) -> Result<Vec<Prediction<T>>> {
        targets
            .iter()
            .map(|&t| {
                let g = static_predict(self, config, t)?;
                Ok(Prediction {
                    mean: g.mean,
                    variance: Some(g.variance),
                })
            })
            .collect()
    }
}

fn rollout_predictions<T: Scalar, P: OneStepPredictor<T>>(
    predictor: &P,
    config: &HyperparameterConfig<T>,
    observed: &[T],
    targets: &[usize],
    ctx: PredictContext,
) -> Result<Vec<Prediction<T>>> {
    let horizon = targets.iter().copied().max().ok_or_else(|| Error::invalid("no target epochs"))?;
    let cfg = RolloutConfig {
        num_rollouts: ctx.num_rollouts,
        horizon,
        seed: ctx.seed,
    };
    let result = roll_out(predictor, config, observed, &cfg)?;
    targets
        .iter()
        .map(|&t| {
            let g = result
                .gaussian_at(t)
                .ok_or_else(|| Error::invalid(format!("target epoch {t} is not after the observed prefix")))?;
            Ok(Prediction {
                mean: g.mean,
                variance: Some(g.variance),
            })
        })
        .collect()
}

impl<T: Scalar> CurvePredictor<T> for WindowedForestPredictor<T> {
    fn predict(&self, config: &HyperparameterConfig<T>, observed: &[T], targets: &[usize], ctx: PredictContext) -> Result<Vec<Prediction<T>>> {
        rollout_predictions(self, config, observed, targets, ctx)
    }
}

impl<T: Scalar> CurvePredictor<T> for VrnnPredictor<T> {
    fn predict(&self, config: &HyperparameterConfig<T>, observed: &[T], targets: &[usize], ctx: PredictContext) -> Result<Vec<Prediction<T>>> {
        rollout_predictions(self, config, observed, targets, ctx)
    }
}

/// A predictor under the name it is reported with.
pub struct NamedMethod<'a, T> {
    pub name: String,
    pub predictor: &'a dyn CurvePredictor<T>,
}

impl<'a, T> NamedMethod<'a, T> {
    pub fn new(name: impl Into<String>, predictor: &'a dyn CurvePredictor<T>) -> Self {
        Self {
            name: name.into(),
            predictor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetEpochs {
    /// Every epoch after the observed prefix up to the shortest test curve.
    All,
    List(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalProtocol {
    pub observed_epochs: Vec<usize>,
    pub target_epochs: TargetEpochs,
    pub num_rollouts: usize,
    pub seed: u64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            observed_epochs: vec![4, 8, 16, 32],
            target_epochs: TargetEpochs::All,
            num_rollouts: RolloutConfig::DEFAULT_ROLLOUTS,
            seed: 0,
        }
    }
}

impl EvalProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.observed_epochs.is_empty() || self.observed_epochs.contains(&0) {
            return Err(Error::invalid("observed epochs must be a non-empty list of positive integers"));
        }
        if self.num_rollouts == 0 {
            return Err(Error::invalid("number of rollouts must be positive"));
        }
        if let TargetEpochs::List(targets) = &self.target_epochs {
            let min_target = *targets
                .iter()
                .min()
                .ok_or_else(|| Error::invalid("target epoch list is empty"))?;
            let max_observed = *self.observed_epochs.iter().max().expect("non-empty");
            if max_observed >= min_target {
                return Err(Error::invalid(format!(
                    "observed epoch {max_observed} is not before the first target epoch {min_target}"
                )));
            }
        }
        Ok(())
    }

    fn targets_for(&self, observed: usize, horizon: usize) -> Vec<usize> {
        match &self.target_epochs {
            TargetEpochs::All => (observed + 1..=horizon).collect(),
            TargetEpochs::List(list) => {
                let mut t = list.clone();
                t.sort_unstable();
                t.dedup();
                t
            }
        }
    }
}

/// Scores for one `(method, observed, target)` cell over all test curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub method: String,
    pub observed: usize,
    pub target: usize,
    pub count: usize,
    /// Mean over curves of the squared error.
    pub mse: f64,
    /// Population standard deviation over curves of the squared error.
    pub se_std: f64,
    /// Lower median over curves of the floored log-likelihood; absent for
    /// methods without a variance.
    pub median_ll: Option<f64>,
}

/// Cells of one `(method, observed)` pair averaged over their targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub method: String,
    pub observed: usize,
    pub num_targets: usize,
    pub avg_mse: f64,
    /// Mean of the per-target median log-likelihoods.
    pub avg_median_ll: Option<f64>,
}

/// One scored prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub method: String,
    pub observed: usize,
    pub target: usize,
    pub curve_id: String,
    pub true_value: f64,
    pub pred_mean: f64,
    pub pred_var: Option<f64>,
    pub ll: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub num_curves: usize,
    /// Value space the scores were computed in.
    pub normalization: NormalizationScheme,
    pub protocol: EvalProtocol,
    pub variance_floor: f64,
    pub cells: Vec<EvalCell>,
    pub summaries: Vec<EvalSummary>,
    pub points: Vec<PointRecord>,
}

impl EvalReport {
    pub fn with_normalization(mut self, scheme: NormalizationScheme) -> Self {
        self.normalization = scheme;
        self
    }

    pub fn cell(&self, method: &str, observed: usize, target: usize) -> Option<&EvalCell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.observed == observed && c.target == target)
    }

    pub fn summary(&self, method: &str, observed: usize) -> Option<&EvalSummary> {
        self.summaries.iter().find(|s| s.method == method && s.observed == observed)
    }

    /// Writes the report as pretty JSON with a trailing newline.
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::Format {
            path: path.into(),
            message: e.to_string(),
        })?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Seed for one `(method, observed, curve)` evaluation task.
pub fn cell_seed(protocol_seed: u64, method: &str, observed: usize, curve_id: &str) -> u64 {
    derive_seed(
        protocol_seed,
        &[Label::Str("eval"), Label::Str(method), Label::from(observed), Label::Str(curve_id)],
    )
}

/// Runs every method over every observed count and test curve.
pub fn evaluate<T: Scalar>(methods: &[NamedMethod<'_, T>], test: &CurveDataset<T>, protocol: &EvalProtocol) -> Result<EvalReport> {
    protocol.validate()?;
    if test.is_empty() {
        return Err(Error::data("test dataset is empty"));
    }
    for (i, m) in methods.iter().enumerate() {
        if methods[..i].iter().any(|o| o.name == m.name) {
            return Err(Error::invalid(format!("method name '{}' is used twice", m.name)));
        }
    }
    let horizon = test.min_len().expect("non-empty dataset");
    let needed = match &protocol.target_epochs {
        TargetEpochs::All => *protocol.observed_epochs.iter().max().expect("validated") + 1,
        TargetEpochs::List(list) => *list.iter().max().expect("validated"),
    };
    if horizon < needed {
        let short = test.curves.iter().find(|c| c.len() < needed).expect("some curve is short");
        return Err(Error::data(format!(
            "curve '{}' has {} epochs; the protocol needs {needed}",
            short.id,
            short.len()
        )));
    }

    let mut observed = protocol.observed_epochs.clone();
    observed.sort_unstable();
    observed.dedup();

    let tasks: Vec<(usize, usize, usize)> = (0..methods.len())
        .flat_map(|m| observed.iter().flat_map(move |&o| (0..test.len()).map(move |c| (m, o, c))))
        .collect();

    // One entry per task, in task order.
    let predictions = tasks
        .par_iter()
        .map(|&(m, o, c)| {
            let curve = &test.curves[c];
            let targets = protocol.targets_for(o, horizon);
            let ctx = PredictContext {
                num_rollouts: protocol.num_rollouts,
                seed: cell_seed(protocol.seed, &methods[m].name, o, &curve.id),
            };
            let preds = methods[m].predictor.predict(&curve.config, &curve.values[..o], &targets, ctx)?;
            if preds.len() != targets.len() {
                return Err(Error::invalid(format!(
                    "method '{}' returned {} predictions for {} targets",
                    methods[m].name,
                    preds.len(),
                    targets.len()
                )));
            }
            Ok(targets.into_iter().zip(preds).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut points = Vec::new();
    let mut groups: HashMap<(usize, usize, usize), Vec<usize>> = HashMap::new();
    for (&(m, o, c), preds) in tasks.iter().zip(&predictions) {
        let curve = &test.curves[c];
        for &(t, p) in preds {
            groups.entry((m, o, t)).or_default().push(points.len());
            let y = curve.values[t - 1].as_f64();
            let mean = p.mean.as_f64();
            let var = p.variance.map(|v| v.as_f64());
            points.push(PointRecord {
                method: methods[m].name.clone(),
                observed: o,
                target: t,
                curve_id: curve.id.clone(),
                true_value: y,
                pred_mean: mean,
                pred_var: var,
                ll: var.map(|v| floored_log_likelihood(y, mean, v)),
            });
        }
    }

    let cells = aggregate_cells(methods, &observed, protocol, horizon, &points, &groups);
    let summaries = summarize(&cells);
    Ok(EvalReport {
        dataset: test.name.clone(),
        num_curves: test.len(),
        normalization: NormalizationScheme::None,
        protocol: protocol.clone(),
        variance_floor: VARIANCE_FLOOR,
        cells,
        summaries,
        points,
    })
}

fn aggregate_cells<T>(
    methods: &[NamedMethod<'_, T>],
    observed: &[usize],
    protocol: &EvalProtocol,
    horizon: usize,
    points: &[PointRecord],
    groups: &HashMap<(usize, usize, usize), Vec<usize>>,
) -> Vec<EvalCell> {
    let mut cells = Vec::new();
    for (mi, m) in methods.iter().enumerate() {
        for &o in observed {
            for t in protocol.targets_for(o, horizon) {
                let sel: Vec<&PointRecord> = groups[&(mi, o, t)].iter().map(|&i| &points[i]).collect();
                let errs: Vec<f64> = sel.iter().map(|p| (p.pred_mean - p.true_value).powi(2)).collect();
                let n = errs.len() as f64;
                let mse = errs.iter().sum::<f64>() / n;
                let se_std = (errs.iter().map(|e| (e - mse).powi(2)).sum::<f64>() / n).sqrt();
                let lls: Option<Vec<f64>> = sel.iter().map(|p| p.ll).collect();
                cells.push(EvalCell {
                    method: m.name.clone(),
                    observed: o,
                    target: t,
                    count: errs.len(),
                    mse,
                    se_std,
                    median_ll: lls.and_then(|v| lower_median(&v)),
                });
            }
        }
    }
    cells
}

/// Averages cells over targets, keeping first-seen `(method, observed)` order.
pub fn summarize(cells: &[EvalCell]) -> Vec<EvalSummary> {
    let mut keys: Vec<(&str, usize)> = Vec::new();
    for c in cells {
        if !keys.contains(&(c.method.as_str(), c.observed)) {
            keys.push((c.method.as_str(), c.observed));
        }
    }
    keys.into_iter()
        .map(|(method, observed)| {
            let sel: Vec<&EvalCell> = cells.iter().filter(|c| c.method == method && c.observed == observed).collect();
            let n = sel.len() as f64;
            let lls: Option<Vec<f64>> = sel.iter().map(|c| c.median_ll).collect();
            EvalSummary {
                method: method.to_string(),
                observed,
                num_targets: sel.len(),
                avg_mse: sel.iter().map(|c| c.mse).sum::<f64>() / n,
                avg_median_ll: lls.map(|v| v.iter().sum::<f64>() / n),
            }
        })
        .collect()
}

/// One point of an adaptation series at a fixed target epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationPoint {
    pub observed: usize,
    pub mse: f64,
    pub median_ll: Option<f64>,
}

/// Error at `target_epoch` as a function of the number of observed epochs.
pub fn adaptation_curve<T: Scalar>(
    method: &NamedMethod<'_, T>,
    test: &CurveDataset<T>,
    target_epoch: usize,
    observed_grid: &[usize],
    num_rollouts: usize,
    seed: u64,
) -> Result<Vec<AdaptationPoint>> {
    let protocol = EvalProtocol {
        observed_epochs: observed_grid.to_vec(),
        target_epochs: TargetEpochs::List(vec![target_epoch]),
        num_rollouts,
        seed,
    };
    let report = evaluate(std::slice::from_ref(method), test, &protocol)?;
    Ok(report
        .cells
        .into_iter()
        .map(|c| AdaptationPoint {
            observed: c.observed,
            mse: c.mse,
            median_ll: c.median_ll,
        })
        .collect())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `metrics_by_target.csv`, `adaptation.csv` and
/// `predicted_vs_true.csv` into `out_dir`. Missing log-likelihoods are
/// empty fields.
pub fn emit_plot_data(report: &EvalReport, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let metrics = report
        .cells
        .iter()
        .map(|c| format!("{},{},{},{},{}", c.method, c.observed, c.target, c.mse, opt(c.median_ll)));
    write_lines(&out_dir.join("metrics_by_target.csv"), "method,observed,target,mse,median_ll", metrics)?;

    // Same cells grouped per target so each (method, target) pair reads as a
    // series over the observed count.
    let mut by_target: Vec<&EvalCell> = report.cells.iter().collect();
    by_target.sort_by(|a, b| (&a.method, a.target, a.observed).cmp(&(&b.method, b.target, b.observed)));
    let adaptation = by_target.into_iter().map(|c| {
        format!(
            "{},{},{},{},{},{}",
            c.method,
            c.target,
            c.observed,
            c.mse,
            c.se_std,
            opt(c.median_ll)
        )
    });
    write_lines(&out_dir.join("adaptation.csv"), "method,target,observed,mse,se_std,median_ll", adaptation)?;

    let scatter = report.points.iter().map(|p| {
        format!(
            "{},{},{},{},{},{},{}",
            p.method,
            p.observed,
            p.target,
            p.true_value,
            p.pred_mean,
            opt(p.pred_var),
            opt(p.ll)
        )
    });
    write_lines(
        &out_dir.join("predicted_vs_true.csv"),
        "method,observed,target,true,pred_mean,pred_var,ll",
        scatter,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{default_names, LearningCurve};

    /// Returns the true value of a curve looked up by its config.
    struct Oracle<'a> {
        data: &'a CurveDataset<f64>,
        variance: f64,
    }

    impl CurvePredictor<f64> for Oracle<'_> {
        fn predict(&self, config: &HyperparameterConfig<f64>, _: &[f64], targets: &[usize], _: PredictContext) -> Result<Vec<Prediction<f64>>> {
            let c = self.data.curves.iter().find(|c| c.config.values == config.values).unwrap();
            Ok(targets
                .iter()
                .map(|&t| Prediction {
                    mean: c.values[t - 1],
                    variance: Some(self.variance),
                })
                .collect())
        }
    }

    fn data(curves: Vec<Vec<f64>>) -> CurveDataset<f64> {
        let curves = curves
            .into_iter()
            .enumerate()
            .map(|(i, v)| LearningCurve::new(format!("c{i}"), HyperparameterConfig::unnamed(vec![i as f64]).unwrap(), v).unwrap())
            .collect();
        CurveDataset::new("test", default_names(1), curves).unwrap()
    }

    fn protocol(observed: Vec<usize>, targets: TargetEpochs) -> EvalProtocol {
        EvalProtocol {
            observed_epochs: observed,
            target_epochs: targets,
            num_rollouts: 4,
            seed: 1,
        }
    }

    #[test]
    fn standard_normal_density_at_zero() {
        let ll = gaussian_log_density(0.0, 0.0, 1.0);
        assert!((ll - (-0.5 * (2.0 * std::f64::consts::PI).ln())).abs() < 1e-15);
        assert!((ll + 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn lower_median_rule() {
        assert_eq!(lower_median(&[4.0, 1.0, 3.0, 2.0]), Some(2.0));
        assert_eq!(lower_median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(lower_median(&[]), None);
    }

    #[test]
    fn oracle_has_zero_mse() {
        let d = data(vec![vec![0.1, 0.2, 0.3, 0.4], vec![0.5, 0.5, 0.6, 0.7]]);
        let o = Oracle { data: &d, variance: 0.3 };
        let r = evaluate(&[NamedMethod::new("oracle", &o)], &d, &protocol(vec![1, 2], TargetEpochs::All)).unwrap();
        assert_eq!(r.cells.len(), 3 + 2);
        assert!(r.cells.iter().all(|c| c.mse == 0.0 && c.count == 2));
        let expected = gaussian_log_density(0.0, 0.0, 0.3);
        assert!(r.cells.iter().all(|c| c.median_ll == Some(expected)));
    }

    #[test]
    fn lsv_has_no_log_likelihood() {
        let d = data(vec![vec![0.1, 0.2, 0.3, 0.4, 0.5]]);
        let r = evaluate(&[NamedMethod::new("LSV", &Lsv)], &d, &protocol(vec![2], TargetEpochs::List(vec![4, 5]))).unwrap();
        assert!(r.cells.iter().all(|c| c.median_ll.is_none()));
        assert!(r.summaries[0].avg_mse > 0.0 && r.summaries[0].avg_median_ll.is_none());
        let c = r.cell("LSV", 2, 5).unwrap();
        assert!((c.mse - 0.09).abs() < 1e-15);
    }

    #[test]
    fn mse_and_summary_match_brute_force() {
        let d = data(vec![vec![0.1, 0.3, 0.2, 0.6], vec![0.4, 0.2, 0.9, 0.1], vec![0.0, 0.5, 0.5, 0.7]]);
        let r = evaluate(&[NamedMethod::new("LSV", &Lsv)], &d, &protocol(vec![1, 2], TargetEpochs::All)).unwrap();
        for c in &r.cells {
            let errs: Vec<f64> = d
                .curves
                .iter()
                .map(|k| (k.values[c.observed - 1] - k.values[c.target - 1]).powi(2))
                .collect();
            assert!((c.mse - errs.iter().sum::<f64>() / 3.0).abs() < 1e-12);
        }
        for s in &r.summaries {
            let cs: Vec<f64> = r.cells.iter().filter(|c| c.observed == s.observed).map(|c| c.mse).collect();
            assert_eq!(s.num_targets, cs.len());
            assert!((s.avg_mse - cs.iter().sum::<f64>() / cs.len() as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn larger_variance_lowers_ll_at_zero_error() {
        let d = data(vec![vec![0.1, 0.2, 0.3]]);
        let mut prev = f64::INFINITY;
        for v in [1e-4, 1e-2, 1.0, 10.0] {
            let o = Oracle { data: &d, variance: v };
            let r = evaluate(&[NamedMethod::new("o", &o)], &d, &protocol(vec![1], TargetEpochs::List(vec![3]))).unwrap();
            let ll = r.cells[0].median_ll.unwrap();
            assert!(ll < prev);
            prev = ll;
        }
    }

    #[test]
    fn variance_floor_applies() {
        assert_eq!(floored_log_likelihood(0.5, 0.5, 0.0), gaussian_log_density(0.0, 0.0, VARIANCE_FLOOR));
    }

    #[test]
    fn protocol_errors() {
        let d = data(vec![vec![0.1, 0.2, 0.3]]);
        let m = [NamedMethod::new("LSV", &Lsv)];
        assert!(evaluate(&m, &d, &protocol(vec![2], TargetEpochs::List(vec![2]))).is_err());
        assert!(evaluate(&m, &d, &protocol(vec![1], TargetEpochs::List(vec![4]))).is_err());
        assert!(evaluate(&m, &d, &protocol(vec![3], TargetEpochs::All)).is_err());
        let dup = [NamedMethod::new("a", &Lsv as &dyn CurvePredictor<f64>), NamedMethod::new("a", &Lsv)];
        assert!(evaluate(&dup, &d, &protocol(vec![1], TargetEpochs::All)).is_err());
    }

    #[test]
    fn lsv_adaptation_on_monotone_curves() {
        let d = data(
            (1..6)
                .map(|k| (1..=20).map(|t| 1.0 - (-(k as f64) * 0.05 * t as f64).exp()).collect())
                .collect(),
        );
        let pts = adaptation_curve(&NamedMethod::new("LSV", &Lsv), &d, 20, &[1, 2, 4, 8, 16], 1, 0).unwrap();
        assert!(pts.windows(2).all(|w| w[1].mse <= w[0].mse));
    }

    #[test]
    fn plot_data_files() {
        let dir = tempfile::tempdir().unwrap();
        let d = data(vec![vec![0.1, 0.2, 0.3]]);
        let o = Oracle { data: &d, variance: 0.5 };
        let r = evaluate(&[NamedMethod::new("o", &o)], &d, &protocol(vec![2], TargetEpochs::List(vec![3]))).unwrap();
        emit_plot_data(&r, dir.path()).unwrap();
        let metrics = std::fs::read_to_string(dir.path().join("metrics_by_target.csv")).unwrap();
        assert_eq!(metrics.lines().count(), 2);
        let scatter = std::fs::read_to_string(dir.path().join("predicted_vs_true.csv")).unwrap();
        assert_eq!(scatter.lines().nth(1).unwrap().split(',').nth(3).unwrap(), "0.3");

        let empty = EvalReport {
            cells: vec![],
            summaries: vec![],
            points: vec![],
            ..r
        };
        let sub = dir.path().join("empty");
        emit_plot_data(&empty, &sub).unwrap();
        for f in ["metrics_by_target.csv", "adaptation.csv", "predicted_vs_true.csv"] {
            assert_eq!(std::fs::read_to_string(sub.join(f)).unwrap().lines().count(), 1);
        }
    }
}
