//! Synthetic learning curves over an 8-dimensional MLP configuration space.
//!
//! Configurations are sampled uniformly in transformed space (`log10` for
//! log-scaled ranges) and stored in that space, so a learning rate of `1e-4`
//! is stored as `-4`. Integer parameters are rounded and clamped in their
//! natural scale before the transform.
//!
//! Curves follow a saturating exponential
//!
//! ```text
//! y(t) = c_inf - (c_inf - c_0) * exp(-lambda * t^alpha) + eps_t,   eps_t ~ N(0, noise_std²)
//! ```
//!
//! clamped to `[0, 1]`. With `s_lr = (log10 lr + 4) / 2` in `[-1, 1]`,
//! `s_units = (log10 units - log10 16) / log10 16` in `[0, 1]` and
//! `s_layers = (layers - 1) / 4`:
//!
//! ```text
//! c_0    = 0.1
//! c_inf  = 0.45 + 0.35 (1 - s_lr²) + 0.1 s_units + 0.05 s_layers
//!               - 0.1 (dropout_0 + dropout_1) - 0.01 (log10 final_frac + 2)
//! lambda = 0.05 * 10^(0.8 s_lr) * 10^(-0.3 (log10 batch - 1.8))
//! alpha  = 0.5 + shape
//! ```
//!
//! The map is smooth, so nearby configurations give nearby curves.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CurveDataset, HyperparameterConfig, LearningCurve};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::{derived_rng, Label, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Real,
    Integer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub log_scale: bool,
    pub kind: ParamKind,
}

impl ParamRange {
    pub fn new(name: &str, lower: f64, upper: f64, log_scale: bool, kind: ParamKind) -> Self {
        Self {
            name: name.to_string(),
            lower,
            upper,
            log_scale,
            kind,
        }
    }

    fn transform(&self, v: f64) -> f64 {
        if self.log_scale {
            v.log10()
        } else {
            v
        }
    }

    fn untransform(&self, v: f64) -> f64 {
        if self.log_scale {
            10f64.powf(v)
        } else {
            v
        }
    }

    /// Draws one value and returns it in transformed space.
    fn sample(&self, rng: &mut Rng) -> f64 {
        match self.kind {
            ParamKind::Real => {
                let u: f64 = rng.random();
                let (lo, hi) = (self.transform(self.lower), self.transform(self.upper));
                lo + (hi - lo) * u
            }
            ParamKind::Integer => {
                // Widen by half a step so the end points are as likely as
                // interior integers.
                let u: f64 = rng.random();
                let (lo, hi) = (self.transform(self.lower - 0.5), self.transform(self.upper + 0.5));
                let natural = self.untransform(lo + (hi - lo) * u).round().clamp(self.lower, self.upper);
                self.transform(natural)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSpace {
    pub params: Vec<ParamRange>,
}

impl Default for ConfigSpace {
    fn default() -> Self {
        use ParamKind::*;
        // The shape parameter is flagged log-scaled over a range that
        // includes 0, so it is sampled linearly instead.
        Self {
            params: vec![
                ParamRange::new("initial_lr", 1e-6, 1e-2, true, Real),
                ParamRange::new("batch_size", 16.0, 256.0, true, Integer),
                ParamRange::new("average_units_per_layer", 16.0, 256.0, true, Integer),
                ParamRange::new("final_lr_fraction", 1e-4, 1.0, true, Real),
                ParamRange::new("shape_parameter_1", 0.0, 1.0, false, Real),
                ParamRange::new("dropout_0", 0.0, 0.5, false, Real),
                ParamRange::new("dropout_1", 0.0, 0.5, false, Real),
                ParamRange::new("num_layers", 1.0, 5.0, false, Integer),
            ],
        }
    }
}

impl ConfigSpace {
    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::invalid("configuration space is empty"));
        }
        for p in &self.params {
            if !(p.lower < p.upper) || !p.lower.is_finite() || !p.upper.is_finite() {
                return Err(Error::invalid(format!("range of '{}' must satisfy lower < upper", p.name)));
            }
            if p.log_scale && p.lower <= 0.0 {
                return Err(Error::invalid(format!("log-scaled range of '{}' must be positive", p.name)));
            }
            if p.log_scale && p.kind == ParamKind::Integer && p.lower <= 0.5 {
                return Err(Error::invalid(format!("log-scaled integer '{}' must start above 0.5", p.name)));
            }
        }
        Ok(())
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveFamily {
    ExpSaturation,
}

impl CurveFamily {
    pub fn name(self) -> &'static str {
        match self {
            CurveFamily::ExpSaturation => "exp_saturation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub num_configs: usize,
    pub num_epochs: usize,
    pub noise_std: f64,
    pub curve_family: CurveFamily,
    pub seed: u64,
}

impl GeneratorSpec {
    pub const DEFAULT_NOISE_STD: f64 = 0.01;

    pub fn new(num_configs: usize, num_epochs: usize, seed: u64) -> Self {
        Self {
            num_configs,
            num_epochs,
            noise_std: Self::DEFAULT_NOISE_STD,
            curve_family: CurveFamily::ExpSaturation,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_configs == 0 || self.num_epochs == 0 {
            return Err(Error::invalid("number of configurations and epochs must be positive"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid("noise standard deviation must be finite and non-negative"));
        }
        Ok(())
    }
}

/// `n` configurations drawn independently; each draws from its own stream.
pub fn sample_configs<T: Scalar>(space: &ConfigSpace, n: usize, seed: u64) -> Result<Vec<HyperparameterConfig<T>>> {
    space.validate()?;
    if n == 0 {
        return Err(Error::invalid("number of configurations must be positive"));
    }
    let names = space.names();
    (0..n)
        .map(|i| {
            let mut rng = derived_rng(seed, &[Label::Str("config"), Label::from(i)]);
            let values = space.params.iter().map(|p| T::of(p.sample(&mut rng))).collect();
            HyperparameterConfig::new(values, names.clone())
        })
        .collect()
}

/// Parameters of one saturating curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveParams {
    pub c_0: f64,
    pub c_inf: f64,
    pub lambda: f64,
    pub alpha: f64,
}

impl CurveParams {
    /// Noise-free, unclamped value at epoch `t`.
    pub fn value(&self, t: usize) -> f64 {
        self.c_inf - (self.c_inf - self.c_0) * (-self.lambda * (t as f64).powf(self.alpha)).exp()
    }
}

/// Maps a configuration of the default space (transformed values) to curve
/// parameters.
pub fn curve_params<T: Scalar>(space: &ConfigSpace, config: &HyperparameterConfig<T>) -> Result<CurveParams> {
    if config.dim() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: config.dim(),
        });
    }
    let get = |name: &str| -> Result<f64> {
        let i = space
            .index(name)
            .ok_or_else(|| Error::invalid(format!("configuration space lacks '{name}'")))?;
        Ok(config.values[i].as_f64())
    };
    let s_lr = (get("initial_lr")? + 4.0) / 2.0;
    let s_units = (get("average_units_per_layer")? - 16f64.log10()) / 16f64.log10();
    let s_layers = (get("num_layers")? - 1.0) / 4.0;
    let c_inf = 0.45 + 0.35 * (1.0 - s_lr * s_lr) + 0.1 * s_units + 0.05 * s_layers
        - 0.1 * (get("dropout_0")? + get("dropout_1")?)
        - 0.01 * (get("final_lr_fraction")? + 2.0);
    let lambda = 0.05 * 10f64.powf(0.8 * s_lr) * 10f64.powf(-0.3 * (get("batch_size")? - 1.8));
    Ok(CurveParams {
        c_0: 0.1,
        c_inf,
        lambda,
        alpha: 0.5 + get("shape_parameter_1")?,
    })
}

/// One curve of `spec.num_epochs` values for `config`.
pub fn generate_curve<T: Scalar>(
    id: impl Into<String>,
    space: &ConfigSpace,
    config: &HyperparameterConfig<T>,
    spec: &GeneratorSpec,
    rng: &mut Rng,
) -> Result<LearningCurve<T>> {
    spec.validate()?;
    let params = match spec.curve_family {
        CurveFamily::ExpSaturation => curve_params(space, config)?,
    };
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let values = (1..=spec.num_epochs)
        .map(|t| {
            let eps = if spec.noise_std > 0.0 { noise.sample(rng) } else { 0.0 };
            T::of((params.value(t) + eps).clamp(0.0, 1.0))
        })
        .collect();
    LearningCurve::new(id, config.clone(), values)
}

/// `spec.num_configs` curves named `synth-<family>-seed<seed>`, with ids
/// `cfg-00000`, `cfg-00001`, ...
pub fn generate_benchmark<T: Scalar>(space: &ConfigSpace, spec: &GeneratorSpec) -> Result<CurveDataset<T>> {
    spec.validate()?;
    let configs = sample_configs::<T>(space, spec.num_configs, spec.seed)?;
    let width = spec.num_configs.saturating_sub(1).to_string().len().max(5);
    let curves = configs
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| {
            let mut rng = derived_rng(spec.seed, &[Label::Str("noise"), Label::from(i)]);
            generate_curve(format!("cfg-{i:0width$}"), space, cfg, spec, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    CurveDataset::new(
        format!("synth-{}-seed{}", spec.curve_family.name(), spec.seed),
        space.names(),
        curves,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from as curve_rng;

    #[test]
    fn default_space_has_eight_params() {
        let s = ConfigSpace::default();
        s.validate().unwrap();
        assert_eq!(s.dim(), 8);
    }

    #[test]
    fn layers_are_integers_in_range() {
        let s = ConfigSpace::default();
        let i = s.index("num_layers").unwrap();
        let mut seen = [false; 5];
        for c in sample_configs::<f64>(&s, 2000, 3).unwrap() {
            let v = c.values[i];
            assert_eq!(v, v.round());
            assert!((1.0..=5.0).contains(&v));
            seen[v as usize - 1] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn log_integers_round_in_natural_scale() {
        let s = ConfigSpace::default();
        let i = s.index("batch_size").unwrap();
        for c in sample_configs::<f64>(&s, 500, 4).unwrap() {
            let natural = 10f64.powf(c.values[i]);
            assert!((natural - natural.round()).abs() < 1e-9);
            assert!((16.0 - 1e-9..=256.0 + 1e-9).contains(&natural));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = ConfigSpace::default();
        let a = sample_configs::<f64>(&s, 1, 9).unwrap();
        assert_eq!(a, sample_configs::<f64>(&s, 1, 9).unwrap());
        assert_ne!(a, sample_configs::<f64>(&s, 1, 10).unwrap());
        assert!(sample_configs::<f64>(&s, 0, 9).is_err());
    }

    #[test]
    fn noise_free_curves_rise_towards_the_asymptote() {
        let s = ConfigSpace::default();
        let spec = GeneratorSpec {
            noise_std: 0.0,
            ..GeneratorSpec::new(50, 200, 1)
        };
        for c in sample_configs::<f64>(&s, 50, 1).unwrap() {
            let p = curve_params(&s, &c).unwrap();
            assert!(p.c_inf > p.c_0 && p.c_inf <= 1.0);
            let curve = generate_curve("x", &s, &c, &spec, &mut curve_rng(0)).unwrap();
            assert!(curve.values.windows(2).all(|w| w[1] >= w[0]));
            assert!(curve.values.iter().all(|v| *v <= p.c_inf));
        }
    }

    #[test]
    fn identical_configs_give_identical_noise_free_curves() {
        let s = ConfigSpace::default();
        let spec = GeneratorSpec {
            noise_std: 0.0,
            ..GeneratorSpec::new(1, 20, 1)
        };
        let c = &sample_configs::<f64>(&s, 1, 2).unwrap()[0];
        let a = generate_curve("a", &s, c, &spec, &mut curve_rng(1)).unwrap();
        let b = generate_curve("a", &s, c, &spec, &mut curve_rng(2)).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn benchmark_shape_and_determinism() {
        let s = ConfigSpace::default();
        let spec = GeneratorSpec::new(10, 8, 5);
        let d = generate_benchmark::<f64>(&s, &spec).unwrap();
        assert_eq!(d.len(), 10);
        assert!(d.curves.iter().all(|c| c.len() == 8));
        assert!(d.curves.iter().flat_map(|c| &c.values).all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(d.name, "synth-exp_saturation-seed5");
        assert_eq!(d, generate_benchmark::<f64>(&s, &spec).unwrap());
        let other = generate_benchmark::<f64>(&s, &GeneratorSpec::new(10, 8, 6)).unwrap();
        assert_ne!(d.curves[0].values, other.curves[0].values);
    }

    #[test]
    fn noise_has_zero_mean() {
        let s = ConfigSpace::default();
        let spec = GeneratorSpec {
            noise_std: 0.01,
            ..GeneratorSpec::new(1, 10_000, 0)
        };
        let c = &sample_configs::<f64>(&s, 1, 0).unwrap()[0];
        let p = curve_params(&s, c).unwrap();
        let curve = generate_curve("x", &s, c, &spec, &mut curve_rng(8)).unwrap();
        let n = curve.len() as f64;
        let resid: f64 = curve.values.iter().enumerate().map(|(k, v)| v - p.value(k + 1)).sum::<f64>() / n;
        assert!(resid.abs() < 3.0 * 0.01 / n.sqrt(), "{resid}");
    }
}
