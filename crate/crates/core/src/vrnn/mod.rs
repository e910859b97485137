//! Configuration-conditioned stacked LSTM with variational dropout.
//!
//! Level `l` of the stack owns a configuration encoder `enc_l` and an LSTM
//! `r_l`. With dropout masks `z_l` drawn once per sequence, one step reads
//!
//! ```text
//! input_0 = [enc_0(θ) ⊙ z_0, y_{t-1}]
//! input_l = [enc_l(θ) ⊙ z_l, h_{l-1,t}]        l > 0
//! ỹ_t     = head(h_{L-1,t})
//! ```
//!
//! Masks are raw Bernoulli(1 - d) draws with no rescaling, applied the same
//! way during training and at prediction time. LSTM states start at zero
//! and the first input is the dummy value `y_0 = 0`.

mod grad;
mod layers;
mod train;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::HyperparameterConfig;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::{rng_from, Rng};

pub use grad::{loss_and_gradients, sequence_loss, Gradients};
pub use layers::{Dense, LstmBlock, MlpBlock};
pub use train::{
    curriculum_length, learning_rate, mean_sequence_loss, train, EpochRecord, Scheduler, TrainingLog,
    VrnnTrainConfig,
};

pub(crate) use layers::{LstmStepCache, MlpCache};

/// Model file format version.
pub const FORMAT_VERSION: u32 = 1;

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VrnnArch {
    pub lstm_units: usize,
    /// Width of the hidden layers of the output head.
    pub mlp_units: usize,
    /// Width of the configuration encoders (their output is the conditioning vector).
    pub config_mlp_units: usize,
    /// Number of stacked levels (1 or 2).
    pub num_stacked_lstms: usize,
    /// Hidden tanh layers in the output head before its linear output.
    pub mlp_layers: usize,
    /// Dense layers in each configuration encoder; the last one is linear.
    pub config_mlp_layers: usize,
}

impl Default for VrnnArch {
    /// The tuned default architecture: 6 LSTM units, 103 head units,
    /// 115 encoder units, two stacked LSTMs, one layer per MLP.
    fn default() -> Self {
        Self {
            lstm_units: 6,
            mlp_units: 103,
            config_mlp_units: 115,
            num_stacked_lstms: 2,
            mlp_layers: 1,
            config_mlp_layers: 1,
        }
    }
}

impl VrnnArch {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lstm_units", self.lstm_units),
            ("mlp_units", self.mlp_units),
            ("config_mlp_units", self.config_mlp_units),
            ("mlp_layers", self.mlp_layers),
            ("config_mlp_layers", self.config_mlp_layers),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if !(1..=2).contains(&self.num_stacked_lstms) {
            return Err(Error::invalid(format!(
                "num_stacked_lstms must be 1 or 2, got {}",
                self.num_stacked_lstms
            )));
        }
        Ok(())
    }
}

/// One level of the stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VrnnLevel<T> {
    pub encoder: MlpBlock<T>,
    pub lstm: LstmBlock<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VrnnModel<T> {
    pub format_version: u32,
    pub arch: VrnnArch,
    pub config_dim: usize,
    pub dropout: f64,
    pub levels: Vec<VrnnLevel<T>>,
    pub head: MlpBlock<T>,
}

/// Builds a model with weights uniform in `±1/sqrt(fan_in)`.
pub fn init_model<T: Scalar>(config_dim: usize, arch: VrnnArch, dropout: f64, seed: u64) -> Result<VrnnModel<T>> {
    if config_dim == 0 {
        return Err(Error::invalid("config_dim must be positive"));
    }
    arch.validate()?;
    check_dropout(dropout)?;
    let mut rng = rng_from(seed);
    let enc_dims: Vec<usize> = std::iter::once(config_dim)
        .chain(std::iter::repeat_n(arch.config_mlp_units, arch.config_mlp_layers))
        .collect();
    let mut levels = Vec::with_capacity(arch.num_stacked_lstms);
    for l in 0..arch.num_stacked_lstms {
        let below = if l == 0 { 1 } else { arch.lstm_units };
        levels.push(VrnnLevel {
            encoder: MlpBlock::init(&enc_dims, &mut rng),
            lstm: LstmBlock::init(arch.config_mlp_units + below, arch.lstm_units, &mut rng),
        });
    }
    let head_dims: Vec<usize> = std::iter::once(arch.lstm_units)
        .chain(std::iter::repeat_n(arch.mlp_units, arch.mlp_layers))
        .chain(std::iter::once(1))
        .collect();
    let head = MlpBlock::init(&head_dims, &mut rng);
    Ok(VrnnModel {
        format_version: FORMAT_VERSION,
        arch,
        config_dim,
        dropout,
        levels,
        head,
    })
}

fn check_dropout(d: f64) -> Result<()> {
    if !(0.0..1.0).contains(&d) {
        return Err(Error::invalid(format!("dropout rate must lie in [0, 1), got {d}")));
    }
    Ok(())
}

impl<T: Scalar> VrnnModel<T> {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn hidden_size(&self) -> usize {
        self.arch.lstm_units
    }

    /// Structural and numeric consistency, used after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::data(format!(
                "unsupported model format version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.arch.validate()?;
        check_dropout(self.dropout)?;
        let reference: VrnnModel<T> = init_model(self.config_dim, self.arch, self.dropout, 0)?;
        let shapes = |m: &VrnnModel<T>| m.params().map(<[T]>::len).collect::<Vec<_>>();
        if shapes(self) != shapes(&reference) || self.levels.len() != reference.levels.len() {
            return Err(Error::data("model parameter shapes do not match its architecture"));
        }
        let dims_ok = self.levels.iter().zip(&reference.levels).all(|(a, b)| {
            a.lstm.inputs == b.lstm.inputs
                && a.lstm.hidden == b.lstm.hidden
                && a.encoder.layers.iter().zip(&b.encoder.layers).all(|(x, y)| (x.inputs, x.outputs) == (y.inputs, y.outputs))
        }) && self.head.layers.iter().zip(&reference.head.layers).all(|(x, y)| (x.inputs, x.outputs) == (y.inputs, y.outputs));
        if !dims_ok {
            return Err(Error::data("model layer dimensions do not match its architecture"));
        }
        if !self.is_finite() {
            return Err(Error::data("model contains non-finite parameters"));
        }
        Ok(())
    }

    /// All parameter arrays in a fixed order.
    pub fn params(&self) -> impl Iterator<Item = &[T]> {
        self.levels
            .iter()
            .flat_map(|l| l.encoder.params().chain(l.lstm.params()))
            .chain(self.head.params())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut [T]> {
        self.levels
            .iter_mut()
            .flat_map(|l| l.encoder.params_mut().chain(l.lstm.params_mut()))
            .chain(self.head.params_mut())
    }

    pub fn num_params(&self) -> usize {
        self.params().map(<[T]>::len).sum()
    }

    /// Same architecture with every parameter zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            format_version: self.format_version,
            arch: self.arch,
            config_dim: self.config_dim,
            dropout: self.dropout,
            levels: self
                .levels
                .iter()
                .map(|l| VrnnLevel {
                    encoder: l.encoder.zeros_like(),
                    lstm: l.lstm.zeros_like(),
                })
                .collect(),
            head: self.head.zeros_like(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.levels.iter().all(|l| l.encoder.is_finite() && l.lstm.is_finite()) && self.head.is_finite()
    }

    fn check_config(&self, config: &HyperparameterConfig<T>) -> Result<()> {
        if config.dim() != self.config_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config_dim,
                got: config.dim(),
            });
        }
        Ok(())
    }

    fn check_masks(&self, masks: &DropoutMasks<T>) -> Result<()> {
        let ok = masks.levels.len() == self.levels.len()
            && masks.levels.iter().all(|z| z.len() == self.arch.config_mlp_units);
        if !ok {
            return Err(Error::invalid("dropout masks do not match the model"));
        }
        Ok(())
    }

    /// Masked encodings `enc_l(θ) ⊙ z_l` for a sequence.
    pub fn condition(&self, config: &HyperparameterConfig<T>, masks: &DropoutMasks<T>) -> Result<Conditioning<T>> {
        self.check_config(config)?;
        self.check_masks(masks)?;
        Ok(self.condition_cached(config, masks).0)
    }

    pub(crate) fn condition_cached(
        &self,
        config: &HyperparameterConfig<T>,
        masks: &DropoutMasks<T>,
    ) -> (Conditioning<T>, Vec<MlpCache<T>>) {
        let caches: Vec<MlpCache<T>> = self
            .levels
            .iter()
            .map(|l| l.encoder.forward_cached(&config.values))
            .collect();
        let encodings = caches
            .iter()
            .zip(&masks.levels)
            .map(|(c, z)| c.output.iter().zip(z).map(|(&h, &m)| h * m).collect())
            .collect();
        (Conditioning { encodings }, caches)
    }

    /// One recurrent step from conditioned encodings. Advances `state` and
    /// returns the prediction for the next epoch.
    pub fn step(&self, cond: &Conditioning<T>, prev_y: T, state: &mut RecurrentState<T>) -> T {
        let mut below = vec![prev_y];
        for (l, level) in self.levels.iter().enumerate() {
            let mut input = cond.encodings[l].clone();
            input.extend_from_slice(&below);
            let (h, c) = level.lstm.step(&input, &state.h[l], &state.c[l]);
            state.c[l] = c;
            state.h[l] = h;
            below.clone_from(&state.h[l]);
        }
        self.head.forward(&below)[0]
    }

    pub fn zero_state(&self) -> RecurrentState<T> {
        RecurrentState::zeros(self.levels.len(), self.hidden_size())
    }
}

/// Per-level binary dropout masks over the encoder outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropoutMasks<T> {
    pub levels: Vec<Vec<T>>,
}

impl<T: Scalar> DropoutMasks<T> {
    pub fn ones(model: &VrnnModel<T>) -> Self {
        Self {
            levels: vec![vec![T::one(); model.arch.config_mlp_units]; model.levels.len()],
        }
    }
}

/// Draws every mask entry independently: 1 with probability `1 - d`.
pub fn sample_masks<T: Scalar>(model: &VrnnModel<T>, rng: &mut Rng) -> DropoutMasks<T> {
    let d = model.dropout;
    let levels = (0..model.levels.len())
        .map(|_| {
            (0..model.arch.config_mlp_units)
                .map(|_| {
                    if d == 0.0 || rng.random::<f64>() >= d {
                        T::one()
                    } else {
                        T::zero()
                    }
                })
                .collect()
        })
        .collect();
    DropoutMasks { levels }
}

/// Masked configuration encodings, fixed for the duration of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioning<T> {
    pub encodings: Vec<Vec<T>>,
}

/// LSTM hidden and cell states of every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentState<T> {
    pub h: Vec<Vec<T>>,
    pub c: Vec<Vec<T>>,
}

impl<T: Scalar> RecurrentState<T> {
    pub fn zeros(levels: usize, hidden: usize) -> Self {
        Self {
            h: vec![vec![T::zero(); hidden]; levels],
            c: vec![vec![T::zero(); hidden]; levels],
        }
    }
}

/// Runs the network over `inputs = [y_0, ..., y_{T-1}]` and returns
/// `[ỹ_1, ..., ỹ_T]`.
pub fn forward_sequence<T: Scalar>(
    model: &VrnnModel<T>,
    config: &HyperparameterConfig<T>,
    inputs: &[T],
    masks: &DropoutMasks<T>,
) -> Result<Vec<T>> {
    if inputs.is_empty() {
        return Err(Error::invalid("input sequence is empty"));
    }
    let cond = model.condition(config, masks)?;
    let mut state = model.zero_state();
    Ok(inputs.iter().map(|&y| model.step(&cond, y, &mut state)).collect())
}

/// One MC-dropout step: conditions on `config` under `masks` and advances
/// `state` by feeding `prev_y`.
pub fn mc_rollout_step<T: Scalar>(
    model: &VrnnModel<T>,
    config: &HyperparameterConfig<T>,
    prev_y: T,
    state: &RecurrentState<T>,
    masks: &DropoutMasks<T>,
) -> Result<(T, RecurrentState<T>)> {
    let cond = model.condition(config, masks)?;
    if state.h.len() != model.num_levels() || state.h.iter().chain(&state.c).any(|v| v.len() != model.hidden_size()) {
        return Err(Error::invalid("recurrent state does not match the model"));
    }
    let mut next = state.clone();
    let y = model.step(&cond, prev_y, &mut next);
    Ok((y, next))
}

/// Every intermediate of a forward pass over one sequence.
#[derive(Debug, Clone)]
pub struct SequenceTrace<T> {
    pub(crate) encoder_caches: Vec<MlpCache<T>>,
    pub(crate) conditioning: Conditioning<T>,
    /// `lstm[t][l]`
    pub(crate) lstm: Vec<Vec<LstmStepCache<T>>>,
    pub(crate) head: Vec<MlpCache<T>>,
    pub outputs: Vec<T>,
}

impl<T: Scalar> SequenceTrace<T> {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Input vector fed to the LSTM of `level` at step `t` (0-based):
    /// the masked encoding followed by the value from below.
    pub fn lstm_input(&self, t: usize, level: usize) -> &[T] {
        let cache = &self.lstm[t][level];
        &cache.joint[..cache.joint.len() - cache.i.len()]
    }

    pub fn conditioning(&self) -> &Conditioning<T> {
        &self.conditioning
    }
}

/// [`forward_sequence`] that keeps every intermediate value.
pub fn trace_sequence<T: Scalar>(
    model: &VrnnModel<T>,
    config: &HyperparameterConfig<T>,
    inputs: &[T],
    masks: &DropoutMasks<T>,
) -> Result<SequenceTrace<T>> {
    if inputs.is_empty() {
        return Err(Error::invalid("input sequence is empty"));
    }
    model.check_config(config)?;
    model.check_masks(masks)?;
    let (conditioning, encoder_caches) = model.condition_cached(config, masks);
    let mut state = model.zero_state();
    let mut lstm = Vec::with_capacity(inputs.len());
    let mut head = Vec::with_capacity(inputs.len());
    let mut outputs = Vec::with_capacity(inputs.len());
    for &y in inputs {
        let mut below = vec![y];
        let mut step_caches = Vec::with_capacity(model.levels.len());
        for (l, level) in model.levels.iter().enumerate() {
            let mut input = conditioning.encodings[l].clone();
            input.extend_from_slice(&below);
            let cache = level.lstm.step_cached(&input, &state.h[l], &state.c[l]);
            state.c[l] = layers::cell(&cache);
            state.h[l] = cache.o.iter().zip(&cache.tanh_c).map(|(&o, &tc)| o * tc).collect();
            below.clone_from(&state.h[l]);
            step_caches.push(cache);
        }
        let h = model.head.forward_cached(&below);
        outputs.push(h.output[0]);
        head.push(h);
        lstm.push(step_caches);
    }
    Ok(SequenceTrace {
        encoder_caches,
        conditioning,
        lstm,
        head,
        outputs,
    })
}
