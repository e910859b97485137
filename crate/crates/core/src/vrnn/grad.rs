//! Teacher-forced sequence loss and its exact gradient by backpropagation
//! through time.

use crate::data::HyperparameterConfig;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{trace_sequence, DropoutMasks, VrnnModel};

/// Parameter-shaped gradient container.
pub type Gradients<T> = VrnnModel<T>;

/// Network inputs for teacher forcing: `[0, y_1, ..., y_{T-1}]`.
pub(crate) fn teacher_inputs<T: Scalar>(targets: &[T]) -> Vec<T> {
    std::iter::once(T::zero())
        .chain(targets[..targets.len() - 1].iter().copied())
        .collect()
}

/// Mean squared error of the teacher-forced predictions against
/// `targets = [y_1, ..., y_T]`.
pub fn sequence_loss<T: Scalar>(
    model: &VrnnModel<T>,
    config: &HyperparameterConfig<T>,
    targets: &[T],
    masks: &DropoutMasks<T>,
) -> Result<T> {
    if targets.is_empty() {
        return Err(Error::invalid("target sequence is empty"));
    }
    let preds = super::forward_sequence(model, config, &teacher_inputs(targets), masks)?;
    Ok(mse(&preds, targets))
}

fn mse<T: Scalar>(preds: &[T], targets: &[T]) -> T {
    let n = T::of_usize(targets.len());
    preds.iter().zip(targets).map(|(&p, &y)| (p - y) * (p - y)).sum::<T>() / n
}

/// Sequence MSE and its gradient with respect to every parameter.
///
/// Returns [`Error::NonFiniteLoss`] if the forward pass diverges.
pub fn loss_and_gradients<T: Scalar>(
    model: &VrnnModel<T>,
    config: &HyperparameterConfig<T>,
    targets: &[T],
    masks: &DropoutMasks<T>,
) -> Result<(T, Gradients<T>)> {
    if targets.is_empty() {
        return Err(Error::invalid("target sequence is empty"));
    }
    let trace = trace_sequence(model, config, &teacher_inputs(targets), masks)?;
    let loss = mse(&trace.outputs, targets);
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }

    let mut grad = model.zeros_like();
    let levels = model.levels.len();
    let hidden = model.hidden_size();
    let enc_width = model.arch.config_mlp_units;
    let scale = T::of(2.0) / T::of_usize(targets.len());

    let mut dh_next = vec![vec![T::zero(); hidden]; levels];
    let mut dc_next = vec![vec![T::zero(); hidden]; levels];
    let mut d_enc = vec![vec![T::zero(); enc_width]; levels];

    for t in (0..targets.len()).rev() {
        let dy = scale * (trace.outputs[t] - targets[t]);
        let mut from_above = model.head.backward(&trace.head[t], &[dy], &mut grad.head);
        for l in (0..levels).rev() {
            let dh: Vec<T> = from_above.iter().zip(&dh_next[l]).map(|(&a, &b)| a + b).collect();
            let (dx, dh_prev, dc_prev) =
                model.levels[l]
                    .lstm
                    .backward_step(&trace.lstm[t][l], &dh, &dc_next[l], &mut grad.levels[l].lstm);
            dh_next[l] = dh_prev;
            dc_next[l] = dc_prev;
            for (acc, &g) in d_enc[l].iter_mut().zip(&dx[..enc_width]) {
                *acc += g;
            }
            // level 0 receives y_{t-1} from below, which is data under teacher forcing
            from_above = dx[enc_width..].to_vec();
        }
    }

    for l in 0..levels {
        let d_out: Vec<T> = d_enc[l].iter().zip(&masks.levels[l]).map(|(&g, &z)| g * z).collect();
        model.levels[l]
            .encoder
            .backward(&trace.encoder_caches[l], &d_out, &mut grad.levels[l].encoder);
    }
    Ok((loss, grad))
}
