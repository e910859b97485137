//! Dense, MLP and LSTM building blocks with hand-written backward passes.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::seed::Rng;
use rand::Rng as _;

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn uniform_init<T: Scalar>(n: usize, fan_in: usize, rng: &mut Rng) -> Vec<T> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| T::of(rng.random_range(-bound..=bound))).collect()
}

/// Affine map `y = W x + b`, `W` stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn init(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        Self {
            inputs,
            outputs,
            weights: uniform_init(inputs * outputs, inputs, rng),
            bias: uniform_init(outputs, inputs, rng),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.inputs);
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (&w, &xi)| acc + w * xi))
            .collect()
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &[T], dy: &[T], grad: &mut Dense<T>) -> Vec<T> {
        let mut dx = vec![T::zero(); self.inputs];
        for (o, &d) in dy.iter().enumerate() {
            if d == T::zero() {
                continue;
            }
            grad.bias[o] += d;
            let row = o * self.inputs;
            for i in 0..self.inputs {
                grad.weights[row + i] += d * x[i];
                dx[i] += d * self.weights[row + i];
            }
        }
        dx
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

/// Feed-forward stack: tanh between layers, identity on the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpBlock<T> {
    pub layers: Vec<Dense<T>>,
}

/// Per-layer inputs and the block output of one MLP evaluation.
#[derive(Debug, Clone)]
pub(crate) struct MlpCache<T> {
    inputs: Vec<Vec<T>>,
    pub output: Vec<T>,
}

impl<T: Scalar> MlpBlock<T> {
    /// `dims = [input, hidden..., output]`.
    pub fn init(dims: &[usize], rng: &mut Rng) -> Self {
        Self {
            layers: dims.windows(2).map(|w| Dense::init(w[0], w[1], rng)).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty MLP").outputs
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        self.forward_cached(x).output
    }

    pub(crate) fn forward_cached(&self, x: &[T]) -> MlpCache<T> {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.forward(&a);
            if l < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            inputs.push(std::mem::replace(&mut a, z));
        }
        MlpCache { inputs, output: a }
    }

    /// Backpropagates `dy` through a cached evaluation; returns `dL/dx`.
    pub(crate) fn backward(&self, cache: &MlpCache<T>, dy: &[T], grad: &mut MlpBlock<T>) -> Vec<T> {
        let mut d = dy.to_vec();
        for l in (0..self.layers.len()).rev() {
            let dx = self.layers[l].backward(&cache.inputs[l], &d, &mut grad.layers[l]);
            if l > 0 {
                // cache.inputs[l] = tanh(pre-activation of layer l-1)
                d = dx
                    .iter()
                    .zip(&cache.inputs[l])
                    .map(|(&g, &a)| g * (T::one() - a * a))
                    .collect();
            } else {
                d = dx;
            }
        }
        d
    }

    pub(crate) fn params(&self) -> impl Iterator<Item = &[T]> {
        self.layers.iter().flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.layers.iter().all(Dense::is_finite)
    }
}

/// LSTM cell. Gate rows are stacked `[input, forget, candidate, output]`,
/// each `hidden` rows of width `inputs + hidden` (input then recurrent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmBlock<T> {
    pub inputs: usize,
    pub hidden: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Quantities of one LSTM step needed for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct LstmStepCache<T> {
    /// `[x, h_prev]`
    pub joint: Vec<T>,
    pub c_prev: Vec<T>,
    pub i: Vec<T>,
    pub f: Vec<T>,
    pub g: Vec<T>,
    pub o: Vec<T>,
    pub tanh_c: Vec<T>,
}

impl<T: Scalar> LstmBlock<T> {
    pub fn init(inputs: usize, hidden: usize, rng: &mut Rng) -> Self {
        let fan_in = inputs + hidden;
        Self {
            inputs,
            hidden,
            weights: uniform_init(4 * hidden * fan_in, fan_in, rng),
            bias: uniform_init(4 * hidden, fan_in, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            inputs: self.inputs,
            hidden: self.hidden,
            weights: vec![T::zero(); self.weights.len()],
            bias: vec![T::zero(); self.bias.len()],
        }
    }

    /// One step; returns `(h, c)`.
    pub fn step(&self, x: &[T], h_prev: &[T], c_prev: &[T]) -> (Vec<T>, Vec<T>) {
        let cache = self.step_cached(x, h_prev, c_prev);
        let h = cache.o.iter().zip(&cache.tanh_c).map(|(&o, &tc)| o * tc).collect();
        let c = cell(&cache);
        (h, c)
    }

    pub(crate) fn step_cached(&self, x: &[T], h_prev: &[T], c_prev: &[T]) -> LstmStepCache<T> {
        debug_assert_eq!(x.len(), self.inputs);
        let width = self.inputs + self.hidden;
        let mut joint = Vec::with_capacity(width);
        joint.extend_from_slice(x);
        joint.extend_from_slice(h_prev);
        let pre: Vec<T> = self
            .weights
            .chunks_exact(width)
            .zip(&self.bias)
            .map(|(row, &b)| row.iter().zip(&joint).fold(b, |acc, (&w, &v)| acc + w * v))
            .collect();
        let h = self.hidden;
        let i: Vec<T> = pre[..h].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<T> = pre[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<T> = pre[2 * h..3 * h].iter().map(|&v| v.tanh()).collect();
        let o: Vec<T> = pre[3 * h..].iter().map(|&v| sigmoid(v)).collect();
        let tanh_c = (0..h).map(|k| (f[k] * c_prev[k] + i[k] * g[k]).tanh()).collect();
        LstmStepCache {
            joint,
            c_prev: c_prev.to_vec(),
            i,
            f,
            g,
            o,
            tanh_c,
        }
    }

    /// Backward through one step given `dL/dh` and `dL/dc` flowing into
    /// this step's outputs. Accumulates into `grad`; returns
    /// `(dL/dx, dL/dh_prev, dL/dc_prev)`.
    pub(crate) fn backward_step(
        &self,
        cache: &LstmStepCache<T>,
        dh: &[T],
        dc_next: &[T],
        grad: &mut LstmBlock<T>,
    ) -> (Vec<T>, Vec<T>, Vec<T>) {
        let h = self.hidden;
        let width = self.inputs + h;
        let one = T::one();
        let mut da = vec![T::zero(); 4 * h];
        let mut dc_prev = vec![T::zero(); h];
        for k in 0..h {
            let (i, f, g, o, tc) = (cache.i[k], cache.f[k], cache.g[k], cache.o[k], cache.tanh_c[k]);
            let dc = dc_next[k] + dh[k] * o * (one - tc * tc);
            da[k] = dc * g * i * (one - i);
            da[h + k] = dc * cache.c_prev[k] * f * (one - f);
            da[2 * h + k] = dc * i * (one - g * g);
            da[3 * h + k] = dh[k] * tc * o * (one - o);
            dc_prev[k] = dc * f;
        }
        let mut djoint = vec![T::zero(); width];
        for (r, &d) in da.iter().enumerate() {
            grad.bias[r] += d;
            let row = r * width;
            for j in 0..width {
                grad.weights[row + j] += d * cache.joint[j];
                djoint[j] += d * self.weights[row + j];
            }
        }
        let dh_prev = djoint.split_off(self.inputs);
        (djoint, dh_prev, dc_prev)
    }

    pub(crate) fn params(&self) -> impl Iterator<Item = &[T]> {
        [self.weights.as_slice(), self.bias.as_slice()].into_iter()
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut [T]> {
        [self.weights.as_mut_slice(), self.bias.as_mut_slice()].into_iter()
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

pub(crate) fn cell<T: Scalar>(cache: &LstmStepCache<T>) -> Vec<T> {
    (0..cache.i.len())
        .map(|k| cache.f[k] * cache.c_prev[k] + cache.i[k] * cache.g[k])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    #[test]
    fn dense_matches_hand_product() {
        let d = Dense {
            inputs: 2,
            outputs: 2,
            weights: vec![1.0, 2.0, 3.0, 4.0],
            bias: vec![0.5, -0.5],
        };
        assert_eq!(d.forward(&[1.0, -1.0]), vec![-0.5, -1.5]);
    }

    #[test]
    fn mlp_output_layer_is_linear() {
        let mut rng = rng_from(0);
        let m: MlpBlock<f64> = MlpBlock::init(&[3, 4, 2], &mut rng);
        let x = [0.3, -0.2, 0.9];
        let hidden: Vec<f64> = m.layers[0].forward(&x).into_iter().map(f64::tanh).collect();
        assert_eq!(m.forward(&x), m.layers[1].forward(&hidden));
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let mut rng = rng_from(1);
        let l: LstmBlock<f64> = LstmBlock::init(5, 3, &mut rng);
        let bound = 1.0 / 8f64.sqrt();
        assert!(l.weights.iter().chain(&l.bias).all(|w| w.abs() <= bound));
        assert_eq!(l.weights.len(), 4 * 3 * 8);
    }

    #[test]
    fn lstm_zero_weights_give_zero_state() {
        let l = LstmBlock::<f64> {
            inputs: 2,
            hidden: 3,
            weights: vec![0.0; 4 * 3 * 5],
            bias: vec![0.0; 12],
        };
        let (h, c) = l.step(&[1.0, 2.0], &[0.0; 3], &[0.0; 3]);
        assert_eq!(h, vec![0.0; 3]);
        assert_eq!(c, vec![0.0; 3]);
    }
}
