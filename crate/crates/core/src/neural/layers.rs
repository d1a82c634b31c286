//! Batched layers with hand-written backward passes.
//!
//! A [`Batch`] holds `B` sequences of `steps` positions with `channels`
//! values each, stored sample-major as a `(B·steps) × channels` matrix.
//! Dense layers see `steps = 1`.

use ndarray::{s, Array2, Axis, Zip};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "sigmoid" => Some(Activation::Sigmoid),
            _ => None,
        }
    }

    fn apply_inplace(self, a: &mut Array2<f64>) {
        match self {
            Activation::Relu => a.mapv_inplace(|v| v.max(0.0)),
            Activation::Sigmoid => a.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp())),
        }
    }

    /// `dout ⊙ f'(·)` with the derivative expressed through the output `y`,
    /// written over `dout`.
    fn scale_by_slope(self, dout: &mut Array2<f64>, y: &Array2<f64>) {
        match self {
            Activation::Relu => Zip::from(dout).and(y).for_each(|d, &y| {
                if y <= 0.0 {
                    *d = 0.0;
                }
            }),
            Activation::Sigmoid => Zip::from(dout).and(y).for_each(|d, &y| *d *= y * (1.0 - y)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub data: Array2<f64>,
    pub steps: usize,
}

impl Batch {
    pub fn new(data: Array2<f64>, steps: usize) -> Result<Self> {
        if steps == 0 || data.nrows() % steps != 0 {
            return Err(Error::DimensionMismatch { expected: steps.max(1), got: data.nrows() });
        }
        Ok(Batch { data, steps })
    }

    /// Each row of `rows` becomes a sequence of scalar inputs.
    pub fn from_rows_as_sequences(rows: &Array2<f64>) -> Self {
        let (b, d) = rows.dim();
        let data = rows.as_standard_layout().into_owned().into_shape_with_order((b * d, 1)).expect("contiguous");
        Batch { data, steps: d }
    }

    pub fn batch_size(&self) -> usize {
        self.data.nrows() / self.steps
    }

    pub fn channels(&self) -> usize {
        self.data.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// `x·w + b` with `w: in × out`, `b: 1 × out`.
    Dense { w: Array2<f64>, b: Array2<f64> },
    /// Valid cross-correlation, stride 1. `kernel` is `(width·c_in) × filters`,
    /// row `k·c_in + c` holding tap `k` of input channel `c`.
    Conv1d { width: usize, kernel: Array2<f64>, b: Array2<f64> },
    /// Non-overlapping max over `window` steps; the trailing remainder is dropped.
    MaxPool { window: usize },
    /// `S_t = f(S_{t-1}·w + x_t·u + b)` from `S_0 = 0`; emits the final state.
    Recurrent { u: Array2<f64>, w: Array2<f64>, b: Array2<f64>, activation: Activation },
    Activation(Activation),
    /// Inverted dropout, active only in training mode.
    Dropout { rate: f64 },
    /// `steps × channels` per sample to one step of `steps·channels`.
    Flatten,
}

/// Values saved by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct Cache(CacheInner);

#[derive(Debug, Clone)]
enum CacheInner {
    Dense { x: Array2<f64> },
    Conv { cols: Array2<f64>, batch: usize, steps_in: usize, channels_in: usize },
    Pool { source: Vec<usize>, rows_in: usize },
    Recurrent { x: Array2<f64>, states: Vec<Array2<f64>> },
    Activation(SavedActivation),
    Dropout { mask: Option<Array2<f64>> },
    Flatten { steps: usize, channels: usize },
}

/// What an activation keeps for its backward pass. ReLU only needs the
/// sign of each output.
#[derive(Debug, Clone)]
enum SavedActivation {
    Positive(Vec<bool>),
    Output(Array2<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Dense { .. } => "dense",
            Layer::Conv1d { .. } => "conv1d",
            Layer::MaxPool { .. } => "maxpool",
            Layer::Recurrent { .. } => "recurrent",
            Layer::Activation(_) => "activation",
            Layer::Dropout { .. } => "dropout",
            Layer::Flatten => "flatten",
        }
    }

    pub fn params(&self) -> Vec<&Array2<f64>> {
        match self {
            Layer::Dense { w, b } => vec![w, b],
            Layer::Conv1d { kernel, b, .. } => vec![kernel, b],
            Layer::Recurrent { u, w, b, .. } => vec![u, w, b],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        match self {
            Layer::Dense { w, b } => vec![w, b],
            Layer::Conv1d { kernel, b, .. } => vec![kernel, b],
            Layer::Recurrent { u, w, b, .. } => vec![u, w, b],
            _ => Vec::new(),
        }
    }

    /// Per-sample output shape `(steps, channels)` for a given input shape.
    pub fn output_shape(&self, (steps, channels): (usize, usize)) -> Result<(usize, usize)> {
        let check_channels = |expected: usize| {
            if channels != expected {
                Err(Error::DimensionMismatch { expected, got: channels })
            } else {
                Ok(())
            }
        };
        match self {
            Layer::Dense { w, .. } => {
                check_channels(w.nrows())?;
                if steps != 1 {
                    return Err(Error::DimensionMismatch { expected: 1, got: steps });
                }
                Ok((1, w.ncols()))
            }
            Layer::Conv1d { width, kernel, .. } => {
                check_channels(kernel.nrows() / width)?;
                if steps < *width {
                    return Err(Error::InputTooShort {
                        length: steps,
                        reason: format!("convolution of width {width}"),
                    });
                }
                Ok((steps - width + 1, kernel.ncols()))
            }
            Layer::MaxPool { window } => {
                if steps / window == 0 {
                    return Err(Error::InputTooShort {
                        length: steps,
                        reason: format!("pooling window {window}"),
                    });
                }
                Ok((steps / window, channels))
            }
            Layer::Recurrent { u, w, .. } => {
                check_channels(u.nrows())?;
                Ok((1, w.ncols()))
            }
            Layer::Activation(_) | Layer::Dropout { .. } => Ok((steps, channels)),
            Layer::Flatten => Ok((1, steps * channels)),
        }
    }

    pub fn forward(&self, input: &Batch, mode: Mode, rng: &mut Rng) -> Result<(Batch, Cache)> {
        let (steps_out, _) = self.output_shape((input.steps, input.channels()))?;
        let x = input.data.as_standard_layout();
        let batch = input.batch_size();
        let (data, cache) = match self {
            Layer::Dense { w, b } => (x.dot(w) + b, CacheInner::Dense { x: x.into_owned() }),
            Layer::Conv1d { width, kernel, b } => {
                let cols = im2col(x.view().to_owned(), batch, input.steps, *width);
                let out = cols.dot(kernel) + b;
                let cache = CacheInner::Conv {
                    cols,
                    batch,
                    steps_in: input.steps,
                    channels_in: input.channels(),
                };
                (out, cache)
            }
            Layer::MaxPool { window } => {
                let c = input.channels();
                let flat = x.as_slice().expect("standard layout");
                let mut out = Vec::with_capacity(batch * steps_out * c);
                let mut source = Vec::with_capacity(batch * steps_out * c);
                for bi in 0..batch {
                    for t in 0..steps_out {
                        let first = bi * input.steps + t * window;
                        let base = &flat[first * c..(first + 1) * c];
                        out.extend_from_slice(base);
                        source.extend(std::iter::repeat_n(first, c));
                        let at = out.len() - c;
                        for r in first + 1..first + window {
                            let row = &flat[r * c..(r + 1) * c];
                            for ((o, src), &v) in out[at..].iter_mut().zip(&mut source[at..]).zip(row) {
                                if v > *o {
                                    *o = v;
                                    *src = r;
                                }
                            }
                        }
                    }
                }
                let out = Array2::from_shape_vec((batch * steps_out, c), out).expect("sized above");
                (out, CacheInner::Pool { source, rows_in: x.nrows() })
            }
            Layer::Recurrent { u, w, b, activation } => {
                let t_len = input.steps;
                let xu = x.dot(u);
                let mut states = Vec::with_capacity(t_len + 1);
                states.push(Array2::zeros((batch, w.ncols())));
                for t in 0..t_len {
                    let mut pre = states[t].dot(w) + xu.slice(s![t..;t_len, ..]) + b;
                    activation.apply_inplace(&mut pre);
                    states.push(pre);
                }
                let last = states[t_len].clone();
                (last, CacheInner::Recurrent { x: x.into_owned(), states })
            }
            Layer::Activation(a) => {
                let mut y = x.into_owned();
                a.apply_inplace(&mut y);
                let saved = match a {
                    Activation::Relu => SavedActivation::Positive(y.iter().map(|&v| v > 0.0).collect()),
                    Activation::Sigmoid => SavedActivation::Output(y.clone()),
                };
                (y, CacheInner::Activation(saved))
            }
            Layer::Dropout { rate } => {
                if mode == Mode::Train && *rate > 0.0 {
                    let keep = 1.0 - rate;
                    let mask = Array2::from_shape_simple_fn(x.dim(), || {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    (&x * &mask, CacheInner::Dropout { mask: Some(mask) })
                } else {
                    (x.into_owned(), CacheInner::Dropout { mask: None })
                }
            }
            Layer::Flatten => {
                let c = input.channels();
                let flat = x
                    .into_owned()
                    .into_shape_with_order((batch, input.steps * c))
                    .expect("standard layout");
                (flat, CacheInner::Flatten { steps: input.steps, channels: c })
            }
        };
        Ok((Batch { data, steps: steps_out }, Cache(cache)))
    }

    /// Returns the gradient with respect to the input and one gradient per
    /// entry of [`Layer::params`], in the same order.
    pub fn backward(&self, cache: &Cache, dout: &Array2<f64>) -> (Array2<f64>, Vec<Array2<f64>>) {
        let (dx, grads) = self.backward_inner(cache, dout, true);
        (dx.expect("input gradient requested"), grads)
    }

    /// Parameter gradients only, for a layer whose input is the data.
    pub(crate) fn param_gradients(&self, cache: &Cache, dout: &Array2<f64>) -> Vec<Array2<f64>> {
        self.backward_inner(cache, dout, false).1
    }

    fn backward_inner(
        &self,
        cache: &Cache,
        dout: &Array2<f64>,
        input_grad: bool,
    ) -> (Option<Array2<f64>>, Vec<Array2<f64>>) {
        match (self, &cache.0) {
            (Layer::Dense { w, .. }, CacheInner::Dense { x }) => {
                let dw = x.t().dot(dout);
                let db = dout.sum_axis(Axis(0)).insert_axis(Axis(0));
                (input_grad.then(|| dout.dot(&w.t())), vec![dw, db])
            }
            (Layer::Conv1d { width, kernel, .. }, CacheInner::Conv { cols, batch, steps_in, channels_in }) => {
                let dk = cols.t().dot(dout);
                let db = dout.sum_axis(Axis(0)).insert_axis(Axis(0));
                if !input_grad {
                    return (None, vec![dk, db]);
                }
                let dcols = dout.dot(&kernel.t());
                let steps_out = steps_in - width + 1;
                let mut dx = Array2::zeros((batch * steps_in, *channels_in));
                {
                    let dx_flat = dx.as_slice_mut().expect("fresh array");
                    let span = width * channels_in;
                    for bi in 0..*batch {
                        for t in 0..steps_out {
                            let src = dcols.row(bi * steps_out + t);
                            let start = (bi * steps_in + t) * channels_in;
                            for (d, s) in dx_flat[start..start + span].iter_mut().zip(src.iter()) {
                                *d += s;
                            }
                        }
                    }
                }
                (Some(dx), vec![dk, db])
            }
            (Layer::MaxPool { .. }, CacheInner::Pool { source, rows_in }) => {
                let c = dout.ncols();
                let mut dx = vec![0.0; rows_in * c];
                let g = dout.as_standard_layout();
                for (i, (&r, &v)) in source.iter().zip(g.iter()).enumerate() {
                    dx[r * c + i % c] += v;
                }
                (Some(Array2::from_shape_vec((*rows_in, c), dx).expect("sized above")), Vec::new())
            }
            (Layer::Recurrent { u, w, activation, .. }, CacheInner::Recurrent { x, states }) => {
                let t_len = states.len() - 1;
                let h = w.ncols();
                // rows ordered like the input: sample-major, then step
                let mut dz_all = Array2::zeros((x.nrows(), h));
                let mut prev_all = Array2::zeros((x.nrows(), h));
                let mut ds = dout.to_owned();
                for t in (0..t_len).rev() {
                    activation.scale_by_slope(&mut ds, &states[t + 1]);
                    dz_all.slice_mut(s![t..;t_len, ..]).assign(&ds);
                    prev_all.slice_mut(s![t..;t_len, ..]).assign(&states[t]);
                    if t > 0 {
                        ds = ds.dot(&w.t());
                    }
                }
                let dw = prev_all.t().dot(&dz_all);
                let db = dz_all.sum_axis(Axis(0)).insert_axis(Axis(0));
                let du = x.t().dot(&dz_all);
                (input_grad.then(|| dz_all.dot(&u.t())), vec![du, dw, db])
            }
            (Layer::Activation(_), CacheInner::Activation(saved)) => {
                let mut dx = dout.as_standard_layout().into_owned();
                match saved {
                    SavedActivation::Positive(positive) => {
                        for (d, &keep) in dx.iter_mut().zip(positive) {
                            if !keep {
                                *d = 0.0;
                            }
                        }
                    }
                    SavedActivation::Output(y) => Zip::from(&mut dx).and(y).for_each(|d, &y| *d *= y * (1.0 - y)),
                }
                (Some(dx), Vec::new())
            }
            (Layer::Dropout { .. }, CacheInner::Dropout { mask }) => match mask {
                Some(m) => (Some(dout * m), Vec::new()),
                None => (Some(dout.to_owned()), Vec::new()),
            },
            (Layer::Flatten, CacheInner::Flatten { steps, channels }) => {
                let b = dout.nrows();
                let dx = dout
                    .as_standard_layout()
                    .into_owned()
                    .into_shape_with_order((b * steps, *channels))
                    .expect("standard layout");
                (Some(dx), Vec::new())
            }
            _ => panic!("cache does not belong to a {} layer", self.kind()),
        }
    }
}

/// States `S_0..S_T` saved by a recurrent forward pass.
pub(crate) fn recurrent_states(cache: &Cache) -> Option<&[Array2<f64>]> {
    match &cache.0 {
        CacheInner::Recurrent { states, .. } => Some(states),
        _ => None,
    }
}

/// Windows of `width` consecutive steps, each flattened into one row.
fn im2col(x: Array2<f64>, batch: usize, steps: usize, width: usize) -> Array2<f64> {
    let c = x.ncols();
    let steps_out = steps - width + 1;
    let span = width * c;
    let flat = x.as_slice().expect("standard layout");
    let mut cols = Vec::with_capacity(batch * steps_out * span);
    for bi in 0..batch {
        for t in 0..steps_out {
            let start = (bi * steps + t) * c;
            cols.extend_from_slice(&flat[start..start + span]);
        }
    }
    Array2::from_shape_vec((batch * steps_out, span), cols).expect("sized above")
}

/// Mean cross-entropy of row-wise softmax over `logits`, with the gradient
/// with respect to the logits. Probabilities are clamped at `1e-12` inside
/// the logarithm.
pub fn softmax_cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let n = logits.nrows() as f64;
    let mut grad = logits.to_owned();
    let mut loss = 0.0;
    for (mut row, &y) in grad.axis_iter_mut(Axis(0)).zip(labels) {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|z| (z - m).exp());
        let sum = row.sum();
        row.mapv_inplace(|e| e / sum);
        loss -= row[y].max(1e-12).ln();
        row[y] -= 1.0;
    }
    grad /= n;
    (loss / n, grad)
}

/// Glorot-uniform matrix, bound `√(6 / (fan_in + fan_out))`.
pub fn glorot(rows: usize, cols: usize, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Array2<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}
