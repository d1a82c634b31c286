//! Small neural network stack: batched dense, conv1d, pooling and
//! recurrent layers with manual backward passes, trained with Adam.
//!
//! The functions in this file are single-sample conveniences over the
//! batched layers in [`layers`].

pub mod gradcheck;
pub mod layers;
mod network;

pub use layers::{Activation, Batch, Layer, Mode};
pub use network::{build_network, net_proba, train, Architecture, NetworkConfig, TrainedNetwork};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Dense row-major array of arbitrary rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(Error::LengthMismatch { left: expected, right: values.len() });
        }
        Ok(Tensor { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, values: vec![0.0; n] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, index: &[usize]) -> Option<f64> {
        if index.len() != self.shape.len() || index.iter().zip(&self.shape).any(|(i, n)| i >= n) {
            return None;
        }
        let flat = index.iter().zip(&self.shape).fold(0, |acc, (i, n)| acc * n + i);
        Some(self.values[flat])
    }

    fn to_matrix(&self) -> Result<Array2<f64>> {
        match self.shape[..] {
            [r, c] => Ok(Array2::from_shape_vec((r, c), self.values.clone()).expect("checked in new")),
            _ => Err(Error::DimensionMismatch { expected: 2, got: self.shape.len() }),
        }
    }

    fn from_matrix(m: &Array2<f64>) -> Self {
        Tensor { shape: vec![m.nrows(), m.ncols()], values: m.iter().copied().collect() }
    }
}

pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::EmptyInput);
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    Ok(e.into_iter().map(|v| v / s).collect())
}

/// `−ln p[true_class]` with `p` clamped below at `1e-12`.
pub fn cross_entropy(probs: &[f64], true_class: usize) -> Result<f64> {
    let p = probs.get(true_class).ok_or(Error::IndexOutOfRange { index: true_class, len: probs.len() })?;
    Ok(-p.max(1e-12).ln())
}

/// Valid cross-correlation of an `L × C` input with `K × w × C` kernels.
pub fn conv1d(input: &Tensor, kernels: &Tensor, bias: &[f64]) -> Result<Tensor> {
    let x = input.to_matrix()?;
    let [k, w, c] = kernels.shape[..] else {
        return Err(Error::DimensionMismatch { expected: 3, got: kernels.shape.len() });
    };
    if c != x.ncols() {
        return Err(Error::DimensionMismatch { expected: c, got: x.ncols() });
    }
    if bias.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: bias.len() });
    }
    let kernel = Array2::from_shape_fn((w * c, k), |(row, f)| kernels.values[(f * w + row / c) * c + row % c]);
    let layer = Layer::Conv1d { width: w, kernel, b: Array2::from_shape_vec((1, k), bias.to_vec()).expect("length k") };
    let steps = x.nrows();
    if steps < w {
        return Err(Error::InputTooShort { length: steps, reason: format!("kernel width {w}") });
    }
    let (out, _) = layer.forward(&Batch::new(x, steps)?, Mode::Infer, &mut seeded(0))?;
    Ok(Tensor::from_matrix(&out.data))
}

/// Non-overlapping max over windows of an `L × K` input.
pub fn maxpool1d(input: &Tensor, window: usize) -> Result<Tensor> {
    if window == 0 {
        return Err(Error::InvalidParameter("pooling window must be at least 1".into()));
    }
    let x = input.to_matrix()?;
    let steps = x.nrows();
    if steps / window == 0 {
        return Ok(Tensor::zeros(vec![0, x.ncols()]));
    }
    let (out, _) = Layer::MaxPool { window }.forward(&Batch::new(x, steps)?, Mode::Infer, &mut seeded(0))?;
    Ok(Tensor::from_matrix(&out.data))
}

/// Parameters of an Elman recurrence `S_t = f(W·S_{t−1} + U·x_t + b)` with
/// output head `O = V·S_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnParams {
    /// `hidden × hidden`
    pub w: Array2<f64>,
    /// `hidden × input`
    pub u: Array2<f64>,
    pub b: Array1<f64>,
    /// `output × hidden`
    pub v: Array2<f64>,
}

impl RnnParams {
    pub fn new(w: Array2<f64>, u: Array2<f64>, b: Array1<f64>, v: Array2<f64>) -> Result<Self> {
        let h = w.nrows();
        for (expected, got) in [(h, w.ncols()), (h, u.nrows()), (h, b.len()), (h, v.ncols())] {
            if expected != got {
                return Err(Error::DimensionMismatch { expected, got });
            }
        }
        Ok(RnnParams { w, u, b, v })
    }

    /// Glorot-uniform matrices and a zero bias.
    pub fn init(input: usize, hidden: usize, output: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        RnnParams {
            w: layers::glorot(hidden, hidden, hidden, hidden, &mut rng),
            u: layers::glorot(hidden, input, input, hidden, &mut rng),
            b: Array1::zeros(hidden),
            v: layers::glorot(output, hidden, hidden, output, &mut rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w.nrows()
    }

    pub(crate) fn as_layer(&self, activation: Activation) -> Layer {
        Layer::Recurrent {
            u: self.u.t().to_owned(),
            w: self.w.t().to_owned(),
            b: self.b.clone().insert_axis(ndarray::Axis(0)),
            activation,
        }
    }
}

/// Runs the ReLU recurrence over a `T × input` sequence from a zero state.
/// Returns every state as a `T × hidden` tensor, and the final state.
pub fn rnn_forward(params: &RnnParams, sequence: &Tensor) -> Result<(Tensor, Vec<f64>)> {
    let x = sequence.to_matrix()?;
    if x.ncols() != params.u.ncols() {
        return Err(Error::DimensionMismatch { expected: params.u.ncols(), got: x.ncols() });
    }
    let h = params.hidden();
    let t_len = x.nrows();
    if t_len == 0 {
        return Ok((Tensor::zeros(vec![0, h]), vec![0.0; h]));
    }
    let layer = params.as_layer(Activation::Relu);
    let (last, cache) = layer.forward(&Batch::new(x, t_len)?, Mode::Infer, &mut seeded(0))?;
    let states = layers::recurrent_states(&cache).expect("recurrent cache");
    let mut all = Vec::with_capacity(t_len * h);
    for s in &states[1..] {
        all.extend(s.iter().copied());
    }
    Ok((Tensor::new(vec![t_len, h], all)?, last.data.iter().copied().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ColumnGroup, SeverityLevel};
    use crate::{Classifier, EncodedMatrix};
    use rand::Rng as _;

    fn t2(rows: usize, cols: usize, v: &[f64]) -> Tensor {
        Tensor::new(vec![rows, cols], v.to_vec()).unwrap()
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0; 4]).unwrap(), vec![0.25; 4]);
        let p = softmax(&[0.0, 3f64.ln()]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-12 && (p[1] - 0.75).abs() < 1e-12);
        let a = softmax(&[1.0, -2.0, 0.5]).unwrap();
        let b = softmax(&[101.0, 98.0, 100.5]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(matches!(softmax(&[f64::NAN]), Err(Error::NonFiniteInput)));
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&[0.0, 1.0, 0.0, 0.0], 1).unwrap(), 0.0);
        assert!((cross_entropy(&[0.25; 4], 3).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert!((cross_entropy(&[1.0, 1e-30], 1).unwrap() + 1e-12f64.ln()).abs() < 1e-12);
        assert!(matches!(cross_entropy(&[1.0], 1), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn conv1d_examples() {
        let input = t2(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let kernel = Tensor::new(vec![1, 3, 1], vec![1.0, 0.0, -1.0]).unwrap();
        let out = conv1d(&input, &kernel, &[0.0]).unwrap();
        assert_eq!(out.shape(), &[2, 1]);
        assert_eq!(out.values(), &[-2.0, -2.0]);

        let zero = Tensor::zeros(vec![2, 3, 1]);
        let out = conv1d(&input, &zero, &[5.0, 5.0]).unwrap();
        assert!(out.values().iter().all(|&v| v == 5.0));

        let full = Tensor::new(vec![1, 4, 1], vec![1.0; 4]).unwrap();
        assert_eq!(conv1d(&input, &full, &[0.0]).unwrap().values(), &[10.0]);

        let long = Tensor::zeros(vec![1, 5, 1]);
        assert!(matches!(conv1d(&input, &long, &[0.0]), Err(Error::InputTooShort { .. })));
    }

    #[test]
    fn conv1d_multichannel_layout() {
        // two input channels, one filter: tap 0 reads channel 1, tap 1 reads channel 0
        let input = t2(3, 2, &[1.0, 10.0, 2.0, 20.0, 3.0, 30.0]);
        let kernel = Tensor::new(vec![1, 2, 2], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(conv1d(&input, &kernel, &[0.0]).unwrap().values(), &[12.0, 23.0]);
    }

    #[test]
    fn maxpool_examples() {
        assert_eq!(maxpool1d(&t2(4, 1, &[1.0, 3.0, 2.0, 5.0]), 2).unwrap().values(), &[3.0, 5.0]);
        let x = t2(3, 2, &[1.0, -1.0, 2.0, -2.0, 3.0, -3.0]);
        assert_eq!(maxpool1d(&x, 1).unwrap(), x);
        assert_eq!(maxpool1d(&t2(3, 1, &[4.0, 1.0, 1.0]), 2).unwrap().values(), &[4.0]);
        assert_eq!(maxpool1d(&t2(1, 1, &[4.0]), 2).unwrap().shape(), &[0, 1]);
    }

    #[test]
    fn rnn_examples() {
        let params = RnnParams::new(
            Array2::zeros((1, 1)),
            Array2::eye(1),
            Array1::zeros(1),
            Array2::eye(1),
        )
        .unwrap();
        let (states, last) = rnn_forward(&params, &t2(2, 1, &[-1.0, 2.0])).unwrap();
        assert_eq!(states.values(), &[0.0, 2.0]);
        assert_eq!(last, vec![2.0]);
        let (states, last) = rnn_forward(&params, &Tensor::zeros(vec![0, 1])).unwrap();
        assert_eq!(states.shape(), &[0, 1]);
        assert_eq!(last, vec![0.0]);
        assert!(matches!(rnn_forward(&params, &Tensor::zeros(vec![3, 2])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rnn_matches_direct_recurrence() {
        let params = RnnParams::init(3, 4, 2, 11);
        let mut rng = seeded(5);
        let seq: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (states, last) = rnn_forward(&params, &t2(5, 3, &seq)).unwrap();
        let mut s = Array1::<f64>::zeros(4);
        for t in 0..5 {
            let x = Array1::from(seq[t * 3..t * 3 + 3].to_vec());
            s = (params.w.dot(&s) + params.u.dot(&x) + &params.b).mapv(|v| v.max(0.0));
            for j in 0..4 {
                assert!((states.get(&[t, j]).unwrap() - s[j]).abs() < 1e-12);
            }
        }
        for (a, b) in last.iter().zip(&s) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bptt_gradient_on_four_step_sequence() {
        let params = RnnParams::init(2, 3, 2, 8);
        let mut rng = seeded(9);
        let x = Array2::from_shape_simple_fn((4, 2), || rng.random_range(-1.0..1.0));
        let layer = params.as_layer(Activation::Relu);
        let err = gradcheck::layer_gradient_error(&layer, &Batch::new(x, 4).unwrap(), 1);
        assert!(err < 1e-4, "{err}");
    }

    fn separable_toy(n: usize, d: usize, seed: u64) -> EncodedMatrix {
        // column pairs; class = value of the first variable
        let mut rng = seeded(seed);
        let vars = d / 2;
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let bits: Vec<u8> = (0..vars).map(|_| rng.random_range(0..2u8)).collect();
            labels.push(SeverityLevel::from_index(bits[0] as usize).unwrap());
            rows.push(bits.iter().flat_map(|&b| [1 - b, b]).collect());
        }
        let names = (0..d).map(|i| format!("c{i}")).collect();
        let groups = (0..vars).map(|v| ColumnGroup { variable: format!("v{v}"), start: 2 * v, len: 2 }).collect();
        EncodedMatrix::from_parts(names, groups, rows, labels).unwrap()
    }

    fn accuracy(net: &TrainedNetwork, m: &EncodedMatrix) -> f64 {
        let pred = net.predict_matrix(m).unwrap();
        pred.iter().zip(m.labels()).filter(|(p, l)| **p == l.index()).count() as f64 / m.n_rows() as f64
    }

    #[test]
    fn every_architecture_learns_a_separable_toy() {
        let config = NetworkConfig::default();
        for arch in Architecture::ALL {
            // the convolutional stack needs at least 10 steps, so its toy gets
            // two more uninformative variables
            let d = if arch == Architecture::Cnn { 12 } else { 8 };
            let toy = separable_toy(200, d, 3);
            let net = build_network(arch, &config, d, 4).unwrap();
            let net = train(net, &toy, &config).unwrap();
            assert_eq!(net.loss_history.len(), 50);
            assert!(net.loss_history.iter().all(|l| l.is_finite()));
            assert!(net.loss_history.last() < net.loss_history.first());
            let acc = accuracy(&net, &toy);
            assert!(acc >= 0.95, "{arch:?}: {acc}");
        }
    }

    #[test]
    fn zero_epochs_leave_parameters_alone() {
        let config = NetworkConfig { epochs: 0, model_dim: 8, ..Default::default() };
        let toy = separable_toy(20, 12, 1);
        let net = build_network(Architecture::Cnn, &config, 12, 4).unwrap();
        let trained = train(net.clone(), &toy, &config).unwrap();
        assert_eq!(trained, net);
        assert!(!trained.is_trained());
    }

    #[test]
    fn hybrid_shape_arithmetic() {
        let net = build_network(Architecture::Hybrid, &NetworkConfig::default(), 40, 4).unwrap();
        let shapes: Vec<(usize, usize)> = net.declared_shapes().unwrap().into_iter().map(|(_, s)| s).collect();
        assert_eq!(shapes[0], (38, 64));
        assert_eq!(shapes[2], (19, 64));
        assert_eq!(*shapes.last().unwrap(), (1, 4));
    }

    #[test]
    fn declared_shapes_match_runtime() {
        let config = NetworkConfig { model_dim: 4, n_layers: 4, ..Default::default() };
        for arch in Architecture::ALL {
            for len in 4..128 {
                match build_network(arch, &config, len, 4) {
                    Ok(net) => {
                        let row = vec![1.0; len];
                        assert_eq!(net.declared_shapes().unwrap(), net.traced_shapes(&row).unwrap());
                        let p = net_proba(&net, &row).unwrap();
                        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    }
                    Err(Error::InputTooShort { .. }) => {
                        assert_eq!(arch, Architecture::Cnn, "len {len}");
                        assert!(len < 10);
                    }
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }

    #[test]
    fn same_seed_same_initialization() {
        let config = NetworkConfig::default();
        for arch in Architecture::ALL {
            let a = build_network(arch, &config, 54, 4).unwrap();
            assert_eq!(a, build_network(arch, &config, 54, 4).unwrap());
            let other = NetworkConfig { seed: 7, ..config.clone() };
            assert_ne!(a, build_network(arch, &other, 54, 4).unwrap());
        }
    }

    #[test]
    fn inference_is_pure() {
        let net = build_network(Architecture::Rnn, &NetworkConfig::default(), 20, 4).unwrap();
        let row: Vec<f64> = (0..20).map(|i| f64::from(i % 2)).collect();
        assert_eq!(net_proba(&net, &row).unwrap(), net_proba(&net, &row).unwrap());
        assert!(matches!(net_proba(&net, &[0.0; 3]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn untrained_networks_start_near_uniform() {
        let row = vec![1.0; 54];
        for arch in Architecture::ALL {
            let near = (0..100)
                .filter(|&seed| {
                    let config = NetworkConfig { seed, ..Default::default() };
                    let p = net_proba(&build_network(arch, &config, 54, 4).unwrap(), &row).unwrap();
                    p.iter().all(|v| (v - 0.25).abs() <= 0.15)
                })
                .count();
            assert!(near >= 90, "{arch:?}: {near}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let config = NetworkConfig { model_dim: 8, epochs: 3, dropout: 0.2, ..Default::default() };
        let toy = separable_toy(60, 12, 4);
        for arch in Architecture::ALL {
            let run = || train(build_network(arch, &config, 12, 4).unwrap(), &toy, &config).unwrap();
            assert_eq!(run(), run());
        }
    }

    #[test]
    fn invalid_configs() {
        let bad = NetworkConfig { dropout: 1.0, ..Default::default() };
        assert!(build_network(Architecture::Rnn, &bad, 10, 4).is_err());
        let bad = NetworkConfig { model_dim: 0, ..Default::default() };
        assert!(build_network(Architecture::Rnn, &bad, 10, 4).is_err());
        assert!(matches!(
            build_network(Architecture::Hybrid, &NetworkConfig::default(), 3, 4),
            Err(Error::InputTooShort { .. })
        ));
    }
}
