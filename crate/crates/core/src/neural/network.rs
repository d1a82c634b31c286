use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::layers::{glorot, softmax_cross_entropy, Activation, Batch, Layer, Mode};
use crate::classic::Classifier;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::{argmax, EncodedMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Layer budget for the recurrent architecture: `n_layers − 3` hidden
    /// dense layers follow the recurrent layer.
    pub n_layers: usize,
    /// Filter count, recurrent state size and dense width.
    pub model_dim: usize,
    pub epochs: usize,
    pub dropout: f64,
    pub hidden_activation: Activation,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub kernel_width: usize,
    pub pool_window: usize,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            n_layers: 6,
            model_dim: 64,
            epochs: 50,
            dropout: 0.002,
            hidden_activation: Activation::Relu,
            batch_size: 64,
            learning_rate: 0.001,
            kernel_width: 3,
            pool_window: 2,
            seed: 42,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.model_dim == 0 || self.batch_size == 0 || self.kernel_width == 0 || self.pool_window == 0 {
            return bad("model_dim, batch_size, kernel_width and pool_window must be at least 1");
        }
        if self.n_layers < 3 {
            return bad("n_layers must be at least 3");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    Rnn,
    Cnn,
    Hybrid,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::Rnn, Architecture::Cnn, Architecture::Hybrid];

    /// Short key used in configs and file names.
    pub fn key(self) -> &'static str {
        match self {
            Architecture::Rnn => "rnn",
            Architecture::Cnn => "cnn",
            Architecture::Hybrid => "cnn_rnn",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Architecture::Rnn => "RNN",
            Architecture::Cnn => "CNN",
            Architecture::Hybrid => "CNN-RNN",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Architecture::ALL.into_iter().find(|a| a.key() == key)
    }
}

/// Layer stack plus its training record. Each encoded row of width `d` is
/// fed as a sequence of `d` scalar steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedNetwork {
    architecture: Architecture,
    input_length: usize,
    n_classes: usize,
    layers: Vec<Layer>,
    pub loss_history: Vec<f64>,
}

struct StackBuilder<'a> {
    layers: Vec<Layer>,
    shape: (usize, usize),
    config: &'a NetworkConfig,
    rng: crate::rng::Rng,
}

impl StackBuilder<'_> {
    fn push(&mut self, layer: Layer) -> Result<()> {
        self.shape = layer.output_shape(self.shape)?;
        self.layers.push(layer);
        Ok(())
    }

    fn dense(&mut self, out: usize) -> Result<()> {
        let fan_in = self.shape.1;
        let w = glorot(fan_in, out, fan_in, out, &mut self.rng);
        self.push(Layer::Dense { w, b: Array2::zeros((1, out)) })
    }

    fn conv(&mut self) -> Result<()> {
        let (width, c_in, k) = (self.config.kernel_width, self.shape.1, self.config.model_dim);
        let kernel = glorot(width * c_in, k, width * c_in, width * k, &mut self.rng);
        self.push(Layer::Conv1d { width, kernel, b: Array2::zeros((1, k)) })?;
        self.push(Layer::Activation(self.config.hidden_activation))?;
        self.push(Layer::MaxPool { window: self.config.pool_window })
    }

    fn recurrent(&mut self) -> Result<()> {
        let (c_in, h) = (self.shape.1, self.config.model_dim);
        let u = glorot(c_in, h, c_in, h, &mut self.rng);
        let w = glorot(h, h, h, h, &mut self.rng);
        let activation = self.config.hidden_activation;
        self.push(Layer::Recurrent { u, w, b: Array2::zeros((1, h)), activation })
    }
}

/// Initializes an untrained network. Weight matrices are Glorot-uniform,
/// biases zero; the draw is fixed by `config.seed`.
pub fn build_network(
    architecture: Architecture,
    config: &NetworkConfig,
    input_length: usize,
    n_classes: usize,
) -> Result<TrainedNetwork> {
    config.validate()?;
    if input_length < 4 {
        return Err(Error::InputTooShort { length: input_length, reason: "networks need at least 4 inputs".into() });
    }
    if n_classes < 2 {
        return Err(Error::InvalidParameter("n_classes must be at least 2".into()));
    }
    let mut b = StackBuilder {
        layers: Vec::new(),
        shape: (input_length, 1),
        config,
        rng: seeded(derive_seed(config.seed, "init")),
    };
    let dim = config.model_dim;
    let act = Layer::Activation(config.hidden_activation);
    match architecture {
        Architecture::Rnn => {
            b.recurrent()?;
            b.push(Layer::Dropout { rate: config.dropout })?;
            for _ in 0..config.n_layers - 3 {
                b.dense(dim)?;
                b.push(act.clone())?;
            }
            b.dense(n_classes)?;
        }
        Architecture::Cnn => {
            b.conv()?;
            b.conv()?;
            b.push(Layer::Flatten)?;
            b.push(Layer::Dropout { rate: config.dropout })?;
            b.dense(dim)?;
            b.push(act)?;
            b.dense(n_classes)?;
        }
        Architecture::Hybrid => {
            b.conv()?;
            b.recurrent()?;
            b.push(Layer::Dropout { rate: config.dropout })?;
            b.dense(n_classes)?;
        }
    }
    Ok(TrainedNetwork { architecture, input_length, n_classes, layers: b.layers, loss_history: Vec::new() })
}

impl TrainedNetwork {
    /// Reassembles a network from stored parts, checking that the layers
    /// chain from `input_length` scalar steps to `n_classes` outputs.
    pub fn from_parts(
        architecture: Architecture,
        input_length: usize,
        n_classes: usize,
        layers: Vec<Layer>,
        loss_history: Vec<f64>,
    ) -> Result<Self> {
        let net = TrainedNetwork { architecture, input_length, n_classes, layers, loss_history };
        let (steps, out) = net.declared_shapes()?.last().map(|(_, s)| *s).unwrap_or((input_length, 1));
        if (steps, out) != (1, n_classes) {
            return Err(Error::DimensionMismatch { expected: n_classes, got: out });
        }
        Ok(net)
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn input_length(&self) -> usize {
        self.input_length
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// True once at least one epoch has run.
    pub fn is_trained(&self) -> bool {
        !self.loss_history.is_empty()
    }

    /// Per-sample `(steps, channels)` after each layer, from shape algebra alone.
    pub fn declared_shapes(&self) -> Result<Vec<(&'static str, (usize, usize))>> {
        let mut shape = (self.input_length, 1);
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            shape = layer.output_shape(shape)?;
            out.push((layer.kind(), shape));
        }
        Ok(out)
    }

    /// Per-sample shapes observed while running `row` forward.
    pub fn traced_shapes(&self, row: &[f64]) -> Result<Vec<(&'static str, (usize, usize))>> {
        let mut x = self.input_batch(&[row])?;
        let mut rng = seeded(0);
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            x = layer.forward(&x, Mode::Infer, &mut rng)?.0;
            out.push((layer.kind(), (x.steps, x.channels())));
        }
        Ok(out)
    }

    fn input_batch(&self, rows: &[&[f64]]) -> Result<Batch> {
        let mut flat = Vec::with_capacity(rows.len() * self.input_length);
        for row in rows {
            if row.len() != self.input_length {
                return Err(Error::DimensionMismatch { expected: self.input_length, got: row.len() });
            }
            flat.extend_from_slice(row);
        }
        let data = Array2::from_shape_vec((rows.len() * self.input_length, 1), flat).expect("sized above");
        Batch::new(data, self.input_length)
    }

    fn logits(&self, input: Batch) -> Result<Array2<f64>> {
        let mut rng = seeded(0);
        let mut x = input;
        for layer in &self.layers {
            x = layer.forward(&x, Mode::Infer, &mut rng)?.0;
        }
        Ok(x.data)
    }

    /// Class probabilities for every row of `matrix`, evaluated in batches.
    pub fn proba_matrix(&self, matrix: &EncodedMatrix) -> Result<Vec<Vec<f64>>> {
        const CHUNK: usize = 256;
        let mut out = Vec::with_capacity(matrix.n_rows());
        let rows: Vec<Vec<f64>> = (0..matrix.n_rows()).map(|i| matrix.row_f64(i)).collect();
        for chunk in rows.chunks(CHUNK) {
            let refs: Vec<&[f64]> = chunk.iter().map(Vec::as_slice).collect();
            let logits = self.logits(self.input_batch(&refs)?)?;
            for row in logits.axis_iter(Axis(0)) {
                out.push(super::softmax(&row.to_vec())?);
            }
        }
        Ok(out)
    }
}

struct Adam {
    lr: f64,
    step: i32,
    m: Vec<Vec<Array2<f64>>>,
    v: Vec<Vec<Array2<f64>>>,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(layers: &[Layer], lr: f64) -> Self {
        let zeros = || -> Vec<Vec<Array2<f64>>> {
            layers.iter().map(|l| l.params().iter().map(|p| Array2::zeros(p.dim())).collect()).collect()
        };
        Adam { lr, step: 0, m: zeros(), v: zeros() }
    }

    fn update(&mut self, layers: &mut [Layer], grads: &[Vec<Array2<f64>>]) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        let lr = self.lr;
        for (li, layer) in layers.iter_mut().enumerate() {
            for (pi, param) in layer.params_mut().into_iter().enumerate() {
                let g = &grads[li][pi];
                let m = &mut self.m[li][pi];
                let v = &mut self.v[li][pi];
                ndarray::Zip::from(param).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                    *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                    *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
                });
            }
        }
    }
}

/// Mini-batch Adam on mean cross-entropy. Shuffling and dropout masks come
/// from `config.seed`; the per-epoch mean loss is appended to the history.
pub fn train(mut network: TrainedNetwork, train: &EncodedMatrix, config: &NetworkConfig) -> Result<TrainedNetwork> {
    config.validate()?;
    if train.n_rows() == 0 {
        return Err(Error::EmptyTrain);
    }
    if train.n_cols() != network.input_length {
        return Err(Error::DimensionMismatch { expected: network.input_length, got: train.n_cols() });
    }
    let n = train.n_rows();
    let d = train.n_cols();
    let x = Array2::from_shape_fn((n, d), |(i, j)| f64::from(train.row(i)[j]));
    let labels: Vec<usize> = train.labels().iter().map(|l| l.index()).collect();
    if let Some(&bad) = labels.iter().find(|&&l| l >= network.n_classes) {
        return Err(Error::CodeOutOfRange { code: bad, n_classes: network.n_classes });
    }

    let mut rng = seeded(derive_seed(config.seed, "train"));
    let mut adam = Adam::new(&network.layers, config.learning_rate);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let xb = x.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let mut act = Batch::from_rows_as_sequences(&xb);
            let mut caches = Vec::with_capacity(network.layers.len());
            for layer in &network.layers {
                let (next, cache) = layer.forward(&act, Mode::Train, &mut rng)?;
                caches.push(cache);
                act = next;
            }
            let (loss, mut grad) = softmax_cross_entropy(&act.data, &yb);
            total += loss * chunk.len() as f64;
            let mut grads = vec![Vec::new(); network.layers.len()];
            for (li, layer) in network.layers.iter().enumerate().rev() {
                if li == 0 {
                    grads[0] = layer.param_gradients(&caches[0], &grad);
                    break;
                }
                let (dx, dp) = layer.backward(&caches[li], &grad);
                grads[li] = dp;
                grad = dx;
            }
            adam.update(&mut network.layers, &grads);
        }
        let mean = total / n as f64;
        if !mean.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        log::debug!("{} epoch {epoch}: loss {mean:.5}", network.architecture.key());
        network.loss_history.push(mean);
    }
    Ok(network)
}

/// Deterministic forward pass with dropout disabled.
pub fn net_proba(network: &TrainedNetwork, row: &[f64]) -> Result<Vec<f64>> {
    let logits = network.logits(network.input_batch(&[row])?)?;
    super::softmax(&logits.iter().copied().collect::<Vec<_>>())
}

impl Classifier for TrainedNetwork {
    fn n_features(&self) -> usize {
        self.input_length
    }

    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        net_proba(self, row)
    }

    fn predict_matrix(&self, matrix: &EncodedMatrix) -> Result<Vec<usize>> {
        Ok(self.proba_matrix(matrix)?.iter().map(|p| argmax(p)).collect())
    }
}
