//! Plain-text model files.
//!
//! ```text
//! sevpred-model 1
//! kind logistic
//! matrix weights 4 54
//! <one line of whitespace-separated values per row>
//! ...
//! ```
//!
//! Every model is written as a `kind` line followed by named entries in a
//! fixed order: `values <name> <n>` (one line of numbers after the header)
//! or `matrix <name> <rows> <cols>`. Floats use the shortest representation
//! that parses back to the same bits.

use std::fmt::Write as _;
use std::str::FromStr;

use ndarray::{Array1, Array2};

use crate::classic::{DecisionTreeModel, KnnModel, LogisticModel, NaiveBayesModel, TreeNode};
use crate::error::{Error, Result};
use crate::neural::{Activation, Architecture, Layer, TrainedNetwork};
use crate::{Classifier, NUM_CLASSES};

const MAGIC: &str = "sevpred-model 1";

#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Logistic(LogisticModel),
    NaiveBayes(NaiveBayesModel),
    Knn(KnnModel),
    Tree(DecisionTreeModel),
    Network(TrainedNetwork),
}

impl SavedModel {
    pub fn classifier(&self) -> &dyn Classifier {
        match self {
            SavedModel::Logistic(m) => m,
            SavedModel::NaiveBayes(m) => m,
            SavedModel::Knn(m) => m,
            SavedModel::Tree(m) => m,
            SavedModel::Network(m) => m,
        }
    }
}

struct Writer {
    out: String,
}

impl Writer {
    fn new(kind: &str) -> Self {
        Writer { out: format!("{MAGIC}\nkind {kind}\n") }
    }

    fn values<T: std::fmt::Display>(&mut self, name: &str, values: impl IntoIterator<Item = T>) {
        let joined: Vec<String> = values.into_iter().map(|v| v.to_string()).collect();
        let _ = writeln!(self.out, "values {name} {}", joined.len());
        let _ = writeln!(self.out, "{}", joined.join(" "));
    }

    fn matrix(&mut self, name: &str, m: &Array2<f64>) {
        let _ = writeln!(self.out, "matrix {name} {} {}", m.nrows(), m.ncols());
        for row in m.rows() {
            let joined: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(self.out, "{}", joined.join(" "));
        }
    }

    fn tag(&mut self, name: &str, value: &str) {
        let _ = writeln!(self.out, "{name} {value}");
    }
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

fn format_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::ModelFormat(format!("line {}: {msg}", line + 1))
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Result<(Self, String)> {
        let mut r = Reader { lines: text.lines().enumerate() };
        let (_, magic) = r.next_line()?;
        if magic.trim() != MAGIC {
            return Err(format_err(0, format!("expected `{MAGIC}`")));
        }
        let kind = r.tag("kind")?;
        Ok((r, kind))
    }

    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        self.lines.next().ok_or_else(|| Error::ModelFormat("unexpected end of file".into()))
    }

    fn header(&mut self, keyword: &str, name: &str, arity: usize) -> Result<(usize, Vec<usize>)> {
        let (no, line) = self.next_line()?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != arity + 2 || tokens[0] != keyword || tokens[1] != name {
            return Err(format_err(no, format!("expected `{keyword} {name}`, found `{line}`")));
        }
        let dims = tokens[2..]
            .iter()
            .map(|t| t.parse().map_err(|_| format_err(no, format!("bad size `{t}`"))))
            .collect::<Result<Vec<usize>>>()?;
        Ok((no, dims))
    }

    fn numbers<T: FromStr>(&mut self, expected: usize) -> Result<Vec<T>> {
        let (no, line) = self.next_line()?;
        let parsed = line
            .split_whitespace()
            .map(|t| t.parse::<T>().map_err(|_| format_err(no, format!("bad number `{t}`"))))
            .collect::<Result<Vec<T>>>()?;
        if parsed.len() != expected {
            return Err(format_err(no, format!("expected {expected} values, found {}", parsed.len())));
        }
        Ok(parsed)
    }

    fn values<T: FromStr>(&mut self, name: &str) -> Result<Vec<T>> {
        let (_, dims) = self.header("values", name, 1)?;
        self.numbers(dims[0])
    }

    fn matrix(&mut self, name: &str) -> Result<Array2<f64>> {
        let (_, dims) = self.header("matrix", name, 2)?;
        let (rows, cols) = (dims[0], dims[1]);
        let mut flat = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            flat.extend(self.numbers::<f64>(cols)?);
        }
        Ok(Array2::from_shape_vec((rows, cols), flat).expect("sized by header"))
    }

    fn tag(&mut self, name: &str) -> Result<String> {
        let (no, line) = self.next_line()?;
        match line.split_once(' ') {
            Some((key, value)) if key == name => Ok(value.trim().to_string()),
            _ => Err(format_err(no, format!("expected `{name} ...`, found `{line}`"))),
        }
    }

    fn finish(mut self) -> Result<()> {
        match self.lines.find(|(_, l)| !l.trim().is_empty()) {
            Some((no, _)) => Err(format_err(no, "trailing content")),
            None => Ok(()),
        }
    }
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Array2<f64> {
    let cols = rows.first().map_or(0, Vec::len);
    Array2::from_shape_fn((rows.len(), cols), |(i, j)| rows[i][j])
}

fn matrix_to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn write_layer(w: &mut Writer, layer: &Layer) {
    w.tag("layer", layer.kind());
    match layer {
        Layer::Dense { w: weights, b } => {
            w.matrix("w", weights);
            w.matrix("b", b);
        }
        Layer::Conv1d { width, kernel, b } => {
            w.values("width", [*width]);
            w.matrix("kernel", kernel);
            w.matrix("b", b);
        }
        Layer::MaxPool { window } => w.values("window", [*window]),
        Layer::Recurrent { u, w: rec, b, activation } => {
            w.tag("activation", activation.name());
            w.matrix("u", u);
            w.matrix("w", rec);
            w.matrix("b", b);
        }
        Layer::Activation(a) => w.tag("activation", a.name()),
        Layer::Dropout { rate } => w.values("rate", [*rate]),
        Layer::Flatten => {}
    }
}

fn read_activation(r: &mut Reader) -> Result<Activation> {
    let name = r.tag("activation")?;
    Activation::from_name(&name).ok_or_else(|| Error::ModelFormat(format!("unknown activation `{name}`")))
}

fn single<T: Copy>(values: Vec<T>, name: &str) -> Result<T> {
    match values[..] {
        [v] => Ok(v),
        _ => Err(Error::ModelFormat(format!("`{name}` must hold one value"))),
    }
}

fn read_layer(r: &mut Reader) -> Result<Layer> {
    let kind = r.tag("layer")?;
    Ok(match kind.as_str() {
        "dense" => Layer::Dense { w: r.matrix("w")?, b: r.matrix("b")? },
        "conv1d" => {
            let width = single(r.values("width")?, "width")?;
            Layer::Conv1d { width, kernel: r.matrix("kernel")?, b: r.matrix("b")? }
        }
        "maxpool" => Layer::MaxPool { window: single(r.values("window")?, "window")? },
        "recurrent" => {
            let activation = read_activation(r)?;
            Layer::Recurrent { u: r.matrix("u")?, w: r.matrix("w")?, b: r.matrix("b")?, activation }
        }
        "activation" => Layer::Activation(read_activation(r)?),
        "dropout" => Layer::Dropout { rate: single(r.values("rate")?, "rate")? },
        "flatten" => Layer::Flatten,
        other => return Err(Error::ModelFormat(format!("unknown layer `{other}`"))),
    })
}

pub fn save_model(model: &SavedModel) -> String {
    match model {
        SavedModel::Logistic(m) => {
            let mut w = Writer::new("logistic");
            w.matrix("weights", &m.weights);
            w.values("intercepts", m.intercepts.iter());
            w.values("loss", m.loss_history.iter());
            w.out
        }
        SavedModel::NaiveBayes(m) => {
            let mut w = Writer::new("naive_bayes");
            w.values("alpha", [m.alpha]);
            w.values("log_priors", m.log_priors.iter());
            w.matrix("log_p_one", &rows_to_matrix(&m.log_p_one));
            w.matrix("log_p_zero", &rows_to_matrix(&m.log_p_zero));
            w.out
        }
        SavedModel::Knn(m) => {
            let mut w = Writer::new("knn");
            w.values("k", [m.k()]);
            w.values("labels", m.labels().iter());
            let rows: Vec<Vec<f64>> = (0..m.n_stored()).map(|i| m.stored_row(i).to_vec()).collect();
            w.matrix("rows", &rows_to_matrix(&rows));
            w.out
        }
        SavedModel::Tree(m) => {
            let mut w = Writer::new("decision_tree");
            w.values("n_features", [crate::Classifier::n_features(m)]);
            w.values("n_nodes", [m.nodes().len()]);
            for node in m.nodes() {
                match node {
                    TreeNode::Split { column, left, right } => w.values("split", [*column, *left, *right]),
                    TreeNode::Leaf { counts } => w.values("leaf", counts.iter()),
                }
            }
            w.out
        }
        SavedModel::Network(net) => {
            let mut w = Writer::new("network");
            w.tag("architecture", net.architecture().key());
            w.values("shape", [net.input_length(), net.n_classes(), net.layers().len()]);
            for layer in net.layers() {
                write_layer(&mut w, layer);
            }
            w.values("loss", net.loss_history.iter());
            w.out
        }
    }
}

pub fn load_model(text: &str) -> Result<SavedModel> {
    let (mut r, kind) = Reader::new(text)?;
    let model = match kind.as_str() {
        "logistic" => {
            let weights = r.matrix("weights")?;
            let intercepts = Array1::from(r.values::<f64>("intercepts")?);
            if weights.nrows() != NUM_CLASSES || intercepts.len() != NUM_CLASSES {
                return Err(Error::ModelFormat("logistic model must have one row per class".into()));
            }
            let loss_history = r.values("loss")?;
            SavedModel::Logistic(LogisticModel { weights, intercepts, loss_history })
        }
        "naive_bayes" => {
            let alpha = single(r.values("alpha")?, "alpha")?;
            let priors: Vec<f64> = r.values("log_priors")?;
            let log_priors: [f64; NUM_CLASSES] = priors
                .try_into()
                .map_err(|_| Error::ModelFormat("log_priors must have one value per class".into()))?;
            let one = r.matrix("log_p_one")?;
            let zero = r.matrix("log_p_zero")?;
            if one.nrows() != NUM_CLASSES || one.dim() != zero.dim() {
                return Err(Error::ModelFormat("naive Bayes tables must be classes × columns".into()));
            }
            SavedModel::NaiveBayes(NaiveBayesModel {
                log_priors,
                log_p_one: matrix_to_rows(&one),
                log_p_zero: matrix_to_rows(&zero),
                alpha,
            })
        }
        "knn" => {
            let k = single(r.values("k")?, "k")?;
            let labels: Vec<usize> = r.values("labels")?;
            let rows = matrix_to_rows(&r.matrix("rows")?);
            SavedModel::Knn(KnnModel::new(rows, labels, k)?)
        }
        "decision_tree" => {
            let n_features = single(r.values("n_features")?, "n_features")?;
            let n_nodes = single(r.values("n_nodes")?, "n_nodes")?;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let (no, line) = r.next_line()?;
                let kind = line.split_whitespace().nth(1).unwrap_or_default();
                let values: Vec<usize> = r.numbers(if kind == "split" { 3 } else { NUM_CLASSES })?;
                nodes.push(match kind {
                    "split" => TreeNode::Split { column: values[0], left: values[1], right: values[2] },
                    "leaf" => TreeNode::Leaf { counts: values.try_into().expect("length checked") },
                    _ => return Err(format_err(no, format!("expected a tree node, found `{line}`"))),
                });
            }
            SavedModel::Tree(DecisionTreeModel::from_nodes(nodes, n_features)?)
        }
        "network" => {
            let key = r.tag("architecture")?;
            let architecture = Architecture::from_key(&key)
                .ok_or_else(|| Error::ModelFormat(format!("unknown architecture `{key}`")))?;
            let shape: Vec<usize> = r.values("shape")?;
            let [input_length, n_classes, n_layers] = shape[..] else {
                return Err(Error::ModelFormat("network shape needs three values".into()));
            };
            let layers = (0..n_layers).map(|_| read_layer(&mut r)).collect::<Result<Vec<_>>>()?;
            let loss = r.values("loss")?;
            SavedModel::Network(TrainedNetwork::from_parts(architecture, input_length, n_classes, layers, loss)?)
        }
        other => return Err(Error::ModelFormat(format!("unknown model kind `{other}`"))),
    };
    r.finish()?;
    Ok(model)
}
