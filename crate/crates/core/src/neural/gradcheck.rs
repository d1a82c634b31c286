//! Central finite-difference checks for layer gradients.

use ndarray::Array2;
use rand::Rng as _;

use super::layers::{softmax_cross_entropy, Batch, Layer, Mode};
use crate::rng::{seeded, Rng};

pub const EPSILON: f64 = 1e-5;

/// `|a − n| / max(|a|, |n|, 1e-6)`; the floor keeps entries that are zero
/// in both from dividing by zero.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn weighted_output(layer: &Layer, input: &Batch, weights: &Array2<f64>, rng: &mut Rng) -> f64 {
    let (out, _) = layer.forward(input, Mode::Infer, rng).expect("shapes checked by caller");
    (&out.data * weights).sum()
}

/// Largest relative error between the analytic gradient of
/// `Σ output ⊙ R` (with `R` random) and central differences, over every
/// input value and every parameter.
pub fn layer_gradient_error(layer: &Layer, input: &Batch, seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let (out, cache) = layer.forward(input, Mode::Infer, &mut rng).expect("valid layer input");
    let weights = Array2::from_shape_simple_fn(out.data.dim(), || rng.random_range(-1.0..1.0));
    let (dx, dparams) = layer.backward(&cache, &weights);

    let mut worst: f64 = 0.0;
    for idx in 0..input.data.len() {
        let shifted = |delta: f64| {
            let mut b = input.clone();
            let flat = b.data.as_slice_mut().expect("standard layout");
            flat[idx] += delta;
            weighted_output(layer, &b, &weights, &mut seeded(0))
        };
        let numeric = (shifted(EPSILON) - shifted(-EPSILON)) / (2.0 * EPSILON);
        let analytic = dx.as_standard_layout()[[idx / dx.ncols(), idx % dx.ncols()]];
        worst = worst.max(relative_error(analytic, numeric));
    }
    for (p, grad) in dparams.iter().enumerate() {
        for idx in 0..grad.len() {
            let shifted = |delta: f64| {
                let mut l = layer.clone();
                let param = &mut l.params_mut()[p];
                let cols = param.ncols();
                param[[idx / cols, idx % cols]] += delta;
                weighted_output(&l, input, &weights, &mut seeded(0))
            };
            let numeric = (shifted(EPSILON) - shifted(-EPSILON)) / (2.0 * EPSILON);
            worst = worst.max(relative_error(grad[[idx / grad.ncols(), idx % grad.ncols()]], numeric));
        }
    }
    worst
}

/// The same check for the fused softmax and mean cross-entropy.
pub fn softmax_cross_entropy_gradient_error(logits: &Array2<f64>, labels: &[usize]) -> f64 {
    let (_, grad) = softmax_cross_entropy(logits, labels);
    let mut worst: f64 = 0.0;
    for ((i, j), &analytic) in grad.indexed_iter() {
        let shifted = |delta: f64| {
            let mut z = logits.clone();
            z[[i, j]] += delta;
            softmax_cross_entropy(&z, labels).0
        };
        let numeric = (shifted(EPSILON) - shifted(-EPSILON)) / (2.0 * EPSILON);
        worst = worst.max(relative_error(analytic, numeric));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::layers::{glorot, Activation};

    const TRIALS: u64 = 20;
    const TOLERANCE: f64 = 1e-4;

    fn random(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn dense() {
        for trial in 0..TRIALS {
            let mut rng = seeded(trial);
            let (b, i, o) = (rng.random_range(1..5), rng.random_range(1..6), rng.random_range(1..6));
            let layer = Layer::Dense { w: random(i, o, &mut rng), b: random(1, o, &mut rng) };
            let input = Batch::new(random(b, i, &mut rng), 1).unwrap();
            let err = layer_gradient_error(&layer, &input, trial);
            assert!(err < TOLERANCE, "trial {trial}: {err}");
        }
    }

    #[test]
    fn conv1d() {
        for trial in 0..TRIALS {
            let mut rng = seeded(100 + trial);
            let (b, c, k, w) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..5), rng.random_range(1..4));
            let l = w + rng.random_range(0..5);
            let layer = Layer::Conv1d { width: w, kernel: glorot(w * c, k, w * c, w * k, &mut rng), b: random(1, k, &mut rng) };
            let input = Batch::new(random(b * l, c, &mut rng), l).unwrap();
            let err = layer_gradient_error(&layer, &input, trial);
            assert!(err < TOLERANCE, "trial {trial}: {err}");
        }
    }

    #[test]
    fn maxpool() {
        for trial in 0..TRIALS {
            let mut rng = seeded(200 + trial);
            let (b, c, window) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..4));
            let l = window * rng.random_range(1..4) + rng.random_range(0..window);
            let input = Batch::new(random(b * l, c, &mut rng), l).unwrap();
            let err = layer_gradient_error(&Layer::MaxPool { window }, &input, trial);
            assert!(err < TOLERANCE, "trial {trial}: {err}");
        }
    }

    #[test]
    fn recurrent() {
        for trial in 0..TRIALS {
            let mut rng = seeded(300 + trial);
            let (b, c, h) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..5));
            let t = rng.random_range(1..6);
            let activation = if trial % 2 == 0 { Activation::Relu } else { Activation::Sigmoid };
            let layer = Layer::Recurrent {
                u: random(c, h, &mut rng),
                w: random(h, h, &mut rng),
                b: random(1, h, &mut rng),
                activation,
            };
            let input = Batch::new(random(b * t, c, &mut rng), t).unwrap();
            let err = layer_gradient_error(&layer, &input, trial);
            assert!(err < TOLERANCE, "trial {trial}: {err}");
        }
    }

    #[test]
    fn activations() {
        for trial in 0..TRIALS {
            let mut rng = seeded(400 + trial);
            let input = Batch::new(random(3, 4, &mut rng), 1).unwrap();
            for a in [Activation::Relu, Activation::Sigmoid] {
                let err = layer_gradient_error(&Layer::Activation(a), &input, trial);
                assert!(err < TOLERANCE, "trial {trial} {a:?}: {err}");
            }
        }
    }

    #[test]
    fn fused_softmax_cross_entropy() {
        for trial in 0..TRIALS {
            let mut rng = seeded(500 + trial);
            let (n, j) = (rng.random_range(1..6), rng.random_range(2..6));
            let logits = random(n, j, &mut rng) * 3.0;
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..j)).collect();
            let err = softmax_cross_entropy_gradient_error(&logits, &labels);
            assert!(err < TOLERANCE, "trial {trial}: {err}");
        }
    }
}
