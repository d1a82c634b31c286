//! Synthetic crash data calibrated to the published summary statistics.
//!
//! Each predictor is drawn independently from a categorical distribution
//! over its valid codes. The distribution is the maximum-entropy one with
//! the target mean and standard deviation, i.e. `p(x) ∝ exp(a·x + b·x²)`.
//! The one dependence is night/light: darkness codes force `night = 1`, and
//! the remaining night mass is spread over the other light codes so the
//! night marginal is preserved.
//!
//! Severity is drawn from a softmax over class intercepts plus a fixed set
//! of link weights (see [`reference_link_weights`]). The weights give the
//! learners something to find; they make no claim about real crash
//! causality.

use std::fmt::Write as _;

use rand::Rng as _;

use crate::dataset::{CrashRecord, Dataset, SeverityLevel, Variable, N_PREDICTORS, SEVERITY_SCHEMA};
use crate::error::{Error, Result};
use crate::rng;
use crate::NUM_CLASSES;

/// Reference class counts: no injury, minor, serious, fatal.
pub const REFERENCE_CLASS_COUNTS: [usize; NUM_CLASSES] = [11697, 3307, 755, 81];

/// Size of the reference dataset.
pub const REFERENCE_N: usize = 15840;

/// Target (mean, std) per predictor, schema order.
pub const TABLE1_MOMENTS: [(Variable, f64, f64); N_PREDICTORS] = [
    (Variable::WeatherCondition, 1.8794, 1.7028),
    (Variable::LightCondition, 2.7113, 1.1883),
    (Variable::RoadType, 0.5433, 0.9340),
    (Variable::FirstHarmfulEventLocation, 1.4270, 1.0582),
    (Variable::TrafficControlDevice, 1.0408, 0.4400),
    (Variable::TrafficControlType, 6.2880, 1.7800),
    (Variable::PedestrianAction, 0.0015, 0.0495),
    (Variable::AlcoholCondition, 0.0368, 0.18862),
    (Variable::DrugCondition, 0.0060, 0.07761),
    (Variable::YoungDriverCondition, 0.1882, 0.3909),
    (Variable::BeltCondition, 0.02714, 0.16251),
    (Variable::NightCondition, 0.2827, 0.4503),
    (Variable::AreaType, 0.7610, 0.4246),
    (Variable::VehicleCount, 1.958, 0.8987),
];

/// Light codes that mean darkness.
pub const DARKNESS_CODES: [i32; 3] = [4, 5, 6];

pub fn reference_class_prior() -> [f64; NUM_CLASSES] {
    let total: usize = REFERENCE_CLASS_COUNTS.iter().sum();
    REFERENCE_CLASS_COUNTS.map(|c| c as f64 / total as f64)
}

/// Maximum-entropy distribution over `codes` with the given mean and
/// standard deviation. With two codes only the mean can be matched.
pub fn moment_match(codes: &[i32], mean: f64, std: f64) -> Result<Vec<f64>> {
    if codes.is_empty() {
        return Err(Error::InvalidParameter("empty code set".into()));
    }
    let lo = f64::from(*codes.iter().min().unwrap());
    let hi = f64::from(*codes.iter().max().unwrap());
    if !(mean > lo && mean < hi) {
        return Err(Error::InvalidParameter(format!(
            "mean {mean} must lie strictly inside [{lo}, {hi}]"
        )));
    }
    // Centered and scaled features keep the Newton system well conditioned.
    let scale = (hi - lo).max(1.0);
    let xs: Vec<f64> = codes.iter().map(|&c| (f64::from(c) - mean) / scale).collect();
    let var_target = (std / scale).powi(2);
    let two_params = codes.len() > 2;

    let probs_at = |a: f64, b: f64| -> Vec<f64> {
        let z: Vec<f64> = xs.iter().map(|&x| a * x + b * x * x).collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    };
    // Dual objective: log Z(a, b) - b * var_target; its gradient is the
    // moment mismatch and its Hessian the feature covariance.
    let dual = |a: f64, b: f64| -> f64 {
        let z: Vec<f64> = xs.iter().map(|&x| a * x + b * x * x).collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln() - b * var_target
    };

    let (mut a, mut b) = (0.0f64, 0.0f64);
    for _ in 0..500 {
        let p = probs_at(a, b);
        let m1: f64 = p.iter().zip(&xs).map(|(p, x)| p * x).sum();
        let m2: f64 = p.iter().zip(&xs).map(|(p, x)| p * x * x).sum();
        let m3: f64 = p.iter().zip(&xs).map(|(p, x)| p * x * x * x).sum();
        let m4: f64 = p.iter().zip(&xs).map(|(p, x)| p * x.powi(4)).sum();
        let g = [m1, if two_params { m2 - var_target } else { 0.0 }];
        if g[0].abs() < 1e-13 && g[1].abs() < 1e-13 {
            return Ok(probs_at(a, b));
        }
        let (da, db) = if two_params {
            let h11 = m2 - m1 * m1;
            let h12 = m3 - m1 * m2;
            let h22 = m4 - m2 * m2;
            let det = h11 * h22 - h12 * h12;
            if det.abs() < 1e-300 {
                break;
            }
            ((h22 * g[0] - h12 * g[1]) / det, (h11 * g[1] - h12 * g[0]) / det)
        } else {
            (g[0] / (m2 - m1 * m1), 0.0)
        };
        let f0 = dual(a, b);
        let slope = g[0] * da + g[1] * db;
        let mut step = 1.0;
        while step > 1e-12 {
            let (na, nb) = (a - step * da, b - step * db);
            if dual(na, nb) <= f0 - 1e-4 * step * slope {
                break;
            }
            step *= 0.5;
        }
        a -= step * da;
        b -= step * db;
    }
    let p = probs_at(a, b);
    let (m, s) = moments(codes, &p);
    if (m - mean).abs() < 1e-8 && (!two_params || (s - std).abs() < 1e-8) {
        Ok(p)
    } else {
        Err(Error::InvalidParameter(format!(
            "could not match mean {mean} / std {std} over {codes:?}"
        )))
    }
}

/// Mean and population standard deviation of a categorical distribution.
pub fn moments(codes: &[i32], probs: &[f64]) -> (f64, f64) {
    let mean: f64 = codes.iter().zip(probs).map(|(&c, p)| f64::from(c) * p).sum();
    let var: f64 = codes
        .iter()
        .zip(probs)
        .map(|(&c, p)| p * (f64::from(c) - mean).powi(2))
        .sum();
    (mean, var.sqrt())
}

fn ordinal(risk: f64) -> [f64; NUM_CLASSES] {
    [0.0, risk, 2.0 * risk, 3.0 * risk]
}

/// The shipped link weights as `(variable, code, per-class logit shift)`.
/// Codes not listed carry zero weight. Most effects are ordinal: a risk
/// value `r` shifts class `j`'s logit by `j·r`.
pub fn reference_link_weights() -> Vec<(Variable, i32, [f64; NUM_CLASSES])> {
    use Variable::*;
    let mut w = vec![
        (BeltCondition, 1, ordinal(1.2)),
        (AlcoholCondition, 1, ordinal(0.7)),
        (DrugCondition, 1, ordinal(0.5)),
        (YoungDriverCondition, 1, ordinal(0.3)),
        (NightCondition, 1, ordinal(0.25)),
        (AreaType, 1, ordinal(-0.35)),
        (LightCondition, 2, ordinal(-0.15)),
        (LightCondition, 4, ordinal(0.2)),
        (LightCondition, 5, ordinal(0.6)),
        (LightCondition, 6, ordinal(0.4)),
        (RoadType, 1, ordinal(0.6)),
        (RoadType, 2, ordinal(0.3)),
        (RoadType, 4, ordinal(-0.2)),
        (WeatherCondition, 3, ordinal(0.4)),
        (WeatherCondition, 5, ordinal(0.15)),
        (WeatherCondition, 6, ordinal(-0.3)),
        (FirstHarmfulEventLocation, 0, ordinal(-0.2)),
        (FirstHarmfulEventLocation, 2, ordinal(0.3)),
        (FirstHarmfulEventLocation, 3, ordinal(0.45)),
        (FirstHarmfulEventLocation, 4, ordinal(0.7)),
        (FirstHarmfulEventLocation, 8, ordinal(0.6)),
        (FirstHarmfulEventLocation, 9, ordinal(0.6)),
        (TrafficControlDevice, 0, ordinal(-0.15)),
        (TrafficControlDevice, 2, ordinal(0.3)),
        (TrafficControlType, 3, ordinal(0.15)),
    ];
    for pedestrian in 1..=3 {
        w.push((PedestrianAction, pedestrian, ordinal(1.5)));
    }
    // Multi-vehicle crashes raise the chance of some injury but not of a
    // fatality; single-vehicle crashes lean severe.
    w.push((VehicleCount, 1, ordinal(0.4)));
    w.push((VehicleCount, 3, [0.0, 0.35, 0.2, 0.0]));
    for count in 4..=9 {
        w.push((VehicleCount, count, [0.0, 0.6, 0.5, 0.2]));
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    /// One probability vector per predictor, over its valid codes in order.
    pub distributions: Vec<Vec<f64>>,
    /// One logit shift per (predictor, code, class).
    pub link_weights: Vec<Vec<[f64; NUM_CLASSES]>>,
    /// Target marginal class distribution.
    pub class_prior: [f64; NUM_CLASSES],
    /// Class intercepts that reproduce `class_prior` under the link weights.
    pub intercepts: [f64; NUM_CLASSES],
    /// Seed of the Monte Carlo sample used to calibrate the intercepts.
    pub seed: u64,
}

const CALIBRATION_SAMPLE: usize = 200_000;

impl GeneratorSpec {
    /// Validates the distributions and calibrates intercepts so that the
    /// marginal severity distribution equals `class_prior`. With all link
    /// weights zero the intercepts are exactly `ln(class_prior)`.
    pub fn new(
        distributions: Vec<Vec<f64>>,
        link_weights: Vec<Vec<[f64; NUM_CLASSES]>>,
        class_prior: [f64; NUM_CLASSES],
        seed: u64,
    ) -> Result<Self> {
        if distributions.len() != N_PREDICTORS || link_weights.len() != N_PREDICTORS {
            return Err(Error::DimensionMismatch {
                expected: N_PREDICTORS,
                got: distributions.len().min(link_weights.len()),
            });
        }
        for (var, (p, w)) in Variable::ALL.iter().zip(distributions.iter().zip(&link_weights)) {
            let width = var.schema().valid_codes.len();
            if p.len() != width || w.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    got: p.len(),
                });
            }
            check_probability_vector(p, var.name())?;
        }
        check_probability_vector(&class_prior, "class prior")?;
        let mut spec = GeneratorSpec {
            distributions,
            link_weights,
            class_prior,
            intercepts: class_prior.map(|p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY }),
            seed,
        };
        spec.calibrate_intercepts();
        Ok(spec)
    }

    fn has_signal(&self) -> bool {
        self.link_weights.iter().flatten().flatten().any(|&w| w != 0.0)
    }

    fn calibrate_intercepts(&mut self) {
        if !self.has_signal() {
            return;
        }
        let mut rng = rng::seeded(rng::derive_seed(self.seed, "intercepts"));
        let shifts: Vec<[f64; NUM_CLASSES]> = (0..CALIBRATION_SAMPLE)
            .map(|_| {
                let codes = self.draw_predictors(&mut rng);
                self.link_shift(&codes)
            })
            .collect();
        for _ in 0..200 {
            let mut avg = [0.0; NUM_CLASSES];
            for s in &shifts {
                let logits: Vec<f64> = (0..NUM_CLASSES).map(|j| self.intercepts[j] + s[j]).collect();
                let p = softmax_vec(&logits);
                for j in 0..NUM_CLASSES {
                    avg[j] += p[j];
                }
            }
            let mut worst: f64 = 0.0;
            for j in 0..NUM_CLASSES {
                avg[j] /= shifts.len() as f64;
                if self.class_prior[j] > 0.0 {
                    let ratio = self.class_prior[j] / avg[j];
                    worst = worst.max((ratio - 1.0).abs());
                    self.intercepts[j] += ratio.ln();
                }
            }
            if worst < 1e-9 {
                break;
            }
        }
        let shift = self.intercepts[0];
        for b in &mut self.intercepts {
            *b -= shift;
        }
    }

    fn draw_predictors(&self, rng: &mut rng::Rng) -> [i32; N_PREDICTORS] {
        let mut codes = [0; N_PREDICTORS];
        for var in Variable::ALL {
            if var == Variable::NightCondition {
                continue;
            }
            let domain = var.schema().valid_codes.codes();
            let idx = sample_index(&self.distributions[var.index()], rng.random::<f64>());
            codes[var.index()] = domain[idx];
        }
        let light = codes[Variable::LightCondition.index()];
        let dark = DARKNESS_CODES.contains(&light);
        let u = rng.random::<f64>();
        codes[Variable::NightCondition.index()] = if dark || u < self.night_given_not_dark() {
            1
        } else {
            0
        };
        codes
    }

    /// P(dark) under the light distribution.
    pub fn darkness_probability(&self) -> f64 {
        let light = Variable::LightCondition;
        light
            .schema()
            .valid_codes
            .codes()
            .iter()
            .zip(&self.distributions[light.index()])
            .filter(|(c, _)| DARKNESS_CODES.contains(c))
            .map(|(_, p)| p)
            .sum()
    }

    /// Night probability outside darkness, chosen so the night marginal
    /// matches its distribution whenever that is feasible.
    pub fn night_given_not_dark(&self) -> f64 {
        let p_night = self.distributions[Variable::NightCondition.index()][1];
        let p_dark = self.darkness_probability();
        if p_dark >= 1.0 {
            return 0.0;
        }
        ((p_night - p_dark) / (1.0 - p_dark)).clamp(0.0, 1.0)
    }

    fn link_shift(&self, codes: &[i32; N_PREDICTORS]) -> [f64; NUM_CLASSES] {
        let mut s = [0.0; NUM_CLASSES];
        for var in Variable::ALL {
            let pos = var
                .schema()
                .valid_codes
                .codes()
                .iter()
                .position(|&c| c == codes[var.index()])
                .expect("generated code is in domain");
            for (acc, w) in s.iter_mut().zip(self.link_weights[var.index()][pos]) {
                *acc += w;
            }
        }
        s
    }

    /// Severity distribution for a given set of predictor codes.
    pub fn severity_probabilities(&self, codes: &[i32; N_PREDICTORS]) -> [f64; NUM_CLASSES] {
        let s = self.link_shift(codes);
        let logits: Vec<f64> = (0..NUM_CLASSES).map(|j| self.intercepts[j] + s[j]).collect();
        let p = softmax_vec(&logits);
        [p[0], p[1], p[2], p[3]]
    }

    /// Same spec with every link weight zeroed (and intercepts reset).
    pub fn without_signal(&self) -> Result<Self> {
        let zero = self
            .link_weights
            .iter()
            .map(|w| vec![[0.0; NUM_CLASSES]; w.len()])
            .collect();
        GeneratorSpec::new(self.distributions.clone(), zero, self.class_prior, self.seed)
    }
}

fn check_probability_vector(p: &[f64], what: &str) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "{what}: probabilities must be non-negative and sum to 1 (sum {sum})"
        )));
    }
    Ok(())
}

fn softmax_vec(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding leaves acc a hair under 1: fall back to the last positive entry
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// The built-in spec: moment-matched predictors, the reference class prior
/// and [`reference_link_weights`].
pub fn calibrate_reference() -> GeneratorSpec {
    let distributions = TABLE1_MOMENTS
        .iter()
        .map(|&(var, mean, std)| {
            moment_match(&var.schema().valid_codes.codes(), mean, std)
                .expect("reference moments are feasible")
        })
        .collect();
    let mut link: Vec<Vec<[f64; NUM_CLASSES]>> = Variable::ALL
        .iter()
        .map(|v| vec![[0.0; NUM_CLASSES]; v.schema().valid_codes.len()])
        .collect();
    for (var, code, w) in reference_link_weights() {
        let pos = var
            .schema()
            .valid_codes
            .codes()
            .iter()
            .position(|&c| c == code)
            .expect("link weight code is in domain");
        link[var.index()][pos] = w;
    }
    GeneratorSpec::new(distributions, link, reference_class_prior(), 0x5eed)
        .expect("reference spec is valid")
}

/// Draws `n` records. Deterministic for a given `(spec, n, seed)`.
pub fn generate(spec: &GeneratorSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let mut rng = rng::seeded(rng::derive_seed(seed, "generate"));
    let records = (0..n)
        .map(|_| {
            let codes = spec.draw_predictors(&mut rng);
            let p = spec.severity_probabilities(&codes);
            let class = sample_index(&p, rng.random::<f64>());
            CrashRecord::new(codes, SeverityLevel::from_index(class).unwrap())
        })
        .collect();
    Ok(Dataset::new(records))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableStats {
    pub variable: &'static str,
    pub label: &'static str,
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// Max, min, mean and population std for every predictor and severity.
pub fn summarize(dataset: &Dataset) -> Result<Vec<VariableStats>> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let column = |f: &dyn Fn(&CrashRecord) -> i32| -> (f64, f64, f64, f64) {
        let values: Vec<f64> = dataset.records().iter().map(|r| f64::from(f(r))).collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        (max, min, mean, var.sqrt())
    };
    let mut out = Vec::with_capacity(N_PREDICTORS + 1);
    let (max, min, mean, std) = column(&|r| r.severity_code());
    out.push(VariableStats {
        variable: SEVERITY_SCHEMA.name,
        label: SEVERITY_SCHEMA.label,
        max,
        min,
        mean,
        std,
    });
    for var in Variable::ALL {
        let (max, min, mean, std) = column(&|r| r.get(var));
        out.push(VariableStats {
            variable: var.name(),
            label: var.label(),
            max,
            min,
            mean,
            std,
        });
    }
    Ok(out)
}

pub fn stats_to_csv(stats: &[VariableStats]) -> String {
    let mut out = String::from("variable,max,min,mean,std\n");
    for s in stats {
        let _ = writeln!(out, "{},{:.4},{:.4},{:.4},{:.4}", s.variable, s.max, s.min, s.mean, s.std);
    }
    out
}

pub fn render_stats_table(stats: &[VariableStats]) -> String {
    let width = stats.iter().map(|s| s.label.chars().count()).max().unwrap_or(8).max(8);
    let mut out = format!(
        "{:<width$}  {:>8}  {:>8}  {:>8}  {:>8}\n",
        "Variable", "Max", "Min", "Mean", "STD"
    );
    for s in stats {
        let _ = writeln!(
            out,
            "{:<width$}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}",
            s.label, s.max, s.min, s.mean, s.std
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::class_counts;

    #[test]
    fn moment_match_vehicle_count() {
        let codes: Vec<i32> = (1..=9).collect();
        let p = moment_match(&codes, 1.958, 0.8987).unwrap();
        assert!(p.iter().all(|&v| v >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // independent re-evaluation of the moments
        let mean: f64 = codes.iter().zip(&p).map(|(&c, q)| c as f64 * q).sum();
        let second: f64 = codes.iter().zip(&p).map(|(&c, q)| (c * c) as f64 * q).sum();
        assert!((mean - 1.958).abs() < 1e-9);
        assert!(((second - mean * mean).sqrt() - 0.8987).abs() < 1e-9);
    }

    #[test]
    fn moment_match_binary_uses_mean() {
        let p = moment_match(&[0, 1], 0.2827, 0.4503).unwrap();
        assert!((p[1] - 0.2827).abs() < 1e-12);
    }

    #[test]
    fn moment_match_rejects_infeasible_mean() {
        assert!(moment_match(&[1, 2, 3], 3.5, 0.1).is_err());
        assert!(moment_match(&[], 1.0, 0.1).is_err());
    }

    #[test]
    fn reference_spec_matches_targets() {
        let spec = calibrate_reference();
        for &(var, mean, std) in &TABLE1_MOMENTS {
            let (m, s) = moments(&var.schema().valid_codes.codes(), &spec.distributions[var.index()]);
            assert!((m - mean).abs() < 0.05, "{var}: mean {m} vs {mean}");
            assert!((s - std).abs() < 0.10, "{var}: std {s} vs {std}");
            let sum: f64 = spec.distributions[var.index()].iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
        let weather = &spec.distributions[Variable::WeatherCondition.index()];
        let (m, _) = moments(&Variable::WeatherCondition.schema().valid_codes.codes(), weather);
        assert!((m - 1.8794).abs() < 0.05);
    }

    #[test]
    fn reference_prior_matches_published_counts() {
        let spec = calibrate_reference();
        let expected = [11697.0 / 15840.0, 3307.0 / 15840.0, 755.0 / 15840.0, 81.0 / 15840.0];
        for (a, b) in spec.class_prior.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let rounded: Vec<f64> = spec.class_prior.iter().map(|p| (p * 1e4).round() / 1e4).collect();
        assert_eq!(rounded, [0.7384, 0.2088, 0.0477, 0.0051]);
    }

    #[test]
    fn zero_signal_intercepts_reproduce_prior() {
        let spec = calibrate_reference().without_signal().unwrap();
        let p = softmax_vec(&spec.intercepts);
        for (a, b) in p.iter().zip(spec.class_prior) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn darkness_fits_under_night_prevalence() {
        let spec = calibrate_reference();
        let dark = spec.darkness_probability();
        assert!(dark < 0.2827, "P(dark) = {dark}");
        let implied = dark + (1.0 - dark) * spec.night_given_not_dark();
        assert!((implied - 0.2827).abs() < 1e-12);
    }

    #[test]
    fn generate_single_record() {
        let ds = generate(&calibrate_reference(), 1, 3).unwrap();
        assert_eq!(ds.len(), 1);
        assert!(ds.records()[0].is_valid());
        assert!(generate(&calibrate_reference(), 0, 3).is_err());
    }

    #[test]
    fn generate_is_deterministic_and_clean() {
        let spec = calibrate_reference();
        let a = generate(&spec, 2000, 9).unwrap();
        assert_eq!(a, generate(&spec, 2000, 9).unwrap());
        assert_ne!(a, generate(&spec, 2000, 10).unwrap());
        let (_, report) = a.clean().unwrap();
        assert_eq!(report.dropped(), 0);
        for r in a.records() {
            if DARKNESS_CODES.contains(&r.get(Variable::LightCondition)) {
                assert_eq!(r.get(Variable::NightCondition), 1);
            }
        }
    }

    #[test]
    fn zero_signal_converges_to_prior() {
        let spec = calibrate_reference().without_signal().unwrap();
        let ds = generate(&spec, 100_000, 21).unwrap();
        let counts = class_counts(&ds.labels());
        for (c, p) in counts.iter().zip(spec.class_prior) {
            assert!((*c as f64 / 100_000.0 - p).abs() < 0.01);
        }
    }

    #[test]
    fn summarize_constant_column() {
        let r = CrashRecord::new([3, 3, 3, 3, 3, 3, 3, 1, 1, 1, 1, 1, 1, 3], SeverityLevel::MINOR_INJURY);
        let stats = summarize(&Dataset::new(vec![r; 5])).unwrap();
        let light = stats.iter().find(|s| s.variable == "light_condition").unwrap();
        assert_eq!((light.max, light.min, light.mean, light.std), (3.0, 3.0, 3.0, 0.0));
    }

    #[test]
    fn summarize_population_std() {
        let records = (1..=3)
            .map(|v| CrashRecord::new([1, v, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 1], SeverityLevel::PROPERTY_DAMAGE_ONLY))
            .collect();
        let stats = summarize(&Dataset::new(records)).unwrap();
        let light = stats.iter().find(|s| s.variable == "light_condition").unwrap();
        assert_eq!(light.mean, 2.0);
        assert!((light.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((light.std - 0.8165).abs() < 1e-4);
    }

    #[test]
    fn summarize_empty() {
        assert!(matches!(summarize(&Dataset::default()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn stats_csv_layout() {
        let ds = generate(&calibrate_reference(), 50, 1).unwrap();
        let csv = stats_to_csv(&summarize(&ds).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "variable,max,min,mean,std");
        assert_eq!(lines.len(), 16);
        assert!(render_stats_table(&summarize(&ds).unwrap()).contains("Vehicle Count"));
    }
}
