//! Variable ranking with an extremely randomized forest.
//!
//! Each tree is grown on the full sample. At every node each non-constant
//! variable gets one cut drawn uniformly between its node minimum and
//! maximum, and the cut with the largest Gini decrease wins. Importance is
//! the weighted impurity decrease credited to each variable, normalized
//! per tree, averaged, and normalized again.
//!
//! Cut positions are a hash of (tree seed, node number, variable name), so
//! reordering the variables yields the same trees with permuted columns.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::dataset::{Dataset, Variable};
use crate::error::{Error, Result};
use crate::rng;
use crate::NUM_CLASSES;

/// Label-encoded view: one raw-code column per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::LengthMismatch {
                left: names.len(),
                right: columns.len(),
            });
        }
        for col in &columns {
            if col.len() != labels.len() {
                return Err(Error::LengthMismatch {
                    left: col.len(),
                    right: labels.len(),
                });
            }
        }
        if let Some(&code) = labels.iter().find(|&&l| l >= NUM_CLASSES) {
            return Err(Error::CodeOutOfRange {
                code,
                n_classes: NUM_CLASSES,
            });
        }
        Ok(FeatureTable { names, columns, labels })
    }

    /// All 14 predictors as raw integer codes.
    pub fn from_dataset(dataset: &Dataset) -> Self {
        let names = Variable::ALL.iter().map(|v| v.name().to_string()).collect();
        let columns = Variable::ALL
            .iter()
            .map(|&v| dataset.records().iter().map(|r| f64::from(r.get(v))).collect())
            .collect();
        let labels = dataset.labels().iter().map(|l| l.index()).collect();
        FeatureTable { names, columns, labels }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    /// Adds a column; used to probe robustness against noise variables.
    pub fn with_column(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.labels.len() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: self.labels.len(),
            });
        }
        self.names.push(name.into());
        self.columns.push(values);
        Ok(self)
    }

    /// Columns reordered by `order` (a permutation of column indices).
    pub fn permuted(&self, order: &[usize]) -> Self {
        FeatureTable {
            names: order.iter().map(|&i| self.names[i].clone()).collect(),
            columns: order.iter().map(|&i| self.columns[i].clone()).collect(),
            labels: self.labels.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: [usize; NUM_CLASSES],
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtraTree {
    nodes: Vec<Node>,
    /// Sum over splits of `n·G(node) − n_l·G(left) − n_r·G(right)`.
    impurity_decrease: Vec<f64>,
}

fn gini(counts: &[usize; NUM_CLASSES], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn tally(labels: &[usize], idx: &[usize]) -> [usize; NUM_CLASSES] {
    let mut c = [0; NUM_CLASSES];
    for &i in idx {
        c[labels[i]] += 1;
    }
    c
}

impl ExtraTree {
    fn grow(table: &FeatureTable, seed: u64, name_hashes: &[u64]) -> ExtraTree {
        let n_features = table.columns.len();
        let mut idx: Vec<usize> = (0..table.n_rows()).collect();
        let mut nodes: Vec<Node> = Vec::new();
        let mut impurity_decrease = vec![0.0; n_features];
        // (range start, range end, parent slot to patch, is_left)
        let mut stack: Vec<(usize, usize, Option<(usize, bool)>)> = vec![(0, idx.len(), None)];

        while let Some((start, end, parent)) = stack.pop() {
            let node_id = nodes.len();
            if let Some((p, is_left)) = parent {
                if let Node::Split { left, right, .. } = &mut nodes[p] {
                    if is_left {
                        *left = node_id;
                    } else {
                        *right = node_id;
                    }
                }
            }
            let members = &idx[start..end];
            let counts = tally(&table.labels, members);
            let n = members.len();
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            if pure || n < 2 {
                nodes.push(Node::Leaf { counts });
                continue;
            }

            let node_gini = gini(&counts, n);
            let node_key = rng::splitmix64(seed ^ rng::splitmix64(node_id as u64));
            // (gain, tie key, feature, threshold)
            let mut best: Option<(f64, u64, usize, f64)> = None;
            for f in 0..n_features {
                let col = &table.columns[f];
                let (lo, hi) = members.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    (lo.min(col[i]), hi.max(col[i]))
                });
                if lo >= hi {
                    continue;
                }
                let u = rng::unit_from_hash(rng::splitmix64(node_key ^ name_hashes[f]));
                let threshold = lo + u * (hi - lo);
                let mut left = [0usize; NUM_CLASSES];
                let mut n_left = 0;
                for &i in members {
                    if col[i] <= threshold {
                        left[table.labels[i]] += 1;
                        n_left += 1;
                    }
                }
                let mut right = counts;
                for c in 0..NUM_CLASSES {
                    right[c] -= left[c];
                }
                let n_right = n - n_left;
                let gain = n as f64 * node_gini
                    - n_left as f64 * gini(&left, n_left)
                    - n_right as f64 * gini(&right, n_right);
                // equal gains go to a per-node draw keyed by name, so
                // duplicated columns win equally often in either order
                let tie = rng::splitmix64(node_key.rotate_left(17) ^ name_hashes[f]);
                let better = match best {
                    None => true,
                    Some((g, bt, bf, _)) => {
                        gain > g || (gain == g && (tie, &table.names[f]) < (bt, &table.names[bf]))
                    }
                };
                if better {
                    best = Some((gain, tie, f, threshold));
                }
            }

            let Some((gain, _, feature, threshold)) = best else {
                nodes.push(Node::Leaf { counts });
                continue;
            };
            impurity_decrease[feature] += gain.max(0.0);
            let col = &table.columns[feature];
            let slice = &mut idx[start..end];
            let mut split = 0;
            for k in 0..slice.len() {
                if col[slice[k]] <= threshold {
                    slice.swap(k, split);
                    split += 1;
                }
            }
            nodes.push(Node::Split {
                feature,
                threshold,
                left: usize::MAX,
                right: usize::MAX,
            });
            // left child is popped first, so node ids follow preorder
            stack.push((start + split, end, Some((node_id, false))));
            stack.push((start, start + split, Some((node_id, true))));
        }
        ExtraTree { nodes, impurity_decrease }
    }

    fn leaf_counts(&self, row: &[f64]) -> &[usize; NUM_CLASSES] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return counts,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of internal nodes testing `feature`.
    pub fn splits_on(&self, feature: usize) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Split { feature: f, .. } if *f == feature))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtraTreesForest {
    pub trees: Vec<ExtraTree>,
    pub n_trees: usize,
    pub seed: u64,
    feature_names: Vec<String>,
}

impl ExtraTreesForest {
    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Mean of the trees' leaf class distributions.
    pub fn predict_proba(&self, row: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        if row.len() != self.feature_names.len() {
            return Err(Error::DimensionMismatch {
                expected: self.feature_names.len(),
                got: row.len(),
            });
        }
        let mut p = [0.0; NUM_CLASSES];
        for tree in &self.trees {
            let counts = tree.leaf_counts(row);
            let total: usize = counts.iter().sum();
            for c in 0..NUM_CLASSES {
                p[c] += counts[c] as f64 / total as f64;
            }
        }
        for v in &mut p {
            *v /= self.trees.len() as f64;
        }
        Ok(p)
    }

    pub fn splits_on(&self, feature: usize) -> usize {
        self.trees.iter().map(|t| t.splits_on(feature)).sum()
    }
}

pub const DEFAULT_N_TREES: usize = 100;

pub fn fit_extra_trees(table: &FeatureTable, n_trees: usize, seed: u64) -> Result<ExtraTreesForest> {
    if n_trees == 0 {
        return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
    }
    let present = tally(&table.labels, &(0..table.n_rows()).collect::<Vec<_>>());
    if present.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::SingleClass);
    }
    let name_hashes: Vec<u64> = table.names.iter().map(|n| rng::hash_label(n)).collect();
    let base = rng::derive_seed(seed, "extra-trees");
    let trees = (0..n_trees)
        .into_par_iter()
        .map(|t| ExtraTree::grow(table, rng::derive_seed_index(base, t as u64), &name_hashes))
        .collect();
    Ok(ExtraTreesForest {
        trees,
        n_trees,
        seed,
        feature_names: table.names.clone(),
    })
}

/// Variable scores sorted descending; ties keep input order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceRanking {
    scores: Vec<(String, f64)>,
}

impl ImportanceRanking {
    pub fn new(scores: Vec<(String, f64)>) -> Result<Self> {
        if scores.iter().any(|(_, s)| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter("importance scores must be finite and non-negative".into()));
        }
        let mut scores = scores;
        scores.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        Ok(ImportanceRanking { scores })
    }

    pub fn scores(&self) -> &[(String, f64)] {
        &self.scores
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.scores.iter().find(|(n, _)| n == name).map(|(_, s)| *s)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("variable,importance\n");
        for (name, score) in &self.scores {
            let _ = writeln!(out, "{name},{score:.4}");
        }
        out
    }

    /// Text table with a keep/drop column for the given selection.
    pub fn render_table(&self, selected: &[String]) -> String {
        let width = self.scores.iter().map(|(n, _)| n.len()).max().unwrap_or(8).max(8);
        let mut out = format!("{:<width$}  {:>10}  {}\n", "Variable", "Importance", "Status");
        for (name, score) in &self.scores {
            let status = if selected.contains(name) { "kept" } else { "dropped" };
            let _ = writeln!(out, "{name:<width$}  {score:>10.4}  {status}");
        }
        out
    }
}

/// The published per-variable importance scores, keyed by column name.
pub fn published_scores() -> ImportanceRanking {
    let scores = [
        ("first_harmful_event_location", 0.1675),
        ("vehicle_count", 0.1349),
        ("road_type", 0.1251),
        ("weather_condition", 0.1103),
        ("belt_condition", 0.1104),
        ("light_condition", 0.0864),
        ("alcohol_condition", 0.0652),
        ("area_type", 0.0486),
        ("traffic_control_device", 0.0415),
        ("young_driver_condition", 0.0355),
        ("night_condition", 0.0261),
        ("traffic_control_type", 0.0251),
        ("drug_condition", 0.0133),
        ("pedestrian_action", 0.0094),
    ];
    ImportanceRanking::new(scores.iter().map(|&(n, s)| (n.to_string(), s)).collect())
        .expect("published scores are valid")
}

/// Normalized mean decrease in Gini impurity per variable.
pub fn importances(forest: &ExtraTreesForest) -> ImportanceRanking {
    let m = forest.feature_names.len();
    // sum in name order so the result does not depend on column order
    let mut by_name: Vec<usize> = (0..m).collect();
    by_name.sort_by(|&a, &b| forest.feature_names[a].cmp(&forest.feature_names[b]));
    let mut mean = vec![0.0; m];
    let mut contributing = 0usize;
    for tree in &forest.trees {
        let total: f64 = by_name.iter().map(|&f| tree.impurity_decrease[f]).sum();
        if total > 0.0 {
            contributing += 1;
            for (acc, v) in mean.iter_mut().zip(&tree.impurity_decrease) {
                *acc += v / total;
            }
        }
    }
    let sum: f64 = by_name.iter().map(|&f| mean[f]).sum();
    let scores = if contributing == 0 || sum <= 0.0 {
        // no split anywhere: nothing distinguishes the variables
        vec![1.0 / m as f64; m]
    } else {
        mean.iter().map(|v| v / sum).collect()
    };
    ImportanceRanking::new(forest.feature_names.iter().cloned().zip(scores).collect())
        .expect("scores are non-negative")
}

/// Variables scoring strictly above `threshold`, minus `force_drop`, in
/// ranking order.
pub fn select_variables<S: AsRef<str>>(
    ranking: &ImportanceRanking,
    threshold: f64,
    force_drop: &[S],
) -> Result<Vec<String>> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!("threshold must lie in [0, 1), got {threshold}")));
    }
    let selected: Vec<String> = ranking
        .scores
        .iter()
        .filter(|(name, score)| *score > threshold && !force_drop.iter().any(|d| d.as_ref() == name))
        .map(|(name, _)| name.clone())
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(selected)
}
