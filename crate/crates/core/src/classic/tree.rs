use super::{check_width, Classifier};
use crate::error::{Error, Result};
use crate::{EncodedMatrix, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { max_depth: 12, min_leaf: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    /// Rows with `column = 0` go left, `column = 1` right.
    Split { column: usize, left: usize, right: usize },
    Leaf { counts: [usize; NUM_CLASSES] },
}

/// Binary-split CART tree over a one-hot matrix. Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTreeModel {
    nodes: Vec<TreeNode>,
    n_features: usize,
}

pub fn gini_impurity(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|&c| (c as f64 / n as f64).powi(2)).sum::<f64>()
}

impl DecisionTreeModel {
    /// Builds a tree from explicit nodes, checking child indices.
    pub fn from_nodes(nodes: Vec<TreeNode>, n_features: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidParameter("tree needs at least one node".into()));
        }
        for node in &nodes {
            if let TreeNode::Split { column, left, right } = *node {
                if column >= n_features || left >= nodes.len() || right >= nodes.len() {
                    return Err(Error::InvalidParameter("split refers outside the tree".into()));
                }
            }
        }
        Ok(DecisionTreeModel { nodes, n_features })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn leaf_for(&self, row: &[f64]) -> &[usize; NUM_CLASSES] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { counts } => return counts,
                TreeNode::Split { column, left, right } => {
                    at = if row[*column] >= 0.5 { *right } else { *left };
                }
            }
        }
    }
}

struct Grower<'a> {
    train: &'a EncodedMatrix,
    config: &'a TreeConfig,
    nodes: Vec<TreeNode>,
}

impl Grower<'_> {
    fn grow(&mut self, members: Vec<usize>, depth: usize, used: &mut Vec<bool>) -> usize {
        let labels = self.train.labels();
        let mut counts = [0usize; NUM_CLASSES];
        for &i in &members {
            counts[labels[i].index()] += 1;
        }
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { counts });
        let n = members.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.config.max_depth || n < 2 * self.config.min_leaf {
            return id;
        }

        let d = self.train.n_cols();
        let mut ones = vec![[0usize; NUM_CLASSES]; d];
        for &i in &members {
            let c = labels[i].index();
            for (j, &v) in self.train.row(i).iter().enumerate() {
                if v != 0 {
                    ones[j][c] += 1;
                }
            }
        }
        let parent = gini_impurity(&counts);
        let mut best: Option<(f64, usize)> = None;
        for j in (0..d).filter(|&j| !used[j]) {
            let right = ones[j];
            let n_right: usize = right.iter().sum();
            let n_left = n - n_right;
            if n_left < self.config.min_leaf || n_right < self.config.min_leaf {
                continue;
            }
            let mut left = counts;
            for c in 0..NUM_CLASSES {
                left[c] -= right[c];
            }
            let gain = parent
                - (n_left as f64 / n as f64) * gini_impurity(&left)
                - (n_right as f64 / n as f64) * gini_impurity(&right);
            if best.is_none_or(|(g, _)| gain > g + 1e-12) {
                best = Some((gain, j));
            }
        }
        let Some((_, column)) = best else {
            return id;
        };

        let (right_rows, left_rows): (Vec<usize>, Vec<usize>) =
            members.into_iter().partition(|&i| self.train.row(i)[column] != 0);
        used[column] = true;
        let left = self.grow(left_rows, depth + 1, used);
        let right = self.grow(right_rows, depth + 1, used);
        used[column] = false;
        self.nodes[id] = TreeNode::Split { column, left, right };
        id
    }
}

/// Greedy top-down growth on Gini decrease; ties go to the lower column.
pub fn tree_fit(train: &EncodedMatrix, config: &TreeConfig) -> Result<DecisionTreeModel> {
    if config.max_depth == 0 || config.min_leaf == 0 {
        return Err(Error::InvalidParameter("max_depth and min_leaf must be at least 1".into()));
    }
    if train.n_rows() == 0 {
        return Err(Error::EmptyTrain);
    }
    let mut grower = Grower { train, config, nodes: Vec::new() };
    let mut used = vec![false; train.n_cols()];
    grower.grow((0..train.n_rows()).collect(), 0, &mut used);
    Ok(DecisionTreeModel { nodes: grower.nodes, n_features: train.n_cols() })
}

/// Class distribution of the leaf the row is routed to.
pub fn tree_predict(model: &DecisionTreeModel, row: &[f64]) -> Result<Vec<f64>> {
    check_width(model.n_features, row)?;
    let counts = model.leaf_for(row);
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Ok(vec![1.0 / NUM_CLASSES as f64; NUM_CLASSES]);
    }
    Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

impl Classifier for DecisionTreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        tree_predict(self, row)
    }
}
