//! CART with donor draws from the terminal node.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::DesignMatrix;
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CartControls {
    pub min_leaf: usize,
    pub max_depth: usize,
}

impl Default for CartControls {
    fn default() -> Self {
        CartControls { min_leaf: 5, max_depth: 10 }
    }
}

impl CartControls {
    pub fn validate(&self) -> Result<()> {
        if self.min_leaf == 0 {
            return Err(Error::config("cart.min_leaf", "must be positive"));
        }
        if self.max_depth == 0 {
            return Err(Error::config("cart.max_depth", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Observed-row indices whose targets serve as donors.
    Leaf(Vec<usize>),
}

/// A fitted regression (variance) or classification (Gini) tree.
#[derive(Clone, Debug)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    targets: Vec<f64>,
}

struct Builder<'a> {
    x: &'a nalgebra::DMatrix<f64>,
    y: &'a [f64],
    n_levels: Option<usize>,
    controls: CartControls,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    /// Impurity times node size: SSE for regression, `n * Gini` for
    /// classification.
    fn impurity(&self, rows: &[usize]) -> f64 {
        let n = rows.len() as f64;
        match self.n_levels {
            None => {
                let (s, ss) = rows.iter().fold((0.0, 0.0), |(s, ss), &i| (s + self.y[i], ss + self.y[i] * self.y[i]));
                (ss - s * s / n).max(0.0)
            }
            Some(k) => {
                let mut counts = vec![0.0; k];
                for &i in rows {
                    counts[self.y[i] as usize] += 1.0;
                }
                n - counts.iter().map(|c| c * c).sum::<f64>() / n
            }
        }
    }

    /// Best `(gain, feature, threshold)` over all features.
    fn best_split(&self, rows: &[usize], parent: f64) -> Option<(f64, usize, f64)> {
        let n = rows.len();
        let min_leaf = self.controls.min_leaf;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = rows.to_vec();
        for j in 0..self.x.ncols() {
            let col = self.x.column(j);
            sorted.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
            if col[sorted[0]] == col[sorted[n - 1]] {
                continue;
            }
            // Running sufficient statistics of the left part.
            let (mut s, mut ss) = (0.0, 0.0);
            let (tot_s, tot_ss) = sorted.iter().fold((0.0, 0.0), |(s, ss), &i| (s + self.y[i], ss + self.y[i] * self.y[i]));
            let k = self.n_levels.unwrap_or(0);
            let mut left_counts = vec![0.0; k];
            let mut total_counts = vec![0.0; k];
            if k > 0 {
                for &i in &sorted {
                    total_counts[self.y[i] as usize] += 1.0;
                }
            }
            for pos in 1..n {
                let i = sorted[pos - 1];
                let yi = self.y[i];
                if k > 0 {
                    left_counts[yi as usize] += 1.0;
                } else {
                    s += yi;
                    ss += yi * yi;
                }
                if pos < min_leaf || n - pos < min_leaf || col[i] == col[sorted[pos]] {
                    continue;
                }
                let (nl, nr) = (pos as f64, (n - pos) as f64);
                let child = if k > 0 {
                    let (mut ql, mut qr) = (0.0, 0.0);
                    for c in 0..k {
                        let r = total_counts[c] - left_counts[c];
                        ql += left_counts[c] * left_counts[c];
                        qr += r * r;
                    }
                    (nl - ql / nl) + (nr - qr / nr)
                } else {
                    let (rs, rss) = (tot_s - s, tot_ss - ss);
                    (ss - s * s / nl).max(0.0) + (rss - rs * rs / nr).max(0.0)
                };
                let gain = parent - child;
                if gain > 1e-12 * parent.max(1e-300) && best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, j, 0.5 * (col[i] + col[sorted[pos]])));
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(Vec::new()));
        let parent = self.impurity(&rows);
        let split = if depth < self.controls.max_depth && rows.len() >= 2 * self.controls.min_leaf && parent > 0.0 {
            self.best_split(&rows, parent)
        } else {
            None
        };
        match split {
            None => self.nodes[id] = Node::Leaf(rows),
            Some((_, feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[(i, feature)] <= threshold);
                let left = self.grow(l, depth + 1);
                let right = self.grow(r, depth + 1);
                self.nodes[id] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
        }
        id
    }
}

impl RegressionTree {
    /// `n_levels` is `Some(k)` for a categorical target coded `0..k`.
    pub fn fit(x: &DesignMatrix, y: &[f64], n_levels: Option<usize>, controls: CartControls) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::InvalidArgument(format!("{} targets for {} rows", y.len(), x.nrows())));
        }
        if y.is_empty() {
            return Err(Error::InvalidArgument("no observed rows to fit".into()));
        }
        controls.validate()?;
        if let Some(k) = n_levels {
            if y.iter().any(|&v| v.fract() != 0.0 || v < 0.0 || v >= k as f64) {
                return Err(Error::InvalidArgument("categorical target outside its levels".into()));
            }
        }
        let mut b = Builder {
            x: x.matrix(),
            y,
            n_levels,
            controls,
            nodes: Vec::new(),
        };
        b.grow((0..y.len()).collect(), 0);
        Ok(RegressionTree {
            nodes: b.nodes,
            targets: y.to_vec(),
        })
    }

    fn leaf_of(&self, row: &[f64]) -> &[usize] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf(rows) => return rows,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Observed targets in the leaf that `row` falls into.
    pub fn donors(&self, row: &[f64]) -> Vec<f64> {
        self.leaf_of(row).iter().map(|&i| self.targets[i]).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

/// Fits a tree on the observed rows and gives each missing row the value
/// of a donor drawn uniformly from its leaf.
pub fn impute_cart(
    obs: &DesignMatrix,
    y: &[f64],
    n_levels: Option<usize>,
    mis: &DesignMatrix,
    rng: &mut RngStream,
    controls: CartControls,
) -> Result<Vec<f64>> {
    if obs.ncols() != mis.ncols() {
        return Err(Error::InvalidArgument("observed and missing designs differ in width".into()));
    }
    let tree = RegressionTree::fit(obs, y, n_levels, controls)?;
    let m = mis.matrix();
    let mut row = vec![0.0; m.ncols()];
    Ok((0..m.nrows())
        .map(|i| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[(i, j)];
            }
            let leaf = tree.leaf_of(&row);
            tree.targets[leaf[rng.random_range(0..leaf.len())]]
        })
        .collect())
}
