use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::linalg::Point;
use crate::simulation::derive_seed;

use super::ProbabilityModel;

const N_FEATURES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForestParams {
    pub ntree: usize,
    /// Features drawn at random as split candidates in each node.
    pub mtry: usize,
    /// Nodes with at most this many rows are not split.
    pub min_node: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            ntree: 500,
            mtry: 1,
            min_node: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        negatives: usize,
        positives: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Positive vote of the leaf reached by `p`: 1, 0, or ½ for a tied leaf.
    fn vote(&self, p: Point) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => k = if p[feature] <= threshold { left } else { right },
                Node::Leaf {
                    negatives,
                    positives,
                } => {
                    return match positives.cmp(&negatives) {
                        std::cmp::Ordering::Greater => 1.0,
                        std::cmp::Ordering::Less => 0.0,
                        std::cmp::Ordering::Equal => 0.5,
                    }
                }
            }
        }
    }
}

/// Bagged CART ensemble with Gini splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    /// Out-of-bag misclassification rate over rows left out by at least one
    /// tree.
    pub oob_error: f64,
    trees: Vec<Tree>,
}

/// Grows `params.ntree` trees; tree `k` draws its bootstrap sample and split
/// features from a stream seeded by `(seed, k)`, so the result does not
/// depend on `exec`.
pub fn forest_fit(
    x: &[Point],
    y: &[bool],
    params: ForestParams,
    seed: u64,
    exec: Execution,
) -> ForestModel {
    assert_eq!(x.len(), y.len());
    assert!(!x.is_empty() && params.ntree >= 1);
    let n = x.len();
    let mtry = params.mtry.clamp(1, N_FEATURES);
    let grown: Vec<(Tree, Vec<bool>)> = exec.map(params.ntree, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let mut in_bag = vec![false; n];
        for &r in &rows {
            in_bag[r] = true;
        }
        let mut builder = Builder {
            x,
            y,
            mtry,
            min_node: params.min_node.max(1),
            rng,
            nodes: Vec::new(),
        };
        let mut rows = rows;
        builder.grow(&mut rows);
        (Tree { nodes: builder.nodes }, in_bag)
    });

    let mut votes = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for (tree, in_bag) in &grown {
        for i in (0..n).filter(|&i| !in_bag[i]) {
            votes[i] += tree.vote(x[i]);
            counts[i] += 1;
        }
    }
    let (mut wrong, mut scored) = (0usize, 0usize);
    for i in (0..n).filter(|&i| counts[i] > 0) {
        scored += 1;
        let p = votes[i] / counts[i] as f64;
        if (p > 0.5) != y[i] {
            wrong += 1;
        }
    }
    ForestModel {
        params,
        oob_error: if scored == 0 {
            f64::NAN
        } else {
            wrong as f64 / scored as f64
        },
        trees: grown.into_iter().map(|(t, _)| t).collect(),
    }
}

impl ForestModel {
    pub fn ntree(&self) -> usize {
        self.trees.len()
    }

    /// `[1 − v, v]` where `v` is the mean positive vote over trees.
    pub fn predict_proba(&self, p: Point) -> [f64; 2] {
        let v = self.trees.iter().map(|t| t.vote(p)).sum::<f64>() / self.trees.len() as f64;
        [1.0 - v, v]
    }
}

impl ProbabilityModel for ForestModel {
    fn probability(&self, p: Point) -> f64 {
        self.predict_proba(p)[1]
    }
}

struct Builder<'a> {
    x: &'a [Point],
    y: &'a [bool],
    mtry: usize,
    min_node: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, rows: &mut [usize]) -> usize {
        let id = self.nodes.len();
        let positives = rows.iter().filter(|&&r| self.y[r]).count();
        let negatives = rows.len() - positives;
        self.nodes.push(Node::Leaf {
            negatives,
            positives,
        });
        if positives == 0 || negatives == 0 || rows.len() <= self.min_node {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(rows, positives) else {
            return id;
        };
        let mut split = 0;
        for k in 0..rows.len() {
            if self.x[rows[k]][feature] <= threshold {
                rows.swap(k, split);
                split += 1;
            }
        }
        let (lo, hi) = rows.split_at_mut(split);
        let left = self.grow(lo);
        let right = self.grow(hi);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Lowest weighted Gini impurity over the sampled features; features that
    /// are constant in the node are replaced by the remaining ones.
    fn best_split(&mut self, rows: &[usize], positives: usize) -> Option<(usize, f64)> {
        let order: Vec<usize> = sample(&mut self.rng, N_FEATURES, N_FEATURES).into_vec();
        let mut best: Option<(f64, usize, f64)> = None;
        for (k, &feature) in order.iter().enumerate() {
            if k >= self.mtry && best.is_some() {
                break;
            }
            if let Some((score, threshold)) = self.scan(rows, positives, feature) {
                if best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn scan(&self, rows: &[usize], positives: usize, feature: usize) -> Option<(f64, f64)> {
        let mut sorted: Vec<(f64, bool)> =
            rows.iter().map(|&r| (self.x[r][feature], self.y[r])).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = sorted.len();
        // n·Gini of a node with p positives out of m is 2p(m − p)/m
        let impurity = |p: f64, m: f64| 2.0 * p * (m - p) / m;
        let mut left_pos = 0usize;
        let mut best: Option<(f64, f64)> = None;
        for k in 0..n - 1 {
            left_pos += sorted[k].1 as usize;
            if sorted[k].0 == sorted[k + 1].0 {
                continue;
            }
            let m_l = (k + 1) as f64;
            let m_r = (n - k - 1) as f64;
            let score = impurity(left_pos as f64, m_l)
                + impurity((positives - left_pos) as f64, m_r);
            if best.is_none_or(|(s, _)| score < s) {
                best = Some((score, 0.5 * (sorted[k].0 + sorted[k + 1].0)));
            }
        }
        best
    }
}
