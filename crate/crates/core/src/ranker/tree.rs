//! Weighted CART regression tree (squared-error splits).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 3,
            min_samples_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

/// Row indices sorted by each feature column, ties by row index. Reused
/// across boosting stages since the design matrix never changes.
#[derive(Debug, Clone)]
pub struct SortedColumns {
    orders: Vec<Vec<u32>>,
}

impl SortedColumns {
    pub fn new(x: &[Vec<f64>]) -> Self {
        let n_features = x.first().map_or(0, Vec::len);
        let orders = (0..n_features)
            .map(|f| {
                let mut idx: Vec<u32> = (0..x.len() as u32).collect();
                idx.sort_by(|&a, &b| x[a as usize][f].total_cmp(&x[b as usize][f]).then(a.cmp(&b)));
                idx
            })
            .collect();
        SortedColumns { orders }
    }
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    w: &'a [f64],
    params: TreeParams,
    nodes: Vec<TreeNode>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Grower<'_> {
    fn leaf_value(&self, rows: &[u32]) -> f64 {
        let (sw, swy) = rows.iter().fold((0.0, 0.0), |(sw, swy), &r| {
            let r = r as usize;
            (sw + self.w[r], swy + self.w[r] * self.y[r])
        });
        if sw > 0.0 {
            swy / sw
        } else {
            rows.iter().map(|&r| self.y[r as usize]).sum::<f64>() / rows.len().max(1) as f64
        }
    }

    fn best_split(&self, lists: &[Vec<u32>]) -> Option<BestSplit> {
        let rows = &lists[0];
        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let (tw, twy) = rows.iter().fold((0.0, 0.0), |(sw, swy), &r| {
            let r = r as usize;
            (sw + self.w[r], swy + self.w[r] * self.y[r])
        });
        if tw <= 0.0 {
            return None;
        }
        let parent = twy * twy / tw;
        let mut best: Option<BestSplit> = None;

        for (f, order) in lists.iter().enumerate() {
            let (mut lw, mut lwy) = (0.0, 0.0);
            for i in 0..n - 1 {
                let r = order[i] as usize;
                lw += self.w[r];
                lwy += self.w[r] * self.y[r];
                let left_n = i + 1;
                if left_n < min_leaf || n - left_n < min_leaf {
                    continue;
                }
                let here = self.x[r][f];
                let next = self.x[order[i + 1] as usize][f];
                if here == next {
                    continue;
                }
                let rw = tw - lw;
                if lw <= 0.0 || rw <= 0.0 {
                    continue;
                }
                let rwy = twy - lwy;
                let score = lwy * lwy / lw + rwy * rwy / rw;
                if score <= parent * (1.0 + 1e-12) + 1e-300 {
                    continue;
                }
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let mid = here + (next - here) / 2.0;
                    let threshold = if mid < next { mid } else { here };
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, lists: Vec<Vec<u32>>, depth: usize) -> usize {
        let id = self.nodes.len();
        let rows = &lists[0];
        let pure = rows.windows(2).all(|p| self.y[p[0] as usize] == self.y[p[1] as usize]);
        let split = if depth >= self.params.max_depth || pure || rows.len() < 2 {
            None
        } else {
            self.best_split(&lists)
        };
        let Some(split) = split else {
            let value = self.leaf_value(rows);
            self.nodes.push(TreeNode::Leaf { value });
            return id;
        };

        let goes_left = |r: u32| self.x[r as usize][split.feature] <= split.threshold;
        let (left, right): (Vec<Vec<u32>>, Vec<Vec<u32>>) = lists
            .iter()
            .map(|order| order.iter().partition(|&&r| goes_left(r)))
            .unzip();

        self.nodes.push(TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: 0,
            right: 0,
        });
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        if let TreeNode::Split { left, right, .. } = &mut self.nodes[id] {
            *left = l;
            *right = r;
        }
        id
    }
}

impl RegressionTree {
    pub fn fit(x: &[Vec<f64>], y: &[f64], w: &[f64], params: TreeParams) -> Self {
        Self::fit_sorted(x, y, w, params, &SortedColumns::new(x))
    }

    pub fn fit_sorted(x: &[Vec<f64>], y: &[f64], w: &[f64], params: TreeParams, sorted: &SortedColumns) -> Self {
        assert_eq!(x.len(), y.len());
        assert_eq!(x.len(), w.len());
        if x.is_empty() {
            return RegressionTree {
                nodes: vec![TreeNode::Leaf { value: 0.0 }],
            };
        }
        let mut grower = Grower {
            x,
            y,
            w,
            params,
            nodes: Vec::new(),
        };
        let lists = if sorted.orders.is_empty() {
            vec![(0..x.len() as u32).collect()]
        } else {
            sorted.orders.clone()
        };
        if sorted.orders.is_empty() {
            // No features: a single leaf.
            let value = grower.leaf_value(&lists[0]);
            return RegressionTree {
                nodes: vec![TreeNode::Leaf { value }],
            };
        }
        grower.grow(lists, 0);
        RegressionTree { nodes: grower.nodes }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
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
}
