//! Exact-greedy variance-reduction regression tree shared by the forest and
//! the booster.

use rand::seq::index;
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features tried per split; `None` tries all.
    pub mtry: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Tree {
    /// Grows a tree on `rows` of column-major `x`.
    pub fn fit<R: Rng>(x: &[Vec<f64>], y: &[f64], rows: &[usize], params: &TreeParams, rng: &mut R) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        tree.grow(x, y, rows.to_vec(), 0, params, rng);
        tree
    }

    fn grow<R: Rng>(&mut self, x: &[Vec<f64>], y: &[f64], rows: Vec<usize>, depth: usize, params: &TreeParams, rng: &mut R) -> usize {
        let id = self.nodes.len();
        let n = rows.len();
        let mean = rows.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
        self.nodes.push(Node::Leaf(mean));
        let min_leaf = params.min_leaf.max(1);
        if params.max_depth.is_some_and(|d| depth >= d) || n < 2 * min_leaf {
            return id;
        }
        let p = x.len();
        let features: Vec<usize> = match params.mtry {
            Some(m) if m < p => {
                let mut f = index::sample(rng, p, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        };
        let centred: Vec<f64> = rows.iter().map(|&i| y[i] - mean).collect();
        let sse: f64 = centred.iter().map(|v| v * v).sum();
        // pure up to rounding of the mean
        let noise = 1e-12 * (mean.abs() + 1.0);
        if centred.iter().all(|v| v.abs() <= noise) {
            return id;
        }
        // a candidate must beat the incumbent by a margin so that rounding
        // noise cannot reorder equal-gain splits
        let margin = 1e-10 * sse;
        let mut best: Option<Best> = None;
        let mut order: Vec<usize> = (0..n).collect();
        for &f in &features {
            let col = &x[f];
            order.sort_by(|&a, &b| col[rows[a]].total_cmp(&col[rows[b]]).then(a.cmp(&b)));
            let total: f64 = centred.iter().sum();
            let mut left = 0.0;
            for k in 0..n - 1 {
                left += centred[order[k]];
                let nl = k + 1;
                let nr = n - nl;
                let a = col[rows[order[k]]];
                let b = col[rows[order[k + 1]]];
                if nl < min_leaf || nr < min_leaf || a == b {
                    continue;
                }
                let right = total - left;
                let gain = left * left / nl as f64 + right * right / nr as f64 - total * total / n as f64;
                if best.as_ref().is_none_or(|bst| gain > bst.gain + margin) {
                    let mid = a + (b - a) / 2.0;
                    let threshold = if mid < b { mid } else { a };
                    best = Some(Best { gain, feature: f, threshold });
                }
            }
        }
        let Some(best) = best else { return id };
        if !(best.gain > margin) {
            return id;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[best.feature][i] <= best.threshold);
        let left = self.grow(x, y, l, depth + 1, params, rng);
        let right = self.grow(x, y, r, depth + 1, params, rng);
        self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left, right };
        id
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf(v) => return *v,
                Node::Split { feature, threshold, left, right } => {
                    id = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}
