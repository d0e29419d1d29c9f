//! Stagewise least-squares gradient boosting with shallow trees.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tree::{Tree, TreeParams};

#[derive(Debug, Clone, PartialEq)]
pub struct BoostingParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub subsample: f64,
    pub min_leaf: usize,
}

impl Default for BoostingParams {
    fn default() -> Self {
        Self { rounds: 500, learning_rate: 0.05, max_depth: 3, subsample: 0.8, min_leaf: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBoosting {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl GradientBoosting {
    pub fn fit(x: &[Vec<f64>], y: &[f64], hp: &BoostingParams, seed: u64) -> Self {
        Self::fit_traced(x, y, hp, seed).0
    }

    /// Also returns the training MSE after each round.
    pub fn fit_traced(x: &[Vec<f64>], y: &[f64], hp: &BoostingParams, seed: u64) -> (Self, Vec<f64>) {
        let n = y.len();
        let base = y.iter().sum::<f64>() / n as f64;
        let mut f = vec![base; n];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = TreeParams { max_depth: Some(hp.max_depth), min_leaf: hp.min_leaf, mtry: None };
        let m = ((n as f64 * hp.subsample).round() as usize).clamp(1, n);
        let mut trees = Vec::with_capacity(hp.rounds);
        let mut trace = Vec::with_capacity(hp.rounds);
        for _ in 0..hp.rounds {
            let residual: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a - b).collect();
            let rows: Vec<usize> = if m == n {
                (0..n).collect()
            } else {
                let mut r = index::sample(&mut rng, n, m).into_vec();
                r.sort_unstable();
                r
            };
            let tree = Tree::fit(x, &residual, &rows, &params, &mut rng);
            let mut row = vec![0.0; x.len()];
            for i in 0..n {
                for (j, c) in x.iter().enumerate() {
                    row[j] = c[i];
                }
                f[i] += hp.learning_rate * tree.predict_row(&row);
            }
            trace.push(y.iter().zip(&f).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64);
            trees.push(tree);
        }
        (Self { base, learning_rate: hp.learning_rate, trees }, trace)
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.base + self.trees.iter().map(|t| self.learning_rate * t.predict_row(row)).sum::<f64>()
    }
}
