//! Bagged regression trees.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tree::{Tree, TreeParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub trees: usize,
    /// Features per split; `None` means ceil(p / 3).
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { trees: 300, mtry: None, min_leaf: 2, bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
}

impl RandomForest {
    pub fn fit(x: &[Vec<f64>], y: &[f64], hp: &ForestParams, seed: u64) -> Self {
        let n = y.len();
        let p = x.len();
        let params = TreeParams {
            max_depth: None,
            min_leaf: hp.min_leaf,
            mtry: Some(hp.mtry.unwrap_or(p.div_ceil(3)).clamp(1, p.max(1))),
        };
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let seeds: Vec<u64> = (0..hp.trees).map(|_| master.next_u64()).collect();
        let trees = crate::par::map(&seeds, |&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let rows: Vec<usize> = if hp.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
            Tree::fit(x, y, &rows, &params, &mut rng)
        });
        Self { trees }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len().max(1) as f64
    }
}
