use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub seed: u64,
    pub k: usize,
    /// Fold index per row.
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn valid_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        (0..self.k).map(|f| self.fold_of.iter().filter(|&&x| x == f).count()).collect()
    }
}

/// Seeded shuffle dealt into k contiguous blocks; the first n % k blocks get
/// one extra row.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 || n < k {
        return Err(Error::TooFewRows { n, k });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; n];
    let (base, extra) = (n / k, n % k);
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &row in &perm[pos..pos + size] {
            fold_of[row] = f;
        }
        pos += size;
    }
    Ok(FoldAssignment { seed, k, fold_of })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sizes_for_557() {
        assert_eq!(kfold_split(557, 5, 1).unwrap().sizes(), vec![112, 112, 111, 111, 111]);
        assert_eq!(kfold_split(5, 5, 1).unwrap().sizes(), vec![1; 5]);
        assert!(matches!(kfold_split(4, 5, 1), Err(Error::TooFewRows { n: 4, k: 5 })));
    }

    proptest! {
        #[test]
        fn balanced_and_deterministic(n in 2usize..400, k in 2usize..10, seed in any::<u64>()) {
            prop_assume!(n >= k);
            let a = kfold_split(n, k, seed).unwrap();
            let s = a.sizes();
            prop_assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
            prop_assert_eq!(s.iter().sum::<usize>(), n);
            prop_assert_eq!(a, kfold_split(n, k, seed).unwrap());
        }
    }
}
