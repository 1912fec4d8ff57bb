use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EatingOccasion;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.70,
            val: 0.10,
            test: 0.20,
        }
    }
}

/// Disjoint train/validation/test partitions of occasion ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
    pub ratios: SplitRatios,
}

/// Shuffles ids under `seed`; test takes `floor(0.20 N)`, validation
/// `floor(0.10 N)` and training the remainder.
pub fn split<S: AsRef<str>>(ids: &[S], seed: u64) -> Result<DatasetSplit> {
    split_with(ids, seed, SplitRatios::default())
}

pub fn split_with<S: AsRef<str>>(ids: &[S], seed: u64, ratios: SplitRatios) -> Result<DatasetSplit> {
    let n = ids.len();
    if n < 3 {
        return Err(Error::TooFewInstances { needed: 3, actual: n });
    }
    let mut order: Vec<String> = ids.iter().map(|s| s.as_ref().to_string()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (ratios.test * n as f64).floor() as usize;
    let n_val = (ratios.val * n as f64).floor() as usize;
    let val = order.split_off(n - n_val);
    let test = order.split_off(n - n_val - n_test);
    Ok(DatasetSplit {
        train: order,
        val,
        test,
        seed,
        ratios,
    })
}

impl DatasetSplit {
    /// Occasions in each partition, following the split's id order.
    pub fn partition<'a>(
        &self,
        occasions: &'a [EatingOccasion],
    ) -> (Vec<&'a EatingOccasion>, Vec<&'a EatingOccasion>, Vec<&'a EatingOccasion>) {
        let by_id: std::collections::HashMap<&str, &EatingOccasion> =
            occasions.iter().map(|o| (o.id(), o)).collect();
        let pick = |ids: &[String]| ids.iter().filter_map(|id| by_id.get(id.as_str()).copied()).collect();
        (pick(&self.train), pick(&self.val), pick(&self.test))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("m{i:03}")).collect()
    }

    #[test]
    fn sizes_for_175() {
        let s = split(&ids(175), 0).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (123, 17, 35));
    }

    #[test]
    fn deterministic_under_seed() {
        assert_eq!(split(&ids(40), 11).unwrap(), split(&ids(40), 11).unwrap());
        let a = split(&ids(40), 1).unwrap();
        let b = split(&ids(40), 2).unwrap();
        assert_ne!(a.train, b.train);
    }

    #[test]
    fn too_few() {
        assert!(matches!(split(&ids(2), 0), Err(Error::TooFewInstances { actual: 2, .. })));
        let s = split(&ids(3), 0).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (3, 0, 0));
    }

    proptest! {
        #[test]
        fn partitions_are_disjoint_exhaustive_and_sized(n in 3usize..400, seed in any::<u64>(), other in any::<u64>()) {
            let all = ids(n);
            let s = split(&all, seed).unwrap();
            prop_assert_eq!(s.test.len(), n / 5);
            prop_assert_eq!(s.val.len(), n / 10);
            prop_assert_eq!(s.train.len(), n - n / 5 - n / 10);
            let union: HashSet<_> = s.train.iter().chain(&s.val).chain(&s.test).collect();
            prop_assert_eq!(union.len(), n);
            let t = split(&all, other).unwrap();
            prop_assert_eq!((t.train.len(), t.val.len(), t.test.len()), (s.train.len(), s.val.len(), s.test.len()));
        }
    }
}
