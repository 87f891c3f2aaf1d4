use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowLabel;

/// Assignment of every row to one of `k` test folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// `assignment[row]` is the test fold of `row`, in `0..k`.
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn n_rows(&self) -> usize {
        self.assignment.len()
    }

    /// Rows tested in fold `f`, ascending.
    pub fn test_indices(&self, f: usize) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.assignment[i] == f).collect()
    }

    /// Rows trained on in fold `f`, ascending.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.assignment[i] != f).collect()
    }

    /// Test-fold sizes, by fold.
    pub fn test_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn train_sizes(&self) -> Vec<usize> {
        self.test_sizes().into_iter().map(|s| self.n_rows() - s).collect()
    }

    /// Elephants per test fold.
    pub fn positives_per_fold(&self, labels: &[FlowLabel]) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for (&f, l) in self.assignment.iter().zip(labels) {
            counts[f] += usize::from(l.is_elephant());
        }
        counts
    }
}

/// Stratified k-fold assignment. Each class is shuffled with `seed`, mice are
/// laid out before elephants, and position `i` of that sequence goes to fold
/// `i mod k`. Fold sizes therefore differ by at most one, the larger folds
/// come first, and each class is spread over the folds as evenly as its
/// count allows. A class with fewer than `k` members only gets size balancing.
pub fn stratified_kfold(labels: &[FlowLabel], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("k must be >= 2, got {k}")));
    }
    if k > labels.len() {
        return Err(Error::Config(format!("k = {k} exceeds the {} available rows", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(labels.len());
    for class in [FlowLabel::Mouse, FlowLabel::Elephant] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if !members.is_empty() && members.len() < k {
            log::warn!("class {class:?} has {} rows for {k} folds; some folds get none", members.len());
        }
        members.shuffle(&mut rng);
        order.extend(members);
    }
    let mut assignment = vec![0; labels.len()];
    for (pos, &row) in order.iter().enumerate() {
        assignment[row] = pos % k;
    }
    Ok(FoldPlan { k, seed, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(n: usize, elephants: usize) -> Vec<FlowLabel> {
        (0..n).map(|i| FlowLabel::from(i < elephants)).collect()
    }

    #[test]
    fn singleton_folds() {
        let plan = stratified_kfold(&labels(10, 5), 10, 0).unwrap();
        assert_eq!(plan.test_sizes(), vec![1; 10]);
    }

    #[test]
    fn exact_division() {
        let l = labels(100, 30);
        let plan = stratified_kfold(&l, 10, 4).unwrap();
        assert_eq!(plan.positives_per_fold(&l), vec![3; 10]);
        assert_eq!(plan.test_sizes(), vec![10; 10]);
    }

    #[test]
    fn rejects_bad_k() {
        assert!(stratified_kfold(&labels(5, 1), 1, 0).is_err());
        assert!(stratified_kfold(&labels(5, 1), 6, 0).is_err());
        assert!(stratified_kfold(&labels(5, 1), 5, 0).is_ok());
    }

    #[test]
    fn train_test_complement() {
        let plan = stratified_kfold(&labels(23, 7), 4, 2).unwrap();
        for f in 0..4 {
            let mut all = plan.train_indices(f);
            all.extend(plan.test_indices(f));
            all.sort_unstable();
            assert_eq!(all, (0..23).collect::<Vec<_>>());
        }
        assert_eq!(
            plan.train_sizes().iter().zip(plan.test_sizes()).map(|(a, b)| a + b).collect::<Vec<_>>(),
            vec![23; 4]
        );
    }

    proptest! {
        #[test]
        fn plan_invariants(n in 2usize..400, share in 0.0f64..1.0, k in 2usize..12, seed in 0u64..1000) {
            prop_assume!(k <= n);
            let e = (n as f64 * share) as usize;
            let l = labels(n, e);
            let plan = stratified_kfold(&l, k, seed).unwrap();
            let sizes = plan.test_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            for c in plan.positives_per_fold(&l) {
                prop_assert!((c as f64 - e as f64 / k as f64).abs() <= 1.0);
            }
            let mice: Vec<FlowLabel> = l.iter().map(|x| FlowLabel::from(!x.is_elephant())).collect();
            for c in plan.positives_per_fold(&mice) {
                prop_assert!((c as f64 - (n - e) as f64 / k as f64).abs() <= 1.0);
            }
            prop_assert_eq!(&plan, &stratified_kfold(&l, k, seed).unwrap());
        }
    }
}
