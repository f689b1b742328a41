use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::seed::Rng;

/// Requested size of each split. `attack_eval` is the number of members and
/// also the number of non-members in the balanced evaluation set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub target_train: usize,
    pub target_test: usize,
    pub shadow_train: usize,
    pub shadow_test: usize,
    pub attack_eval: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        SplitSizes {
            target_train: 1000,
            target_test: 1000,
            shadow_train: 1000,
            shadow_test: 1000,
            attack_eval: 500,
        }
    }
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.target_train + self.target_test + self.shadow_train + self.shadow_test
    }
}

/// Disjoint index sets over one dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub target_train: Vec<usize>,
    pub target_test: Vec<usize>,
    pub shadow_train: Vec<usize>,
    pub shadow_test: Vec<usize>,
    /// Subset of `target_train`.
    pub attack_eval_members: Vec<usize>,
    /// Subset of `target_test`, same size as `attack_eval_members`.
    pub attack_eval_nonmembers: Vec<usize>,
}

impl SplitPlan {
    /// Checks disjointness, subset and balance invariants.
    pub fn check(&self) -> Result<(), String> {
        let set = |v: &[usize]| v.iter().copied().collect::<HashSet<_>>();
        let parts = [
            ("target_train", &self.target_train),
            ("target_test", &self.target_test),
            ("shadow_train", &self.shadow_train),
            ("shadow_test", &self.shadow_test),
        ];
        let mut seen = HashSet::new();
        for (name, part) in parts {
            for &i in part.iter() {
                if !seen.insert(i) {
                    return Err(format!(
                        "index {i} of {name} appears in more than one split"
                    ));
                }
            }
        }
        let train = set(&self.target_train);
        let test = set(&self.target_test);
        if !self.attack_eval_members.iter().all(|i| train.contains(i)) {
            return Err("attack-eval members not drawn from target_train".into());
        }
        if !self.attack_eval_nonmembers.iter().all(|i| test.contains(i)) {
            return Err("attack-eval non-members not drawn from target_test".into());
        }
        if self.attack_eval_members.len() != self.attack_eval_nonmembers.len() {
            return Err("attack-eval set is unbalanced".into());
        }
        if set(&self.attack_eval_members).len() != self.attack_eval_members.len()
            || set(&self.attack_eval_nonmembers).len() != self.attack_eval_nonmembers.len()
        {
            return Err("attack-eval set repeats an index".into());
        }
        Ok(())
    }
}

/// Assigns a uniformly random disjoint subset of `0..n` to each split and
/// draws the balanced attack-evaluation sets.
pub fn make_split(n: usize, sizes: &SplitSizes, seed: u64) -> Result<SplitPlan, DataError> {
    if sizes.total() > n {
        return Err(DataError::Sizing {
            what: "target/shadow splits".into(),
            required: sizes.total(),
            available: n,
        });
    }
    let smallest = sizes.target_train.min(sizes.target_test);
    if sizes.attack_eval > smallest {
        return Err(DataError::Sizing {
            what: "balanced attack-eval set (per side)".into(),
            required: sizes.attack_eval,
            available: smallest,
        });
    }
    let mut rng = Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut rest = order.as_slice();
    let mut take = |k: usize| {
        let (head, tail) = rest.split_at(k);
        rest = tail;
        head.to_vec()
    };
    let target_train = take(sizes.target_train);
    let target_test = take(sizes.target_test);
    let shadow_train = take(sizes.shadow_train);
    let shadow_test = take(sizes.shadow_test);
    let attack_eval_members = sample_indices(&target_train, sizes.attack_eval, &mut rng);
    let attack_eval_nonmembers = sample_indices(&target_test, sizes.attack_eval, &mut rng);
    Ok(SplitPlan {
        target_train,
        target_test,
        shadow_train,
        shadow_test,
        attack_eval_members,
        attack_eval_nonmembers,
    })
}

/// `k` distinct elements of `pool`, without replacement.
pub fn sample_indices(pool: &[usize], k: usize, rng: &mut Rng) -> Vec<usize> {
    index::sample(rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sizes(a: usize, b: usize, c: usize, d: usize, e: usize) -> SplitSizes {
        SplitSizes {
            target_train: a,
            target_test: b,
            shadow_train: c,
            shadow_test: d,
            attack_eval: e,
        }
    }

    #[test]
    fn quarter_split_holds_invariants() {
        let plan = make_split(1000, &sizes(250, 250, 250, 250, 200), 1).unwrap();
        plan.check().unwrap();
        assert_eq!(plan.attack_eval_members.len(), 200);
    }

    #[test]
    fn oversized_request_fails() {
        let err = make_split(1000, &sizes(250, 250, 250, 251, 10), 1).unwrap_err();
        assert!(matches!(
            err,
            DataError::Sizing {
                required: 1001,
                available: 1000,
                ..
            }
        ));
        assert!(make_split(1000, &sizes(100, 50, 0, 0, 60), 1).is_err());
    }

    #[test]
    fn seeded() {
        let s = sizes(100, 100, 100, 100, 50);
        assert_eq!(
            make_split(500, &s, 3).unwrap(),
            make_split(500, &s, 3).unwrap()
        );
        assert_ne!(
            make_split(500, &s, 3).unwrap(),
            make_split(500, &s, 4).unwrap()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn invariants_hold(
            a in 1usize..60, b in 1usize..60, c in 0usize..60, d in 0usize..60,
            slack in 0usize..20, eval_frac in 0.0f64..=1.0, seed in any::<u64>(),
        ) {
            let eval = ((a.min(b) as f64) * eval_frac).floor() as usize;
            let s = sizes(a, b, c, d, eval);
            let plan = make_split(s.total() + slack, &s, seed).unwrap();
            prop_assert!(plan.check().is_ok());
            prop_assert_eq!(plan.target_train.len(), a);
            prop_assert_eq!(plan.shadow_test.len(), d);
            prop_assert_eq!(plan.attack_eval_nonmembers.len(), eval);
        }
    }
}
