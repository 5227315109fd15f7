//! Seeded train/validation/test partitioning.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Label, Labeled};
use crate::error::{Error, Result};
use crate::kernel::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    /// Train, validation and test fractions.
    pub ratios: [f64; 3],
    #[serde(default)]
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ratios: [0.6, 0.2, 0.2],
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.ratios.iter().sum();
        if self.ratios.iter().any(|r| !(*r >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios must be non-negative and sum to 1, got {:?}",
                self.ratios
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Partitions `users` into three disjoint sets. Membership is drawn from the
/// seed; within each set users keep their input order.
pub fn split_dataset<T: Labeled + Clone>(users: &[T], spec: &SplitSpec) -> Result<Split<T>> {
    spec.validate()?;
    let mut groups: Vec<Vec<usize>> = if spec.stratified {
        let mut neg = Vec::new();
        let mut pos = Vec::new();
        for (i, u) in users.iter().enumerate() {
            match u.label() {
                Some(Label::Normal) => neg.push(i),
                Some(Label::Depressed) => pos.push(i),
                None => return Err(Error::MissingLabel(u.user_id().to_string())),
            }
        }
        vec![neg, pos]
    } else {
        vec![(0..users.len()).collect()]
    };

    let mut rng = stream_rng(spec.seed, Stream::Split);
    for g in &mut groups {
        g.shuffle(&mut rng);
    }
    let mut alloc: Vec<[usize; 3]> = groups.iter().map(|g| allocate(g.len(), &spec.ratios)).collect();
    fill_empty_splits(&mut alloc, &spec.ratios);

    let mut parts: [Vec<usize>; 3] = Default::default();
    for (g, a) in groups.iter().zip(&alloc) {
        let mut offset = 0;
        for (s, &n) in a.iter().enumerate() {
            parts[s].extend_from_slice(&g[offset..offset + n]);
            offset += n;
        }
    }
    let take = |idx: &mut Vec<usize>| -> Vec<T> {
        idx.sort_unstable();
        idx.iter().map(|&i| users[i].clone()).collect()
    };
    let [mut a, mut b, mut c] = parts;
    Ok(Split {
        train: take(&mut a),
        val: take(&mut b),
        test: take(&mut c),
    })
}

/// Largest-remainder apportionment of `n` items by `ratios`; ties go to the
/// earlier split.
fn allocate(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut out = [0usize; 3];
    for (o, e) in out.iter_mut().zip(&exact) {
        *o = (e + 1e-9).floor() as usize;
    }
    let mut remaining = n.saturating_sub(out.iter().sum());
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - out[a] as f64;
        let fb = exact[b] - out[b] as f64;
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &s in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        if ratios[s] > 0.0 {
            out[s] += 1;
            remaining -= 1;
        }
    }
    out
}

/// Moves single users into any split that has a positive ratio but ended up
/// empty, taking from the largest split that can spare one.
fn fill_empty_splits(alloc: &mut [[usize; 3]], ratios: &[f64; 3]) {
    for s in 0..3 {
        if ratios[s] <= 0.0 {
            continue;
        }
        let total = |alloc: &[[usize; 3]], k: usize| alloc.iter().map(|a| a[k]).sum::<usize>();
        if total(alloc, s) > 0 {
            continue;
        }
        let donor = (0..3)
            .filter(|&d| d != s && total(alloc, d) > 1)
            .max_by_key(|&d| (total(alloc, d), std::cmp::Reverse(d)));
        let Some(d) = donor else { continue };
        if let Some(g) = (0..alloc.len()).filter(|&g| alloc[g][d] > 0).max_by_key(|&g| alloc[g][d]) {
            alloc[g][d] -= 1;
            alloc[g][s] += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::UserRecord;
    use proptest::prelude::*;

    fn users(pos: usize, neg: usize) -> Vec<UserRecord> {
        (0..pos + neg)
            .map(|i| UserRecord {
                user_id: format!("u{i}"),
                label: Some(if i < pos { Label::Depressed } else { Label::Normal }),
                tweets: vec![],
            })
            .collect()
    }

    fn positives(us: &[UserRecord]) -> usize {
        us.iter().filter(|u| u.label == Some(Label::Depressed)).count()
    }

    #[test]
    fn stratified_ten_users() {
        let s = split_dataset(&users(5, 5), &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (6, 2, 2));
        assert_eq!((positives(&s.train), positives(&s.val), positives(&s.test)), (3, 1, 1));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let us = users(50, 50);
        let spec = SplitSpec { seed: 1, ..SplitSpec::default() };
        assert_eq!(split_dataset(&us, &spec).unwrap(), split_dataset(&us, &spec).unwrap());
        let other = SplitSpec { seed: 2, ..SplitSpec::default() };
        assert_ne!(split_dataset(&us, &spec).unwrap(), split_dataset(&us, &other).unwrap());
    }

    #[test]
    fn stratified_requires_labels() {
        let mut us = users(2, 2);
        us[1].label = None;
        assert!(matches!(split_dataset(&us, &SplitSpec::default()), Err(Error::MissingLabel(_))));
        let plain = SplitSpec { stratified: false, ..SplitSpec::default() };
        assert!(split_dataset(&us, &plain).is_ok());
    }

    #[test]
    fn bad_ratios_rejected() {
        let spec = SplitSpec { ratios: [0.5, 0.2, 0.2], ..SplitSpec::default() };
        assert!(split_dataset(&users(2, 2), &spec).is_err());
    }

    #[test]
    fn small_corpus_fills_every_split() {
        let s = split_dataset(&users(2, 1), &SplitSpec::default()).unwrap();
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), 3);
        assert!(!s.train.is_empty() && !s.val.is_empty() && !s.test.is_empty());
    }

    proptest! {
        #[test]
        fn partition_is_exact(pos in 0usize..40, neg in 0usize..40, seed in any::<u64>(), stratified in any::<bool>()) {
            let us = users(pos, neg);
            let spec = SplitSpec { seed, stratified, ..SplitSpec::default() };
            let s = split_dataset(&us, &spec).unwrap();
            let mut ids: Vec<&str> = s.train.iter().chain(&s.val).chain(&s.test).map(|u| u.user_id.as_str()).collect();
            prop_assert_eq!(ids.len(), us.len());
            ids.sort_unstable();
            ids.dedup();
            prop_assert_eq!(ids.len(), us.len());
            if stratified && pos + neg >= 10 {
                for (part, ratio) in [(&s.train, 0.6), (&s.val, 0.2), (&s.test, 0.2)] {
                    let p = positives(part) as f64;
                    prop_assert!((p - ratio * pos as f64).abs() <= 1.0 + 1e-9);
                    let n = (part.len() - positives(part)) as f64;
                    prop_assert!((n - ratio * neg as f64).abs() <= 1.0 + 1e-9);
                }
            }
        }
    }
}
