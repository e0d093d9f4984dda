use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{UseEvent, UseEventError};

/// Held-out sizes used once the corpus reaches this many events.
pub const FULL_CORPUS: usize = 10_000;
pub const FULL_HELD_OUT: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<UseEvent>,
    pub valid: Vec<UseEvent>,
    pub test: Vec<UseEvent>,
    pub unseen_test: Vec<UseEvent>,
    pub warnings: Vec<String>,
}

/// Target size of each held-out split: 500 for a full corpus, else 5%
/// (at least one).
pub fn held_out_size(n: usize) -> usize {
    if n >= FULL_CORPUS {
        FULL_HELD_OUT
    } else {
        (n / 20).max(1)
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = x;
    while parent[c] != r {
        let next = parent[c];
        parent[c] = r;
        c = next;
    }
    r
}

/// Groups event indices so that events sharing an object name fall in the
/// same group. Groups are ordered by their first member.
fn components(events: &[UseEvent]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..events.len()).collect();
    let mut owner: BTreeMap<String, usize> = BTreeMap::new();
    for (i, e) in events.iter().enumerate() {
        for key in e.object_keys() {
            match owner.get(&key) {
                Some(&j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
                None => {
                    owner.insert(key, i);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..events.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Split membership by corpus index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
    pub unseen_test: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Assigns every corpus index to exactly one split.
///
/// unseen_test takes whole object-sharing groups, visited in seeded random
/// order, whenever the group still fits the target size; its object names
/// therefore never occur in any other split. valid and test are then drawn
/// from the shuffled remainder and the rest is train.
pub fn split_indices(events: &[UseEvent], seed: u64) -> Result<SplitIndices, UseEventError> {
    let n = events.len();
    if n < 4 {
        return Err(UseEventError::CorpusTooSmall(n));
    }
    let target = held_out_size(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();

    let mut groups = components(events);
    groups.shuffle(&mut rng);
    let mut unseen: Vec<usize> = Vec::new();
    let mut rest: Vec<usize> = Vec::new();
    for g in groups {
        // The remainder must still fill valid and test and leave some train.
        let fits = unseen.len() + g.len() <= target && n - unseen.len() - g.len() > 2 * target;
        if fits {
            unseen.extend(g);
        } else {
            rest.extend(g);
        }
    }
    if unseen.is_empty() {
        let msg = "no group of events has objects disjoint from the rest; unseen_test is empty";
        log::warn!("{msg}");
        warnings.push(msg.to_string());
    } else if unseen.len() < target {
        warnings.push(format!(
            "unseen_test holds {} events, short of the {target} target",
            unseen.len()
        ));
    }
    unseen.sort_unstable();
    rest.sort_unstable();
    rest.shuffle(&mut rng);
    let k = target.min(rest.len() / 3);
    Ok(SplitIndices {
        valid: rest[..k].to_vec(),
        test: rest[k..2 * k].to_vec(),
        train: rest[2 * k..].to_vec(),
        unseen_test: unseen,
        warnings,
    })
}

/// Splits a corpus into train, valid, test, and unseen_test; see
/// [`split_indices`].
pub fn make_splits(events: &[UseEvent], seed: u64) -> Result<Splits, UseEventError> {
    let idx = split_indices(events, seed)?;
    let take = |idx: &[usize]| idx.iter().map(|&i| events[i].clone()).collect::<Vec<_>>();
    Ok(Splits {
        train: take(&idx.train),
        valid: take(&idx.valid),
        test: take(&idx.test),
        unseen_test: take(&idx.unseen_test),
        warnings: idx.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizing_policy() {
        assert_eq!(held_out_size(10_000), 500);
        assert_eq!(held_out_size(25_000), 500);
        assert_eq!(held_out_size(2_000), 100);
        assert_eq!(held_out_size(4), 1);
    }
}
