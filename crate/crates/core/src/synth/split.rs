//! Stratified train/test partitioning: independent sampling without
//! replacement inside each stratum, with test counts apportioned by largest
//! remainder so the overall test size is `round(N * fraction)`.

use std::collections::BTreeMap;
use std::fmt::Debug;

use rand::seq::SliceRandom;

use crate::rng::{mix, seeded};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SplitError {
    #[error("stratum {stratum} has {size} sample(s); at least 2 are needed")]
    StratumTooSmall { stratum: String, size: usize },
    #[error("test fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("nothing to split")]
    Empty,
}

/// Test-set size for each stratum.
///
/// Each count is `floor(n f)` or `ceil(n f)`; the ceilings go to the largest
/// fractional parts (ties to the earlier stratum) until the total reaches
/// `round(N f)`. Counts are then nudged into `[1, n - 1]` so both sides of
/// every stratum are non-empty.
pub fn test_counts(sizes: &[usize], fraction: f64) -> Result<Vec<usize>, SplitError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SplitError::InvalidFraction(fraction));
    }
    // guards against 0.2 * 100 landing a hair under 20
    const SNAP: f64 = 1e-9;
    let exact: Vec<f64> = sizes.iter().map(|&n| n as f64 * fraction).collect();
    let mut counts: Vec<usize> = exact.iter().map(|&e| (e + SNAP).floor() as usize).collect();
    let total: usize = sizes.iter().sum();
    let target = (total as f64 * fraction + SNAP).round() as usize;
    let assigned: usize = counts.iter().sum();

    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take(target.saturating_sub(assigned)) {
        if (counts[i] as f64) < exact[i] {
            counts[i] += 1;
        }
    }
    for (c, &n) in counts.iter_mut().zip(sizes) {
        *c = (*c).clamp(1, n.saturating_sub(1).max(1));
    }
    Ok(counts)
}

/// Splits item indices into `(train, test)` by stratum key. Both lists are
/// returned in ascending index order.
pub fn stratified_indices<K: Ord + Debug>(
    keys: &[K],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), SplitError> {
    if keys.is_empty() {
        return Err(SplitError::Empty);
    }
    let mut strata: BTreeMap<&K, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        strata.entry(k).or_default().push(i);
    }
    if let Some((k, members)) = strata.iter().find(|(_, m)| m.len() < 2) {
        return Err(SplitError::StratumTooSmall { stratum: format!("{k:?}"), size: members.len() });
    }
    let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
    let counts = test_counts(&sizes, fraction)?;

    let mut train = Vec::with_capacity(keys.len());
    let mut test = Vec::new();
    for (ordinal, (members, &n_test)) in strata.values().zip(&counts).enumerate() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut seeded(mix(seed, ordinal as u64)));
        test.extend_from_slice(&shuffled[..n_test]);
        train.extend_from_slice(&shuffled[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
