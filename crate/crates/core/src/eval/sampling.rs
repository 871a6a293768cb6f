use crate::error::{Error, Result};
use crate::numerics::Rng;

use super::stats::average_ranks;

pub const LEVELS: usize = 4;

/// Selection probability of each level `1..=4` when the target level is `target`.
pub fn level_weights(target: usize) -> Result<[f64; LEVELS]> {
    if !(1..=LEVELS).contains(&target) {
        return Err(Error::invalid(format!("target level {target} outside 1..={LEVELS}")));
    }
    let mut w = [0.0; LEVELS];
    for (i, slot) in w.iter_mut().enumerate() {
        *slot = 1.0 / ((target as f64 - (i + 1) as f64).abs() + 1.0);
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

/// Quality levels from quartiles of `oracle_norm`; level 1 is the worst
/// quarter. Tied values share the level of their average rank.
pub fn levels_from_oracle(oracle_norm: &[f64]) -> Vec<usize> {
    let n = oracle_norm.len() as f64;
    average_ranks(oracle_norm)
        .into_iter()
        .map(|r| 1 + ((LEVELS as f64 * (r - 1.0) / n).floor() as usize).min(LEVELS - 1))
        .collect()
}

/// Draws `n` item indices with replacement: a level is picked by
/// [`level_weights`], then an item uniformly within that level.
pub fn quality_biased_sample(levels: &[usize], target: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let weights = level_weights(target)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); LEVELS];
    for (i, &l) in levels.iter().enumerate() {
        if !(1..=LEVELS).contains(&l) {
            return Err(Error::invalid(format!("item {i} has level {l} outside 1..={LEVELS}")));
        }
        members[l - 1].push(i);
    }
    if let Some(missing) = members.iter().position(Vec::is_empty) {
        return Err(Error::invalid(format!("level {} has no items", missing + 1)));
    }
    let mut rng = Rng::new(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut level = LEVELS - 1;
        for (l, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                level = l;
                break;
            }
        }
        let pool = &members[level];
        out.push(pool[rng.below(pool.len())]);
    }
    Ok(out)
}
