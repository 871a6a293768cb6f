use std::path::Path;

use serde::{Deserialize, Serialize};

use super::corpus::tokenize;
use crate::error::{Error, Result};
use crate::eval::edit_distance;
use crate::numerics::Rng;

/// Applies `k` random edits to `reference`. Each edit is a substitution,
/// deletion or insertion (chosen uniformly) at a uniform valid position,
/// with replacement tokens drawn from `pool`. Deletions are skipped on a
/// length-1 sequence so the result is never empty.
pub fn degrade<T: Clone>(reference: &[T], k: usize, pool: &[T], seed: u64) -> Vec<T> {
    let mut out = reference.to_vec();
    if k == 0 {
        return out;
    }
    assert!(!pool.is_empty(), "degrade needs a non-empty token pool");
    let mut rng = Rng::new(seed);
    for _ in 0..k {
        match rng.below(3) {
            0 if !out.is_empty() => {
                let pos = rng.below(out.len());
                out[pos] = pool[rng.below(pool.len())].clone();
            }
            1 if out.len() > 1 => {
                let pos = rng.below(out.len());
                out.remove(pos);
            }
            1 => {}
            _ => {
                let pos = rng.below(out.len() + 1);
                out.insert(pos, pool[rng.below(pool.len())].clone());
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradedItem {
    pub id: u64,
    pub src: String,
    #[serde(rename = "ref")]
    pub reference: String,
    pub hyp: String,
    pub k: usize,
    pub oracle: f64,
    pub oracle_norm: f64,
}

impl DegradedItem {
    pub fn new(id: u64, src: &[String], reference: &[String], hyp: &[String], k: usize) -> Self {
        let dist = edit_distance(hyp, reference);
        let denom = hyp.len().max(reference.len()).max(1);
        Self {
            id,
            src: src.join(" "),
            reference: reference.join(" "),
            hyp: hyp.join(" "),
            k,
            oracle: 0.0 - dist as f64,
            oracle_norm: 1.0 - dist as f64 / denom as f64,
        }
    }

    pub fn src_tokens(&self) -> Vec<String> {
        tokenize(&self.src)
    }

    pub fn ref_tokens(&self) -> Vec<String> {
        tokenize(&self.reference)
    }

    pub fn hyp_tokens(&self) -> Vec<String> {
        tokenize(&self.hyp)
    }
}

/// Reference hypotheses with controlled corruption and an exact oracle label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DegradedSet {
    pub items: Vec<DegradedItem>,
}

impl DegradedSet {
    /// Item `i` takes pair `i mod pairs.len()` and edit count `ks[i mod ks.len()]`;
    /// its edits use sub-stream `i` of `seed`.
    pub fn build(
        pairs: &[(Vec<String>, Vec<String>)],
        n: usize,
        ks: &[usize],
        pool: &[String],
        seed: u64,
    ) -> Result<Self> {
        if pairs.is_empty() || ks.is_empty() {
            return Err(Error::Empty("degraded set inputs"));
        }
        let root = Rng::new(seed);
        let items = (0..n)
            .map(|i| {
                let (src, reference) = &pairs[i % pairs.len()];
                let k = ks[i % ks.len()];
                let item_seed = root.substream(i as u64).seed();
                let hyp = degrade(reference, k, pool, item_seed);
                DegradedItem::new(i as u64, src, reference, &hyp, k)
            })
            .collect();
        Ok(Self { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(b'\t')
            .from_path(path)?;
        for item in &self.items {
            w.serialize(item)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .from_path(path)?;
        let items = r.deserialize().collect::<std::result::Result<Vec<DegradedItem>, _>>()?;
        Ok(Self { items })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool() -> Vec<String> {
        (0..40).map(|i| format!("t{i}")).collect()
    }

    fn reference(len: usize) -> Vec<String> {
        (0..len).map(|i| format!("t{}", i * 3 % 40)).collect()
    }

    #[test]
    fn zero_edits_is_identity() {
        let r = reference(7);
        assert_eq!(degrade(&r, 0, &pool(), 1), r);
        let item = DegradedItem::new(0, &r, &r, &r, 0);
        assert_eq!(item.oracle, 0.0);
        assert_eq!(item.oracle_norm, 1.0);
    }

    #[test]
    fn never_empties() {
        let r = reference(1);
        for seed in 0..200 {
            assert!(!degrade(&r, 10, &pool(), seed).is_empty());
        }
    }

    #[test]
    fn edit_distance_bounded_by_k() {
        let r = reference(10);
        for seed in 0..2000u64 {
            let k = (seed % 9) as usize;
            let h = degrade(&r, k, &pool(), seed);
            assert!(edit_distance(&h, &r) <= k);
        }
    }

    #[test]
    fn mean_distance_for_three_edits() {
        let r = reference(10);
        let trials = 10_000;
        let total: usize = (0..trials)
            .map(|seed| edit_distance(&degrade(&r, 3, &pool(), seed as u64), &r))
            .sum();
        let mean = total as f64 / trials as f64;
        assert!((2.0..=3.0).contains(&mean), "mean distance {mean}");
    }

    #[test]
    fn tsv_roundtrip_and_header() {
        let pairs = vec![(vec!["s1".to_string(), "s2".to_string()], reference(4))];
        let set = DegradedSet::build(&pairs, 9, &[0, 1, 2], &pool(), 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.tsv");
        set.save(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("id\tsrc\tref\thyp\tk\toracle\toracle_norm\n"));
        assert_eq!(DegradedSet::load(&p).unwrap(), set);
        assert_eq!(set.items[3].k, 0);
        assert_eq!(set.items[3].hyp, set.items[3].reference);
    }
}
