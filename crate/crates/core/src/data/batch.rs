use crate::error::{Error, Result};
use crate::model::PairBatch;
use crate::numerics::Rng;

/// One padded training batch and the corpus indices it holds.
#[derive(Debug, Clone)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub pairs: PairBatch,
}

/// Padded footprint of a pair: `BOS x EOS` plus `BOS y EOS`.
pub fn pair_tokens(src: &[usize], tgt: &[usize]) -> usize {
    src.len() + tgt.len() + 4
}

/// Length-bucketed batches whose padded size `rows · (max_src + max_tgt + 4)`
/// stays within `max_tokens`. Pairs of equal length are ordered by a seeded
/// shuffle, and the batch order is shuffled with the same seed.
pub fn batchify(
    encoded: &[(Vec<usize>, Vec<usize>)],
    max_tokens: usize,
    seed: u64,
) -> Result<Vec<Batch>> {
    if encoded.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    if let Some((i, (s, t))) = encoded
        .iter()
        .enumerate()
        .find(|(_, (s, t))| pair_tokens(s, t) > max_tokens)
    {
        return Err(Error::invalid(format!(
            "pair {i} needs {} tokens, above max_tokens {max_tokens}",
            pair_tokens(s, t)
        )));
    }
    let mut rng = Rng::new(seed);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    rng.shuffle(&mut order);
    order.sort_by_key(|&i| (encoded[i].0.len(), encoded[i].1.len()));

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let (mut max_s, mut max_t) = (0, 0);
    for i in order {
        let (s, t) = (&encoded[i].0, &encoded[i].1);
        let ns = max_s.max(s.len());
        let nt = max_t.max(t.len());
        if !current.is_empty() && (current.len() + 1) * (ns + nt + 4) > max_tokens {
            groups.push(std::mem::take(&mut current));
            max_s = s.len();
            max_t = t.len();
        } else {
            max_s = ns;
            max_t = nt;
        }
        current.push(i);
    }
    if !current.is_empty() {
        groups.push(current);
    }
    rng.shuffle(&mut groups);

    groups
        .into_iter()
        .map(|indices| {
            let pairs: Vec<(Vec<usize>, Vec<usize>)> =
                indices.iter().map(|&i| encoded[i].clone()).collect();
            Ok(Batch { pairs: PairBatch::from_pairs(&pairs)?, indices })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PAD_ID;

    fn corpus(n: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut rng = Rng::new(3);
        (0..n)
            .map(|_| {
                let ls = 5 + rng.below(11);
                let lt = 5 + rng.below(11);
                ((0..ls).map(|_| 4 + rng.below(40)).collect(), (0..lt).map(|_| 4 + rng.below(40)).collect())
            })
            .collect()
    }

    #[test]
    fn partition_and_budget() {
        let c = corpus(300);
        let batches = batchify(&c, 200, 1).unwrap();
        let mut seen: Vec<usize> = batches.iter().flat_map(|b| b.indices.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..300).collect::<Vec<_>>());
        for b in &batches {
            let real = b.pairs.src.real_tokens() + b.pairs.tgt_full.real_tokens();
            assert!(real <= 200);
            assert!(b.pairs.rows() * (b.pairs.src.len + b.pairs.tgt_full.len) <= 200);
        }
    }

    #[test]
    fn masks_flag_padding_exactly() {
        let c = corpus(50);
        for b in batchify(&c, 400, 2).unwrap() {
            for (r, &i) in b.indices.iter().enumerate() {
                let src_len = c[i].0.len() + 2;
                let valid = b.pairs.src.row_valid(r);
                assert!(valid[..src_len].iter().all(|&v| v));
                assert!(valid[src_len..].iter().all(|&v| !v));
                assert!(b.pairs.src.row(r)[src_len..].iter().all(|&id| id == PAD_ID));
            }
        }
    }

    #[test]
    fn longest_pair_budget_gives_singletons() {
        let c: Vec<_> = (0..20).map(|i| (vec![4 + i % 3; 6], vec![5; 6])).collect();
        let budget = c.iter().map(|(s, t)| pair_tokens(s, t)).max().unwrap();
        let batches = batchify(&c, budget, 0).unwrap();
        assert_eq!(batches.len(), 20);
        assert!(batches.iter().all(|b| b.indices.len() == 1));
    }

    #[test]
    fn deterministic_and_rejects_oversize() {
        let c = corpus(100);
        let a: Vec<_> = batchify(&c, 300, 9).unwrap().into_iter().map(|b| b.indices).collect();
        let b: Vec<_> = batchify(&c, 300, 9).unwrap().into_iter().map(|b| b.indices).collect();
        assert_eq!(a, b);
        assert!(batchify(&c, 10, 9).is_err());
    }
}
