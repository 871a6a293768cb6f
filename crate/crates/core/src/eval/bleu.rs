//! BLEU with up to 4-grams and exponential smoothing of zero n-gram counts,
//! following SacreBLEU's `exp` method (sentence level uses effective order).

use std::collections::HashMap;
use std::hash::Hash;

const MAX_ORDER: usize = 4;

/// Clipped n-gram matches and totals for orders 1..=4, plus lengths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub correct: [usize; MAX_ORDER],
    pub total: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn new<T: Eq + Hash>(hyp: &[T], reference: &[T]) -> Self {
        let mut stats = Self { hyp_len: hyp.len(), ref_len: reference.len(), ..Self::default() };
        for n in 1..=MAX_ORDER {
            let ref_counts = ngram_counts(reference, n);
            let hyp_counts = ngram_counts(hyp, n);
            stats.total[n - 1] = hyp.len().saturating_sub(n - 1);
            stats.correct[n - 1] = hyp_counts
                .iter()
                .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
                .sum();
        }
        stats
    }

    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..MAX_ORDER {
            self.correct[n] += other.correct[n];
            self.total[n] += other.total[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// BLEU in `[0, 100]`.
    pub fn score(&self, effective_order: bool) -> f64 {
        let mut precisions = [0.0f64; MAX_ORDER];
        let mut smooth = 1.0;
        let mut order = MAX_ORDER;
        for n in 0..MAX_ORDER {
            if self.total[n] == 0 {
                break;
            }
            if effective_order {
                order = n + 1;
            }
            precisions[n] = if self.correct[n] == 0 {
                smooth *= 2.0;
                1.0 / (smooth * self.total[n] as f64)
            } else {
                self.correct[n] as f64 / self.total[n] as f64
            };
        }
        if self.hyp_len == 0 {
            return 0.0;
        }
        let bp = if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        };
        let log_sum: f64 = precisions[..order]
            .iter()
            .map(|&p| if p > 0.0 { p.ln() } else { -9_999_999_999.0 })
            .sum();
        100.0 * bp * (log_sum / order as f64).exp()
    }
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

pub fn sentence_bleu<T: Eq + Hash>(hyp: &[T], reference: &[T]) -> f64 {
    BleuStats::new(hyp, reference).score(true)
}

/// Corpus-level BLEU over aligned `(hypothesis, reference)` pairs.
pub fn corpus_bleu<T: Eq + Hash>(pairs: &[(Vec<T>, Vec<T>)]) -> f64 {
    let mut stats = BleuStats::default();
    for (h, r) in pairs {
        stats.add(&BleuStats::new(h, r));
    }
    stats.score(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    /// Direct restatement of the smoothing rule, independent of `BleuStats`.
    fn oracle_sentence_bleu(hyp: &[&str], reference: &[&str]) -> f64 {
        let mut logs = Vec::new();
        let mut denom_pow = 1.0;
        for n in 1..=4 {
            if hyp.len() < n {
                break;
            }
            let hyp_grams: Vec<&[&str]> = hyp.windows(n).collect();
            let mut ref_pool: Vec<&[&str]> = if reference.len() >= n {
                reference.windows(n).collect()
            } else {
                vec![]
            };
            let mut matched = 0;
            for g in &hyp_grams {
                if let Some(pos) = ref_pool.iter().position(|r| r == g) {
                    ref_pool.remove(pos);
                    matched += 1;
                }
            }
            let p = if matched == 0 {
                denom_pow *= 2.0;
                1.0 / (denom_pow * hyp_grams.len() as f64)
            } else {
                matched as f64 / hyp_grams.len() as f64
            };
            logs.push(p.ln());
        }
        let bp = if hyp.len() < reference.len() {
            (1.0 - reference.len() as f64 / hyp.len() as f64).exp()
        } else {
            1.0
        };
        100.0 * bp * (logs.iter().sum::<f64>() / logs.len() as f64).exp()
    }

    #[test]
    fn exact_match_is_100() {
        let r = toks("a b c d e f");
        assert_eq!(sentence_bleu(&r, &r), 100.0);
        let short = toks("a b");
        assert_eq!(sentence_bleu(&short, &short), 100.0);
    }

    #[test]
    fn empty_hypothesis_is_zero() {
        let empty: Vec<&str> = vec![];
        assert_eq!(sentence_bleu(&empty, &toks("a b c")), 0.0);
    }

    #[test]
    fn one_substitution_matches_oracle() {
        let (h, r) = (toks("a b c d"), toks("a b c e"));
        let got = sentence_bleu(&h, &r);
        let expected = oracle_sentence_bleu(&h, &r);
        assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
        // precisions 3/4, 2/3, 1/2, and 1/(2*1) for the smoothed 4-gram
        let hand = 100.0 * (0.75f64 * (2.0 / 3.0) * 0.5 * 0.5).powf(0.25);
        assert!((got - hand).abs() < 1e-10);
    }

    #[test]
    fn brevity_and_oracle_agreement() {
        let cases = [
            ("a b c", "a b c d e f"),
            ("x y z w v", "a b c d e"),
            ("a b a b a b", "a b a"),
            ("t1 t2 t3 t4 t5 t6 t7", "t1 t2 t9 t4 t5 t6 t7 t8"),
        ];
        for (h, r) in cases {
            let (h, r) = (toks(h), toks(r));
            let got = sentence_bleu(&h, &r);
            let expected = oracle_sentence_bleu(&h, &r);
            assert!((got - expected).abs() < 1e-9, "{h:?}/{r:?}: {got} vs {expected}");
            assert!((0.0..=100.0).contains(&got));
        }
    }

    proptest::proptest! {
        #[test]
        fn any_exact_match_is_exactly_100(r in proptest::collection::vec(0u8..6, 1..30)) {
            proptest::prop_assert_eq!(sentence_bleu(&r, &r), 100.0);
        }
    }

    #[test]
    fn corpus_bleu_perfect_and_partial() {
        let pairs = vec![(toks("a b c d e"), toks("a b c d e")), (toks("f g h i"), toks("f g h i"))];
        assert_eq!(corpus_bleu(&pairs), 100.0);
        let pairs = vec![(toks("a b c d e"), toks("a b x d e"))];
        assert!(corpus_bleu(&pairs) < 100.0);
    }
}
