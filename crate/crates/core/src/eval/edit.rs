/// Token-level Levenshtein distance with unit costs.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let s: Vec<char> = "abc".chars().collect();
        assert_eq!(edit_distance(&s, &s), 0);
        assert_eq!(edit_distance(&s, &[]), 3);
        assert_eq!(edit_distance::<char>(&[], &s), 3);
        let kitten = ["k", "i", "t", "t", "e", "n"];
        let sitting = ["s", "i", "t", "t", "i", "n", "g"];
        assert_eq!(edit_distance(&kitten, &sitting), 3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn metric_axioms(
                a in proptest::collection::vec(0u8..4, 0..12),
                b in proptest::collection::vec(0u8..4, 0..12),
                c in proptest::collection::vec(0u8..4, 0..12),
            ) {
                prop_assert_eq!(edit_distance(&a, &b), edit_distance(&b, &a));
                prop_assert!(edit_distance(&a, &c) <= edit_distance(&a, &b) + edit_distance(&b, &c));
                prop_assert!(edit_distance(&a, &b) <= a.len().max(b.len()));
                prop_assert!(edit_distance(&a, &b) >= a.len().abs_diff(b.len()));
            }
        }
    }
}
