use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DataError, TokenStream};

pub const DEFAULT_THRESHOLD: f64 = 0.9;

fn token_set(s: &TokenStream) -> HashSet<&str> {
    s.tokens.iter().map(String::as_str).collect()
}

fn jaccard_sets(a: &HashSet<&str>, b: &HashSet<&str>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let inter = small.iter().filter(|t| large.contains(*t)).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Intersection over union of the unique tokens; two empty streams give 1.
pub fn jaccard_similarity(a: &TokenStream, b: &TokenStream) -> f64 {
    jaccard_sets(&token_set(a), &token_set(b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub removed_id: String,
    pub matched_kept_id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DedupOutcome {
    /// Indices into the input corpus, in input order.
    pub kept: Vec<usize>,
    pub removed: Vec<Removal>,
}

/// Greedy first-seen-wins deduplication. An item is kept iff its similarity
/// to every previously kept item is below `threshold`; a removed item is
/// logged against the most similar kept item (earliest on ties).
pub fn dedup(corpus: &[TokenStream], threshold: f64) -> Result<DedupOutcome, DataError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(DataError::InvalidThreshold(threshold));
    }
    let sets: Vec<HashSet<&str>> = corpus.par_iter().map(token_set).collect();
    let mut kept: Vec<usize> = Vec::new();
    let mut removed = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        let best = kept
            .par_iter()
            .map(|&k| (k, jaccard_sets(set, &sets[k])))
            .filter(|&(_, s)| s >= threshold)
            .reduce_with(|a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });
        match best {
            Some((k, similarity)) => removed.push(Removal {
                removed_id: corpus[i].origin_id.clone(),
                matched_kept_id: corpus[k].origin_id.clone(),
                similarity,
            }),
            None => kept.push(i),
        }
    }
    Ok(DedupOutcome { kept, removed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(id: &str, toks: &[&str]) -> TokenStream {
        TokenStream::new(id, toks.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn similarity_examples() {
        let a = ts("a", &["a", "b", "c"]);
        assert_eq!(jaccard_similarity(&a, &a), 1.0);
        assert_eq!(jaccard_similarity(&a, &ts("b", &["b", "c", "d"])), 0.5);
        assert_eq!(jaccard_similarity(&a, &ts("c", &["x", "y"])), 0.0);
        assert_eq!(jaccard_similarity(&ts("e", &[]), &ts("f", &[])), 1.0);
    }

    #[test]
    fn dedup_examples() {
        let one = dedup(&[ts("a", &["x"])], 0.9).unwrap();
        assert_eq!(one.kept, [0]);
        let two = dedup(&[ts("a", &["x", "y"]), ts("b", &["y", "x"])], 0.9).unwrap();
        assert_eq!(two.kept, [0]);
        assert_eq!(two.removed, [Removal { removed_id: "b".into(), matched_kept_id: "a".into(), similarity: 1.0 }]);
        let base: Vec<String> = (0..10).map(|i| format!("t{i}")).collect();
        let refs: Vec<&str> = base.iter().map(String::as_str).collect();
        let mut near: Vec<&str> = refs.clone();
        near[9] = "other";
        // sim(1,3) = 9/11 is below 0.9; use 19 shared tokens for 19/20 instead.
        let big: Vec<String> = (0..20).map(|i| format!("u{i}")).collect();
        let big_refs: Vec<&str> = big.iter().map(String::as_str).collect();
        let third: Vec<&str> = big_refs[..19].to_vec();
        let three = dedup(&[ts("1", &big_refs), ts("2", &near), ts("3", &third)], 0.9).unwrap();
        assert_eq!(three.kept, [0, 1]);
        assert_eq!(three.removed[0].matched_kept_id, "1");
        assert!(dedup(&[], 0.0).is_err());
    }

    fn arb_corpus() -> impl Strategy<Value = Vec<TokenStream>> {
        proptest::collection::vec(proptest::collection::vec(0u8..12, 0..10), 0..50).prop_map(|docs| {
            docs.into_iter()
                .enumerate()
                .map(|(i, d)| TokenStream::new(i.to_string(), d.into_iter().map(|t| t.to_string()).collect()))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn greedy_against_brute_force(corpus in arb_corpus()) {
            let out = dedup(&corpus, 0.9).unwrap();
            // Brute-force oracle: replay the greedy rule with a full pairwise matrix.
            let n = corpus.len();
            let m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| jaccard_similarity(&corpus[i], &corpus[j])).collect()).collect();
            let mut expect = Vec::new();
            for i in 0..n {
                if expect.iter().all(|&k: &usize| m[i][k] < 0.9) {
                    expect.push(i);
                }
            }
            prop_assert_eq!(&out.kept, &expect);
            for (a, &i) in out.kept.iter().enumerate() {
                for &j in &out.kept[a + 1..] {
                    prop_assert!(m[i][j] < 0.9);
                }
            }
            let kept: Vec<TokenStream> = out.kept.iter().map(|&i| corpus[i].clone()).collect();
            let again = dedup(&kept, 0.9).unwrap();
            prop_assert_eq!(again.kept, (0..kept.len()).collect::<Vec<_>>());
        }

        #[test]
        fn symmetric(a in proptest::collection::vec(0u8..8, 0..10), b in proptest::collection::vec(0u8..8, 0..10)) {
            let ta = TokenStream::new("a", a.iter().map(|t| t.to_string()).collect());
            let tb = TokenStream::new("b", b.iter().map(|t| t.to_string()).collect());
            prop_assert_eq!(jaccard_similarity(&ta, &tb), jaccard_similarity(&tb, &ta));
        }
    }
}
