//! Literal distance primitives: edit distance, q-gram extraction, and the
//! count-filtering lower bound.
//!
//! All operations work on Unicode scalar values, so a multi-byte character
//! counts as a single unit of editing and a single gram position.

use crate::error::{Error, Result};

/// Unit-cost Levenshtein distance (insert / delete / substitute).
///
/// Symmetric and metric; agrees with the quadratic DP reference used in the
/// test suite.
pub fn edit_distance(a: &str, b: &str) -> u32 {
    if a == b {
        return 0;
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len() as u32;
    }
    if b.is_empty() {
        return a.len() as u32;
    }
    // Two-row DP over the shorter string to bound memory.
    let (short, long) = if a.len() <= b.len() { (&a, &b) } else { (&b, &a) };
    let mut prev: Vec<u32> = (0..=short.len() as u32).collect();
    let mut cur: Vec<u32> = vec![0; short.len() + 1];
    for (i, lc) in long.iter().enumerate() {
        cur[0] = i as u32 + 1;
        for (j, sc) in short.iter().enumerate() {
            let sub = prev[j] + u32::from(lc != sc);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// The ordered q-grams of a string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GramSequence {
    pub source: String,
    pub gram_len: usize,
    pub grams: Vec<String>,
}

/// Splits `s` into its ordered length-q substrings (over chars).
///
/// Empty when `s` has fewer than `q` chars. No padding grams are added.
pub fn qgrams(s: &str, q: usize) -> Result<GramSequence> {
    if q == 0 {
        return Err(Error::parameter("gram length q must be >= 1"));
    }
    let chars: Vec<char> = s.chars().collect();
    let grams = if chars.len() < q {
        Vec::new()
    } else {
        chars.windows(q).map(|w| w.iter().collect()).collect()
    };
    Ok(GramSequence {
        source: s.to_string(),
        gram_len: q,
        grams,
    })
}

/// Lower bound on the number of shared q-grams (multiset intersection) for
/// two strings within edit distance `max_edit`:
/// `(max(len_a, len_b) - q + 1) - q * max_edit`.
///
/// May be zero or negative, in which case count filtering prunes nothing.
pub fn count_filter_bound(len_a: usize, len_b: usize, q: usize, max_edit: u32) -> i64 {
    let m = len_a.max(len_b) as i64;
    m - q as i64 + 1 - q as i64 * max_edit as i64
}

/// Multiset intersection size of the two strings' q-gram bags.
pub fn shared_gram_count(a: &str, b: &str, q: usize) -> Result<usize> {
    use std::collections::HashMap;
    let ga = qgrams(a, q)?;
    let gb = qgrams(b, q)?;
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for g in &ga.grams {
        *counts.entry(g.as_str()).or_insert(0) += 1;
    }
    let mut shared = 0;
    for g in &gb.grams {
        if let Some(c) = counts.get_mut(g.as_str()) {
            if *c > 0 {
                *c -= 1;
                shared += 1;
            }
        }
    }
    Ok(shared)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent full-matrix DP reference. Kept deliberately naive.
    #[allow(clippy::needless_range_loop)]
    fn edit_distance_reference(a: &str, b: &str) -> u32 {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut dp = vec![vec![0u32; b.len() + 1]; a.len() + 1];
        for i in 0..=a.len() {
            dp[i][0] = i as u32;
        }
        for j in 0..=b.len() {
            dp[0][j] = j as u32;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = u32::from(a[i - 1] != b[j - 1]);
                dp[i][j] = (dp[i - 1][j - 1] + cost)
                    .min(dp[i - 1][j] + 1)
                    .min(dp[i][j - 1] + 1);
            }
        }
        dp[a.len()][b.len()]
    }

    #[test]
    fn known_distances() {
        assert_eq!(edit_distance("Abrehan Lincon", "Abraham Lincoln"), 3);
        assert_eq!(edit_distance("Sander", "Sunder"), 1);
        assert_eq!(edit_distance("meet pie", "meat pie"), 1);
        assert_eq!(edit_distance("pie", "pie"), 0);
        assert_eq!(edit_distance("", "abc"), 3);
        assert_eq!(edit_distance("import", "export"), 2);
    }

    #[test]
    fn multibyte_chars_count_once() {
        assert_eq!(edit_distance("café", "cafe"), 1);
        assert_eq!(edit_distance("日本語", "日本"), 1);
    }

    #[test]
    fn gram_examples() {
        assert_eq!(qgrams("pie", 2).unwrap().grams, vec!["pi", "ie"]);
        assert_eq!(qgrams("pies", 2).unwrap().grams, vec!["pi", "ie", "es"]);
        assert!(qgrams("a", 2).unwrap().grams.is_empty());
        assert!(qgrams("x", 0).is_err());
    }

    #[test]
    fn bound_examples() {
        assert_eq!(count_filter_bound(5, 5, 2, 1), 2);
        assert_eq!(count_filter_bound(3, 3, 2, 2), -2);
    }

    #[test]
    fn shared_grams_meet_meat() {
        // me, t_, _p, pi, ie are shared between the two pie spellings.
        assert_eq!(shared_gram_count("meet pie", "meat pie", 2).unwrap(), 5);
    }

    proptest! {
        #[test]
        fn matches_reference(a in "[a-e ]{0,24}", b in "[a-e ]{0,24}") {
            prop_assert_eq!(edit_distance(&a, &b), edit_distance_reference(&a, &b));
        }

        #[test]
        fn metric_axioms(a in "[a-d]{0,16}", b in "[a-d]{0,16}", c in "[a-d]{0,16}") {
            let ab = edit_distance(&a, &b);
            let ba = edit_distance(&b, &a);
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(ab == 0, a == b);
            let bc = edit_distance(&b, &c);
            let ac = edit_distance(&a, &c);
            prop_assert!(ac <= ab + bc);
        }

        #[test]
        fn grams_reconstruct_source(s in "[a-z]{2,20}", q in 1usize..4) {
            let gs = qgrams(&s, q).unwrap();
            let n = s.chars().count();
            let want = if n < q { 0 } else { n - q + 1 };
            prop_assert_eq!(gs.grams.len(), want);
            if let Some((last, init)) = gs.grams.split_last() {
                let mut rebuilt: String =
                    init.iter().map(|g| g.chars().next().unwrap()).collect();
                rebuilt.push_str(last);
                prop_assert_eq!(rebuilt, s);
            }
        }

        #[test]
        fn count_filter_is_complete(base in "[a-e]{4,20}", edits in prop::collection::vec((0usize..20, 0u8..3, 0u8..5), 0..3)) {
            // Apply up to 2 random edits, then check the bound against the
            // true (possibly smaller) edit distance.
            let mut mutated: Vec<char> = base.chars().collect();
            for (pos, op, ch) in edits {
                let ch = (b'a' + ch) as char;
                if mutated.is_empty() {
                    mutated.push(ch);
                    continue;
                }
                let pos = pos % mutated.len();
                match op {
                    0 => mutated[pos] = ch,
                    1 => mutated.insert(pos, ch),
                    _ => { mutated.remove(pos); }
                }
            }
            let mutated: String = mutated.into_iter().collect();
            let d = edit_distance(&base, &mutated);
            let q = 2;
            let shared = shared_gram_count(&base, &mutated, q).unwrap() as i64;
            let bound = count_filter_bound(base.chars().count(), mutated.chars().count(), q, d);
            prop_assert!(shared >= bound, "shared {} < bound {} for {:?}/{:?}", shared, bound, base, mutated);
        }
    }
}
