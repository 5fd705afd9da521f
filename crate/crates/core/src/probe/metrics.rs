use std::collections::BTreeMap;

use crate::{Error, Result};

/// How per-class F1 scores combine into one number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Averaging<L> {
    /// F1 of a single positive class.
    BinaryPositive(L),
    /// Unweighted mean over classes present in gold or predictions.
    Macro,
    /// Mean weighted by gold support.
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Occurrences in gold.
    pub support: usize,
}

/// Per-class scores for every class that occurs in `gold` or `pred`.
pub fn class_scores<L: Ord + Clone>(gold: &[L], pred: &[L]) -> Result<BTreeMap<L, ClassScore>> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch(format!(
            "{} gold labels vs {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::Empty("F1 over zero labels".into()));
    }
    // (tp, fp, fn)
    let mut counts: BTreeMap<L, (usize, usize, usize)> = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        if g == p {
            counts.entry(g.clone()).or_default().0 += 1;
        } else {
            counts.entry(p.clone()).or_default().1 += 1;
            counts.entry(g.clone()).or_default().2 += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|(label, (tp, fp, fn_))| {
            let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
            (
                label,
                ClassScore {
                    precision,
                    recall,
                    f1,
                    support: tp + fn_,
                },
            )
        })
        .collect())
}

/// Combines `(f1, support)` pairs: plain mean or support-weighted mean.
pub fn combine(per_class: &[(f64, usize)], weighted: bool) -> f64 {
    if per_class.is_empty() {
        return 0.0;
    }
    if weighted {
        let total: usize = per_class.iter().map(|(_, s)| s).sum();
        if total == 0 {
            return 0.0;
        }
        per_class.iter().map(|(f, s)| f * *s as f64).sum::<f64>() / total as f64
    } else {
        per_class.iter().map(|(f, _)| f).sum::<f64>() / per_class.len() as f64
    }
}

/// F1 under the requested averaging. A binary positive class that occurs in
/// neither gold nor predictions scores 1.0: there is nothing to get wrong.
pub fn f1_score<L: Ord + Clone>(gold: &[L], pred: &[L], averaging: &Averaging<L>) -> Result<f64> {
    let scores = class_scores(gold, pred)?;
    let pairs: Vec<(f64, usize)> = scores.values().map(|s| (s.f1, s.support)).collect();
    Ok(match averaging {
        Averaging::BinaryPositive(pos) => scores.get(pos).map_or(1.0, |s| s.f1),
        Averaging::Macro => combine(&pairs, false),
        Averaging::Weighted => combine(&pairs, true),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_prediction_scores_one() {
        let g = vec!["a", "b", "b", "c"];
        for mode in [Averaging::BinaryPositive("b"), Averaging::Macro, Averaging::Weighted] {
            assert_eq!(f1_score(&g, &g, &mode).unwrap(), 1.0);
        }
    }

    #[test]
    fn binary_half() {
        // tp 1, fp 1, fn 1 -> P = R = 0.5
        let f = f1_score(&[1, 1, 0, 0], &[1, 0, 1, 0], &Averaging::BinaryPositive(1)).unwrap();
        assert!((f - 0.5).abs() < 1e-15);
    }

    #[test]
    fn averaging_arithmetic() {
        let per_class = [(1.0, 2), (0.5, 2), (0.0, 2)];
        assert!((combine(&per_class, false) - 0.5).abs() < 1e-15);
        assert!((combine(&per_class, true) - 0.5).abs() < 1e-15);
        // uneven supports separate the two modes
        let per_class = [(1.0, 6), (0.0, 2)];
        assert_eq!(combine(&per_class, false), 0.5);
        assert_eq!(combine(&per_class, true), 0.75);
    }

    #[test]
    fn single_class_degenerate() {
        let g = vec!["lang1"; 5];
        assert_eq!(f1_score(&g, &g, &Averaging::Weighted).unwrap(), 1.0);
        assert_eq!(f1_score(&g, &g, &Averaging::Macro).unwrap(), 1.0);
    }

    #[test]
    fn absent_classes_carry_no_weight() {
        // Class 2 never occurs; it must not drag macro down.
        let f = f1_score(&[0, 1, 0, 1], &[0, 1, 1, 1], &Averaging::Macro).unwrap();
        let scores = class_scores(&[0, 1, 0, 1], &[0, 1, 1, 1]).unwrap();
        assert_eq!(scores.len(), 2);
        assert!((f - (scores[&0].f1 + scores[&1].f1) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(f1_score(&[1, 2], &[1], &Averaging::<i32>::Macro).is_err());
        assert!(f1_score::<i32>(&[], &[], &Averaging::Macro).is_err());
    }

    proptest! {
        #[test]
        fn invariant_under_relabeling(
            pairs in prop::collection::vec((0usize..4, 0usize..4), 1..40),
            perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        ) {
            let (g, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let gm: Vec<usize> = g.iter().map(|&x| perm[x]).collect();
            let pm: Vec<usize> = p.iter().map(|&x| perm[x]).collect();
            for (a, b) in [
                (Averaging::Macro, Averaging::Macro),
                (Averaging::Weighted, Averaging::Weighted),
                (Averaging::BinaryPositive(1), Averaging::BinaryPositive(perm[1])),
            ] {
                let x = f1_score(&g, &p, &a).unwrap();
                let y = f1_score(&gm, &pm, &b).unwrap();
                prop_assert!((x - y).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&x));
            }
        }
    }
}
