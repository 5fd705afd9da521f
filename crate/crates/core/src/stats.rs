//! Rank statistics shared by the probing and comparison modules.

use serde::Serialize;

use crate::{Error, Result};

/// Values together with their average ranks (1-based; tied values share the
/// mean of the ranks they span).
#[derive(Debug, Clone, PartialEq)]
pub struct RankedVector {
    pub values: Vec<f64>,
    pub ranks: Vec<f64>,
}

impl RankedVector {
    pub fn new(values: &[f64]) -> Self {
        RankedVector {
            values: values.to_vec(),
            ranks: average_ranks(values),
        }
    }
}

/// Average ranks, 1-based. Ties are exact float equality.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let rank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation. Errors when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(format!(
            "correlation inputs have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Empty("correlation inputs".into()));
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "one input has zero variance".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of average ranks, which
/// is exact in the presence of ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(format!(
            "spearman inputs have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::Empty(format!(
            "spearman needs at least 3 paired values, got {}",
            x.len()
        )));
    }
    if let Some(v) = x.iter().chain(y).find(|v| !v.is_finite()) {
        return Err(Error::Validation(format!(
            "spearman input contains non-finite value {v}"
        )));
    }
    pearson(&average_ranks(x), &average_ranks(y))
        .map_err(|_| Error::UndefinedCorrelation("constant input has no rank variance".into()))
}

/// Spread of a metric over training seeds. `std` is the population standard
/// deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeedSummary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

pub fn aggregate_seeds(values: &[f64]) -> Result<SeedSummary> {
    if values.is_empty() {
        return Err(Error::Empty("no per-seed values to aggregate".into()));
    }
    // Sorting first makes the result independent of input order down to the
    // last bit.
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = (sorted.iter().sum::<f64>() / n).clamp(sorted[0], sorted[sorted.len() - 1]);
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(SeedSummary {
        mean,
        std: var.sqrt(),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        n: sorted.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Classical formula, valid only without ties.
    fn spearman_classical(x: &[f64], y: &[f64]) -> f64 {
        let rx = average_ranks(x);
        let ry = average_ranks(y);
        let n = x.len() as f64;
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[3.0, 3.0, 3.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(average_ranks(&[]), Vec::<f64>::new());
    }

    #[test]
    fn identical_and_reversed() {
        let x = [0.3, 1.2, -4.0, 9.0, 2.2];
        assert_abs_diff_eq!(spearman(&x, &x).unwrap(), 1.0);
        let rev: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(spearman(&x, &rev).unwrap(), -1.0);
    }

    #[test]
    fn tie_case_by_hand() {
        // ranks x = (1, 2.5, 2.5, 4), y = (1, 3, 2, 4); both mean 2.5.
        // deviations dx = (-1.5, 0, 0, 1.5), dy = (-1.5, 0.5, -0.5, 1.5)
        // cov = 4.5, var_x = 4.5, var_y = 5.0 -> 4.5 / sqrt(22.5) = 3 / sqrt(10)
        let rho = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_abs_diff_eq!(rho, 3.0 / 10f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch(_))
        ));
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(spearman(&[1.0, f64::NAN, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn seed_aggregation() {
        let s = aggregate_seeds(&[0.5]).unwrap();
        assert_eq!((s.mean, s.std), (0.5, 0.0));
        let s = aggregate_seeds(&[0.8, 0.9]).unwrap();
        assert_abs_diff_eq!(s.mean, 0.85, epsilon = 1e-12);
        assert_abs_diff_eq!(s.std, 0.05, epsilon = 1e-12);
        assert_eq!(aggregate_seeds(&[0.9, 0.8]).unwrap(), s);
        assert!(aggregate_seeds(&[]).is_err());
    }

    proptest! {
        #[test]
        fn matches_classical_formula_without_ties(
            pairs in prop::collection::hash_map(-1_000_000i64..1_000_000, -1_000_000i64..1_000_000, 3..40)
        ) {
            let x: Vec<f64> = pairs.keys().map(|&k| k as f64).collect();
            let mut seen = std::collections::HashSet::new();
            let y: Vec<f64> = pairs.values().map(|&v| v as f64).collect();
            prop_assume!(pairs.values().all(|v| seen.insert(*v)));
            let rho = spearman(&x, &y).unwrap();
            prop_assert!((rho - spearman_classical(&x, &y)).abs() <= 1e-12);
        }

        #[test]
        fn symmetric_and_monotone_invariant(
            x in prop::collection::vec(-50i32..50, 3..30),
            y in prop::collection::vec(-50i32..50, 3..30),
        ) {
            let n = x.len().min(y.len());
            let x: Vec<f64> = x[..n].iter().map(|&v| v as f64).collect();
            let y: Vec<f64> = y[..n].iter().map(|&v| v as f64).collect();
            if let Ok(rho) = spearman(&x, &y) {
                prop_assert!((-1.0..=1.0).contains(&rho));
                prop_assert_eq!(rho, spearman(&y, &x).unwrap());
                let tx: Vec<f64> = x.iter().map(|v| (v / 10.0).exp() + 3.0).collect();
                prop_assert!((rho - spearman(&tx, &y).unwrap()).abs() < 1e-12);
            }
        }

        #[test]
        fn ranks_sum_to_triangular(x in prop::collection::vec(-20i32..20, 0..50)) {
            let x: Vec<f64> = x.into_iter().map(f64::from).collect();
            let n = x.len() as f64;
            let total: f64 = RankedVector::new(&x).ranks.iter().sum();
            prop_assert!((total - n * (n + 1.0) / 2.0).abs() < 1e-9);
        }

        #[test]
        fn seed_mean_within_extremes(v in prop::collection::vec(0.0f64..1.0, 1..10)) {
            let s = aggregate_seeds(&v).unwrap();
            prop_assert!(s.min <= s.mean && s.mean <= s.max);
        }
    }
}
