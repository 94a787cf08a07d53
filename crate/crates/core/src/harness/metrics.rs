//! Detection-error metrics.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    /// The `K = |truth|` highest-scoring candidates, paired in sorted order.
    TopK,
    /// Detected vs true indices in sorted order; Hausdorff distance when the
    /// counts differ.
    Matched,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorOutcome {
    pub error: f64,
    /// Fewer than `K` candidates were available in top-K mode.
    pub flagged: bool,
    /// Detected and true counts differ in matched mode.
    pub count_mismatch: bool,
}

/// Minimum total distance pairing each of `detected` (sorted) with a distinct
/// element of `truth` (sorted), preserving order.
fn ordered_matching_cost(detected: &[usize], truth: &[usize]) -> usize {
    let (m, k) = (detected.len(), truth.len());
    debug_assert!(m <= k);
    // cost[i][j]: best for detected[..i] using truth[..j].
    let mut cost = vec![vec![usize::MAX; k + 1]; m + 1];
    cost[0].iter_mut().for_each(|c| *c = 0);
    for i in 1..=m {
        for j in i..=k {
            let skip = cost[i][j - 1];
            let take = cost[i - 1][j - 1].saturating_add(detected[i - 1].abs_diff(truth[j - 1]));
            cost[i][j] = skip.min(take);
        }
    }
    cost[m][k]
}

/// Average `|tau_hat_k - tau_k|` over the `K` highest-score candidates.
///
/// A missing candidate (fewer than `K` supplied) costs `n / K` and flags the
/// outcome.
pub fn topk_error(candidates: &[(usize, f64)], truth: &[usize], n: usize) -> Result<ErrorOutcome> {
    if truth.is_empty() {
        return domain("top-K error needs at least one true change point");
    }
    let k = truth.len();
    let mut ranked = candidates.to_vec();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut picked: Vec<usize> = ranked.iter().take(k).map(|c| c.0).collect();
    picked.sort_unstable();
    let mut truth = truth.to_vec();
    truth.sort_unstable();

    let missing = k - picked.len();
    let matched = ordered_matching_cost(&picked, &truth) as f64;
    let penalty = missing as f64 * n as f64 / k as f64;
    Ok(ErrorOutcome {
        error: (matched + penalty) / k as f64,
        flagged: missing > 0,
        count_mismatch: missing > 0,
    })
}

fn hausdorff(a: &[usize], b: &[usize], n: usize) -> f64 {
    if a.is_empty() || b.is_empty() {
        return n as f64;
    }
    let directed = |x: &[usize], y: &[usize]| {
        x.iter()
            .map(|&p| y.iter().map(|&q| p.abs_diff(q)).min().unwrap_or(0))
            .max()
            .unwrap_or(0)
    };
    directed(a, b).max(directed(b, a)) as f64
}

/// Mean pairwise distance when counts agree, Hausdorff distance otherwise.
pub fn matched_error(detected: &[usize], truth: &[usize], n: usize) -> ErrorOutcome {
    let mut d = detected.to_vec();
    let mut t = truth.to_vec();
    d.sort_unstable();
    t.sort_unstable();
    if d.len() == t.len() {
        let error = if t.is_empty() {
            0.0
        } else {
            d.iter().zip(&t).map(|(a, b)| a.abs_diff(*b) as f64).sum::<f64>() / t.len() as f64
        };
        return ErrorOutcome {
            error,
            flagged: false,
            count_mismatch: false,
        };
    }
    ErrorOutcome {
        error: hausdorff(&d, &t, n),
        flagged: false,
        count_mismatch: true,
    }
}

/// Detection error in either mode. `detected` carries scores; they are
/// ignored in matched mode.
pub fn detection_error(detected: &[(usize, f64)], truth: &[usize], mode: ErrorMode, n: usize) -> Result<ErrorOutcome> {
    match mode {
        ErrorMode::TopK => topk_error(detected, truth, n),
        ErrorMode::Matched => {
            let idx: Vec<usize> = detected.iter().map(|d| d.0).collect();
            Ok(matched_error(&idx, truth, n))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_examples() {
        let out = matched_error(&[505, 990], &[500, 1000], 1500);
        assert_eq!(out.error, 7.5);
        assert_eq!(matched_error(&[500, 1000], &[500, 1000], 1500).error, 0.0);

        let scored = [(480, 3.0), (505, 5.0), (990, 4.0)];
        let out = topk_error(&scored, &[500, 1000], 1500).unwrap();
        assert_eq!(out.error, 7.5);
        assert!(!out.flagged);
    }

    #[test]
    fn topk_needs_truth() {
        assert!(topk_error(&[(1, 1.0)], &[], 10).is_err());
    }

    #[test]
    fn missing_candidates_are_penalised() {
        let out = topk_error(&[(505, 2.0)], &[500, 1000], 1500).unwrap();
        assert!(out.flagged);
        // (5 + 1500/2) / 2
        assert_eq!(out.error, 377.5);
        let none = topk_error(&[], &[500, 1000], 1500).unwrap();
        assert_eq!(none.error, 750.0);
    }

    #[test]
    fn mismatch_uses_hausdorff() {
        let out = matched_error(&[500, 510, 1000], &[500, 1000], 1500);
        assert!(out.count_mismatch);
        assert_eq!(out.error, 10.0);
        assert_eq!(matched_error(&[], &[700], 1500).error, 1500.0);
        assert_eq!(matched_error(&[], &[], 1500).error, 0.0);
    }

    #[test]
    fn ties_prefer_earlier_index() {
        let scored = [(900, 2.0), (400, 2.0), (450, 2.0)];
        // 400 and 450 win the tie over 900.
        let out = topk_error(&scored, &[400, 900], 1000).unwrap();
        assert_eq!(out.error, 225.0);
    }

    proptest! {
        #[test]
        fn shift_invariant_and_zero_iff_equal(
            truth in prop::collection::btree_set(1usize..1000, 1..5),
            offsets in prop::collection::vec(-20i64..20, 5),
            shift in 0usize..500,
        ) {
            let truth: Vec<usize> = truth.into_iter().collect();
            let detected: Vec<(usize, f64)> = truth
                .iter()
                .zip(&offsets)
                .map(|(&t, &o)| ((t as i64 + o).max(1) as usize, 1.0 + o.abs() as f64))
                .collect();
            let base = topk_error(&detected, &truth, 2000).unwrap();
            let moved_truth: Vec<usize> = truth.iter().map(|t| t + shift).collect();
            let moved: Vec<(usize, f64)> = detected.iter().map(|&(j, s)| (j + shift, s)).collect();
            let shifted = topk_error(&moved, &moved_truth, 2000).unwrap();
            prop_assert_eq!(base.error, shifted.error);

            let mut picked: Vec<usize> = detected.iter().map(|d| d.0).collect();
            picked.sort_unstable();
            prop_assert_eq!(base.error == 0.0, picked == truth);
        }
    }
}
