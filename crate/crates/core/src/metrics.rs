//! Ranking metrics for detector evaluation.

/// Area under the ROC curve of `(score, is_positive)` pairs.
///
/// Computed from average ranks (Mann-Whitney), so tied scores contribute
/// one half. Returns `None` when either class is empty.
pub fn ranking_auc(scored: &[(f64, bool)]) -> Option<f64> {
    let positives = scored.iter().filter(|(_, y)| *y).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0));

    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scored[order[end]].0 == scored[order[start]].0 {
            end += 1;
        }
        // ranks start..end (1-based: start+1..=end) share their mean
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        let tied_positives = order[start..end].iter().filter(|&&k| scored[k].1).count();
        rank_sum += mean_rank * tied_positives as f64;
        start = end;
    }
    let (pos, neg) = (positives as f64, negatives as f64);
    Some((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(scored: &[(f64, bool)]) -> Option<f64> {
        let pos: Vec<f64> = scored.iter().filter(|s| s.1).map(|s| s.0).collect();
        let neg: Vec<f64> = scored.iter().filter(|s| !s.1).map(|s| s.0).collect();
        if pos.is_empty() || neg.is_empty() {
            return None;
        }
        let mut wins = 0.0;
        for p in &pos {
            for n in &neg {
                wins += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        Some(wins / (pos.len() * neg.len()) as f64)
    }

    #[test]
    fn separated_and_degenerate_cases() {
        assert_eq!(ranking_auc(&[(2.0, true), (1.0, false)]), Some(1.0));
        assert_eq!(ranking_auc(&[(1.0, true), (2.0, false)]), Some(0.0));
        assert_eq!(ranking_auc(&[(0.0, true), (0.0, false)]), Some(0.5));
        assert_eq!(ranking_auc(&[(1.0, true)]), None);
        assert_eq!(ranking_auc(&[]), None);
    }

    proptest! {
        #[test]
        fn matches_pairwise_counting(scored in prop::collection::vec((0u8..6, any::<bool>()), 0..40)) {
            let scored: Vec<(f64, bool)> = scored.into_iter().map(|(s, y)| (f64::from(s), y)).collect();
            match (ranking_auc(&scored), brute_force(&scored)) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (a, b) => prop_assert_eq!(a, b),
            }
        }
    }
}
