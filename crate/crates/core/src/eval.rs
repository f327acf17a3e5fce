//! Scoring utilities: ROC-AUC, edit distance, percentiles and label bands.

use crate::error::{Error, Result};

/// Nearest-rank quantile of an ascending, nonempty slice.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Nearest-rank quantile `q` in [0, 1] of unsorted finite values.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("percentile of an empty set"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("quantile must lie in [0, 1], got {q}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("percentile input must be finite"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(nearest_rank(&sorted, q))
}

/// ROC-AUC of `scores` against boolean `positive` labels.
///
/// Computed as the Mann-Whitney statistic with mid-ranks, so tied scores
/// count one half.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            positive.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("ROC-AUC needs both positive and negative samples"));
    }

    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // 1-based mid-rank of the tie group i..=j.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * idx[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
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

/// Edit distance divided by the longer length; 0 for two empty sequences.
pub fn normalized_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    let n = a.len().max(b.len());
    if n == 0 {
        0.0
    } else {
        levenshtein(a, b) as f64 / n as f64
    }
}

/// Maximal run of one label over consecutive entries, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Band<L> {
    pub k_start: u64,
    pub k_end: u64,
    pub label: L,
}

/// Run-length encodes `(k, label)` pairs in k order.
pub fn bands<L: PartialEq + Copy>(points: &[(u64, L)]) -> Vec<Band<L>> {
    let mut out: Vec<Band<L>> = Vec::new();
    for &(k, label) in points {
        match out.last_mut() {
            Some(b) if b.label == label => b.k_end = k,
            _ => out.push(Band {
                k_start: k,
                k_end: k,
                label,
            }),
        }
    }
    out
}

/// Expands bands back to labels for each k in `ks`; k outside every band is `None`.
pub fn expand_bands<L: Copy>(bands: &[Band<L>], ks: &[u64]) -> Vec<Option<L>> {
    ks.iter()
        .map(|&k| {
            bands
                .iter()
                .find(|b| b.k_start <= k && k <= b.k_end)
                .map(|b| b.label)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_perfect_inverse_and_ties() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &[false, false, true, true]).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.5; 4], &[false, true, false, true]).unwrap(), 0.5);
        assert!(roc_auc(&[1.0, 2.0], &[true, true]).is_err());
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein(b"kitten", b"sitting"), 3);
        assert_eq!(levenshtein::<u8>(b"", b"abc"), 3);
        assert_eq!(normalized_edit_distance::<u8>(&[], &[]), 0.0);
        assert_eq!(normalized_edit_distance(b"abcd", b"abce"), 0.25);
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.99).unwrap(), 99.0);
        assert_eq!(percentile(&v, 1.0).unwrap(), 100.0);
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert!(percentile(&[], 0.5).is_err());
    }

    #[test]
    fn band_shapes() {
        let constant: Vec<(u64, i64)> = (0..10).map(|k| (k, 4)).collect();
        assert_eq!(bands(&constant).len(), 1);
        let alternating: Vec<(u64, i64)> = (0..10).map(|k| (k, (k % 2) as i64)).collect();
        assert_eq!(bands(&alternating).len(), 10);
    }
}
