use std::cmp::Ordering;

use super::ItemId;

fn better(a: (f64, ItemId), b: (f64, ItemId), higher_is_better: bool) -> Ordering {
    let by_score = if higher_is_better {
        b.0.total_cmp(&a.0)
    } else {
        a.0.total_cmp(&b.0)
    };
    by_score.then(a.1.cmp(&b.1))
}

/// Top-`k` candidates ordered best first; ties go to the lower item id.
pub fn rank_items(
    candidates: &[ItemId],
    scores: &[f64],
    k: usize,
    higher_is_better: bool,
) -> Vec<ItemId> {
    assert_eq!(candidates.len(), scores.len());
    let mut pairs: Vec<(f64, ItemId)> = scores.iter().copied().zip(candidates.iter().copied()).collect();
    pairs.sort_by(|a, b| better(*a, *b, higher_is_better));
    pairs.into_iter().take(k).map(|(_, id)| id).collect()
}

/// 0-based position `target` would take in the full ranking of
/// `candidates`, under the same ordering as [`rank_items`].
pub fn rank_position(
    candidates: &[ItemId],
    scores: &[f64],
    target: ItemId,
    higher_is_better: bool,
) -> Option<usize> {
    let idx = candidates.iter().position(|&c| c == target)?;
    let t = (scores[idx], target);
    Some(
        candidates
            .iter()
            .zip(scores)
            .enumerate()
            .filter(|&(i, (&c, &s))| i != idx && better((s, c), t, higher_is_better) == Ordering::Less)
            .count(),
    )
}
