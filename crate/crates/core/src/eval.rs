//! Mean average precision over ranked result lists.

use log::warn;

use crate::error::{invalid_input, Result};
use crate::hybrid::RankingResult;
use crate::synthetic::EvalSet;

/// Average precision of a ranked list: the mean, over relevant items, of
/// precision at the rank where each is retrieved. `exclude` is dropped from
/// the list before scoring. Returns `None` when nothing is relevant.
pub fn average_precision(order: &[usize], relevant: &[usize], exclude: Option<usize>) -> Option<f64> {
    let n = order.len().max(relevant.iter().copied().max().map_or(0, |m| m + 1));
    let mut is_relevant = vec![false; n];
    let mut total = 0usize;
    for &i in relevant {
        if Some(i) != exclude && !is_relevant[i] {
            is_relevant[i] = true;
            total += 1;
        }
    }
    if total == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut rank = 0usize;
    let mut sum = 0.0;
    for &id in order {
        if Some(id) == exclude {
            continue;
        }
        rank += 1;
        if is_relevant[id] {
            hits += 1;
            sum += hits as f64 / rank as f64;
        }
    }
    Some(sum / total as f64)
}

/// Mean of per-query average precision. Queries without relevant items are
/// left out with a warning.
pub fn mean_average_precision(
    results: &[RankingResult],
    eval: &EvalSet,
    exclude: Option<&[Option<usize>]>,
) -> Result<f64> {
    if results.len() != eval.relevance.len() {
        return Err(invalid_input(format!(
            "{} rankings for {} queries",
            results.len(),
            eval.relevance.len()
        )));
    }
    if exclude.is_some_and(|e| e.len() != results.len()) {
        return Err(invalid_input("exclusion list length differs from query count"));
    }
    let mut sum = 0.0;
    let mut counted = 0usize;
    for (q, (res, rel)) in results.iter().zip(&eval.relevance).enumerate() {
        let skip = exclude.and_then(|e| e[q]);
        match average_precision(&res.order, rel, skip) {
            Some(ap) => {
                sum += ap;
                counted += 1;
            }
            None => warn!("query {q} has no relevant items; excluded from mAP"),
        }
    }
    if counted == 0 {
        return Err(invalid_input("no query has relevant items"));
    }
    Ok(sum / counted as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_ranking() {
        assert_eq!(average_precision(&[2, 0, 1, 3], &[0, 2], None), Some(1.0));
    }

    #[test]
    fn single_item_at_second_place() {
        assert_eq!(average_precision(&[1, 0, 2], &[0], None), Some(0.5));
    }

    #[test]
    fn exclusion_skips_item() {
        // query item 1 excluded, 0 moves to first place
        assert_eq!(average_precision(&[1, 0, 2], &[0, 1], Some(1)), Some(1.0));
    }

    #[test]
    fn no_relevant_items() {
        assert_eq!(average_precision(&[0, 1], &[], None), None);
    }
}
