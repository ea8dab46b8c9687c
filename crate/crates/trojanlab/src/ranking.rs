//! Per-parameter importance scores and top-k selection.

use serde::{Deserialize, Serialize};

/// Saliency scores for one layer, flattened like the layer's parameter
/// vector (weights row-major, then bias when attackable).
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceMatrix {
    pub scores: Vec<f64>,
}

impl ImportanceMatrix {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Ordered set of currently tunable layer indices.
///
/// Indices are unique, in-bounds, and sorted by descending importance
/// magnitude with ascending-index tie-break.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionMask {
    indices: Vec<usize>,
}

impl SelectionMask {
    /// Build from an ordered index list (caller upholds the ordering).
    pub fn from_ordered(indices: Vec<usize>) -> SelectionMask {
        SelectionMask { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.indices.contains(&idx)
    }
}

/// Select the `k` indices with the largest absolute importance.
///
/// Ties break toward the lower index; a layer smaller than `k` selects
/// everything.
pub fn rank_top_k(importance: &ImportanceMatrix, k: usize) -> SelectionMask {
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| {
        importance.scores[b]
            .abs()
            .partial_cmp(&importance.scores[a].abs())
            .expect("importance scores are finite")
            .then(a.cmp(&b))
    });
    order.truncate(k);
    SelectionMask::from_ordered(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_scores_fall_back_to_index_order() {
        let imp = ImportanceMatrix {
            scores: vec![0.0; 5],
        };
        assert_eq!(rank_top_k(&imp, 3).indices(), &[0, 1, 2]);
    }

    #[test]
    fn magnitude_ordering() {
        let imp = ImportanceMatrix {
            scores: vec![0.1, -0.9, 0.5],
        };
        assert_eq!(rank_top_k(&imp, 2).indices(), &[1, 2]);
    }

    #[test]
    fn small_layer_selects_everything() {
        let imp = ImportanceMatrix {
            scores: vec![0.3, -0.1],
        };
        assert_eq!(rank_top_k(&imp, 10).len(), 2);
    }

    proptest! {
        #[test]
        fn matches_exhaustive_sort(scores in proptest::collection::vec(-1.0f64..1.0, 1..50), k in 1usize..60) {
            let imp = ImportanceMatrix { scores: scores.clone() };
            let mask = rank_top_k(&imp, k);

            // Brute force: all (|score|, index) pairs sorted.
            let mut pairs: Vec<(usize, f64)> = scores.iter().cloned().enumerate().collect();
            pairs.sort_by(|a, b| b.1.abs().partial_cmp(&a.1.abs()).unwrap().then(a.0.cmp(&b.0)));
            let expected: Vec<usize> = pairs.into_iter().take(k).map(|(i, _)| i).collect();

            prop_assert_eq!(mask.indices(), expected.as_slice());

            // Uniqueness and bounds.
            let mut seen = std::collections::HashSet::new();
            for &i in mask.indices() {
                prop_assert!(i < scores.len());
                prop_assert!(seen.insert(i));
            }
        }
    }
}
