//! Brute-force k-nearest-neighbour classification on incomplete data.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::dataset::{Instance, LabeledDataset, ObservedTable};
use crate::discrepancy::{DiscrepancyModel, Dissimilarity};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_K: usize = 5;

/// The `min(k, n)` training rows least dissimilar to a query, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    indices: Vec<usize>,
    discrepancies: Vec<f64>,
}

impl NeighborSet {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn discrepancies(&self) -> &[f64] {
        &self.discrepancies
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Nearest training rows to `p`. Equal dissimilarities are ordered by row index.
pub fn neighbor_set<D: Dissimilarity>(
    p: Instance<'_>,
    train: &ObservedTable,
    k: usize,
    dis: &D,
) -> Result<NeighborSet> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if train.n() == 0 {
        return Err(Error::Empty("training set"));
    }
    if p.dim() != train.m() {
        return Err(Error::DimensionMismatch {
            expected: train.m(),
            found: p.dim(),
        });
    }
    let mut scored: Vec<(f64, usize)> = train
        .rows()
        .enumerate()
        .map(|(j, row)| (dis.dissimilarity(p, row), j))
        .collect();
    let k = k.min(scored.len());
    let by_score = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, by_score);
        scored.truncate(k);
    }
    scored.sort_by(by_score);
    Ok(NeighborSet {
        indices: scored.iter().map(|s| s.1).collect(),
        discrepancies: scored.iter().map(|s| s.0).collect(),
    })
}

/// Outcome of one majority vote.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vote {
    pub label: String,
    /// More than one label shared the top count; `label` was drawn at random among them.
    pub tied: bool,
}

/// Most frequent label; ties are broken uniformly at random.
pub fn majority_vote<'a>(
    labels: impl IntoIterator<Item = &'a str>,
    rng: &mut rng::Rng,
) -> Option<Vote> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let top = *counts.values().max()?;
    let best: Vec<&str> = counts
        .iter()
        .filter(|(_, &c)| c == top)
        .map(|(&l, _)| l)
        .collect();
    let label = if best.len() == 1 {
        best[0]
    } else {
        best[rng.random_range(0..best.len())]
    };
    Some(Vote {
        label: label.to_string(),
        tied: best.len() > 1,
    })
}

/// Classifies every test row by majority vote over its neighbour set.
///
/// Test row `i` draws tie-breaks from stream `i` of the seeded generator,
/// so results do not depend on evaluation order.
pub fn knn_votes<D: Dissimilarity>(
    train: &LabeledDataset,
    test: &ObservedTable,
    k: usize,
    dis: &D,
    seed: u64,
) -> Result<Vec<Vote>> {
    if train.n() == 0 {
        return Err(Error::Empty("training set"));
    }
    (0..test.n())
        .into_par_iter()
        .map(|i| {
            let hood = neighbor_set(test.row(i), train.table(), k, dis)?;
            let mut rng = rng::stream(seed, i as u64);
            let labels = hood.indices().iter().map(|&j| train.labels()[j].as_str());
            Ok(majority_vote(labels, &mut rng).expect("non-empty neighbour set"))
        })
        .collect()
}

/// Predicted labels for `test` under any dissimilarity.
pub fn knn_predict<D: Dissimilarity>(
    train: &LabeledDataset,
    test: &ObservedTable,
    k: usize,
    dis: &D,
    seed: u64,
) -> Result<Vec<String>> {
    Ok(knn_votes(train, test, k, dis, seed)?
        .into_iter()
        .map(|v| v.label)
        .collect())
}

/// kNN under the penalty discrepancy. Fit `model` on train ∪ test.
pub fn knn_awpd_predict(
    train: &LabeledDataset,
    test: &ObservedTable,
    k: usize,
    model: &DiscrepancyModel,
    seed: u64,
) -> Result<Vec<String>> {
    if model.dim() != train.table().m() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: train.table().m(),
        });
    }
    knn_predict(train, test, k, model, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrepancy::Euclidean;

    fn train() -> LabeledDataset {
        let t = ObservedTable::from_complete(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![5.0, 5.0]])
            .unwrap();
        LabeledDataset::new(t, vec!["A".into(), "A".into(), "B".into()]).unwrap()
    }

    #[test]
    fn exact_match_is_its_own_neighbour() {
        let tr = train();
        let model = DiscrepancyModel::fit(tr.table(), 0.2).unwrap();
        let hood = neighbor_set(tr.table().row(2), tr.table(), 1, &model).unwrap();
        assert_eq!(hood.indices(), [2]);
        assert_eq!(hood.discrepancies(), [0.0]);
    }

    #[test]
    fn large_k_returns_everything() {
        let tr = train();
        let hood = neighbor_set(tr.table().row(0), tr.table(), 10, &Euclidean).unwrap();
        assert_eq!(hood.indices(), [0, 1, 2]);
        assert!(neighbor_set(tr.table().row(0), tr.table(), 0, &Euclidean).is_err());
    }

    #[test]
    fn boundary_ties_prefer_lower_rows() {
        let t = ObservedTable::from_complete(&[vec![1.0], vec![-1.0], vec![1.0]]).unwrap();
        let q = [0.0];
        let hood = neighbor_set(Instance::new(&q, &[true]), &t, 2, &Euclidean).unwrap();
        assert_eq!(hood.indices(), [0, 1]);
    }

    #[test]
    fn majority_of_three() {
        let tr = train();
        let test = ObservedTable::from_complete(&[vec![0.0, 0.4]]).unwrap();
        let model = DiscrepancyModel::fit(&tr.table().vstack(&test).unwrap(), 0.2).unwrap();
        let pred = knn_awpd_predict(&tr, &test, 3, &model, 0).unwrap();
        assert_eq!(pred, ["A"]);
    }

    #[test]
    fn two_way_tie_is_fair() {
        let t = ObservedTable::from_complete(&[vec![-1.0], vec![1.0]]).unwrap();
        let tr = LabeledDataset::new(t, vec!["L".into(), "R".into()]).unwrap();
        let test = ObservedTable::from_complete(&[vec![0.0]]).unwrap();
        let trials = 10_000;
        let left = (0..trials)
            .filter(|&s| knn_predict(&tr, &test, 2, &Euclidean, s).unwrap()[0] == "L")
            .count();
        let share = left as f64 / trials as f64;
        assert!((share - 0.5).abs() < 0.02, "{share}");
    }

    #[test]
    fn predictions_are_seed_deterministic() {
        let t = ObservedTable::from_complete(&[vec![-1.0], vec![1.0]]).unwrap();
        let tr = LabeledDataset::new(t, vec!["L".into(), "R".into()]).unwrap();
        let test = ObservedTable::from_complete(&vec![vec![0.0]; 32]).unwrap();
        let a = knn_predict(&tr, &test, 2, &Euclidean, 3).unwrap();
        assert_eq!(a, knn_predict(&tr, &test, 2, &Euclidean, 3).unwrap());
    }
}
