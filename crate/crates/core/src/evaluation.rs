//! Scoring of partitions and predictions, and aggregation over repeated runs.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::missingness::Mechanism;

/// Name of the clustering score, echoed into every report.
pub const CLUSTERING_METRIC: &str = "hungarian-matched accuracy";

/// Maximum-weight perfect matching on a square matrix (Kuhn–Munkres with
/// potentials, `O(s³)`). Returns `assignment[row] = column`.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<usize> {
    let s = weights.len();
    if s == 0 {
        return Vec::new();
    }
    // minimise cost = -weight; 1-based arrays with a virtual column 0
    let cost = |i: usize, j: usize| -weights[i - 1][j - 1];
    let mut u = vec![0.0; s + 1];
    let mut v = vec![0.0; s + 1];
    let mut p = vec![0usize; s + 1];
    let mut way = vec![0usize; s + 1];
    for i in 1..=s {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; s + 1];
        let mut used = vec![false; s + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=s {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=s {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; s];
    for j in 1..=s {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

/// Cluster × class contingency counts, zero-padded to a square matrix.
/// Rows follow sorted cluster ids, columns sorted class labels.
pub fn confusion_matrix<T: Ord>(partition: &[usize], truth: &[T]) -> Result<Vec<Vec<f64>>> {
    if partition.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: partition.len(),
        });
    }
    let clusters: BTreeMap<usize, usize> = index_of(partition.iter().copied());
    let classes: BTreeMap<&T, usize> = index_of(truth.iter());
    let s = clusters.len().max(classes.len());
    let mut matrix = vec![vec![0.0; s]; s];
    for (c, t) in partition.iter().zip(truth) {
        matrix[clusters[c]][classes[t]] += 1.0;
    }
    Ok(matrix)
}

fn index_of<K: Ord>(items: impl Iterator<Item = K>) -> BTreeMap<K, usize> {
    let mut map = BTreeMap::new();
    for k in items {
        map.entry(k).or_insert(0);
    }
    for (i, v) in map.values_mut().enumerate() {
        *v = i;
    }
    map
}

/// Share of instances correctly matched under the best one-to-one mapping
/// of clusters to classes.
pub fn clustering_accuracy<T: Ord>(partition: &[usize], truth: &[T]) -> Result<f64> {
    if partition.is_empty() {
        return Err(Error::Empty("partition"));
    }
    let matrix = confusion_matrix(partition, truth)?;
    let assignment = max_weight_assignment(&matrix);
    let matched: f64 = assignment
        .iter()
        .enumerate()
        .map(|(r, &c)| matrix[r][c])
        .sum();
    Ok(matched / partition.len() as f64)
}

/// Share of exact matches.
pub fn classification_accuracy<T: PartialEq>(pred: &[T], truth: &[T]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Accuracy of one method on one masked realisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub mechanism: Mechanism,
    pub fraction: f64,
    pub method: String,
    pub seed: u64,
    pub accuracy: f64,
}

/// Mean ± sample std of one (dataset, mechanism, fraction, method) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub dataset: String,
    pub mechanism: Mechanism,
    pub fraction: f64,
    pub method: String,
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
    /// Highest mean among the methods sharing this dataset, mechanism and fraction.
    pub best: bool,
}

impl AggregateRow {
    /// `mean±std` with three decimals, as in published accuracy tables.
    pub fn cell(&self) -> String {
        format!("{:.3}±{:.3}", self.mean, self.std)
    }
}

fn cmp_group(a: &RunRecord, b: &RunRecord) -> Ordering {
    a.dataset
        .cmp(&b.dataset)
        .then(a.mechanism.cmp(&b.mechanism))
        .then(a.fraction.total_cmp(&b.fraction))
        .then(a.method.cmp(&b.method))
}

/// Groups records and summarises each group. The output is sorted by
/// dataset, mechanism, fraction, then method, and does not depend on the
/// order of `records`.
pub fn aggregate_runs(records: &[RunRecord]) -> Result<Vec<AggregateRow>> {
    if records.is_empty() {
        return Err(Error::Empty("run records"));
    }
    if let Some(r) = records.iter().find(|r| !(0.0..=1.0).contains(&r.accuracy)) {
        return Err(Error::invalid(format!(
            "accuracy {} outside [0, 1]",
            r.accuracy
        )));
    }
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| cmp_group(a, b).then(a.accuracy.total_cmp(&b.accuracy)));

    let mut rows: Vec<AggregateRow> = Vec::new();
    for group in sorted.chunk_by(|a, b| cmp_group(a, b) == Ordering::Equal) {
        let acc: Vec<f64> = group.iter().map(|r| r.accuracy).collect();
        let (mean, std) = mean_std(&acc);
        let head = group[0];
        rows.push(AggregateRow {
            dataset: head.dataset.clone(),
            mechanism: head.mechanism,
            fraction: head.fraction,
            method: head.method.clone(),
            runs: acc.len(),
            mean,
            std,
            best: false,
        });
    }
    let same_setting = |a: &AggregateRow, b: &AggregateRow| {
        a.dataset == b.dataset && a.mechanism == b.mechanism && a.fraction == b.fraction
    };
    for block in rows.chunk_by_mut(same_setting) {
        let top = block
            .iter()
            .map(|r| r.mean)
            .fold(f64::NEG_INFINITY, f64::max);
        for r in block {
            r.best = r.mean == top;
        }
    }
    Ok(rows)
}

/// Sample mean and standard deviation (`n − 1`; 0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}
