//! Baseline fills that complete a table before standard Euclidean methods run.

use crate::dataset::ObservedTable;
use crate::discrepancy::observed_sq_distance_raw;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Imputer {
    Zero,
    Mean,
    Knn(usize),
}

impl Imputer {
    pub fn apply(self, table: &ObservedTable) -> Result<ObservedTable> {
        match self {
            Imputer::Zero => Ok(impute_zero(table)),
            Imputer::Mean => impute_mean(table),
            Imputer::Knn(k) => impute_knn(table, k),
        }
    }
}

/// Fills every unobserved cell with 0.
pub fn impute_zero(table: &ObservedTable) -> ObservedTable {
    table.fill_missing(|_, _| 0.0)
}

fn column_means(table: &ObservedTable) -> Result<Vec<f64>> {
    (0..table.m())
        .map(|l| table.observed_mean(l).ok_or(Error::UnobservedAttribute(l)))
        .collect()
}

/// Fills each unobserved cell with the mean of its attribute's observed entries.
pub fn impute_mean(table: &ObservedTable) -> Result<ObservedTable> {
    let means = column_means(table)?;
    Ok(table.fill_missing(|_, l| means[l]))
}

/// Fills cell `(i, l)` with the mean of attribute `l` over the `k` rows
/// nearest to `i` (observed-subspace distance) among rows observing `l`.
/// Distance ties go to the lower row index.
pub fn impute_knn(table: &ObservedTable, k: usize) -> Result<ObservedTable> {
    if k < 1 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let means = column_means(table)?;
    let n = table.n();
    let mut donors: Vec<(f64, usize)> = Vec::with_capacity(n);
    Ok(table.fill_missing(|i, l| {
        let target = table.row(i);
        donors.clear();
        donors.extend(
            (0..n)
                .filter(|&j| j != i && table.is_observed(j, l))
                .map(|j| (observed_sq_distance_raw(target, table.row(j)), j)),
        );
        if donors.is_empty() {
            return means[l];
        }
        donors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let take = k.min(donors.len());
        donors[..take]
            .iter()
            .map(|&(_, j)| table.row(j).value(l))
            .sum::<f64>()
            / take as f64
    }))
}
