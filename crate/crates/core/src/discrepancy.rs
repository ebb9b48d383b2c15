//! Distances between partially observed instances.
//!
//! The central quantity is the attribute-weighted penalty discrepancy
//!
//! ```text
//! δ(a, b) = (1 − β) · d(a, b) / d_max + β · q(a, b)
//! ```
//!
//! where `d` is the Euclidean distance over the attributes observed in both
//! instances and `q` is the weighted share of attributes missing from at
//! least one of them. [`pdm`] and [`sdm`] are the two simpler measures used
//! to motivate it.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Instance, ObservedTable};
use crate::error::{Error, Result};

fn check_dims(a: Instance<'_>, b: Instance<'_>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

#[inline]
pub(crate) fn observed_sq_distance_raw(a: Instance<'_>, b: Instance<'_>) -> f64 {
    let mut sum = 0.0;
    for l in 0..a.dim() {
        if a.is_observed(l) && b.is_observed(l) {
            let d = a.value(l) - b.value(l);
            sum += d * d;
        }
    }
    sum
}

#[inline]
fn shared_missing_count(a: Instance<'_>, b: Instance<'_>) -> usize {
    (0..a.dim())
        .filter(|&l| !(a.is_observed(l) && b.is_observed(l)))
        .count()
}

/// Euclidean distance over the attributes observed in both instances.
/// Zero when they share no observed attribute.
pub fn observed_distance(a: Instance<'_>, b: Instance<'_>) -> Result<f64> {
    check_dims(a, b)?;
    Ok(observed_sq_distance_raw(a, b).sqrt())
}

/// Fraction of attributes missing from at least one of the two instances.
pub fn missing_fraction(a: Instance<'_>, b: Instance<'_>) -> Result<f64> {
    check_dims(a, b)?;
    if a.dim() == 0 {
        return Ok(0.0);
    }
    Ok(shared_missing_count(a, b) as f64 / a.dim() as f64)
}

/// Observed distance plus the unweighted missing fraction.
pub fn pdm(a: Instance<'_>, b: Instance<'_>) -> Result<f64> {
    Ok(observed_distance(a, b)? + missing_fraction(a, b)?)
}

/// `sqrt(d² + missing fraction)`: the missing fraction enters under the root.
pub fn sdm(a: Instance<'_>, b: Instance<'_>) -> Result<f64> {
    let fraction = missing_fraction(a, b)?;
    Ok((observed_sq_distance_raw(a, b) + fraction).sqrt())
}

/// Something that scores how far an instance is from another instance or centroid.
pub trait Dissimilarity: Sync {
    /// Callers guarantee equal dimensions.
    fn dissimilarity(&self, a: Instance<'_>, b: Instance<'_>) -> f64;
}

/// Plain Euclidean distance (over shared observed attributes), for complete or imputed data.
#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl Dissimilarity for Euclidean {
    #[inline]
    fn dissimilarity(&self, a: Instance<'_>, b: Instance<'_>) -> f64 {
        observed_sq_distance_raw(a, b).sqrt()
    }
}

/// Fitted parameters of the penalty discrepancy: attribute weights, β and `d_max`.
///
/// `d_max` is fixed at fit time. Queries involving points outside the fitted
/// table may therefore produce a distance ratio above 1; it is not clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct DiscrepancyModel {
    weights: Vec<f64>,
    beta: f64,
    d_max: f64,
    weight_sum: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    beta: f64,
    d_max: f64,
    weights: Vec<f64>,
}

impl From<DiscrepancyModel> for ModelFile {
    fn from(m: DiscrepancyModel) -> Self {
        ModelFile {
            beta: m.beta,
            d_max: m.d_max,
            weights: m.weights,
        }
    }
}

impl TryFrom<ModelFile> for DiscrepancyModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        DiscrepancyModel::new(f.weights, f.beta, f.d_max)
    }
}

/// β proportional to the share of missing cells, clamped to `[0.1, 0.25]`.
pub fn default_beta(table: &ObservedTable) -> f64 {
    table.missing_fraction().clamp(0.1, 0.25)
}

impl DiscrepancyModel {
    pub fn new(weights: Vec<f64>, beta: f64, d_max: f64) -> Result<Self> {
        check_beta(beta)?;
        if !(d_max > 0.0 && d_max.is_finite()) {
            return Err(Error::invalid(format!(
                "d_max must be positive, got {d_max}"
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid(format!(
                "weights must be non-negative, got {w}"
            )));
        }
        let weight_sum: f64 = weights.iter().sum();
        if weight_sum.is_nan() || weight_sum <= 0.0 {
            return Err(Error::invalid("attribute weights are all zero"));
        }
        Ok(DiscrepancyModel {
            weights,
            beta,
            d_max,
            weight_sum,
        })
    }

    /// Fits weights `w_l = |A_l| / n` and `d_max` as the largest pairwise
    /// observed distance in `table` (1 if every pair is at distance 0).
    pub fn fit(table: &ObservedTable, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let n = table.n();
        if n < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 instances to fit, got {n}"
            )));
        }
        let weights: Vec<f64> = table
            .observed_counts()
            .into_iter()
            .map(|c| c as f64 / n as f64)
            .collect();
        let d_max = max_pairwise_distance(table);
        let d_max = if d_max > 0.0 { d_max } else { 1.0 };
        Self::new(weights, beta, d_max)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn check(&self, a: Instance<'_>, b: Instance<'_>) -> Result<()> {
        check_dims(a, b)?;
        if a.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: a.dim(),
            });
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn penalty_raw(&self, a: Instance<'_>, b: Instance<'_>) -> f64 {
        let mut missing = 0.0;
        for (l, w) in self.weights.iter().enumerate() {
            if !(a.is_observed(l) && b.is_observed(l)) {
                missing += w;
            }
        }
        missing / self.weight_sum
    }

    #[inline]
    pub(crate) fn awpd_raw(&self, a: Instance<'_>, b: Instance<'_>) -> f64 {
        let d = observed_sq_distance_raw(a, b).sqrt();
        (1.0 - self.beta) * (d / self.d_max) + self.beta * self.penalty_raw(a, b)
    }

    /// Weighted share of attributes not observed in both instances, in `[0, 1]`.
    pub fn penalty(&self, a: Instance<'_>, b: Instance<'_>) -> Result<f64> {
        self.check(a, b)?;
        Ok(self.penalty_raw(a, b))
    }

    /// The blended discrepancy `(1 − β)·d/d_max + β·q`.
    pub fn awpd(&self, a: Instance<'_>, b: Instance<'_>) -> Result<f64> {
        self.check(a, b)?;
        Ok(self.awpd_raw(a, b))
    }

    /// Precomputes all pairwise discrepancies of `table` (`n²` memory).
    pub fn pairwise(&self, table: &ObservedTable) -> Result<PairwiseDiscrepancies> {
        if table.m() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: table.m(),
            });
        }
        let n = table.n();
        let values = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let a = table.row(i);
                (0..n).map(move |j| self.awpd_raw(a, table.row(j)))
            })
            .collect();
        Ok(PairwiseDiscrepancies { n, values })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model serialises")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

impl Dissimilarity for DiscrepancyModel {
    #[inline]
    fn dissimilarity(&self, a: Instance<'_>, b: Instance<'_>) -> f64 {
        self.awpd_raw(a, b)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "beta must lie in (0, 1), got {beta}"
        )))
    }
}

/// Largest observed distance over all unordered pairs of rows.
pub fn max_pairwise_distance(table: &ObservedTable) -> f64 {
    let n = table.n();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let a = table.row(i);
            (i + 1..n)
                .map(|j| observed_sq_distance_raw(a, table.row(j)))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
        .sqrt()
}

/// Dense `n × n` matrix of precomputed discrepancies.
#[derive(Debug, Clone)]
pub struct PairwiseDiscrepancies {
    n: usize,
    values: Vec<f64>,
}

impl PairwiseDiscrepancies {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn example() -> ObservedTable {
        ObservedTable::from_rows(
            vec!["x".into(), "y".into()],
            vec![
                vec![None, Some(5.0)],
                vec![Some(2.0), Some(3.0)],
                vec![Some(3.0), Some(6.0)],
            ],
        )
        .unwrap()
    }

    fn inst<'a>(v: &'a [f64], m: &'a [bool]) -> Instance<'a> {
        Instance::new(v, m)
    }

    #[test]
    fn observed_distance_examples() {
        let d = observed_distance(inst(&[1.0, 5.0], &[true; 2]), inst(&[2.0, 3.0], &[true; 2]))
            .unwrap();
        assert_abs_diff_eq!(d, 5f64.sqrt(), epsilon = 1e-15);
        let t = example();
        assert_eq!(observed_distance(t.row(0), t.row(1)).unwrap(), 2.0);
        let b = inst(&[2.0, 0.0], &[true, false]);
        assert_eq!(observed_distance(t.row(0), b).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = inst(&[1.0], &[true]);
        let b = inst(&[1.0, 2.0], &[true, true]);
        assert!(matches!(
            observed_distance(a, b),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(pdm(a, b).is_err());
        assert!(sdm(a, b).is_err());
    }

    #[test]
    fn pdm_and_sdm_worked_values() {
        let t = example();
        assert_eq!(pdm(t.row(0), t.row(1)).unwrap(), 2.5);
        assert_eq!(pdm(t.row(0), t.row(2)).unwrap(), 1.5);
        assert_abs_diff_eq!(
            sdm(t.row(0), t.row(1)).unwrap(),
            4.5f64.sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            sdm(t.row(0), t.row(2)).unwrap(),
            1.5f64.sqrt(),
            epsilon = 1e-15
        );
        assert_eq!(pdm(t.row(1), t.row(1)).unwrap(), 0.0);
        assert_eq!(sdm(t.row(2), t.row(2)).unwrap(), 0.0);
    }

    #[test]
    fn fit_on_worked_example() {
        let model = DiscrepancyModel::fit(&example(), 0.25).unwrap();
        assert_abs_diff_eq!(model.weights()[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(model.weights()[1], 1.0);
        assert_abs_diff_eq!(model.weight_sum(), 5.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(model.d_max(), 10f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn fit_degenerate_tables() {
        let same = ObservedTable::from_complete(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        let model = DiscrepancyModel::fit(&same, 0.2).unwrap();
        assert_eq!(model.d_max(), 1.0);
        assert_eq!(model.weights(), [1.0, 1.0]);
        let one = ObservedTable::from_complete(&[vec![1.0]]).unwrap();
        assert!(DiscrepancyModel::fit(&one, 0.2).is_err());
        assert!(DiscrepancyModel::fit(&same, 0.0).is_err());
        assert!(DiscrepancyModel::fit(&same, 1.0).is_err());
    }

    #[test]
    fn penalty_examples() {
        let t = example();
        let model = DiscrepancyModel::fit(&t, 0.25).unwrap();
        assert_eq!(model.penalty(t.row(1), t.row(2)).unwrap(), 0.0);
        assert_abs_diff_eq!(
            model.penalty(t.row(0), t.row(1)).unwrap(),
            0.4,
            epsilon = 1e-15
        );
        let b = inst(&[2.0, 0.0], &[true, false]);
        assert_abs_diff_eq!(model.penalty(t.row(0), b).unwrap(), 1.0, epsilon = 1e-15);
        // no shared attribute: δ = β
        assert_abs_diff_eq!(model.awpd(t.row(0), b).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn awpd_worked_value() {
        let t = example();
        let model = DiscrepancyModel::fit(&t, 0.25).unwrap();
        // 0.75 * 2/sqrt(10) + 0.25 * 0.4
        assert_abs_diff_eq!(
            model.awpd(t.row(0), t.row(1)).unwrap(),
            0.574341649025257,
            epsilon = 1e-12
        );
        assert_eq!(model.awpd(t.row(1), t.row(1)).unwrap(), 0.0);
    }

    #[test]
    fn model_rejects_bad_parameters() {
        assert!(DiscrepancyModel::new(vec![0.0, 0.0], 0.2, 1.0).is_err());
        assert!(DiscrepancyModel::new(vec![-1.0, 2.0], 0.2, 1.0).is_err());
        assert!(DiscrepancyModel::new(vec![1.0], 0.2, 0.0).is_err());
        assert!(DiscrepancyModel::new(vec![1.0], 1.5, 1.0).is_err());
    }

    #[test]
    fn default_beta_is_clamped() {
        let t = example();
        // 1 of 6 cells missing
        assert_abs_diff_eq!(default_beta(&t), 1.0 / 6.0, epsilon = 1e-15);
        let full = ObservedTable::from_complete(&[vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(default_beta(&full), 0.1);
    }

    #[test]
    fn model_file_round_trip_is_exact() {
        let model =
            DiscrepancyModel::new(vec![2.0 / 3.0, 0.1 + 0.2], 1.0 / 7.0, 10f64.sqrt()).unwrap();
        let text = model.to_toml();
        let back = DiscrepancyModel::from_toml(&text).unwrap();
        assert_eq!(back, model);
        assert!(DiscrepancyModel::from_toml("beta = 2.0\nd_max = 1.0\nweights = [1.0]").is_err());
    }

    #[test]
    fn pairwise_cache_matches_direct() {
        let t = example();
        let model = DiscrepancyModel::fit(&t, 0.2).unwrap();
        let cache = model.pairwise(&t).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(cache.get(i, j), model.awpd(t.row(i), t.row(j)).unwrap());
            }
        }
    }
}
