//! Reproducible simulation of missingness mechanisms on complete tables.
//!
//! * MCAR masks cells uniformly at random.
//! * MAR reserves a seeded subset of *determinant* attributes that are never
//!   masked; rows whose mean determinant value exceeds the dataset median
//!   lose their dependent cells three times as often as the rest.
//! * MNAR-1 only masks cells whose own value lies above a per-attribute
//!   quantile.
//! * MNAR-2 combines both: dependent cells above their quantile, at a rate
//!   scaled by the row's determinant statistic.
//!
//! All simulators only change the mask; observed values are untouched.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::ObservedTable;
use crate::error::{Error, Result};
use crate::rng;

/// Rate ratio between high- and low-statistic rows under MAR and MNAR-2.
const HIGH_TO_LOW_RATE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Mcar,
    Mar,
    Mnar1,
    Mnar2,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [
        Mechanism::Mcar,
        Mechanism::Mar,
        Mechanism::Mnar1,
        Mechanism::Mnar2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Mcar => "mcar",
            Mechanism::Mar => "mar",
            Mechanism::Mnar1 => "mnar1",
            Mechanism::Mnar2 => "mnar2",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "mcar" => Ok(Mechanism::Mcar),
            "mar" => Ok(Mechanism::Mar),
            "mnar1" => Ok(Mechanism::Mnar1),
            "mnar2" => Ok(Mechanism::Mnar2),
            _ => Err(Error::invalid(format!("unknown mechanism {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissingnessSpec {
    pub mechanism: Mechanism,
    /// Fraction of all `n·m` cells to mask, in `[0, 1)`.
    pub target_fraction: f64,
    pub seed: u64,
    /// Share of attributes kept as always-observed determinants (MAR, MNAR-2).
    pub mar_determinant_fraction: f64,
    /// Value quantile above which cells become maskable (MNAR-1, MNAR-2).
    pub quantile: f64,
}

impl MissingnessSpec {
    pub fn new(mechanism: Mechanism, target_fraction: f64, seed: u64) -> Self {
        MissingnessSpec {
            mechanism,
            target_fraction,
            seed,
            mar_determinant_fraction: 0.5,
            quantile: 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.target_fraction) {
            return Err(Error::invalid(format!(
                "target fraction {} must lie in [0, 1)",
                self.target_fraction
            )));
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(Error::invalid(format!(
                "quantile {} must lie in (0, 1)",
                self.quantile
            )));
        }
        if !(self.mar_determinant_fraction > 0.0 && self.mar_determinant_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "determinant fraction {} must lie in (0, 1)",
                self.mar_determinant_fraction
            )));
        }
        Ok(())
    }
}

/// Applies the mechanism named in `spec`.
pub fn simulate(table: &ObservedTable, spec: &MissingnessSpec) -> Result<ObservedTable> {
    match spec.mechanism {
        Mechanism::Mcar => apply_mcar(table, spec),
        Mechanism::Mar => apply_mar(table, spec),
        Mechanism::Mnar1 => apply_mnar1(table, spec),
        Mechanism::Mnar2 => apply_mnar2(table, spec),
    }
}

fn preflight(table: &ObservedTable, spec: &MissingnessSpec) -> Result<()> {
    spec.validate()?;
    if !table.is_complete() {
        return Err(Error::NotComplete);
    }
    Ok(())
}

fn infeasible(spec: &MissingnessSpec, reason: impl Into<String>) -> Error {
    Error::InfeasibleFraction {
        fraction: spec.target_fraction,
        reason: reason.into(),
    }
}

/// Masks exactly `⌊f·n·m⌋` cells chosen uniformly without replacement,
/// skipping any cell that would leave its row empty.
pub fn apply_mcar(table: &ObservedTable, spec: &MissingnessSpec) -> Result<ObservedTable> {
    preflight(table, spec)?;
    let (n, m) = (table.n(), table.m());
    let f = spec.target_fraction;
    if f == 0.0 {
        return Ok(table.clone());
    }
    if f >= (m as f64 - 1.0) / m as f64 {
        return Err(infeasible(
            spec,
            format!("every row must keep one of its {m} attributes"),
        ));
    }
    let target = (f * (n * m) as f64).floor() as usize;
    let mut rng = rng::seeded(spec.seed);
    let mut cells: Vec<usize> = (0..n * m).collect();
    cells.shuffle(&mut rng);

    let mut mask = vec![true; n * m];
    let mut observed_in_row = vec![m; n];
    let mut masked = 0;
    for idx in cells {
        if masked == target {
            break;
        }
        let row = idx / m;
        if observed_in_row[row] > 1 {
            mask[idx] = false;
            observed_in_row[row] -= 1;
            masked += 1;
        }
    }
    table.with_mask(mask)
}

/// Splits attributes into sorted `(determinants, dependents)`.
fn split_attributes(
    m: usize,
    spec: &MissingnessSpec,
    rng: &mut rng::Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if m < 2 {
        return Err(Error::invalid(
            "need at least two attributes for determinant masking",
        ));
    }
    let d = ((spec.mar_determinant_fraction * m as f64).round() as usize).clamp(1, m - 1);
    let mut attrs: Vec<usize> = (0..m).collect();
    attrs.shuffle(rng);
    let mut det = attrs[..d].to_vec();
    let mut dep = attrs[d..].to_vec();
    det.sort_unstable();
    dep.sort_unstable();
    Ok((det, dep))
}

/// For each row, whether its mean determinant value exceeds the median of that statistic.
fn high_statistic_rows(table: &ObservedTable, determinants: &[usize]) -> Vec<bool> {
    let stats: Vec<f64> = table
        .rows()
        .map(|r| determinants.iter().map(|&l| r.value(l)).sum::<f64>() / determinants.len() as f64)
        .collect();
    let median = quantile(&stats, 0.5);
    stats.iter().map(|&s| s > median).collect()
}

/// Linear-interpolation quantile (type 7) of `values`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn column_thresholds(table: &ObservedTable, q: f64) -> Vec<f64> {
    (0..table.m())
        .map(|l| {
            let col: Vec<f64> = table.observed_column(l).map(|(_, v)| v).collect();
            quantile(&col, q)
        })
        .collect()
}

/// A maskable cell and whether its row belongs to the high-rate group.
#[derive(Clone, Copy)]
struct Candidate {
    idx: usize,
    high: bool,
}

/// Per-cell masking probabilities `(p_high, p_low)` with `p_high = 3·p_low`
/// (saturating at 1) so the expected masked count equals `target`.
fn calibrate(candidates: &[Candidate], target: f64) -> (f64, f64) {
    let b_hi = candidates.iter().filter(|c| c.high).count() as f64;
    let b_lo = candidates.len() as f64 - b_hi;
    if target <= 0.0 {
        return (0.0, 0.0);
    }
    let p_lo = target / (HIGH_TO_LOW_RATE * b_hi + b_lo);
    let p_hi = HIGH_TO_LOW_RATE * p_lo;
    if p_hi <= 1.0 {
        return (p_hi, p_lo);
    }
    if b_lo == 0.0 {
        return ((target / b_hi).min(1.0), 0.0);
    }
    (1.0, ((target - b_hi) / b_lo).clamp(0.0, 1.0))
}

/// Bernoulli masking of candidate cells with one rejection-resample pass:
/// a draw whose count strays more than three standard deviations from
/// `target` is discarded and redrawn once. Rows left with no observed cell
/// are redrawn; as a last resort one of their cells is restored.
fn draw_mask(
    n: usize,
    m: usize,
    candidates: &[Candidate],
    probs: (f64, f64),
    target: f64,
    rng: &mut rng::Rng,
) -> Vec<bool> {
    let prob = |c: &Candidate| if c.high { probs.0 } else { probs.1 };
    let variance: f64 = candidates.iter().map(|c| prob(c) * (1.0 - prob(c))).sum();
    let tolerance = 3.0 * variance.sqrt();

    let mut mask = vec![true; n * m];
    for attempt in 0..2 {
        mask.iter_mut().for_each(|b| *b = true);
        let mut count = 0usize;
        for c in candidates {
            if rng.random::<f64>() < prob(c) {
                mask[c.idx] = false;
                count += 1;
            }
        }
        if attempt == 0 && (count as f64 - target).abs() > tolerance {
            continue;
        }
        break;
    }

    let mut by_row: Vec<Vec<Candidate>> = vec![Vec::new(); n];
    for c in candidates {
        by_row[c.idx / m].push(*c);
    }
    for (row, cells) in by_row.iter().enumerate() {
        let span = row * m..(row + 1) * m;
        let mut tries = 0;
        while mask[span.clone()].iter().all(|&b| !b) {
            if tries == 100 {
                let restore = cells[rng.random_range(0..cells.len())].idx;
                mask[restore] = true;
                break;
            }
            for c in cells {
                mask[c.idx] = rng.random::<f64>() >= prob(c);
            }
            tries += 1;
        }
    }
    mask
}

/// Determinant attributes stay observed; dependent cells are masked at a
/// rate three times higher in rows whose determinant mean exceeds the median.
pub fn apply_mar(table: &ObservedTable, spec: &MissingnessSpec) -> Result<ObservedTable> {
    preflight(table, spec)?;
    let (n, m) = (table.n(), table.m());
    let mut rng = rng::seeded(spec.seed);
    let (det, dep) = split_attributes(m, spec, &mut rng)?;
    if spec.target_fraction == 0.0 {
        return Ok(table.clone());
    }
    if spec.target_fraction > dep.len() as f64 / m as f64 {
        return Err(infeasible(
            spec,
            format!("only {} of {m} attributes may be masked", dep.len()),
        ));
    }
    let high = high_statistic_rows(table, &det);
    let candidates: Vec<Candidate> = (0..n)
        .flat_map(|i| dep.iter().map(move |&l| (i, l)))
        .map(|(i, l)| Candidate {
            idx: i * m + l,
            high: high[i],
        })
        .collect();
    let target = spec.target_fraction * (n * m) as f64;
    let probs = calibrate(&candidates, target);
    let mask = draw_mask(n, m, &candidates, probs, target, &mut rng);
    table.with_mask(mask)
}

/// Only cells whose value lies above their attribute's `quantile` may be
/// masked, all with the same probability.
pub fn apply_mnar1(table: &ObservedTable, spec: &MissingnessSpec) -> Result<ObservedTable> {
    preflight(table, spec)?;
    let (n, m) = (table.n(), table.m());
    if spec.target_fraction == 0.0 {
        return Ok(table.clone());
    }
    if spec.target_fraction > 1.0 - spec.quantile {
        return Err(infeasible(
            spec,
            format!(
                "at most {} of cells lie above the quantile",
                1.0 - spec.quantile
            ),
        ));
    }
    let thresholds = column_thresholds(table, spec.quantile);
    let candidates: Vec<Candidate> = (0..n)
        .flat_map(|i| (0..m).map(move |l| (i, l)))
        .filter(|&(i, l)| table.row(i).value(l) > thresholds[l])
        .map(|(i, l)| Candidate {
            idx: i * m + l,
            high: false,
        })
        .collect();
    let target = spec.target_fraction * (n * m) as f64;
    if target > candidates.len() as f64 {
        return Err(infeasible(
            spec,
            format!("only {} cells lie above the quantile", candidates.len()),
        ));
    }
    let mut rng = rng::seeded(spec.seed);
    let probs = calibrate(&candidates, target);
    let mask = draw_mask(n, m, &candidates, probs, target, &mut rng);
    table.with_mask(mask)
}

/// Dependent cells above their own quantile are maskable, at a rate scaled
/// by the row's determinant statistic as in [`apply_mar`].
pub fn apply_mnar2(table: &ObservedTable, spec: &MissingnessSpec) -> Result<ObservedTable> {
    preflight(table, spec)?;
    let (n, m) = (table.n(), table.m());
    let mut rng = rng::seeded(spec.seed);
    let (det, dep) = split_attributes(m, spec, &mut rng)?;
    if spec.target_fraction == 0.0 {
        return Ok(table.clone());
    }
    let thresholds = column_thresholds(table, spec.quantile);
    let high = high_statistic_rows(table, &det);
    let candidates: Vec<Candidate> = (0..n)
        .flat_map(|i| dep.iter().map(move |&l| (i, l)))
        .filter(|&(i, l)| table.row(i).value(l) > thresholds[l])
        .map(|(i, l)| Candidate {
            idx: i * m + l,
            high: high[i],
        })
        .collect();
    let target = spec.target_fraction * (n * m) as f64;
    if target > candidates.len() as f64 {
        return Err(infeasible(
            spec,
            format!(
                "only {} dependent cells lie above the quantile, {target} requested",
                candidates.len()
            ),
        ));
    }
    let probs = calibrate(&candidates, target);
    let mask = draw_mask(n, m, &candidates, probs, target, &mut rng);
    table.with_mask(mask)
}

/// Pearson correlation between the masked indicator and the cell value,
/// pooled over all cells. `complete` supplies the values behind the mask.
pub fn mask_value_correlation(complete: &ObservedTable, masked: &ObservedTable) -> Result<f64> {
    if !complete.is_complete() {
        return Err(Error::NotComplete);
    }
    if complete.n() != masked.n() || complete.m() != masked.m() {
        return Err(Error::DimensionMismatch {
            expected: complete.n() * complete.m(),
            found: masked.n() * masked.m(),
        });
    }
    let pairs: Vec<(f64, f64)> = (0..complete.n())
        .flat_map(|i| (0..complete.m()).map(move |l| (i, l)))
        .map(|(i, l)| {
            let ind = if masked.is_observed(i, l) { 0.0 } else { 1.0 };
            (ind, complete.row(i).value(l))
        })
        .collect();
    Ok(pearson(&pairs))
}

pub(crate) fn pearson(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_table(n: usize, m: usize, seed: u64) -> ObservedTable {
        let mut rng = rng::seeded(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        ObservedTable::from_complete(&rows).unwrap()
    }

    fn spec(mech: Mechanism, f: f64) -> MissingnessSpec {
        MissingnessSpec::new(mech, f, 11)
    }

    #[test]
    fn zero_fraction_is_identity() {
        let t = gaussian_table(50, 4, 1);
        for mech in Mechanism::ALL {
            assert_eq!(simulate(&t, &spec(mech, 0.0)).unwrap(), t, "{mech}");
        }
    }

    #[test]
    fn mcar_masks_exact_count() {
        let t = gaussian_table(150, 4, 2);
        let out = apply_mcar(&t, &spec(Mechanism::Mcar, 0.25)).unwrap();
        assert_eq!(out.missing_count(), 150);
    }

    #[test]
    fn mcar_rejects_unsatisfiable_fraction() {
        let t = gaussian_table(10, 4, 2);
        assert!(matches!(
            apply_mcar(&t, &spec(Mechanism::Mcar, 0.75)),
            Err(Error::InfeasibleFraction { .. })
        ));
    }

    #[test]
    fn inputs_must_be_complete() {
        let t = gaussian_table(10, 3, 2);
        let masked = apply_mcar(&t, &spec(Mechanism::Mcar, 0.2)).unwrap();
        assert!(matches!(
            simulate(&masked, &spec(Mechanism::Mar, 0.1)),
            Err(Error::NotComplete)
        ));
    }

    #[test]
    fn mar_only_masks_dependents_with_threefold_rate() {
        let t = gaussian_table(1000, 4, 3);
        let s = spec(Mechanism::Mar, 0.2);
        let out = apply_mar(&t, &s).unwrap();
        let (det, dep) = split_attributes(4, &s, &mut rng::seeded(s.seed)).unwrap();
        for i in 0..1000 {
            for &l in &det {
                assert!(out.is_observed(i, l));
            }
        }
        let frac = out.missing_fraction();
        assert!((frac - 0.2).abs() <= 0.02, "{frac}");
        let high = high_statistic_rows(&t, &det);
        let rate = |h: bool| {
            let rows: Vec<usize> = (0..1000).filter(|&i| high[i] == h).collect();
            let masked: usize = rows
                .iter()
                .map(|&i| dep.iter().filter(|&&l| !out.is_observed(i, l)).count())
                .sum();
            masked as f64 / (rows.len() * dep.len()) as f64
        };
        let ratio = rate(true) / rate(false);
        assert!((2.5..3.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn mar_rejects_too_large_fraction() {
        let t = gaussian_table(100, 4, 3);
        assert!(apply_mar(&t, &spec(Mechanism::Mar, 0.6)).is_err());
    }

    #[test]
    fn mnar1_masks_only_above_quantile() {
        let t = gaussian_table(1000, 4, 4);
        let out = apply_mnar1(&t, &spec(Mechanism::Mnar1, 0.2)).unwrap();
        let thresholds = column_thresholds(&t, 0.5);
        for i in 0..1000 {
            for (l, th) in thresholds.iter().enumerate() {
                if !out.is_observed(i, l) {
                    assert!(t.row(i).value(l) > *th);
                }
            }
        }
        assert!((out.missing_fraction() - 0.2).abs() <= 0.02);
        // masked values dominate observed values in every attribute
        for l in 0..4 {
            let (mut masked, mut kept): (Vec<f64>, Vec<f64>) = (vec![], vec![]);
            for i in 0..1000 {
                let v = t.row(i).value(l);
                if out.is_observed(i, l) {
                    kept.push(v)
                } else {
                    masked.push(v)
                }
            }
            assert!(quantile(&masked, 0.5) > quantile(&kept, 0.5));
            assert!(quantile(&masked, 0.1) > quantile(&kept, 0.1));
        }
        assert!(apply_mnar1(&t, &spec(Mechanism::Mnar1, 0.6)).is_err());
    }

    #[test]
    fn mnar2_respects_both_constraints() {
        let t = gaussian_table(1000, 4, 5);
        let s = spec(Mechanism::Mnar2, 0.15);
        let out = apply_mnar2(&t, &s).unwrap();
        let (det, _) = split_attributes(4, &s, &mut rng::seeded(s.seed)).unwrap();
        let thresholds = column_thresholds(&t, 0.5);
        for i in 0..1000 {
            for (l, &cut) in thresholds.iter().enumerate() {
                if !out.is_observed(i, l) {
                    assert!(!det.contains(&l));
                    assert!(t.row(i).value(l) > cut);
                }
            }
        }
        assert!((out.missing_fraction() - 0.15).abs() <= 0.02);
        assert!(apply_mnar2(&t, &spec(Mechanism::Mnar2, 0.3)).is_err());
    }

    #[test]
    fn rows_keep_an_observed_cell_and_values_are_unchanged() {
        let t = gaussian_table(300, 2, 6);
        let s = MissingnessSpec {
            quantile: 0.2,
            ..spec(Mechanism::Mnar1, 0.45)
        };
        let out = simulate(&t, &s).unwrap();
        for i in 0..300 {
            assert!(out.row(i).observed_count() >= 1);
            for l in 0..2 {
                if let Some(v) = out.get(i, l) {
                    assert_eq!(v, t.row(i).value(l));
                }
            }
        }
    }

    #[test]
    fn calibration_saturates_high_group() {
        let c: Vec<Candidate> = (0..4)
            .map(|i| Candidate {
                idx: i,
                high: i < 2,
            })
            .collect();
        let (hi, lo) = calibrate(&c, 3.0);
        assert_eq!(hi, 1.0);
        assert!((lo - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mechanism_names_round_trip() {
        for mech in Mechanism::ALL {
            assert_eq!(mech.as_str().parse::<Mechanism>().unwrap(), mech);
        }
        assert_eq!("MNAR-1".parse::<Mechanism>().unwrap(), Mechanism::Mnar1);
        assert!("mnar3".parse::<Mechanism>().is_err());
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0], 0.5), 2.0);
    }
}
