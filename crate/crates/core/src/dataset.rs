//! Incomplete numeric tables with per-cell observation masks.
//!
//! An [`ObservedTable`] stores an `n × m` matrix in row-major order together
//! with a boolean mask (`true` = observed). Unobserved cells hold `NaN` as a
//! sentinel; numeric code must go through the mask and never read them.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Canonical marker written for unobserved cells.
pub const MISSING_MARKER: &str = "?";

/// Markers recognised as missing on input (compared case-insensitively).
pub const DEFAULT_MISSING_MARKERS: [&str; 4] = ["", "?", "NA", "NaN"];

/// A borrowed view of one instance: its values and observation mask.
///
/// Centroids expose the same view, with "observed" meaning "defined".
#[derive(Debug, Clone, Copy)]
pub struct Instance<'a> {
    values: &'a [f64],
    mask: &'a [bool],
}

impl<'a> Instance<'a> {
    /// # Panics
    ///
    /// Panics if `values` and `mask` differ in length.
    pub fn new(values: &'a [f64], mask: &'a [bool]) -> Self {
        assert_eq!(values.len(), mask.len(), "values and mask differ in length");
        Instance { values, mask }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_observed(&self, l: usize) -> bool {
        self.mask[l]
    }

    pub fn get(&self, l: usize) -> Option<f64> {
        self.mask[l].then(|| self.values[l])
    }

    /// Value of an attribute that the caller knows to be observed.
    ///
    /// Reading an unobserved cell is a logic error; debug builds panic.
    #[inline]
    pub fn value(&self, l: usize) -> f64 {
        debug_assert!(self.mask[l], "read of unobserved attribute {l}");
        self.values[l]
    }

    pub fn mask(&self) -> &'a [bool] {
        self.mask
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&b| b)
    }
}

/// An `n × m` numeric table with a per-cell observed mask.
#[derive(Debug, Clone)]
pub struct ObservedTable {
    values: Vec<f64>,
    mask: Vec<bool>,
    n: usize,
    m: usize,
    attribute_names: Vec<String>,
}

/// Equal when shape, names and mask match and every observed value is equal.
impl PartialEq for ObservedTable {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.m == other.m
            && self.attribute_names == other.attribute_names
            && self.mask == other.mask
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.mask)
                .all(|((a, b), &obs)| !obs || a == b)
    }
}

impl ObservedTable {
    /// Builds a table from rows where `None` marks an unobserved cell.
    pub fn from_rows(attribute_names: Vec<String>, rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let m = attribute_names.len();
        let n = rows.len();
        let mut values = Vec::with_capacity(n * m);
        let mut mask = Vec::with_capacity(n * m);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != m {
                return Err(Error::RaggedRow {
                    row: i,
                    found: row.len(),
                    expected: m,
                });
            }
            for (l, cell) in row.into_iter().enumerate() {
                match cell {
                    Some(v) if v.is_finite() => {
                        values.push(v);
                        mask.push(true);
                    }
                    Some(v) => {
                        return Err(Error::UnparseableCell {
                            row: i,
                            column: l,
                            cell: v.to_string(),
                        })
                    }
                    None => {
                        values.push(f64::NAN);
                        mask.push(false);
                    }
                }
            }
        }
        Self::from_parts(attribute_names, n, m, values, mask)
    }

    /// Builds a fully observed table with generated attribute names `x0, x1, …`.
    pub fn from_complete(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        let names = (0..m).map(|l| format!("x{l}")).collect();
        let rows = rows
            .iter()
            .map(|r| r.iter().copied().map(Some).collect())
            .collect();
        Self::from_rows(names, rows)
    }

    /// Builds a table from row-major storage. Masked cells are reset to the sentinel.
    pub fn from_parts(
        attribute_names: Vec<String>,
        n: usize,
        m: usize,
        mut values: Vec<f64>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        if attribute_names.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: attribute_names.len(),
            });
        }
        if values.len() != n * m || mask.len() != n * m {
            return Err(Error::invalid(format!(
                "storage holds {} values and {} mask cells, expected {}",
                values.len(),
                mask.len(),
                n * m
            )));
        }
        for (v, &obs) in values.iter_mut().zip(&mask) {
            if !obs {
                *v = f64::NAN;
            }
        }
        let table = ObservedTable {
            values,
            mask,
            n,
            m,
            attribute_names,
        };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.n {
            let row = self.row(i);
            if row.observed_count() == 0 {
                return Err(Error::EmptyRow { row: i });
            }
            for l in 0..self.m {
                if row.is_observed(l) && !row.values[l].is_finite() {
                    return Err(Error::UnparseableCell {
                        row: i,
                        column: l,
                        cell: row.values[l].to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Returns a copy with a new mask applied. Observed values are kept as is.
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.mask.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mask.len(),
                found: mask.len(),
            });
        }
        for (idx, (&new, &old)) in mask.iter().zip(&self.mask).enumerate() {
            if new && !old {
                return Err(Error::invalid(format!(
                    "cannot reveal unobserved cell ({}, {})",
                    idx / self.m,
                    idx % self.m
                )));
            }
        }
        Self::from_parts(
            self.attribute_names.clone(),
            self.n,
            self.m,
            self.values.clone(),
            mask,
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn row(&self, i: usize) -> Instance<'_> {
        let span = i * self.m..(i + 1) * self.m;
        Instance {
            values: &self.values[span.clone()],
            mask: &self.mask[span],
        }
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = Instance<'_>> + '_ {
        (0..self.n).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, l: usize) -> Option<f64> {
        self.row(i).get(l)
    }

    pub fn is_observed(&self, i: usize, l: usize) -> bool {
        self.mask[i * self.m + l]
    }

    /// Row-major observation mask.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&b| b)
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|&&b| !b).count()
    }

    /// Fraction of all cells that are unobserved.
    pub fn missing_fraction(&self) -> f64 {
        if self.mask.is_empty() {
            0.0
        } else {
            self.missing_count() as f64 / self.mask.len() as f64
        }
    }

    /// Number of instances observing each attribute (`|A_l|`).
    pub fn observed_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.m];
        for row in self.rows() {
            for (l, c) in counts.iter_mut().enumerate() {
                if row.is_observed(l) {
                    *c += 1;
                }
            }
        }
        counts
    }

    /// Observed entries of column `l` as `(row, value)` pairs.
    pub fn observed_column(&self, l: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n).filter_map(move |i| self.get(i, l).map(|v| (i, v)))
    }

    /// Mean of the observed entries of column `l`, or `None` if none are observed.
    pub fn observed_mean(&self, l: usize) -> Option<f64> {
        let (sum, count) = self
            .observed_column(l)
            .fold((0.0, 0usize), |(s, c), (_, v)| (s + v, c + 1));
        (count > 0).then(|| sum / count as f64)
    }

    /// New table made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> ObservedTable {
        let mut values = Vec::with_capacity(rows.len() * self.m);
        let mut mask = Vec::with_capacity(rows.len() * self.m);
        for &i in rows {
            let r = self.row(i);
            values.extend_from_slice(r.values);
            mask.extend_from_slice(r.mask);
        }
        ObservedTable {
            values,
            mask,
            n: rows.len(),
            m: self.m,
            attribute_names: self.attribute_names.clone(),
        }
    }

    /// Concatenates the rows of `self` and `other`.
    pub fn vstack(&self, other: &ObservedTable) -> Result<ObservedTable> {
        if self.m != other.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                found: other.m,
            });
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        let mut mask = self.mask.clone();
        mask.extend_from_slice(&other.mask);
        Ok(ObservedTable {
            values,
            mask,
            n: self.n + other.n,
            m: self.m,
            attribute_names: self.attribute_names.clone(),
        })
    }

    /// Overwrites every unobserved cell with `fill(row, column)` and marks it observed.
    pub(crate) fn fill_missing(&self, mut fill: impl FnMut(usize, usize) -> f64) -> ObservedTable {
        let mut out = self.clone();
        for i in 0..self.n {
            for l in 0..self.m {
                let idx = i * self.m + l;
                if !out.mask[idx] {
                    out.values[idx] = fill(i, l);
                    out.mask[idx] = true;
                }
            }
        }
        out
    }

    /// Writes the table as CSV with `?` for unobserved cells and 9 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W, labels: Option<(&str, &[String])>) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.attribute_names.iter().map(String::as_str).collect();
        if let Some((name, _)) = labels {
            header.push(name);
        }
        w.write_record(&header)?;
        for i in 0..self.n {
            let mut record: Vec<String> = (0..self.m)
                .map(|l| match self.get(i, l) {
                    Some(v) => format_significant(v, 9),
                    None => MISSING_MARKER.to_string(),
                })
                .collect();
            if let Some((_, labels)) = labels {
                record.push(labels[i].clone());
            }
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Formats `v` rounded to `digits` significant digits, in shortest form.
pub fn format_significant(v: f64, digits: usize) -> String {
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), v)
        .parse()
        .unwrap_or(v);
    // avoid "-0"
    if rounded == 0.0 {
        return "0".to_string();
    }
    format!("{rounded}")
}

/// A table paired with one class label per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    table: ObservedTable,
    labels: Vec<String>,
    label_name: String,
}

impl LabeledDataset {
    pub fn new(table: ObservedTable, labels: Vec<String>) -> Result<Self> {
        Self::with_label_name(table, labels, "class")
    }

    pub fn with_label_name(
        table: ObservedTable,
        labels: Vec<String>,
        label_name: impl Into<String>,
    ) -> Result<Self> {
        if labels.len() != table.n() {
            return Err(Error::DimensionMismatch {
                expected: table.n(),
                found: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::Empty("label set"));
        }
        Ok(LabeledDataset {
            table,
            labels,
            label_name: label_name.into(),
        })
    }

    pub fn table(&self) -> &ObservedTable {
        &self.table
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn n(&self) -> usize {
        self.table.n()
    }

    /// Distinct class labels in sorted order.
    pub fn classes(&self) -> Vec<String> {
        let mut c = self.labels.clone();
        c.sort();
        c.dedup();
        c
    }

    pub fn num_classes(&self) -> usize {
        self.classes().len()
    }

    /// Replaces the table, keeping labels. Row counts must agree.
    pub fn with_table(&self, table: ObservedTable) -> Result<Self> {
        Self::with_label_name(table, self.labels.clone(), self.label_name.clone())
    }

    pub fn select_rows(&self, rows: &[usize]) -> LabeledDataset {
        LabeledDataset {
            table: self.table.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i].clone()).collect(),
            label_name: self.label_name.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        self.table
            .write_csv(writer, Some((&self.label_name, &self.labels)))
    }
}

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Last,
    Name(String),
    Index(usize),
    /// No label column; every column is an attribute.
    None,
}

impl LabelColumn {
    /// Parses a CLI-style selector: a column name, `#<index>`, `last` or `none`.
    pub fn parse(s: &str) -> LabelColumn {
        match s {
            "last" => LabelColumn::Last,
            "none" => LabelColumn::None,
            _ => match s.strip_prefix('#').and_then(|d| d.parse().ok()) {
                Some(i) => LabelColumn::Index(i),
                None => LabelColumn::Name(s.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub label: LabelColumn,
    pub missing_markers: Vec<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            label: LabelColumn::Last,
            missing_markers: DEFAULT_MISSING_MARKERS
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

impl LoadOptions {
    pub fn with_label(label: LabelColumn) -> Self {
        LoadOptions {
            label,
            ..Default::default()
        }
    }

    fn is_missing(&self, cell: &str) -> bool {
        let cell = cell.trim();
        self.missing_markers
            .iter()
            .any(|m| m.eq_ignore_ascii_case(cell))
    }
}

/// Result of parsing a CSV file: the table plus labels when a label column was selected.
#[derive(Debug, Clone)]
pub struct ParsedCsv {
    pub table: ObservedTable,
    pub labels: Option<(String, Vec<String>)>,
}

/// Parses CSV from any reader.
pub fn read_csv<R: Read>(reader: R, options: &LoadOptions) -> Result<ParsedCsv> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let width = header.len();
    let label_idx = match &options.label {
        LabelColumn::None => None,
        LabelColumn::Last => Some(width.checked_sub(1).ok_or(Error::Empty("csv header"))?),
        LabelColumn::Index(i) if *i < width => Some(*i),
        LabelColumn::Index(i) => return Err(Error::MissingLabelColumn(format!("#{i}"))),
        LabelColumn::Name(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingLabelColumn(name.clone()))?,
        ),
    };
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(c, _)| Some(c) != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != width {
            return Err(Error::RaggedRow {
                row: r + 1,
                found: record.len(),
                expected: width,
            });
        }
        let mut row = Vec::with_capacity(names.len());
        for (c, cell) in record.iter().enumerate() {
            if Some(c) == label_idx {
                labels.push(cell.trim().to_string());
                continue;
            }
            if options.is_missing(cell) {
                row.push(None);
                continue;
            }
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(Some(v)),
                _ => {
                    return Err(Error::UnparseableCell {
                        row: r + 1,
                        column: c + 1,
                        cell: cell.to_string(),
                    })
                }
            }
        }
        if !row.is_empty() && row.iter().all(Option::is_none) {
            return Err(Error::EmptyRow { row: r + 1 });
        }
        rows.push(row);
    }
    let table = ObservedTable::from_rows(names, rows)?;
    let labels = label_idx.map(|i| (header[i].clone(), labels));
    Ok(ParsedCsv { table, labels })
}

/// Loads a labelled dataset from a CSV file.
pub fn load_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let parsed = parse_file(path, options)?;
    match parsed.labels {
        Some((name, labels)) => LabeledDataset::with_label_name(parsed.table, labels, name),
        None => Err(Error::MissingLabelColumn("none".into())),
    }
}

/// Loads a CSV file, returning labels only if a label column was selected.
pub fn parse_file(path: impl AsRef<Path>, options: &LoadOptions) -> Result<ParsedCsv> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file), options)
        .map_err(|e| e.context(format!("reading {}", path.display())))
}

/// Standardises each attribute over its observed entries (sample std, `n − 1`).
///
/// Attributes with fewer than two observed entries or zero spread are only
/// centred. The mask is unchanged.
pub fn zscore_normalize(table: &ObservedTable) -> ObservedTable {
    let m = table.m();
    let mut out = table.clone();
    for l in 0..m {
        let (mean, std) = match column_stats(table, l) {
            Some(s) => s,
            None => continue,
        };
        // A constant column's mean can be off by an ulp, leaving a spurious
        // spread at rounding level; such columns are only centred.
        let noise = 64.0 * f64::EPSILON * mean.abs();
        let scale = if std > noise && std.is_finite() {
            std
        } else {
            1.0
        };
        for i in 0..table.n() {
            let idx = i * m + l;
            if out.mask[idx] {
                out.values[idx] = (out.values[idx] - mean) / scale;
            }
        }
    }
    out
}

/// Mean and sample standard deviation of the observed entries of a column.
/// The standard deviation is 0 when fewer than two entries are observed.
pub fn column_stats(table: &ObservedTable, l: usize) -> Option<(f64, f64)> {
    let mean = table.observed_mean(l)?;
    let (ss, count) = table
        .observed_column(l)
        .fold((0.0, 0usize), |(s, c), (_, v)| {
            (s + (v - mean) * (v - mean), c + 1)
        });
    let std = if count > 1 {
        (ss / (count - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

impl LabeledDataset {
    pub fn normalized(&self) -> LabeledDataset {
        LabeledDataset {
            table: zscore_normalize(&self.table),
            labels: self.labels.clone(),
            label_name: self.label_name.clone(),
        }
    }
}

/// Seeded train/test row partition. Stratified by class when every class
/// has at least two members. Both index lists are ascending.
pub fn split_indices(
    labels: &[String],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    let n = labels.len();
    if n < 2 {
        return Err(Error::invalid("need at least two rows to split"));
    }
    let mut rng = rng::seeded(seed);
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l.as_str()).or_default().push(i);
    }
    let mut test = Vec::new();
    if by_class.values().all(|rows| rows.len() >= 2) {
        for rows in by_class.values_mut() {
            rows.shuffle(&mut rng);
            let take =
                ((test_fraction * rows.len() as f64).round() as usize).clamp(1, rows.len() - 1);
            test.extend_from_slice(&rows[..take]);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        let take = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
        test.extend_from_slice(&all[..take]);
    }
    test.sort_unstable();
    let mut is_test = vec![false; n];
    for &i in &test {
        is_test[i] = true;
    }
    let train = (0..n).filter(|&i| !is_test[i]).collect();
    Ok((train, test))
}

/// Splits a dataset into `(train, test)`; see [`split_indices`].
pub fn split_train_test(
    dataset: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = split_indices(dataset.labels(), test_fraction, seed)?;
    Ok((dataset.select_rows(&train), dataset.select_rows(&test)))
}
