//! Report files: per-mechanism aggregate tables, per-dataset plot data,
//! the raw run records and a manifest that can be fed back as a config.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ExperimentConfig, ExperimentReport};
use crate::dataset::format_significant;
use crate::error::{Error, Result};
use crate::evaluation::{AggregateRow, RunRecord, CLUSTERING_METRIC};

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn fraction(f: f64) -> String {
    format_significant(f, 9)
}

/// Writes one `table_<mechanism>.csv` per mechanism present in `rows`.
pub fn write_aggregate_tables(rows: &[AggregateRow], outdir: &Path) -> Result<Vec<PathBuf>> {
    let mechanisms: BTreeSet<_> = rows.iter().map(|r| r.mechanism).collect();
    let mut written = Vec::new();
    for mech in mechanisms {
        let path = outdir.join(format!("table_{mech}.csv"));
        let mut out = create(&path)?;
        writeln!(
            out,
            "# clustering score: {CLUSTERING_METRIC}; classification score: exact-match accuracy"
        )
        .map_err(|e| Error::io(&path, e))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "dataset",
            "mechanism",
            "fraction",
            "method",
            "runs",
            "mean",
            "std",
            "best",
        ])?;
        for r in rows.iter().filter(|r| r.mechanism == mech) {
            w.write_record([
                r.dataset.clone(),
                r.mechanism.to_string(),
                fraction(r.fraction),
                r.method.clone(),
                r.runs.to_string(),
                format!("{:.6}", r.mean),
                format!("{:.6}", r.std),
                r.best.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Writes every run record to one CSV, in report order.
pub fn write_records_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record([
        "dataset",
        "mechanism",
        "fraction",
        "method",
        "seed",
        "accuracy",
    ])?;
    for r in records {
        w.write_record([
            r.dataset.clone(),
            r.mechanism.to_string(),
            fraction(r.fraction),
            r.method.clone(),
            r.seed.to_string(),
            format!("{}", r.accuracy),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads records written by [`write_records_csv`].
pub fn read_records_csv(path: &Path) -> Result<Vec<RunRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or_default();
        let parse_err = |what: &str| Error::invalid(format!("bad {what} in {}", path.display()));
        records.push(RunRecord {
            dataset: field(0).to_string(),
            mechanism: field(1).parse()?,
            fraction: field(2).parse().map_err(|_| parse_err("fraction"))?,
            method: field(3).to_string(),
            seed: field(4).parse().map_err(|_| parse_err("seed"))?,
            accuracy: field(5).parse().map_err(|_| parse_err("accuracy"))?,
        });
    }
    Ok(records)
}

fn write_plot_data(
    records: &[RunRecord],
    config: &ExperimentConfig,
    outdir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for d in &config.datasets {
        let path = outdir.join(format!("plot_{}.csv", d.name));
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(["mechanism", "fraction", "method", "run", "seed", "accuracy"])?;
        for r in records.iter().filter(|r| r.dataset == d.name) {
            let run = r.seed - config.base_seed;
            w.write_record([
                r.mechanism.to_string(),
                fraction(r.fraction),
                r.method.clone(),
                run.to_string(),
                r.seed.to_string(),
                format!("{}", r.accuracy),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Serialize)]
struct Provenance<'a> {
    lacuna_version: &'a str,
    clustering_metric: &'a str,
    beta_rule: String,
    records: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    #[serde(flatten)]
    config: &'a ExperimentConfig,
    provenance: Provenance<'a>,
}

/// Writes the report files into `outdir` and returns their paths.
///
/// The manifest is a valid experiment config (with an extra `provenance`
/// table), so `run_experiment(ExperimentConfig::load(manifest))` repeats the run.
pub fn emit_report(report: &ExperimentReport, outdir: &Path) -> Result<Vec<PathBuf>> {
    if report.records.is_empty() {
        return Err(Error::Empty("report"));
    }
    std::fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let mut written = write_aggregate_tables(&report.aggregates, outdir)?;
    written.extend(write_plot_data(&report.records, &report.config, outdir)?);

    let records = outdir.join("records.csv");
    write_records_csv(&report.records, &records)?;
    written.push(records);

    let manifest = Manifest {
        config: &report.config,
        provenance: Provenance {
            lacuna_version: env!("CARGO_PKG_VERSION"),
            clustering_metric: CLUSTERING_METRIC,
            beta_rule: match report.config.beta {
                Some(b) => format!("fixed {b}"),
                None => "missing-cell fraction clamped to [0.1, 0.25]".into(),
            },
            records: report.records.len(),
        },
    };
    let path = outdir.join("manifest.toml");
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}
