//! Experiment runner: load → normalise → mask → run every method → score.
//!
//! Each (dataset, mechanism, run) cell simulates missingness once with seed
//! `base_seed + run`; every configured method then sees that same masked
//! table, so method comparisons are paired. Cells run concurrently but are
//! reported in a fixed order, so a config always yields the same report.

mod config;
mod report;

pub use config::{ClusterK, DatasetConfig, ExperimentConfig, Fill, MechanismConfig, Method};
pub use report::{emit_report, read_records_csv, write_aggregate_tables, write_records_csv};

use rayon::prelude::*;

use crate::classification::{knn_awpd_predict, knn_predict};
use crate::clustering::{cluster, ScalableParams, Seeding};
use crate::dataset::{
    load_csv, split_indices, LabelColumn, LabeledDataset, LoadOptions, ObservedTable,
};
use crate::discrepancy::{default_beta, DiscrepancyModel, Euclidean};
use crate::error::{Error, Result};
use crate::evaluation::{
    aggregate_runs, classification_accuracy, clustering_accuracy, AggregateRow, RunRecord,
};
use crate::missingness::simulate;

/// All run records of an experiment plus their aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
    pub aggregates: Vec<AggregateRow>,
}

struct PreparedDataset {
    name: String,
    data: LabeledDataset,
    k: usize,
}

fn prepare(config: &ExperimentConfig) -> Result<Vec<PreparedDataset>> {
    config
        .datasets
        .iter()
        .map(|d| {
            let label = d
                .label_column
                .as_ref()
                .map_or(LabelColumn::Last, |c| LabelColumn::Name(c.clone()));
            let data = load_csv(&d.path, &LoadOptions::with_label(label))?.normalized();
            let k = config.cluster_k.resolve(data.num_classes())?;
            if k > data.n() {
                return Err(Error::Config(format!(
                    "cluster_k {k} exceeds the {} rows of {}",
                    data.n(),
                    d.name
                )));
            }
            Ok(PreparedDataset {
                name: d.name.clone(),
                data,
                k,
            })
        })
        .collect()
}

fn beta_for(config: &ExperimentConfig, table: &ObservedTable) -> f64 {
    config.beta.unwrap_or_else(|| default_beta(table))
}

fn require_complete(table: &ObservedTable, method: Method) -> Result<()> {
    if table.is_complete() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{method} needs a complete table; choose an -after-zi/mi/knni variant"
        )))
    }
}

/// Scores one method on one masked table.
pub fn run_method(
    config: &ExperimentConfig,
    method: Method,
    masked: &LabeledDataset,
    k: usize,
    split: &(Vec<usize>, Vec<usize>),
    seed: u64,
) -> Result<f64> {
    let table = masked.table();
    let labels = masked.labels();
    match method {
        Method::KmppAwpd | Method::ScalableAwpd => {
            let model = DiscrepancyModel::fit(table, beta_for(config, table))?;
            let seeding = if method == Method::KmppAwpd {
                Seeding::KMeansPlusPlus
            } else {
                Seeding::Scalable(ScalableParams::for_k(k))
            };
            let state = cluster(table, k, &model, seeding, config.max_iter, seed)?;
            clustering_accuracy(state.membership(), labels)
        }
        Method::KmeansEuclid(fill) => {
            let complete = match fill {
                Some(f) => f.imputer(config.impute_k).apply(table)?,
                None => {
                    require_complete(table, method)?;
                    table.clone()
                }
            };
            let state = cluster(
                &complete,
                k,
                &Euclidean,
                Seeding::KMeansPlusPlus,
                config.max_iter,
                seed,
            )?;
            clustering_accuracy(state.membership(), labels)
        }
        Method::KnnAwpd => {
            let (train, test) = (masked.select_rows(&split.0), masked.select_rows(&split.1));
            let model = DiscrepancyModel::fit(table, beta_for(config, table))?;
            let pred = knn_awpd_predict(&train, test.table(), config.knn_k, &model, seed)?;
            classification_accuracy(&pred, test.labels())
        }
        Method::KnnEuclid(fill) => {
            let complete = match fill {
                Some(f) => masked.with_table(f.imputer(config.impute_k).apply(table)?)?,
                None => {
                    require_complete(table, method)?;
                    masked.clone()
                }
            };
            let (train, test) = (
                complete.select_rows(&split.0),
                complete.select_rows(&split.1),
            );
            let pred = knn_predict(&train, test.table(), config.knn_k, &Euclidean, seed)?;
            classification_accuracy(&pred, test.labels())
        }
    }
}

fn run_cell(
    config: &ExperimentConfig,
    dataset: &PreparedDataset,
    mechanism: &MechanismConfig,
    run: usize,
) -> Result<Vec<RunRecord>> {
    let seed = config.base_seed + run as u64;
    let masked_table = simulate(dataset.data.table(), &mechanism.spec(seed))?;
    let masked = dataset.data.with_table(masked_table)?;
    let split = split_indices(masked.labels(), config.test_fraction, seed)?;
    config
        .methods
        .iter()
        .map(|&method| {
            let accuracy =
                run_method(config, method, &masked, dataset.k, &split, seed).map_err(|e| {
                    e.context(format!(
                        "dataset {}, mechanism {}, method {method}, seed {seed}",
                        dataset.name, mechanism.mechanism
                    ))
                })?;
            Ok(RunRecord {
                dataset: dataset.name.clone(),
                mechanism: mechanism.mechanism,
                fraction: mechanism.fraction,
                method: method.to_string(),
                seed,
                accuracy,
            })
        })
        .collect()
}

/// Runs the full grid described by `config`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let datasets = prepare(config)?;
    let mut cells = Vec::new();
    for d in &datasets {
        for mech in &config.mechanisms {
            for run in 0..config.runs {
                cells.push((d, mech, run));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Result<Vec<RunRecord>>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(d, mech, run)| run_cell(config, d, mech, run))
            .collect()
    });
    let mut records = Vec::with_capacity(cells.len() * config.methods.len());
    for r in results {
        records.extend(r?);
    }
    let aggregates = aggregate_runs(&records)?;
    Ok(ExperimentReport {
        config: config.clone(),
        records,
        aggregates,
    })
}
