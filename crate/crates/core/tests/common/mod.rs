//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use lacuna::dataset::{LabelColumn, LoadOptions};
use lacuna::{load_csv, LabeledDataset, ObservedTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// A bundled dataset, z-score normalised.
pub fn bundled(name: &str) -> LabeledDataset {
    let opts = LoadOptions::with_label(LabelColumn::Name("class".into()));
    load_csv(data_dir().join(format!("{name}.csv")), &opts)
        .unwrap()
        .normalized()
}

/// Isotropic Gaussian mixture: `components` centres drawn uniformly from
/// `[-spread, spread]^dim`, `per` unit-variance points around each.
pub fn mixture(
    components: usize,
    dim: usize,
    per: usize,
    spread: f64,
    seed: u64,
) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..components)
        .map(|_| {
            (0..dim)
                .map(|_| rng.random_range(-spread..spread))
                .collect()
        })
        .collect();
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, centre) in centres.iter().enumerate() {
        for _ in 0..per {
            rows.push(
                centre
                    .iter()
                    .map(|&x| x + noise.sample(&mut rng))
                    .collect::<Vec<f64>>(),
            );
            labels.push(format!("c{c}"));
        }
    }
    LabeledDataset::new(ObservedTable::from_complete(&rows).unwrap(), labels)
        .unwrap()
        .normalized()
}

/// The two synthetic mixtures used alongside the bundled data.
pub fn mixtures() -> Vec<(&'static str, LabeledDataset)> {
    vec![
        ("mixture-3x4", mixture(3, 4, 60, 3.0, 11)),
        ("mixture-4x6", mixture(4, 6, 50, 3.0, 12)),
    ]
}

/// Complete `n × m` table of standard normals sharing one common factor,
/// so attributes are mutually correlated (ρ ≈ 0.36).
pub fn correlated_gaussian(n: usize, m: usize, seed: u64) -> ObservedTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let common: f64 = StandardNormal.sample(&mut rng);
            (0..m)
                .map(|_| {
                    let own: f64 = StandardNormal.sample(&mut rng);
                    0.6 * common + 0.8 * own
                })
                .collect()
        })
        .collect();
    ObservedTable::from_complete(&rows).unwrap()
}

/// Random table with roughly `missing` of its cells masked; every row keeps
/// at least one observed cell.
pub fn random_incomplete(n: usize, m: usize, missing: f64, rng: &mut ChaCha8Rng) -> ObservedTable {
    let rows: Vec<Vec<Option<f64>>> = (0..n)
        .map(|_| {
            let keep = rng.random_range(0..m);
            (0..m)
                .map(|l| {
                    let v = rng.random_range(-10.0..10.0);
                    (l == keep || rng.random::<f64>() >= missing).then_some(v)
                })
                .collect()
        })
        .collect();
    let names = (0..m).map(|l| format!("a{l}")).collect();
    ObservedTable::from_rows(names, rows).unwrap()
}
