//! Experiment configuration, read from TOML.
//!
//! ```toml
//! output_dir = "results"
//! base_seed = 0
//! runs = 20
//! methods = ["kmpp-awpd", "kmeans-euclid-after-zi", "knn-awpd"]
//! # beta = 0.2          # omit for the missing-fraction default
//! cluster_k = "classes" # or an integer
//! knn_k = 5
//!
//! [[datasets]]
//! name = "iris"
//! path = "data/iris.csv"
//! label_column = "class"
//!
//! [[mechanisms]]
//! mechanism = "mcar"
//! fraction = 0.25
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::DEFAULT_MAX_ITER;
use crate::error::{Error, Result};
use crate::imputation::Imputer;
use crate::missingness::{Mechanism, MissingnessSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    pub path: PathBuf,
    /// Label column name; the last column when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_column: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub mechanism: Mechanism,
    pub fraction: f64,
    #[serde(default = "half")]
    pub quantile: f64,
    #[serde(default = "half")]
    pub determinant_fraction: f64,
}

fn half() -> f64 {
    0.5
}

impl MechanismConfig {
    pub fn new(mechanism: Mechanism, fraction: f64) -> Self {
        MechanismConfig {
            mechanism,
            fraction,
            quantile: 0.5,
            determinant_fraction: 0.5,
        }
    }

    pub fn spec(&self, seed: u64) -> MissingnessSpec {
        MissingnessSpec {
            mechanism: self.mechanism,
            target_fraction: self.fraction,
            seed,
            mar_determinant_fraction: self.determinant_fraction,
            quantile: self.quantile,
        }
    }
}

/// Fill applied before a Euclidean baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fill {
    Zero,
    Mean,
    Knn,
}

impl Fill {
    pub fn imputer(self, k: usize) -> Imputer {
        match self {
            Fill::Zero => Imputer::Zero,
            Fill::Mean => Imputer::Mean,
            Fill::Knn => Imputer::Knn(k),
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Fill::Zero => "zi",
            Fill::Mean => "mi",
            Fill::Knn => "knni",
        }
    }
}

/// A method compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    /// k-means++ seeding and Lloyd under the penalty discrepancy.
    KmppAwpd,
    /// k-means|| seeding and Lloyd under the penalty discrepancy.
    ScalableAwpd,
    /// Euclidean k-means++ on a complete table, optionally after a fill.
    KmeansEuclid(Option<Fill>),
    KnnAwpd,
    KnnEuclid(Option<Fill>),
}

impl Method {
    pub fn is_clustering(self) -> bool {
        matches!(
            self,
            Method::KmppAwpd | Method::ScalableAwpd | Method::KmeansEuclid(_)
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::KmppAwpd => f.write_str("kmpp-awpd"),
            Method::ScalableAwpd => f.write_str("scalable-awpd"),
            Method::KnnAwpd => f.write_str("knn-awpd"),
            Method::KmeansEuclid(None) => f.write_str("kmeans-euclid"),
            Method::KnnEuclid(None) => f.write_str("knn-euclid"),
            Method::KmeansEuclid(Some(fill)) => write!(f, "kmeans-euclid-after-{}", fill.suffix()),
            Method::KnnEuclid(Some(fill)) => write!(f, "knn-euclid-after-{}", fill.suffix()),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let fill = |suffix: &str| match suffix {
            "zi" => Ok(Fill::Zero),
            "mi" => Ok(Fill::Mean),
            "knni" => Ok(Fill::Knn),
            _ => Err(Error::invalid(format!("unknown method {s:?}"))),
        };
        Ok(match s {
            "kmpp-awpd" => Method::KmppAwpd,
            "scalable-awpd" => Method::ScalableAwpd,
            "knn-awpd" => Method::KnnAwpd,
            "kmeans-euclid" => Method::KmeansEuclid(None),
            "knn-euclid" => Method::KnnEuclid(None),
            _ => {
                if let Some(rest) = s.strip_prefix("kmeans-euclid-after-") {
                    Method::KmeansEuclid(Some(fill(rest)?))
                } else if let Some(rest) = s.strip_prefix("knn-euclid-after-") {
                    Method::KnnEuclid(Some(fill(rest)?))
                } else {
                    return Err(Error::invalid(format!("unknown method {s:?}")));
                }
            }
        })
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

/// Number of clusters: `"classes"` (the dataset's class count) or a fixed value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClusterK {
    Fixed(usize),
    Policy(String),
}

impl Default for ClusterK {
    fn default() -> Self {
        ClusterK::Policy("classes".into())
    }
}

impl ClusterK {
    pub fn resolve(&self, classes: usize) -> Result<usize> {
        match self {
            ClusterK::Fixed(k) if *k >= 1 => Ok(*k),
            ClusterK::Fixed(k) => Err(Error::Config(format!("cluster_k = {k} must be at least 1"))),
            ClusterK::Policy(p) if p == "classes" => Ok(classes),
            ClusterK::Policy(p) => Err(Error::Config(format!("unknown cluster_k policy {p:?}"))),
        }
    }
}

fn default_runs() -> usize {
    20
}
fn default_knn_k() -> usize {
    crate::classification::DEFAULT_K
}
fn default_impute_k() -> usize {
    5
}
fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}
fn default_test_fraction() -> f64 {
    0.2
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    pub methods: Vec<Method>,
    /// Fixed β; when absent, β follows the masked table's missing fraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default)]
    pub cluster_k: ClusterK,
    #[serde(default = "default_knn_k")]
    pub knn_k: usize,
    /// Neighbour count for the kNN fill.
    #[serde(default = "default_impute_k")]
    pub impute_k: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Worker threads for independent cells; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    pub datasets: Vec<DatasetConfig>,
    pub mechanisms: Vec<MechanismConfig>,
}

impl ExperimentConfig {
    /// Parses TOML, resolving relative paths against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.resolve_paths(base_dir);
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        self.output_dir = resolve(&self.output_dir);
        for d in &mut self.datasets {
            d.path = resolve(&d.path);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.runs < 1 {
            return fail("runs must be at least 1".into());
        }
        if self.methods.is_empty() {
            return fail("method list is empty".into());
        }
        if self.datasets.is_empty() {
            return fail("dataset list is empty".into());
        }
        if self.mechanisms.is_empty() {
            return fail("mechanism list is empty".into());
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b < 1.0) {
                return fail(format!("beta {b} must lie in (0, 1)"));
            }
        }
        if self.knn_k < 1 || self.impute_k < 1 || self.max_iter < 1 {
            return fail("knn_k, impute_k and max_iter must be at least 1".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return fail(format!(
                "test_fraction {} must lie in (0, 1)",
                self.test_fraction
            ));
        }
        if let ClusterK::Policy(p) = &self.cluster_k {
            if p != "classes" {
                return fail(format!("unknown cluster_k policy {p:?}"));
            }
        }
        for d in &self.datasets {
            if !d.path.exists() {
                return fail(format!(
                    "dataset {} not found at {}",
                    d.name,
                    d.path.display()
                ));
            }
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return fail("dataset names must be unique".into());
        }
        Ok(())
    }
}
