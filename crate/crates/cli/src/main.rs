use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lacuna::classification::{knn_predict, DEFAULT_K};
use lacuna::clustering::{cluster, ScalableParams, Seeding, DEFAULT_MAX_ITER};
use lacuna::dataset::{parse_file, LabelColumn, LoadOptions, ParsedCsv};
use lacuna::discrepancy::default_beta;
use lacuna::evaluation::{aggregate_runs, classification_accuracy, clustering_accuracy};
use lacuna::harness::{emit_report, read_records_csv, write_aggregate_tables};
use lacuna::imputation::Imputer;
use lacuna::missingness::simulate;
use lacuna::{
    run_experiment, zscore_normalize, DiscrepancyModel, Euclidean, ExperimentConfig, Mechanism,
    MissingnessSpec, ObservedTable,
};

/// Clustering and classification of incomplete data.
#[derive(Parser)]
#[command(name = "lacuna", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment grid from a TOML config and write its report.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Write the report here instead of the config's output_dir.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Worker threads (0 = all cores); overrides the config.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Hide cells of a complete CSV under a missingness mechanism.
    Simulate(SimulateArgs),
    /// Fill missing cells with a baseline imputer.
    Impute(ImputeArgs),
    /// Cluster an (incomplete) CSV.
    Cluster(ClusterArgs),
    /// Classify test rows by kNN against a labelled training CSV.
    Classify(ClassifyArgs),
    /// Rebuild aggregate tables from a records.csv.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct Input {
    /// Input CSV with a header row; `?`, `NA`, `NaN` and empty cells are missing.
    #[arg(long)]
    input: PathBuf,
    /// Label column: a name, `#<index>`, `last` or `none`.
    #[arg(long, default_value = "last")]
    label_column: String,
}

impl Input {
    fn load(&self) -> Result<ParsedCsv> {
        load(&self.input, &self.label_column)
    }
}

fn load(path: &Path, label_column: &str) -> Result<ParsedCsv> {
    let opts = LoadOptions::with_label(LabelColumn::parse(label_column));
    Ok(parse_file(path, &opts)?)
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long)]
    mechanism: Mechanism,
    #[arg(long, default_value_t = 0.25)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Value quantile above which cells may be hidden (MNAR variants).
    #[arg(long, default_value_t = 0.5)]
    quantile: f64,
    /// Share of attributes kept fully observed (MAR, MNAR-2).
    #[arg(long, default_value_t = 0.5)]
    determinant_fraction: f64,
    /// z-score each column before masking.
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FillMethod {
    Zero,
    Mean,
    Knn,
}

#[derive(Args)]
struct ImputeArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_enum)]
    method: FillMethod,
    /// Neighbours for the kNN fill.
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Algo {
    KmppAwpd,
    ScalableAwpd,
    KmeansEuclid,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_enum, default_value = "kmpp-awpd")]
    algo: Algo,
    /// Number of clusters; defaults to the number of classes in the label column.
    #[arg(long)]
    k: Option<usize>,
    /// Penalty weight; defaults to the missing fraction clamped to [0.1, 0.25].
    #[arg(long)]
    beta: Option<f64>,
    /// Number of runs; run r uses seed `seed + r`.
    #[arg(long, default_value_t = 1)]
    runs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long)]
    normalize: bool,
    /// Use a saved discrepancy model instead of fitting one.
    #[arg(long, conflicts_with = "beta")]
    model: Option<PathBuf>,
    /// Save the fitted discrepancy model as TOML.
    #[arg(long)]
    save_model: Option<PathBuf>,
    /// Directory for membership.csv and trace.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Labelled training CSV.
    #[arg(long)]
    train: PathBuf,
    /// Test CSV; if it has the label column, accuracy is reported.
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "last")]
    label_column: String,
    /// Label column of the test file (`none` if it is unlabelled).
    #[arg(long)]
    test_label_column: Option<String>,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long)]
    beta: Option<f64>,
    /// Seed for breaking tied votes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Compare with plain Euclidean distance; both files must be complete.
    #[arg(long)]
    euclidean: bool,
    #[arg(long, conflicts_with = "beta")]
    model: Option<PathBuf>,
    #[arg(long)]
    save_model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_table(parsed: &ParsedCsv, table: &ObservedTable, out: &Path) -> Result<()> {
    let labels = parsed
        .labels
        .as_ref()
        .map(|(name, l)| (name.as_str(), l.as_slice()));
    let mut w = create(out)?;
    table.write_csv(&mut w, labels)?;
    w.flush()?;
    Ok(())
}

fn model_for(
    table: &ObservedTable,
    beta: Option<f64>,
    saved: Option<&Path>,
) -> Result<DiscrepancyModel> {
    let model = match saved {
        Some(path) => DiscrepancyModel::load(path)?,
        None => DiscrepancyModel::fit(table, beta.unwrap_or_else(|| default_beta(table)))?,
    };
    if model.dim() != table.m() {
        bail!(
            "model has {} attributes, data has {}",
            model.dim(),
            table.m()
        );
    }
    Ok(model)
}

fn experiment(config: &Path, output_dir: Option<PathBuf>, workers: Option<usize>) -> Result<()> {
    let mut config = ExperimentConfig::load(config)?;
    if let Some(dir) = output_dir {
        config.output_dir = dir;
    }
    if let Some(w) = workers {
        config.workers = w;
    }
    let report = run_experiment(&config)?;
    emit_report(&report, &config.output_dir)?;
    for row in &report.aggregates {
        println!(
            "{:<16} {:<6} {:<5} {:<26} {}{}",
            row.dataset,
            row.mechanism,
            row.fraction,
            row.method,
            row.cell(),
            if row.best { " *" } else { "" }
        );
    }
    eprintln!(
        "{} records written to {}",
        report.records.len(),
        config.output_dir.display()
    );
    Ok(())
}

fn simulate_cmd(args: &SimulateArgs) -> Result<()> {
    let parsed = args.input.load()?;
    let table = if args.normalize {
        zscore_normalize(&parsed.table)
    } else {
        parsed.table.clone()
    };
    let spec = MissingnessSpec {
        quantile: args.quantile,
        mar_determinant_fraction: args.determinant_fraction,
        ..MissingnessSpec::new(args.mechanism, args.fraction, args.seed)
    };
    let masked = simulate(&table, &spec)?;
    write_table(&parsed, &masked, &args.out)?;
    eprintln!(
        "masked {} of {} cells ({:.4})",
        masked.missing_count(),
        masked.n() * masked.m(),
        masked.missing_fraction()
    );
    Ok(())
}

fn impute_cmd(args: &ImputeArgs) -> Result<()> {
    let parsed = args.input.load()?;
    let imputer = match args.method {
        FillMethod::Zero => Imputer::Zero,
        FillMethod::Mean => Imputer::Mean,
        FillMethod::Knn => Imputer::Knn(args.k),
    };
    let filled = imputer.apply(&parsed.table)?;
    write_table(&parsed, &filled, &args.out)
}

fn cluster_cmd(args: &ClusterArgs) -> Result<()> {
    let parsed = args.input.load()?;
    let table = if args.normalize {
        zscore_normalize(&parsed.table)
    } else {
        parsed.table.clone()
    };
    let labels = parsed.labels.as_ref().map(|(_, l)| l.as_slice());
    let k = match (args.k, labels) {
        (Some(k), _) => k,
        (None, Some(l)) => {
            let mut classes = l.to_vec();
            classes.sort_unstable();
            classes.dedup();
            classes.len()
        }
        (None, None) => bail!("--k is required when the input has no label column"),
    };

    let model = if args.algo == Algo::KmeansEuclid {
        if !table.is_complete() {
            bail!("kmeans-euclid needs complete data; run `lacuna impute` first");
        }
        None
    } else {
        Some(model_for(&table, args.beta, args.model.as_deref())?)
    };
    if let (Some(m), Some(path)) = (&model, &args.save_model) {
        m.save(path)?;
    }

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let mut memberships = Vec::new();
    let mut trace = create(&args.out_dir.join("trace.csv"))?;
    writeln!(trace, "run,seed,iteration,objective")?;
    for run in 0..args.runs {
        let seed = args.seed + run;
        let state = match (&model, args.algo) {
            (Some(m), Algo::KmppAwpd) => {
                cluster(&table, k, m, Seeding::KMeansPlusPlus, args.max_iter, seed)?
            }
            (Some(m), _) => cluster(
                &table,
                k,
                m,
                Seeding::Scalable(ScalableParams::for_k(k)),
                args.max_iter,
                seed,
            )?,
            (None, _) => cluster(
                &table,
                k,
                &Euclidean,
                Seeding::KMeansPlusPlus,
                args.max_iter,
                seed,
            )?,
        };
        for (t, f) in state.objective_trace().iter().enumerate() {
            writeln!(trace, "{run},{seed},{},{f}", t + 1)?;
        }
        let score = labels
            .map(|l| clustering_accuracy(state.membership(), l))
            .transpose()?;
        match score {
            Some(a) => println!(
                "run {run} (seed {seed}): {} iterations, accuracy {a:.4}",
                state.iteration()
            ),
            None => println!("run {run} (seed {seed}): {} iterations", state.iteration()),
        }
        memberships.push(state.membership().to_vec());
    }
    trace.flush()?;

    let mut w = create(&args.out_dir.join("membership.csv"))?;
    let header: Vec<String> = (0..args.runs).map(|r| format!("run{r}")).collect();
    writeln!(w, "row,{}", header.join(","))?;
    for i in 0..table.n() {
        let row: Vec<String> = memberships.iter().map(|m| m[i].to_string()).collect();
        writeln!(w, "{i},{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn classify_cmd(args: &ClassifyArgs) -> Result<()> {
    let train = load(&args.train, &args.label_column)?;
    let test_label = args
        .test_label_column
        .as_deref()
        .unwrap_or(&args.label_column);
    let test = load(&args.test, test_label)?;
    let (label_name, train_labels) = train
        .labels
        .clone()
        .context("the training file needs a label column")?;
    let train_set =
        lacuna::LabeledDataset::with_label_name(train.table.clone(), train_labels, label_name)?;

    let pred = if args.euclidean {
        if !train.table.is_complete() || !test.table.is_complete() {
            bail!("--euclidean needs complete data; run `lacuna impute` first");
        }
        knn_predict(&train_set, &test.table, args.k, &Euclidean, args.seed)?
    } else {
        // The model sees every row, labelled or not.
        let all = train.table.vstack(&test.table)?;
        let model = model_for(&all, args.beta, args.model.as_deref())?;
        if let Some(path) = &args.save_model {
            model.save(path)?;
        }
        knn_predict(&train_set, &test.table, args.k, &model, args.seed)?
    };

    let truth = test.labels.as_ref().map(|(_, l)| l.as_slice());
    let mut w = create(&args.out)?;
    match truth {
        Some(t) => {
            writeln!(w, "row,predicted,actual")?;
            for (i, (p, a)) in pred.iter().zip(t).enumerate() {
                writeln!(w, "{i},{p},{a}")?;
            }
            println!("accuracy {:.4}", classification_accuracy(&pred, t)?);
        }
        None => {
            writeln!(w, "row,predicted")?;
            for (i, p) in pred.iter().enumerate() {
                writeln!(w, "{i},{p}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn report_cmd(records: &Path, out_dir: &Path) -> Result<()> {
    let records = read_records_csv(records)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let rows = aggregate_runs(&records)?;
    for path in write_aggregate_tables(&rows, out_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Experiment {
            config,
            output_dir,
            workers,
        } => experiment(&config, output_dir, workers),
        Command::Simulate(args) => simulate_cmd(&args),
        Command::Impute(args) => impute_cmd(&args),
        Command::Cluster(args) => cluster_cmd(&args),
        Command::Classify(args) => classify_cmd(&args),
        Command::Report { records, out_dir } => report_cmd(&records, &out_dir),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
