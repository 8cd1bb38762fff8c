//! Command-line front end: training runs, evaluation, bounds, demos and
//! activation reparametrization.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bounds::bound_chain;
use crate::dataset::{load_csv, split_dataset, Dataset, LabelSpec, SplitSpec};
use crate::error::{Error, Result};
use crate::expressiveness::{
    build_product_approximator, build_square_approximator, product_certificate, product_resolution,
    square_certificate,
};
use crate::model::{count_nonzero_parameters, mse, reparametrize_activation, ActivationParams, BannModel};
use crate::regress::LassoConfig;
use crate::train::{build_network, HyperplaneSolver, IterationRecord, LayerSummary, TrainConfig, TrainReport};

pub const EXIT_DATA: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_ABORT: i32 = 4;

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Data(_) | Error::Shape { .. } | Error::Io(_) | Error::Json(_) | Error::UnknownVersion(_) => {
            EXIT_DATA
        }
        Error::Config(_) | Error::InvalidArgument(_) => EXIT_CONFIG,
        Error::ZeroWeights | Error::Solver(_) | Error::TrainingAborted(_) => EXIT_ABORT,
    }
}

#[derive(Debug, Parser)]
#[command(name = "bgn", version, about = "Greedy binary-activated network builder")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a CSV dataset, train a network and write its artifacts.
    Train(TrainArgs),
    /// Report the MSE of a model on a dataset.
    Evaluate(EvaluateArgs),
    /// Region counts and regression lower bounds after every hidden layer.
    Bounds(EvaluateArgs),
    /// Build an explicit approximator and certify its error on a grid.
    #[command(subcommand)]
    Demo(DemoCommand),
    /// Rewrite a model for another activation with identical outputs.
    Reparam(ReparamArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Lasso,
    LeastSquares,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run from a manifest written by an earlier run; other flags are ignored.
    #[arg(long, conflicts_with = "data")]
    pub manifest: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    pub data: Option<PathBuf>,
    /// Label columns: a trailing count (`1`) or comma-separated names.
    #[arg(long, default_value = "1")]
    pub labels: String,
    #[arg(long, default_value_t = 0.25)]
    pub test_frac: f64,
    #[arg(long, default_value_t = 0.2)]
    pub val_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub max_layers: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_neurons: usize,
    #[arg(long, default_value_t = 10)]
    pub replace_cap: usize,
    #[arg(long, default_value_t = 20)]
    pub patience: usize,
    #[arg(long, default_value_t = 1e5)]
    pub lambda0: f64,
    #[arg(long, default_value_t = 0.0)]
    pub min_layer_gain: f64,
    #[arg(long, value_enum, default_value = "lasso")]
    pub solver: SolverArg,
    /// Also write the train/val/test splits as CSV.
    #[arg(long)]
    pub save_splits: bool,
    #[arg(long, required_unless_present = "manifest")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Label columns; defaults to the model's output width, trailing.
    #[arg(long)]
    pub labels: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum DemoCommand {
    /// Width-r network for x² on [0, 1].
    Square {
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 100_000)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Network for xy on [-m, m]².
    Product {
        #[arg(long)]
        m: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 300)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ReparamArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub t: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub h1: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub h2: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Everything needed to repeat a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub data: PathBuf,
    pub labels: String,
    pub split: SplitSpec,
    pub config: TrainConfig,
    pub out: PathBuf,
    pub outputs: Outputs,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub model: String,
    pub report: String,
    pub summary: String,
    pub manifest: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            model: "model.json".into(),
            report: "report.csv".into(),
            summary: "summary.json".into(),
            manifest: "manifest.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub architecture: Vec<usize>,
    pub hidden_layers: usize,
    pub width: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
    pub test_mse: f64,
    pub nonzero_parameters: usize,
    pub iterations: usize,
    pub layers: Vec<LayerSummary>,
}

impl TrainArgs {
    fn manifest(&self) -> Result<RunManifest> {
        if let Some(path) = &self.manifest {
            let text = fs::read_to_string(path)?;
            return Ok(serde_json::from_str(&text)?);
        }
        let solver = match self.solver {
            SolverArg::Lasso => HyperplaneSolver::Lasso,
            SolverArg::LeastSquares => HyperplaneSolver::LeastSquares,
        };
        Ok(RunManifest {
            data: self.data.clone().expect("clap requires --data"),
            labels: self.labels.clone(),
            split: SplitSpec {
                test_fraction: self.test_frac,
                val_fraction: self.val_frac,
                seed: self.seed,
            },
            config: TrainConfig {
                max_neurons_per_layer: self.max_neurons,
                max_hidden_layers: self.max_layers,
                replace_cap: self.replace_cap,
                patience: self.patience,
                lasso: LassoConfig {
                    lambda0: self.lambda0,
                    ..LassoConfig::default()
                },
                solver,
                val_fraction: self.val_frac,
                seed: self.seed,
                min_layer_gain: self.min_layer_gain,
            },
            out: self.out.clone().expect("clap requires --out"),
            outputs: Outputs::default(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?
        .to_os_string();
    name.push(".tmp");
    let tmp = path.with_file_name(name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// CSV of the iteration log. The first seven columns are the stable core.
pub fn report_csv(records: &[IterationRecord]) -> String {
    let mut out = String::from(
        "layer,t,train_mse,val_mse,drop,lambda,nnz,predicted_drop,cd_drop,replacements,side_sum_error\n",
    );
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.layer,
            r.t,
            r.train_mse,
            opt(r.val_mse),
            r.drop,
            r.lambda,
            r.nnz,
            r.predicted_drop,
            r.cd_drop,
            r.replacements,
            r.side_sum_error
        ));
    }
    out
}

fn dataset_csv(data: &Dataset) -> Result<Vec<u8>> {
    let features = data
        .feature_names
        .clone()
        .unwrap_or_else(|| (1..=data.input_dim()).map(|i| format!("x{i}")).collect());
    let labels = data
        .label_names
        .clone()
        .unwrap_or_else(|| (1..=data.output_dim()).map(|i| format!("y{i}")).collect());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(features.iter().chain(labels.iter()))
        .map_err(|e| Error::Data(e.to_string()))?;
    for (x, y) in data.features.outer_iter().zip(data.labels.outer_iter()) {
        w.write_record(x.iter().chain(y.iter()).map(|v| v.to_string()))
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Data(e.to_string()))
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Loads, splits, trains and writes model, report, summary and manifest.
pub fn run_train(manifest: &RunManifest, save_splits: bool) -> Result<(BannModel, TrainReport, Summary)> {
    let spec: LabelSpec = manifest.labels.parse()?;
    let data = load_csv(&manifest.data, &spec)?;
    let split = split_dataset(&data, &manifest.split)?;
    let (model, report) = build_network(&split.train, Some(&split.val), &manifest.config)?;
    let summary = Summary {
        architecture: report.architecture.clone(),
        hidden_layers: report.hidden_layers(),
        width: report.width(),
        train_mse: report.final_train_mse,
        val_mse: report.final_val_mse,
        test_mse: mse(&model, &split.test)?,
        nonzero_parameters: report.nonzero_parameters,
        iterations: report.records.len(),
        layers: report.layers.clone(),
    };

    let out = &manifest.out;
    fs::create_dir_all(out)?;
    let o = &manifest.outputs;
    write_atomic(&out.join(&o.model), model.to_json()?.as_bytes())?;
    write_atomic(&out.join(&o.report), report_csv(&report.records).as_bytes())?;
    write_atomic(&out.join(&o.summary), &json_bytes(&summary)?)?;
    write_atomic(&out.join(&o.manifest), &json_bytes(manifest)?)?;
    if save_splits {
        for (name, part) in [("train.csv", &split.train), ("val.csv", &split.val), ("test.csv", &split.test)] {
            write_atomic(&out.join(name), &dataset_csv(part)?)?;
        }
    }
    Ok((model, report, summary))
}

fn load_model(path: &Path) -> Result<BannModel> {
    BannModel::from_json(&fs::read_to_string(path)?)
}

fn load_for_model(model: &BannModel, args: &EvaluateArgs) -> Result<Dataset> {
    let spec = match &args.labels {
        Some(s) => s.parse()?,
        None => LabelSpec::Trailing(model.output_dim()),
    };
    let data = load_csv(&args.data, &spec)?;
    if data.input_dim() != model.input_dim() || data.output_dim() != model.output_dim() {
        return Err(Error::Data(format!(
            "dataset has {} features and {} labels, model expects {} and {}",
            data.input_dim(),
            data.output_dim(),
            model.input_dim(),
            model.output_dim()
        )));
    }
    Ok(data)
}

/// Runs a parsed command, writing human-readable output to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let manifest = args.manifest()?;
            let (_, _, s) = run_train(&manifest, args.save_splits)?;
            writeln!(out, "architecture {:?}", s.architecture)?;
            writeln!(out, "hidden_layers {} width {}", s.hidden_layers, s.width)?;
            writeln!(out, "train_mse {}", s.train_mse)?;
            writeln!(out, "val_mse {}", opt(s.val_mse))?;
            writeln!(out, "test_mse {}", s.test_mse)?;
            writeln!(out, "nonzero_parameters {}", s.nonzero_parameters)?;
            writeln!(out, "wrote {}", manifest.out.display())?;
        }
        Command::Evaluate(args) => {
            let model = load_model(&args.model)?;
            let data = load_for_model(&model, &args)?;
            let pred = model.predict(data.features.view())?;
            writeln!(out, "examples {}", data.len())?;
            writeln!(out, "mse {}", mse(&model, &data)?)?;
            for j in 0..data.output_dim() {
                let e: f64 = pred
                    .column(j)
                    .iter()
                    .zip(data.labels.column(j).iter())
                    .map(|(p, y)| (p - y) * (p - y))
                    .sum::<f64>()
                    / data.len() as f64;
                writeln!(out, "mse[{j}] {e}")?;
            }
            for b in bound_chain(&model, &data)? {
                writeln!(out, "regions[{}] {}", b.depth, b.regions)?;
            }
            writeln!(out, "nonzero_parameters {}", count_nonzero_parameters(&model, 0.0))?;
        }
        Command::Bounds(args) => {
            let model = load_model(&args.model)?;
            let data = load_for_model(&model, &args)?;
            writeln!(out, "k,regions,bound")?;
            for b in bound_chain(&model, &data)? {
                writeln!(out, "{},{},{}", b.depth, b.regions, b.bound)?;
            }
        }
        Command::Demo(DemoCommand::Square { r, grid, out: path }) => {
            let model = build_square_approximator(r)?;
            let cert = square_certificate(&model, r, grid)?;
            if let Some(p) = path {
                write_atomic(&p, model.to_json()?.as_bytes())?;
            }
            writeln!(
                out,
                "square r={r} width={} bound={} max_error={} grid={} holds={}",
                model.hidden[0].outputs(),
                cert.bound,
                cert.max_error,
                cert.grid_points,
                cert.holds()
            )?;
        }
        Command::Demo(DemoCommand::Product { m, delta, grid, out: path }) => {
            let model = build_product_approximator(m, delta)?;
            let cert = product_certificate(&model, m, delta, grid)?;
            if let Some(p) = path {
                write_atomic(&p, model.to_json()?.as_bytes())?;
            }
            writeln!(
                out,
                "product m={m} delta={delta} r={} width={} bound={} max_error={} grid={} holds={}",
                product_resolution(delta),
                model.hidden[0].outputs(),
                cert.bound,
                cert.max_error,
                cert.grid_points,
                cert.holds()
            )?;
        }
        Command::Reparam(args) => {
            let model = load_model(&args.model)?;
            let target = ActivationParams::new(args.t, args.h1, args.h2)?;
            let converted = reparametrize_activation(&model, target)?;
            write_atomic(&args.out, converted.to_json()?.as_bytes())?;
            writeln!(out, "wrote {}", args.out.display())?;
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
