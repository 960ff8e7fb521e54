//! Command-line options, the optional config file, and their merge into
//! fully resolved [`Settings`].

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use srlssvm::solver::Anneal;
use srlssvm::{KernelSpec, SolverConfig, Task};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "srlssvm",
    version,
    about = "Sparse robust least-squares SVM training and benchmarking"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Train,
    Predict,
    Eval,
    Gridsearch,
    Bench,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it with its training report.
    Train(Opts),
    /// Predict with a saved model.
    Predict(Opts),
    /// Score a saved model on a labeled dataset.
    Eval(Opts),
    /// k-fold cross-validated grid search over sigma, mlambda and tau.
    Gridsearch(Opts),
    /// Repeated outlier-injection trials comparing methods.
    Bench(Opts),
}

impl Command {
    pub fn split(self) -> (CommandKind, Opts) {
        match self {
            Command::Train(o) => (CommandKind::Train, o),
            Command::Predict(o) => (CommandKind::Predict, o),
            Command::Eval(o) => (CommandKind::Eval, o),
            Command::Gridsearch(o) => (CommandKind::Gridsearch, o),
            Command::Bench(o) => (CommandKind::Bench, o),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskArg {
    Class,
    Reg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelArg {
    Gaussian,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Srlssvm,
    Lssvm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Srlssvm => "srlssvm",
            Method::Lssvm => "lssvm",
        }
    }
}

/// Flags shared by every subcommand; each is optional so that a config file
/// can supply it instead.
#[derive(Debug, Default, Clone, Args)]
pub struct Opts {
    /// TOML config file (JSON if the name ends in .json); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sparse text dataset, or `synthetic`.
    #[arg(long)]
    pub data: Option<String>,
    /// Held-out sparse text dataset.
    #[arg(long)]
    pub test: Option<String>,
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    /// Gaussian kernel parameter; comma list for gridsearch.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Vec<f64>,
    /// Regularization mλ; comma list for gridsearch.
    #[arg(long, value_delimiter = ',')]
    pub mlambda: Vec<f64>,
    /// Truncation level; comma list for gridsearch.
    #[arg(long, value_delimiter = ',')]
    pub tau: Vec<f64>,
    /// Entropy smoothing parameter.
    #[arg(long)]
    pub p: Option<f64>,
    /// Stop threshold on the γ change.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Number of landmarks r.
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Enables τ annealing with this reduction factor.
    #[arg(long)]
    pub anneal_delta: Option<f64>,
    #[arg(long)]
    pub tau_min: Option<f64>,
    /// Net fraction of injected outliers (bench).
    #[arg(long)]
    pub outlier_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Report, prediction or table output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Model file written by train, read by predict and eval.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Methods compared by bench.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Vec<Method>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    data: Option<String>,
    test: Option<String>,
    task: Option<TaskArg>,
    kernel: Option<KernelArg>,
    sigma: Option<OneOrMany<f64>>,
    mlambda: Option<OneOrMany<f64>>,
    tau: Option<OneOrMany<f64>>,
    p: Option<f64>,
    epsilon: Option<f64>,
    rank: Option<usize>,
    max_iter: Option<usize>,
    anneal_delta: Option<f64>,
    tau_min: Option<f64>,
    outlier_rate: Option<f64>,
    seed: Option<u64>,
    repeats: Option<usize>,
    folds: Option<usize>,
    out: Option<PathBuf>,
    format: Option<Format>,
    model: Option<PathBuf>,
    methods: Option<OneOrMany<Method>>,
}

fn read_file_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |msg: String| CliError::Usage(format!("config file {}: {msg}", path.display()));
    let mut cfg: FileConfig = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| bad(e.to_string()))?
    };
    let base = path.parent().unwrap_or(Path::new(""));
    let rebase = |p: &str| {
        if p == SYNTHETIC || Path::new(p).is_absolute() {
            p.to_string()
        } else {
            base.join(p).to_string_lossy().into_owned()
        }
    };
    cfg.data = cfg.data.as_deref().map(rebase);
    cfg.test = cfg.test.as_deref().map(rebase);
    for p in [&mut cfg.out, &mut cfg.model].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

/// Dataset keyword selecting the built-in generators.
pub const SYNTHETIC: &str = "synthetic";

pub const DEFAULT_SIGMA: f64 = 1.0;
pub const DEFAULT_MLAMBDA: f64 = 1e-2;
pub const DEFAULT_TAU: f64 = 1.5;
pub const DEFAULT_RANK: usize = 50;
pub const DEFAULT_REPEATS: usize = 10;
pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_BENCH_OUTLIER_RATE: f64 = 0.1;

/// Fully merged run configuration.
#[derive(Debug, Clone)]
pub struct Settings {
    pub command: CommandKind,
    pub data: Option<String>,
    pub test: Option<String>,
    pub task: Task,
    pub linear: bool,
    pub sigmas: Vec<f64>,
    pub mlambdas: Vec<f64>,
    pub taus: Vec<f64>,
    pub p: f64,
    pub epsilon: f64,
    pub rank: usize,
    pub max_iter: usize,
    pub anneal: Option<Anneal>,
    pub outlier_rate: f64,
    pub seed: u64,
    pub repeats: usize,
    pub folds: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub model: Option<PathBuf>,
    pub methods: Vec<Method>,
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn pick_list<T>(flag: Vec<T>, file: Option<OneOrMany<T>>, default: T) -> Vec<T> {
    if !flag.is_empty() {
        flag
    } else {
        file.map_or_else(|| vec![default], OneOrMany::into_vec)
    }
}

impl Settings {
    /// Merges flags over the config file (if any) over defaults.
    pub fn resolve(command: CommandKind, opts: Opts) -> Result<Settings, CliError> {
        let file = match &opts.config {
            Some(path) => read_file_config(path)?,
            None => FileConfig::default(),
        };
        let task = match pick(opts.task, file.task, TaskArg::Class) {
            TaskArg::Class => Task::Classification,
            TaskArg::Reg => Task::Regression,
        };
        let anneal = match (opts.anneal_delta.or(file.anneal_delta), opts.tau_min.or(file.tau_min)) {
            (Some(delta), Some(tau_min)) => Some(Anneal { delta, tau_min }),
            (None, None) => None,
            _ => {
                return Err(CliError::Usage(
                    "--anneal-delta and --tau-min must be given together".into(),
                ))
            }
        };
        let default_rate = if command == CommandKind::Bench {
            DEFAULT_BENCH_OUTLIER_RATE
        } else {
            0.0
        };
        let mut methods = if !opts.methods.is_empty() {
            opts.methods
        } else {
            file.methods
                .map_or_else(|| vec![Method::Srlssvm, Method::Lssvm], OneOrMany::into_vec)
        };
        methods.sort_unstable();
        methods.dedup();
        let settings = Settings {
            command,
            data: opts.data.or(file.data),
            test: opts.test.or(file.test),
            task,
            linear: pick(opts.kernel, file.kernel, KernelArg::Gaussian) == KernelArg::Linear,
            sigmas: pick_list(opts.sigma, file.sigma, DEFAULT_SIGMA),
            mlambdas: pick_list(opts.mlambda, file.mlambda, DEFAULT_MLAMBDA),
            taus: pick_list(opts.tau, file.tau, DEFAULT_TAU),
            p: pick(opts.p, file.p, srlssvm::losses::DEFAULT_SMOOTHING),
            epsilon: pick(opts.epsilon, file.epsilon, srlssvm::solver::DEFAULT_EPSILON),
            rank: pick(opts.rank, file.rank, DEFAULT_RANK),
            max_iter: pick(opts.max_iter, file.max_iter, srlssvm::solver::DEFAULT_MAX_ITER),
            anneal,
            outlier_rate: pick(opts.outlier_rate, file.outlier_rate, default_rate),
            seed: pick(opts.seed, file.seed, 0),
            repeats: pick(opts.repeats, file.repeats, DEFAULT_REPEATS),
            folds: pick(opts.folds, file.folds, DEFAULT_FOLDS),
            out: opts.out.or(file.out),
            format: pick(opts.format, file.format, Format::Json),
            model: opts.model.or(file.model),
            methods,
        };
        settings.validate()?;
        Ok(settings)
    }

    fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        for (name, grid) in [
            ("sigma", &self.sigmas),
            ("mlambda", &self.mlambdas),
            ("tau", &self.taus),
        ] {
            if grid.is_empty() {
                return usage(format!("the {name} grid is empty"));
            }
            if self.command != CommandKind::Gridsearch && grid.len() > 1 {
                return usage(format!("--{name} takes a single value outside gridsearch"));
            }
        }
        if self.repeats == 0 {
            return usage("--repeats must be at least 1".into());
        }
        if self.folds < 2 {
            return usage("--folds must be at least 2".into());
        }
        if self.methods.is_empty() {
            return usage("--methods is empty".into());
        }
        let max_rate = if self.task == Task::Classification {
            1.0 / 3.0
        } else {
            1.0
        };
        if !(0.0..=max_rate).contains(&self.outlier_rate) {
            return usage(format!(
                "--outlier-rate must lie in [0, {max_rate:.4}] for {} data",
                self.task
            ));
        }
        Ok(())
    }

    pub fn kernel(&self, sigma: f64) -> Result<KernelSpec, CliError> {
        if self.linear {
            Ok(KernelSpec::Linear)
        } else {
            Ok(KernelSpec::gaussian(sigma)?)
        }
    }

    pub fn solver(&self, mlambda: f64, tau: f64) -> SolverConfig {
        SolverConfig {
            p: self.p,
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            anneal: self.anneal,
            ..SolverConfig::new(mlambda, tau, self.rank)
        }
    }

    /// The single `(σ, mλ, τ)` of a non-grid run.
    pub fn single(&self) -> (f64, f64, f64) {
        (self.sigmas[0], self.mlambdas[0], self.taus[0])
    }

    pub fn data_arg(&self) -> Result<&str, CliError> {
        self.data
            .as_deref()
            .ok_or_else(|| CliError::Usage("--data is required".into()))
    }

    pub fn model_arg(&self) -> Result<&Path, CliError> {
        self.model
            .as_deref()
            .ok_or_else(|| CliError::Usage("--model is required".into()))
    }
}
