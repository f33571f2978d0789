use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spca_core::classify::{KernelKind, KernelSpec};
use spca_core::cli::{
    emit_table, prepare, render_table, run_grid, run_prepared, ClassifierKind, DataSource, PipelineMethod, RunConfig,
    SyntheticSpec, TableOptions,
};
use spca_core::datamat::write_dataset;
use spca_core::prox::Step;
use spca_core::Error;

#[derive(Parser)]
#[command(name = "spca-bench", version, about = "Sparse PCA face-recognition benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single configuration and emit one row.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "none")]
        method: String,
        #[arg(long, default_value_t = 10)]
        d: usize,
        /// Write the fitted loadings (CSV plus a .flags sidecar).
        #[arg(long)]
        loadings_out: Option<PathBuf>,
    },
    /// Sweep methods (outer) and component counts (inner).
    Grid {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated: none, pca, ista-spca, fista-spca.
        #[arg(long, value_delimiter = ',', default_value = "none,pca,ista-spca,fista-spca")]
        methods: Vec<String>,
        #[arg(long = "d-list", value_delimiter = ',', default_value = "200,300,400,500,600")]
        d_list: Vec<usize>,
        /// Run grid cells concurrently (rows are marked; timings perturbed).
        #[arg(long)]
        parallel: bool,
    },
    /// Write a synthetic train/test split as CSV + label files.
    Synth {
        #[command(flatten)]
        synth: SynthArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args, Clone)]
struct SynthArgs {
    #[arg(long, default_value_t = 15)]
    classes: usize,
    #[arg(long, default_value_t = 8)]
    per_class: usize,
    #[arg(long, default_value_t = 3)]
    test_per_class: usize,
    #[arg(long, default_value_t = 1024)]
    dims: usize,
    #[arg(long, default_value_t = 10.0)]
    separation: f64,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    train_labels: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    test_labels: Option<PathBuf>,
    /// Use generated data instead of files.
    #[arg(long)]
    synthetic: bool,
    #[command(flatten)]
    synth: SynthArgs,
    #[arg(long)]
    lambda: Option<f64>,
    /// Gradient step size, or `auto` for 1/(2 λ_max(DᵀD)).
    #[arg(long, default_value = "auto")]
    step: String,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    #[arg(long, default_value = "nn")]
    classifier: String,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value = "linear")]
    kernel: String,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale features by the largest absolute training value.
    #[arg(long)]
    scale: bool,
    /// csv or text.
    #[arg(long, default_value = "text")]
    format: String,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write `-` for fit_seconds so the table is byte-reproducible.
    #[arg(long)]
    no_timing: bool,
}

impl SynthArgs {
    fn spec(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            classes: self.classes,
            per_class: self.per_class,
            test_per_class: self.test_per_class,
            dims: self.dims,
            separation: self.separation,
            seed,
        }
    }
}

impl CommonArgs {
    fn source(&self) -> Result<DataSource, Error> {
        if self.synthetic {
            return Ok(DataSource::Synthetic(self.synth.spec(self.seed)));
        }
        match (&self.train, &self.train_labels, &self.test, &self.test_labels) {
            (Some(a), Some(b), Some(c), Some(d)) => Ok(DataSource::Files {
                train: a.clone(),
                train_labels: b.clone(),
                test: c.clone(),
                test_labels: d.clone(),
            }),
            _ => Err(Error::InvalidInput(
                "pass --train, --train-labels, --test and --test-labels, or --synthetic".into(),
            )),
        }
    }

    fn config(&self) -> Result<RunConfig, Error> {
        let step = match self.step.as_str() {
            "auto" => Step::Auto,
            s => Step::Fixed(
                s.parse()
                    .map_err(|_| Error::InvalidInput(format!("--step must be a number or auto, got {s:?}")))?,
            ),
        };
        let kernel = match self.kernel.parse::<KernelKind>()? {
            KernelKind::Linear => KernelSpec::Linear,
            KernelKind::Rbf => KernelSpec::rbf(
                self.sigma
                    .ok_or_else(|| Error::InvalidInput("--kernel rbf needs --sigma".into()))?,
            )?,
        };
        let mut config = RunConfig::new(self.source()?);
        config.lambda = self.lambda;
        config.step = step;
        config.tol = self.tol;
        config.max_iter = self.max_iter;
        config.classifier = self.classifier.parse::<ClassifierKind>()?;
        config.k = self.k;
        config.kernel = kernel;
        config.gamma = self.gamma;
        config.seed = self.seed;
        config.scale = self.scale;
        Ok(config)
    }

    fn table_options(&self) -> Result<TableOptions, Error> {
        Ok(TableOptions {
            format: self.format.parse()?,
            timing: !self.no_timing,
        })
    }
}

fn output(rows: &[spca_core::cli::BenchmarkRow], common: &CommonArgs) -> Result<(), Error> {
    let options = common.table_options()?;
    match &common.out {
        Some(path) => emit_table(rows, options, path),
        None => {
            print!("{}", render_table(rows, options)?);
            Ok(())
        }
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run {
            common,
            method,
            d,
            loadings_out,
        } => {
            let mut config = common.config()?;
            config.method = method.parse::<PipelineMethod>()?;
            config.d = d;
            config.validate().map_err(|e| e.in_stage("config"))?;
            common.table_options()?;
            let data = prepare(&config.data, config.scale).map_err(|e| e.in_stage("load"))?;
            let (row, loadings) = run_prepared(&config, &data)?;
            if let (Some(path), Some(loadings)) = (loadings_out, loadings) {
                loadings.write(path)?;
            }
            output(&[row], &common)
        }
        Command::Grid {
            common,
            methods,
            d_list,
            parallel,
        } => {
            let base = common.config()?;
            let methods = methods
                .iter()
                .map(|m| m.parse::<PipelineMethod>())
                .collect::<Result<Vec<_>, _>>()?;
            common.table_options()?;
            let rows = run_grid(&base, &d_list, &methods, parallel)?;
            for row in rows.iter().filter(|r| r.error.is_some()) {
                log::warn!("{} d={:?}: {}", row.method, row.d, row.error.as_deref().unwrap_or(""));
            }
            output(&rows, &common)
        }
        Command::Synth { synth, seed, out_dir } => {
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::Io {
                path: out_dir.clone(),
                source: e,
            })?;
            let (train, train_labels, test, test_labels) = synth.spec(seed).generate()?;
            write_dataset(&train, &train_labels, out_dir.join("train.csv"), out_dir.join("train_labels.txt"))?;
            write_dataset(&test, &test_labels, out_dir.join("test.csv"), out_dir.join("test_labels.txt"))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
