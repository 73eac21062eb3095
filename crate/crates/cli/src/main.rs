use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use opf_activeset::config::RunConfig;
use opf_activeset::error::Failure;
use opf_activeset::pipeline;

/// Learn DC-OPF active sets from load-uncertainty samples.
#[derive(Parser)]
#[command(name = "opf-activeset", version = pipeline_version(), about)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags below override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for sample generation and sweeps.
    #[arg(long, global = true, env = "OPF_ACTIVESET_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true)]
    case: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    sigma_frac: Option<f64>,
    #[arg(long, global = true)]
    n_samples: Option<usize>,
    #[arg(long, global = true)]
    train_fraction: Option<f64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Comma-separated K values, e.g. `1,2,3`.
    #[arg(long, global = true, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample ω, solve the DC-OPF per draw and write the labelled dataset.
    Generate {
        /// Dataset path (default: <output_dir>/dataset.csv).
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Train the classifier on the training split of a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Model path (default: <output_dir>/model.json).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Fail when the training split holds a single class.
        #[arg(long)]
        strict: bool,
    },
    /// Score a trained model on the test split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Solve the LP directly when no predicted set is feasible.
        #[arg(long)]
        fallback_lp: bool,
    },
    /// Learning curve over training sizes and accuracy over depths.
    Sweep {
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated training-set sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Comma-separated hidden-layer counts.
        #[arg(long, value_delimiter = ',')]
        depths: Option<Vec<usize>>,
    },
    /// Case inventory, fixed-status and frequency tables for a dataset.
    Report {
        #[arg(long)]
        dataset: PathBuf,
    },
}

const fn pipeline_version() -> &'static str {
    match option_env!("OPF_ACTIVESET_GIT_DESCRIBE") {
        Some(v) => v,
        None => env!("CARGO_PKG_VERSION"),
    }
}

fn resolve_config(c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &c.case {
        cfg.case_path = v.clone();
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.sigma_frac {
        cfg.sigma_frac = v;
    }
    if let Some(v) = c.n_samples {
        cfg.n_samples = v;
        cfg.stopping.max_samples = cfg.stopping.max_samples.max(v);
    }
    if let Some(v) = c.train_fraction {
        cfg.train_fraction = v;
    }
    if let Some(v) = c.epochs {
        cfg.nn.epochs = v;
    }
    if let Some(v) = &c.k {
        cfg.eval.k_list = v.clone();
    }
    if let Some(v) = &c.output_dir {
        cfg.output_dir = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = resolve_config(&cli.common)?;
    let pool = pipeline::thread_pool(cli.common.threads)?;
    match cli.command {
        Command::Generate { dataset } => {
            pipeline::cmd_generate(&cfg, dataset.as_deref(), &pool)?;
        }
        Command::Train { dataset, model, strict } => {
            pipeline::cmd_train(&cfg, &dataset, model.as_deref(), strict)?;
        }
        Command::Evaluate { model, dataset, fallback_lp } => {
            pipeline::cmd_evaluate(&cfg, &model, &dataset, fallback_lp)?;
        }
        Command::Sweep { dataset, sizes, depths } => {
            if let Some(s) = sizes {
                cfg.sweep.sizes = s;
            }
            if let Some(d) = depths {
                cfg.sweep.depths = d;
            }
            pipeline::cmd_sweep(&cfg, &dataset, &pool)?;
        }
        Command::Report { dataset } => pipeline::cmd_report(&cfg, &dataset)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
