use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use sevpred::config::{parse_model_list, RunConfig, DEFAULT_SEED, SEED_ENV};
use sevpred::features::{select_variables, DEFAULT_N_TREES};
use sevpred::metrics::{reports_from_csv, reports_to_csv};
use sevpred::report::{render_importance_svg, render_metrics_svg, render_table};
use sevpred::synth::{calibrate_reference, generate, render_stats_table, summarize};
use sevpred::{pipeline, Dataset, ErrorCategory};

#[derive(Parser)]
#[command(name = "sevpred", version, about = "Crash-severity classification toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic crash dataset as CSV.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline described by a TOML config.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `out_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config seed, which overrides SEVPRED_SEED.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated subset of lr, nb, knn, dt, rnn, cnn, cnn_rnn.
        #[arg(long)]
        models: Option<String>,
    },
    /// Rank variables by extra-trees importance and show the selection.
    Importance {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, env = SEED_ENV, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 0.025)]
        threshold: f64,
        /// Variables to drop regardless of score; repeatable.
        #[arg(long = "force-drop")]
        force_drop: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_N_TREES)]
        n_trees: usize,
        /// Also write importance.csv and importance.svg here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a finished run's report.csv.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Print summary statistics of a dataset.
    Stats {
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Svg,
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Dataset::parse_csv(&text)?)
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => Ok(Some(v.trim().parse().map_err(|_| {
            sevpred::Error::Config(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))
        })?)),
        Err(_) => Ok(None),
    }
}

fn cmd_pipeline(config_path: &Path, out: Option<PathBuf>, seed: Option<u64>, models: Option<String>) -> Result<()> {
    let mut config = RunConfig::load(config_path).with_context(|| format!("loading {}", config_path.display()))?;
    config.seed = Some(seed.or(config.seed).or(env_seed()?).unwrap_or(DEFAULT_SEED));
    if let Some(dir) = out {
        config.out_dir = dir;
    }
    if let Some(list) = models {
        config.models = parse_model_list(&list)?;
    }
    let output = pipeline::run(&config)?;
    pipeline::write_outputs(&output, &config.out_dir)?;
    fs::write(config.out_dir.join("config.toml"), config.to_toml_string()?)?;
    print!("{}", render_table(&output.reports())?);
    info!("outputs written to {}", config.out_dir.display());
    Ok(())
}

fn cmd_importance(
    data: &Path,
    seed: u64,
    threshold: f64,
    force_drop: &[String],
    n_trees: usize,
    out: Option<PathBuf>,
) -> Result<()> {
    let (dataset, _) = read_dataset(data)?.clean()?;
    let ranking = pipeline::rank_variables(&dataset, n_trees, seed)?;
    let selected = select_variables(&ranking, threshold, force_drop)?;
    print!("{}", ranking.render_table(&selected));
    if let Some(dir) = out {
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("importance.csv"), ranking.to_csv())?;
        fs::write(dir.join("importance.svg"), render_importance_svg(&ranking, &selected)?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { n, seed, out } => {
            let dataset = generate(&calibrate_reference(), n, seed)?;
            fs::write(&out, dataset.to_csv()).with_context(|| format!("writing {}", out.display()))?;
            info!("wrote {n} rows to {}", out.display());
        }
        Command::Pipeline { config, out, seed, models } => cmd_pipeline(&config, out, seed, models)?,
        Command::Importance { data, seed, threshold, force_drop, n_trees, out } => {
            cmd_importance(&data, seed, threshold, &force_drop, n_trees, out)?
        }
        Command::Report { input, format } => {
            let path = input.join("report.csv");
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let reports = reports_from_csv(&text)?;
            let rendered = match format {
                Format::Text => render_table(&reports)?,
                Format::Csv => reports_to_csv(&reports),
                Format::Svg => render_metrics_svg(&reports)?,
            };
            print!("{rendered}");
        }
        Command::Stats { data } => {
            let (dataset, _) = read_dataset(&data)?.clean()?;
            print!("{}", render_stats_table(&summarize(&dataset)?));
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<sevpred::Error>()).map(|e| e.category()) {
        Some(ErrorCategory::Config) => 1,
        Some(ErrorCategory::Numeric) => 3,
        // I/O failures and anything unclassified count as data errors
        Some(ErrorCategory::Data) | None => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let chain: Vec<String> = err.chain().map(|e| e.to_string()).collect();
            eprintln!("error: {}", chain.join(": "));
            ExitCode::from(exit_code(&err))
        }
    }
}
