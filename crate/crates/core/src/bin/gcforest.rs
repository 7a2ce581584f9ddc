use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gcforest::bench::{BenchSettings, Suite};
use gcforest::commands::{cmd_benchmark, cmd_evaluate, cmd_predict, cmd_train};

#[derive(Parser)]
#[command(name = "gcforest", version, about = "Deep forest training and evaluation")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "GCFOREST_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a TOML run config.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write predicted labels and class vectors for a CSV file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "class")]
        label_column: String,
    },
    /// Accuracy and confusion matrix on a labelled CSV file.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value = "class")]
        label_column: String,
        /// Also write the report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a comparison suite: uci-lowdim, scanning-ablation, cv-mode-compare.
    Benchmark {
        #[arg(long)]
        suite: Suite,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        /// Number of seeds; runs use seeds 0..N.
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
        #[arg(long, default_value_t = 500)]
        level_trees: usize,
        #[arg(long, default_value_t = 500)]
        scan_trees: usize,
        #[arg(long, default_value_t = 2000)]
        rf_trees: usize,
        /// Comma-separated subset of letter,adult,yeast.
        #[arg(long, value_delimiter = ',')]
        datasets: Option<Vec<String>>,
        /// Also write the results as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Train { config } => {
            let out = cmd_train(config)?;
            print!("{}", out.report);
            if let Some(t) = &out.test_report {
                print!("{t}");
            }
            println!("model: {}", out.model_path.display());
            println!("probe: {}", out.probe_path.display());
        }
        Command::Predict {
            model,
            input,
            output,
            label_column,
        } => {
            let n = cmd_predict(model, input, &output, &label_column)?;
            println!("wrote {n} predictions to {}", output.display());
        }
        Command::Evaluate {
            model,
            test,
            label_column,
            report,
        } => {
            let r = cmd_evaluate(model, test, &label_column)?;
            print!("{r}");
            if let Some(path) = report {
                r.write_json(path)?;
            }
        }
        Command::Benchmark {
            suite,
            data_dir,
            seeds,
            level_trees,
            scan_trees,
            rf_trees,
            datasets,
            json,
        } => {
            let mut settings = BenchSettings {
                data_dir,
                seeds: (0..seeds).collect(),
                level_trees,
                scan_trees,
                rf_trees,
                ..BenchSettings::default()
            };
            if let Some(d) = datasets {
                settings.datasets = d;
            }
            let r = cmd_benchmark(suite, &settings)?;
            print!("{r}");
            if let Some(path) = json {
                std::fs::write(&path, serde_json::to_string_pretty(&r)? + "\n")?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
