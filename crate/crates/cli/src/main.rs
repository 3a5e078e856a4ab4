use std::path::{Path, PathBuf};
use std::process::ExitCode;

use behavior_probe::game_model::GameFamily;
use behavior_probe::pipeline::{
    evaluate, load_report, predict, synth, validate, write_report, PipelineError, PredictScope, RunConfig,
    SynthOptions,
};
use behavior_probe::prompt::{PromptFormat, VariantName};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "behavior-probe", version, about = "Compare base and aligned models at predicting human decisions in strategic games")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Standard,
    Chat,
}

#[derive(Subcommand)]
enum Command {
    /// Check datasets, registry and templates referenced by a config.
    Validate { config: PathBuf },
    /// Fetch next-token distributions and write prediction records.
    Predict {
        config: PathBuf,
        #[arg(long = "family")]
        families: Vec<GameFamily>,
        #[arg(long = "model")]
        models: Vec<String>,
        #[arg(long = "variant")]
        variants: Vec<VariantName>,
        /// Override the configured format crossing for every selected model.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Run all comparisons and write the report bundle.
    Evaluate {
        config: PathBuf,
        #[arg(long = "family")]
        families: Vec<GameFamily>,
    },
    /// Print the threshold sensitivity grids.
    Sensitivity { config: PathBuf },
    /// Print the equilibrium-alignment summary.
    Ne { config: PathBuf },
    /// Print the tables of an existing report bundle.
    Report { config: PathBuf },
    /// Write a seeded synthetic corpus and a mock config into a directory.
    Synth {
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn report_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir().join("report")
}

fn load(path: &Path) -> Result<RunConfig, PipelineError> {
    RunConfig::load(path)
}

fn run(cmd: Command) -> Result<(), PipelineError> {
    match cmd {
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let errs = validate(&cfg);
            if !errs.is_empty() {
                return Err(PipelineError::Validation(errs));
            }
            println!("{}: ok", config.display());
        }
        Command::Predict {
            config,
            families,
            models,
            variants,
            format,
        } => {
            let cfg = load(&config)?;
            let scope = PredictScope {
                families,
                models,
                variants,
                format: format.map(|f| match f {
                    FormatArg::Standard => PromptFormat::Standard,
                    FormatArg::Chat => PromptFormat::Chat,
                }),
            };
            let s = predict(&cfg, &scope)?;
            println!(
                "{} record(s) in {} file(s), {} backend call(s), {} failure(s)",
                s.records,
                s.files.len(),
                s.backend_calls,
                s.failures.len()
            );
            for f in &s.failures {
                eprintln!("failed: {f}");
            }
            if !s.failures.is_empty() {
                return Err(PipelineError::FetchFailures {
                    failed: s.failures.len(),
                    total: s.records + s.failures.len(),
                });
            }
        }
        Command::Evaluate { config, families } => {
            let cfg = load(&config)?;
            let bundle = evaluate(&cfg, &families)?;
            let dir = report_dir(&cfg);
            write_report(&bundle, &dir)?;
            print!("{}", bundle.families_text());
            println!("\nreport written to {}", dir.display());
        }
        Command::Sensitivity { config } => {
            let cfg = load(&config)?;
            print!("{}", evaluate(&cfg, &[])?.sensitivity_text());
        }
        Command::Ne { config } => {
            let cfg = load(&config)?;
            print!("{}", evaluate(&cfg, &[GameFamily::MatrixOneshot])?.ne_text());
        }
        Command::Report { config } => {
            let cfg = load(&config)?;
            let bundle = load_report(&report_dir(&cfg))?;
            for (name, text) in bundle.text_files() {
                println!("== {name}\n{text}");
            }
        }
        Command::Synth { dir, seed } => {
            let opts = SynthOptions {
                seed,
                ..SynthOptions::default()
            };
            let path = synth(&dir, &opts)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
