use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use tvsnet_harness::output::{jsonl, records_csv, sibling, summary_csv, write_file};
use tvsnet_harness::{catalog, run, sweep, verify, ExperimentConfig, HarnessError, Status, Suite};

#[derive(Parser)]
#[command(name = "tvsnet", version, about = "Seeded experiments and property suites for tvsnet")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override a field, e.g. `--set budget=0.1 --set samples.validation=1024`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Records file; defaults to the config's `output`, else stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration.
    Run(ConfigArgs),
    /// Run every point of the configuration's sweep grid.
    Sweep(ConfigArgs),
    /// Run a property suite (or `all`).
    Verify {
        suite: String,
        /// Write the JSON report here; `-` prints it to stdout.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Space kinds and their configuration syntax.
    Spaces {
        #[command(subcommand)]
        action: ListAction,
    },
    /// Activation catalog.
    Activations {
        #[command(subcommand)]
        action: ListAction,
    },
}

#[derive(Subcommand)]
enum ListAction {
    List,
}

fn load(args: &ConfigArgs) -> Result<(ExperimentConfig, Option<PathBuf>), HarnessError> {
    let cfg = ExperimentConfig::load(&args.config, &args.overrides)?;
    let output = args.output.clone().or_else(|| cfg.output.clone());
    Ok((cfg, output))
}

fn emit(output: &Option<PathBuf>, records: &[tvsnet_harness::RunRecord]) -> Result<(), HarnessError> {
    let text = jsonl(records)?;
    match output {
        Some(path) => {
            write_file(path, &text)?;
            write_file(&sibling(path, ".csv"), &records_csv(records)?)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Run(args) => {
            let (cfg, output) = load(&args)?;
            let record = run(&cfg);
            emit(&output, std::slice::from_ref(&record))?;
            if record.status == Status::Failed {
                eprintln!(
                    "run failed [{}]: {}",
                    record.reason_code.as_deref().unwrap_or(""),
                    record.message.as_deref().unwrap_or("")
                );
                return Ok(ExitCode::from(2));
            }
            eprintln!(
                "{}: sup_error {:.3e}, l2_error {:.3e}, width {}",
                record.name,
                record.sup_error.unwrap_or(f64::NAN),
                record.l2_error.unwrap_or(f64::NAN),
                record.width.unwrap_or(0)
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep(args) => {
            let (cfg, output) = load(&args)?;
            let outcome = sweep(&cfg);
            emit(&output, &outcome.records)?;
            let table = summary_csv(&outcome.summary)?;
            match &output {
                Some(path) => write_file(&sibling(path, ".summary.csv"), &table)?,
                None => eprint!("{table}"),
            }
            eprintln!("{}", serde_json::to_string(&outcome.summary)?);
            Ok(if outcome.summary.failures > 0 {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Verify { suite, json } => {
            let suites: Vec<Suite> = if suite == "all" {
                Suite::ALL.to_vec()
            } else {
                vec![suite.parse()?]
            };
            let mut reports = Vec::new();
            for s in suites {
                let report = verify(s);
                print!("{}", report.human());
                reports.push(report);
            }
            if let Some(path) = json {
                let text = if reports.len() == 1 {
                    serde_json::to_string_pretty(&reports[0])?
                } else {
                    serde_json::to_string_pretty(&reports)?
                };
                if path.as_os_str() == "-" {
                    println!("{text}");
                } else {
                    write_file(&path, &(text + "\n"))?;
                }
            }
            Ok(if reports.iter().all(|r| r.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            })
        }
        Command::Spaces { action: ListAction::List } => {
            print!("{}", catalog::spaces_listing());
            Ok(ExitCode::SUCCESS)
        }
        Command::Activations { action: ListAction::List } => {
            print!("{}", catalog::activations_listing());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
