use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dmobo::dbo::read_jsonl;
use dmobo::harness::{
    average_ranking, evaluate_run_with_reference, load_runs, rank_inputs_from_runs, records_from_runs, run_experiment,
    summarize, write_summary_csv, ExperimentConfig, RefRule, RunMeta,
};

#[derive(Parser)]
#[command(name = "dmobo", version, about = "Decentralized multi-objective Bayesian optimization experiments")]
struct Cli {
    /// Overrides the output directory of `run`.
    #[arg(long, global = true, env = "DMOBO_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// HVI curve and AUC of one archive as CSV.
    Metrics {
        #[arg(long)]
        archive: PathBuf,
        /// `max`, `bound` or a comma-separated reference point.
        #[arg(long = "ref", default_value = "max")]
        reference: String,
        /// Upper bounds for `bound` and `#VC`, comma-separated.
        #[arg(long)]
        upper_bounds: Option<String>,
    },
    /// Average HVI ranks of stored runs, one pooled reference per task.
    Rank {
        #[arg(long)]
        inputs: String,
        /// Grid length; defaults to the longest archive.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Per-method table of #D, #F, #VC, final HVI and AUC.
    Summarize {
        #[arg(long)]
        inputs: String,
    },
}

fn parse_list(s: &str) -> dmobo::Result<Vec<f64>> {
    match RefRule::parse(s)? {
        RefRule::Explicit(v) => Ok(v),
        _ => Err(dmobo::Error::Config(format!("expected numbers, got `{s}`"))),
    }
}

fn run(cli: Cli) -> dmobo::Result<()> {
    match cli.command {
        Command::Run { config } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            cfg.output_dir = cli.output_dir.or(cfg.output_dir).or_else(|| Some(PathBuf::from("results")));
            let records = run_experiment(&cfg)?;
            write_summary_csv(&summarize(&records), io::stdout())?;
            if let Some(dir) = &cfg.output_dir {
                eprintln!("wrote {} archives to {}", records.len(), dir.display());
            }
        }
        Command::Metrics { archive, reference, upper_bounds } => {
            let trials = read_jsonl(&archive)?;
            let rule = RefRule::parse(&reference)?;
            let upper_bounds = upper_bounds.as_deref().map(parse_list).transpose()?;
            let finite: Vec<&[f64]> = trials.iter().filter_map(|t| t.outcome.finite()).collect();
            let resolved = rule.resolve(&finite, upper_bounds.as_deref());
            let meta = RunMeta {
                task: archive.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                method: String::new(),
                workers: 0,
                rep: 0,
                seed: 0,
                upper_bounds,
                hvi_reference: rule,
                problem: None,
            };
            let rec = evaluate_run_with_reference(&trials, meta, resolved, None)?;
            let mut w = csv::Writer::from_writer(io::stdout());
            w.write_record(["index", "time", "hvi"])?;
            for (i, (t, h)) in rec.hvi_time.iter().enumerate() {
                w.write_record([(i + 1).to_string(), t.to_string(), h.to_string()])?;
            }
            w.flush()?;
            eprintln!(
                "reference {:?}; #D {} #F {} #VC {}; final HVI {}; AUC {}",
                rec.reference, rec.completed, rec.failures, rec.valid_count, rec.final_hvi, rec.auc
            );
        }
        Command::Rank { inputs, grid } => {
            let runs = load_runs(&inputs)?;
            let grid = grid.unwrap_or_else(|| runs.iter().map(|r| r.trials.len()).max().unwrap_or(0));
            let ranks = average_ranking(&rank_inputs_from_runs(&runs)?, grid)?;
            let mut w = csv::Writer::from_writer(io::stdout());
            w.write_record(["method", "index", "mean_rank", "lower", "upper"])?;
            for m in &ranks {
                for i in 0..grid {
                    w.write_record([
                        m.method.clone(),
                        (i + 1).to_string(),
                        m.mean[i].to_string(),
                        m.lower[i].to_string(),
                        m.upper[i].to_string(),
                    ])?;
                }
            }
            w.flush()?;
        }
        Command::Summarize { inputs } => {
            let runs = load_runs(&inputs)?;
            write_summary_csv(&summarize(&records_from_runs(&runs)?), io::stdout())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
