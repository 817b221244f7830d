//! Comparing methods with the harness: archives, ranking and a summary table.

use dmobo::dbo::Budget;
use dmobo::harness::{
    average_ranking, load_runs, rank_inputs_from_runs, run_experiment, summarize, write_summary_csv, DMoboParams,
    ExperimentConfig, OptimizerSpec,
};
use dmobo::problems::ProblemSpec;

fn main() -> dmobo::Result<()> {
    let dir = std::env::temp_dir().join("dmobo_experiment_harness");
    let _ = std::fs::remove_dir_all(&dir);
    let mut records = Vec::new();
    let mut dmobo = DMoboParams::default();
    dmobo.mobo.pool_size = 1024;
    for optimizer in [OptimizerSpec::DMobo(dmobo), OptimizerSpec::Random] {
        for k in [2, 7] {
            let problem = ProblemSpec::dtlz(k, 8, 3)?;
            let mut cfg = ExperimentConfig::new(problem, optimizer.clone(), Budget::Evaluations(60));
            cfg.repetitions = 2;
            cfg.workers = 4;
            cfg.output_dir = Some(dir.clone());
            records.extend(run_experiment(&cfg)?);
        }
    }
    write_summary_csv(&summarize(&records), std::io::stdout())?;

    let runs = load_runs(&format!("{}/*.jsonl", dir.display()))?;
    for m in average_ranking(&rank_inputs_from_runs(&runs)?, 60)? {
        println!("{:<14} rank at 20/40/60: {:.2} {:.2} {:.2}", m.method, m.mean[19], m.mean[39], m.mean[59]);
    }
    Ok(())
}
