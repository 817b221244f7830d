//! Steering the search below an objective bound with the penalty.

use dmobo::dbo::Budget;
use dmobo::harness::{run_experiment, DMoboParams, ExperimentConfig, OptimizerSpec, RefRule};
use dmobo::problems::ProblemSpec;

fn main() -> dmobo::Result<()> {
    let problem = ProblemSpec::Dtlz2 { n_vars: 8, n_objectives: 2 };
    for gamma in [0.0, 2.0] {
        let mut params = DMoboParams::default();
        params.mobo.gamma = gamma;
        params.mobo.pool_size = 2048;
        let mut cfg = ExperimentConfig::new(problem.clone(), OptimizerSpec::DMobo(params), Budget::Evaluations(150));
        cfg.upper_bounds = Some(vec![0.5, f64::INFINITY]);
        cfg.hvi_reference = RefRule::BoundClipped;
        cfg.label = Some(format!("gamma{gamma}"));
        let rec = &run_experiment(&cfg)?[0];
        println!("gamma {gamma}: #VC {} of {}, bound-clipped HVI {:.4}", rec.valid_count, rec.completed, rec.final_hvi);
    }
    Ok(())
}
