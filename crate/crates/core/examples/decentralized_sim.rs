//! Eight agents sharing one archive under the deterministic scheduler.

use std::sync::Arc;

use dmobo::dbo::{simulate, utilization_curve, AgentConfig, Archive, Budget, DecentralizedPolicy, Latency, SimConfig};
use dmobo::harness::hvi_curve;
use dmobo::mobo::MoboConfig;
use dmobo::problems::dtlz;

fn main() -> dmobo::Result<()> {
    let problem = dtlz(2, 8, 3)?;
    let archive = Arc::new(Archive::in_memory());
    let template = AgentConfig { seed_global: 1, mobo: MoboConfig { pool_size: 2048, ..MoboConfig::new(3) }, ..Default::default() };
    let mut policy = DecentralizedPolicy::new(Arc::clone(problem.space()), &template, 8, Arc::clone(&archive))?;
    let sim = SimConfig { workers: 8, latency: Latency::Exponential { mean: 1.0 }, budget: Budget::Evaluations(160), seed: 3 };
    simulate(&mut policy, &|c: &dmobo::Configuration| problem.evaluate(c), &sim)?;

    for agent in policy.agents() {
        println!("agent {} kappa0 {:.3} steps {}", agent.rank(), agent.kappa0(), agent.step());
    }
    let trials = archive.snapshot()?;
    let end = trials.iter().map(|t| t.t_complete).fold(0.0, f64::max);
    let grid: Vec<f64> = (0..10).map(|i| end * i as f64 / 10.0).collect();
    println!("utilization {:.2?}", utilization_curve(&trials, 8, &grid));
    let hvi = hvi_curve(&trials, &[1.5, 1.5, 1.5])?;
    println!("HVI after 40/80/160 evaluations: {:.4} {:.4} {:.4}", hvi[39], hvi[79], hvi[159]);
    Ok(())
}
