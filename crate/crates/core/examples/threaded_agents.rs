//! Agents on real threads appending to a JSON-lines archive.

use std::sync::Arc;

use dmobo::dbo::{read_jsonl, run_threaded, Agent, AgentConfig, Archive, Budget};
use dmobo::mobo::MoboConfig;
use dmobo::problems::dtlz;

fn main() -> dmobo::Result<()> {
    let problem = dtlz(2, 6, 2)?;
    let path = std::env::temp_dir().join("dmobo_threaded_agents.jsonl");
    let _ = std::fs::remove_file(&path);
    let archive = Archive::file_backed(&path)?;

    let template = AgentConfig { mobo: MoboConfig { pool_size: 1024, ..MoboConfig::new(2) }, ..Default::default() };
    let mut agents: Vec<Agent> = template
        .for_all_ranks(4)
        .into_iter()
        .map(|cfg| Agent::new(Arc::clone(problem.space()), cfg))
        .collect::<dmobo::Result<_>>()?;
    run_threaded(&mut agents, &archive, &|c: &dmobo::Configuration| problem.evaluate(c), Budget::Evaluations(60))?;

    let trials = read_jsonl(&path)?;
    println!("{} trials in {}", trials.len(), path.display());
    for a in &agents {
        println!("agent {}: {} own steps, {} observed", a.rank(), a.step(), a.deliveries().len());
    }
    Ok(())
}
