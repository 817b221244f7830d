//! A single optimizer on the synthetic tuning problem, driven by hand.

use std::sync::Arc;

use dmobo::indicators::hypervolume;
use dmobo::mobo::{Mobo, MoboConfig};
use dmobo::problems::synthetic_hpo;

fn main() -> dmobo::Result<()> {
    let problem = synthetic_hpo(0);
    let mut opt = Mobo::new(Arc::clone(problem.space()), MoboConfig::new(2), 42)?;
    for step in 0..60 {
        let x = opt.suggest(1.0)?;
        let y = problem.evaluate(&x);
        if step % 10 == 0 {
            println!("step {step:>2}: {} -> {y:?}", serde_json::to_string(&x)?);
        }
        opt.observe(vec![x], vec![y])?;
    }
    let front = opt.pareto_archive();
    println!("front size {}, HVI vs (1, 1000): {:.2}", front.len(), hypervolume(&front, &[1.0, 1000.0])?);
    let failures = opt.outcomes().iter().filter(|o| o.is_failure()).count();
    println!("{failures} failed evaluations");
    Ok(())
}
