//! Steady-state NSGA-II on DTLZ2 with GD+ to the analytic front.

use std::sync::Arc;

use dmobo::baselines::{Nsga2, NsgaConfig};
use dmobo::dbo::AskTell;
use dmobo::indicators::{extract_pareto_front, gd_plus};
use dmobo::problems::dtlz;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dmobo::Result<()> {
    let problem = dtlz(2, 8, 3)?;
    let targets = problem.true_front(500, &mut ChaCha8Rng::seed_from_u64(0)).expect("DTLZ has a known front");
    let mut opt = Nsga2::new(Arc::clone(problem.space()), NsgaConfig { seed: 1, ..Default::default() })?;
    let mut seen = Vec::new();
    for step in 1..=2000 {
        let x = opt.ask()?;
        let y = problem.evaluate(&x);
        if let Some(v) = y.finite() {
            seen.push(v.to_vec());
        }
        opt.tell(&x, &y)?;
        if step % 400 == 0 {
            println!("{step:>5} evaluations: GD+ {:.4}", gd_plus(&extract_pareto_front(&seen), &targets)?);
        }
    }
    Ok(())
}
