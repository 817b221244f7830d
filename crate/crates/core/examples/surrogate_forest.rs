//! Fitting the random-split forest to a noisy 1-D function.

use dmobo::surrogate::{ForestConfig, RegressionForest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> dmobo::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let xs: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random::<f64>()]).collect();
    let ys: Vec<f64> = xs.iter().map(|x| (6.0 * x[0]).sin() + 0.1 * rng.random::<f64>()).collect();

    let forest = RegressionForest::train(&ForestConfig::default(), &xs, &ys)?;
    println!("{} trees, max depth {}", forest.n_trees(), forest.max_depth());
    for i in 0..=10 {
        let x = i as f64 / 10.0;
        let (mu, sigma) = forest.predict(&[x])?;
        println!("x={x:.1}  mu={mu:+.3}  sigma={sigma:.3}  true={:+.3}", (6.0 * x).sin() + 0.05);
    }
    Ok(())
}
