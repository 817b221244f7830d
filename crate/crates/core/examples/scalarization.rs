//! Random simplex weights and the three scalarizations.

use dmobo::scalarize::{sample_simplex_weights, Scalarization, WeightVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dmobo::Result<()> {
    let y = [0.4, 0.7, 0.2];
    let utopia = [0.0, 0.1, 0.0];
    let fixed = WeightVector::new(vec![0.2, 0.3, 0.5])?;
    for s in [Scalarization::Linear, Scalarization::Chebyshev, Scalarization::pbi()] {
        println!("{:>4}: {:.5}", s.short_name(), s.apply(&y, &fixed, &utopia)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    println!("random weights:");
    for _ in 0..5 {
        let w = sample_simplex_weights(3, &mut rng)?;
        println!("  {:.3?} -> linear {:.4}", w.as_slice(), Scalarization::Linear.apply(&y, &w, &utopia)?);
    }
    Ok(())
}
