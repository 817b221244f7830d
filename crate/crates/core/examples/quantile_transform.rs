//! Normalizing objectives with wildly different scales and outliers.

use dmobo::indicators::pareto_indices;
use dmobo::transforms::{FittedTransform, TransformKind};

fn main() -> dmobo::Result<()> {
    // validation error and runtime, with one diverged run and one slow outlier
    let rows = vec![
        vec![0.12, 30.0],
        vec![0.08, 95.0],
        vec![0.30, 12.0],
        vec![0.95, 20.0],
        vec![0.10, 48_000.0],
        vec![0.05, 400.0],
    ];
    for kind in [TransformKind::Identity, TransformKind::MinMaxLog, TransformKind::QuantileUniform] {
        let t = FittedTransform::fit_rows(kind, &rows)?;
        let mapped: Vec<Vec<f64>> = rows.iter().map(|r| t.apply(r)).collect::<dmobo::Result<_>>()?;
        println!("{kind:?}");
        for (raw, m) in rows.iter().zip(&mapped) {
            println!("  {raw:>20?} -> [{:>8.4}, {:>8.4}]", m[0], m[1]);
        }
        println!("  Pareto indices: {:?}", pareto_indices(&mapped));
    }
    println!("raw Pareto indices: {:?}", pareto_indices(&rows));
    Ok(())
}
