//! Pareto fronts and quality indicators on a small hand-made point set.

use dmobo::indicators::{extract_pareto_front, hypervolume, IndicatorReport};

fn main() -> dmobo::Result<()> {
    let points = vec![
        vec![0.2, 0.8],
        vec![0.4, 0.4],
        vec![0.8, 0.2],
        vec![0.6, 0.6], // dominated by (0.4, 0.4)
        vec![1.2, 0.1], // beyond the reference in the first objective
    ];
    let front = extract_pareto_front(&points);
    println!("front: {front:?}");

    let reference = [1.0, 1.0];
    println!("HVI: {:.4}", hypervolume(&front, &reference)?);

    let targets: Vec<Vec<f64>> = (0..=10).map(|i| i as f64 / 10.0).map(|t| vec![t, 1.0 - t]).collect();
    let report = IndicatorReport::compute(&points, &reference, Some((&targets, "linear front")))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
