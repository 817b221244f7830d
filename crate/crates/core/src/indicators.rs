//! Pareto dominance, front extraction and solution-set quality indicators.
//!
//! All objective vectors are in minimization orientation.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Largest objective count accepted by [`hypervolume`].
pub const MAX_HV_OBJECTIVES: usize = 5;

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    check_len(a.len(), b.len())?;
    Ok(dominates_unchecked(a, b))
}

#[inline]
pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Indices (ascending) of the points not dominated by any other point.
///
/// Duplicates of a non-dominated point are all kept.
pub fn pareto_indices<P: AsRef<[f64]>>(points: &[P]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| lex_cmp(points[i].as_ref(), points[j].as_ref()));
    // A dominator always precedes what it dominates in lexicographic order, and
    // every dominated point is dominated by some non-dominated one.
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        let p = points[i].as_ref();
        if !front.iter().any(|&f| dominates_unchecked(points[f].as_ref(), p)) {
            front.push(i);
        }
    }
    front.sort_unstable();
    front
}

pub fn extract_pareto_front<P: AsRef<[f64]>>(points: &[P]) -> Vec<Vec<f64>> {
    pareto_indices(points).into_iter().map(|i| points[i].as_ref().to_vec()).collect()
}

/// Hypervolume together with the number of points dropped for not being
/// componentwise `<=` the reference point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypervolumeReport {
    pub volume: f64,
    pub clipped: usize,
}

/// Exact Lebesgue measure of the union of boxes `[a, reference]`.
///
/// Points that do not weakly dominate `reference` are excluded.
pub fn hypervolume<P: AsRef<[f64]>>(front: &[P], reference: &[f64]) -> Result<f64> {
    hypervolume_report(front, reference).map(|r| r.volume)
}

pub fn hypervolume_report<P: AsRef<[f64]>>(front: &[P], reference: &[f64]) -> Result<HypervolumeReport> {
    compute(front, reference, 2)
}

/// Same measure, computed by slicing all the way down to one dimension.
/// Slower than [`hypervolume`]; used to cross-check the 2-D sweep.
pub fn hypervolume_by_slicing<P: AsRef<[f64]>>(front: &[P], reference: &[f64]) -> Result<f64> {
    compute(front, reference, 1).map(|r| r.volume)
}

fn compute<P: AsRef<[f64]>>(front: &[P], reference: &[f64], base: usize) -> Result<HypervolumeReport> {
    let dim = reference.len();
    if dim == 0 || dim > MAX_HV_OBJECTIVES {
        return Err(Error::UnsupportedDimension { got: dim, max: MAX_HV_OBJECTIVES });
    }
    let mut kept = Vec::with_capacity(front.len());
    let mut clipped = 0;
    for p in front {
        let p = p.as_ref();
        check_len(dim, p.len())?;
        if p.iter().zip(reference).all(|(a, r)| a <= r) {
            kept.push(p.to_vec());
        } else {
            clipped += 1;
        }
    }
    let idx = pareto_indices(&kept);
    let mut pts: Vec<Vec<f64>> = idx.into_iter().map(|i| std::mem::take(&mut kept[i])).collect();
    let volume = if pts.is_empty() { 0.0 } else { slice_volume(&mut pts, reference, dim, base) };
    Ok(HypervolumeReport { volume, clipped })
}

/// Volume over the first `dim` coordinates. `pts` are all `<= reference`.
fn slice_volume(pts: &mut [Vec<f64>], reference: &[f64], dim: usize, base: usize) -> f64 {
    if dim == 1 {
        let lo = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        return reference[0] - lo;
    }
    if dim == 2 && base == 2 {
        return sweep_2d(pts, reference);
    }
    let last = dim - 1;
    pts.sort_by(|a, b| a[last].total_cmp(&b[last]));
    let mut volume = 0.0;
    let mut slab: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
    for i in 0..pts.len() {
        slab.push(pts[i][..last].to_vec());
        let upper = if i + 1 < pts.len() { pts[i + 1][last] } else { reference[last] };
        let depth = upper - pts[i][last];
        if depth > 0.0 {
            let keep = pareto_indices(&slab);
            if keep.len() < slab.len() {
                slab = keep.into_iter().map(|k| std::mem::take(&mut slab[k])).collect();
            }
            let mut work = slab.clone();
            volume += depth * slice_volume(&mut work, reference, last, base);
        }
    }
    volume
}

fn sweep_2d(pts: &mut [Vec<f64>], reference: &[f64]) -> f64 {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut best = reference[1];
    let mut volume = 0.0;
    for p in pts.iter() {
        if p[1] < best {
            volume += (reference[0] - p[0]) * (best - p[1]);
            best = p[1];
        }
    }
    volume
}

/// `|| max(yhat - y, 0) ||_2`.
pub fn dplus(yhat: &[f64], y: &[f64]) -> Result<f64> {
    check_len(yhat.len(), y.len())?;
    Ok(dplus_unchecked(yhat, y))
}

fn dplus_unchecked(yhat: &[f64], y: &[f64]) -> f64 {
    yhat.iter().zip(y).map(|(a, b)| (a - b).max(0.0).powi(2)).sum::<f64>().sqrt()
}

fn mean_min_dplus<A: AsRef<[f64]>, B: AsRef<[f64]>>(
    from: &[A],
    to: &[B],
    what: &'static str,
    swap: bool,
) -> Result<f64> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::UndefinedIndicator(what));
    }
    let dim = from[0].as_ref().len();
    for p in from.iter().map(AsRef::as_ref).chain(to.iter().map(AsRef::as_ref)) {
        check_len(dim, p.len())?;
    }
    let total: f64 = from
        .iter()
        .map(|a| {
            to.iter()
                .map(|b| {
                    if swap {
                        dplus_unchecked(b.as_ref(), a.as_ref())
                    } else {
                        dplus_unchecked(a.as_ref(), b.as_ref())
                    }
                })
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / from.len() as f64)
}

/// Mean over `front` of the smallest `d+` to any target.
pub fn gd_plus<A: AsRef<[f64]>, B: AsRef<[f64]>>(front: &[A], targets: &[B]) -> Result<f64> {
    mean_min_dplus(front, targets, "GD+ needs non-empty front and targets", false)
}

/// Mean over `targets` of the smallest `d+` from any front point.
pub fn igd_plus<A: AsRef<[f64]>, B: AsRef<[f64]>>(front: &[A], targets: &[B]) -> Result<f64> {
    mean_min_dplus(targets, front, "IGD+ needs non-empty front and targets", true)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorReport {
    pub hypervolume: f64,
    pub reference: Vec<f64>,
    pub clipped: usize,
    pub front_size: usize,
    pub gd_plus: Option<f64>,
    pub igd_plus: Option<f64>,
    /// Where the targets came from, e.g. the problem's analytic front sampler.
    pub target_source: Option<String>,
    pub target_count: usize,
}

impl IndicatorReport {
    /// HVI of `points` plus GD+/IGD+ when `targets` is given.
    pub fn compute<P: AsRef<[f64]>>(
        points: &[P],
        reference: &[f64],
        targets: Option<(&[Vec<f64>], &str)>,
    ) -> Result<Self> {
        let front = extract_pareto_front(points);
        let hv = hypervolume_report(&front, reference)?;
        let (gd, igd, source, count) = match targets {
            Some((t, src)) if !front.is_empty() && !t.is_empty() => {
                (Some(gd_plus(&front, t)?), Some(igd_plus(&front, t)?), Some(src.to_string()), t.len())
            }
            Some((t, src)) => (None, None, Some(src.to_string()), t.len()),
            None => (None, None, None, 0),
        };
        Ok(Self {
            hypervolume: hv.volume,
            reference: reference.to_vec(),
            clipped: hv.clipped,
            front_size: front.len(),
            gd_plus: gd,
            igd_plus: igd,
            target_source: source,
            target_count: count,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_front(points: &[Vec<f64>]) -> Vec<usize> {
        (0..points.len())
            .filter(|&i| !(0..points.len()).any(|j| j != i && dominates_unchecked(&points[j], &points[i])))
            .collect()
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&[0.0, 0.0], &[1.0, 1.0]).unwrap());
        assert!(!dominates(&[0.0, 1.0], &[1.0, 0.0]).unwrap());
        assert!(!dominates(&[1.0, 1.0], &[1.0, 1.0]).unwrap());
        assert!(matches!(dominates(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn front_examples() {
        let pts = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        assert_eq!(extract_pareto_front(&pts), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(extract_pareto_front::<Vec<f64>>(&[]).is_empty());
        let dup = vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![0.6, 0.6]];
        assert_eq!(pareto_indices(&dup), vec![0, 1]);
    }

    #[test]
    fn front_matches_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pts: Vec<Vec<f64>> = (0..50).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        assert_eq!(pareto_indices(&pts), brute_front(&pts));
    }

    #[test]
    fn hypervolume_examples() {
        assert!((hypervolume(&[vec![0.25, 0.25]], &[1.0, 1.0]).unwrap() - 0.5625).abs() < 1e-15);
        let two = [vec![0.2, 0.6], vec![0.6, 0.2]];
        assert!((hypervolume(&two, &[1.0, 1.0]).unwrap() - 0.48).abs() < 1e-12);
        assert!((hypervolume(&[vec![0.5, 0.5, 0.5]], &[1.0, 1.0, 1.0]).unwrap() - 0.125).abs() < 1e-15);
        assert_eq!(hypervolume::<Vec<f64>>(&[], &[1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn hypervolume_clips_points_beyond_reference() {
        let pts = [vec![0.5, 0.5], vec![0.1, 2.0]];
        let r = hypervolume_report(&pts, &[1.0, 1.0]).unwrap();
        assert_eq!(r.clipped, 1);
        assert!((r.volume - 0.25).abs() < 1e-15);
    }

    #[test]
    fn hypervolume_rejects_high_dimension() {
        let p = vec![vec![0.0; 6]];
        assert!(matches!(hypervolume(&p, &[1.0; 6]), Err(Error::UnsupportedDimension { got: 6, .. })));
        let p5 = vec![vec![0.5; 5]];
        assert!((hypervolume(&p5, &[1.0; 5]).unwrap() - 0.5f64.powi(5)).abs() < 1e-15);
    }

    #[test]
    fn hypervolume_3d_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Vec<f64>> = (0..20).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let exact = hypervolume(&pts, &[1.0, 1.0, 1.0]).unwrap();
        let n = 1_000_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let s: [f64; 3] = [rng.random(), rng.random(), rng.random()];
            if pts.iter().any(|p| p.iter().zip(&s).all(|(a, b)| a <= b)) {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((exact - p).abs() <= 3.0 * sd, "exact {exact} mc {p} sd {sd}");
    }

    #[test]
    fn inclusion_exclusion_3d() {
        // two boxes overlapping in [0.5,1]^3 minus nothing: 0.5*1*... hand computed
        let pts = [vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5]];
        // |A| = 1*0.5*0.5, |B| = 0.5*1*0.5, |A∩B| = 0.5*0.5*0.5
        let expected = 0.25 + 0.25 - 0.125;
        assert!((hypervolume(&pts, &[1.0, 1.0, 1.0]).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn dplus_examples() {
        assert!((dplus(&[0.5, 0.5], &[0.3, 0.7]).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(dplus(&[0.4, 0.1], &[0.4, 0.1]).unwrap(), 0.0);
        assert_eq!(dplus(&[0.0, 0.0], &[0.3, 0.7]).unwrap(), 0.0);
        assert!(dplus(&[0.0], &[0.3, 0.7]).is_err());
    }

    #[test]
    fn gd_igd_examples() {
        let targets = vec![vec![0.3, 0.7], vec![0.7, 0.3]];
        assert!((gd_plus(&[vec![0.5, 0.5]], &targets).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(gd_plus(&targets[..1], &targets).unwrap(), 0.0);
        let a = vec![vec![0.9, 0.2]];
        let b = vec![vec![0.4, 0.6]];
        assert_eq!(gd_plus(&a, &b).unwrap(), dplus(&a[0], &b[0]).unwrap());
        assert_eq!(igd_plus(&[vec![0.0, 0.0]], &targets).unwrap(), 0.0);
        assert_eq!(igd_plus(&[targets[0].clone(), targets[1].clone(), vec![9.0, 9.0]], &targets).unwrap(), 0.0);
        assert_eq!(igd_plus(&a, &b).unwrap(), gd_plus(&a, &b).unwrap());
        assert!((igd_plus(&a, &b).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(gd_plus::<Vec<f64>, Vec<f64>>(&[], &targets), Err(Error::UndefinedIndicator(_))));
        assert!(igd_plus::<Vec<f64>, Vec<f64>>(&targets, &[]).is_err());
    }

    #[test]
    fn report_combines_indicators() {
        let pts = vec![vec![0.2, 0.6], vec![0.6, 0.2], vec![0.9, 0.9]];
        let targets = vec![vec![0.2, 0.6], vec![0.6, 0.2]];
        let r = IndicatorReport::compute(&pts, &[1.0, 1.0], Some((&targets, "hand"))).unwrap();
        assert_eq!(r.front_size, 2);
        assert!((r.hypervolume - 0.48).abs() < 1e-12);
        assert_eq!(r.gd_plus, Some(0.0));
        assert_eq!(r.igd_plus, Some(0.0));
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, 3)
    }

    fn grid3() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec((0u8..4).prop_map(|v| v as f64 / 4.0), 3)
    }

    proptest! {
        #[test]
        fn dominance_is_strict_partial_order(a in grid3(), b in grid3(), c in grid3()) {
            prop_assert!(!dominates_unchecked(&a, &a));
            if dominates_unchecked(&a, &b) {
                prop_assert!(!dominates_unchecked(&b, &a));
                if dominates_unchecked(&b, &c) {
                    prop_assert!(dominates_unchecked(&a, &c));
                }
            }
        }

        #[test]
        fn front_equals_oracle(pts in proptest::collection::vec(grid3(), 0..40)) {
            prop_assert_eq!(pareto_indices(&pts), brute_front(&pts));
        }

        #[test]
        fn adding_point_never_decreases_hv(pts in proptest::collection::vec(vec3(), 1..15), extra in vec3()) {
            let r = [1.0, 1.0, 1.0];
            let before = hypervolume(&pts, &r).unwrap();
            let mut more = pts.clone();
            more.push(extra);
            prop_assert!(hypervolume(&more, &r).unwrap() >= before - 1e-12);
        }

        #[test]
        fn pareto_compliance(b in proptest::collection::vec(vec3(), 1..12), shrink in 0.0f64..1.0) {
            // every point of B is dominated by its shrunken image in A
            let a: Vec<Vec<f64>> = b.iter().map(|p| p.iter().map(|v| v * shrink).collect()).collect();
            let r = [1.0, 1.0, 1.0];
            prop_assert!(hypervolume(&a, &r).unwrap() >= hypervolume(&b, &r).unwrap() - 1e-12);
        }

        #[test]
        fn sweep_matches_slicing(pts in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 2), 1..30)) {
            let r = [1.0, 1.0];
            let a = hypervolume(&pts, &r).unwrap();
            let b = hypervolume_by_slicing(&pts, &r).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn gd_plus_zero_on_subset(t in proptest::collection::vec(vec3(), 1..10), k in 1usize..10) {
            let f: Vec<Vec<f64>> = t.iter().take(k).cloned().collect();
            prop_assert_eq!(gd_plus(&f, &t).unwrap(), 0.0);
        }
    }
}
