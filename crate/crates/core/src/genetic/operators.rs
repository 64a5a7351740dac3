//! Parameter-level genetic operators.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CrossoverKind {
    SinglePoint,
    DoublePoint,
    UniformPerParameter,
}

/// Roulette-wheel selection: index `i` with probability `scores[i] / Σ scores`,
/// uniform when every score is zero.
pub fn proportional_select<R: Rng + ?Sized>(scores: &[f64], rng: &mut R) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::Empty("selection needs at least one score".into()));
    }
    if let Some(bad) = scores.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(Error::invalid(format!("selection scores must be finite and non-negative, got {bad}")));
    }
    let total: f64 = scores.iter().sum();
    if total == 0.0 {
        return Ok(rng.random_range(0..scores.len()));
    }
    let target = rng.random::<f64>() * total;
    let mut cumulative = 0.0;
    for (i, &s) in scores.iter().enumerate() {
        cumulative += s;
        if target < cumulative {
            return Ok(i);
        }
    }
    // rounding left target at the very top of the wheel
    Ok(scores.iter().rposition(|&s| s > 0.0).expect("total is positive"))
}

/// Combines two equal-length parents into one child.
///
/// `DoublePoint` takes the middle segment from `b` between two distinct cut
/// positions; with only two parameters there is one possible cut and it
/// behaves like `SinglePoint`.
pub fn crossover<R: Rng + ?Sized>(a: &[f64], b: &[f64], kind: CrossoverKind, rng: &mut R) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    let len = a.len();
    if len < 2 {
        return Err(Error::invalid(format!("crossover needs at least 2 parameters, got {len}")));
    }
    let child = match kind {
        CrossoverKind::SinglePoint => {
            let cut = rng.random_range(1..len);
            a[..cut].iter().chain(&b[cut..]).copied().collect()
        }
        CrossoverKind::DoublePoint if len == 2 => vec![a[0], b[1]],
        CrossoverKind::DoublePoint => {
            let first = rng.random_range(1..len);
            let mut second = rng.random_range(1..len - 1);
            if second >= first {
                second += 1;
            }
            let (lo, hi) = (first.min(second), first.max(second));
            a[..lo].iter().chain(&b[lo..hi]).chain(&a[hi..]).copied().collect()
        }
        CrossoverKind::UniformPerParameter => {
            a.iter().zip(b).map(|(&x, &y)| if rng.random::<bool>() { x } else { y }).collect()
        }
    };
    Ok(child)
}

/// Perturbs each parameter with probability `rate` by `u · max(|p|, 1)`,
/// `u ~ Uniform(-size, size)`.
pub fn mutate<R: Rng + ?Sized>(params: &[f64], rate: f64, size: f64, rng: &mut R) -> Vec<f64> {
    if rate <= 0.0 || size <= 0.0 {
        return params.to_vec();
    }
    params
        .iter()
        .map(|&p| {
            if rng.random::<f64>() < rate {
                p + rng.random_range(-size..=size) * p.abs().max(1.0)
            } else {
                p
            }
        })
        .collect()
}

/// Indices of the `⌊elitism · n⌋` highest scores, best first; ties keep the lower index.
pub fn apply_elitism(scores: &[f64], elitism: f64) -> Vec<usize> {
    let keep = ((elitism * scores.len() as f64) + 1e-9).floor() as usize;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    order.truncate(keep.min(scores.len()));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    fn rng(seed: u64) -> crate::rng::Stream {
        stream(seed, Domain::Generation, 0, 0)
    }

    #[test]
    fn selection_rejects_bad_scores() {
        assert!(proportional_select(&[], &mut rng(0)).is_err());
        assert!(proportional_select(&[1.0, -0.1], &mut rng(0)).is_err());
        assert!(proportional_select(&[f64::NAN], &mut rng(0)).is_err());
    }

    #[test]
    fn selection_two_scores() {
        let mut r = rng(1);
        let hits = (0..40_000).filter(|_| proportional_select(&[1.0, 3.0], &mut r).unwrap() == 1).count();
        let sigma = (40_000.0f64 * 0.75 * 0.25).sqrt();
        assert!((hits as f64 - 30_000.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn all_zero_scores_select_uniformly() {
        let mut r = rng(2);
        let mut counts = [0u32; 3];
        for _ in 0..30_000 {
            counts[proportional_select(&[0.0, 0.0, 0.0], &mut r).unwrap()] += 1;
        }
        let sigma = (30_000.0f64 / 3.0 * (2.0 / 3.0)).sqrt();
        assert!(counts.iter().all(|&c| (f64::from(c) - 10_000.0).abs() < 3.0 * sigma), "{counts:?}");
    }

    #[test]
    fn zero_score_member_never_selected() {
        let mut r = rng(3);
        assert!((0..10_000).all(|_| proportional_select(&[0.0, 2.0, 0.0], &mut r).unwrap() == 1));
    }

    #[test]
    fn single_point_cut_at_two() {
        // find a stream whose cut lands at 2, then check the layout
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [-1.0, -2.0, -3.0, -4.0];
        let child = (0..)
            .map(|s| crossover(&a, &b, CrossoverKind::SinglePoint, &mut rng(s)).unwrap())
            .find(|c| c[1] > 0.0 && c[2] < 0.0)
            .unwrap();
        assert_eq!(child, vec![1.0, 2.0, -3.0, -4.0]);
    }

    #[test]
    fn identical_parents_give_identical_child() {
        let p = [0.5, -1.0, 2.0, 7.0, 3.0];
        for kind in [CrossoverKind::SinglePoint, CrossoverKind::DoublePoint, CrossoverKind::UniformPerParameter] {
            assert_eq!(crossover(&p, &p, kind, &mut rng(4)).unwrap(), p.to_vec());
        }
    }

    #[test]
    fn crossover_argument_errors() {
        assert!(crossover(&[1.0, 2.0], &[1.0], CrossoverKind::SinglePoint, &mut rng(0)).is_err());
        assert!(crossover(&[1.0], &[1.0], CrossoverKind::UniformPerParameter, &mut rng(0)).is_err());
        let two = crossover(&[1.0, 2.0], &[3.0, 4.0], CrossoverKind::DoublePoint, &mut rng(0)).unwrap();
        assert_eq!(two, vec![1.0, 4.0]);
    }

    #[test]
    fn mutation_identities() {
        let v = vec![0.0, -3.5, 12.0];
        assert_eq!(mutate(&v, 0.0, 0.5, &mut rng(5)), v);
        assert_eq!(mutate(&v, 1.0, 0.0, &mut rng(5)), v);
    }

    #[test]
    fn mutation_is_relative_with_floor() {
        let mut r = rng(6);
        for _ in 0..1000 {
            let out = mutate(&[10.0, 0.0], 1.0, 0.1, &mut r);
            assert!((9.0..=11.0).contains(&out[0]));
            assert!((-0.1..=0.1).contains(&out[1]));
        }
    }

    #[test]
    fn elitism_counts_and_order() {
        let scores = [0.3, 0.9, 0.1, 0.9, 0.5, 0.2, 0.0, 0.4, 0.6, 0.7];
        assert!(apply_elitism(&scores, 0.0).is_empty());
        assert_eq!(apply_elitism(&scores, 0.25), vec![1, 3]);
        assert_eq!(apply_elitism(&scores, 1.0).len(), 10);
        assert_eq!(apply_elitism(&[0.0; 100], 0.29).len(), 29);
    }
}
