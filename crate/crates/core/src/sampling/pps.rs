//! Weighted sampling without replacement with exponential keys
//! (Efraimidis–Spirakis): item `i` gets key `u_i^(1/w_i)` and the `quota`
//! largest keys win.

use rand::Rng;

use crate::error::{Error, Result};

/// Indices of the selected items, in descending key order.
pub fn weighted_sample_indices<R: Rng + ?Sized>(weights: &[f64], quota: usize, rng: &mut R) -> Result<Vec<usize>> {
    if quota > weights.len() {
        return Err(Error::invalid(format!(
            "quota {quota} exceeds population of {}",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::invalid(format!("weights must be positive and finite, got {w}")));
    }
    // ln(u)/w orders items exactly like u^(1/w) without underflow.
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u = 1.0 - rng.random::<f64>();
            (u.ln() / w, i)
        })
        .collect();
    let by_key = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if quota == 0 {
        return Ok(Vec::new());
    }
    if quota < keyed.len() {
        keyed.select_nth_unstable_by(quota - 1, by_key);
        keyed.truncate(quota);
    }
    keyed.sort_unstable_by(by_key);
    Ok(keyed.into_iter().map(|(_, i)| i).collect())
}

pub fn weighted_sample_without_replacement<T: Clone, R: Rng + ?Sized>(
    ids: &[T],
    weights: &[f64],
    quota: usize,
    rng: &mut R,
) -> Result<Vec<T>> {
    if ids.len() != weights.len() {
        return Err(Error::invalid("ids and weights differ in length"));
    }
    Ok(weighted_sample_indices(weights, quota, rng)?
        .into_iter()
        .map(|i| ids[i].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn full_quota_returns_everything() {
        let ids = ["a", "b", "c", "d"];
        let mut r = rng::seeded(1);
        let mut got = weighted_sample_without_replacement(&ids, &[1.0, 1e-6, 50.0, 3.0], 4, &mut r).unwrap();
        got.sort();
        assert_eq!(got, ids);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut r = rng::seeded(1);
        assert!(weighted_sample_indices(&[1.0, 2.0], 3, &mut r).is_err());
        assert!(weighted_sample_indices(&[1.0, 0.0], 1, &mut r).is_err());
        assert!(weighted_sample_indices(&[1.0, f64::NAN], 1, &mut r).is_err());
        assert_eq!(weighted_sample_indices(&[1.0, 2.0], 0, &mut r).unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn deterministic_by_seed() {
        let w: Vec<f64> = (1..=50).map(f64::from).collect();
        let a = weighted_sample_indices(&w, 10, &mut rng::seeded(42)).unwrap();
        let b = weighted_sample_indices(&w, 10, &mut rng::seeded(42)).unwrap();
        assert_eq!(a, b);
        let mut dedup = a.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 10);
    }

    #[test]
    fn dominant_weight_wins() {
        // P(dominant first) = 1e6 / (1e6 + 9) > 0.99999.
        let mut w = vec![1.0; 10];
        w[3] = 1e6;
        let mut r = rng::seeded(7);
        let trials = 100_000;
        let hits = (0..trials)
            .filter(|_| weighted_sample_indices(&w, 1, &mut r).unwrap()[0] == 3)
            .count();
        assert!(hits as f64 / trials as f64 >= 0.999);
    }
}
