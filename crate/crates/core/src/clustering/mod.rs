//! kmeans++ seeding, Lloyd refinement and Davies–Bouldin model selection.
//!
//! Distances are Euclidean in the full embedding space. Nearest-centroid ties
//! always resolve to the lowest centroid index.

mod io;

use std::collections::HashSet;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub use io::{read_model, write_model, write_summary, ClusterSummary, CLUSTER_MAGIC};

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_RESTARTS: usize = 3;

/// Candidate cluster counts for collections in the 10⁶-clip range.
pub const TARGET_SCALE_K_GRID: [usize; 8] = [32, 64, 96, 128, 192, 256, 384, 512];

/// Lloyd / restart settings shared by [`select_k`] and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
    /// Candidates per kmeans++ step; 1 is plain kmeans++, 0 picks
    /// `2 + ⌊ln k⌋`.
    #[serde(default)]
    pub seeding_trials: usize,
}

impl KMeansConfig {
    pub fn trials_for(&self, k: usize) -> usize {
        match self.seeding_trials {
            0 => 2 + (k as f64).ln().floor() as usize,
            t => t,
        }
    }
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            restarts: DEFAULT_RESTARTS,
            seeding_trials: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// `None` when k < 2.
    pub db_index: Option<f64>,
    pub inertia: f64,
    pub iterations_run: usize,
    /// Within-cluster sum of squares after each Lloyd round.
    pub inertia_history: Vec<f64>,
}

impl ClusterModel {
    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Indices of the points in each cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.k];
        for (i, &a) in self.assignments.iter().enumerate() {
            members[a].push(i);
        }
        members
    }

    pub fn assign(&self, point: &[f64]) -> Result<usize> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: point.len(),
                clip_id: None,
            });
        }
        Ok(nearest(&self.centroids, point).0)
    }
}

/// Free-function form of [`ClusterModel::assign`].
pub fn assign(model: &ClusterModel, point: &[f64]) -> Result<usize> {
    model.assign(point)
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Nearest centroid and its squared distance; lowest index wins ties.
fn nearest(centroids: &[Vec<f64>], point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(centroid, point);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let dim = points
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::invalid("no points to cluster"))?;
    if dim == 0 {
        return Err(Error::invalid("points have dimension 0"));
    }
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: p.len(),
            clip_id: None,
        });
    }
    Ok(dim)
}

fn distinct_count(points: &[Vec<f64>]) -> usize {
    points
        .iter()
        .map(|p| p.iter().map(|x| (x + 0.0).to_bits()).collect::<Vec<u64>>())
        .collect::<HashSet<_>>()
        .len()
}

/// kmeans++ seeding: the first centroid is a uniform draw, each further one
/// is drawn with probability proportional to its squared distance from the
/// nearest centroid chosen so far.
pub fn kmeanspp_init(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    kmeanspp_init_trials(points, k, seed, 1)
}

/// kmeans++ with `trials` D²-weighted candidates per step, keeping the one
/// that lowers the total squared distance most. `trials = 1` is plain
/// kmeans++.
pub fn kmeanspp_init_trials(points: &[Vec<f64>], k: usize, seed: u64, trials: usize) -> Result<Vec<Vec<f64>>> {
    check_points(points)?;
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if trials == 0 {
        return Err(Error::invalid("at least one candidate per step is required"));
    }
    let distinct = distinct_count(points);
    if k > distinct {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the number of distinct points ({distinct})"
        )));
    }
    let mut rng = rng::seeded(seed);
    let first = rng.random_range(0..points.len());
    let mut centroids = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[first])).collect();

    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let chosen = draw_d2(&d2, rng.random::<f64>() * total);
            let updated: Vec<f64> = if trials == 1 {
                Vec::new()
            } else {
                points
                    .par_iter()
                    .zip(&d2)
                    .map(|(p, &w)| w.min(sq_dist(p, &points[chosen])))
                    .collect()
            };
            let potential: f64 = updated.iter().sum();
            if best.as_ref().is_none_or(|b| potential < b.0) {
                best = Some((potential, chosen, updated));
            }
        }
        let (_, chosen, updated) = best.expect("trials ≥ 1");
        let c = points[chosen].clone();
        if trials == 1 {
            for (w, p) in d2.iter_mut().zip(points) {
                *w = w.min(sq_dist(p, &c));
            }
        } else {
            d2 = updated;
        }
        centroids.push(c);
    }
    Ok(centroids)
}

/// Index whose cumulative D² mass first exceeds `target`, skipping points
/// already at a centroid.
fn draw_d2(d2: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    let mut chosen = None;
    for (i, &w) in d2.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        chosen = Some(i);
        if acc > target {
            break;
        }
    }
    // k ≤ distinct guarantees some positive mass remains.
    chosen.expect("positive D² mass")
}

fn assign_all(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let nearest: Vec<(usize, f64)> = points.par_iter().map(|p| nearest(centroids, p)).collect();
    let inertia = nearest.iter().map(|&(_, d)| d).sum();
    (nearest.into_iter().map(|(c, _)| c).collect(), inertia)
}

fn inertia_of(points: &[Vec<f64>], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .sum()
}

/// Gives every empty cluster the point farthest from its current centroid,
/// taken from a cluster that can spare one. Returns whether anything moved.
fn repair_empty(points: &[Vec<f64>], centroids: &mut [Vec<f64>], assignments: &mut [usize]) -> bool {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    let mut moved = false;
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            let a = assignments[i];
            if sizes[a] < 2 {
                continue;
            }
            let d = sq_dist(p, &centroids[a]);
            if far.is_none_or(|(_, best)| d > best) {
                far = Some((i, d));
            }
        }
        let Some((i, _)) = far else { break };
        sizes[assignments[i]] -= 1;
        sizes[c] += 1;
        assignments[i] = c;
        centroids[c] = points[i].clone();
        moved = true;
    }
    moved
}

fn cluster_means(points: &[Vec<f64>], assignments: &[usize], previous: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = previous[0].len();
    let mut sums = vec![vec![0.0; dim]; previous.len()];
    let mut counts = vec![0usize; previous.len()];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(p) {
            *s += x;
        }
    }
    sums.into_iter()
        .zip(counts)
        .zip(previous)
        .map(|((s, n), prev)| {
            if n == 0 {
                prev.clone()
            } else {
                s.into_iter().map(|x| x / n as f64).collect()
            }
        })
        .collect()
}

/// Lloyd refinement from the given centroids. Stops once no centroid moves
/// more than `tol` in a round, or after `max_iter` rounds.
pub fn lloyd(points: &[Vec<f64>], init_centroids: &[Vec<f64>], max_iter: usize, tol: f64) -> Result<ClusterModel> {
    let dim = check_points(points)?;
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(Error::invalid("tol must be a finite non-negative number"));
    }
    if init_centroids.is_empty() {
        return Err(Error::invalid("at least one initial centroid is required"));
    }
    if init_centroids.len() > points.len() {
        return Err(Error::invalid("more centroids than points"));
    }
    if let Some(c) = init_centroids.iter().find(|c| c.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: c.len(),
            clip_id: None,
        });
    }

    let k = init_centroids.len();
    let mut centroids = init_centroids.to_vec();
    let (mut assignments, _) = assign_all(points, &centroids);
    let mut history = Vec::new();
    let mut iterations_run = 0;

    for iter in 1..=max_iter {
        repair_empty(points, &mut centroids, &mut assignments);
        let updated = cluster_means(points, &assignments, &centroids);
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| dist(a, b))
            .fold(0.0, f64::max);
        centroids = updated;
        let (next, inertia) = assign_all(points, &centroids);
        assignments = next;
        history.push(inertia);
        iterations_run = iter;
        if shift <= tol {
            break;
        }
    }

    // The last assignment pass may have emptied a cluster.
    for _ in 0..k {
        if !repair_empty(points, &mut centroids, &mut assignments) {
            break;
        }
        centroids = cluster_means(points, &assignments, &centroids);
        assignments = assign_all(points, &centroids).0;
    }
    let mut sizes = vec![0usize; k];
    for &a in &assignments {
        sizes[a] += 1;
    }
    if sizes.contains(&0) {
        return Err(Error::invalid(
            "could not repair empty clusters; initial centroids are not distinct enough",
        ));
    }

    let inertia = inertia_of(points, &centroids, &assignments);
    let mut model = ClusterModel {
        k,
        centroids,
        assignments,
        db_index: None,
        inertia,
        iterations_run,
        inertia_history: history,
    };
    if k >= 2 {
        model.db_index = davies_bouldin(points, &model).ok();
    }
    Ok(model)
}

/// Davies–Bouldin index: mean over clusters of the worst
/// `(s_i + s_j) / d(c_i, c_j)`, with `s` the mean member-to-centroid distance.
pub fn davies_bouldin(points: &[Vec<f64>], model: &ClusterModel) -> Result<f64> {
    if model.k < 2 {
        return Err(Error::invalid("Davies–Bouldin index needs at least 2 clusters"));
    }
    if points.len() != model.assignments.len() {
        return Err(Error::invalid("model assignments do not cover the points"));
    }
    let mut scatter = vec![0.0; model.k];
    let mut counts = vec![0usize; model.k];
    for (p, &a) in points.iter().zip(&model.assignments) {
        scatter[a] += dist(p, &model.centroids[a]);
        counts[a] += 1;
    }
    if let Some(empty) = counts.iter().position(|&n| n == 0) {
        return Err(Error::invalid(format!("cluster {empty} is empty")));
    }
    for (s, n) in scatter.iter_mut().zip(&counts) {
        *s /= *n as f64;
    }

    let mut total = 0.0;
    for i in 0..model.k {
        let mut worst: f64 = 0.0;
        for j in 0..model.k {
            if i == j {
                continue;
            }
            let d = dist(&model.centroids[i], &model.centroids[j]);
            if d == 0.0 {
                return Err(Error::DegenerateCentroids(i.min(j), i.max(j)));
            }
            worst = worst.max((scatter[i] + scatter[j]) / d);
        }
        total += worst;
    }
    Ok(total / model.k as f64)
}

/// Best-of-`restarts` kmeans++/Lloyd run for a single k (lowest inertia,
/// earliest restart on ties).
pub fn fit_k(points: &[Vec<f64>], k: usize, seed: u64, config: &KMeansConfig) -> Result<ClusterModel> {
    if config.restarts == 0 {
        return Err(Error::invalid("restarts must be at least 1"));
    }
    let mut best: Option<ClusterModel> = None;
    for restart in 0..config.restarts {
        let run_seed = rng::mix(rng::mix(seed, k as u64), restart as u64);
        let init = kmeanspp_init_trials(points, k, run_seed, config.trials_for(k))?;
        let model = lloyd(points, &init, config.max_iter, config.tol)?;
        if best.as_ref().is_none_or(|b| model.inertia < b.inertia) {
            best = Some(model);
        }
    }
    Ok(best.expect("restarts ≥ 1"))
}

/// Fits every k in the grid and returns the model with the lowest
/// Davies–Bouldin index, preferring the smaller k on ties.
pub fn select_k(points: &[Vec<f64>], k_grid: &[usize], seed: u64, config: &KMeansConfig) -> Result<ClusterModel> {
    let mut grid = k_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    match grid.as_slice() {
        [] => return Err(Error::invalid("k grid is empty")),
        [k] => return fit_k(points, *k, seed, config),
        _ => {}
    }
    if grid[0] < 2 {
        return Err(Error::invalid("every k in a multi-value grid must be at least 2"));
    }

    let mut best: Option<ClusterModel> = None;
    for &k in &grid {
        let mut model = fit_k(points, k, seed, config)?;
        let db = davies_bouldin(points, &model)?;
        model.db_index = Some(db);
        if best
            .as_ref()
            .is_none_or(|b| db < b.db_index.expect("set above"))
        {
            best = Some(model);
        }
    }
    Ok(best.expect("non-empty grid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn square() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]
    }

    #[test]
    fn init_k_equals_n_is_permutation() {
        let pts = vec![vec![0.0], vec![3.0], vec![7.0], vec![-2.0], vec![10.5]];
        for seed in 0..20 {
            let mut c = kmeanspp_init(&pts, 5, seed).unwrap();
            c.sort_by(|a, b| a[0].total_cmp(&b[0]));
            let mut expected = pts.clone();
            expected.sort_by(|a, b| a[0].total_cmp(&b[0]));
            assert_eq!(c, expected);
        }
    }

    #[test]
    fn init_k_one_is_a_data_point_and_uniform() {
        let pts: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let mut counts = [0usize; 4];
        for seed in 0..4000 {
            let c = kmeanspp_init(&pts, 1, seed).unwrap();
            assert_eq!(c.len(), 1);
            counts[c[0][0] as usize] += 1;
        }
        for n in counts {
            assert!((n as f64 / 4000.0 - 0.25).abs() < 0.03, "{counts:?}");
        }
    }

    #[test]
    fn init_rejects_k_above_distinct_points() {
        let pts = vec![vec![1.0], vec![1.0], vec![2.0]];
        assert!(kmeanspp_init(&pts, 3, 0).is_err());
        assert!(kmeanspp_init(&pts, 2, 0).is_ok());
        assert!(kmeanspp_init(&pts, 0, 0).is_err());
    }

    #[test]
    fn init_prefers_opposite_corners() {
        // From any corner the D² masses are 1, 2, 1 for the other three, so
        // the diagonal partner is drawn with probability 1/2.
        let pts = square();
        let trials = 10_000;
        let mut diagonal = 0;
        for seed in 0..trials {
            let c = kmeanspp_init(&pts, 2, seed).unwrap();
            if sq_dist(&c[0], &c[1]) == 2.0 {
                diagonal += 1;
            }
        }
        let freq = diagonal as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.02, "{freq}");
        // Each of the two diagonal pairs (0.25) beats each adjacent pair (0.125).
        assert!(freq / 2.0 > (1.0 - freq) / 4.0);
    }

    #[test]
    fn init_is_deterministic() {
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![(i * 7 % 13) as f64, i as f64]).collect();
        assert_eq!(kmeanspp_init(&pts, 5, 9).unwrap(), kmeanspp_init(&pts, 5, 9).unwrap());
    }

    #[test]
    fn lloyd_on_k_equals_n_converges_immediately() {
        let pts = square();
        let m = lloyd(&pts, &pts, 100, 0.0).unwrap();
        assert_eq!(m.iterations_run, 1);
        assert_eq!(m.inertia, 0.0);
        assert_eq!(m.assignments, vec![0, 1, 2, 3]);
    }

    #[test]
    fn lloyd_rejects_zero_iterations() {
        let pts = square();
        assert!(lloyd(&pts, &pts[..2], 0, 1e-4).is_err());
        assert!(lloyd(&pts, &pts[..2], 10, -1.0).is_err());
    }

    #[test]
    fn lloyd_finds_blob_means() {
        let mut rng = rng::seeded(3);
        let normal = Normal::new(0.0, 0.5).unwrap();
        let centres = [[0.0, 0.0, 0.0], [20.0, 20.0, 20.0]];
        let mut pts = Vec::new();
        for c in &centres {
            for _ in 0..200 {
                pts.push(c.iter().map(|x| x + normal.sample(&mut rng)).collect::<Vec<f64>>());
            }
        }
        let blob_mean = |range: std::ops::Range<usize>| -> Vec<f64> {
            (0..3)
                .map(|d| pts[range.clone()].iter().map(|p| p[d]).sum::<f64>() / range.len() as f64)
                .collect()
        };
        let expected = [blob_mean(0..200), blob_mean(200..400)];
        let init = kmeanspp_init(&pts, 2, 11).unwrap();
        let m = lloyd(&pts, &init, 100, 1e-6).unwrap();
        for e in &expected {
            let nearest = m.centroids.iter().map(|c| dist(c, e)).fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-6, "{nearest}");
        }
    }

    #[test]
    fn lloyd_repairs_empty_cluster() {
        // Centroid 1 starts far away and captures nothing.
        let pts = vec![vec![0.0], vec![0.1], vec![5.0], vec![5.2]];
        let init = vec![vec![2.5], vec![100.0]];
        let m = lloyd(&pts, &init, 50, 0.0).unwrap();
        assert!(m.sizes().iter().all(|&s| s > 0));
        for (p, &a) in pts.iter().zip(&m.assignments) {
            let (best, _) = nearest(&m.centroids, p);
            assert_eq!(a, best);
        }
    }

    #[test]
    fn db_two_singletons_is_zero() {
        let pts = vec![vec![0.0, 0.0], vec![3.0, 4.0]];
        let m = lloyd(&pts, &pts, 10, 0.0).unwrap();
        assert_eq!(davies_bouldin(&pts, &m).unwrap(), 0.0);
    }

    #[test]
    fn db_degenerate_and_k1() {
        let pts = vec![vec![0.0], vec![1.0]];
        let m = ClusterModel {
            k: 2,
            centroids: vec![vec![0.5], vec![0.5]],
            assignments: vec![0, 1],
            db_index: None,
            inertia: 0.5,
            iterations_run: 1,
            inertia_history: vec![],
        };
        assert!(matches!(davies_bouldin(&pts, &m), Err(Error::DegenerateCentroids(0, 1))));
        let one = lloyd(&pts, &pts[..1], 5, 0.0).unwrap();
        assert!(davies_bouldin(&pts, &one).is_err());
        assert_eq!(one.db_index, None);
    }

    #[test]
    fn assign_point_on_centroid_and_ties() {
        let m = ClusterModel {
            k: 5,
            centroids: vec![vec![10.0, 10.0], vec![0.0, 1.0], vec![9.0, -9.0], vec![4.0, 4.0], vec![0.0, -1.0]],
            assignments: vec![],
            db_index: None,
            inertia: 0.0,
            iterations_run: 0,
            inertia_history: vec![],
        };
        assert_eq!(assign(&m, &[4.0, 4.0]).unwrap(), 3);
        assert_eq!(assign(&m, &[0.0, 0.0]).unwrap(), 1);
        assert!(assign(&m, &[0.0]).is_err());
    }

    #[test]
    fn select_k_singleton_grid() {
        let pts: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 3) as f64 * 10.0 + (i as f64) * 0.01]).collect();
        let m = select_k(&pts, &[3], 1, &KMeansConfig::default()).unwrap();
        assert_eq!(m.k, 3);
        assert!(select_k(&pts, &[], 1, &KMeansConfig::default()).is_err());
        assert!(select_k(&pts, &[1, 3], 1, &KMeansConfig::default()).is_err());
    }

    #[test]
    fn target_grid_includes_256() {
        assert!(TARGET_SCALE_K_GRID.contains(&256));
    }
}
