//! Classical k-means machinery: k-means++ seeding, assignment, numeric
//! centroid updates, the objective, and the Lloyd iteration.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{
    dist2_unchecked, euclidean_dist2, mean_vector, ClusterState, EmbeddingVector, InitKind,
    RunReport,
};

/// Seeded, counter-based random stream. Identical seeds produce identical
/// sequences on every platform, and independent streams can be split off for
/// concurrent work without perturbing the main clustering stream.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// An independent stream derived from the same seed.
    pub fn split(&self, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        Self {
            seed: self.seed,
            rng,
        }
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Uniform draw in `[0, hi)`.
    pub fn f64_below(&mut self, hi: f64) -> f64 {
        self.rng.random_range(0.0..hi)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn f64_in(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }
}

fn check_points(points: &[EmbeddingVector]) -> Result<usize> {
    let first = points.first().ok_or(Error::EmptyInput("points"))?;
    let dim = first.dim();
    for p in points {
        if p.dim() != dim {
            return Err(Error::DimMismatch {
                left: dim,
                right: p.dim(),
            });
        }
    }
    Ok(dim)
}

fn count_distinct(points: &[EmbeddingVector]) -> usize {
    let mut distinct: Vec<&EmbeddingVector> = Vec::new();
    for p in points {
        if !distinct.iter().any(|q| *q == p) {
            distinct.push(p);
        }
    }
    distinct.len()
}

/// k-means++ seeding: first centroid uniform, each subsequent one drawn with
/// probability proportional to squared distance from the nearest centroid
/// chosen so far. Never selects a duplicate while distinct points remain.
pub fn kmeanspp_init(
    points: &[EmbeddingVector],
    k: usize,
    rng: &mut RngState,
) -> Result<Vec<EmbeddingVector>> {
    check_points(points)?;
    if k == 0 {
        return Err(Error::EmptyInput("k must be >= 1"));
    }
    let distinct = count_distinct(points);
    if k > distinct {
        return Err(Error::KExceedsDistinct { k, distinct });
    }

    let n = points.len();
    let mut centroids: Vec<EmbeddingVector> = Vec::with_capacity(k);
    centroids.push(points[rng.index(n)].clone());

    let mut min_d2: Vec<f64> = points
        .iter()
        .map(|p| dist2_unchecked(p, &centroids[0]))
        .collect();

    while centroids.len() < k {
        let total: f64 = min_d2.iter().sum();
        let chosen = if total > 0.0 {
            let mut r = rng.f64_below(total);
            let mut pick = None;
            for (i, &w) in min_d2.iter().enumerate() {
                if w > 0.0 {
                    if r < w {
                        pick = Some(i);
                        break;
                    }
                    r -= w;
                }
            }
            // Rounding can exhaust r without a pick; take the last
            // positive-weight point.
            pick.unwrap_or_else(|| {
                min_d2
                    .iter()
                    .enumerate()
                    .rev()
                    .find(|(_, &w)| w > 0.0)
                    .map(|(i, _)| i)
                    .expect("positive total implies a positive weight")
            })
        } else {
            // All remaining points coincide with chosen centroids; the
            // distinct-count precondition makes this unreachable.
            return Err(Error::KExceedsDistinct { k, distinct });
        };
        centroids.push(points[chosen].clone());
        let last = centroids.last().expect("just pushed");
        for (i, p) in points.iter().enumerate() {
            let d2 = dist2_unchecked(p, last);
            if d2 < min_d2[i] {
                min_d2[i] = d2;
            }
        }
    }
    Ok(centroids)
}

/// Map each point to its nearest centroid by squared Euclidean distance,
/// breaking ties toward the lowest cluster index.
pub fn assign(points: &[EmbeddingVector], centroids: &[EmbeddingVector]) -> Result<Vec<usize>> {
    let dim = check_points(points)?;
    if centroids.is_empty() {
        return Err(Error::EmptyInput("centroids"));
    }
    for c in centroids {
        if c.dim() != dim {
            return Err(Error::DimMismatch {
                left: dim,
                right: c.dim(),
            });
        }
    }
    Ok(points
        .iter()
        .map(|p| {
            let mut best = 0usize;
            let mut best_d2 = f64::INFINITY;
            for (j, c) in centroids.iter().enumerate() {
                let d2 = dist2_unchecked(p, c);
                if d2 < best_d2 {
                    best_d2 = d2;
                    best = j;
                }
            }
            best
        })
        .collect())
}

/// Group point indices by cluster, preserving ascending point order within
/// each cluster.
pub(crate) fn members_by_cluster(assignments: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); k];
    for (i, &a) in assignments.iter().enumerate() {
        members[a].push(i);
    }
    members
}

/// Re-seed empty clusters at the point farthest from its assigned centroid
/// (measured against the centroids the assignment was made with). Each
/// repaired cluster consumes its point so later repairs pick fresh ones.
/// Returns the repaired cluster indices.
pub(crate) fn repair_empty_clusters(
    points: &[EmbeddingVector],
    assignments: &[usize],
    assignment_centroids: &[EmbeddingVector],
    centroids: &mut [EmbeddingVector],
    counts: &[usize],
) -> Vec<usize> {
    let empties: Vec<usize> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 0)
        .map(|(j, _)| j)
        .collect();
    if empties.is_empty() {
        return empties;
    }
    let mut used = vec![false; points.len()];
    for &j in &empties {
        let mut far_i = None;
        let mut far_d2 = -1.0;
        for (i, p) in points.iter().enumerate() {
            if used[i] {
                continue;
            }
            let d2 = dist2_unchecked(p, &assignment_centroids[assignments[i]]);
            if d2 > far_d2 {
                far_d2 = d2;
                far_i = Some(i);
            }
        }
        if let Some(i) = far_i {
            centroids[j] = points[i].clone();
            used[i] = true;
        }
    }
    empties
}

/// Mean update per Lloyd's algorithm: each non-empty cluster's centroid
/// becomes the mean of its members; empty clusters are re-seeded at the point
/// farthest from its assigned centroid.
pub fn update_numeric_centroids(
    points: &[EmbeddingVector],
    assignments: &[usize],
    k: usize,
    previous_centroids: &[EmbeddingVector],
) -> Result<Vec<EmbeddingVector>> {
    check_points(points)?;
    if assignments.len() != points.len() {
        return Err(Error::LabelLength {
            left: assignments.len(),
            right: points.len(),
        });
    }
    for &a in assignments {
        if a >= k {
            return Err(Error::AssignmentOutOfRange { cluster: a, k });
        }
    }
    let members = members_by_cluster(assignments, k);
    let counts: Vec<usize> = members.iter().map(|m| m.len()).collect();
    let mut centroids = previous_centroids.to_vec();
    for (j, m) in members.iter().enumerate() {
        if !m.is_empty() {
            let refs: Vec<&EmbeddingVector> = m.iter().map(|&i| &points[i]).collect();
            centroids[j] = mean_vector(&refs)?;
        }
    }
    repair_empty_clusters(points, assignments, previous_centroids, &mut centroids, &counts);
    Ok(centroids)
}

/// Within-cluster sum of squared distances.
pub fn objective(
    points: &[EmbeddingVector],
    assignments: &[usize],
    centroids: &[EmbeddingVector],
) -> Result<f64> {
    if assignments.len() != points.len() {
        return Err(Error::LabelLength {
            left: assignments.len(),
            right: points.len(),
        });
    }
    let mut total = 0.0;
    for (p, &a) in points.iter().zip(assignments) {
        let c = centroids
            .get(a)
            .ok_or(Error::AssignmentOutOfRange {
                cluster: a,
                k: centroids.len(),
            })?;
        total += euclidean_dist2(p, c)?;
    }
    Ok(total)
}

fn state_from(
    points: &[EmbeddingVector],
    centroids: Vec<EmbeddingVector>,
    assignments: Vec<usize>,
    summaries: Vec<Option<String>>,
) -> ClusterState {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for &a in &assignments {
        counts[a] += 1;
    }
    let _ = points;
    ClusterState {
        centroids,
        assignments,
        counts,
        summaries,
    }
}

/// One Lloyd iteration: numeric centroid update from the current
/// assignments, then reassignment of every point.
pub fn lloyd_step(points: &[EmbeddingVector], state: &ClusterState) -> Result<ClusterState> {
    let k = state.k();
    let centroids = update_numeric_centroids(points, &state.assignments, k, &state.centroids)?;
    let assignments = assign(points, &centroids)?;
    Ok(state_from(points, centroids, assignments, state.summaries.clone()))
}

/// Plain k-means: k-means++ seeding followed by Lloyd iterations. With
/// `early_stop`, the loop ends once assignments stop changing; the report
/// records how many iterations actually ran.
pub fn run_kmeans(
    points: &[EmbeddingVector],
    k: usize,
    total_iters: usize,
    rng: &mut RngState,
    early_stop: bool,
) -> Result<(ClusterState, RunReport)> {
    if total_iters == 0 {
        return Err(Error::EmptyInput("total_iters must be >= 1"));
    }
    let seed = rng.seed();
    let mut centroids = kmeanspp_init(points, k, rng)?;
    let mut assignments = assign(points, &centroids)?;
    let mut trace = vec![objective(points, &assignments, &centroids)?];
    let mut repair_iterations = Vec::new();
    let mut iterations_run = 1;

    for t in 2..=total_iters {
        let counts_before = {
            let mut c = vec![0usize; k];
            for &a in &assignments {
                c[a] += 1;
            }
            c
        };
        let next_centroids = update_numeric_centroids(points, &assignments, k, &centroids)?;
        if counts_before.contains(&0) {
            repair_iterations.push(t);
        }
        let next_assignments = assign(points, &next_centroids)?;
        let unchanged = next_assignments == assignments;
        centroids = next_centroids;
        assignments = next_assignments;
        trace.push(objective(points, &assignments, &centroids)?);
        iterations_run = t;
        if early_stop && unchanged {
            break;
        }
    }

    let state = state_from(points, centroids, assignments, vec![None; k]);
    let report = RunReport {
        seed,
        init: InitKind::KMeansPlusPlus,
        nominal_iterations: total_iters,
        iterations_run,
        objective_trace: trace,
        summary_events: Vec::new(),
        repair_iterations,
        notes: Vec::new(),
        final_state: state.clone(),
    };
    Ok((state, report))
}
