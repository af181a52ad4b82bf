//! Lloyd's k-means with k-means++ seeding and seeded restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansConfig {
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
    pub max_iter: usize,
    /// Independent k-means++ restarts; the lowest inertia wins.
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            tol: 1e-6,
            max_iter: 300,
            restarts: 10,
        }
    }
}

impl KMeansConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol >= 0.0) || self.max_iter == 0 || self.restarts == 0 {
            return Err(Error::invalid("kmeans needs tol >= 0, max_iter >= 1 and restarts >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances from each training point to its nearest centroid.
    pub inertia: f64,
    pub seed: u64,
    pub iterations_run: usize,
    /// Inertia after every assignment step of the winning restart, plus the
    /// final value when the run stopped right after a centroid update.
    #[serde(default)]
    pub inertia_history: Vec<f64>,
}

impl KMeansModel {
    pub fn dims(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the closest centroid (lowest index on ties) and the squared distance.
pub(crate) fn nearest(centroids: &[Vec<f64>], point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(c, point);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

pub fn assign_cluster(model: &KMeansModel, point: &[f64]) -> Result<usize> {
    if point.len() != model.dims() {
        return Err(Error::Shape(format!(
            "point has {} dims, centroids have {}",
            point.len(),
            model.dims()
        )));
    }
    Ok(nearest(&model.centroids, point).0)
}

/// Inertia of `points` under nearest-centroid assignment.
pub fn inertia(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> f64 {
    points.iter().map(|p| nearest(centroids, p).1).sum()
}

fn plus_plus_seeds(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                acc += w;
                chosen = Some(i);
                if acc > target {
                    break;
                }
            }
            chosen.expect("positive total implies a positive weight")
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].clone();
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

struct Run {
    centroids: Vec<Vec<f64>>,
    inertia: f64,
    iterations: usize,
    history: Vec<f64>,
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, cfg: &KMeansConfig) -> Run {
    let n = points.len();
    let k = centroids.len();
    let dims = points[0].len();
    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut stopped_after_update = false;

    for _ in 0..cfg.max_iter {
        iterations += 1;
        let mut changed = false;
        let mut total = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (j, d) = nearest(&centroids, p);
            total += d;
            if labels[i] != j {
                labels[i] = j;
                changed = true;
            }
        }
        history.push(total);
        if !changed {
            stopped_after_update = false;
            break;
        }

        let mut sums = vec![vec![0.0; dims]; k];
        let mut counts = vec![0usize; k];
        for (p, &j) in points.iter().zip(&labels) {
            counts[j] += 1;
            for (s, x) in sums[j].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut shift: f64 = 0.0;
        let mut reseeded = vec![false; n];
        for j in 0..k {
            let next = if counts[j] > 0 {
                sums[j].iter().map(|s| s / counts[j] as f64).collect()
            } else {
                // Empty cluster: move it onto the point worst served by its own centroid.
                let far = (0..n)
                    .filter(|&i| !reseeded[i])
                    .map(|i| (i, squared_distance(&points[i], &centroids[labels[i]])))
                    .fold((usize::MAX, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc })
                    .0;
                reseeded[far] = true;
                points[far].clone()
            };
            shift = shift.max(squared_distance(&centroids[j], &next).sqrt());
            centroids[j] = next;
        }
        stopped_after_update = true;
        if shift < cfg.tol {
            break;
        }
    }

    let final_inertia = inertia(points, &centroids);
    if stopped_after_update {
        history.push(final_inertia);
    }
    Run {
        centroids,
        inertia: final_inertia,
        iterations,
        history,
    }
}

/// Fits `k` centroids to already-scaled `points`.
pub fn kmeans_fit(points: &[Vec<f64>], k: usize, seed: u64, cfg: &KMeansConfig) -> Result<KMeansModel> {
    cfg.validate()?;
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if points.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} points cannot form {k} clusters",
            points.len()
        )));
    }
    let dims = points[0].len();
    if let Some(bad) = points.iter().find(|p| p.len() != dims) {
        return Err(Error::Shape(format!(
            "point with {} dims among {dims}-dim points",
            bad.len()
        )));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("kmeans input holds non-finite values"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Run> = None;
    for _ in 0..cfg.restarts {
        let seeds = plus_plus_seeds(points, k, &mut rng);
        let run = lloyd(points, seeds, cfg);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let best = best.expect("restarts >= 1");
    Ok(KMeansModel {
        k,
        centroids: best.centroids,
        inertia: best.inertia,
        seed,
        iterations_run: best.iterations,
        inertia_history: best.history,
    })
}
