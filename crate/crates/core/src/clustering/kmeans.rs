use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ClusterAssignment;
use crate::error::{Error, Result};
use crate::geometry::Point;

fn flat(points: &[Point]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

fn d2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding over `n = data.len() / d` rows.
fn seed_centroids(data: &[f64], d: usize, k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let n = data.len() / d;
    let first = rng.random_range(0..n);
    let mut centroids = data[first * d..(first + 1) * d].to_vec();
    let mut nearest: Vec<f64> = (0..n).map(|i| d2(&data[i * d..(i + 1) * d], &centroids[..d])).collect();
    let mut chosen = vec![first];
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            // Rounding can leave the target past the last positive weight.
            if nearest[pick] == 0.0 {
                pick = nearest.iter().rposition(|&w| w > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            // All remaining points coincide with chosen centroids.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(pick);
        let c = data[pick * d..(pick + 1) * d].to_vec();
        for (i, w) in nearest.iter_mut().enumerate() {
            *w = w.min(d2(&data[i * d..(i + 1) * d], &c));
        }
        centroids.extend(c);
    }
    centroids
}

fn assign(data: &[f64], d: usize, centroids: &[f64], labels: &mut [usize]) -> f64 {
    let k = centroids.len() / d;
    let mut sse = 0.0;
    for (i, l) in labels.iter_mut().enumerate() {
        let row = &data[i * d..(i + 1) * d];
        let (best, bd) = (0..k)
            .map(|j| (j, d2(row, &centroids[j * d..(j + 1) * d])))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        *l = best;
        sse += bd;
    }
    sse
}

/// Lloyd iterations; returns labels, centroids and the SSE after each
/// assignment step.
pub(crate) fn lloyd(
    data: &[f64],
    d: usize,
    k: usize,
    rng: &mut impl Rng,
    max_iter: usize,
    tol: f64,
) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = data.len() / d;
    let mut centroids = seed_centroids(data, d, k, rng);
    let mut labels = vec![0; n];
    let mut history = Vec::new();
    for _ in 0..max_iter.max(1) {
        history.push(assign(data, d, &centroids, &mut labels));
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for c in 0..d {
                sums[l * d + c] += data[i * d + c];
            }
        }
        let mut shift: f64 = 0.0;
        for j in 0..k {
            // An empty cluster keeps its centroid.
            if counts[j] == 0 {
                continue;
            }
            let new: Vec<f64> = sums[j * d..(j + 1) * d].iter().map(|s| s / counts[j] as f64).collect();
            shift = shift.max(d2(&new, &centroids[j * d..(j + 1) * d]));
            centroids[j * d..(j + 1) * d].copy_from_slice(&new);
        }
        if shift.sqrt() < tol {
            break;
        }
    }
    history.push(assign(data, d, &centroids, &mut labels));
    (labels, centroids, history)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: ClusterAssignment,
    /// Centroid of each cluster id of `assignment`.
    pub centroids: Vec<Point>,
    /// Sum of squared distances after every assignment step.
    pub sse_history: Vec<f64>,
}

fn check_k(k: usize, n: usize, what: &str) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::validation(format!("{what} needs 1 <= k <= n, got k = {k}, n = {n}")));
    }
    Ok(())
}

pub fn kmeans_detailed(points: &[Point], k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<KMeansResult> {
    check_k(k, points.len(), "k-means")?;
    let data = flat(points);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (labels, centroids, sse_history) = lloyd(&data, 3, k, &mut rng, max_iter, tol);
    let raw: Vec<i64> = labels.iter().map(|&l| l as i64).collect();
    let assignment = ClusterAssignment::from_raw(&raw, vec![false; points.len()]);
    let mut ordered = vec![Point::origin(); assignment.n_clusters];
    for (i, &l) in labels.iter().enumerate() {
        let c = &centroids[l * 3..l * 3 + 3];
        ordered[assignment.labels[i] as usize] = Point::new(c[0], c[1], c[2]);
    }
    Ok(KMeansResult { assignment, centroids: ordered, sse_history })
}

/// Lloyd's algorithm from k-means++ seeding.
pub fn kmeans(points: &[Point], k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<ClusterAssignment> {
    Ok(kmeans_detailed(points, k, seed, max_iter, tol)?.assignment)
}

/// Best of `n_init` k-means runs on arbitrary-dimension rows.
pub(crate) fn kmeans_rows(data: &[f64], d: usize, k: usize, seed: u64, n_init: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..n_init.max(1) {
        let (labels, _, hist) = lloyd(data, d, k, &mut rng, 300, 1e-9);
        let sse = *hist.last().expect("at least one assignment");
        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
            best = Some((sse, labels));
        }
    }
    best.expect("n_init >= 1").1
}

/// Membership of every point in every centroid; `result[i][j]`.
///
/// A point on a centroid belongs to it fully.
pub fn fuzzy_memberships(points: &[Point], centroids: &[Point], fuzzifier: f64) -> Vec<Vec<f64>> {
    let power = 1.0 / (fuzzifier - 1.0);
    points
        .iter()
        .map(|p| {
            let dist: Vec<f64> = centroids.iter().map(|c| (p - c).norm_squared()).collect();
            if let Some(hit) = dist.iter().position(|&x| x == 0.0) {
                let mut u = vec![0.0; centroids.len()];
                u[hit] = 1.0;
                return u;
            }
            dist.iter()
                .map(|&dj| 1.0 / dist.iter().map(|&dl| (dj / dl).powf(power)).sum::<f64>())
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyResult {
    pub assignment: ClusterAssignment,
    /// `memberships[i][j]`; column `j < n_clusters` is cluster id `j`, any
    /// centroid that wins no point follows.
    pub memberships: Vec<Vec<f64>>,
    /// Same column order as `memberships`.
    pub centroids: Vec<Point>,
}

/// Fuzzy c-means. Hard labels are the argmax membership; a point whose
/// largest membership is below `threshold` is flagged uncertain.
pub fn fuzzy_cmeans(
    points: &[Point],
    c: usize,
    fuzzifier: f64,
    threshold: f64,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<FuzzyResult> {
    check_k(c, points.len(), "c-means")?;
    if !(fuzzifier > 1.0) {
        return Err(Error::validation(format!("fuzzifier must exceed 1, got {fuzzifier}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = seed_centroids(&flat(points), 3, c, &mut rng);
    let mut centroids: Vec<Point> = init.chunks(3).map(|v| Point::new(v[0], v[1], v[2])).collect();
    let mut u = fuzzy_memberships(points, &centroids, fuzzifier);
    for _ in 0..max_iter {
        for (j, cj) in centroids.iter_mut().enumerate() {
            let mut num = nalgebra::Vector3::zeros();
            let mut den = 0.0;
            for (p, ui) in points.iter().zip(&u) {
                let w = ui[j].powf(fuzzifier);
                num += p.coords * w;
                den += w;
            }
            if den > 0.0 {
                *cj = Point::from(num / den);
            }
        }
        let next = fuzzy_memberships(points, &centroids, fuzzifier);
        let change = u
            .iter()
            .zip(&next)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        u = next;
        if change < tol {
            break;
        }
    }
    let hard: Vec<i64> = u
        .iter()
        .map(|row| row.iter().enumerate().fold((0, f64::MIN), |a, (j, &x)| if x > a.1 { (j, x) } else { a }).0 as i64)
        .collect();
    let uncertain = u.iter().map(|row| row.iter().cloned().fold(0.0, f64::max) < threshold).collect();
    let assignment = ClusterAssignment::from_raw(&hard, uncertain);
    let mut order: Vec<usize> = Vec::with_capacity(c);
    for (i, &h) in hard.iter().enumerate() {
        if order.len() == assignment.labels[i] as usize {
            order.push(h as usize);
        }
    }
    let unused: Vec<usize> = (0..c).filter(|j| !order.contains(j)).collect();
    order.extend(unused);
    let memberships = u.iter().map(|row| order.iter().map(|&j| row[j]).collect()).collect();
    let centroids = order.iter().map(|&j| centroids[j]).collect();
    Ok(FuzzyResult { assignment, memberships, centroids })
}
