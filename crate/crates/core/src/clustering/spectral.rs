use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{s, Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::kmeans::kmeans_rows;
use super::ClusterAssignment;
use crate::error::{Error, Result};
use crate::geometry::{KdTree, Point};

/// Clouds up to this size use a dense eigensolver; larger ones a restarted
/// block Krylov method on the sparse graph.
pub const DENSE_LIMIT: usize = 800;

const KRYLOV_DIM: usize = 80;
const MAX_RESTARTS: usize = 60;
const RESIDUAL_TOL: f64 = 1e-4;

/// Symmetrized k-nearest-neighbour connectivity `½(C + Cᵀ)`, self included;
/// row `i` lists `(j, weight)` sorted by `j`.
pub fn knn_affinity(points: &[Point], n_neighbors: usize) -> Vec<Vec<(usize, f64)>> {
    let tree = KdTree::build(points);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); points.len()];
    for (i, p) in points.iter().enumerate() {
        for (j, _) in tree.knn(p, n_neighbors) {
            rows[i].push((j, 0.5));
            rows[j].push((i, 0.5));
        }
    }
    for row in &mut rows {
        row.sort_unstable_by_key(|e| e.0);
        row.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
    }
    rows
}

struct Graph {
    rows: Vec<Vec<(usize, f64)>>,
    inv_sqrt_deg: Vec<f64>,
}

impl Graph {
    fn new(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let inv_sqrt_deg = rows.iter().map(|r| 1.0 / r.iter().map(|e| e.1).sum::<f64>().sqrt()).collect();
        Graph { rows, inv_sqrt_deg }
    }

    fn n(&self) -> usize {
        self.rows.len()
    }

    /// `½(I + D^{-1/2} A D^{-1/2}) x`: its top eigenvectors are the bottom
    /// eigenvectors of the normalized Laplacian, and it is positive
    /// semidefinite.
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let s: f64 = row.iter().map(|&(j, w)| w * self.inv_sqrt_deg[j] * x[j]).sum();
                0.5 * (x[i] + self.inv_sqrt_deg[i] * s)
            })
            .collect()
    }

    fn laplacian(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut l = DMatrix::identity(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                l[(i, j)] -= w * self.inv_sqrt_deg[i] * self.inv_sqrt_deg[j];
            }
        }
        l
    }
}

/// Orthonormalizes the columns of `w` against the columns of `basis` (two
/// passes) and among themselves, dropping dependent columns.
fn orthonormalize_block(mut w: Array2<f64>, basis: ArrayView2<f64>) -> Vec<Array1<f64>> {
    if basis.ncols() > 0 {
        for _ in 0..2 {
            let c = basis.t().dot(&w);
            w -= &basis.dot(&c);
        }
    }
    let mut out: Vec<Array1<f64>> = Vec::new();
    for col in w.columns() {
        let before = col.dot(&col).sqrt();
        let mut v = col.to_owned();
        for _ in 0..2 {
            for u in &out {
                let c = u.dot(&v);
                v.scaled_add(-c, u);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-10 * before.max(f64::MIN_POSITIVE) {
            v /= norm;
            out.push(v);
        }
    }
    out
}

/// Top `k` eigenvectors of the graph operator by restarted block Krylov
/// iteration with Rayleigh–Ritz extraction.
fn krylov_top(g: &Graph, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = g.n();
    let b = (k + 2).min(n);
    let dim = KRYLOV_DIM.max(3 * b).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start = Array2::from_shape_simple_fn((n, b), || StandardNormal.sample(&mut rng));
    let mut basis = Array2::zeros((n, dim));
    let mut images = Array2::zeros((n, dim));
    let mut best = Vec::new();
    for _ in 0..MAX_RESTARTS {
        let mut m = 0;
        let mut block = start;
        while m < dim {
            let mut fresh = orthonormalize_block(block, basis.slice(s![.., ..m]));
            fresh.truncate(dim - m);
            if fresh.is_empty() {
                break;
            }
            let first = m;
            for v in &fresh {
                let tv = g.apply(v.as_slice().expect("owned vectors are contiguous"));
                basis.column_mut(m).assign(v);
                images.column_mut(m).assign(&Array1::from(tv));
                m += 1;
            }
            block = images.slice(s![.., first..m]).to_owned();
        }
        let q = basis.slice(s![.., ..m]);
        let tq = images.slice(s![.., ..m]);
        let h = q.t().dot(&tq);
        let eig = SymmetricEigen::new(DMatrix::from_fn(m, m, |i, j| 0.5 * (h[[i, j]] + h[[j, i]])));
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
        let keep = b.min(m);
        let y = Array2::from_shape_fn((m, keep), |(i, j)| eig.eigenvectors[(i, order[j])]);
        let ritz = q.dot(&y);
        let t_ritz = tq.dot(&y);
        let worst = (0..k.min(keep))
            .map(|j| {
                let r = &t_ritz.column(j) - &(&ritz.column(j) * eig.eigenvalues[order[j]]);
                r.dot(&r).sqrt()
            })
            .fold(0.0, f64::max);
        best = (0..k.min(keep)).map(|j| ritz.column(j).to_vec()).collect();
        if worst < RESIDUAL_TOL || m == n {
            break;
        }
        start = ritz;
    }
    best
}

/// Eigenvalues of the normalized Laplacian of the k-NN graph, ascending.
/// Dense; meant for small clouds.
pub fn normalized_laplacian_spectrum(points: &[Point], n_neighbors: usize) -> Vec<f64> {
    let g = Graph::new(knn_affinity(points, n_neighbors));
    let mut ev: Vec<f64> = SymmetricEigen::new(g.laplacian()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Spectral clustering: k-NN affinity, normalized Laplacian, its `k` lowest
/// eigenvectors rescaled by `D^{-1/2}`, then k-means on the embedding.
pub fn spectral(points: &[Point], k: usize, seed: u64, n_neighbors: usize) -> Result<ClusterAssignment> {
    let n = points.len();
    if k == 0 || k > n || n_neighbors == 0 {
        return Err(Error::validation(format!(
            "spectral needs 1 <= k <= n and n_neighbors >= 1, got k = {k}, n = {n}, n_neighbors = {n_neighbors}"
        )));
    }
    if k == 1 {
        return Ok(ClusterAssignment::from_raw(&vec![0; n], vec![false; n]));
    }
    let g = Graph::new(knn_affinity(points, n_neighbors));
    let vectors: Vec<Vec<f64>> = if n <= DENSE_LIMIT {
        let eig = SymmetricEigen::new(g.laplacian());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        order.iter().take(k).map(|&c| eig.eigenvectors.column(c).iter().copied().collect()).collect()
    } else {
        krylov_top(&g, k, seed)
    };
    let mut embedding = vec![0.0; n * k];
    for (c, v) in vectors.iter().enumerate() {
        for i in 0..n {
            embedding[i * k + c] = v[i] * g.inv_sqrt_deg[i];
        }
    }
    let labels = kmeans_rows(&embedding, k, k, seed, 10);
    let raw: Vec<i64> = labels.iter().map(|&l| l as i64).collect();
    Ok(ClusterAssignment::from_raw(&raw, vec![false; n]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(cx: f64, side: usize, step: f64) -> Vec<Point> {
        (0..side * side)
            .map(|i| Point::new(cx + step * (i % side) as f64, step * (i / side) as f64, 0.0))
            .collect()
    }

    /// Connected components of the affinity graph.
    fn components(points: &[Point], n_neighbors: usize) -> Vec<i64> {
        let rows = knn_affinity(points, n_neighbors);
        let mut comp = vec![-1i64; points.len()];
        let mut next = 0;
        for s in 0..points.len() {
            if comp[s] >= 0 {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = next;
            while let Some(i) = stack.pop() {
                for &(j, _) in &rows[i] {
                    if comp[j] < 0 {
                        comp[j] = next;
                        stack.push(j);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    #[test]
    fn affinity_is_symmetric() {
        let p = blob(0.0, 4, 1.0);
        let rows = knn_affinity(&p, 3);
        for (i, row) in rows.iter().enumerate() {
            for &(j, w) in row {
                assert!(rows[j].iter().any(|&(i2, w2)| i2 == i && w2 == w));
                assert!(w == 0.5 || w == 1.0);
            }
        }
    }

    #[test]
    fn two_blobs_recovered_exactly() {
        let mut p = blob(0.0, 6, 1.0);
        p.extend(blob(30.0, 6, 1.0));
        let got = spectral(&p, 2, 5, 10).unwrap();
        let want = ClusterAssignment::from_raw(&components(&p, 10), vec![false; p.len()]);
        assert_eq!(want.n_clusters, 2);
        assert_eq!(got.labels, want.labels);
    }

    #[test]
    fn large_blobs_use_the_krylov_path() {
        let mut p = blob(0.0, 22, 0.5);
        p.extend(blob(40.0, 22, 0.5));
        assert!(p.len() > DENSE_LIMIT);
        let got = spectral(&p, 2, 1, 10).unwrap();
        let want = ClusterAssignment::from_raw(&components(&p, 10), vec![false; p.len()]);
        assert_eq!(got.labels, want.labels);
    }

    #[test]
    fn single_cluster_and_bad_k() {
        let p = blob(0.0, 4, 1.0);
        let a = spectral(&p, 1, 0, 10).unwrap();
        assert_eq!(a.n_clusters, 1);
        assert!(spectral(&p, 17, 0, 10).unwrap_err().is_validation());
    }

    #[test]
    fn zero_eigenvalue_multiplicity_counts_components() {
        let mut p = blob(0.0, 4, 1.0);
        p.extend(blob(50.0, 4, 1.0));
        p.extend(blob(100.0, 3, 1.0));
        let ev = normalized_laplacian_spectrum(&p, 5);
        let zeros = ev.iter().filter(|&&x| x.abs() < 1e-9).count();
        let n_comp = components(&p, 5).iter().max().unwrap() + 1;
        assert_eq!(zeros as i64, n_comp);
        assert_eq!(n_comp, 3);
    }

    #[test]
    fn translation_does_not_change_labels() {
        let mut p = blob(0.0, 5, 1.0);
        p.extend(blob(20.0, 5, 1.0));
        let q: Vec<Point> = p.iter().map(|a| Point::new(a.x + 64.0, a.y - 32.0, 8.0)).collect();
        assert_eq!(spectral(&p, 2, 3, 6).unwrap(), spectral(&q, 2, 3, 6).unwrap());
    }
}
