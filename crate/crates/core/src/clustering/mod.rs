//! Instance separation: five clustering algorithms behind one interface.
//!
//! Every algorithm returns a [`ClusterAssignment`] whose ids are renumbered in
//! order of first appearance, so equal partitions give equal label vectors.

mod density;
mod kmeans;
mod spectral;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, PointCloud};

pub use density::{dbscan, optics, optics_ordering, xi_clusters, OpticsOrdering};
pub use kmeans::{fuzzy_cmeans, fuzzy_memberships, kmeans, kmeans_detailed, FuzzyResult, KMeansResult};
pub use spectral::{knn_affinity, normalized_laplacian_spectrum, spectral, DENSE_LIMIT};

/// Label of points that belong to no cluster.
pub const NOISE: i32 = -1;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// Cluster id per point, or [`NOISE`].
    pub labels: Vec<i32>,
    pub uncertain: Vec<bool>,
    pub n_clusters: usize,
    /// Wall-clock seconds; zero until set by [`cluster`].
    pub runtime: f64,
}

impl ClusterAssignment {
    /// Renumbers non-noise ids contiguously in order of first appearance.
    pub fn from_raw(raw: &[i64], uncertain: Vec<bool>) -> Self {
        let (labels, n) = compact(raw);
        ClusterAssignment { labels, uncertain, n_clusters: n, runtime: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Point indices of each cluster, skipping noise and uncertain points.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, &l) in self.labels.iter().enumerate() {
            if l != NOISE && !self.uncertain[i] {
                out[l as usize].push(i);
            }
        }
        out
    }
}

/// Maps negative ids to [`NOISE`] and the rest to `0..n` by first appearance.
fn compact(raw: &[i64]) -> (Vec<i32>, usize) {
    let mut map = HashMap::new();
    let labels = raw
        .iter()
        .map(|&r| {
            if r < 0 {
                NOISE
            } else {
                let next = map.len() as i32;
                *map.entry(r).or_insert(next)
            }
        })
        .collect();
    (labels, map.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "k-means")]
    KMeans,
    #[serde(rename = "c-means")]
    CMeans,
    #[serde(rename = "dbscan")]
    Dbscan,
    #[serde(rename = "optics")]
    Optics,
    #[serde(rename = "spectral")]
    Spectral,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::KMeans, Method::CMeans, Method::Dbscan, Method::Optics, Method::Spectral];

    pub fn name(self) -> &'static str {
        match self {
            Method::KMeans => "k-means",
            Method::CMeans => "c-means",
            Method::Dbscan => "dbscan",
            Method::Optics => "optics",
            Method::Spectral => "spectral",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown clustering method {s:?}")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters of all methods; each method reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterParams {
    /// Cluster count for k-means, c-means and spectral. Must be given.
    pub k: Option<usize>,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub fuzzifier: f64,
    /// c-means points whose largest membership is below this are uncertain.
    pub membership_threshold: f64,
    pub eps: f64,
    /// DBSCAN core threshold, the point itself included.
    pub min_pts: usize,
    /// OPTICS core threshold; also the ξ-region tolerance.
    pub optics_min_pts: usize,
    pub xi: f64,
    /// OPTICS neighbourhood cap; infinite means unbounded.
    pub max_eps: f64,
    /// Smallest OPTICS cluster; defaults to `optics_min_pts`.
    pub min_cluster_size: Option<usize>,
    pub n_neighbors: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            k: None,
            seed: 0,
            max_iter: 300,
            tol: 1e-6,
            fuzzifier: 2.0,
            membership_threshold: 0.6,
            eps: 0.3,
            min_pts: 8,
            optics_min_pts: 30,
            xi: 0.5,
            max_eps: 1.0,
            min_cluster_size: None,
            n_neighbors: 10,
        }
    }
}

impl ClusterParams {
    fn need_k(&self, method: Method) -> Result<usize> {
        self.k
            .ok_or_else(|| Error::validation(format!("{method} needs an explicit cluster count k")))
    }
}

/// Runs `method` and records its wall-clock time.
pub fn cluster(points: &[Point], method: Method, params: &ClusterParams) -> Result<ClusterAssignment> {
    let start = Instant::now();
    let mut out = match method {
        Method::KMeans => kmeans(points, params.need_k(method)?, params.seed, params.max_iter, params.tol)?,
        Method::CMeans => {
            fuzzy_cmeans(
                points,
                params.need_k(method)?,
                params.fuzzifier,
                params.membership_threshold,
                params.seed,
                params.max_iter,
                params.tol,
            )?
            .assignment
        }
        Method::Dbscan => dbscan(points, params.eps, params.min_pts)?,
        Method::Optics => optics(points, params.optics_min_pts, params.xi, params.max_eps, params.min_cluster_size)?,
        Method::Spectral => spectral(points, params.need_k(method)?, params.seed, params.n_neighbors)?,
    };
    out.runtime = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Instances of one class found by clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassClusters {
    /// Cloud indices of the class's points.
    pub indices: Vec<usize>,
    /// Assignment over `indices`.
    pub assignment: ClusterAssignment,
}

impl ClassClusters {
    /// Cloud indices of each instance; noise and uncertain points left out.
    pub fn instances(&self) -> Vec<Vec<usize>> {
        self.assignment
            .members()
            .into_iter()
            .map(|m| m.into_iter().map(|i| self.indices[i]).collect())
            .collect()
    }
}

/// Clusters the points labelled `class` in `cloud`.
pub fn cluster_class_detailed(
    cloud: &PointCloud,
    class: u32,
    method: Method,
    params: &ClusterParams,
) -> Result<ClassClusters> {
    let labels = cloud
        .labels()
        .ok_or_else(|| Error::validation("clustering a class needs a labelled cloud"))?;
    let indices: Vec<usize> = (0..cloud.len()).filter(|&i| labels[i] == class).collect();
    if indices.is_empty() {
        // Still reject a missing k so a misconfiguration surfaces early.
        if matches!(method, Method::KMeans | Method::CMeans | Method::Spectral) {
            params.need_k(method)?;
        }
        return Ok(ClassClusters {
            indices,
            assignment: ClusterAssignment { labels: vec![], uncertain: vec![], n_clusters: 0, runtime: 0.0 },
        });
    }
    let pts: Vec<Point> = indices.iter().map(|&i| cloud.points()[i]).collect();
    let assignment = cluster(&pts, method, params)?;
    Ok(ClassClusters { indices, assignment })
}

/// One point cloud per instance of `class`.
pub fn cluster_class(cloud: &PointCloud, class: u32, method: Method, params: &ClusterParams) -> Result<Vec<PointCloud>> {
    let detail = cluster_class_detailed(cloud, class, method, params)?;
    Ok(detail.instances().iter().map(|m| cloud.select(m)).collect())
}

/// Points that are clustered but not attributable to their true instance.
///
/// Clusters are matched one-to-one to true instances by descending overlap;
/// every clustered point outside its cluster's matched instance, or in an
/// unmatched cluster, counts as a mistake. Noise and uncertain points do not.
pub fn count_mistakes(assignment: &ClusterAssignment, truth: &[u32]) -> usize {
    let mut overlap: HashMap<(i32, u32), usize> = HashMap::new();
    for (i, &l) in assignment.labels.iter().enumerate() {
        if l != NOISE && !assignment.uncertain[i] {
            *overlap.entry((l, truth[i])).or_default() += 1;
        }
    }
    let mut pairs: Vec<((i32, u32), usize)> = overlap.into_iter().collect();
    pairs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let total: usize = pairs.iter().map(|p| p.1).sum();
    let mut used_c = std::collections::HashSet::new();
    let mut used_t = std::collections::HashSet::new();
    let mut matched = 0;
    for ((c, t), n) in pairs {
        if !used_c.contains(&c) && !used_t.contains(&t) {
            used_c.insert(c);
            used_t.insert(t);
            matched += n;
        }
    }
    total - matched
}

/// One row of the clustering comparison report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReportRow {
    pub class: String,
    pub n_points: usize,
    pub method: Method,
    pub mistakes_pct: f64,
    pub uncertain_pct: f64,
    pub time_s: f64,
}

impl ClusterReportRow {
    pub fn evaluate(class: &str, method: Method, assignment: &ClusterAssignment, truth: &[u32]) -> Self {
        let n = assignment.len();
        let pct = |x: usize| if n == 0 { 0.0 } else { 100.0 * x as f64 / n as f64 };
        ClusterReportRow {
            class: class.to_string(),
            n_points: n,
            method,
            mistakes_pct: pct(count_mistakes(assignment, truth)),
            uncertain_pct: pct(assignment.uncertain.iter().filter(|&&u| u).count()),
            time_s: assignment.runtime,
        }
    }
}

/// `class,n_points,method,mistakes_pct,uncertain_pct,time_s`. Without
/// `timings` the time column is left empty so reports are reproducible.
pub fn cluster_report_csv(rows: &[ClusterReportRow], timings: bool) -> String {
    let mut out = String::from("class,n_points,method,mistakes_pct,uncertain_pct,time_s\n");
    for r in rows {
        let time = if timings { format!("{:.6}", r.time_s) } else { String::new() };
        let _ = writeln!(
            out,
            "{},{},{},{:.4},{:.4},{time}",
            r.class, r.n_points, r.method, r.mistakes_pct, r.uncertain_pct
        );
    }
    out
}
