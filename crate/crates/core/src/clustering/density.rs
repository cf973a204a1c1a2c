use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use super::ClusterAssignment;
use crate::error::{Error, Result};
use crate::geometry::{KdTree, Point};

/// Density-based clustering with noise. A point is core when at least
/// `min_pts` points (itself included) lie within `eps`; clusters grow from
/// core points in index order, and a border point joins the first cluster
/// that reaches it.
pub fn dbscan(points: &[Point], eps: f64, min_pts: usize) -> Result<ClusterAssignment> {
    if !(eps > 0.0) || min_pts == 0 {
        return Err(Error::validation(format!("dbscan needs eps > 0 and min_pts >= 1, got {eps}, {min_pts}")));
    }
    let tree = KdTree::build(points);
    let core: Vec<bool> = points.iter().map(|p| tree.count_within(p, eps) >= min_pts).collect();
    let mut raw = vec![-1i64; points.len()];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for seed in 0..points.len() {
        if !core[seed] || raw[seed] >= 0 {
            continue;
        }
        raw[seed] = next;
        queue.push_back(seed);
        while let Some(q) = queue.pop_front() {
            tree.for_each_within(&points[q], eps, |nb, _| {
                if raw[nb] < 0 {
                    raw[nb] = next;
                    if core[nb] {
                        queue.push_back(nb);
                    }
                }
            });
        }
        next += 1;
    }
    let noise = raw.iter().map(|&l| l < 0).collect();
    Ok(ClusterAssignment::from_raw(&raw, noise))
}

/// Reachability ordering produced by OPTICS.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticsOrdering {
    /// Point indices in processing order.
    pub ordering: Vec<usize>,
    /// Per point; infinite where undefined.
    pub reachability: Vec<f64>,
    pub core_distances: Vec<f64>,
    /// Per point, the point it was reached from, or -1.
    pub predecessor: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Always expands the unprocessed point of least reachability, lowest index
/// first among ties. Neighbourhoods are capped at `max_eps`.
pub fn optics_ordering(points: &[Point], min_pts: usize, max_eps: f64) -> Result<OpticsOrdering> {
    if min_pts < 2 || !(max_eps > 0.0) {
        return Err(Error::validation(format!("optics needs min_pts >= 2 and max_eps > 0, got {min_pts}, {max_eps}")));
    }
    let n = points.len();
    let tree = KdTree::build(points);
    let core_distances: Vec<f64> = points
        .iter()
        .map(|p| {
            let nn = tree.knn(p, min_pts);
            match nn.last() {
                Some(&(_, d2)) if nn.len() == min_pts && d2.sqrt() <= max_eps => d2.sqrt(),
                _ => f64::INFINITY,
            }
        })
        .collect();
    let mut reach = vec![f64::INFINITY; n];
    let mut pred = vec![-1i64; n];
    let mut processed = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(Key, usize)>> = BinaryHeap::new();
    let mut cursor = 0;
    let mut ordering = Vec::with_capacity(n);
    for _ in 0..n {
        let mut next = None;
        while let Some(Reverse((Key(r), i))) = heap.pop() {
            if !processed[i] && r == reach[i] {
                next = Some(i);
                break;
            }
        }
        let p = match next {
            Some(i) => i,
            None => {
                while processed[cursor] {
                    cursor += 1;
                }
                cursor
            }
        };
        processed[p] = true;
        ordering.push(p);
        let cd = core_distances[p];
        if cd.is_finite() {
            tree.for_each_within(&points[p], max_eps, |nb, d2| {
                if !processed[nb] {
                    let rd = d2.sqrt().max(cd);
                    if rd < reach[nb] {
                        reach[nb] = rd;
                        pred[nb] = p as i64;
                        heap.push(Reverse((Key(rd), nb)));
                    }
                }
            });
        }
    }
    Ok(OpticsOrdering { ordering, reachability: reach, core_distances, predecessor: pred })
}

fn extend_region(steep: &[bool], xward: &[bool], start: usize, min_samples: usize) -> usize {
    let mut non_xward = 0;
    let mut end = start;
    for index in start..steep.len() {
        if steep[index] {
            non_xward = 0;
            end = index;
        } else if !xward[index] {
            non_xward += 1;
            if non_xward > min_samples {
                break;
            }
        } else {
            return end;
        }
    }
    end
}

struct SteepDown {
    start: usize,
    end: usize,
    mib: f64,
}

fn filter_steep_downs(sdas: &mut Vec<SteepDown>, mib: f64, xi_complement: f64, r: &[f64]) {
    if mib.is_infinite() {
        sdas.clear();
        return;
    }
    sdas.retain(|d| mib <= r[d.start] * xi_complement);
    for d in sdas.iter_mut() {
        d.mib = d.mib.max(mib);
    }
}

/// Ordering-position ranges `[start, end]` of the ξ-steep clusters, leaves
/// before the clusters enclosing them.
pub fn xi_clusters(ord: &OpticsOrdering, min_samples: usize, min_cluster_size: usize, xi: f64) -> Vec<(usize, usize)> {
    let n = ord.ordering.len();
    let mut r: Vec<f64> = ord.ordering.iter().map(|&i| ord.reachability[i]).collect();
    // A trailing infinity closes a cluster that runs to the end of the plot.
    r.push(f64::INFINITY);
    let mut position = vec![0; n];
    for (pos, &i) in ord.ordering.iter().enumerate() {
        position[i] = pos;
    }
    let pred_pos: Vec<Option<usize>> = ord
        .ordering
        .iter()
        .map(|&i| usize::try_from(ord.predecessor[i]).ok().map(|p| position[p]))
        .collect();
    let xc = 1.0 - xi;
    let ratio: Vec<f64> = (0..n).map(|i| r[i] / r[i + 1]).collect();
    let steep_up: Vec<bool> = ratio.iter().map(|&x| x <= xc).collect();
    let steep_down: Vec<bool> = ratio.iter().map(|&x| x >= 1.0 / xc).collect();
    let down: Vec<bool> = ratio.iter().map(|&x| x > 1.0).collect();
    let up: Vec<bool> = ratio.iter().map(|&x| x < 1.0).collect();

    // Shrinks [s, e] from the right until e was reached from inside it.
    let correct = |s: usize, mut e: usize| -> Option<(usize, usize)> {
        while s < e {
            if r[s] > r[e] {
                return Some((s, e));
            }
            if pred_pos[e].is_some_and(|p| p >= s && p < e) {
                return Some((s, e));
            }
            e -= 1;
        }
        None
    };

    let mut sdas: Vec<SteepDown> = Vec::new();
    let mut clusters = Vec::new();
    let mut index = 0;
    let mut mib: f64 = 0.0;
    for steep in 0..n {
        if !(steep_up[steep] || steep_down[steep]) || steep < index {
            continue;
        }
        mib = r[index..=steep].iter().fold(mib, |a, &b| a.max(b));
        filter_steep_downs(&mut sdas, mib, xc, &r);
        if steep_down[steep] {
            let end = extend_region(&steep_down, &up, steep, min_samples);
            sdas.push(SteepDown { start: steep, end, mib: 0.0 });
            index = end + 1;
            mib = r[index];
            continue;
        }
        let u_start = steep;
        let u_end = extend_region(&steep_up, &down, u_start, min_samples);
        index = u_end + 1;
        mib = r[index];
        let mut found = Vec::new();
        for d in &sdas {
            let mut c_start = d.start;
            let mut c_end = u_end;
            if r[c_end + 1] * xc < d.mib {
                continue;
            }
            let d_max = r[d.start];
            if d_max * xc >= r[c_end + 1] {
                while r[c_start + 1] > r[c_end + 1] && c_start < d.end {
                    c_start += 1;
                }
            } else if r[c_end + 1] * xc >= d_max {
                while c_end > u_start && r[c_end - 1] > d_max {
                    c_end -= 1;
                }
            }
            let Some((s, e)) = correct(c_start, c_end) else { continue };
            if e - s + 1 < min_cluster_size || s > d.end || e < u_start {
                continue;
            }
            found.push((s, e));
        }
        found.reverse();
        clusters.extend(found);
    }
    clusters
}

/// OPTICS with ξ-steepness extraction; points in no extracted cluster are
/// noise and flagged uncertain.
pub fn optics(
    points: &[Point],
    min_pts: usize,
    xi: f64,
    max_eps: f64,
    min_cluster_size: Option<usize>,
) -> Result<ClusterAssignment> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::validation(format!("xi must lie in (0, 1), got {xi}")));
    }
    let ord = optics_ordering(points, min_pts, max_eps)?;
    let clusters = xi_clusters(&ord, min_pts, min_cluster_size.unwrap_or(min_pts), xi);
    let mut by_pos = vec![-1i64; points.len()];
    let mut label = 0;
    for (s, e) in clusters {
        if by_pos[s..=e].iter().all(|&l| l < 0) {
            by_pos[s..=e].fill(label);
            label += 1;
        }
    }
    let mut raw = vec![-1i64; points.len()];
    for (pos, &i) in ord.ordering.iter().enumerate() {
        raw[i] = by_pos[pos];
    }
    let noise = raw.iter().map(|&l| l < 0).collect();
    Ok(ClusterAssignment::from_raw(&raw, noise))
}

#[cfg(test)]
mod tests {
    use super::super::NOISE;
    use super::*;
    use proptest::prelude::*;

    fn grid(ox: f64, side: usize) -> Vec<Point> {
        (0..side * side).map(|i| Point::new(ox + (i % side) as f64, (i / side) as f64, 0.0)).collect()
    }

    fn two_blobs() -> Vec<Point> {
        let mut p = grid(0.0, 5);
        p.extend(grid(20.0, 5));
        p
    }

    /// O(n²) density-reachability: core components are connected via
    /// eps-adjacency, ordered by their lowest core index; a border point
    /// takes the earliest such component among its core neighbours.
    fn oracle(points: &[Point], eps: f64, min_pts: usize) -> Vec<i64> {
        let n = points.len();
        let adj = |i: usize, j: usize| (points[i] - points[j]).norm_squared() <= eps * eps;
        let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| adj(i, j)).count() >= min_pts).collect();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for i in 0..n {
            for j in 0..i {
                if core[i] && core[j] && adj(i, j) {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        // Roots are the lowest index of their component, so they order components.
        let root: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        (0..n)
            .map(|i| {
                if core[i] {
                    root[i] as i64
                } else {
                    (0..n).filter(|&j| core[j] && adj(i, j)).map(|j| root[j] as i64).min().unwrap_or(-1)
                }
            })
            .collect()
    }

    #[test]
    fn two_blobs_two_clusters() {
        let a = dbscan(&two_blobs(), 1.5, 2).unwrap();
        assert_eq!(a.n_clusters, 2);
        assert!(a.labels.iter().all(|&l| l != NOISE));
        assert_eq!(a.labels[0], 0);
        assert_eq!(a.labels[30], 1);
    }

    #[test]
    fn isolated_point_is_noise() {
        let mut p = two_blobs();
        p.push(Point::new(100.0, 100.0, 0.0));
        let a = dbscan(&p, 1.5, 2).unwrap();
        assert_eq!(*a.labels.last().unwrap(), NOISE);
        assert!(*a.uncertain.last().unwrap());
        assert_eq!(dbscan(&p, 500.0, 2).unwrap().n_clusters, 1);
        assert!(dbscan(&p, 0.0, 2).is_err());
    }

    #[test]
    fn optics_two_blobs_match_dbscan_cut() {
        let p = two_blobs();
        let o = optics(&p, 4, 0.05, f64::INFINITY, None).unwrap();
        let d = dbscan(&p, 5.0, 4).unwrap();
        assert_eq!(o.n_clusters, 2);
        assert_eq!(o.labels, d.labels);
    }

    #[test]
    fn optics_single_blob_and_first_reachability() {
        let p = grid(0.0, 8);
        let o = optics(&p, 4, 0.05, f64::INFINITY, None).unwrap();
        assert_eq!(o.n_clusters, 1);
        let ord = optics_ordering(&p, 4, f64::INFINITY).unwrap();
        assert!(ord.reachability[ord.ordering[0]].is_infinite());
        assert_eq!(ord.predecessor[ord.ordering[0]], -1);
        let mut seen = ord.ordering.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..p.len()).collect::<Vec<_>>());
    }

    #[test]
    fn optics_max_eps_caps_neighbourhoods() {
        let p = two_blobs();
        let capped = optics_ordering(&p, 4, 2.0).unwrap();
        let free = optics_ordering(&p, 4, f64::INFINITY).unwrap();
        assert_eq!(capped.reachability.iter().filter(|r| r.is_infinite()).count(), 2);
        assert_eq!(free.reachability.iter().filter(|r| r.is_infinite()).count(), 1);
        assert_eq!(optics(&p, 4, 0.05, 2.0, None).unwrap().n_clusters, 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn dbscan_matches_bruteforce(
            raw in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0, 0.0f64..2.0), 1..300),
            eps in 0.2f64..2.0,
            min_pts in 1usize..8,
        ) {
            let p: Vec<Point> = raw.iter().map(|&(x, y, z)| Point::new(x, y, z)).collect();
            let got = dbscan(&p, eps, min_pts).unwrap();
            let want = ClusterAssignment::from_raw(&oracle(&p, eps, min_pts), vec![false; p.len()]);
            prop_assert_eq!(got.labels, want.labels);
            prop_assert_eq!(got.n_clusters, want.n_clusters);
        }

        #[test]
        fn density_methods_translation_invariant(raw in prop::collection::vec((0i32..40, 0i32..40), 5..150)) {
            let p: Vec<Point> = raw.iter().map(|&(x, y)| Point::new(x as f64, y as f64, 0.0)).collect();
            let q: Vec<Point> = p.iter().map(|a| Point::new(a.x - 11.0, a.y + 5.0, 3.0)).collect();
            prop_assert_eq!(dbscan(&p, 3.0, 3).unwrap(), dbscan(&q, 3.0, 3).unwrap());
            prop_assert_eq!(optics(&p, 3, 0.05, f64::INFINITY, None).unwrap(), optics(&q, 3, 0.05, f64::INFINITY, None).unwrap());
        }
    }
}
