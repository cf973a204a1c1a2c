use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::Point;

const LEAF_SIZE: usize = 12;

#[inline]
pub(crate) fn dist2(a: &Point, b: &Point) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

/// Static 3-d tree over a point set.
///
/// Queries are exact: nearest-neighbor ties resolve to the lowest point index
/// and radius queries are inclusive, so results match a brute-force scan.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl KdTree {
    pub fn build(points: &[Point]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let dim = self.widest_dim(start, end);
        let mid = start + (end - start) / 2;
        let pts = &self.points;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| pts[a][dim].total_cmp(&pts[b][dim]));
        let value = self.points[self.order[mid]][dim];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    fn widest_dim(&self, start: usize, end: usize) -> usize {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for d in 0..3 {
                lo[d] = lo[d].min(self.points[i][d]);
                hi[d] = hi[d].max(self.points[i][d]);
            }
        }
        (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Index of and squared distance to the nearest point.
    pub fn nearest(&self, q: &Point) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let mut best = Candidate { d2: f64::INFINITY, index: usize::MAX };
        self.nearest_in(0, q, &mut best);
        Some((best.index, best.d2))
    }

    fn nearest_in(&self, node: usize, q: &Point, best: &mut Candidate) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate { d2: dist2(q, &self.points[i]), index: i };
                    if c < *best {
                        *best = c;
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.nearest_in(near, q, best);
                if diff * diff <= best.d2 {
                    self.nearest_in(far, q, best);
                }
            }
        }
    }

    /// The `k` nearest points as (index, squared distance), closest first.
    pub fn knn(&self, q: &Point, k: usize) -> Vec<(usize, f64)> {
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_in(0, q, k, &mut heap);
        let mut out: Vec<_> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.index, c.d2)).collect()
    }

    fn knn_in(&self, node: usize, q: &Point, k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate { d2: dist2(q, &self.points[i]), index: i };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.knn_in(near, q, k, heap);
                let worst = if heap.len() < k { f64::INFINITY } else { heap.peek().unwrap().d2 };
                if diff * diff <= worst {
                    self.knn_in(far, q, k, heap);
                }
            }
        }
    }

    /// Indices of all points with distance <= `radius`, in ascending index order.
    pub fn within(&self, q: &Point, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(q, radius, |i, _| out.push(i));
        out.sort_unstable();
        out
    }

    /// Number of points with distance <= `radius`.
    pub fn count_within(&self, q: &Point, radius: f64) -> usize {
        let mut n = 0;
        self.for_each_within(q, radius, |_, _| n += 1);
        n
    }

    /// Calls `f(index, squared distance)` for every point within `radius`,
    /// in tree order.
    pub fn for_each_within(&self, q: &Point, radius: f64, mut f: impl FnMut(usize, f64)) {
        if self.is_empty() || radius < 0.0 {
            return;
        }
        self.within_in(0, q, radius * radius, &mut f);
    }

    fn within_in(&self, node: usize, q: &Point, r2: f64, f: &mut impl FnMut(usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = dist2(q, &self.points[i]);
                    if d2 <= r2 {
                        f(i, d2);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.within_in(near, q, r2, f);
                if diff * diff <= r2 {
                    self.within_in(far, q, r2, f);
                }
            }
        }
    }
}
