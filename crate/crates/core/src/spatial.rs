//! Exact nearest-neighbor index over 3D points.
//!
//! A median-split kd-tree whose answers must match a brute-force scan
//! exactly; pruning only ever skips subtrees that provably cannot beat the
//! current best squared distance.

use nalgebra::Vector3;

#[derive(Debug, Clone)]
struct Node {
    /// Index into the point array.
    point: u32,
    /// Split axis (0, 1, 2).
    axis: u8,
    left: i32,
    right: i32,
}

const NONE: i32 = -1;

/// Immutable spatial acceleration structure for min-distance queries.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Vector3<f64>>,
    nodes: Vec<Node>,
    root: i32,
}

impl SpatialIndex {
    pub fn from_points(points: &[Vector3<f64>]) -> Self {
        let points = points.to_vec();
        let mut nodes = Vec::with_capacity(points.len());
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let root = build(&points, &mut order, 0, &mut nodes);
        Self { points, nodes, root }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Nearest indexed point to `q` and its Euclidean distance.
    pub fn nearest(&self, q: &Vector3<f64>) -> Option<(Vector3<f64>, f64)> {
        if self.root == NONE {
            return None;
        }
        let mut best = (u32::MAX, f64::INFINITY);
        self.search(self.root, q, &mut best);
        let p = self.points[best.0 as usize];
        Some((p, best.1.sqrt()))
    }

    /// Minimum Euclidean distance from `q` to any indexed point;
    /// +infinity when the index is empty.
    pub fn min_distance(&self, q: &Vector3<f64>) -> f64 {
        match self.nearest(q) {
            Some((_, d)) => d,
            None => f64::INFINITY,
        }
    }

    fn search(&self, node: i32, q: &Vector3<f64>, best: &mut (u32, f64)) {
        let n = &self.nodes[node as usize];
        let p = &self.points[n.point as usize];
        let dx = q.x - p.x;
        let dy = q.y - p.y;
        let dz = q.z - p.z;
        let d2 = dx * dx + dy * dy + dz * dz;
        if d2 < best.1 {
            *best = (n.point, d2);
        }
        let delta = q[n.axis as usize] - p[n.axis as usize];
        let (near, far) = if delta < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        if near != NONE {
            self.search(near, q, best);
        }
        if far != NONE && delta * delta < best.1 {
            self.search(far, q, best);
        }
    }
}

fn build(points: &[Vector3<f64>], order: &mut [u32], depth: usize, nodes: &mut Vec<Node>) -> i32 {
    if order.is_empty() {
        return NONE;
    }
    let axis = (depth % 3) as u8;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        let ca = points[a as usize][axis as usize];
        let cb = points[b as usize][axis as usize];
        ca.partial_cmp(&cb).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let point = order[mid];
    let id = nodes.len() as i32;
    nodes.push(Node { point, axis, left: NONE, right: NONE });
    let (lo, rest) = order.split_at_mut(mid);
    let hi = &mut rest[1..];
    let left = build(points, lo, depth + 1, nodes);
    let right = build(points, hi, depth + 1, nodes);
    nodes[id as usize].left = left;
    nodes[id as usize].right = right;
    id
}
