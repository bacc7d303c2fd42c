use glam::DVec3;
use rayon::prelude::*;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: f64, left: u32, right: u32 },
}

/// Exact nearest-neighbour index over 3-D points (static k-d tree).
///
/// Results are identical to a linear scan using the same squared-distance
/// arithmetic: the split test `plane_distance² > best` can never discard a
/// closer point because floating-point subtraction, squaring and addition
/// are all monotone. Equidistant points resolve to the smallest index.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<[f64; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

#[inline]
pub fn squared_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

impl SpatialIndex {
    /// Builds the tree. Panics on an empty point set.
    pub fn build(points: &[DVec3]) -> Self {
        assert!(!points.is_empty(), "spatial index needs at least one point");
        assert!(points.len() < u32::MAX as usize);
        let points: Vec<[f64; 3]> = points.iter().map(|p| p.to_array()).collect();
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1);
        build_node(&points, &mut order, 0, &mut nodes);
        Self { points, order, nodes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> DVec3 {
        DVec3::from_array(self.points[i])
    }

    /// Index of the nearest point and its squared distance.
    pub fn nearest(&self, query: DVec3) -> (usize, f64) {
        let q = query.to_array();
        let mut best = (u32::MAX, f64::INFINITY);
        self.search(0, &q, &mut best);
        (best.0 as usize, best.1)
    }

    /// [`Self::nearest`] for many queries, in parallel; output order follows input.
    pub fn nearest_many(&self, queries: &[DVec3]) -> Vec<(usize, f64)> {
        queries.par_iter().map(|&q| self.nearest(q)).collect()
    }

    fn search(&self, node: usize, q: &[f64; 3], best: &mut (u32, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let d = squared_distance(q, &self.points[i as usize]);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search(near as usize, q, best);
                // `<=` keeps equidistant candidates with smaller indices reachable
                if diff * diff <= best.1 {
                    self.search(far as usize, q, best);
                }
            }
        }
    }
}

fn build_node(points: &[[f64; 3]], order: &mut [u32], offset: usize, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    if order.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf { start: offset as u32, end: (offset + order.len()) as u32 });
        return id;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        let p = &points[i as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
        .unwrap();
    if hi[axis] == lo[axis] {
        // all points coincide
        nodes.push(Node::Leaf { start: offset as u32, end: (offset + order.len()) as u32 });
        return id;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis].total_cmp(&points[b as usize][axis]).then(a.cmp(&b))
    });
    let value = points[order[mid] as usize][axis];
    nodes.push(Node::Split { axis: axis as u8, value, left: 0, right: 0 });
    let (left_half, right_half) = order.split_at_mut(mid);
    let left = build_node(points, left_half, offset, nodes);
    let right = build_node(points, right_half, offset + mid, nodes);
    if let Node::Split { left: l, right: r, .. } = &mut nodes[id as usize] {
        *l = left;
        *r = right;
    }
    id
}

/// Linear-scan reference with the same distance arithmetic and tie rule.
pub fn brute_force_nearest(points: &[DVec3], query: DVec3) -> (usize, f64) {
    let q = query.to_array();
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d = squared_distance(&q, &p.to_array());
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}
