//! Exact nearest-neighbour search over 3D points.
//!
//! Static KD-tree: median split on the widest axis of each node's bounding
//! box, leaves of at most `leaf_size` points stored contiguously. Queries are
//! exact and break distance ties towards the smallest point id.

use crate::{Error, Point3, Result};

pub const DEFAULT_LEAF_SIZE: usize = 16;

/// Upper bound on `k` for [`NnIndex::k_nearest`].
pub const MAX_K: usize = 64;

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

/// Immutable KD-tree over a point set.
#[derive(Debug, Clone)]
pub struct NnIndex {
    nodes: Vec<Node>,
    /// Points reordered into leaf order.
    points: Vec<Point3>,
    /// Original id of each reordered point.
    ids: Vec<u32>,
}

#[inline]
pub fn squared_distance(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
fn better(d: f64, id: u32, best_d: f64, best_id: u32) -> bool {
    d < best_d || (d == best_d && id < best_id)
}

impl NnIndex {
    pub fn build(points: &[Point3]) -> Result<Self> {
        Self::build_with_leaf_size(points, DEFAULT_LEAF_SIZE)
    }

    pub fn build_with_leaf_size(points: &[Point3], leaf_size: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("cannot index an empty point set"));
        }
        if points.len() > u32::MAX as usize {
            return Err(Error::InvalidArgument("too many points for a u32 id".into()));
        }
        let leaf_size = leaf_size.max(1);
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / leaf_size + 1);
        build_node(points, &mut order, 0, leaf_size, &mut nodes);
        let reordered = order.iter().map(|&i| points[i as usize]).collect();
        Ok(Self {
            nodes,
            points: reordered,
            ids: order,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Returns `(point_id, squared_distance)` of the nearest indexed point.
    pub fn nearest(&self, query: &Point3) -> (usize, f64) {
        let mut best = (u32::MAX, f64::INFINITY);
        self.search_nearest(0, query, &mut best);
        (best.0 as usize, best.1)
    }

    fn search_nearest(&self, node: usize, q: &Point3, best: &mut (u32, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start as usize..end as usize {
                    let d = squared_distance(&self.points[i], q);
                    let id = self.ids[i];
                    if better(d, id, best.1, best.0) {
                        *best = (id, d);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search_nearest(near as usize, q, best);
                // Equal distances may still hold a smaller id on the far side.
                if diff * diff <= best.1 {
                    self.search_nearest(far as usize, q, best);
                }
            }
        }
    }

    /// The `k` nearest points sorted by `(squared_distance, id)`.
    pub fn k_nearest(&self, query: &Point3, k: usize) -> Result<Vec<(usize, f64)>> {
        if k == 0 || k > MAX_K {
            return Err(Error::InvalidArgument(format!(
                "k must be in 1..={MAX_K}, got {k}"
            )));
        }
        let k = k.min(self.len());
        let mut heap: Vec<(f64, u32)> = Vec::with_capacity(k + 1);
        self.search_k(0, query, k, &mut heap);
        Ok(heap.into_iter().map(|(d, id)| (id as usize, d)).collect())
    }

    fn search_k(&self, node: usize, q: &Point3, k: usize, found: &mut Vec<(f64, u32)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start as usize..end as usize {
                    let cand = (squared_distance(&self.points[i], q), self.ids[i]);
                    if found.len() == k {
                        let worst = found[k - 1];
                        if !better(cand.0, cand.1, worst.0, worst.1) {
                            continue;
                        }
                        found.pop();
                    }
                    let at = found.partition_point(|&(d, id)| better(d, id, cand.0, cand.1));
                    found.insert(at, cand);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.search_k(near as usize, q, k, found);
                if found.len() < k || diff * diff <= found[k - 1].0 {
                    self.search_k(far as usize, q, k, found);
                }
            }
        }
    }
}

fn build_node(
    points: &[Point3],
    order: &mut [u32],
    offset: usize,
    leaf_size: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let me = nodes.len() as u32;
    if order.len() <= leaf_size {
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + order.len()) as u32,
        });
        return me;
    }

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        let p = &points[i as usize];
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
        .unwrap();
    if hi[axis] == lo[axis] {
        // All points coincide.
        nodes.push(Node::Leaf {
            start: offset as u32,
            end: (offset + order.len()) as u32,
        });
        return me;
    }

    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis].total_cmp(&points[b as usize][axis])
    });
    let value = points[order[mid] as usize][axis];

    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (left_part, right_part) = order.split_at_mut(mid);
    let left = build_node(points, left_part, offset, leaf_size, nodes);
    let right = build_node(points, right_part, offset + mid, leaf_size, nodes);
    nodes[me as usize] = Node::Split {
        axis: axis as u8,
        value,
        left,
        right,
    };
    me
}
