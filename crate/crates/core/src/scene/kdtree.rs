//! Static 3D kd-tree with exact nearest-neighbour, k-nearest and box queries.
//!
//! Ties in distance resolve to the smallest point id.

use crate::geometry::Vec3;
use crate::real::Real;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf { start: u32, end: u32 },
    Split { axis: u8, value: T, left: u32, right: u32 },
}

#[derive(Debug, Clone)]
pub struct KdTree<T> {
    // Points and their caller-facing ids, permuted into leaf order.
    points: Vec<Vec3<T>>,
    ids: Vec<usize>,
    nodes: Vec<Node<T>>,
}

impl<T: Real> KdTree<T> {
    /// Builds a tree over `points`, identified by their position in the slice.
    pub fn new(points: &[Vec3<T>]) -> Self {
        Self::with_ids(points.iter().copied().enumerate().collect())
    }

    /// Builds a tree over `(id, point)` pairs.
    pub fn with_ids(mut items: Vec<(usize, Vec3<T>)>) -> Self {
        let mut nodes = Vec::new();
        if !items.is_empty() {
            let n = items.len();
            build(&mut items, 0, n, &mut nodes);
        }
        let (ids, points) = items.into_iter().unzip();
        KdTree { points, ids, nodes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Exact nearest neighbour: `(id, squared distance)`.
    pub fn nearest(&self, q: Vec3<T>) -> Option<(usize, T)> {
        self.nearest_slot(q).map(|(s, d)| (self.ids[s], d))
    }

    /// Nearest neighbour with its coordinates: `(id, point, squared distance)`.
    pub fn nearest_point(&self, q: Vec3<T>) -> Option<(usize, Vec3<T>, T)> {
        self.nearest_slot(q).map(|(s, d)| (self.ids[s], self.points[s], d))
    }

    fn nearest_slot(&self, q: Vec3<T>) -> Option<(usize, T)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, T::infinity());
        self.nearest_in(0, q, &mut best);
        Some(best)
    }

    fn nearest_in(&self, node: usize, q: Vec3<T>, best: &mut (usize, T)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start as usize..end as usize {
                    let d = self.points[i].distance_squared(q);
                    if d < best.1 || (d == best.1 && self.ids[i] < self.ids[best.0]) {
                        *best = (i, d);
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
                let (near, far) = if diff <= T::zero() {
                    (left, right)
                } else {
                    (right, left)
                };
                self.nearest_in(near as usize, q, best);
                if diff * diff <= best.1 {
                    self.nearest_in(far as usize, q, best);
                }
            }
        }
    }

    /// The `k` nearest neighbours sorted by `(distance, id)`.
    pub fn k_nearest(&self, q: Vec3<T>, k: usize) -> Vec<(usize, T)> {
        let mut heap: Vec<(usize, T)> = Vec::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.k_nearest_in(0, q, k, &mut heap);
        }
        heap
    }

    fn k_nearest_in(&self, node: usize, q: Vec3<T>, k: usize, out: &mut Vec<(usize, T)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start as usize..end as usize {
                    let cand = (self.ids[i], self.points[i].distance_squared(q));
                    let worse = |a: &(usize, T), b: &(usize, T)| a.1 > b.1 || (a.1 == b.1 && a.0 > b.0);
                    if out.len() == k && !worse(out.last().unwrap(), &cand) {
                        continue;
                    }
                    let pos = out.partition_point(|e| !worse(e, &cand));
                    out.insert(pos, cand);
                    out.truncate(k);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff <= T::zero() {
                    (left, right)
                } else {
                    (right, left)
                };
                self.k_nearest_in(near as usize, q, k, out);
                if out.len() < k || diff * diff <= out.last().unwrap().1 {
                    self.k_nearest_in(far as usize, q, k, out);
                }
            }
        }
    }

    /// Calls `f(id, point)` for every point inside the closed box `[lo, hi]`.
    pub fn for_each_in_aabb<F: FnMut(usize, Vec3<T>)>(&self, lo: Vec3<T>, hi: Vec3<T>, mut f: F) {
        if !self.nodes.is_empty() {
            self.aabb_in(0, lo, hi, &mut f);
        }
    }

    fn aabb_in<F: FnMut(usize, Vec3<T>)>(&self, node: usize, lo: Vec3<T>, hi: Vec3<T>, f: &mut F) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for i in start as usize..end as usize {
                    let p = self.points[i];
                    if p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z {
                        f(self.ids[i], p);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let a = axis as usize;
                if lo[a] <= value {
                    self.aabb_in(left as usize, lo, hi, f);
                }
                if hi[a] >= value {
                    self.aabb_in(right as usize, lo, hi, f);
                }
            }
        }
    }
}

fn build<T: Real>(items: &mut [(usize, Vec3<T>)], start: usize, end: usize, nodes: &mut Vec<Node<T>>) -> u32 {
    let me = nodes.len();
    let slice = &mut items[start..end];
    if slice.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: start as u32,
            end: end as u32,
        });
        return me as u32;
    }
    let (mut lo, mut hi) = (slice[0].1, slice[0].1);
    for (_, p) in slice.iter() {
        lo = lo.component_min(*p);
        hi = hi.component_max(*p);
    }
    let ext = hi - lo;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |a, b| {
        a.1[axis]
            .partial_cmp(&b.1[axis])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    let value = slice[mid].1[axis];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let left = build(items, start, start + mid, nodes);
    let right = build(items, start + mid, end, nodes);
    nodes[me] = Node::Split {
        axis: axis as u8,
        value,
        left,
        right,
    };
    me as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Vec3<f64>], q: Vec3<f64>) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = p.distance_squared(q);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    fn cloud(seed: u64, n: usize) -> Vec<Vec3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(1.0..3.0)))
            .collect()
    }

    #[test]
    fn self_query_returns_point_with_zero_distance() {
        let pts = cloud(1, 300);
        let tree = KdTree::new(&pts);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(tree.nearest(*p), Some((i, 0.0)));
        }
    }

    #[test]
    fn equidistant_tie_breaks_to_smallest_index() {
        let pts = vec![
            Vec3::new(1.0, 0.0, 1.0),
            Vec3::new(5.0, 5.0, 5.0),
            Vec3::new(-1.0, 0.0, 1.0),
        ];
        let tree = KdTree::new(&pts);
        assert_eq!(tree.nearest(Vec3::new(0.0, 0.0, 1.0)).unwrap().0, 0);
        // Many duplicates straddling split planes.
        let dup: Vec<_> = (0..50).map(|_| Vec3::new(0.5, 0.5, 0.5)).collect();
        let tree = KdTree::new(&dup);
        assert_eq!(tree.nearest(Vec3::new(0.0, 0.0, 0.0)).unwrap().0, 0);
    }

    #[test]
    fn random_queries_match_linear_scan() {
        let pts = cloud(7, 1000);
        let tree = KdTree::new(&pts);
        let queries = cloud(8, 1000);
        for q in queries {
            assert_eq!(tree.nearest(q).unwrap(), brute(&pts, q));
        }
    }

    #[test]
    fn k_nearest_matches_sorted_scan() {
        let pts = cloud(3, 500);
        let tree = KdTree::new(&pts);
        for q in cloud(4, 50) {
            let mut all: Vec<_> = pts.iter().enumerate().map(|(i, p)| (i, p.distance_squared(q))).collect();
            all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            all.truncate(8);
            assert_eq!(tree.k_nearest(q, 8), all);
        }
    }

    #[test]
    fn box_query_matches_filter() {
        let pts = cloud(5, 800);
        let tree = KdTree::new(&pts);
        let lo = Vec3::new(-0.3, -0.2, 1.5);
        let hi = Vec3::new(0.4, 0.5, 2.2);
        let mut got = Vec::new();
        tree.for_each_in_aabb(lo, hi, |i, _| got.push(i));
        got.sort_unstable();
        let want: Vec<_> = pts
            .iter()
            .enumerate()
            .filter(|(_, p)| p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn empty_tree_has_no_neighbours() {
        let tree = KdTree::<f64>::new(&[]);
        assert!(tree.nearest(Vec3::zero()).is_none());
        assert!(tree.k_nearest(Vec3::zero(), 3).is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn nearest_is_exact(seed in 0u64..5000, n in 1usize..200, qx in -2.0f64..2.0, qy in -2.0f64..2.0, qz in 0.0f64..4.0) {
            let pts = cloud(seed, n);
            let tree = KdTree::new(&pts);
            let q = Vec3::new(qx, qy, qz);
            prop_assert_eq!(tree.nearest(q).unwrap(), brute(&pts, q));
        }
    }
}
