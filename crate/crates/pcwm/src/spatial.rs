//! A small static k-d tree over 3D points.
//!
//! Used for nearest-neighbor queries in the Chamfer metric and for the
//! neighborhood attacks (smoothing, chunk removal). Queries return squared
//! distances; k-NN ties are broken by original index so results do not
//! depend on tree layout.

use crate::geometry::{dist2, Point};

struct Node {
    /// Index into `points`.
    point: u32,
    axis: u8,
    left: i32,
    right: i32,
}

pub struct KdTree {
    points: Vec<Point>,
    nodes: Vec<Node>,
    root: i32,
}

impl KdTree {
    pub fn build(points: &[Point]) -> KdTree {
        let mut tree = KdTree {
            points: points.to_vec(),
            nodes: Vec::with_capacity(points.len()),
            root: -1,
        };
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        tree.root = tree.build_rec(&mut order, 0);
        tree
    }

    fn build_rec(&mut self, order: &mut [u32], depth: u8) -> i32 {
        if order.is_empty() {
            return -1;
        }
        let axis = depth % 3;
        let mid = order.len() / 2;
        // Median split; index tie-break keeps the layout deterministic even
        // with duplicate coordinates.
        order.select_nth_unstable_by(mid, |&a, &b| {
            let (pa, pb) = (self.points[a as usize], self.points[b as usize]);
            pa[axis as usize]
                .total_cmp(&pb[axis as usize])
                .then(a.cmp(&b))
        });
        let point = order[mid];
        let id = self.nodes.len() as i32;
        self.nodes.push(Node {
            point,
            axis,
            left: -1,
            right: -1,
        });
        // Split the borrow: recurse on copies of the two halves' views.
        let (lo, rest) = order.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = self.build_rec_slice(lo, depth + 1);
        let right = self.build_rec_slice(hi, depth + 1);
        self.nodes[id as usize].left = left;
        self.nodes[id as usize].right = right;
        id
    }

    fn build_rec_slice(&mut self, order: &mut [u32], depth: u8) -> i32 {
        self.build_rec(order, depth)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the nearest point to `query`.
    pub fn nearest(&self, query: Point) -> Option<(usize, f64)> {
        if self.root < 0 {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(self.root, query, &mut best);
        Some(best)
    }

    fn nearest_rec(&self, node: i32, query: Point, best: &mut (usize, f64)) {
        let n = &self.nodes[node as usize];
        let p = self.points[n.point as usize];
        let d2 = dist2(p, query);
        if d2 < best.1 || (d2 == best.1 && (n.point as usize) < best.0) {
            *best = (n.point as usize, d2);
        }
        let axis = n.axis as usize;
        let delta = query[axis] - p[axis];
        let (near, far) = if delta < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        if near >= 0 {
            self.nearest_rec(near, query, best);
        }
        if far >= 0 && delta * delta <= best.1 {
            self.nearest_rec(far, query, best);
        }
    }

    /// Indices of the `k` nearest points to `query`, closest first.
    /// Distance ties are broken by smaller original index.
    pub fn knn(&self, query: Point, k: usize) -> Vec<usize> {
        if self.root < 0 || k == 0 {
            return Vec::new();
        }
        let k = k.min(self.points.len());
        // Max-heap of (d2, index) under the tie-broken order.
        let mut heap: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        self.knn_rec(self.root, query, k, &mut heap);
        heap.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        heap.into_iter().map(|(_, i)| i).collect()
    }

    fn knn_rec(&self, node: i32, query: Point, k: usize, heap: &mut Vec<(f64, usize)>) {
        let n = &self.nodes[node as usize];
        let p = self.points[n.point as usize];
        let d2 = dist2(p, query);
        let candidate = (d2, n.point as usize);
        // Worst candidate is kept at the front; k is small so a linear
        // re-sort on insert beats a real heap.
        if heap.len() < k {
            heap.push(candidate);
            heap.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)));
        } else if worse(heap[0], candidate) {
            heap[0] = candidate;
            heap.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)));
        }
        let axis = n.axis as usize;
        let delta = query[axis] - p[axis];
        let (near, far) = if delta < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        if near >= 0 {
            self.knn_rec(near, query, k, heap);
        }
        let bound = if heap.len() < k {
            f64::INFINITY
        } else {
            heap[0].0
        };
        if far >= 0 && delta * delta <= bound {
            self.knn_rec(far, query, k, heap);
        }
    }
}

/// True when `a` ranks strictly worse (farther) than `b`.
fn worse(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 > b.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = SplitMix64::new(seed);
        (0..n)
            .map(|_| {
                [
                    rng.uniform_in(-1.0, 1.0),
                    rng.uniform_in(-1.0, 1.0),
                    rng.uniform_in(-1.0, 1.0),
                ]
            })
            .collect()
    }

    #[test]
    fn nearest_matches_brute_force() {
        let points = random_points(257, 5);
        let queries = random_points(64, 6);
        let tree = KdTree::build(&points);
        for q in queries {
            let (ti, td) = tree.nearest(q).unwrap();
            let (bi, bd) = points
                .iter()
                .enumerate()
                .map(|(i, p)| (i, dist2(*p, q)))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .unwrap();
            assert_eq!(ti, bi);
            assert_eq!(td, bd);
        }
    }

    #[test]
    fn knn_matches_brute_force_with_ties() {
        let mut points = random_points(100, 9);
        // Inject exact duplicates to exercise tie-breaking.
        points.push(points[3]);
        points.push(points[3]);
        let tree = KdTree::build(&points);
        let queries = random_points(32, 10);
        for q in queries {
            for k in [1, 4, 17] {
                let got = tree.knn(q, k);
                let mut all: Vec<(f64, usize)> = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (dist2(*p, q), i))
                    .collect();
                all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let want: Vec<usize> = all.iter().take(k).map(|&(_, i)| i).collect();
                assert_eq!(got, want, "k={k}");
            }
        }
    }

    #[test]
    fn empty_tree() {
        let tree = KdTree::build(&[]);
        assert!(tree.nearest([0.0; 3]).is_none());
        assert!(tree.knn([0.0; 3], 3).is_empty());
    }
}
