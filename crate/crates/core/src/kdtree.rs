//! Exact 1-nearest-neighbour queries with a kd-tree.
//!
//! Results match the brute-force scan bit for bit: distances are the same
//! squared sums, candidates are ordered by `(distance, index)`, and a
//! subtree is skipped only when its bound is strictly larger than the
//! current best, so an equally distant point with a smaller index is never
//! pruned away.

use crate::sample::Sample;

const LEAF_SIZE: usize = 8;

#[derive(Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug)]
pub struct KdTree<'a> {
    points: &'a Sample,
    order: Vec<usize>,
    root: Node,
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a Sample) -> Self {
        let mut order: Vec<usize> = (0..points.n()).collect();
        let n = order.len();
        let root = Self::build_node(points, &mut order, 0, n);
        Self {
            points,
            order,
            root,
        }
    }

    fn build_node(points: &Sample, order: &mut [usize], start: usize, end: usize) -> Node {
        if end - start <= LEAF_SIZE {
            return Node::Leaf { start, end };
        }
        let slice = &mut order[start..end];
        let m = points.m();
        // Split on the coordinate with the widest spread.
        let mut best = (0usize, -1.0_f64);
        for d in 0..m {
            let (lo, hi) = slice.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = points.row(i)[d];
                (lo.min(v), hi.max(v))
            });
            if hi - lo > best.1 {
                best = (d, hi - lo);
            }
        }
        let dim = best.0;
        if best.1 <= 0.0 {
            // All points identical in every coordinate.
            return Node::Leaf { start, end };
        }
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            points.row(a)[dim].total_cmp(&points.row(b)[dim])
        });
        let value = points.row(slice[mid])[dim];
        let left = Self::build_node(points, order, start, start + mid);
        let right = Self::build_node(points, order, start + mid, end);
        Node::Split {
            dim,
            value,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Nearest neighbour of stored point `query`, excluding itself.
    pub fn nearest_excluding(&self, query: usize) -> Option<(usize, f64)> {
        let q = self.points.row(query);
        let mut best = (f64::INFINITY, usize::MAX);
        self.search(&self.root, q, query, &mut best);
        (best.1 != usize::MAX).then_some((best.1, best.0))
    }

    fn search(&self, node: &Node, q: &[f64], exclude: usize, best: &mut (f64, usize)) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    if i == exclude {
                        continue;
                    }
                    let d = squared_distance(q, self.points.row(i));
                    if d < best.0 || (d == best.0 && i < best.1) {
                        *best = (d, i);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[*dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, exclude, best);
                if diff * diff <= best.0 {
                    self.search(far, q, exclude, best);
                }
            }
        }
    }
}
