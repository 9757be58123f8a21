//! Spatial indexes used by growth (dynamic uniform grid) and Gaussian
//! initialization (static kd-tree for k-nearest-neighbour queries).
//!
//! Both break distance ties by the lower point index, so results never depend
//! on insertion layout or hashing.

use std::collections::HashMap;

use crate::scalar::Real;
use crate::vec3::Vec3;

type Cell = (i64, i64, i64);

/// Uniform hash grid supporting incremental insertion.
#[derive(Clone, Debug)]
pub struct PointGrid<T> {
    cell: T,
    points: Vec<Vec3<T>>,
    cells: HashMap<Cell, Vec<usize>>,
}

impl<T: Real> PointGrid<T> {
    pub fn new(cell_size: T) -> Self {
        assert!(cell_size > T::zero(), "grid cell size must be positive");
        Self { cell: cell_size, points: Vec::new(), cells: HashMap::new() }
    }

    pub fn from_points(cell_size: T, points: impl IntoIterator<Item = Vec3<T>>) -> Self {
        let mut g = Self::new(cell_size);
        for p in points {
            g.insert(p);
        }
        g
    }

    fn coord(&self, v: T) -> i64 {
        (v / self.cell).floor().to_i64().unwrap_or(0)
    }

    fn key(&self, p: Vec3<T>) -> Cell {
        (self.coord(p.x), self.coord(p.y), self.coord(p.z))
    }

    /// Inserts a point and returns its index.
    pub fn insert(&mut self, p: Vec3<T>) -> usize {
        let id = self.points.len();
        self.points.push(p);
        let key = self.key(p);
        self.cells.entry(key).or_default().push(id);
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, id: usize) -> Vec3<T> {
        self.points[id]
    }

    fn for_each_in_box(&self, q: Vec3<T>, r: T, mut f: impl FnMut(usize)) {
        let lo = self.key(q - Vec3::new(r, r, r));
        let hi = self.key(q + Vec3::new(r, r, r));
        for i in lo.0..=hi.0 {
            for j in lo.1..=hi.1 {
                for k in lo.2..=hi.2 {
                    if let Some(ids) = self.cells.get(&(i, j, k)) {
                        ids.iter().for_each(|&id| f(id));
                    }
                }
            }
        }
    }

    /// Nearest point strictly closer than `radius`, ties to the lowest index.
    pub fn nearest_within(&self, q: Vec3<T>, radius: T) -> Option<(usize, T)> {
        let r2 = radius * radius;
        let mut best: Option<(usize, T)> = None;
        self.for_each_in_box(q, radius, |id| {
            let d2 = self.points[id].distance_squared(q);
            if d2 < r2 {
                let better = match best {
                    None => true,
                    Some((bid, bd2)) => d2 < bd2 || (d2 == bd2 && id < bid),
                };
                if better {
                    best = Some((id, d2));
                }
            }
        });
        best.map(|(id, d2)| (id, d2.sqrt()))
    }

    /// All points strictly closer than `radius`, ascending by index.
    pub fn within(&self, q: Vec3<T>, radius: T) -> Vec<usize> {
        let r2 = radius * radius;
        let mut out = Vec::new();
        self.for_each_in_box(q, radius, |id| {
            if self.points[id].distance_squared(q) < r2 {
                out.push(id);
            }
        });
        out.sort_unstable();
        out
    }

    pub fn any_within(&self, q: Vec3<T>, radius: T) -> bool {
        let r2 = radius * radius;
        let mut hit = false;
        self.for_each_in_box(q, radius, |id| {
            hit |= self.points[id].distance_squared(q) < r2;
        });
        hit
    }
}

const LEAF_SIZE: usize = 8;

#[derive(Clone, Debug)]
enum KdNode<T> {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: T, left: usize, right: usize },
}

/// Static kd-tree over a point set.
#[derive(Clone, Debug)]
pub struct KdTree<T> {
    points: Vec<Vec3<T>>,
    order: Vec<usize>,
    nodes: Vec<KdNode<T>>,
}

impl<T: Real> KdTree<T> {
    pub fn build(points: &[Vec3<T>]) -> Self {
        let mut tree = Self { points: points.to_vec(), order: (0..points.len()).collect(), nodes: Vec::new() };
        if !points.is_empty() {
            tree.build_range(0, points.len());
        }
        tree
    }

    fn build_range(&mut self, start: usize, end: usize) -> usize {
        let slot = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(KdNode::Leaf { start, end });
            return slot;
        }
        let (lo, hi) = self.order[start..end].iter().fold(
            (self.points[self.order[start]], self.points[self.order[start]]),
            |(lo, hi), &i| (lo.component_min(self.points[i]), hi.component_max(self.points[i])),
        );
        let ext = hi - lo;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let pts = &self.points;
        self.order[start..end].sort_by(|&a, &b| {
            pts[a][axis].partial_cmp(&pts[b][axis]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        let mid = start + (end - start) / 2;
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(KdNode::Leaf { start: 0, end: 0 });
        let left = self.build_range(start, mid);
        let right = self.build_range(mid, end);
        self.nodes[slot] = KdNode::Split { axis, value, left, right };
        slot
    }

    /// The `k` nearest points to `points[query]`, excluding itself, ordered by
    /// `(distance, index)`. Returns `(index, distance)` pairs.
    pub fn knn_excluding(&self, query: usize, k: usize) -> Vec<(usize, T)> {
        self.knn_impl(self.points[query], k, Some(query))
    }

    pub fn knn(&self, q: Vec3<T>, k: usize) -> Vec<(usize, T)> {
        self.knn_impl(q, k, None)
    }

    fn knn_impl(&self, q: Vec3<T>, k: usize, skip: Option<usize>) -> Vec<(usize, T)> {
        let mut best: Vec<(T, usize)> = Vec::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.search(0, q, k, skip, &mut best);
        }
        best.into_iter().map(|(d2, i)| (i, d2.sqrt())).collect()
    }

    fn search(&self, node: usize, q: Vec3<T>, k: usize, skip: Option<usize>, best: &mut Vec<(T, usize)>) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == skip {
                        continue;
                    }
                    let cand = (self.points[i].distance_squared(q), i);
                    let full = best.len() == k;
                    if full && !lex_less(cand, best[k - 1]) {
                        continue;
                    }
                    let pos = best.partition_point(|&b| lex_less(b, cand));
                    best.insert(pos, cand);
                    best.truncate(k);
                }
            }
            KdNode::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < T::zero() { (left, right) } else { (right, left) };
                self.search(near, q, k, skip, best);
                // `<=` keeps equal-distance candidates with lower indices reachable.
                if best.len() < k || diff * diff <= best[best.len() - 1].0 {
                    self.search(far, q, k, skip, best);
                }
            }
        }
    }
}

#[inline]
fn lex_less<T: Real>(a: (T, usize), b: (T, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> Vec<Vec3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()))
            .collect()
    }

    #[test]
    fn grid_nearest_matches_brute_force() {
        let pts = cloud(400, 1);
        let grid = PointGrid::from_points(0.1, pts.iter().copied());
        for q in cloud(200, 2) {
            let brute = pts
                .iter()
                .enumerate()
                .map(|(i, p)| (p.distance_squared(q), i))
                .filter(|&(d2, _)| d2 < 0.15 * 0.15)
                .fold(None, |acc: Option<(f64, usize)>, c| match acc {
                    Some(a) if !lex_less(c, a) => Some(a),
                    _ => Some(c),
                });
            assert_eq!(grid.nearest_within(q, 0.15).map(|x| x.0), brute.map(|x| x.1));
        }
    }

    #[test]
    fn grid_ties_go_to_lowest_index() {
        let grid = PointGrid::from_points(1.0, [Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0)]);
        assert_eq!(grid.nearest_within(Vec3::zero(), 2.0).unwrap().0, 0);
        assert!(grid.nearest_within(Vec3::zero(), 1.0).is_none());
    }

    #[test]
    fn knn_matches_brute_force() {
        let pts = cloud(500, 3);
        let tree = KdTree::build(&pts);
        for q in [0, 17, 250, 499] {
            let mut brute: Vec<(f64, usize)> = pts
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != q)
                .map(|(i, p)| (p.distance_squared(pts[q]), i))
                .collect();
            brute.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let got: Vec<usize> = tree.knn_excluding(q, 5).into_iter().map(|x| x.0).collect();
            let want: Vec<usize> = brute[..5].iter().map(|x| x.1).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn knn_on_duplicates_prefers_low_index() {
        let pts = vec![Vec3::new(0.0, 0.0, 0.0); 20];
        let tree = KdTree::build(&pts);
        let ids: Vec<usize> = tree.knn_excluding(10, 3).into_iter().map(|x| x.0).collect();
        assert_eq!(ids, vec![0, 1, 2]);
    }
}
