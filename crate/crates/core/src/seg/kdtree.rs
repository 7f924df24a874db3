/// Static 3D kd-tree over a borrowed point set.
///
/// The tree is implicit: `order` is a permutation of point indices where each
/// subslice's middle element is the splitting node, alternating x, y, z with
/// depth. Queries return the nearest point within a radius, preferring the
/// lowest point index among equidistant candidates.
#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    points: &'a [[f64; 3]],
    order: Vec<u32>,
}

const LEAF: usize = 8;

impl<'a> KdTree<'a> {
    /// Index the points whose position `keep` accepts (all when `None`).
    pub fn build(points: &'a [[f64; 3]], keep: Option<&dyn Fn(usize) -> bool>) -> Self {
        let mut order: Vec<u32> = (0..points.len())
            .filter(|&i| points[i].iter().all(|v| v.is_finite()))
            .filter(|&i| keep.is_none_or(|k| k(i)))
            .map(|i| i as u32)
            .collect();
        split(points, &mut order, 0);
        Self { points, order }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Nearest indexed point with squared distance `<= radius²`.
    pub fn nearest_within(&self, query: [f64; 3], radius: f64) -> Option<usize> {
        if !query.iter().all(|v| v.is_finite()) {
            return None;
        }
        let mut best = Best {
            dist2: radius * radius,
            index: None,
        };
        self.search(&self.order, 0, query, &mut best);
        best.index.map(|i| i as usize)
    }

    fn search(&self, slice: &[u32], depth: usize, q: [f64; 3], best: &mut Best) {
        if slice.len() <= LEAF {
            for &i in slice {
                best.offer(dist2(self.points[i as usize], q), i);
            }
            return;
        }
        let mid = slice.len() / 2;
        let node = slice[mid];
        let axis = depth % 3;
        best.offer(dist2(self.points[node as usize], q), node);

        let diff = q[axis] - self.points[node as usize][axis];
        let (near, far) = if diff < 0.0 {
            (&slice[..mid], &slice[mid + 1..])
        } else {
            (&slice[mid + 1..], &slice[..mid])
        };
        self.search(near, depth + 1, q, best);
        // `<=`: an equidistant point with a lower index may sit across the plane.
        if diff * diff <= best.dist2 {
            self.search(far, depth + 1, q, best);
        }
    }
}

struct Best {
    dist2: f64,
    index: Option<u32>,
}

impl Best {
    fn offer(&mut self, d2: f64, i: u32) {
        let better = d2 < self.dist2 || (d2 == self.dist2 && self.index.is_none_or(|b| i < b));
        if better {
            self.dist2 = d2;
            self.index = Some(i);
        }
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

fn split(points: &[[f64; 3]], slice: &mut [u32], depth: usize) {
    if slice.len() <= LEAF {
        return;
    }
    let axis = depth % 3;
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then(a.cmp(&b))
    });
    let (left, rest) = slice.split_at_mut(mid);
    split(points, left, depth + 1);
    split(points, &mut rest[1..], depth + 1);
}
