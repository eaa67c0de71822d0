//! Planar primitives: convex hulls, halfplane clipping, edge-merge sums.

type P2 = [f64; 2];

fn cross(o: P2, a: P2, b: P2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn scale_of(points: &[P2]) -> f64 {
    points
        .iter()
        .fold(1.0_f64, |acc, p| acc.max(p[0].abs()).max(p[1].abs()))
}

/// Convex hull in counterclockwise order with collinear points removed.
/// Degenerate inputs yield one (point) or two (segment) vertices.
pub fn convex_hull(points: &[P2]) -> Vec<P2> {
    let mut pts: Vec<P2> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let tol = 1e-12 * scale_of(&pts);
    pts.dedup_by(|a, b| (a[0] - b[0]).abs() <= tol && (a[1] - b[1]).abs() <= tol);
    if pts.len() <= 2 {
        return pts;
    }
    let area_tol = tol * scale_of(&pts);
    let mut hull: Vec<P2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &P2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= area_tol
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() < 2 {
        // all points collinear: keep the two extremes
        return vec![pts[0], pts[pts.len() - 1]];
    }
    hull
}

pub fn polygon_area(poly: &[P2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut a = 0.0;
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

/// Convex polygon (CCW) whose edge `i` runs from vertex `i` to vertex `i+1`
/// and carries the index of the halfplane that produced it (`None` for the
/// initial bounding box).
#[derive(Debug, Clone)]
pub struct LabeledPolygon {
    pub vertices: Vec<P2>,
    pub labels: Vec<Option<usize>>,
}

impl LabeledPolygon {
    pub fn bounding_box(r: f64) -> Self {
        Self {
            vertices: vec![[-r, -r], [r, -r], [r, r], [-r, r]],
            labels: vec![None; 4],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Intersects with `{x | f·x <= b}`.
    pub fn clip(&mut self, f: P2, b: f64, label: usize, tol: f64) {
        let n = self.vertices.len();
        if n == 0 {
            return;
        }
        let s: Vec<f64> = self
            .vertices
            .iter()
            .map(|v| f[0] * v[0] + f[1] * v[1] - b)
            .collect();
        if s.iter().all(|&v| v <= tol) {
            return;
        }
        if s.iter().all(|&v| v > tol) {
            self.vertices.clear();
            self.labels.clear();
            return;
        }
        let mut verts = Vec::with_capacity(n + 1);
        let mut labels = Vec::with_capacity(n + 1);
        for i in 0..n {
            let j = (i + 1) % n;
            let (vi, vj) = (self.vertices[i], self.vertices[j]);
            let (ini, inj) = (s[i] <= tol, s[j] <= tol);
            let cut = |si: f64, sj: f64| {
                let t = si / (si - sj);
                [vi[0] + t * (vj[0] - vi[0]), vi[1] + t * (vj[1] - vi[1])]
            };
            match (ini, inj) {
                (true, true) => {
                    verts.push(vi);
                    labels.push(self.labels[i]);
                }
                (true, false) => {
                    verts.push(vi);
                    labels.push(self.labels[i]);
                    if s[i] < 0.0 {
                        verts.push(cut(s[i], s[j]));
                        labels.push(Some(label));
                    } else {
                        // vi lies on the line: the new edge starts here
                        let last = labels.len() - 1;
                        labels[last] = Some(label);
                    }
                }
                (false, true) => {
                    if s[j] < 0.0 {
                        verts.push(cut(s[i], s[j]));
                        labels.push(self.labels[i]);
                    }
                }
                (false, false) => {}
            }
        }
        // merge coincident consecutive vertices (keep the later edge label)
        let scale = scale_of(&verts);
        let eps = 1e-13 * scale;
        let mut out_v: Vec<P2> = Vec::with_capacity(verts.len());
        let mut out_l: Vec<Option<usize>> = Vec::with_capacity(verts.len());
        for (v, l) in verts.into_iter().zip(labels) {
            if let Some(last) = out_v.last() {
                if (last[0] - v[0]).abs() <= eps && (last[1] - v[1]).abs() <= eps {
                    out_v.pop();
                    out_l.pop();
                }
            }
            out_v.push(v);
            out_l.push(l);
        }
        while out_v.len() > 1 {
            let (first, last) = (out_v[0], out_v[out_v.len() - 1]);
            if (first[0] - last[0]).abs() <= eps && (first[1] - last[1]).abs() <= eps {
                out_v.pop();
                out_l.pop();
            } else {
                break;
            }
        }
        self.vertices = out_v;
        self.labels = out_l;
    }

    /// Labels of edges longer than `min_len`.
    pub fn supporting_labels(&self, min_len: f64) -> Vec<Option<usize>> {
        let n = self.vertices.len();
        let mut out = Vec::new();
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            if len > min_len {
                out.push(self.labels[i]);
            }
        }
        out
    }
}

/// Minkowski sum of two CCW convex polygons by merging edges in angular
/// order. Inputs with fewer than three vertices fall back to the hull of
/// pairwise sums.
pub fn minkowski_sum(p: &[P2], q: &[P2]) -> Vec<P2> {
    if p.len() < 3 || q.len() < 3 {
        let sums: Vec<P2> = p
            .iter()
            .flat_map(|a| q.iter().map(move |b| [a[0] + b[0], a[1] + b[1]]))
            .collect();
        return convex_hull(&sums);
    }
    let lowest = |poly: &[P2]| {
        (0..poly.len())
            .min_by(|&i, &j| {
                poly[i][1]
                    .total_cmp(&poly[j][1])
                    .then(poly[i][0].total_cmp(&poly[j][0]))
            })
            .unwrap()
    };
    let (i0, j0) = (lowest(p), lowest(q));
    let (n, m) = (p.len(), q.len());
    let mut out = Vec::with_capacity(n + m);
    let (mut i, mut j) = (0usize, 0usize);
    while i < n || j < m {
        let a = p[(i0 + i) % n];
        let b = q[(j0 + j) % m];
        out.push([a[0] + b[0], a[1] + b[1]]);
        let ea = {
            let a2 = p[(i0 + i + 1) % n];
            [a2[0] - a[0], a2[1] - a[1]]
        };
        let eb = {
            let b2 = q[(j0 + j + 1) % m];
            [b2[0] - b[0], b2[1] - b[1]]
        };
        let c = ea[0] * eb[1] - ea[1] * eb[0];
        if j >= m || (i < n && c > 0.0) {
            i += 1;
        } else if i >= n || c < 0.0 {
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    // removes collinear vertices created by parallel edges
    convex_hull(&out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_square_with_interior_points() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5], [0.5, 0.0]];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!((polygon_area(&h) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn clip_labels_new_edge() {
        let mut poly = LabeledPolygon::bounding_box(10.0);
        poly.clip([1.0, 0.0], 1.0, 0, 1e-12);
        poly.clip([-1.0, 0.0], 1.0, 1, 1e-12);
        poly.clip([0.0, 1.0], 1.0, 2, 1e-12);
        poly.clip([0.0, -1.0], 1.0, 3, 1e-12);
        poly.clip([1.0, 1.0], 5.0, 4, 1e-12);
        let mut labels: Vec<_> = poly.supporting_labels(1e-9).into_iter().flatten().collect();
        labels.sort();
        assert_eq!(labels, vec![0, 1, 2, 3]);
        assert!((polygon_area(&poly.vertices) - 4.0).abs() < 1e-12);
        poly.clip([1.0, 0.0], -2.0, 5, 1e-12);
        assert!(poly.is_empty());
    }

    #[test]
    fn edge_merge_matches_pairwise_hull() {
        let sq = convex_hull(&[[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let diamond = convex_hull(&[[r * 2.0, 0.0], [0.0, r * 2.0], [-r * 2.0, 0.0], [0.0, -r * 2.0]]);
        let s = minkowski_sum(&sq, &diamond);
        assert_eq!(s.len(), 8);
        let pairwise: Vec<P2> = sq
            .iter()
            .flat_map(|a| diamond.iter().map(move |b| [a[0] + b[0], a[1] + b[1]]))
            .collect();
        let h = convex_hull(&pairwise);
        assert!((polygon_area(&s) - polygon_area(&h)).abs() < 1e-12);
    }
}
