//! Incremental 3D convex hull and its volume.
//!
//! Points are inserted one at a time; the faces a new point can see are
//! removed and the horizon is re-capped with triangles to the new point.
//! With integer-valued coordinates (as used for voxel centers) every
//! orientation test is exact in `f64`.

use std::collections::HashSet;

#[inline]
fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Six times the signed volume of tetrahedron `abcd`; positive when `d`
/// lies on the side the right-handed normal of `abc` points to.
#[inline]
pub fn orient(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3], d: &[f64; 3]) -> f64 {
    dot(&cross(&sub(b, a), &sub(c, a)), &sub(d, a))
}

/// Triangulated hull with outward-facing faces.
#[derive(Debug, Clone)]
pub struct ConvexHull {
    pub faces: Vec<[usize; 3]>,
}

impl ConvexHull {
    /// Build the hull, or `None` when the points are coplanar, collinear or
    /// coincident.
    pub fn build(points: &[[f64; 3]]) -> Option<Self> {
        if points.len() < 4 {
            return None;
        }
        let p0 = 0;
        let p1 = (1..points.len()).max_by(|&i, &j| {
            let di = sub(&points[i], &points[p0]);
            let dj = sub(&points[j], &points[p0]);
            dot(&di, &di).total_cmp(&dot(&dj, &dj))
        })?;
        let e = sub(&points[p1], &points[p0]);
        if dot(&e, &e) == 0.0 {
            return None;
        }
        let area = |i: usize| {
            let c = cross(&e, &sub(&points[i], &points[p0]));
            dot(&c, &c)
        };
        let p2 = (0..points.len()).max_by(|&i, &j| area(i).total_cmp(&area(j)))?;
        if area(p2) == 0.0 {
            return None;
        }
        let vol = |i: usize| orient(&points[p0], &points[p1], &points[p2], &points[i]).abs();
        let p3 = (0..points.len()).max_by(|&i, &j| vol(i).total_cmp(&vol(j)))?;
        if vol(p3) == 0.0 {
            return None;
        }

        // scale-aware tolerance so float clouds don't flip on rounding noise;
        // integer inputs stay well below it
        let extent = points
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1.0);
        let eps = extent.powi(3) * 1e-13;

        let tet = [p0, p1, p2, p3];
        let mut faces: Vec<[usize; 3]> = Vec::new();
        for skip in 0..4 {
            let mut f: Vec<usize> = tet.iter().copied().filter(|&v| v != tet[skip]).collect();
            if orient(
                &points[f[0]],
                &points[f[1]],
                &points[f[2]],
                &points[tet[skip]],
            ) > 0.0
            {
                f.swap(1, 2);
            }
            faces.push([f[0], f[1], f[2]]);
        }

        let mut visible = Vec::new();
        let mut edges: HashSet<(usize, usize)> = HashSet::new();
        for (pi, p) in points.iter().enumerate() {
            if tet.contains(&pi) {
                continue;
            }
            visible.clear();
            for (fi, f) in faces.iter().enumerate() {
                if orient(&points[f[0]], &points[f[1]], &points[f[2]], p) > eps {
                    visible.push(fi);
                }
            }
            if visible.is_empty() {
                continue;
            }
            edges.clear();
            for &fi in &visible {
                let f = faces[fi];
                edges.insert((f[0], f[1]));
                edges.insert((f[1], f[2]));
                edges.insert((f[2], f[0]));
            }
            let mut horizon: Vec<(usize, usize)> = edges
                .iter()
                .copied()
                .filter(|&(a, b)| !edges.contains(&(b, a)))
                .collect();
            horizon.sort_unstable();
            let mut keep = vec![true; faces.len()];
            for &fi in &visible {
                keep[fi] = false;
            }
            let mut k = keep.iter();
            faces.retain(|_| *k.next().unwrap());
            faces.extend(horizon.into_iter().map(|(a, b)| [a, b, pi]));
        }
        Some(ConvexHull { faces })
    }

    pub fn volume(&self, points: &[[f64; 3]]) -> f64 {
        let r = &points[self.faces[0][0]];
        self.faces
            .iter()
            .map(|f| -orient(&points[f[0]], &points[f[1]], &points[f[2]], r))
            .sum::<f64>()
            / 6.0
    }
}

/// Hull volume of a point cloud, `None` if it is affinely degenerate.
pub fn convex_hull_volume(points: &[[f64; 3]]) -> Option<f64> {
    ConvexHull::build(points).map(|h| h.volume(points))
}
