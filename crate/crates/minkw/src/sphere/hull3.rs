//! Incremental convex hull in R^3. Inputs at this crate's scale are a few
//! hundred points, so the O(n * faces) visibility scan is fine.

#[derive(Debug, Clone, Copy)]
pub struct Tri {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

type V3 = [f64; 3];

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

/// Unit outward normal and offset of the plane through a triangle.
pub fn tri_plane(pts: &[V3], t: &Tri) -> (V3, f64) {
    let n = cross(sub(pts[t.b], pts[t.a]), sub(pts[t.c], pts[t.a]));
    let len = norm(n).max(f64::MIN_POSITIVE);
    let n = [n[0] / len, n[1] / len, n[2] / len];
    (n, dot(n, pts[t.a]))
}

/// Convex hull triangles with outward orientation, or `None` when the points
/// are degenerate (fewer than 4 affinely independent points).
pub fn convex_hull_3d(pts: &[V3]) -> Option<Vec<Tri>> {
    let n = pts.len();
    if n < 4 {
        return None;
    }
    let scale = pts.iter().map(|p| norm(*p)).fold(0.0_f64, f64::max).max(1e-300);
    let eps = 1e-12 * scale;

    // initial simplex: spread-out extremes
    let i0 = (0..n)
        .min_by(|&i, &j| {
            pts[i]
                .partial_cmp(&pts[j])
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap();
    let i1 = (0..n)
        .max_by(|&i, &j| {
            norm(sub(pts[i], pts[i0])).total_cmp(&norm(sub(pts[j], pts[i0])))
        })
        .unwrap();
    if norm(sub(pts[i1], pts[i0])) <= eps {
        return None;
    }
    let line = sub(pts[i1], pts[i0]);
    let dist_line = |p: V3| norm(cross(sub(p, pts[i0]), line)) / norm(line);
    let i2 = (0..n).max_by(|&i, &j| dist_line(pts[i]).total_cmp(&dist_line(pts[j])))?;
    if dist_line(pts[i2]) <= eps {
        return None;
    }
    let nrm = cross(sub(pts[i1], pts[i0]), sub(pts[i2], pts[i0]));
    let dist_plane = |p: V3| dot(sub(p, pts[i0]), nrm).abs() / norm(nrm);
    let i3 = (0..n).max_by(|&i, &j| dist_plane(pts[i]).total_cmp(&dist_plane(pts[j])))?;
    if dist_plane(pts[i3]) <= eps {
        return None;
    }

    let mut faces: Vec<Tri> = Vec::new();
    let centroid = [
        (pts[i0][0] + pts[i1][0] + pts[i2][0] + pts[i3][0]) / 4.0,
        (pts[i0][1] + pts[i1][1] + pts[i2][1] + pts[i3][1]) / 4.0,
        (pts[i0][2] + pts[i1][2] + pts[i2][2] + pts[i3][2]) / 4.0,
    ];
    for (a, b, c) in [(i0, i1, i2), (i0, i1, i3), (i0, i2, i3), (i1, i2, i3)] {
        let mut t = Tri { a, b, c };
        let (nrm, off) = tri_plane(pts, &t);
        if dot(nrm, centroid) > off {
            std::mem::swap(&mut t.b, &mut t.c);
        }
        faces.push(t);
    }

    let in_simplex = [i0, i1, i2, i3];
    for idx in 0..n {
        if in_simplex.contains(&idx) {
            continue;
        }
        let p = pts[idx];
        // faces that see p
        let mut visible = vec![false; faces.len()];
        let mut any = false;
        for (f, face) in faces.iter().enumerate() {
            let (nrm, off) = tri_plane(pts, face);
            if dot(nrm, p) - off > eps {
                visible[f] = true;
                any = true;
            }
        }
        if !any {
            continue;
        }
        // horizon: directed edges of visible faces whose twin is hidden
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        let edge_of = |t: &Tri| [(t.a, t.b), (t.b, t.c), (t.c, t.a)];
        let mut visible_edges = std::collections::HashSet::new();
        for (f, face) in faces.iter().enumerate() {
            if visible[f] {
                for e in edge_of(face) {
                    visible_edges.insert(e);
                }
            }
        }
        for (f, face) in faces.iter().enumerate() {
            if !visible[f] {
                continue;
            }
            for (u, v) in edge_of(face) {
                // edge (u, v) is on the horizon if its reverse is not visible
                if !visible_edges.contains(&(v, u)) {
                    horizon.push((u, v));
                }
            }
        }
        let mut next: Vec<Tri> = faces
            .iter()
            .enumerate()
            .filter(|(f, _)| !visible[*f])
            .map(|(_, t)| *t)
            .collect();
        for (u, v) in horizon {
            next.push(Tri { a: u, b: v, c: idx });
        }
        faces = next;
    }
    Some(faces)
}

/// Indices of hull vertices (points used by at least one face).
pub fn hull_vertex_set(faces: &[Tri]) -> std::collections::BTreeSet<usize> {
    let mut s = std::collections::BTreeSet::new();
    for t in faces {
        s.insert(t.a);
        s.insert(t.b);
        s.insert(t.c);
    }
    s
}
