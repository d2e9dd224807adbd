//! Directions on S^(n-1), support vectors, and the convex polytopes cut out
//! by halfspaces { x : <x, u_i> <= h_i }.

pub mod hull3;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::lowdisc;
use crate::tol;

pub type V3 = [f64; 3];

pub fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("dimension must be 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("direction {index} is not unit length (|u| - 1 = {defect:e})")]
    NotUnit { index: usize, defect: f64 },
    #[error("directions {i} and {j} coincide within tolerance")]
    Duplicate { i: usize, j: usize },
    #[error("support value at direction {index} must be positive, got {value}")]
    NonPositiveSupport { index: usize, value: f64 },
    #[error("support vector length {got} does not match direction count {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("halfspace intersection is unbounded: directions lie in a closed halfspace")]
    Unbounded,
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
}

/// A validated set of unit directions, with optional quadrature weights
/// summing to the sphere area (used to synthesize isotropic data).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionSet {
    dim: usize,
    dirs: Vec<V3>,
    pub weights: Option<Vec<f64>>,
}

impl DirectionSet {
    pub fn new(dim: usize, dirs: Vec<V3>) -> Result<DirectionSet, GeomError> {
        if dim != 2 && dim != 3 {
            return Err(GeomError::BadDimension(dim));
        }
        for (i, d) in dirs.iter().enumerate() {
            if dim == 2 && d[2] != 0.0 {
                return Err(GeomError::Degenerate(format!(
                    "direction {i} has a z component in dimension 2"
                )));
            }
            let defect = norm(*d) - 1.0;
            if defect.abs() > tol::UNIT {
                return Err(GeomError::NotUnit { index: i, defect });
            }
        }
        for i in 0..dirs.len() {
            for j in (i + 1)..dirs.len() {
                if norm(sub(dirs[i], dirs[j])) < tol::DUP {
                    return Err(GeomError::Duplicate { i, j });
                }
            }
        }
        Ok(DirectionSet { dim, dirs, weights: None })
    }

    /// Evenly spaced angles on the circle; weights 2 pi / count.
    pub fn uniform_circle(count: usize) -> DirectionSet {
        Self::uniform_circle_offset(count, 0.0)
    }

    pub fn uniform_circle_offset(count: usize, offset: f64) -> DirectionSet {
        assert!(count >= 3);
        let dirs = (0..count)
            .map(|k| {
                let a = offset + 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                [a.cos(), a.sin(), 0.0]
            })
            .collect();
        let w = 2.0 * std::f64::consts::PI / count as f64;
        DirectionSet {
            dim: 2,
            dirs,
            weights: Some(vec![w; count]),
        }
    }

    /// Antipodally symmetrized Fibonacci lattice; weights 4 pi / len.
    pub fn fibonacci_symmetric(count: usize) -> DirectionSet {
        let base = lowdisc::fibonacci_sphere(count);
        let mut dirs: Vec<V3> = Vec::with_capacity(2 * count);
        for p in base {
            let q = scale(p, -1.0);
            if dirs
                .iter()
                .all(|d| norm(sub(*d, p)) >= tol::DUP && norm(sub(*d, q)) >= tol::DUP)
            {
                dirs.push(p);
                dirs.push(q);
            }
        }
        let w = 4.0 * std::f64::consts::PI / dirs.len() as f64;
        let n = dirs.len();
        DirectionSet {
            dim: 3,
            dirs,
            weights: Some(vec![w; n]),
        }
    }

    pub fn from_angles(angles: &[f64]) -> Result<DirectionSet, GeomError> {
        Self::new(
            2,
            angles.iter().map(|a| [a.cos(), a.sin(), 0.0]).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn dir(&self, i: usize) -> V3 {
        self.dirs[i]
    }

    pub fn dirs(&self) -> &[V3] {
        &self.dirs
    }

    /// Is the set symmetric under u -> -u (every direction has its antipode)?
    pub fn is_symmetric(&self) -> bool {
        self.dirs.iter().all(|d| {
            let m = scale(*d, -1.0);
            self.dirs.iter().any(|e| norm(sub(*e, m)) < tol::DUP)
        })
    }

    /// Surface-area weights: stored ones, or the uniform default.
    pub fn quad_weights(&self) -> Vec<f64> {
        match &self.weights {
            Some(w) => w.clone(),
            None => {
                let total = crate::weights::sphere_area(self.dim);
                vec![total / self.len() as f64; self.len()]
            }
        }
    }
}

/// Check a support vector against a direction set: matching length, positive,
/// finite entries.
pub fn validate_support(dirs: &DirectionSet, h: &[f64]) -> Result<(), GeomError> {
    if h.len() != dirs.len() {
        return Err(GeomError::LengthMismatch {
            got: h.len(),
            expected: dirs.len(),
        });
    }
    for (i, v) in h.iter().enumerate() {
        if !(v.is_finite() && *v > 0.0) {
            return Err(GeomError::NonPositiveSupport { index: i, value: *v });
        }
    }
    Ok(())
}

/// One facet of a polytope: the input direction it came from, its plane, the
/// cyclic vertex ids, and its surface area. Touching facets have zero area.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Facet {
    pub dir_index: usize,
    pub normal: V3,
    pub offset: f64,
    pub vertex_ids: Vec<usize>,
    pub area: f64,
}

/// Bounded intersection of halfspaces over a direction set, with bookkeeping
/// aligned to the input directions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Polytope {
    pub dim: usize,
    pub dirs: Vec<V3>,
    pub vertices: Vec<V3>,
    pub facets: Vec<Facet>,
    /// Support values of the body at every input direction: h* <= h with
    /// equality exactly on directions whose plane touches the body.
    pub support: Vec<f64>,
    pub active: Vec<bool>,
}

impl Polytope {
    /// Dilate by s > 0 without rebuilding the hull: offsets, support numbers
    /// and vertices scale linearly, facet areas by s^(n-1).
    pub fn scaled(&self, s: f64) -> Polytope {
        debug_assert!(s > 0.0);
        let area_factor = s.powi(self.dim as i32 - 1);
        Polytope {
            dim: self.dim,
            dirs: self.dirs.clone(),
            vertices: self.vertices.iter().map(|v| scale(*v, s)).collect(),
            facets: self
                .facets
                .iter()
                .map(|f| Facet {
                    dir_index: f.dir_index,
                    normal: f.normal,
                    offset: s * f.offset,
                    vertex_ids: f.vertex_ids.clone(),
                    area: area_factor * f.area,
                })
                .collect(),
            support: self.support.iter().map(|h| s * h).collect(),
            active: self.active.clone(),
        }
    }

    pub fn support_eval(&self, u: V3) -> f64 {
        self.vertices
            .iter()
            .map(|v| dot(*v, u))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn radial_eval(&self, u: V3) -> f64 {
        let mut rho = f64::INFINITY;
        for f in &self.facets {
            let d = dot(u, f.normal);
            if d > 1e-15 {
                rho = rho.min(f.offset / d);
            }
        }
        rho
    }

    /// Euclidean volume via the support decomposition (1/n) sum h*_i area_i.
    pub fn volume(&self) -> f64 {
        self.facets
            .iter()
            .map(|f| f.offset * f.area)
            .sum::<f64>()
            / self.dim as f64
    }

    pub fn total_facet_area(&self) -> f64 {
        self.facets.iter().map(|f| f.area).sum()
    }

    /// Norm of sum(area_i * u_i); zero for a closed surface.
    pub fn area_vector_defect(&self) -> f64 {
        let mut s = [0.0; 3];
        for f in &self.facets {
            for k in 0..3 {
                s[k] += f.area * f.normal[k];
            }
        }
        norm(s)
    }

    pub fn facet_for_dir(&self, dir_index: usize) -> Option<&Facet> {
        self.facets.iter().find(|f| f.dir_index == dir_index)
    }

    /// Facet areas aligned to the input direction set (zero when inactive).
    pub fn facet_areas_by_dir(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dirs.len()];
        for f in &self.facets {
            out[f.dir_index] = f.area;
        }
        out
    }
}

/// Intersect the halfspaces { <x, u_i> <= h_i }. Directions that do not
/// touch the body are retained as inactive with zero facet area.
pub fn wulff_shape(dirs: &DirectionSet, h: &[f64]) -> Result<Polytope, GeomError> {
    validate_support(dirs, h)?;
    match dirs.dim() {
        2 => wulff_2d(dirs, h),
        3 => wulff_3d(dirs, h),
        d => Err(GeomError::BadDimension(d)),
    }
}

/// Monotone chain on the dual points; keeps collinear boundary points so that
/// touching halfplanes stay attributed. Returns hull indices in ccw order.
fn hull2_indices(pts: &[[f64; 2]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| {
        pts[a][0]
            .total_cmp(&pts[b][0])
            .then(pts[a][1].total_cmp(&pts[b][1]))
    });
    let scale2 = pts
        .iter()
        .map(|p| p[0] * p[0] + p[1] * p[1])
        .fold(0.0_f64, f64::max);
    let eps = tol::DEGENERACY * scale2.max(1e-300);
    let cross2 = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let build = |iter: &mut dyn Iterator<Item = usize>| -> Vec<usize> {
        let mut chain: Vec<usize> = Vec::new();
        for i in iter {
            while chain.len() >= 2 {
                let o = pts[chain[chain.len() - 2]];
                let a = pts[chain[chain.len() - 1]];
                if cross2(o, a, pts[i]) <= eps {
                    chain.pop();
                } else {
                    break;
                }
            }
            chain.push(i);
        }
        chain
    };
    let mut lower = build(&mut idx.iter().copied());
    let mut upper = build(&mut idx.iter().rev().copied());
    lower.pop();
    upper.pop();
    lower.append(&mut upper);
    lower
}

fn wulff_2d(dirs: &DirectionSet, h: &[f64]) -> Result<Polytope, GeomError> {
    let m = dirs.len();
    if m < 3 {
        return Err(GeomError::Unbounded);
    }
    let duals: Vec<[f64; 2]> = (0..m)
        .map(|i| {
            let d = dirs.dir(i);
            [d[0] / h[i], d[1] / h[i]]
        })
        .collect();
    let hull = hull2_indices(&duals);
    if hull.len() < 3 {
        return Err(GeomError::Unbounded);
    }
    // origin strictly inside the dual hull <=> bounded intersection
    let scale_d = duals
        .iter()
        .map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt())
        .fold(0.0_f64, f64::max);
    for k in 0..hull.len() {
        let a = duals[hull[k]];
        let b = duals[hull[(k + 1) % hull.len()]];
        let e = [b[0] - a[0], b[1] - a[1]];
        let c = e[0] * (-a[1]) - e[1] * (-a[0]); // cross(e, -a)
        let elen = (e[0] * e[0] + e[1] * e[1]).sqrt().max(1e-300);
        if c / elen <= 1e-12 * scale_d {
            return Err(GeomError::Unbounded);
        }
    }
    // primal vertex between consecutive hull directions
    let k_hull = hull.len();
    let mut vertices: Vec<V3> = Vec::with_capacity(k_hull);
    for k in 0..k_hull {
        let i = hull[k];
        let j = hull[(k + 1) % k_hull];
        let (ui, uj) = (dirs.dir(i), dirs.dir(j));
        let det = ui[0] * uj[1] - ui[1] * uj[0];
        if det.abs() < 1e-300 {
            return Err(GeomError::Degenerate(format!(
                "parallel active directions {i} and {j}"
            )));
        }
        let x = (h[i] * uj[1] - h[j] * ui[1]) / det;
        let y = (ui[0] * h[j] - uj[0] * h[i]) / det;
        vertices.push([x, y, 0.0]);
    }
    // facet k spans vertices k-1 .. k
    let mut facets = Vec::with_capacity(k_hull);
    let mut active = vec![false; m];
    for k in 0..k_hull {
        let i = hull[k];
        active[i] = true;
        let v_prev = (k + k_hull - 1) % k_hull;
        let e = sub(vertices[k], vertices[v_prev]);
        facets.push(Facet {
            dir_index: i,
            normal: dirs.dir(i),
            offset: h[i],
            vertex_ids: vec![v_prev, k],
            area: norm(e),
        });
    }
    let mut support = vec![0.0; m];
    let poly_partial = Polytope {
        dim: 2,
        dirs: dirs.dirs().to_vec(),
        vertices,
        facets,
        support: vec![],
        active: vec![],
    };
    for i in 0..m {
        support[i] = if active[i] {
            h[i]
        } else {
            poly_partial.support_eval(dirs.dir(i))
        };
    }
    Ok(Polytope {
        support,
        active,
        ..poly_partial
    })
}

fn wulff_3d(dirs: &DirectionSet, h: &[f64]) -> Result<Polytope, GeomError> {
    let m = dirs.len();
    if m < 4 {
        return Err(GeomError::Unbounded);
    }
    let duals: Vec<V3> = (0..m).map(|i| scale(dirs.dir(i), 1.0 / h[i])).collect();
    let faces = hull3::convex_hull_3d(&duals).ok_or(GeomError::Unbounded)?;
    let scale_d = duals.iter().map(|d| norm(*d)).fold(0.0_f64, f64::max);
    // primal vertex per dual face; coplanar faces collapse to one vertex
    let mut raw: Vec<V3> = Vec::with_capacity(faces.len());
    for t in &faces {
        let (n, off) = hull3::tri_plane(&duals, t);
        if off <= 1e-12 * scale_d {
            return Err(GeomError::Unbounded);
        }
        raw.push(scale(n, 1.0 / off));
    }
    let scale_v = raw.iter().map(|v| norm(*v)).fold(0.0_f64, f64::max);
    let merge_tol = tol::FACET_MERGE * scale_v.max(1e-300);
    let mut vertices: Vec<V3> = Vec::new();
    let mut face_vertex: Vec<usize> = Vec::with_capacity(raw.len());
    for v in &raw {
        let found = vertices.iter().position(|w| norm(sub(*w, *v)) < merge_tol);
        match found {
            Some(id) => face_vertex.push(id),
            None => {
                vertices.push(*v);
                face_vertex.push(vertices.len() - 1);
            }
        }
    }
    // facet per active direction: ring of primal vertices around it
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (f, t) in faces.iter().enumerate() {
        for i in [t.a, t.b, t.c] {
            if !incident[i].contains(&face_vertex[f]) {
                incident[i].push(face_vertex[f]);
            }
        }
    }
    let mut facets = Vec::new();
    let mut active = vec![false; m];
    for i in 0..m {
        if incident[i].is_empty() {
            continue;
        }
        active[i] = true;
        let u = dirs.dir(i);
        // local frame perpendicular to u
        let seed = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let e1n = cross(u, seed);
        let e1 = scale(e1n, 1.0 / norm(e1n));
        let e2 = cross(u, e1);
        let ring = &incident[i];
        let mut c = [0.0; 3];
        for &vid in ring {
            c = [
                c[0] + vertices[vid][0] / ring.len() as f64,
                c[1] + vertices[vid][1] / ring.len() as f64,
                c[2] + vertices[vid][2] / ring.len() as f64,
            ];
        }
        let mut ordered: Vec<usize> = ring.clone();
        ordered.sort_by(|&a, &b| {
            let va = sub(vertices[a], c);
            let vb = sub(vertices[b], c);
            let aa = dot(va, e2).atan2(dot(va, e1));
            let ab = dot(vb, e2).atan2(dot(vb, e1));
            aa.total_cmp(&ab)
        });
        let mut area = 0.0;
        for k in 0..ordered.len() {
            let va = sub(vertices[ordered[k]], c);
            let vb = sub(vertices[ordered[(k + 1) % ordered.len()]], c);
            area += 0.5 * dot(u, cross(va, vb));
        }
        facets.push(Facet {
            dir_index: i,
            normal: u,
            offset: h[i],
            vertex_ids: ordered,
            area: area.abs(),
        });
    }
    let poly_partial = Polytope {
        dim: 3,
        dirs: dirs.dirs().to_vec(),
        vertices,
        facets,
        support: vec![],
        active: vec![],
    };
    let mut support = vec![0.0; m];
    for i in 0..m {
        support[i] = if active[i] {
            h[i]
        } else {
            poly_partial.support_eval(dirs.dir(i))
        };
    }
    Ok(Polytope {
        support,
        active,
        ..poly_partial
    })
}

/// Support-level L^p combination of two bodies over a shared direction set.
/// p = 0 is the geometric mean. The Wulff shape of the result contains the
/// exact combination, with equality in the plane.
pub fn lp_combine(h_k: &[f64], h_l: &[f64], lambda: f64, p: f64) -> Vec<f64> {
    assert_eq!(h_k.len(), h_l.len());
    assert!((0.0..=1.0).contains(&lambda));
    h_k.iter()
        .zip(h_l)
        .map(|(&a, &b)| {
            if p == 0.0 {
                a.powf(1.0 - lambda) * b.powf(lambda)
            } else {
                ((1.0 - lambda) * a.powf(p) + lambda * b.powf(p)).powf(1.0 / p)
            }
        })
        .collect()
}

/// Sup distance between support functions, sampled over a low-discrepancy set
/// plus both bodies' facet normals and vertex directions. For polytope pairs
/// the supremum is attained in that direction family, so this is exact up to
/// roundoff.
pub fn hausdorff_distance(p: &Polytope, q: &Polytope, min_samples: usize) -> f64 {
    assert_eq!(p.dim, q.dim);
    let mut best = 0.0_f64;
    let mut probe = |u: V3| {
        let d = (p.support_eval(u) - q.support_eval(u)).abs();
        if d > best {
            best = d;
        }
    };
    for u in lowdisc::sphere_sample(p.dim, min_samples.max(4096)) {
        probe(u);
    }
    for poly in [p, q] {
        for f in &poly.facets {
            probe(f.normal);
        }
        for v in &poly.vertices {
            let n = norm(*v);
            if n > 1e-12 {
                probe(scale(*v, 1.0 / n));
            }
        }
    }
    best
}
