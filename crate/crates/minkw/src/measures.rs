//! Weighted quantities of a polytope: body mass, weighted facet areas, L^p
//! and cone surface measures, weighted perimeter, and mixed measures.
//!
//! Body mass is computed by two independent routes that must agree:
//!
//! * radial route (default): the mass of the cone over facet F_i equals the
//!   integral of the per-ray primitive P(r) = int_0^r psi(t) t^(n-1) dt over
//!   the spherical patch cut out by the cone, pulled back to the facet via
//!   du = h_i / |y|^n dH(y);
//! * cone route: the same cone mass written as a double integral of psi
//!   itself, h_i * int_F int_0^1 psi(s|y|) s^(n-1) ds dH(y), which never
//!   touches the radial primitive.
//!
//! A low-discrepancy ray sample is kept as a third, mesh-accuracy evaluator
//! for sanity checks.

use crate::num::lowdisc;
use crate::num::quad::gk15_value;
use crate::num::{integrate, integrate_triangle};
use crate::sphere::{cross, dot, norm, scale, sub, Polytope, V3};
use crate::tol;
use crate::weights::{sphere_area, Weight};

/// Smooth evaluator for the per-ray primitive P(r) = int_0^r psi t^(n-1) dt.
///
/// Closed-form weights evaluate directly. For the rest, a cumulative panel
/// table over the radius range actually reached by the body is built once;
/// lookups then cost a single fixed Gauss-Kronrod pass, so the values are
/// smooth at rounding level instead of carrying the adaptive-quadrature
/// noise that defeats the outer facet quadrature's error estimator.
enum RayPrimitive<'a> {
    Closed { w: &'a Weight, sphere: f64 },
    Table {
        w: &'a Weight,
        lo: f64,
        step: f64,
        cum: Vec<f64>,
        base: f64,
        sphere: f64,
    },
}

impl<'a> RayPrimitive<'a> {
    fn new(w: &'a Weight, poly: &Polytope) -> RayPrimitive<'a> {
        let sphere = sphere_area(w.dim);
        if w.radial_mass_is_closed_form() {
            return RayPrimitive::Closed { w, sphere };
        }
        let lo = poly
            .facets
            .iter()
            .filter(|f| f.area > 0.0)
            .map(|f| f.offset)
            .fold(f64::INFINITY, f64::min)
            * (1.0 - 1e-12);
        let hi = poly
            .vertices
            .iter()
            .map(|v| norm(*v))
            .fold(0.0_f64, f64::max)
            * (1.0 + 1e-12);
        let n = w.dim as f64;
        let panels = 512usize;
        let step = (hi - lo).max(f64::MIN_POSITIVE) / panels as f64;
        let mut cum = Vec::with_capacity(panels + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for k in 0..panels {
            let a = lo + k as f64 * step;
            acc += gk15_value(|t| w.density(t) * t.powf(n - 1.0), a, a + step);
            cum.push(acc);
        }
        let base = w.radial_mass(lo) / sphere;
        RayPrimitive::Table { w, lo, step, cum, base, sphere }
    }

    fn eval(&self, r: f64) -> f64 {
        match self {
            RayPrimitive::Closed { w, sphere } => w.radial_mass(r) / sphere,
            RayPrimitive::Table { w, lo, step, cum, base, sphere } => {
                if r <= *lo {
                    return w.radial_mass(r) / sphere;
                }
                let n = w.dim as f64;
                let k = (((r - lo) / step) as usize).min(cum.len() - 2);
                let edge = lo + k as f64 * step;
                base + cum[k] + gk15_value(|t| w.density(t) * t.powf(n - 1.0), edge, r)
            }
        }
    }
}

/// Which of the two exact-quadrature mass evaluators to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassRoute {
    /// Per-facet pullback of the radial primitive (uses `radial_mass`).
    RadialPrimitive,
    /// Direct cone decomposition, integrating psi along ray segments.
    ConeDecomposition,
}

/// Integral of `g(y)` over one facet, split at the point of the facet
/// closest to the origin so that integrands peaked there (small offsets,
/// steep densities) are graded properly.
fn facet_integral<G: Fn(V3) -> f64 + Copy>(poly: &Polytope, fi: usize, g: G, tol_abs: f64) -> f64 {
    let f = &poly.facets[fi];
    if f.area == 0.0 || f.vertex_ids.is_empty() {
        return 0.0;
    }
    if poly.dim == 2 {
        let a = poly.vertices[f.vertex_ids[0]];
        let b = poly.vertices[f.vertex_ids[1]];
        let d = sub(b, a);
        let len = norm(d);
        if len < 1e-300 {
            return 0.0;
        }
        let line = |t: f64| {
            let y = [a[0] + t * d[0], a[1] + t * d[1], 0.0];
            g(y) * len
        };
        // parameter of the foot of the perpendicular from the origin
        let tstar = -dot(a, d) / (len * len);
        if tstar > 1e-9 && tstar < 1.0 - 1e-9 {
            integrate(line, 0.0, tstar, 0.5 * tol_abs) + integrate(line, tstar, 1.0, 0.5 * tol_abs)
        } else {
            integrate(line, 0.0, 1.0, tol_abs)
        }
    } else {
        let ring: Vec<V3> = f.vertex_ids.iter().map(|&id| poly.vertices[id]).collect();
        if ring.len() < 3 {
            return 0.0;
        }
        // fan center: the facet point closest to the origin when it lies
        // strictly inside the polygon, else the ring centroid
        let foot = scale(f.normal, f.offset);
        let mut center = [0.0; 3];
        for v in &ring {
            for k in 0..3 {
                center[k] += v[k] / ring.len() as f64;
            }
        }
        let mut foot_inside = true;
        for k in 0..ring.len() {
            let va = ring[k];
            let vb = ring[(k + 1) % ring.len()];
            let edge = sub(vb, va);
            let s = dot(cross(edge, sub(foot, va)), f.normal);
            if s < 1e-9 * f.area.max(1e-30) {
                foot_inside = false;
                break;
            }
        }
        if foot_inside {
            center = foot;
        }
        let per_tri = tol_abs / ring.len() as f64;
        let mut total = 0.0;
        for k in 0..ring.len() {
            let va = ring[k];
            let vb = ring[(k + 1) % ring.len()];
            total += integrate_triangle(|x, y, z| g([x, y, z]), [center, va, vb], per_tri);
        }
        total
    }
}

/// S^mu_K({u_i}): integral of the density over facet i. Zero on inactive
/// directions.
pub fn weighted_facet_area(w: &Weight, poly: &Polytope, facet_index: usize) -> f64 {
    facet_integral(
        poly,
        facet_index,
        |y| w.density(norm(y)),
        tol::QUAD * 1e-2,
    )
}

/// Weighted facet areas aligned to the input direction set (zero on inactive
/// directions).
pub fn facet_weighted_areas(w: &Weight, poly: &Polytope) -> Vec<f64> {
    let mut out = vec![0.0; poly.dirs.len()];
    let per_facet = (tol::QUAD * 1e-2) / poly.facets.len().max(1) as f64;
    for (fi, f) in poly.facets.iter().enumerate() {
        out[f.dir_index] = facet_integral(poly, fi, |y| w.density(norm(y)), per_facet);
    }
    out
}

/// Total weighted surface area, mu^+(dK) = sum_i S^mu_K({u_i}).
pub fn weighted_perimeter(w: &Weight, poly: &Polytope) -> f64 {
    facet_weighted_areas(w, poly).iter().sum()
}

/// mu(K) by the configured route, to absolute tolerance `tol_abs`.
pub fn body_mass_via(w: &Weight, poly: &Polytope, route: MassRoute, tol_abs: f64) -> f64 {
    let n = poly.dim as i32;
    let per_facet = tol_abs / poly.facets.len().max(1) as f64;
    let primitive = RayPrimitive::new(w, poly);
    let mut total = 0.0;
    for (fi, f) in poly.facets.iter().enumerate() {
        if f.area == 0.0 {
            continue;
        }
        let off = f.offset;
        let cone = match route {
            MassRoute::RadialPrimitive => facet_integral(
                poly,
                fi,
                |y| {
                    let r = norm(y);
                    primitive.eval(r) * off / r.powi(n)
                },
                per_facet,
            ),
            MassRoute::ConeDecomposition => facet_integral(
                poly,
                fi,
                |y| {
                    let r = norm(y);
                    // int_0^1 psi(s r) s^(n-1) ds, graded toward s = 0 by the
                    // cubic substitution s = q^3 (psi may blow up at 0)
                    let inner = integrate(
                        |q| {
                            let s = q * q * q;
                            w.density(s * r) * s.powi(n - 1) * 3.0 * q * q
                        },
                        0.0,
                        1.0,
                        per_facet * 0.1 / (off * f.area).max(1e-30),
                    );
                    off * inner
                },
                per_facet,
            ),
        };
        total += cone;
    }
    total
}

/// mu(K) by the default radial-primitive route.
pub fn body_mass(w: &Weight, poly: &Polytope) -> f64 {
    body_mass_via(w, poly, MassRoute::RadialPrimitive, tol::MASS_QUAD)
}

/// mu(K) by both routes; callers assert the two agree.
pub fn body_mass_checked(w: &Weight, poly: &Polytope) -> (f64, f64) {
    (
        body_mass_via(w, poly, MassRoute::RadialPrimitive, tol::MASS_QUAD),
        body_mass_via(w, poly, MassRoute::ConeDecomposition, tol::MASS_QUAD),
    )
}

/// mu(K) from a dense low-discrepancy ray sample of the radial primitive.
/// Mesh accuracy only; used as an order-of-magnitude cross check.
pub fn body_mass_sampled(w: &Weight, poly: &Polytope, count: usize) -> f64 {
    let sphere = sphere_area(poly.dim);
    let dirs: Vec<V3> = if poly.dim == 2 {
        lowdisc::golden_angles(count)
            .into_iter()
            .map(|t| {
                let a = 2.0 * std::f64::consts::PI * t;
                [a.cos(), a.sin(), 0.0]
            })
            .collect()
    } else {
        lowdisc::fibonacci_sphere(count)
    };
    let mean = dirs
        .iter()
        .map(|&u| w.radial_mass(poly.radial_eval(u)) / sphere)
        .sum::<f64>()
        / dirs.len() as f64;
    mean * sphere
}

/// L^p surface measure values from precomputed weighted areas:
/// h_i^(1-p) * S_i, with the p = 0 case giving the cone measure h_i * S_i.
pub fn lp_surface_from_areas(support: &[f64], areas: &[f64], p: f64) -> Vec<f64> {
    support
        .iter()
        .zip(areas)
        .map(|(&h, &s)| if s == 0.0 { 0.0 } else { h.powf(1.0 - p) * s })
        .collect()
}

/// S^mu_{K,p} per direction (zero on inactive directions).
pub fn lp_surface_measure(w: &Weight, poly: &Polytope, p: f64) -> Vec<f64> {
    let areas = facet_weighted_areas(w, poly);
    lp_surface_from_areas(&poly.support, &areas, p)
}

/// Total L^p surface measure S^mu_p(K).
pub fn lp_surface_total(w: &Weight, poly: &Polytope, p: f64) -> f64 {
    lp_surface_measure(w, poly, p).iter().sum()
}

/// mu(K; L) = sum_i h_L(u_i) S^mu_K({u_i}), the first weighted variation of
/// K toward L.
pub fn mixed_measure(w: &Weight, k: &Polytope, l: &Polytope) -> f64 {
    let areas = facet_weighted_areas(w, k);
    k.dirs
        .iter()
        .zip(&areas)
        .map(|(&u, &s)| l.support_eval(u) * s)
        .sum()
}

/// mu_p(K; L) = (1/p) sum_i h_L(u_i)^p S^mu_{K,p}({u_i}), p != 0.
pub fn lp_mixed_measure(w: &Weight, k: &Polytope, l: &Polytope, p: f64) -> f64 {
    assert!(p != 0.0, "p = 0 has no L^p mixed form; use the cone measure");
    let lp = lp_surface_measure(w, k, p);
    let s: f64 = k
        .dirs
        .iter()
        .zip(&lp)
        .map(|(&u, &v)| l.support_eval(u).powf(p) * v)
        .sum();
    s / p
}

/// Directional derivative of the Wulff-shape mass along a support
/// perturbation, in three parametrizations. Each returns the analytic value
/// predicted by the corresponding surface measure.
pub enum MassVariation {
    /// d/dt mu([h + t f]) = sum f_i S_i
    Linear,
    /// d/dt mu([(h^p + t f)^(1/p)]) = (1/p) sum f_i S_{p,i}
    LpPower(f64),
    /// d/dt mu([h e^(t f)]) = sum f_i h_i S_i
    Log,
}

/// Analytic directional derivative of mass at `poly` for perturbation `f`.
pub fn mass_variation_analytic(w: &Weight, poly: &Polytope, f: &[f64], kind: &MassVariation) -> f64 {
    let areas = facet_weighted_areas(w, poly);
    match kind {
        MassVariation::Linear => f.iter().zip(&areas).map(|(&fi, &s)| fi * s).sum(),
        MassVariation::LpPower(p) => {
            let lp = lp_surface_from_areas(&poly.support, &areas, *p);
            f.iter().zip(&lp).map(|(&fi, &s)| fi * s).sum::<f64>() / p
        }
        MassVariation::Log => f
            .iter()
            .zip(&areas)
            .zip(&poly.support)
            .map(|((&fi, &s), &h)| fi * h * s)
            .sum(),
    }
}
