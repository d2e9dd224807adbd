//! Variational solvers that recover a convex body from surface-measure data.
//!
//! The mass-pinned modes maximize the power or entropy functional over Wulff
//! shapes subject to mu([h]) = a; the free mode maximizes the unconstrained
//! functional psi for exponents above the dimension; the dual mode runs the
//! lambda-free fixed point from the two constant (ball) solutions; the
//! isotropic mode reports the constant solutions themselves. All of them share
//! one iteration core: a damped multiplicative update of the support vector in
//! log space, with the body re-scaled onto the mass constraint after every
//! trial step, followed on the circle by a Newton polish with an analytic
//! Jacobian of the facet areas.

pub mod ma2d;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ineq;
use crate::measures;
use crate::num::quad;
use crate::sphere::{norm, wulff_shape, DirectionSet, GeomError, Polytope};
use crate::tol;
use crate::weights::{Weight, WeightError};

pub use ma2d::{solve_ma_circle, solve_ma_circle_from, MaGrid};

/// Problem mode. `a` pins the body's mass; `pivot` splits the two dual
/// branches (defaults to half the total mass); `c` is the constant datum
/// density; `f` samples a right-hand side on a uniform angle grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    Pinned { a: f64 },
    Entropy { a: f64 },
    Free,
    SmallMassDual {
        #[serde(default)]
        pivot: Option<f64>,
    },
    Isotropic { c: f64 },
    MaCircle {
        #[serde(default)]
        f: Vec<f64>,
    },
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Pinned { .. } => "pinned",
            Mode::Entropy { .. } => "entropy",
            Mode::Free => "free",
            Mode::SmallMassDual { .. } => "small_mass_dual",
            Mode::Isotropic { .. } => "isotropic",
            Mode::MaCircle { .. } => "ma_circle",
        }
    }
}

/// Iteration caps and tolerances. Quadrature tolerances are fixed crate-wide
/// (see [`crate::tol`]); these are the caller-facing knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_outer: usize,
    /// Converged means residual_inf <= kkt_tol_rel * nu(S^{n-1}).
    pub kkt_tol_rel: f64,
    /// Converged pinned solves additionally need |mu(K) - a| below this.
    pub mass_tol: f64,
    /// Sup-norm residual target for the periodic grid solver.
    pub pde_tol: f64,
    /// Seed for multi-start initializations; fixed seed gives identical runs.
    pub seed: u64,
    /// Upper bound on worker threads for multi-start ladders.
    pub threads: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_outer: tol::MAX_OUTER,
            kkt_tol_rel: tol::KKT_REL,
            mass_tol: tol::MASS_CONSTRAINT,
            pde_tol: tol::PDE,
            seed: 0,
            threads: 1,
        }
    }
}

/// A fully specified reconstruction problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub weight: Weight,
    pub dirs: DirectionSet,
    /// Datum mass per direction, strictly positive.
    pub nu: Vec<f64>,
    pub p: f64,
    /// Caller's claim that the datum is symmetric under negation; checked.
    pub even: bool,
    pub mode: Mode,
    pub options: SolverOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Stalled { detail: String },
    NoPositiveBracket,
    HomotopyStuck { t_reached: f64 },
    BranchMerge,
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    /// A hypothesis of the underlying existence theory fails on this datum.
    #[error("refused ({hypothesis}): {detail}")]
    Refused { hypothesis: String, detail: String },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error(transparent)]
    Weight(#[from] WeightError),
}

/// Outcome of one solve (or one branch of a dual solve).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub mode: String,
    pub p: f64,
    /// Final support vector (Wulff-projected, strictly positive).
    pub h: Vec<f64>,
    pub body: Polytope,
    /// Normalization multiplier nu_tot / S_p_tot (1 in the lambda-free modes).
    pub lambda: f64,
    /// Least-squares fit of nu_i ~ lambda * S_p_i; agreement with `lambda` is
    /// part of the convergence evidence.
    pub lambda_fit: f64,
    pub mass: f64,
    pub mass_target: Option<f64>,
    pub mass_error: f64,
    /// max_i |nu_i - lambda * S_p_i| (isotropic mode: residual of the radial
    /// equation instead, see the report flags).
    pub residual_inf: f64,
    pub objective: f64,
    /// Objective at every accepted outer iterate, first entry at the
    /// initialization. Non-decreasing up to retraction noise.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Weighted facet areas by direction.
    pub surface: Vec<f64>,
    /// Realized datum h^(1-p) * surface (p = 0: h * surface).
    pub lp_surface: Vec<f64>,
    pub datum_total: f64,
    /// Hemisphere constant of the realized measure; positive means the
    /// recovered datum is not concentrated on any closed hemisphere.
    pub hemisphere_realized: f64,
    pub flags: Vec<String>,
}

// ---------------------------------------------------------------------------
// Functionals and their gradients.

/// -(1/p) sum_i nu_i h_i^p, the objective for p != 0.
pub fn power_objective(nu: &[f64], h: &[f64], p: f64) -> f64 {
    assert!(p != 0.0);
    let s: f64 = nu.iter().zip(h).map(|(n, x)| n * x.powf(p)).sum();
    -s / p
}

/// Gradient of [`power_objective`] in h: -nu_i h_i^(p-1).
pub fn power_gradient(nu: &[f64], h: &[f64], p: f64) -> Vec<f64> {
    nu.iter().zip(h).map(|(n, x)| -n * x.powf(p - 1.0)).collect()
}

/// -(1/nu(S^{n-1})) sum_i nu_i ln h_i, the p = 0 objective.
pub fn entropy_objective(nu: &[f64], h: &[f64]) -> f64 {
    let nu_tot: f64 = nu.iter().sum();
    let s: f64 = nu.iter().zip(h).map(|(n, x)| n * x.ln()).sum();
    -s / nu_tot
}

/// Gradient of [`entropy_objective`]: -nu_i / (h_i nu(S^{n-1})).
pub fn entropy_gradient(nu: &[f64], h: &[f64]) -> Vec<f64> {
    let nu_tot: f64 = nu.iter().sum();
    nu.iter().zip(h).map(|(n, x)| -n / (x * nu_tot)).collect()
}

/// Gradient of h -> mu([h]): the weighted facet areas of the Wulff shape
/// (zero on directions whose halfspace does not touch the body).
pub fn mass_gradient(w: &Weight, dirs: &DirectionSet, h: &[f64]) -> Result<Vec<f64>, SolveError> {
    let poly = wulff_shape(dirs, h)?;
    Ok(measures::facet_weighted_areas(w, &poly))
}

/// Evaluate the mode's objective at the Wulff projection of `h`. Projection
/// never decreases any of the three functionals, so this is the value the
/// solvers actually compare.
pub fn objective_eval(spec: &ProblemSpec, h: &[f64]) -> Result<f64, SolveError> {
    if h.len() != spec.dirs.len() {
        return Err(SolveError::Invalid(format!(
            "support vector length {} does not match {} directions",
            h.len(),
            spec.dirs.len()
        )));
    }
    let poly = wulff_shape(&spec.dirs, h)?;
    let hs = &poly.support;
    Ok(match &spec.mode {
        Mode::Entropy { .. } => entropy_objective(&spec.nu, hs),
        Mode::Free | Mode::SmallMassDual { .. } => {
            measures::body_mass(&spec.weight, &poly) + power_objective(&spec.nu, hs, spec.p)
        }
        _ if spec.p == 0.0 => entropy_objective(&spec.nu, hs),
        _ => power_objective(&spec.nu, hs, spec.p),
    })
}

/// Exact Hausdorff distance from a polytope to the centered ball of radius r.
/// The support function attains its maximum over the sphere at a vertex
/// direction and its minimum at a facet normal (the body is exactly the
/// intersection of its facet halfspaces), so the sup of |h_K - r| is a max
/// over finitely many values.
pub fn hausdorff_to_ball(poly: &Polytope, r: f64) -> f64 {
    let vmax = poly.vertices.iter().map(|v| norm(*v)).fold(0.0, f64::max);
    let hmin = poly
        .facets
        .iter()
        .map(|f| f.offset)
        .fold(f64::INFINITY, f64::min);
    (vmax - r).max(r - hmin)
}

// ---------------------------------------------------------------------------
// Shared iteration core.

#[derive(Clone, Copy, PartialEq)]
enum ObjKind {
    Power,
    Entropy,
    Full,
}

struct Engine<'a> {
    w: &'a Weight,
    dirs: &'a DirectionSet,
    nu: &'a [f64],
    nu_tot: f64,
    /// Exponent of the realized datum h^(1-p) S; 0 in entropy mode.
    p: f64,
    /// Multiplier convention: nu_tot / S_p_tot when true, 1 otherwise.
    normalized: bool,
    target: Option<f64>,
    kind: ObjKind,
}

struct Iterate {
    body: Polytope,
    /// Weighted facet areas by direction.
    areas: Vec<f64>,
    /// Realized datum h^(1-p) * area.
    lp: Vec<f64>,
    lp_tot: f64,
    mass: f64,
    obj: f64,
}

impl Engine<'_> {
    fn lambda(&self, it: &Iterate) -> f64 {
        if self.normalized {
            self.nu_tot / it.lp_tot
        } else {
            1.0
        }
    }

    fn residual_inf(&self, it: &Iterate) -> f64 {
        let lam = self.lambda(it);
        self.nu
            .iter()
            .zip(&it.lp)
            .map(|(n, s)| (n - lam * s).abs())
            .fold(0.0, f64::max)
    }

    /// Multiplicative update direction in log space: the clamped log of the
    /// per-direction ratio lambda S_p_i / nu_i. Inactive directions are
    /// driven down so their halfspace re-enters the hull.
    fn step_dir(&self, it: &Iterate) -> Vec<f64> {
        let lam = self.lambda(it);
        self.nu
            .iter()
            .zip(&it.lp)
            .map(|(n, s)| {
                if *s > 0.0 {
                    (lam * s / n).ln().clamp(-3.0, 3.0)
                } else {
                    -3.0
                }
            })
            .collect()
    }

    fn eval(&self, x: &[f64], retract: bool, tol_r: f64) -> Result<Iterate, SolveError> {
        let h: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let body = wulff_shape(self.dirs, &h)?;
        let (body, mass) = match (retract, self.target) {
            (true, Some(a)) => retract_mass(self.w, body, a, tol_r)?,
            _ => {
                let m = measures::body_mass(self.w, &body);
                (body, m)
            }
        };
        if body.support.iter().any(|&s| s <= 0.0) {
            return Err(SolveError::Invalid(
                "body degenerated: support vanished at a datum direction".into(),
            ));
        }
        let areas = measures::facet_weighted_areas(self.w, &body);
        let lp = measures::lp_surface_from_areas(&body.support, &areas, self.p);
        let lp_tot: f64 = lp.iter().sum();
        if !(lp_tot > 0.0) {
            return Err(SolveError::Invalid(
                "realized surface measure vanished".into(),
            ));
        }
        let obj = match self.kind {
            ObjKind::Power => power_objective(self.nu, &body.support, self.p),
            ObjKind::Entropy => entropy_objective(self.nu, &body.support),
            ObjKind::Full => mass + power_objective(self.nu, &body.support, self.p),
        };
        Ok(Iterate {
            areas,
            lp,
            lp_tot,
            mass,
            obj,
            body,
        })
    }
}

/// Scale the body onto the mass constraint: solve mu(s K) = target for s by
/// safeguarded secant on the (nondecreasing) dilation mass. Returns the
/// scaled body and its mass.
fn retract_mass(
    w: &Weight,
    poly: Polytope,
    target: f64,
    tol_abs: f64,
) -> Result<(Polytope, f64), SolveError> {
    let mass_at = |s: f64| measures::body_mass(w, &poly.scaled(s));
    let m0 = measures::body_mass(w, &poly);
    if (m0 - target).abs() <= tol_abs {
        return Ok((poly, m0));
    }
    let n = poly.dim as f64;
    // Bracket the root; the power-law guess is exact for the unweighted case
    // and one-sided for decreasing densities.
    let (mut s_lo, mut g_lo, mut s_hi, mut g_hi);
    if m0 < target {
        s_lo = 1.0;
        g_lo = m0 - target;
        let mut s = (target / m0).powf(1.0 / n).max(1.0 + 1e-12);
        loop {
            let g = mass_at(s) - target;
            if g >= 0.0 {
                s_hi = s;
                g_hi = g;
                break;
            }
            s_lo = s;
            g_lo = g;
            s *= 2.0;
            if s > 1e12 {
                return Err(SolveError::Invalid(
                    "mass target unreachable by dilation".into(),
                ));
            }
        }
    } else {
        s_hi = 1.0;
        g_hi = m0 - target;
        let mut s = (target / m0).powf(1.0 / n).min(1.0 - 1e-12);
        loop {
            let g = mass_at(s) - target;
            if g <= 0.0 {
                s_lo = s;
                g_lo = g;
                break;
            }
            s_hi = s;
            g_hi = g;
            s *= 0.5;
            if s < 1e-12 {
                return Err(SolveError::Invalid(
                    "mass target unreachable by shrinking".into(),
                ));
            }
        }
    }
    let mut s_best = if g_hi.abs() < g_lo.abs() { s_hi } else { s_lo };
    let mut g_best = g_lo.abs().min(g_hi.abs());
    for k in 0..200 {
        if g_best <= tol_abs || (s_hi - s_lo) <= 1e-15 * s_hi {
            break;
        }
        // Secant through the bracket endpoints, bisection every fourth step
        // and whenever the secant leaves the bracket.
        let mut s = s_lo - g_lo * (s_hi - s_lo) / (g_hi - g_lo);
        if !(s > s_lo && s < s_hi) || k % 4 == 3 {
            s = 0.5 * (s_lo + s_hi);
        }
        let g = mass_at(s) - target;
        if g.abs() < g_best {
            g_best = g.abs();
            s_best = s;
        }
        if g <= 0.0 {
            s_lo = s;
            g_lo = g;
        } else {
            s_hi = s;
            g_hi = g;
        }
    }
    let body = poly.scaled(s_best);
    let mass = measures::body_mass(w, &body);
    Ok((body, mass))
}

#[derive(Clone, Copy, PartialEq)]
enum Gating {
    Objective,
    Residual,
}

enum P1Exit {
    Goal,
    NewtonEntry,
    Stall(String),
    Budget,
}

struct P1Out {
    it: Iterate,
    used: usize,
    exit: P1Exit,
}

/// Retraction tolerance schedule: coarse far from the solution, machine-level
/// once the residual is small, so that objective comparisons are not
/// contaminated by constraint wobble.
fn retract_tol(res_rel: f64, target: Option<f64>) -> f64 {
    let scale = 1.0 + target.map_or(0.0, f64::abs);
    scale * (1e-3 * res_rel * res_rel).clamp(5e-15, 5e-10)
}

fn phase1(
    eng: &Engine,
    mut it: Iterate,
    trace: &mut Vec<f64>,
    budget: usize,
    goal_res: f64,
    newton_gate: Option<f64>,
    mut gating: Gating,
) -> P1Out {
    let mut gamma = 0.5_f64;
    let mut used = 0;
    loop {
        let res = eng.residual_inf(&it);
        if res <= goal_res {
            return P1Out { it, used, exit: P1Exit::Goal };
        }
        if let Some(gate) = newton_gate {
            if res <= gate && it.body.active.iter().all(|&b| b) {
                return P1Out { it, used, exit: P1Exit::NewtonEntry };
            }
        }
        if used >= budget {
            return P1Out { it, used, exit: P1Exit::Budget };
        }
        if gating == Gating::Objective && res <= 1e-4 * eng.nu_tot {
            // Close enough that objective increments drop under the floating
            // point comparison floor; gate on the residual instead.
            gating = Gating::Residual;
        }
        let rho = eng.step_dir(&it);
        let x: Vec<f64> = it.body.support.iter().map(|h| h.ln()).collect();
        let tol_r = retract_tol(res / eng.nu_tot, eng.target);
        let lam = eng.lambda(&it);
        loop {
            let x_t: Vec<f64> = x.iter().zip(&rho).map(|(a, r)| a + gamma * r).collect();
            let trial = eng.eval(&x_t, true, tol_r);
            let accept = match &trial {
                Err(_) => false,
                Ok(t) => match gating {
                    Gating::Objective => {
                        let slack = 1e-12 * (1.0 + it.obj.abs())
                            + if eng.target.is_some() {
                                2.0 * tol_r * lam.abs() / if eng.kind == ObjKind::Entropy { eng.nu_tot } else { 1.0 }
                            } else {
                                0.0
                            };
                        t.obj >= it.obj - slack
                    }
                    Gating::Residual => {
                        eng.residual_inf(t) <= res * (1.0 - 1e-3 * gamma.min(1.0))
                    }
                },
            };
            if accept {
                it = trial.unwrap();
                gamma = (gamma * 1.3).min(2.0);
                break;
            }
            gamma *= 0.5;
            if gamma < 1e-7 {
                let detail = format!(
                    "step underflow at residual {:.3e} (goal {:.3e})",
                    res, goal_res
                );
                return P1Out { it, used, exit: P1Exit::Stall(detail) };
            }
        }
        used += 1;
        trace.push(it.obj);
    }
}

// ---------------------------------------------------------------------------
// Newton polish on the circle.
//
// Unknowns are x_i = ln h_i (plus ln lambda in the pinned modes); equations
// are the logarithmic first-order conditions ln(lambda h_i^{1-p} S_i / nu_i)
// (plus ln(mass/a)). The facet areas S_i of a polygon depend only on the
// neighbor supports, so the Jacobian is cyclic tridiagonal (plus the
// multiplier row/column) and assembles from one-dimensional edge geometry.

struct Ring {
    /// Direction angles.
    phi: Vec<f64>,
    /// Cyclic predecessor/successor by angle, per direction index.
    prev: Vec<usize>,
    next: Vec<usize>,
}

fn ring(dirs: &DirectionSet) -> Ring {
    let n = dirs.len();
    let phi: Vec<f64> = (0..n)
        .map(|i| {
            let u = dirs.dir(i);
            u[1].atan2(u[0])
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| phi[a].partial_cmp(&phi[b]).unwrap());
    let mut prev = vec![0; n];
    let mut next = vec![0; n];
    for (k, &i) in order.iter().enumerate() {
        next[i] = order[(k + 1) % n];
        prev[i] = order[(k + n - 1) % n];
    }
    Ring { phi, prev, next }
}

/// Log first-order conditions at the iterate. `ell` is ln lambda (0 in the
/// lambda-free modes); the mass row is appended when the engine pins mass.
fn log_residual(eng: &Engine, it: &Iterate, ell: f64) -> Option<DVector<f64>> {
    let n = eng.nu.len();
    let rows = if eng.target.is_some() { n + 1 } else { n };
    let mut f = DVector::zeros(rows);
    for i in 0..n {
        if !(it.lp[i] > 0.0) {
            return None;
        }
        f[i] = ell + (it.lp[i] / eng.nu[i]).ln();
    }
    if let Some(a) = eng.target {
        f[n] = (it.mass / a).ln();
    }
    Some(f)
}

/// Analytic Jacobian of [`log_residual`] in (x, ell). Edge endpoints of facet
/// i sit at signed offsets tau along its line, determined by the two angular
/// neighbors; differentiating the endpoint positions and the weighted length
/// integrand gives the three nonzero area derivatives per row.
fn log_jacobian(eng: &Engine, it: &Iterate, rg: &Ring) -> Option<DMatrix<f64>> {
    let n = eng.nu.len();
    let h = &it.body.support;
    let constrained = eng.target.is_some();
    let dim = if constrained { n + 1 } else { n };
    let mut j = DMatrix::zeros(dim, dim);
    for i in 0..n {
        let (ip, inx) = (rg.prev[i], rg.next[i]);
        let dp = wrap_angle(rg.phi[ip] - rg.phi[i]); // in (-pi, 0)
        let dn = wrap_angle(rg.phi[inx] - rg.phi[i]); // in (0, pi)
        if !(dp < 0.0 && dn > 0.0) {
            return None;
        }
        let tau_m = (h[ip] - h[i] * dp.cos()) / dp.sin();
        let tau_p = (h[inx] - h[i] * dn.cos()) / dn.sin();
        if !(tau_p > tau_m) {
            return None;
        }
        let psi_m = eng.w.density(h[i].hypot(tau_m));
        let psi_p = eng.w.density(h[i].hypot(tau_p));
        let hi = h[i];
        let core = quad::gk15_value(
            |t| {
                let r = hi.hypot(t);
                eng.w.density_deriv(r) * hi / r
            },
            tau_m,
            tau_p,
        );
        let ds_di = core - psi_p * dn.cos() / dn.sin() + psi_m * dp.cos() / dp.sin();
        let ds_dn = psi_p / dn.sin();
        let ds_dp = -psi_m / dp.sin();
        let s = it.areas[i];
        if !(s > 0.0) {
            return None;
        }
        j[(i, i)] = (1.0 - eng.p) + hi * ds_di / s;
        j[(i, inx)] += h[inx] * ds_dn / s;
        j[(i, ip)] += h[ip] * ds_dp / s;
        if constrained {
            j[(i, n)] = 1.0;
        }
    }
    if constrained {
        for k in 0..n {
            j[(n, k)] = h[k] * it.areas[k] / it.mass;
        }
    }
    Some(j)
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut x = a;
    while x <= -std::f64::consts::PI {
        x += two_pi;
    }
    while x > std::f64::consts::PI {
        x -= two_pi;
    }
    x
}

struct NewtonOut {
    it: Iterate,
    used: usize,
    res: f64,
}

/// Damped Newton on the logarithmic first-order system. Falls back to the
/// caller (returning the best iterate) when a facet deactivates or the step
/// damping underflows; quadratic near the solution.
fn newton2(eng: &Engine, it0: Iterate, budget: usize) -> Result<NewtonOut, SolveError> {
    let rg = ring(eng.dirs);
    let n = eng.nu.len();
    let mut it = it0;
    let mut ell = eng.lambda(&it).ln();
    let mut used = 0;
    let mut best_res = eng.residual_inf(&it);
    let mut stale = 0;
    while used < budget.min(80) {
        let f = match log_residual(eng, &it, ell) {
            Some(f) => f,
            None => break,
        };
        let fnorm = f.amax();
        let res = eng.residual_inf(&it);
        if res <= 1e-13 * eng.nu_tot {
            return Ok(NewtonOut { it, used, res });
        }
        if res < 0.9 * best_res {
            best_res = res;
            stale = 0;
        } else {
            stale += 1;
            if stale >= 4 {
                break;
            }
        }
        let jac = match log_jacobian(eng, &it, &rg) {
            Some(j) => j,
            None => break,
        };
        // The unweighted p = 1 system is translation invariant, so the
        // Jacobian is exactly rank deficient; the pseudo-inverse step stays
        // on the solution manifold instead of sliding along the null space.
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let delta = match svd.solve(&(-f), 1e-10 * smax) {
            Ok(d) => d,
            Err(_) => break,
        };
        let x: Vec<f64> = it.body.support.iter().map(|h| h.ln()).collect();
        let mut alpha = 1.0_f64;
        let mut accepted = false;
        while alpha >= 1e-4 {
            let x_t: Vec<f64> = (0..n).map(|k| x[k] + alpha * delta[k]).collect();
            let ell_t = if eng.target.is_some() { ell + alpha * delta[n] } else { 0.0 };
            if let Ok(t) = eng.eval(&x_t, false, 0.0) {
                if t.body.active.iter().all(|&b| b) {
                    if let Some(ft) = log_residual(eng, &t, ell_t) {
                        if ft.amax() <= fnorm * (1.0 - 1e-4 * alpha) {
                            it = t;
                            ell = ell_t;
                            accepted = true;
                            break;
                        }
                    }
                }
            }
            alpha *= 0.5;
        }
        used += 1;
        if !accepted {
            break;
        }
    }
    let res = eng.residual_inf(&it);
    Ok(NewtonOut { it, used, res })
}

// ---------------------------------------------------------------------------
// Validation gates.

struct Checked {
    nu_tot: f64,
    even: bool,
    total: f64,
    flags: Vec<String>,
}

fn validate_common(spec: &ProblemSpec) -> Result<Checked, SolveError> {
    let n = spec.dirs.len();
    if n == 0 {
        return Err(SolveError::Invalid("empty direction set".into()));
    }
    if spec.nu.len() != n {
        return Err(SolveError::Invalid(format!(
            "datum has {} rows for {} directions",
            spec.nu.len(),
            n
        )));
    }
    if spec.weight.dim != spec.dirs.dim() {
        return Err(SolveError::Invalid(format!(
            "weight dimension {} does not match direction dimension {}",
            spec.weight.dim,
            spec.dirs.dim()
        )));
    }
    for (i, v) in spec.nu.iter().enumerate() {
        if !(v.is_finite() && *v > 0.0) {
            return Err(SolveError::Invalid(format!(
                "datum row {i} must be positive and finite, got {v}"
            )));
        }
    }
    if !spec.p.is_finite() {
        return Err(SolveError::Invalid("exponent p must be finite".into()));
    }
    let mut flags = Vec::new();
    let even_data = ineq::measure_is_even(&spec.dirs, &spec.nu);
    if spec.even && !even_data {
        return Err(SolveError::Invalid(
            "datum declared even but rows are not symmetric under negation".into(),
        ));
    }
    if !spec.even && even_data {
        flags.push("datum is symmetric under negation though not declared even".into());
    }
    let hemi = ineq::hemisphere_constant(&spec.dirs, &spec.nu, 1.0);
    if hemi.concentrated {
        return Err(SolveError::Refused {
            hypothesis: "datum not concentrated on a closed hemisphere".into(),
            detail: format!(
                "minimal hemisphere mass {:.3e} at pole parameters {:?}",
                hemi.value, hemi.theta
            ),
        });
    }
    Ok(Checked {
        nu_tot: spec.nu.iter().sum(),
        even: even_data,
        total: spec.weight.total_mass(),
        flags,
    })
}

fn gate_mass_range(a: f64, total: f64) -> Result<(), SolveError> {
    if !(a > 0.0) || !a.is_finite() || (total.is_finite() && a >= total) {
        return Err(SolveError::Refused {
            hypothesis: "mass target inside (0, total mass)".into(),
            detail: format!("a = {a}, total = {total}"),
        });
    }
    Ok(())
}

fn gate_decay(w: &Weight, p: f64) -> Result<(), SolveError> {
    if w.tail_decay(p).fails() {
        return Err(SolveError::Refused {
            hypothesis: "tail decay t^(n-p) psi(t) -> 0".into(),
            detail: format!("profile tail exponent too small for p = {p}"),
        });
    }
    Ok(())
}

/// Half-total gates for non-symmetric data against finite-mass weights.
fn gate_halfmass(a: f64, total: f64, p: f64, even: bool) -> Result<(), SolveError> {
    if even || !total.is_finite() {
        return Ok(());
    }
    let half = 0.5 * total;
    let slack = 1e-12 * total;
    let bad = if p > 0.0 { a < half - slack } else { a <= half + slack };
    if bad {
        let need = if p > 0.0 { "at least" } else { "strictly more than" };
        return Err(SolveError::Refused {
            hypothesis: "mass target large enough for a non-symmetric datum".into(),
            detail: format!("a = {a} but a non-even datum needs {need} half the total mass {half}"),
        });
    }
    Ok(())
}

fn gates_pinned(spec: &ProblemSpec, chk: &Checked, a: f64) -> Result<Vec<String>, SolveError> {
    if spec.p == 0.0 {
        return Err(SolveError::Invalid(
            "p = 0 is the entropy mode; use solve_entropy".into(),
        ));
    }
    gate_mass_range(a, chk.total)?;
    gate_halfmass(a, chk.total, spec.p, chk.even)?;
    let mut notes = Vec::new();
    if spec.p < 0.0 {
        gate_decay(&spec.weight, spec.p)?;
        if spec.weight.nonincreasing().fails() {
            return Err(SolveError::Refused {
                hypothesis: "radially nonincreasing density for p < 0".into(),
                detail: "the profile increases somewhere on its support".into(),
            });
        }
    }
    if (spec.p - spec.weight.dim as f64).abs() <= 1e-12 {
        notes.push(
            "p equals the dimension: pinned solves carry no datum-size restriction here, \
             unlike the constant-free regime"
                .into(),
        );
    }
    Ok(notes)
}

fn gates_entropy(
    spec: &ProblemSpec,
    chk: &Checked,
    a: f64,
) -> Result<(ineq::SubspaceCheck, Vec<String>), SolveError> {
    if spec.p != 0.0 {
        return Err(SolveError::Invalid("entropy mode requires p = 0".into()));
    }
    gate_mass_range(a, chk.total)?;
    // p = 0 sits on the p > 0 side of the half-total gate (a >= total/2).
    gate_halfmass(a, chk.total, 1.0, chk.even)?;
    let sc = ineq::check_subspace_concentration(&spec.dirs, &spec.nu, false);
    if !sc.holds {
        return Err(SolveError::Refused {
            hypothesis: "subspace concentration inequality".into(),
            detail: format!(
                "a {}-dimensional subspace through axis {:?} carries mass {:.6} > bound {:.6}",
                sc.worst_dim, sc.worst_axis, sc.worst_mass, sc.worst_bound
            ),
        });
    }
    let mut notes = Vec::new();
    if !ineq::check_subspace_concentration(&spec.dirs, &spec.nu, true).holds {
        notes.push(format!(
            "subspace concentration holds with equality (mass {:.6} on a {}-dimensional \
             subspace): boundary case, the solution may touch the subspace degenerately",
            sc.worst_mass, sc.worst_dim
        ));
    }
    Ok((sc, notes))
}

fn gates_free(spec: &ProblemSpec, chk: &Checked) -> Result<(), SolveError> {
    let n = spec.weight.dim as f64;
    if !(spec.p > n) {
        return Err(SolveError::Refused {
            hypothesis: "exponent above the dimension".into(),
            detail: format!("p = {} but the constant-free regime needs p > {n}", spec.p),
        });
    }
    if !chk.even {
        return Err(SolveError::Refused {
            hypothesis: "origin-symmetric datum".into(),
            detail: "rows are not symmetric under negation".into(),
        });
    }
    gate_decay(&spec.weight, spec.p)?;
    let near0 = 1e-9 * spec.weight.reference_scale();
    if !(spec.weight.density(near0) > 0.0) {
        return Err(SolveError::Refused {
            hypothesis: "positive density at the origin".into(),
            detail: "psi(0+) = 0 leaves no positive objective bracket".into(),
        });
    }
    Ok(())
}

fn gates_small_mass(
    spec: &ProblemSpec,
    chk: &Checked,
) -> Result<(f64, Vec<f64>, Vec<String>), SolveError> {
    let n = spec.weight.dim as f64;
    if !(spec.p > 0.0 && spec.p < n) {
        return Err(SolveError::Refused {
            hypothesis: "exponent strictly between 0 and the dimension".into(),
            detail: format!("p = {}", spec.p),
        });
    }
    if !chk.even {
        return Err(SolveError::Refused {
            hypothesis: "origin-symmetric datum".into(),
            detail: "rows are not symmetric under negation".into(),
        });
    }
    if !chk.total.is_finite() {
        return Err(SolveError::Refused {
            hypothesis: "finite total mass".into(),
            detail: "the dual-branch regime needs mu(R^n) < infinity".into(),
        });
    }
    gate_decay(&spec.weight, spec.p)?;
    let mut notes = Vec::new();
    if matches!(
        spec.weight.strictly_decreasing(),
        crate::weights::Determination::Undetermined { .. }
    ) {
        notes.push("profile monotonicity undetermined from samples; proceeding".into());
    }
    let ia = spec.weight.isotropic_analysis(spec.p)?;
    if ia.bounded_critical_set.fails() {
        return Err(SolveError::Refused {
            hypothesis: "critical radii strictly inside the support".into(),
            detail: "the radial analysis found critical points escaping to the boundary".into(),
        });
    }
    let pivot = match spec.mode {
        Mode::SmallMassDual { pivot } => pivot.unwrap_or(0.5 * chk.total),
        _ => 0.5 * chk.total,
    };
    if !(pivot > 0.0 && pivot < chk.total) {
        return Err(SolveError::Invalid(format!(
            "pivot {pivot} outside (0, {})",
            chk.total
        )));
    }
    match ineq::profile_for_weight(&spec.weight) {
        Some(prof) => {
            let thr = ineq::lp_iso_threshold(&prof, spec.weight.dim, chk.total, pivot, spec.p)
                .map_err(|e| SolveError::Invalid(format!("threshold evaluation failed: {e}")))?;
            if !(chk.nu_tot < thr) {
                return Err(SolveError::Refused {
                    hypothesis: "datum below the small-mass threshold".into(),
                    detail: format!("nu total {:.6e} >= threshold {:.6e}", chk.nu_tot, thr),
                });
            }
        }
        None => {
            notes.push(
                "no closed-form isoperimetric profile for this weight; the small-mass \
                 threshold was not checked"
                    .into(),
            );
        }
    }
    let c = chk.nu_tot / spec.dirs.quad_weights().iter().sum::<f64>();
    let roots = spec.weight.constant_solutions(spec.p, c)?;
    if roots.is_empty() {
        let fold = ia
            .threshold
            .map(|t| format!("{t:.6e}"))
            .unwrap_or_else(|| "unbounded".into());
        return Err(SolveError::Refused {
            hypothesis: "constant solutions below the fold".into(),
            detail: format!("c = {c:.6e} exceeds the fold value {fold}"),
        });
    }
    Ok((pivot, roots, notes))
}

/// Every hypothesis of the requested mode, evaluated without solving.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Precheck {
    pub mode: String,
    pub even: bool,
    pub datum_total: f64,
    /// None when the weight has infinite total mass.
    pub weight_total: Option<f64>,
    pub hemisphere: ineq::HemisphereReport,
    pub subspace: Option<ineq::SubspaceCheck>,
    pub notes: Vec<String>,
}

pub fn precheck(spec: &ProblemSpec) -> Result<Precheck, SolveError> {
    let chk = validate_common(spec)?;
    let mut notes = chk.flags.clone();
    let mut subspace = None;
    match &spec.mode {
        Mode::Pinned { a } => notes.extend(gates_pinned(spec, &chk, *a)?),
        Mode::Entropy { a } => {
            let (sc, extra) = gates_entropy(spec, &chk, *a)?;
            subspace = Some(sc);
            notes.extend(extra);
        }
        Mode::Free => gates_free(spec, &chk)?,
        Mode::SmallMassDual { .. } => {
            let (_, _, extra) = gates_small_mass(spec, &chk)?;
            notes.extend(extra);
        }
        Mode::Isotropic { c } => {
            if !(*c > 0.0) {
                return Err(SolveError::Invalid(format!("c must be positive, got {c}")));
            }
        }
        Mode::MaCircle { .. } => notes.extend(ma2d::gates_ma(spec)?),
    }
    Ok(Precheck {
        mode: spec.mode.name().into(),
        even: chk.even,
        datum_total: chk.nu_tot,
        weight_total: if chk.total.is_finite() { Some(chk.total) } else { None },
        hemisphere: ineq::hemisphere_constant(&spec.dirs, &spec.nu, 1.0),
        subspace,
        notes,
    })
}

// ---------------------------------------------------------------------------
// Report assembly and drivers.

struct Outcome {
    it: Iterate,
    iterations: usize,
    status: SolveStatus,
    trace: Vec<f64>,
    flags: Vec<String>,
}

fn assemble(spec: &ProblemSpec, eng: &Engine, out: Outcome) -> SolveReport {
    let lambda = eng.lambda(&out.it);
    let lp2: f64 = out.it.lp.iter().map(|s| s * s).sum();
    let lambda_fit = if lp2 > 0.0 {
        eng.nu.iter().zip(&out.it.lp).map(|(n, s)| n * s).sum::<f64>() / lp2
    } else {
        lambda
    };
    let mass_error = eng.target.map_or(0.0, |a| (out.it.mass - a).abs());
    let hemi = ineq::hemisphere_constant(spec.dirs_ref(), &out.it.lp, 1.0);
    SolveReport {
        mode: spec.mode.name().into(),
        p: spec.p,
        h: out.it.body.support.clone(),
        lambda,
        lambda_fit,
        mass: out.it.mass,
        mass_target: eng.target,
        mass_error,
        residual_inf: eng.residual_inf(&out.it),
        objective: out.it.obj,
        objective_trace: out.trace,
        iterations: out.iterations,
        status: out.status,
        surface: out.it.areas.clone(),
        lp_surface: out.it.lp.clone(),
        datum_total: eng.nu_tot,
        hemisphere_realized: hemi.value,
        flags: out.flags,
        body: out.it.body,
    }
}

impl ProblemSpec {
    fn dirs_ref(&self) -> &DirectionSet {
        &self.dirs
    }
}

/// Run the shared phase-1 / Newton ladder until the residual goal, a stall,
/// or the iteration budget. The returned status reflects the first-order
/// gates, not the path taken.
fn drive(
    eng: &Engine,
    x0: &[f64],
    opts: &SolverOptions,
    gating: Gating,
    mut flags: Vec<String>,
) -> Result<Outcome, SolveError> {
    let dim2 = eng.dirs.dim() == 2;
    let goal = if dim2 {
        eng.nu_tot * (opts.kkt_tol_rel * 1e-2).min(1e-10)
    } else {
        eng.nu_tot * (opts.kkt_tol_rel * 0.1).min(1e-7)
    };
    let tol_r0 = retract_tol(1.0, eng.target);
    let mut it = eng.eval(x0, true, tol_r0)?;
    let mut trace = vec![it.obj];
    let mut used = 0;
    let mut newton_gate = if dim2 { Some(1e-2 * eng.nu_tot) } else { None };
    let mut newton_rounds = 0;
    let mut stall: Option<String> = None;
    while used < opts.max_outer {
        let p1 = phase1(
            eng,
            it,
            &mut trace,
            opts.max_outer - used,
            goal,
            newton_gate,
            gating,
        );
        it = p1.it;
        used += p1.used;
        match p1.exit {
            P1Exit::Goal => break,
            P1Exit::Budget => break,
            P1Exit::NewtonEntry => {
                let nw = newton2(eng, it, opts.max_outer - used)?;
                it = nw.it;
                used += nw.used;
                newton_rounds += 1;
                if nw.res <= goal || newton_rounds >= 3 {
                    break;
                }
                // polish stalled early: resume phase 1 with a stricter gate
                newton_gate = newton_gate.map(|g| g * 0.1);
            }
            P1Exit::Stall(d) => {
                // one last Newton attempt from the stalled point
                if dim2 && it.body.active.iter().all(|&b| b) && newton_rounds < 3 {
                    let nw = newton2(eng, it, opts.max_outer - used)?;
                    it = nw.it;
                    used += nw.used;
                }
                stall = Some(d);
                break;
            }
        }
    }
    trace.push(it.obj);
    let res = eng.residual_inf(&it);
    let mass_ok = eng.target.map_or(true, |a| (it.mass - a).abs() <= opts.mass_tol);
    let status = if res <= opts.kkt_tol_rel * eng.nu_tot && mass_ok {
        if let Some(d) = &stall {
            flags.push(format!(
                "first-order phase stalled ({d}); Newton polish completed the solve"
            ));
        }
        SolveStatus::Converged
    } else if let Some(d) = stall {
        SolveStatus::Stalled { detail: d }
    } else {
        SolveStatus::MaxIterations
    };
    Ok(Outcome {
        it,
        iterations: used,
        status,
        trace,
        flags,
    })
}

/// Mass-pinned maximization of the power objective (p != 0).
pub fn solve_pinned(spec: &ProblemSpec) -> Result<SolveReport, SolveError> {
    let a = match spec.mode {
        Mode::Pinned { a } => a,
        _ => return Err(SolveError::Invalid("mode must be pinned".into())),
    };
    let chk = validate_common(spec)?;
    let mut flags = chk.flags.clone();
    flags.extend(gates_pinned(spec, &chk, a)?);
    let eng = Engine {
        w: &spec.weight,
        dirs: &spec.dirs,
        nu: &spec.nu,
        nu_tot: chk.nu_tot,
        p: spec.p,
        normalized: true,
        target: Some(a),
        kind: ObjKind::Power,
    };
    let r0 = spec.weight.inverse_radial_mass(a)?;
    let x0 = vec![r0.ln(); spec.dirs.len()];
    let out = drive(&eng, &x0, &spec.options, Gating::Objective, flags)?;
    Ok(assemble(spec, &eng, out))
}

/// Mass-pinned maximization of the entropy objective (p = 0).
pub fn solve_entropy(spec: &ProblemSpec) -> Result<SolveReport, SolveError> {
    let a = match spec.mode {
        Mode::Entropy { a } => a,
        _ => return Err(SolveError::Invalid("mode must be entropy".into())),
    };
    let chk = validate_common(spec)?;
    let mut flags = chk.flags.clone();
    let (_, extra) = gates_entropy(spec, &chk, a)?;
    flags.extend(extra);
    let eng = Engine {
        w: &spec.weight,
        dirs: &spec.dirs,
        nu: &spec.nu,
        nu_tot: chk.nu_tot,
        p: 0.0,
        normalized: true,
        target: Some(a),
        kind: ObjKind::Entropy,
    };
    let r0 = spec.weight.inverse_radial_mass(a)?;
    let x0 = vec![r0.ln(); spec.dirs.len()];
    let out = drive(&eng, &x0, &spec.options, Gating::Objective, flags)?;
    Ok(assemble(spec, &eng, out))
}

/// Unconstrained maximization of psi = mass + power objective, p > n.
pub fn solve_free(spec: &ProblemSpec) -> Result<SolveReport, SolveError> {
    if spec.mode != Mode::Free {
        return Err(SolveError::Invalid("mode must be free".into()));
    }
    let chk = validate_common(spec)?;
    gates_free(spec, &chk)?;
    let eng = Engine {
        w: &spec.weight,
        dirs: &spec.dirs,
        nu: &spec.nu,
        nu_tot: chk.nu_tot,
        p: spec.p,
        normalized: false,
        target: None,
        kind: ObjKind::Full,
    };
    // Ball scan for a positive objective value; the proof of existence runs
    // through exactly this bracket.
    let scale = spec.weight.reference_scale();
    let mut best: Option<(f64, f64)> = None;
    for dec in 0..2 {
        let lo: f64 = if dec == 0 { 1e-3 * scale } else { 1e-6 * scale };
        let hi = match spec.weight.support_sup() {
            s if s.is_finite() => 2.0 * s,
            _ => 1e3 * scale,
        };
        let m = 48;
        for k in 0..=m {
            let r = lo * (hi / lo).powf(k as f64 / m as f64);
            let x = vec![r.ln(); spec.dirs.len()];
            if let Ok(it) = eng.eval(&x, false, 0.0) {
                if best.map_or(true, |(_, ob)| it.obj > ob) {
                    best = Some((r, it.obj));
                }
            }
        }
        if best.map_or(false, |(_, ob)| ob > 0.0) {
            break;
        }
    }
    let (r0, obj0) = best.ok_or_else(|| SolveError::Invalid("ball scan failed".into()))?;
    if !(obj0 > 0.0) {
        let x0 = vec![r0.ln(); spec.dirs.len()];
        let it = eng.eval(&x0, false, 0.0)?;
        let out = Outcome {
            trace: vec![it.obj],
            it,
            iterations: 0,
            status: SolveStatus::NoPositiveBracket,
            flags: chk.flags,
        };
        return Ok(assemble(spec, &eng, out));
    }
    let x0 = vec![r0.ln(); spec.dirs.len()];
    let out = drive(&eng, &x0, &spec.options, Gating::Objective, chk.flags)?;
    Ok(assemble(spec, &eng, out))
}

/// Dual-branch solve in the small-datum regime 0 < p < n: the lambda-free
/// fixed point from each of the two constant solutions. Returns the branch
/// with the larger mass first.
pub fn solve_small_mass_dual(spec: &ProblemSpec) -> Result<(SolveReport, SolveReport), SolveError> {
    if !matches!(spec.mode, Mode::SmallMassDual { .. }) {
        return Err(SolveError::Invalid("mode must be small_mass_dual".into()));
    }
    let chk = validate_common(spec)?;
    let mut flags = chk.flags.clone();
    let (pivot, roots, extra) = gates_small_mass(spec, &chk)?;
    flags.extend(extra);
    let eng = Engine {
        w: &spec.weight,
        dirs: &spec.dirs,
        nu: &spec.nu,
        nu_tot: chk.nu_tot,
        p: spec.p,
        normalized: false,
        target: None,
        kind: ObjKind::Full,
    };
    let branch = |r: f64, flags: Vec<String>| -> Result<SolveReport, SolveError> {
        let x0 = vec![r.ln(); spec.dirs.len()];
        let out = drive(&eng, &x0, &spec.options, Gating::Residual, flags)?;
        Ok(assemble(spec, &eng, out))
    };
    let r_small = roots[0];
    let r_big = *roots.last().unwrap();
    let mut rep_big = branch(r_big, flags.clone())?;
    let mut rep_small = branch(r_small, flags)?;
    if rep_big.mass < rep_small.mass {
        std::mem::swap(&mut rep_big, &mut rep_small);
    }
    if !(rep_big.mass > pivot) {
        rep_big.flags.push(format!(
            "large branch mass {:.6e} does not exceed the pivot {pivot:.6e}",
            rep_big.mass
        ));
    }
    if !(rep_small.mass < chk.total - pivot) {
        rep_small.flags.push(format!(
            "small branch mass {:.6e} not below total - pivot {:.6e}",
            rep_small.mass,
            chk.total - pivot
        ));
    }
    let scale = rep_big
        .h
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let dist = rep_big
        .h
        .iter()
        .zip(&rep_small.h)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if roots.len() == 1 || dist <= 1e-8 * scale {
        for r in [&mut rep_big, &mut rep_small] {
            r.status = SolveStatus::BranchMerge;
            r.flags
                .push("the two branches coalesced into one solution".into());
        }
    }
    Ok((rep_big, rep_small))
}

/// Constant (ball) solutions of the radial equation t^(n-p) psi(t) = c, one
/// report per root, in increasing radius order.
pub fn solve_isotropic(spec: &ProblemSpec) -> Result<Vec<SolveReport>, SolveError> {
    let c = match spec.mode {
        Mode::Isotropic { c } => c,
        _ => return Err(SolveError::Invalid("mode must be isotropic".into())),
    };
    let chk = validate_common(spec)?;
    if !(c > 0.0) {
        return Err(SolveError::Invalid(format!("c must be positive, got {c}")));
    }
    let roots = spec.weight.constant_solutions(spec.p, c)?;
    if roots.is_empty() {
        let fold = spec
            .weight
            .isotropic_analysis(spec.p)
            .ok()
            .and_then(|ia| ia.threshold)
            .map(|t| format!("{t:.6e}"))
            .unwrap_or_else(|| "unknown".into());
        return Err(SolveError::Refused {
            hypothesis: "constant solutions below the fold".into(),
            detail: format!("c = {c:.6e} has no roots (fold value {fold})"),
        });
    }
    let n = spec.weight.dim as f64;
    let eng = Engine {
        w: &spec.weight,
        dirs: &spec.dirs,
        nu: &spec.nu,
        nu_tot: chk.nu_tot,
        p: spec.p,
        normalized: false,
        target: None,
        kind: if spec.p == 0.0 { ObjKind::Entropy } else { ObjKind::Power },
    };
    let mut reports = Vec::new();
    for &r in &roots {
        let x = vec![r.ln(); spec.dirs.len()];
        let it = eng.eval(&x, false, 0.0)?;
        let radial_res = (r.powf(n - spec.p) * spec.weight.density(r) - c).abs();
        let mut flags = chk.flags.clone();
        flags.push(
            "constant radial solution: residual_inf is the radial-equation residual; \
             the facet realization adds O(theta^2) discretization on top"
                .into(),
        );
        let out = Outcome {
            trace: vec![it.obj],
            it,
            iterations: 0,
            status: SolveStatus::Converged,
            flags,
        };
        let mut rep = assemble(spec, &eng, out);
        rep.residual_inf = radial_res;
        reports.push(rep);
    }
    Ok(reports)
}

/// First-order report on an arbitrary candidate support vector: both
/// multiplier estimates, the residual, the mass defect against the mode's
/// target, and the hemisphere constant of the realized measure.
pub fn kkt_report(spec: &ProblemSpec, h: &[f64]) -> Result<SolveReport, SolveError> {
    let chk = validate_common(spec)?;
    if h.len() != spec.dirs.len() {
        return Err(SolveError::Invalid(format!(
            "candidate has {} entries for {} directions",
            h.len(),
            spec.dirs.len()
        )));
    }
    let (target, normalized, kind, p_eff) = match &spec.mode {
        Mode::Pinned { a } => (Some(*a), true, ObjKind::Power, spec.p),
        Mode::Entropy { a } => (Some(*a), true, ObjKind::Entropy, 0.0),
        Mode::Free | Mode::SmallMassDual { .. } => (None, false, ObjKind::Full, spec.p),
        Mode::Isotropic { .. } | Mode::MaCircle { .. } => {
            let k = if spec.p == 0.0 { ObjKind::Entropy } else { ObjKind::Power };
            (None, false, k, spec.p)
        }
    };
    let eng = Engine {
        w: &spec.weight,
        dirs: &spec.dirs,
        nu: &spec.nu,
        nu_tot: chk.nu_tot,
        p: p_eff,
        normalized,
        target,
        kind,
    };
    let x: Vec<f64> = h
        .iter()
        .map(|v| {
            if *v > 0.0 {
                Ok(v.ln())
            } else {
                Err(SolveError::Invalid(format!("candidate entry {v} must be positive")))
            }
        })
        .collect::<Result<_, _>>()?;
    let it = eng.eval(&x, false, 0.0)?;
    let res = eng.residual_inf(&it);
    let mass_ok = target.map_or(true, |a| (it.mass - a).abs() <= spec.options.mass_tol);
    let status = if res <= spec.options.kkt_tol_rel * chk.nu_tot && mass_ok {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxIterations
    };
    let out = Outcome {
        trace: vec![it.obj],
        it,
        iterations: 0,
        status,
        flags: chk.flags,
    };
    Ok(assemble(spec, &eng, out))
}

/// Dispatch on the mode; dual and isotropic modes return several reports.
pub fn solve_problem(spec: &ProblemSpec) -> Result<Vec<SolveReport>, SolveError> {
    match &spec.mode {
        Mode::Pinned { .. } => Ok(vec![solve_pinned(spec)?]),
        Mode::Entropy { .. } => Ok(vec![solve_entropy(spec)?]),
        Mode::Free => Ok(vec![solve_free(spec)?]),
        Mode::SmallMassDual { .. } => {
            let (a, b) = solve_small_mass_dual(spec)?;
            Ok(vec![a, b])
        }
        Mode::Isotropic { .. } => solve_isotropic(spec),
        Mode::MaCircle { .. } => Ok(vec![ma2d::solve_ma_circle(spec)?]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::DirectionSet;
    use approx::assert_relative_eq;

    fn axes2() -> DirectionSet {
        DirectionSet::new(2, vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0]])
            .unwrap()
    }

    fn spec(
        weight: Weight,
        dirs: DirectionSet,
        nu: Vec<f64>,
        p: f64,
        even: bool,
        mode: Mode,
    ) -> ProblemSpec {
        ProblemSpec {
            weight,
            dirs,
            nu,
            p,
            even,
            mode,
            options: SolverOptions::default(),
        }
    }

    #[test]
    fn objective_eval_matches_closed_forms() {
        let s = spec(
            Weight::lebesgue(2),
            axes2(),
            vec![1.0; 4],
            1.0,
            true,
            Mode::Pinned { a: 4.0 },
        );
        assert_eq!(objective_eval(&s, &[1.0; 4]).unwrap(), -4.0);

        let e = spec(
            Weight::lebesgue(2),
            axes2(),
            vec![1.0; 4],
            0.0,
            true,
            Mode::Entropy { a: 4.0 },
        );
        assert_eq!(objective_eval(&e, &[1.0; 4]).unwrap(), 0.0);

        // gaussian disc, p = 3: mass term (1 - e^{-r^2/2}) minus r^3/3 nu_tot
        let n = 512;
        let dirs = DirectionSet::uniform_circle(n);
        let nu = dirs.quad_weights();
        let nu_tot: f64 = nu.iter().sum();
        let f = spec(Weight::gaussian(2), dirs, nu, 3.0, true, Mode::Free);
        let r = 0.8_f64;
        let got = objective_eval(&f, &vec![r; n]).unwrap();
        let want = (1.0 - (-r * r / 2.0f64).exp()) - r.powi(3) / 3.0 * nu_tot;
        assert!((got - want).abs() < 5e-4, "{got} vs {want}");
    }

    #[test]
    fn hausdorff_to_ball_square() {
        let poly = wulff_shape(&axes2(), &[1.0; 4]).unwrap();
        let d = hausdorff_to_ball(&poly, 1.0);
        assert_relative_eq!(d, 2.0_f64.sqrt() - 1.0, epsilon = 1e-12);
        let d2 = hausdorff_to_ball(&poly, 1.2);
        assert_relative_eq!(d2, 2.0_f64.sqrt() - 1.2, epsilon = 1e-12);
    }

    #[test]
    fn scaled_square_mass_scales() {
        let poly = wulff_shape(&axes2(), &[1.0; 4]).unwrap();
        let w = Weight::lebesgue(2);
        let m1 = measures::body_mass(&w, &poly);
        let m2 = measures::body_mass(&w, &poly.scaled(2.0));
        assert_relative_eq!(m2, 4.0 * m1, epsilon = 1e-10);
    }

    #[test]
    fn pinned_recovers_unit_square() {
        let s = spec(
            Weight::lebesgue(2),
            axes2(),
            vec![2.0; 4],
            1.0,
            true,
            Mode::Pinned { a: 4.0 },
        );
        let rep = solve_pinned(&s).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        for h in &rep.h {
            assert_relative_eq!(*h, 1.0, epsilon = 1e-9);
        }
        assert_relative_eq!(rep.lambda, 1.0, epsilon = 1e-9);
        assert_relative_eq!(rep.lambda_fit, 1.0, epsilon = 1e-9);
        assert!(rep.mass_error <= 1e-8);
        assert!(rep.residual_inf <= 1e-9 * rep.datum_total);
    }

    #[test]
    fn pinned_square_scaling_halves_lambda() {
        let s = spec(
            Weight::lebesgue(2),
            axes2(),
            vec![2.0; 4],
            1.0,
            true,
            Mode::Pinned { a: 16.0 },
        );
        let rep = solve_pinned(&s).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        for h in &rep.h {
            assert_relative_eq!(*h, 2.0, epsilon = 1e-8);
        }
        assert_relative_eq!(rep.lambda, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn entropy_recovers_square_from_cone_measure() {
        // cone measure of [-1,1]^2: h * edge length = 2 per axis direction
        let s = spec(
            Weight::lebesgue(2),
            axes2(),
            vec![2.0; 4],
            0.0,
            true,
            Mode::Entropy { a: 4.0 },
        );
        let rep = solve_entropy(&s).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        for h in &rep.h {
            assert_relative_eq!(*h, 1.0, epsilon = 1e-8);
        }
        assert_relative_eq!(rep.lambda, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn pinned_gaussian_isotropic_gives_disc() {
        let n = 16;
        let dirs = DirectionSet::uniform_circle(n);
        let wq = dirs.quad_weights();
        let nu: Vec<f64> = wq.iter().map(|w| 0.1 * w).collect();
        let s = spec(
            Weight::gaussian(2),
            dirs,
            nu,
            1.0,
            true,
            Mode::Pinned { a: 0.5 },
        );
        let rep = solve_pinned(&s).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        let r_star = (2.0 * 2.0_f64.ln()).sqrt();
        let d = hausdorff_to_ball(&rep.body, r_star);
        assert!(d < 0.03, "hausdorff {d}");
        assert!(
            (rep.lambda - rep.lambda_fit).abs() <= 1e-8 * rep.lambda.abs(),
            "lambda {} fit {}",
            rep.lambda,
            rep.lambda_fit
        );
        // support spread stays at discretization level; the body is a disc
        let hmin = rep.h.iter().cloned().fold(f64::INFINITY, f64::min);
        let hmax = rep.h.iter().cloned().fold(0.0_f64, f64::max);
        assert!(hmax - hmin <= 1e-9 * hmax);
    }

    #[test]
    fn pinned_recovers_box_in_3d() {
        let dirs = DirectionSet::new(
            3,
            vec![
                [1.0, 0.0, 0.0],
                [-1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, -1.0, 0.0],
                [0.0, 0.0, 1.0],
                [0.0, 0.0, -1.0],
            ],
        )
        .unwrap();
        // box [-1,1]^2 x [-1/2,1/2]: side faces 2x1 area 2, top/bottom 2x2 = 4
        let nu = vec![2.0, 2.0, 2.0, 2.0, 4.0, 4.0];
        let s = spec(Weight::lebesgue(3), dirs, nu, 1.0, true, Mode::Pinned { a: 4.0 });
        let rep = solve_pinned(&s).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged, "{:?}", rep.flags);
        let want = [1.0, 1.0, 1.0, 1.0, 0.5, 0.5];
        for (h, w) in rep.h.iter().zip(want) {
            assert_relative_eq!(*h, w, epsilon = 2e-6);
        }
    }

    #[test]
    fn free_roundtrip_square_p3() {
        // datum = h^{1-p} S of [-1,1]^2 at p=3: 1 * 2 per direction
        let s = spec(
            Weight::lebesgue(2),
            axes2(),
            vec![2.0; 4],
            3.0,
            true,
            Mode::Free,
        );
        let rep = solve_free(&s).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        for h in &rep.h {
            assert_relative_eq!(*h, 1.0, epsilon = 1e-8);
        }
        assert_eq!(rep.lambda, 1.0);
        assert!(rep.residual_inf <= 1e-9 * rep.datum_total);
    }

    #[test]
    fn free_gaussian_recovers_unit_disc() {
        let n = 64;
        let dirs = DirectionSet::uniform_circle(n);
        let c = (-0.5_f64).exp() / (2.0 * std::f64::consts::PI);
        let nu: Vec<f64> = dirs.quad_weights().iter().map(|w| c * w).collect();
        let s = spec(Weight::gaussian(2), dirs, nu, 3.0, true, Mode::Free);
        let rep = solve_free(&s).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        let hmin = rep.h.iter().cloned().fold(f64::INFINITY, f64::min);
        let hmax = rep.h.iter().cloned().fold(0.0_f64, f64::max);
        assert!(hmax - hmin <= 1e-9 * hmax, "not a ball: {hmin} {hmax}");
        // discrete facet geometry shifts the constant radius by O(theta^2)
        assert!((rep.h[0] - 1.0).abs() < 5e-3, "radius {}", rep.h[0]);
    }

    #[test]
    fn small_mass_dual_straddles_pivot() {
        let n = 32;
        let dirs = DirectionSet::uniform_circle(n);
        let nu: Vec<f64> = dirs.quad_weights().iter().map(|w| 0.05 * w).collect();
        let s = spec(
            Weight::gaussian(2),
            dirs,
            nu,
            1.0,
            true,
            Mode::SmallMassDual { pivot: None },
        );
        let (big, small) = solve_small_mass_dual(&s).unwrap();
        assert_eq!(big.status, SolveStatus::Converged, "{:?}", big.flags);
        assert_eq!(small.status, SolveStatus::Converged, "{:?}", small.flags);
        assert!(big.mass > 0.5 && small.mass < 0.5, "{} {}", big.mass, small.mass);
        // branch radii near the two constant solutions (discretization-level)
        assert!((big.h[0] - 1.8961414598052869).abs() < 2e-2, "{}", big.h[0]);
        assert!((small.h[0] - 0.33195414765670296).abs() < 2e-2, "{}", small.h[0]);
        assert!(big.residual_inf <= 1e-6 * big.datum_total);
        assert!(small.residual_inf <= 1e-6 * small.datum_total);
    }

    #[test]
    fn small_mass_dual_refuses_above_fold() {
        let n = 16;
        let dirs = DirectionSet::uniform_circle(n);
        let nu: Vec<f64> = dirs.quad_weights().iter().map(|w| 0.2 * w).collect();
        let s = spec(
            Weight::gaussian(2),
            dirs,
            nu,
            1.0,
            true,
            Mode::SmallMassDual { pivot: None },
        );
        match solve_small_mass_dual(&s) {
            Err(SolveError::Refused { hypothesis, .. }) => {
                assert!(
                    hypothesis.contains("threshold") || hypothesis.contains("fold"),
                    "{hypothesis}"
                );
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn entropy_refuses_axis_concentration() {
        let s = spec(
            Weight::lebesgue(2),
            axes2(),
            vec![3.0, 3.0, 1.0, 1.0],
            0.0,
            true,
            Mode::Entropy { a: 4.0 },
        );
        match solve_entropy(&s) {
            Err(SolveError::Refused { hypothesis, detail }) => {
                assert!(hypothesis.contains("subspace"), "{hypothesis}");
                assert!(detail.contains("mass"), "{detail}");
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn hemisphere_concentration_refused() {
        let dirs = DirectionSet::from_angles(&[0.2, 1.0, 2.0]).unwrap();
        let s = spec(
            Weight::gaussian(2),
            dirs,
            vec![1.0; 3],
            1.0,
            false,
            Mode::Pinned { a: 0.6 },
        );
        match solve_pinned(&s) {
            Err(SolveError::Refused { hypothesis, .. }) => {
                assert!(hypothesis.contains("hemisphere"), "{hypothesis}");
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn pinned_nonsymmetric_needs_half_total() {
        let dirs = DirectionSet::from_angles(&[0.0, 1.5, 3.0, 4.3, 5.5]).unwrap();
        let nu = vec![0.3, 0.25, 0.3, 0.35, 0.3];
        let below = spec(
            Weight::gaussian(2),
            dirs.clone(),
            nu.clone(),
            1.0,
            false,
            Mode::Pinned { a: 0.3 },
        );
        match solve_pinned(&below) {
            Err(SolveError::Refused { hypothesis, .. }) => {
                assert!(hypothesis.contains("non-symmetric"), "{hypothesis}");
            }
            other => panic!("expected refusal, got {other:?}"),
        }
        let above = spec(
            Weight::gaussian(2),
            dirs,
            nu,
            1.0,
            false,
            Mode::Pinned { a: 0.62 },
        );
        let rep = solve_pinned(&above).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged, "{:?}", rep.flags);
        assert!(rep.residual_inf <= 1e-8 * rep.datum_total);
    }

    #[test]
    fn free_refuses_low_exponent_and_odd_data() {
        let low = spec(
            Weight::gaussian(2),
            axes2(),
            vec![1.0; 4],
            1.5,
            true,
            Mode::Free,
        );
        assert!(matches!(solve_free(&low), Err(SolveError::Refused { .. })));

        let dirs = DirectionSet::from_angles(&[0.0, 1.5, 3.0, 4.3, 5.5]).unwrap();
        let odd = spec(
            Weight::gaussian(2),
            dirs,
            vec![1.0, 1.1, 1.0, 1.2, 1.0],
            3.0,
            false,
            Mode::Free,
        );
        match solve_free(&odd) {
            Err(SolveError::Refused { hypothesis, .. }) => {
                assert!(hypothesis.contains("symmetric"), "{hypothesis}");
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn even_claim_checked() {
        let dirs = DirectionSet::from_angles(&[0.0, 1.5, 3.0, 4.3, 5.5]).unwrap();
        let s = spec(
            Weight::gaussian(2),
            dirs,
            vec![1.0; 5],
            1.0,
            true,
            Mode::Pinned { a: 0.6 },
        );
        assert!(matches!(solve_pinned(&s), Err(SolveError::Invalid(_))));
    }

    #[test]
    fn p_zero_routed_to_entropy() {
        let s = spec(
            Weight::lebesgue(2),
            axes2(),
            vec![2.0; 4],
            0.0,
            true,
            Mode::Pinned { a: 4.0 },
        );
        assert!(matches!(solve_pinned(&s), Err(SolveError::Invalid(_))));
    }

    #[test]
    fn kkt_report_flags_perturbation() {
        let s = spec(
            Weight::lebesgue(2),
            axes2(),
            vec![2.0; 4],
            1.0,
            true,
            Mode::Pinned { a: 4.0 },
        );
        let exact = kkt_report(&s, &[1.0; 4]).unwrap();
        assert_eq!(exact.status, SolveStatus::Converged);
        assert!(exact.residual_inf <= 1e-10);
        assert!((exact.lambda - exact.lambda_fit).abs() <= 1e-10);
        assert_relative_eq!(exact.lambda, 1.0, epsilon = 1e-12);

        let bumped = kkt_report(&s, &[1.01, 1.0, 1.0, 1.0]).unwrap();
        assert!(bumped.residual_inf > 10.0 * exact.residual_inf.max(1e-14));
    }

    #[test]
    fn isotropic_reports_both_roots() {
        let n = 64;
        let dirs = DirectionSet::uniform_circle(n);
        let c = 0.05;
        let nu: Vec<f64> = dirs.quad_weights().iter().map(|w| c * w).collect();
        let s = spec(
            Weight::gaussian(2),
            dirs,
            nu,
            1.0,
            true,
            Mode::Isotropic { c },
        );
        let reps = solve_isotropic(&s).unwrap();
        assert_eq!(reps.len(), 2);
        assert_relative_eq!(reps[0].h[0], 0.33195414765670296, max_relative = 1e-8);
        assert_relative_eq!(reps[1].h[0], 1.8961414598052869, max_relative = 1e-8);
        for r in &reps {
            assert!(r.residual_inf <= 1e-10 * c, "{}", r.residual_inf);
            assert_eq!(r.status, SolveStatus::Converged);
        }
    }

    #[test]
    fn objective_trace_monotone() {
        let n = 24;
        let dirs = DirectionSet::uniform_circle(n);
        let nu: Vec<f64> = dirs
            .quad_weights()
            .iter()
            .enumerate()
            .map(|(i, w)| 0.08 * w * (1.0 + 0.05 * (2.0 * 2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
            .collect();
        let s = spec(
            Weight::gaussian(2),
            dirs,
            nu,
            1.0,
            true,
            Mode::Pinned { a: 0.5 },
        );
        let rep = solve_pinned(&s).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        for w in rep.objective_trace.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-9 * (1.0 + w[0].abs()),
                "trace decreased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn newton_jacobian_matches_finite_differences() {
        let n = 8;
        let dirs = DirectionSet::uniform_circle(n);
        let nu: Vec<f64> = dirs.quad_weights().iter().map(|w| 0.1 * w).collect();
        let w = Weight::gaussian(2);
        let nu_tot: f64 = nu.iter().sum();
        let eng = Engine {
            w: &w,
            dirs: &dirs,
            nu: &nu,
            nu_tot,
            p: 1.0,
            normalized: true,
            target: Some(0.4),
            kind: ObjKind::Power,
        };
        // irregular but all-active body
        let x: Vec<f64> = (0..n)
            .map(|i| (1.0 + 0.08 * ((i * 7 % n) as f64 / n as f64 - 0.5)).ln())
            .collect();
        let it = eng.eval(&x, false, 0.0).unwrap();
        assert!(it.body.active.iter().all(|&b| b));
        let rg = ring(&dirs);
        let jac = log_jacobian(&eng, &it, &rg).unwrap();
        let ell = 0.1;
        let f0 = log_residual(&eng, &it, ell).unwrap();
        let dx = 1e-6;
        for j in 0..n {
            let mut xp = x.clone();
            xp[j] += dx;
            let itp = eng.eval(&xp, false, 0.0).unwrap();
            let fp = log_residual(&eng, &itp, ell).unwrap();
            let mut xm = x.clone();
            xm[j] -= dx;
            let itm = eng.eval(&xm, false, 0.0).unwrap();
            let fm = log_residual(&eng, &itm, ell).unwrap();
            for i in 0..=n {
                let fd = (fp[i] - fm[i]) / (2.0 * dx);
                let an = jac[(i, j)];
                assert!(
                    (fd - an).abs() <= 1e-5 * (1.0 + an.abs()),
                    "J[{i}][{j}]: fd {fd} vs analytic {an}"
                );
            }
        }
    }
}
