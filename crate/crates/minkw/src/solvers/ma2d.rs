//! Support-function equation on the circle, solved on a uniform periodic
//! grid: h^(1-p) psi(sqrt(h^2 + h'^2)) (h'' + h) = f(theta). Damped Newton
//! with an analytic cyclic-tridiagonal Jacobian; when direct Newton fails,
//! continuation f_t = (1-t) c0 + t f from a constant (ball) solution of the
//! averaged datum. Positivity of h and of the curvature factor h'' + h are
//! enforced by the step damping, never by clipping.

use nalgebra::{DMatrix, DVector};
use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::Normal;

use crate::ineq;
use crate::measures;
use crate::sphere::wulff_shape;
use crate::weights::Weight;

use super::{
    entropy_objective, power_objective, validate_common, Mode, ProblemSpec, SolveError,
    SolveReport, SolveStatus,
};

/// Discretized operator on the sorted uniform angle grid.
pub struct MaGrid<'a> {
    w: &'a Weight,
    p: f64,
    delta: f64,
    /// Right-hand side samples in grid order.
    pub f: Vec<f64>,
}

impl<'a> MaGrid<'a> {
    pub fn new(w: &'a Weight, p: f64, f: Vec<f64>) -> MaGrid<'a> {
        let delta = 2.0 * std::f64::consts::PI / f.len() as f64;
        MaGrid { w, p, delta, f }
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    /// (density factor A_k, curvature factor B_k) at one grid point.
    fn ab(&self, h: &[f64], k: usize) -> (f64, f64) {
        let n = h.len();
        let hm = h[(k + n - 1) % n];
        let hp = h[(k + 1) % n];
        let d1 = (hp - hm) / (2.0 * self.delta);
        let s = h[k].hypot(d1);
        let a = h[k].powf(1.0 - self.p) * self.w.density(s);
        let b = (hp - 2.0 * h[k] + hm) / (self.delta * self.delta) + h[k];
        (a, b)
    }

    /// Residual A_k B_k - rhs_k.
    pub fn residual_against(&self, h: &[f64], rhs: &[f64]) -> Vec<f64> {
        (0..h.len())
            .map(|k| {
                let (a, b) = self.ab(h, k);
                a * b - rhs[k]
            })
            .collect()
    }

    pub fn residual(&self, h: &[f64]) -> Vec<f64> {
        self.residual_against(h, &self.f)
    }

    pub fn residual_sup(&self, h: &[f64]) -> f64 {
        self.residual(h).iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Smallest curvature factor; positive means the grid function is the
    /// support function of a convex body at this resolution.
    pub fn min_convexity(&self, h: &[f64]) -> f64 {
        (0..h.len()).map(|k| self.ab(h, k).1).fold(f64::INFINITY, f64::min)
    }

    /// Jacobian of the residual map; rows couple only angular neighbors.
    fn jacobian(&self, h: &[f64]) -> DMatrix<f64> {
        let n = h.len();
        let mut j = DMatrix::zeros(n, n);
        let d2 = self.delta * self.delta;
        for k in 0..n {
            let km = (k + n - 1) % n;
            let kp = (k + 1) % n;
            let d1 = (h[kp] - h[km]) / (2.0 * self.delta);
            let s = h[k].hypot(d1);
            let psi = self.w.density(s);
            let dpsi = self.w.density_deriv(s);
            let hpow = h[k].powf(1.0 - self.p);
            let a = hpow * psi;
            let b = (h[kp] - 2.0 * h[k] + h[km]) / d2 + h[k];
            let da_dk = (1.0 - self.p) * h[k].powf(-self.p) * psi + hpow * dpsi * (h[k] / s);
            let da_dside = hpow * dpsi * (d1 / s) / (2.0 * self.delta);
            j[(k, k)] += da_dk * b + a * (1.0 - 2.0 / d2);
            j[(k, kp)] += da_dside * b + a / d2;
            j[(k, km)] += -da_dside * b + a / d2;
        }
        j
    }
}

struct NewtonRun {
    h: Vec<f64>,
    res: f64,
    iters: usize,
    accepted: Vec<Vec<f64>>,
    ok: bool,
}

/// Damped Newton toward rhs. Trial steps must keep h positive, keep the
/// curvature factor positive, and shrink the sup residual.
fn damped_newton(grid: &MaGrid, h0: &[f64], rhs: &[f64], tol: f64, cap: usize) -> NewtonRun {
    let n = h0.len();
    let mut h = h0.to_vec();
    let mut accepted: Vec<Vec<f64>> = Vec::new();
    let mut iters = 0;
    loop {
        let r = grid.residual_against(&h, rhs);
        let sup = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if sup <= tol {
            return NewtonRun { h, res: sup, iters, accepted, ok: true };
        }
        if iters >= cap {
            return NewtonRun { h, res: sup, iters, accepted, ok: false };
        }
        let jac = grid.jacobian(&h);
        let rhs_vec = DVector::from_iterator(n, r.iter().map(|v| -v));
        let delta = match jac.lu().solve(&rhs_vec) {
            Some(d) => d,
            None => return NewtonRun { h, res: sup, iters, accepted, ok: false },
        };
        let mut alpha = 1.0_f64;
        let mut stepped = false;
        while alpha >= 1e-6 {
            let trial: Vec<f64> = (0..n).map(|k| h[k] + alpha * delta[k]).collect();
            if trial.iter().all(|&v| v > 0.0) && grid.min_convexity(&trial) > 0.0 {
                let rt = grid.residual_against(&trial, rhs);
                let sup_t = rt.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                if sup_t <= sup * (1.0 - 1e-4 * alpha) {
                    h = trial;
                    stepped = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        iters += 1;
        if !stepped {
            return NewtonRun { h, res: sup, iters, accepted, ok: false };
        }
        accepted.push(h.clone());
    }
}

struct Continuation {
    h: Vec<f64>,
    res: f64,
    iters: usize,
    accepted: Vec<Vec<f64>>,
    t_reached: f64,
    ok: bool,
}

/// Continuity path from the constant solution of rhs = c0 to the target
/// datum, with adaptive step bisection in t.
fn continuation(grid: &MaGrid, r0: f64, c0: f64, tol: f64) -> Continuation {
    let n = grid.len();
    let mut h = vec![r0; n];
    let mut accepted: Vec<Vec<f64>> = vec![h.clone()];
    let mut iters = 0;
    let mut t = 0.0_f64;
    let mut step = 1.0_f64;
    // settle the base point (residual is already near zero for exact roots)
    let base_rhs = vec![c0; n];
    let base = damped_newton(grid, &h, &base_rhs, tol, 40);
    iters += base.iters;
    if !base.ok {
        let res = grid.residual_sup(&h);
        return Continuation { h, res, iters, accepted, t_reached: 0.0, ok: false };
    }
    h = base.h;
    while t < 1.0 {
        let t_try = (t + step).min(1.0);
        let rhs: Vec<f64> = grid
            .f
            .iter()
            .map(|fk| (1.0 - t_try) * c0 + t_try * fk)
            .collect();
        let run = damped_newton(grid, &h, &rhs, tol, 60);
        iters += run.iters;
        if run.ok {
            h = run.h;
            accepted.push(h.clone());
            t = t_try;
            step = (step * 2.0).min(1.0 - t + 1e-16);
        } else {
            step *= 0.5;
            if step < 1e-4 {
                return Continuation {
                    res: grid.residual_sup(&h),
                    h,
                    iters,
                    accepted,
                    t_reached: t,
                    ok: false,
                };
            }
        }
    }
    let res = grid.residual_sup(&h);
    Continuation { h, res, iters, accepted, t_reached: 1.0, ok: true }
}

/// Smooth random positive initialization: a ball radius modulated by a
/// low-frequency trigonometric polynomial in log scale.
fn random_init(n: usize, r_ref: f64, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed ^ (index + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15),
    );
    let normal = Normal::new(0.0, 1.0).unwrap();
    let coeffs: Vec<(f64, f64)> = (1..=3)
        .map(|_| (normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect();
    (0..n)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let mut z = 0.0;
            for (m, (a, b)) in coeffs.iter().enumerate() {
                let fm = (m + 1) as f64;
                z += (a * (fm * th).cos() + b * (fm * th).sin()) / (1.0 + fm * fm);
            }
            r_ref * (0.15 * z).exp()
        })
        .collect()
}

struct Prepared {
    order: Vec<usize>,
    f_dir: Vec<f64>,
    f_sorted: Vec<f64>,
    delta: f64,
    total: f64,
    notes: Vec<String>,
}

/// Schema, grid-uniformity, and p = n checks shared by the solver and the
/// problem precheck.
fn prepare(spec: &ProblemSpec) -> Result<Prepared, SolveError> {
    let f_mode = match &spec.mode {
        Mode::MaCircle { f } => f,
        _ => return Err(SolveError::Invalid("mode must be ma_circle".into())),
    };
    if spec.dirs.dim() != 2 {
        return Err(SolveError::Invalid(
            "the grid solver works on the circle (dimension 2)".into(),
        ));
    }
    let n = spec.dirs.len();
    let f_dir: Vec<f64> = if f_mode.is_empty() { spec.nu.clone() } else { f_mode.clone() };
    if f_dir.len() != n {
        return Err(SolveError::Invalid(format!(
            "{} datum samples for {} grid directions",
            f_dir.len(),
            n
        )));
    }
    if n < 8 {
        return Err(SolveError::Invalid(format!(
            "grid needs at least 8 points, got {n}"
        )));
    }
    for (i, v) in f_dir.iter().enumerate() {
        if !(v.is_finite() && *v > 0.0) {
            return Err(SolveError::Invalid(format!(
                "datum sample {i} must be positive and finite, got {v}"
            )));
        }
    }
    // Sort directions by angle and check the grid is uniform.
    let mut order: Vec<usize> = (0..n).collect();
    let ang: Vec<f64> = (0..n)
        .map(|i| {
            let u = spec.dirs.dir(i);
            u[1].atan2(u[0])
        })
        .collect();
    order.sort_by(|&a, &b| ang[a].partial_cmp(&ang[b]).unwrap());
    let delta = 2.0 * std::f64::consts::PI / n as f64;
    for j in 0..n {
        let a0 = ang[order[j]];
        let a1 = ang[order[(j + 1) % n]];
        let gap = if j + 1 == n {
            a1 + 2.0 * std::f64::consts::PI - a0
        } else {
            a1 - a0
        };
        if (gap - delta).abs() > 1e-9 {
            return Err(SolveError::Invalid(
                "directions must form a uniform angle grid".into(),
            ));
        }
    }
    let f_sorted: Vec<f64> = order.iter().map(|&i| f_dir[i]).collect();
    let total: f64 = f_sorted.iter().sum::<f64>() * delta;
    let mut notes = Vec::new();
    if (spec.p - 2.0).abs() <= 1e-12 {
        let bound = spec.weight.density(0.0) * 2.0 * std::f64::consts::PI;
        if total > bound * (1.0 + 1e-12) {
            return Err(SolveError::Refused {
                hypothesis: "datum total within the p = n continuity bound".into(),
                detail: format!("integral {total:.6e} exceeds psi(0) * 2 pi = {bound:.6e}"),
            });
        }
        notes.push(
            "p equals the dimension: solvability holds up to the density-at-origin bound".into(),
        );
    }
    Ok(Prepared { order, f_dir, f_sorted, delta, total, notes })
}

pub(super) fn gates_ma(spec: &ProblemSpec) -> Result<Vec<String>, SolveError> {
    Ok(prepare(spec)?.notes)
}

pub fn solve_ma_circle(spec: &ProblemSpec) -> Result<SolveReport, SolveError> {
    solve_ma_circle_from(spec, None)
}

/// Same solver with a caller-chosen starting grid function (in direction
/// order); used to select a branch when the averaged datum admits two balls.
pub fn solve_ma_circle_from(
    spec: &ProblemSpec,
    init: Option<&[f64]>,
) -> Result<SolveReport, SolveError> {
    let chk = validate_common(spec)?;
    let prep = prepare(spec)?;
    let Prepared { order, f_dir, f_sorted, delta, total, notes } = prep;
    let n = spec.dirs.len();
    let grid = MaGrid::new(&spec.weight, spec.p, f_sorted);
    let mut flags = chk.flags;
    flags.extend(notes);
    // Constant base solution for the continuation path.
    let mean_f = total / (2.0 * std::f64::consts::PI);
    let mut c0 = mean_f;
    let mut roots = spec.weight.constant_solutions(spec.p, c0)?;
    if roots.is_empty() {
        let ia = spec.weight.isotropic_analysis(spec.p)?;
        match ia.threshold {
            Some(thr) if thr > 0.0 => {
                c0 = 0.5 * thr;
                roots = spec.weight.constant_solutions(spec.p, c0)?;
                flags.push(format!(
                    "averaged datum {mean_f:.6e} above the constant-solution fold; \
                     continuation starts below it at c0 = {c0:.6e}"
                ));
            }
            _ => {}
        }
        if roots.is_empty() {
            return Err(SolveError::Invalid(
                "no constant base solution available for continuation".into(),
            ));
        }
    }
    let r_ref = *roots.last().unwrap();
    let tol = spec.options.pde_tol;

    // Multi-start ladder: caller init, then seeded smooth random starts,
    // then the constant roots from the largest down. First success by
    // ladder position wins, independent of scheduling.
    let mut ladder: Vec<(String, Vec<f64>)> = Vec::new();
    if let Some(h0) = init {
        if h0.len() != n {
            return Err(SolveError::Invalid(format!(
                "initialization has {} entries for {n} grid points",
                h0.len()
            )));
        }
        if h0.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SolveError::Invalid("initialization must be positive".into()));
        }
        let sorted: Vec<f64> = order.iter().map(|&i| h0[i]).collect();
        ladder.push(("caller initialization".into(), sorted));
    } else {
        for k in 0..3u64 {
            ladder.push((
                format!("random start {k}"),
                random_init(n, r_ref, spec.options.seed, k),
            ));
        }
        for (i, r) in roots.iter().rev().enumerate() {
            ladder.push((format!("ball start {i}"), vec![*r; n]));
        }
    }
    let threads = spec.options.threads.max(1);
    let mut winner: Option<(String, NewtonRun)> = None;
    for chunk in ladder.chunks(threads) {
        let runs: Vec<NewtonRun> = if threads == 1 || chunk.len() == 1 {
            chunk
                .iter()
                .map(|(_, h0)| damped_newton(&grid, h0, &grid.f, tol, 80))
                .collect()
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|(_, h0)| s.spawn(|| damped_newton(&grid, h0, &grid.f, tol, 80)))
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            })
        };
        for ((label, _), run) in chunk.iter().zip(runs) {
            if run.ok {
                winner = Some((label.clone(), run));
                break;
            }
        }
        if winner.is_some() {
            break;
        }
    }

    let (status, h_sorted, res, iters, accepted, source) = match winner {
        Some((label, run)) => (
            SolveStatus::Converged,
            run.h,
            run.res,
            run.iters,
            run.accepted,
            label,
        ),
        None => {
            let cont = continuation(&grid, r_ref, c0, tol);
            let status = if cont.ok {
                SolveStatus::Converged
            } else {
                SolveStatus::HomotopyStuck { t_reached: cont.t_reached }
            };
            (
                status,
                cont.h,
                cont.res,
                cont.iters,
                cont.accepted,
                format!("continuation from the ball of radius {r_ref:.6}"),
            )
        }
    };
    flags.push(format!("initialization: {source}"));
    flags.push(
        "residual_inf is the grid sup-norm of the radial equation; the polytope \
         realization adds O(delta^2) on top"
            .into(),
    );

    // Back to direction order and polytope realization.
    let mut h = vec![0.0; n];
    for (j, &i) in order.iter().enumerate() {
        h[i] = h_sorted[j];
    }
    let body = wulff_shape(&spec.dirs, &h)?;
    if !body.active.iter().all(|&b| b) {
        flags.push("some grid halfspaces are inactive on the realized polytope".into());
    }
    let areas = measures::facet_weighted_areas(&spec.weight, &body);
    let lp = measures::lp_surface_from_areas(&body.support, &areas, spec.p);
    let nu_cells: Vec<f64> = f_dir.iter().map(|v| v * delta).collect();
    let lp2: f64 = lp.iter().map(|v| v * v).sum();
    let lambda_fit = if lp2 > 0.0 {
        nu_cells.iter().zip(&lp).map(|(a, b)| a * b).sum::<f64>() / lp2
    } else {
        1.0
    };
    // Snapshots live in sorted grid order; pair them with the sorted datum.
    let nu_cells_sorted: Vec<f64> = grid.f.iter().map(|v| v * delta).collect();
    let objective_of = |hv: &[f64]| {
        if spec.p == 0.0 {
            entropy_objective(&nu_cells_sorted, hv)
        } else {
            power_objective(&nu_cells_sorted, hv, spec.p)
        }
    };
    let mut trace: Vec<f64> = Vec::with_capacity(accepted.len() + 1);
    for snapshot in &accepted {
        trace.push(objective_of(snapshot));
    }
    trace.push(objective_of(&h_sorted));
    let mass = measures::body_mass(&spec.weight, &body);
    let hemi = ineq::hemisphere_constant(&spec.dirs, &lp, 1.0);
    Ok(SolveReport {
        mode: spec.mode.name().into(),
        p: spec.p,
        h,
        body,
        lambda: 1.0,
        lambda_fit,
        mass,
        mass_target: None,
        mass_error: 0.0,
        residual_inf: res,
        objective: *trace.last().unwrap(),
        objective_trace: trace,
        iterations: iters,
        status,
        surface: areas,
        lp_surface: lp,
        datum_total: total,
        hemisphere_realized: hemi.value,
        flags,
    })
}
