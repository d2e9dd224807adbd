//! Isoperimetric profiles and inequality checkers.
//!
//! The profiles give lower bounds I(mass) on weighted boundary measure; the
//! checkers evaluate concentration preconditions (hemisphere, subspace) and
//! probe concavity properties of the mass functional on random bodies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures;
use crate::num::{lowdisc, opt, special};
use crate::sphere::{cross, dot, norm, scale, sub, wulff_shape, DirectionSet, Polytope, V3};
use crate::weights::{unit_ball_volume, Weight, WeightKind};

#[derive(Debug, Error)]
pub enum IsoError {
    #[error("mass {t} outside the profile domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("bad profile parameter: {0}")]
    BadParameter(String),
}

/// Lower-bound profile for weighted boundary measure as a function of mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IsoProfile {
    /// n kappa_n^(1/n) t^((n-1)/n); balls are extremal.
    Lebesgue { dim: usize },
    /// Normal density at the normal quantile, on masses in [0, 1].
    Gaussian,
    /// c(s)/m * min(t, 1-t)^(1-s) for an s-concave probability measure
    /// with radial median m.
    BobkovSConcave { s: f64, median: f64 },
    /// (1/q) ball_mass^q t^(1-q) with 1/q = 1/s + n, for s-concave measures
    /// homogeneous of degree 1/s; dilates of the unit ball are extremal.
    MilmanRotem { s: f64, dim: usize, ball_mass: f64 },
    /// Piecewise-linear interpolation of (mass, bound) rows.
    Custom { table: Vec<(f64, f64)> },
}

fn bobkov_coefficient(s: f64) -> f64 {
    if s > 0.0 {
        1.0 / 16.0
    } else if s == 0.0 {
        1.0 / 80.0
    } else {
        (2.0_f64.powf(-s) - 1.0) / (40.0 * (2.0_f64.powf(s * s - 2.0 * s) - 1.0))
    }
}

pub fn iso_eval(profile: &IsoProfile, t: f64) -> Result<f64, IsoError> {
    match profile {
        IsoProfile::Lebesgue { dim } => {
            if t < 0.0 {
                return Err(IsoError::OutOfDomain { t, lo: 0.0, hi: f64::INFINITY });
            }
            let n = *dim as f64;
            Ok(n * unit_ball_volume(*dim).powf(1.0 / n) * t.powf((n - 1.0) / n))
        }
        IsoProfile::Gaussian => {
            if !(0.0..=1.0).contains(&t) {
                return Err(IsoError::OutOfDomain { t, lo: 0.0, hi: 1.0 });
            }
            if t == 0.0 || t == 1.0 {
                return Ok(0.0);
            }
            Ok(special::normal_pdf(special::normal_quantile(t)))
        }
        IsoProfile::BobkovSConcave { s, median } => {
            if *s > 1.0 {
                return Err(IsoError::BadParameter(format!("concavity order {s} above 1")));
            }
            if !(*median > 0.0) {
                return Err(IsoError::BadParameter(format!("median {median} not positive")));
            }
            if !(0.0..=1.0).contains(&t) {
                return Err(IsoError::OutOfDomain { t, lo: 0.0, hi: 1.0 });
            }
            Ok(bobkov_coefficient(*s) / median * t.min(1.0 - t).powf(1.0 - s))
        }
        IsoProfile::MilmanRotem { s, dim, ball_mass } => {
            let n = *dim as f64;
            if !(*s > 0.0 && *s <= 1.0 / n) {
                return Err(IsoError::BadParameter(format!(
                    "concavity order {s} outside (0, 1/{dim}]"
                )));
            }
            if !(*ball_mass > 0.0) {
                return Err(IsoError::BadParameter(format!("ball mass {ball_mass} not positive")));
            }
            if t < 0.0 {
                return Err(IsoError::OutOfDomain { t, lo: 0.0, hi: f64::INFINITY });
            }
            let q = 1.0 / (1.0 / s + n);
            Ok(ball_mass.powf(q) * t.powf(1.0 - q) / q)
        }
        IsoProfile::Custom { table } => {
            if table.len() < 2 {
                return Err(IsoError::BadParameter("table needs at least two rows".into()));
            }
            let lo = table[0].0;
            let hi = table[table.len() - 1].0;
            if !(t >= lo && t <= hi) {
                return Err(IsoError::OutOfDomain { t, lo, hi });
            }
            let k = table.partition_point(|row| row.0 <= t).min(table.len() - 1);
            let (t0, v0) = table[k - 1];
            let (t1, v1) = table[k];
            if t1 <= t0 {
                return Err(IsoError::BadParameter("table rows not increasing in mass".into()));
            }
            Ok(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
        }
    }
}

/// The profile matched to a weight kind, when one is known.
pub fn profile_for_weight(w: &Weight) -> Option<IsoProfile> {
    match &w.kind {
        WeightKind::Gaussian => Some(IsoProfile::Gaussian),
        WeightKind::Lebesgue => Some(IsoProfile::Lebesgue { dim: w.dim }),
        _ => None,
    }
}

/// Outcome of the p-surface isoperimetric comparison on one body.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpIsoCheck {
    pub mass: f64,
    /// Total p-surface measure of the body.
    pub lhs: f64,
    /// (n mass)^(1-p) I(mass)^p.
    pub rhs: f64,
    pub holds: bool,
    /// S_p^(1/p) and mu(K;K)^((1-p)/p) * perimeter: the mean-comparison step
    /// the bound factors through.
    pub jensen_lhs: f64,
    pub jensen_rhs: f64,
}

/// Compares the total p-surface measure against the profile bound.
pub fn lp_iso_bound(
    k: &Polytope,
    w: &Weight,
    p: f64,
    profile: &IsoProfile,
) -> Result<LpIsoCheck, IsoError> {
    assert!(p >= 1.0, "the comparison needs p >= 1, got {p}");
    let n = k.dim as f64;
    let mass = measures::body_mass(w, k);
    let lhs = measures::lp_surface_total(w, k, p);
    let bound = iso_eval(profile, mass)?;
    let rhs = (n * mass).powf(1.0 - p) * bound.powf(p);
    let perimeter = measures::weighted_perimeter(w, k);
    let mixed = measures::mixed_measure(w, k, k);
    let jensen_lhs = lhs.powf(1.0 / p);
    let jensen_rhs = if p == 1.0 { perimeter } else { mixed.powf((1.0 - p) / p) * perimeter };
    let holds = lhs >= rhs - 1e-8 * rhs.abs().max(lhs.abs());
    Ok(LpIsoCheck { mass, lhs, rhs, holds, jensen_lhs, jensen_rhs })
}

/// Largest admissible total datum mass for the two-solution small-mass
/// regime: min of (n t)^(1-p) I(t)^p at t = a and t = total - a.
pub fn lp_iso_threshold(
    profile: &IsoProfile,
    dim: usize,
    total: f64,
    a: f64,
    p: f64,
) -> Result<f64, IsoError> {
    let n = dim as f64;
    let at = |t: f64| -> Result<f64, IsoError> {
        Ok((n * t).powf(1.0 - p) * iso_eval(profile, t)?.powf(p))
    };
    Ok(at(a)?.min(at(total - a)?))
}

/// True when every direction has an antipode carrying the same weight.
pub fn measure_is_even(dirs: &DirectionSet, nu: &[f64]) -> bool {
    assert_eq!(dirs.len(), nu.len());
    let wmax = nu.iter().fold(0.0_f64, |a, w| a.max(w.abs())).max(f64::MIN_POSITIVE);
    (0..dirs.len()).all(|i| {
        (0..dirs.len()).any(|j| {
            norm([
                dirs.dir(i)[0] + dirs.dir(j)[0],
                dirs.dir(i)[1] + dirs.dir(j)[1],
                dirs.dir(i)[2] + dirs.dir(j)[2],
            ]) <= 1e-9
                && (nu[i] - nu[j]).abs() <= 1e-9 * wmax
        })
    })
}

/// Worst case of the subspace mass bound nu(xi) <= (dim xi / n) nu(S).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubspaceCheck {
    pub holds: bool,
    pub strict: bool,
    /// mass / bound at the binding subspace.
    pub worst_ratio: f64,
    pub worst_mass: f64,
    pub worst_bound: f64,
    pub worst_dim: usize,
    /// Spanning direction (dim 1) or unit normal (dim 2) of that subspace.
    pub worst_axis: V3,
}

pub fn check_subspace_concentration(
    dirs: &DirectionSet,
    nu: &[f64],
    strict: bool,
) -> SubspaceCheck {
    assert_eq!(dirs.len(), nu.len());
    let total: f64 = nu.iter().sum();
    let n = dirs.dim();
    let mut worst: Option<(f64, f64, f64, usize, V3)> = None;
    let mut consider = |mass: f64, bound: f64, dim: usize, axis: V3| {
        let ratio = mass / bound;
        if worst.as_ref().is_none_or(|w| ratio > w.0) {
            worst = Some((ratio, mass, bound, dim, axis));
        }
    };

    let m = dirs.len();
    let mut claimed = vec![false; m];
    for i in 0..m {
        if claimed[i] {
            continue;
        }
        let axis = dirs.dir(i);
        let mut mass = 0.0;
        for k in i..m {
            if dot(axis, dirs.dir(k)).abs() >= 1.0 - 1e-10 {
                claimed[k] = true;
                mass += nu[k];
            }
        }
        consider(mass, total / n as f64, 1, axis);
    }

    if n == 3 {
        let mut normals: Vec<V3> = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                let c = cross(dirs.dir(i), dirs.dir(j));
                let len = norm(c);
                if len <= 1e-8 {
                    continue;
                }
                let normal = scale(c, 1.0 / len);
                if normals.iter().any(|q| dot(*q, normal).abs() >= 1.0 - 1e-10) {
                    continue;
                }
                normals.push(normal);
                let mass: f64 = (0..m)
                    .filter(|&k| dot(normal, dirs.dir(k)).abs() <= 1e-8)
                    .map(|k| nu[k])
                    .sum();
                consider(mass, 2.0 * total / 3.0, 2, normal);
            }
        }
    }

    let (worst_ratio, worst_mass, worst_bound, worst_dim, worst_axis) =
        worst.expect("at least one direction");
    let slack_tol = 1e-9 * total;
    let holds = if strict {
        worst_mass < worst_bound - slack_tol
    } else {
        worst_mass <= worst_bound + slack_tol
    };
    SubspaceCheck { holds, strict, worst_ratio, worst_mass, worst_bound, worst_dim, worst_axis }
}

/// Minimum over directions of the normalized p-mean of projected data mass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HemisphereReport {
    pub value: f64,
    pub theta: V3,
    /// Set when the minimum is indistinguishable from zero: all the mass
    /// sits on the closed hemisphere opposite theta.
    pub concentrated: bool,
    /// The p = 1 constant; the p >= 1 cases share it.
    pub c_nu: f64,
    pub even: bool,
}

fn hemisphere_min(dirs: &DirectionSet, nu: &[f64], p: f64, even: bool) -> (f64, V3) {
    let total: f64 = nu.iter().sum();
    let objective = |theta: V3| -> f64 {
        let mut acc = 0.0;
        for (u, w) in dirs.dirs().iter().zip(nu) {
            let t = dot(theta, *u);
            let g = if even { t.abs() } else { t.max(0.0) };
            acc += w * g.powf(p);
        }
        (acc / total).powf(1.0 / p)
    };
    let to_theta = |x: &[f64]| -> V3 {
        if dirs.dim() == 2 {
            [x[0].cos(), x[0].sin(), 0.0]
        } else {
            let (sp, cp) = x[0].sin_cos();
            let (sl, cl) = x[1].sin_cos();
            [sp * cl, sp * sl, cp]
        }
    };
    let grid = lowdisc::sphere_sample(dirs.dim(), 4096);
    let mut scored: Vec<(f64, V3)> = grid.into_iter().map(|u| (objective(u), u)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = scored[0];
    for (_, start) in scored.iter().take(8) {
        let x0: Vec<f64> = if dirs.dim() == 2 {
            vec![start[1].atan2(start[0])]
        } else {
            vec![start[2].clamp(-1.0, 1.0).acos(), start[1].atan2(start[0])]
        };
        let (x, v) = opt::nelder_mead(|x| objective(to_theta(x)), &x0, 0.05, 300, 1e-14);
        if v < best.0 {
            best = (v, to_theta(&x));
        }
    }
    best
}

/// Concentration constant of a spherical datum: zero exactly when the datum
/// mass fits on a closed hemisphere.
pub fn hemisphere_constant(dirs: &DirectionSet, nu: &[f64], p: f64) -> HemisphereReport {
    assert_eq!(dirs.len(), nu.len());
    let even = measure_is_even(dirs, nu);
    let (c_nu, theta1) = hemisphere_min(dirs, nu, 1.0, even);
    let (value, theta) = if p > 0.0 && p != 1.0 {
        hemisphere_min(dirs, nu, p, even)
    } else {
        (c_nu, theta1)
    };
    HemisphereReport { value, theta, concentrated: value <= 1e-8, c_nu, even }
}

/// Direction set plus support numbers of two bodies on their combined
/// normals; the Wulff shape of a support combination over this set contains
/// the true Minkowski combination.
fn union_support(k: &Polytope, l: &Polytope) -> (DirectionSet, Vec<f64>, Vec<f64>) {
    let mut dirs: Vec<V3> = Vec::new();
    for u in k.dirs.iter().chain(l.dirs.iter()) {
        if !dirs.iter().any(|v| norm(sub(*v, *u)) < 1e-8) {
            dirs.push(*u);
        }
    }
    let ds = DirectionSet::new(k.dim, dirs).expect("union of validated directions");
    let hk: Vec<f64> = ds.dirs().iter().map(|u| k.support_eval(*u)).collect();
    let hl: Vec<f64> = ds.dirs().iter().map(|u| l.support_eval(*u)).collect();
    (ds, hk, hl)
}

/// Random origin-symmetric polytope: antipodal direction pairs with
/// log-normal support numbers; degenerate hulls are re-drawn.
pub fn random_symmetric_body(rng: &mut ChaCha8Rng, dim: usize) -> Polytope {
    loop {
        let pairs = rng.gen_range(4..=16);
        let mut dirs: Vec<V3> = Vec::with_capacity(2 * pairs);
        while dirs.len() < 2 * pairs {
            let u = random_unit(rng, dim);
            if dirs.iter().any(|v| dot(*v, u).abs() > 1.0 - 1e-6) {
                continue;
            }
            dirs.push(u);
            dirs.push(scale(u, -1.0));
        }
        let half: Vec<f64> = (0..pairs).map(|_| (0.35 * normal_draw(rng)).exp()).collect();
        let h: Vec<f64> = half.iter().flat_map(|v| [*v, *v]).collect();
        let ds = match DirectionSet::new(dim, dirs) {
            Ok(ds) => ds,
            Err(_) => continue,
        };
        match wulff_shape(&ds, &h) {
            Ok(p) if p.volume() > 1e-6 => return p,
            _ => continue,
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> V3 {
    if dim == 2 {
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        [a.cos(), a.sin(), 0.0]
    } else {
        let z: f64 = rng.gen_range(-1.0..1.0);
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        let r = (1.0 - z * z).sqrt();
        [r * a.cos(), r * a.sin(), z]
    }
}

fn normal_draw(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u1.ln()).sqrt() * u2.cos()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeFailure {
    pub trial: usize,
    pub seed: u64,
    pub lambda: f64,
    pub p: f64,
    pub slack: f64,
}

/// Outcome of the random-pair concavity probe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub trials: usize,
    /// Worst slack of mass^(1/n) concavity over support-sum combinations.
    pub min_slack: f64,
    /// Worst slack over p-mean support combinations, p in {1.5, 2}.
    pub min_slack_lp: f64,
    pub failures: Vec<ProbeFailure>,
    pub tolerance: f64,
}

/// Samples symmetric body pairs and tests n-th root concavity of the mass
/// under support combinations. The combination is formed on the union of the
/// two normal fans, so its Wulff shape contains the true combination: a
/// deficit beyond tolerance is a genuine violation.
pub fn concavity_probe(w: &Weight, trials: usize, seed: u64) -> ConcavityReport {
    assert!(
        !w.mn_membership().fails(),
        "weight density is not log-convex in the log-radius"
    );
    let n = w.dim as f64;
    let tolerance = 1e-8;
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut min_slack = f64::INFINITY;
    let mut min_slack_lp = f64::INFINITY;
    let mut failures = Vec::new();
    for trial in 0..trials {
        let trial_seed: u64 = seeds.gen();
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let k = random_symmetric_body(&mut rng, w.dim);
        let l = random_symmetric_body(&mut rng, w.dim);
        let lambda = rng.gen_range(0.05..0.95);
        let (ds, hk, hl) = union_support(&k, &l);
        let mk = measures::body_mass(w, &k).powf(1.0 / n);
        let ml = measures::body_mass(w, &l).powf(1.0 / n);
        let rhs = (1.0 - lambda) * mk + lambda * ml;
        for p in [1.0, 1.5, 2.0] {
            let hm = crate::sphere::lp_combine(&hk, &hl, lambda, p);
            let m = wulff_shape(&ds, &hm).expect("combination of bounded bodies");
            let slack = measures::body_mass(w, &m).powf(1.0 / n) - rhs;
            if p == 1.0 {
                min_slack = min_slack.min(slack);
            } else {
                min_slack_lp = min_slack_lp.min(slack);
            }
            if slack < -tolerance {
                failures.push(ProbeFailure { trial, seed: trial_seed, lambda, p, slack });
            }
        }
    }
    ConcavityReport { trials, min_slack, min_slack_lp, failures, tolerance }
}

/// F shapes with closed-form derivative used in the concavity-gap bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConcavityKind {
    Power { s: f64 },
    /// Normal quantile of the mass; masses must lie in (0, 1).
    GaussQuantile,
}

impl ConcavityKind {
    fn f(&self, t: f64) -> f64 {
        match self {
            ConcavityKind::Power { s } => t.powf(*s),
            ConcavityKind::GaussQuantile => special::normal_quantile(t),
        }
    }

    fn f_deriv(&self, t: f64) -> f64 {
        match self {
            ConcavityKind::Power { s } => s * t.powf(s - 1.0),
            ConcavityKind::GaussQuantile => {
                1.0 / special::normal_pdf(special::normal_quantile(t))
            }
        }
    }
}

/// Two-sided gap comparison for bodies with matching p-surface data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniquenessGap {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Sup relative mismatch of the two p-surface measures; the comparison
    /// is vacuous when they differ.
    pub surface_mismatch: f64,
    pub vacuous: bool,
    pub mass_k: f64,
    pub mass_l: f64,
    /// Slack of the F-concavity combination at the midpoint, reported when
    /// the masses agree; zero only for pairs attaining equality.
    pub equality_slack: Option<f64>,
    pub equality: Option<bool>,
}

/// Evaluates (F(mu L) - F(mu K))/F'(mu K) against the same quotient at L.
/// With equal masses additionally tests equality in the concavity
/// combination at the p-mean midpoint.
pub fn uniqueness_gap(
    k: &Polytope,
    l: &Polytope,
    w: &Weight,
    p: f64,
    kind: ConcavityKind,
) -> UniquenessGap {
    let sk = measures::lp_surface_measure(w, k, p);
    let sl = measures::lp_surface_measure(w, l, p);
    let surface_mismatch = if k.dirs.len() == l.dirs.len()
        && k.dirs
            .iter()
            .zip(l.dirs.iter())
            .all(|(a, b)| norm(sub(*a, *b)) <= 1e-12)
    {
        let scale = sk.iter().chain(sl.iter()).fold(0.0_f64, |a, v| a.max(v.abs()));
        sk.iter()
            .zip(&sl)
            .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()))
            / scale.max(f64::MIN_POSITIVE)
    } else {
        f64::INFINITY
    };
    let vacuous = !(surface_mismatch <= 5e-3);
    let mass_k = measures::body_mass(w, k);
    let mass_l = measures::body_mass(w, l);
    let df = kind.f(mass_l) - kind.f(mass_k);
    let lhs = df / kind.f_deriv(mass_k);
    let rhs = df / kind.f_deriv(mass_l);
    let holds = lhs <= rhs + 1e-10 * (1.0 + lhs.abs().max(rhs.abs()));
    let (equality_slack, equality) = if (mass_k - mass_l).abs() <= 1e-6 * mass_k.abs().max(mass_l.abs()) {
        let (ds, hk, hl) = union_support(k, l);
        let hm = crate::sphere::lp_combine(&hk, &hl, 0.5, p.max(1.0));
        let m = wulff_shape(&ds, &hm).expect("combination of bounded bodies");
        let slack =
            kind.f(measures::body_mass(w, &m)) - 0.5 * (kind.f(mass_k) + kind.f(mass_l));
        (Some(slack), Some(slack.abs() <= 1e-8 * (1.0 + kind.f(mass_k).abs())))
    } else {
        (None, None)
    };
    UniquenessGap {
        lhs,
        rhs,
        holds,
        surface_mismatch,
        vacuous,
        mass_k,
        mass_l,
        equality_slack,
        equality,
    }
}
