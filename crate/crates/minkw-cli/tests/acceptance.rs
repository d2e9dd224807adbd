//! Acceptance battery. Each test prints one line `criterion NN <name>: pass|FAIL`
//! with the observed worst numbers, then asserts. Tolerances are pinned here
//! on purpose; loosening them is a contract change.

use std::f64::consts::{PI, TAU};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use minkw::ineq::{self, IsoProfile};
use minkw::measures::{
    body_mass, facet_weighted_areas, lp_mixed_measure, mass_variation_analytic, mixed_measure,
    MassVariation,
};
use minkw::solvers::{
    solve_entropy, solve_free, solve_ma_circle_from, solve_pinned, solve_problem,
    solve_small_mass_dual, Mode, ProblemSpec, SolveError, SolveReport, SolveStatus, SolverOptions,
};
use minkw::sphere::{hausdorff_distance, wulff_shape, DirectionSet, Polytope};
use minkw::weights::Weight;

fn report_line(num: u32, name: &str, ok: bool, detail: &str, secs: f64) {
    println!(
        "criterion {num:02} {name}: {} ({detail}, {secs:.2} s)",
        if ok { "pass" } else { "FAIL" }
    );
}

fn isotropic_spec(
    weight: Weight,
    n: usize,
    c: f64,
    p: f64,
    mode: Mode,
) -> ProblemSpec {
    let dirs = match weight.dim {
        2 => DirectionSet::uniform_circle(n),
        _ => DirectionSet::fibonacci_symmetric(n),
    };
    let nu: Vec<f64> = dirs.quad_weights().iter().map(|w| c * w).collect();
    ProblemSpec {
        weight,
        dirs,
        nu,
        p,
        even: true,
        mode,
        options: SolverOptions::default(),
    }
}

/// Hausdorff distance from a polytope to the centered ball of radius r.
fn hausdorff_to_centered_ball(poly: &Polytope, r: f64) -> f64 {
    let out = poly
        .vertices
        .iter()
        .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
        .fold(0.0_f64, f64::max)
        - r;
    let inn = r - poly
        .facets
        .iter()
        .map(|f| f.offset)
        .fold(f64::INFINITY, f64::min);
    out.max(inn).max(0.0)
}

// ---------------------------------------------------------------------------

/// Threshold of the constant-solution family for the normal weight: the
/// scalar maximization matches the closed form, and the maximizer sits at
/// sqrt(n - p).
#[test]
fn criterion_01_gaussian_threshold() {
    let t0 = Instant::now();
    let mut worst_val = 0.0_f64;
    let mut worst_arg = 0.0_f64;
    for n in [2usize, 3] {
        let w = Weight::gaussian(n);
        let nf = n as f64;
        for p in [-1.0, 0.0, 0.5, 1.0, nf - 0.5] {
            let ia = w.isotropic_analysis(p).unwrap();
            let expect =
                (TAU).powf(-nf / 2.0) * (nf - p).powf((nf - p) / 2.0) * (-(nf - p) / 2.0).exp();
            let expect_at = (nf - p).sqrt();
            let got = ia.threshold.expect("p < n has a finite threshold");
            let got_at = ia.threshold_at.expect("maximizer");
            worst_val = worst_val.max((got - expect).abs() / expect);
            worst_arg = worst_arg.max((got_at - expect_at).abs() / expect_at);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = worst_val <= 1e-8 && worst_arg <= 1e-8 && secs < 1.0;
    report_line(
        1,
        "gaussian threshold closed form",
        ok,
        &format!("rel err value {worst_val:.2e} argmax {worst_arg:.2e}"),
        secs,
    );
    assert!(ok);
}

/// Root counts of t^(n-p) psi(t) = c over 20 parameter triples follow the
/// two/one/none classification, and every root solves the equation.
#[test]
fn criterion_02_isotropic_trichotomy() {
    let t0 = Instant::now();
    let thr = |n: usize, p: f64| {
        Weight::gaussian(n)
            .isotropic_analysis(p)
            .unwrap()
            .threshold
            .unwrap()
    };
    // (n, p, c, expected root count)
    let mut cases: Vec<(usize, f64, f64, usize)> = Vec::new();
    for (n, p, frac) in [
        (2, -1.0, 0.3),
        (2, 0.0, 0.5),
        (2, 0.5, 0.9),
        (2, 1.0, 0.99),
        (3, 0.5, 0.8),
        (3, 1.0, 0.5),
        (3, 2.0, 0.7),
        (3, 2.5, 0.5),
    ] {
        cases.push((n, p, frac * thr(n, p), 2));
    }
    for (n, p, c) in [
        (2, 2.5, 0.01),
        (2, 3.0, 1.0),
        (2, 4.0, 17.3),
        (3, 3.5, 0.2),
        (3, 4.0, 2.0),
        (3, 5.0, 0.7),
    ] {
        cases.push((n, p, c, 1));
    }
    for (n, p, frac) in [
        (2, -1.0, 1.5),
        (2, 0.5, 1.01),
        (2, 1.0, 2.0),
        (3, 1.0, 1.1),
        (3, 2.0, 3.0),
        (3, 2.5, 1.7),
    ] {
        cases.push((n, p, frac * thr(n, p), 0));
    }
    assert_eq!(cases.len(), 20);
    let mut worst_res = 0.0_f64;
    let mut miscounts = 0usize;
    for &(n, p, c, expect) in &cases {
        let w = Weight::gaussian(n);
        let roots = w.constant_solutions(p, c).unwrap();
        if roots.len() != expect {
            miscounts += 1;
            eprintln!("(n={n}, p={p}, c={c:.6e}): {} roots, expected {expect}", roots.len());
        }
        for &t in &roots {
            let g = t.powf(n as f64 - p) * w.density(t);
            worst_res = worst_res.max((g - c).abs() / c);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = miscounts == 0 && worst_res <= 1e-10 && secs < 1.0;
    report_line(
        2,
        "isotropic trichotomy",
        ok,
        &format!("{miscounts} miscounts, worst root residual {worst_res:.2e}"),
        secs,
    );
    assert!(ok);
}

/// Unweighted facet-length data of a random polygon reproduce the polygon
/// (up to translation) with unit multiplier.
#[test]
fn criterion_03_classical_round_trip() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_haus = 0.0_f64;
    let mut worst_lambda = 0.0_f64;
    for inst in 0..10 {
        let m = 8 + (inst * 3) % 25; // 8..32 facets
        let mut angles: Vec<f64> = (0..m)
            .map(|k| TAU * (k as f64 + 0.8 * rng.gen::<f64>()) / m as f64)
            .collect();
        angles.sort_by(f64::total_cmp);
        // strictly convex support profile (h + h'' > 0): every facet stays
        // active no matter how the angles fall, and skipping the first
        // harmonics keeps the Steiner point at the origin
        let scale = 0.7 + 0.9 * rng.gen::<f64>();
        let harmonics: Vec<(f64, f64, f64)> = (2..=5)
            .map(|k| {
                let kk = k as f64;
                let amp = 0.2 * rng.gen::<f64>() / (kk * kk - 1.0);
                (kk, amp, TAU * rng.gen::<f64>())
            })
            .collect();
        let h: Vec<f64> = angles
            .iter()
            .map(|&t| {
                let mut v = 1.0;
                for &(kk, amp, ph) in &harmonics {
                    v += amp * (kk * t + ph).cos();
                }
                scale * v
            })
            .collect();
        let dirs = DirectionSet::from_angles(&angles).unwrap();
        let poly = wulff_shape(&dirs, &h).unwrap();
        assert!(poly.active.iter().all(|&a| a), "instance {inst}: inactive facet");
        let w = Weight::lebesgue(2);
        let nu = facet_weighted_areas(&w, &poly); // facet lengths
        let a = poly.volume();
        let spec = ProblemSpec {
            weight: w,
            dirs: dirs.clone(),
            nu,
            p: 1.0,
            even: false,
            mode: Mode::Pinned { a },
            options: SolverOptions::default(),
        };
        let rep = solve_pinned(&spec).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged, "instance {inst}");
        worst_lambda = worst_lambda.max((rep.lambda - 1.0).abs());
        // translation component is free at p = 1; remove the least-squares
        // optimal shift before comparing shapes
        let mut a00 = 0.0;
        let mut a01 = 0.0;
        let mut a11 = 0.0;
        let mut b0 = 0.0;
        let mut b1 = 0.0;
        for i in 0..dirs.len() {
            let u = dirs.dir(i);
            let d = rep.h[i] - poly.support[i];
            a00 += u[0] * u[0];
            a01 += u[0] * u[1];
            a11 += u[1] * u[1];
            b0 += d * u[0];
            b1 += d * u[1];
        }
        let det = a00 * a11 - a01 * a01;
        let tx = (b0 * a11 - b1 * a01) / det;
        let ty = (a00 * b1 - a01 * b0) / det;
        let shifted: Vec<f64> = (0..dirs.len())
            .map(|i| {
                let u = dirs.dir(i);
                poly.support[i] + tx * u[0] + ty * u[1]
            })
            .collect();
        let target = wulff_shape(&dirs, &shifted).unwrap();
        worst_haus = worst_haus.max(hausdorff_distance(&rep.body, &target, 512));
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = worst_haus <= 1e-6 && worst_lambda <= 1e-8 && secs < 10.0;
    report_line(
        3,
        "polygon length-data round trip",
        ok,
        &format!("worst hausdorff {worst_haus:.2e}, |lambda - 1| {worst_lambda:.2e}"),
        secs,
    );
    assert!(ok);
}

/// A rotation-invariant datum under the normal weight with half the total
/// mass pinned returns the disc of radius sqrt(2 ln 2), for several p and in
/// entropy mode.
#[test]
fn criterion_04_ball_recovery() {
    let t0 = Instant::now();
    let n = 256;
    let r_expect = (2.0 * (2.0_f64).ln()).sqrt();
    let tol = 1.0 - (PI / n as f64).cos() + 1e-6;
    let mut worst = 0.0_f64;
    let mut runs: Vec<(String, SolveReport)> = Vec::new();
    for p in [1.0, -1.0, 0.5, 2.0] {
        let spec = isotropic_spec(
            Weight::gaussian(2),
            n,
            1.0 / TAU,
            p,
            Mode::Pinned { a: 0.5 },
        );
        runs.push((format!("pinned p={p}"), solve_pinned(&spec).unwrap()));
    }
    let spec = isotropic_spec(Weight::gaussian(2), n, 1.0 / TAU, 0.0, Mode::Entropy { a: 0.5 });
    runs.push(("entropy".into(), solve_entropy(&spec).unwrap()));
    let mut all_converged = true;
    for (label, rep) in &runs {
        all_converged &= rep.status == SolveStatus::Converged;
        let d = hausdorff_to_centered_ball(&rep.body, r_expect);
        worst = worst.max(d);
        assert!(
            d <= tol,
            "{label}: hausdorff to the disc {d:.3e} > {tol:.3e}"
        );
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = all_converged && worst <= tol && secs < 30.0;
    report_line(
        4,
        "disc recovery at half mass",
        ok,
        &format!("worst hausdorff {worst:.2e} vs allowance {tol:.2e}"),
        secs,
    );
    assert!(ok);
}

/// Stationarity bookkeeping on a battery of converged solves: row residual,
/// mass pin, and agreement of the two multiplier estimates.
#[test]
fn criterion_05_kkt_fidelity() {
    let t0 = Instant::now();
    let mut reports: Vec<(String, f64, Option<f64>, SolveReport)> = Vec::new();

    for p in [-1.0, 1.0, 2.0] {
        let spec = isotropic_spec(Weight::gaussian(2), 64, 0.08, p, Mode::Pinned { a: 0.4 });
        let nu_tot: f64 = spec.nu.iter().sum();
        reports.push((
            format!("gaussian pinned p={p}"),
            nu_tot,
            Some(0.4),
            solve_pinned(&spec).unwrap(),
        ));
    }
    {
        let spec = isotropic_spec(Weight::gaussian(2), 48, 0.08, 0.0, Mode::Entropy { a: 0.35 });
        let nu_tot: f64 = spec.nu.iter().sum();
        reports.push((
            "gaussian entropy".into(),
            nu_tot,
            Some(0.35),
            solve_entropy(&spec).unwrap(),
        ));
    }
    {
        let w = Weight::cauchy(2, 2.0, 1.0).unwrap();
        let spec = isotropic_spec(w, 48, 0.1, 0.5, Mode::Pinned { a: 0.8 });
        let nu_tot: f64 = spec.nu.iter().sum();
        reports.push((
            "cauchy pinned p=0.5".into(),
            nu_tot,
            Some(0.8),
            solve_pinned(&spec).unwrap(),
        ));
    }
    {
        // datum of the unit disc for p > n over the flat weight
        let spec = isotropic_spec(Weight::lebesgue(2), 32, 1.0, 3.0, Mode::Free);
        let nu_tot: f64 = spec.nu.iter().sum();
        reports.push(("lebesgue free p=3".into(), nu_tot, None, solve_free(&spec).unwrap()));
    }
    {
        let spec = isotropic_spec(
            Weight::gaussian(2),
            64,
            0.05,
            1.0,
            Mode::SmallMassDual { pivot: None },
        );
        let nu_tot: f64 = spec.nu.iter().sum();
        let (big, small) = solve_small_mass_dual(&spec).unwrap();
        reports.push(("dual large branch".into(), nu_tot, None, big));
        reports.push(("dual small branch".into(), nu_tot, None, small));
    }

    let mut worst_res = 0.0_f64;
    let mut worst_mass = 0.0_f64;
    let mut worst_lambda = 0.0_f64;
    for (label, nu_tot, pin, rep) in &reports {
        assert_eq!(rep.status, SolveStatus::Converged, "{label}");
        worst_res = worst_res.max(rep.residual_inf / nu_tot);
        if let Some(a) = pin {
            worst_mass = worst_mass.max((rep.mass - a).abs());
        }
        worst_lambda = worst_lambda.max((rep.lambda - rep.lambda_fit).abs() / rep.lambda.abs());
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = worst_res <= 1e-6 && worst_mass <= 1e-8 && worst_lambda <= 1e-8;
    report_line(
        5,
        "stationarity bookkeeping",
        ok,
        &format!(
            "residual/nu {worst_res:.2e}, mass defect {worst_mass:.2e}, \
             multiplier gap {worst_lambda:.2e}"
        ),
        secs,
    );
    assert!(ok);
}

/// First-variation formulas for the weighted mass match Richardson-improved
/// central differences in all three perturbation parametrizations.
#[test]
fn criterion_06_variation_formulas() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let weights = [
        Weight::gaussian(2),
        Weight::gaussian(3),
        Weight::cauchy(2, 2.0, 1.0).unwrap(),
        Weight::cauchy(3, 2.5, 1.0).unwrap(),
        Weight::lebesgue(2),
        Weight::lebesgue(3),
    ];
    let ps = [-1.0, 0.5, 1.0, 2.0, 3.0];
    let mut worst = 0.0_f64;
    for trial in 0..50 {
        let w = &weights[trial % weights.len()];
        let p = ps[trial % ps.len()];
        let body = ineq::random_symmetric_body(&mut rng, w.dim);
        // rebuild on the active cone so the datum is the body's own
        let mut dirs_act = Vec::new();
        let mut h_act = Vec::new();
        for (i, &act) in body.active.iter().enumerate() {
            if act {
                dirs_act.push(body.dirs[i]);
                h_act.push(body.support[i]);
            }
        }
        let dirs = DirectionSet::new(w.dim, dirs_act).unwrap();
        let poly = wulff_shape(&dirs, &h_act).unwrap();
        if !poly.active.iter().all(|&a| a) {
            continue;
        }
        let m = h_act.len();
        let eta: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let richardson = |mass_at: &dyn Fn(f64) -> f64| {
            let s = 1e-3;
            let d = |s: f64| (mass_at(s) - mass_at(-s)) / (2.0 * s);
            (4.0 * d(s / 2.0) - d(s)) / 3.0
        };

        // linear: h + t f
        let f_lin: Vec<f64> = (0..m).map(|i| 0.05 * eta[i] * h_act[i]).collect();
        let got = mass_variation_analytic(w, &poly, &f_lin, &MassVariation::Linear);
        let fd = richardson(&|t: f64| {
            let h: Vec<f64> = (0..m).map(|i| h_act[i] + t * f_lin[i]).collect();
            body_mass(w, &wulff_shape(&dirs, &h).unwrap())
        });
        worst = worst.max((got - fd).abs() / fd.abs().max(1e-12));

        // power family: (h^p + t f)^(1/p)
        let f_pow: Vec<f64> = (0..m).map(|i| 0.05 * eta[i] * h_act[i].powf(p)).collect();
        let got = mass_variation_analytic(w, &poly, &f_pow, &MassVariation::LpPower(p));
        let fd = richardson(&|t: f64| {
            let h: Vec<f64> = (0..m)
                .map(|i| (h_act[i].powf(p) + t * f_pow[i]).powf(1.0 / p))
                .collect();
            body_mass(w, &wulff_shape(&dirs, &h).unwrap())
        });
        worst = worst.max((got - fd).abs() / fd.abs().max(1e-12));

        // logarithmic: h e^(t f)
        let f_log: Vec<f64> = (0..m).map(|i| 0.05 * eta[i]).collect();
        let got = mass_variation_analytic(w, &poly, &f_log, &MassVariation::Log);
        let fd = richardson(&|t: f64| {
            let h: Vec<f64> = (0..m).map(|i| h_act[i] * (t * f_log[i]).exp()).collect();
            body_mass(w, &wulff_shape(&dirs, &h).unwrap())
        });
        worst = worst.max((got - fd).abs() / fd.abs().max(1e-12));
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = worst <= 1e-5 && secs < 60.0;
    report_line(
        6,
        "first-variation formulas vs finite differences",
        ok,
        &format!("worst rel deviation {worst:.2e}"),
        secs,
    );
    assert!(ok);
}

/// Mixed-measure identities: the p-form collapses onto the plain form on
/// equal bodies, and the mass bound n mu(K) >= mu(K;K) holds with equality
/// under the flat weight.
#[test]
fn criterion_07_mixed_measure_identities() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst_ratio = 0.0_f64;
    let mut worst_gap = f64::INFINITY;
    let mut worst_flat = 0.0_f64;
    for trial in 0..100 {
        let dim = if trial % 2 == 0 { 2 } else { 3 };
        let body = ineq::random_symmetric_body(&mut rng, dim);
        let w = match trial % 3 {
            0 => Weight::gaussian(dim),
            1 => Weight::cauchy(dim, dim as f64, 1.0).unwrap(),
            _ => Weight::gaussian(dim),
        };
        for p in [-1.0, 0.5, 2.0] {
            let lhs = lp_mixed_measure(&w, &body, &body, p);
            let rhs = mixed_measure(&w, &body, &body) / p;
            worst_ratio = worst_ratio.max((lhs - rhs).abs() / rhs.abs());
        }
        let mu = body_mass(&w, &body);
        let mixed = mixed_measure(&w, &body, &body);
        worst_gap = worst_gap.min(dim as f64 * mu - mixed + 1e-10 * mixed);
        let flat = Weight::lebesgue(dim);
        let mu_flat = body_mass(&flat, &body);
        let mixed_flat = mixed_measure(&flat, &body, &body);
        worst_flat = worst_flat.max((dim as f64 * mu_flat - mixed_flat).abs() / mixed_flat);
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = worst_ratio <= 1e-10 && worst_gap >= 0.0 && worst_flat <= 1e-8 && secs < 30.0;
    report_line(
        7,
        "mixed measure identities",
        ok,
        &format!(
            "p-form gap {worst_ratio:.2e}, monotone slack {worst_gap:.2e}, \
             flat equality {worst_flat:.2e}"
        ),
        secs,
    );
    assert!(ok);
}

/// The p-surface isoperimetric comparison holds on random symmetric bodies
/// under the normal weight, including the internal power-mean step.
#[test]
fn criterion_08_lp_isoperimetric_bound() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut failures = 0usize;
    let mut worst_jensen = f64::INFINITY;
    for trial in 0..100 {
        let dim = if trial % 2 == 0 { 2 } else { 3 };
        let w = Weight::gaussian(dim);
        let body = ineq::random_symmetric_body(&mut rng, dim);
        let profile = IsoProfile::Gaussian;
        for p in [1.0, 2.0, 5.0] {
            let check = ineq::lp_iso_bound(&body, &w, p, &profile).unwrap();
            if !check.holds {
                failures += 1;
                eprintln!(
                    "trial {trial} p={p}: total measure {:.6e} below bound {:.6e}",
                    check.lhs, check.rhs
                );
            }
            let scale = check.jensen_rhs.abs().max(check.jensen_lhs.abs());
            worst_jensen = worst_jensen.min((check.jensen_lhs - check.jensen_rhs) / scale);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = failures == 0 && worst_jensen >= -1e-10 && secs < 30.0;
    report_line(
        8,
        "p-surface isoperimetric bound",
        ok,
        &format!("{failures} violations, jensen slack {worst_jensen:.2e}"),
        secs,
    );
    assert!(ok);
}

/// Small constant data admit two solutions on opposite sides of the duality
/// pivot; a 5% cosine modulation keeps two distinct converged bodies.
#[test]
fn criterion_09_small_mass_duality() {
    let t0 = Instant::now();
    let n = 64;
    let c = 0.05;
    let spec = isotropic_spec(
        Weight::gaussian(2),
        n,
        c,
        1.0,
        Mode::SmallMassDual { pivot: None },
    );
    let pivot = spec.weight.total_mass() / 2.0;
    let (big, small) = solve_small_mass_dual(&spec).unwrap();
    assert_eq!(big.status, SolveStatus::Converged);
    assert_eq!(small.status, SolveStatus::Converged);
    let straddle = small.mass < pivot && pivot < big.mass;

    let cell = TAU / n as f64;
    let nu: Vec<f64> = (0..n)
        .map(|k| {
            let th = cell * k as f64;
            c * (1.0 + 0.05 * (2.0 * th).cos()) * cell
        })
        .collect();
    let nu_tot: f64 = nu.iter().sum();
    let spec2 = ProblemSpec {
        weight: Weight::gaussian(2),
        dirs: DirectionSet::uniform_circle(n),
        nu,
        p: 1.0,
        even: true,
        mode: Mode::SmallMassDual { pivot: None },
        options: SolverOptions::default(),
    };
    let (big2, small2) = solve_small_mass_dual(&spec2).unwrap();
    let both_converged =
        big2.status == SolveStatus::Converged && small2.status == SolveStatus::Converged;
    let sup_dist = big2
        .h
        .iter()
        .zip(&small2.h)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    let distinct = sup_dist > 1e-2;
    let res_ok = big2.residual_inf <= 1e-6 * nu_tot && small2.residual_inf <= 1e-6 * nu_tot;
    let secs = t0.elapsed().as_secs_f64();
    let ok = straddle && both_converged && distinct && res_ok && secs < 60.0;
    report_line(
        9,
        "small-mass two-solution regime",
        ok,
        &format!(
            "masses {:.3e} | {pivot:.3e} | {:.3e}, perturbed sup gap {sup_dist:.3e}",
            small.mass, big.mass
        ),
        secs,
    );
    assert!(ok);
}

/// Periodic curvature equation: constant data reproduce both constant
/// solutions branch by branch, the p = 3 problem is start-independent, and a
/// smooth perturbed datum resolves to 1e-10 on a fine grid.
#[test]
fn criterion_10_curvature_grid() {
    let t0 = Instant::now();
    let w = Weight::gaussian(2);

    // (a) constant data, both branches, via the ball initializations
    let n = 64;
    let c = 0.05;
    let roots = w.constant_solutions(1.0, c).unwrap();
    assert_eq!(roots.len(), 2);
    let mut worst_const = 0.0_f64;
    for &r in &roots {
        let spec = isotropic_spec(
            Weight::gaussian(2),
            n,
            c,
            1.0,
            Mode::MaCircle { f: vec![c; n] },
        );
        let rep = solve_ma_circle_from(&spec, Some(&vec![r; n])).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        let dev = rep
            .h
            .iter()
            .map(|v| (v - r).abs())
            .fold(0.0_f64, f64::max);
        worst_const = worst_const.max(dev);
    }

    // (b) p = 3: ten starts collapse onto one solution
    let c3 = 0.1;
    let spec3 = isotropic_spec(
        Weight::gaussian(2),
        n,
        c3,
        3.0,
        Mode::MaCircle { f: vec![c3; n] },
    );
    let r3 = w.constant_solutions(3.0, c3).unwrap()[0];
    let mut sols: Vec<Vec<f64>> = Vec::new();
    for k in 0..10 {
        let init: Vec<f64> = (0..n)
            .map(|i| {
                let th = TAU * i as f64 / n as f64;
                r3 * (0.2 * (th + 0.37 * k as f64).sin() + 0.1 * (2.0 * th + 0.11 * k as f64).cos())
                    .exp()
            })
            .collect();
        let rep = solve_ma_circle_from(&spec3, Some(&init)).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged, "start {k}");
        sols.push(rep.h);
    }
    let mut worst_pair = 0.0_f64;
    for i in 0..sols.len() {
        for j in (i + 1)..sols.len() {
            let d = sols[i]
                .iter()
                .zip(&sols[j])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            worst_pair = worst_pair.max(d);
        }
    }

    // (c) perturbed datum on a fine grid
    let n_fine = 512;
    let cell = TAU / n_fine as f64;
    let f: Vec<f64> = (0..n_fine)
        .map(|k| c3 * (1.0 + 0.1 * (2.0 * cell * k as f64).cos()))
        .collect();
    let spec_fine = isotropic_spec(
        Weight::gaussian(2),
        n_fine,
        c3,
        3.0,
        Mode::MaCircle { f },
    );
    let rep = minkw::solvers::solve_ma_circle(&spec_fine).unwrap();
    let fine_ok = rep.status == SolveStatus::Converged && rep.residual_inf <= 1e-10;

    let secs = t0.elapsed().as_secs_f64();
    let ok = worst_const <= 1e-8 && worst_pair <= 1e-8 && fine_ok && secs < 60.0;
    report_line(
        10,
        "periodic curvature equation",
        ok,
        &format!(
            "branch deviation {worst_const:.2e}, start spread {worst_pair:.2e}, \
             fine residual {:.2e}",
            rep.residual_inf
        ),
        secs,
    );
    assert!(ok);
}

/// Hypothesis gates: concentration refusals name the violating object, the
/// flat-weight expansion mode enforces p > n, and the binary maps outcomes
/// to the documented exit codes.
#[test]
fn criterion_11_precondition_gates() {
    let t0 = Instant::now();

    // entropy refusal names the concentration axis
    let dirs = DirectionSet::new(
        2,
        vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0]],
    )
    .unwrap();
    let spec = ProblemSpec {
        weight: Weight::lebesgue(2),
        dirs: dirs.clone(),
        nu: vec![3.0, 3.0, 1.0, 1.0],
        p: 0.0,
        even: true,
        mode: Mode::Entropy { a: 4.0 },
        options: SolverOptions::default(),
    };
    let axis_named = match solve_entropy(&spec) {
        Err(SolveError::Refused { hypothesis, detail }) => {
            hypothesis.contains("subspace") && detail.contains("[1.0, 0.0, 0.0]")
        }
        other => panic!("expected a refusal, got {other:?}"),
    };
    let sub = ineq::check_subspace_concentration(&dirs, &[3.0, 3.0, 1.0, 1.0], true);
    let axis_exact = sub.worst_axis[0].abs() > 1.0 - 1e-12 && sub.worst_dim == 1;

    // a hemisphere-confined datum is refused in every mode
    let hemi_dirs = DirectionSet::from_angles(
        &(0..8).map(|k| 0.3 + 2.5 * k as f64 / 8.0).collect::<Vec<_>>(),
    )
    .unwrap();
    let hemi_nu = vec![1.0; 8];
    let mut hemi_refusals = 0;
    for mode in [
        Mode::Pinned { a: 0.6 },
        Mode::Entropy { a: 0.6 },
        Mode::Free,
        Mode::SmallMassDual { pivot: None },
        Mode::Isotropic { c: 0.05 },
    ] {
        let spec = ProblemSpec {
            weight: Weight::gaussian(2),
            dirs: hemi_dirs.clone(),
            nu: hemi_nu.clone(),
            p: if matches!(mode, Mode::Free) { 3.0 } else { 1.0 },
            even: false,
            mode,
            options: SolverOptions::default(),
        };
        match solve_problem(&spec) {
            Err(SolveError::Refused { hypothesis, .. }) if hypothesis.contains("hemisphere") => {
                hemi_refusals += 1
            }
            other => panic!("expected hemisphere refusal, got {other:?}"),
        }
    }

    // flat weight, expansion mode: p > n accepted, p <= n refused
    let free_ok = {
        let spec = isotropic_spec(Weight::lebesgue(2), 32, 1.0, 3.0, Mode::Free);
        matches!(solve_free(&spec), Ok(rep) if rep.status == SolveStatus::Converged)
    };
    let free_refused = {
        let spec = isotropic_spec(Weight::lebesgue(2), 32, 1.0, 1.5, Mode::Free);
        matches!(solve_free(&spec), Err(SolveError::Refused { .. }))
    };

    // exit codes through the binary
    let bin = env!("CARGO_BIN_EXE_minkw");
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let good = write(
        "good.json",
        r#"{"schema_version":1,"dimension":2,"weight":{"kind":"gaussian"},"p":1.0,
           "nu":{"isotropic":{"c":0.05,"count":16}},"mode":{"kind":"pinned","a":0.5}}"#,
    );
    let refused = write(
        "refused.json",
        r#"{"schema_version":1,"dimension":2,"weight":{"kind":"lebesgue"},"p":0.0,
           "nu":{"rows":[[1.0,0.0,3.0],[-1.0,0.0,3.0],[0.0,1.0,1.0],[0.0,-1.0,1.0]]},
           "mode":{"kind":"entropy","a":4.0}}"#,
    );
    let stuck = write(
        "stuck.json",
        r#"{"schema_version":1,"dimension":2,"weight":{"kind":"gaussian"},"p":1.0,
           "nu":{"rows":[[1.0,0.0,0.31],[-1.0,0.0,0.3],[0.0,1.0,0.3],[0.0,-1.0,0.29],
                         [0.7071067811865476,0.7071067811865476,0.3]]},
           "mode":{"kind":"pinned","a":0.5},"solver":{"max_outer":1}}"#,
    );
    let malformed = write("malformed.json", r#"{"schema_version": 99}"#);
    let code = |path: &std::path::Path| {
        Command::new(bin)
            .arg("solve")
            .arg(path)
            .arg("--out")
            .arg(dir.path())
            .output()
            .unwrap()
            .status
            .code()
            .unwrap()
    };
    let codes = (code(&good), code(&refused), code(&stuck), code(&malformed));
    let codes_ok = codes == (0, 2, 3, 4);

    let secs = t0.elapsed().as_secs_f64();
    let ok = axis_named && axis_exact && hemi_refusals == 5 && free_ok && free_refused && codes_ok;
    report_line(
        11,
        "hypothesis gates and exit codes",
        ok,
        &format!("exit codes {codes:?}"),
        secs,
    );
    assert!(ok);
}

/// The same problem file and seed produce byte-identical reports.
#[test]
fn criterion_12_deterministic_reports() {
    let t0 = Instant::now();
    let bin = env!("CARGO_BIN_EXE_minkw");
    let dir = tempfile::tempdir().unwrap();
    let n = 48;
    let cell = TAU / n as f64;
    let f: Vec<String> = (0..n)
        .map(|k| format!("{:.17e}", 0.1 * (1.0 + 0.1 * (2.0 * cell * k as f64).cos())))
        .collect();
    let ma = format!(
        r#"{{"schema_version":1,"dimension":2,"weight":{{"kind":"gaussian"}},"p":3.0,
            "nu":{{"isotropic":{{"c":0.1,"count":{n}}}}},
            "mode":{{"kind":"ma_circle","f":[{}]}},
            "solver":{{"threads":2}},"seed":5}}"#,
        f.join(",")
    );
    let ma_path = dir.path().join("ma.json");
    std::fs::write(&ma_path, ma).unwrap();
    let pinned = r#"{"schema_version":1,"dimension":2,"weight":{"kind":"gaussian"},"p":1.0,
        "nu":{"isotropic":{"c":0.05,"count":32}},"mode":{"kind":"small_mass_dual"},"seed":5}"#;
    let pin_path = dir.path().join("dual.json");
    std::fs::write(&pin_path, pinned).unwrap();

    let mut identical = true;
    for (sub, path, stem) in [("ma2d", &ma_path, "ma"), ("solve", &pin_path, "dual")] {
        let mut bytes: Vec<Vec<u8>> = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("run{run}"));
            std::fs::create_dir_all(&out).unwrap();
            let st = Command::new(bin)
                .arg(sub)
                .arg(path)
                .arg("--out")
                .arg(&out)
                .output()
                .unwrap();
            assert!(st.status.success(), "{sub} run {run} failed: {st:?}");
            bytes.push(std::fs::read(out.join(format!("{stem}.report.json"))).unwrap());
        }
        identical &= bytes[0] == bytes[1];
    }
    let secs = t0.elapsed().as_secs_f64();
    report_line(
        12,
        "bitwise deterministic reports",
        identical,
        "two runs compared as raw bytes",
        secs,
    );
    assert!(identical);
}
