//! Adaptive quadrature: Gauss-Kronrod 7-15 on intervals, a tensor
//! Gauss-Kronrod rule on planar triangles. Both subdivide until the local
//! error estimate fits within the tolerance share of the region.

/// Kronrod-15 abscissae (positive half; last entry is the center).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_2,
    0.949_107_912_342_758_524_5,
    0.864_864_423_359_769_072_8,
    0.741_531_185_599_394_439_9,
    0.586_087_235_467_691_130_3,
    0.405_845_151_377_397_166_9,
    0.207_784_955_007_898_467_6,
    0.0,
];

/// Kronrod-15 weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_96,
    0.063_092_092_629_978_553_29,
    0.104_790_010_322_250_183_8,
    0.140_653_259_715_525_918_7,
    0.169_004_726_639_267_902_8,
    0.190_350_578_064_785_409_9,
    0.204_432_940_075_298_892_4,
    0.209_482_141_084_727_828_0,
];

/// Gauss-7 weights for the odd-indexed entries of `XGK` plus the center.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_3,
    0.279_705_391_489_276_667_9,
    0.381_830_050_505_118_944_9,
    0.417_959_183_673_469_387_8,
];

/// One Gauss-Kronrod 7-15 pass over [a, b]; returns (integral, error estimate).
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = half * XGK[j];
        let sum = f(c - x) + f(c + x);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive integral of `f` over [a, b] to absolute tolerance `tol`.
///
/// Bisects the worst interval until the summed error estimate is below `tol`
/// or the interval count hits a hard cap; the cap keeps runaway integrands
/// from hanging callers, at the cost of a slightly degraded estimate.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (v, e) = gk15(&mut f, a, b);
    // (error, a, b, value); worst-first via linear scan, fine at these sizes
    let mut segs: Vec<(f64, f64, f64, f64)> = vec![(e, a, b, v)];
    let mut total_err = e;
    let max_segs = 4096;
    // noise floor: don't chase error estimates below the rounding level of
    // the running total (integrands computed by inner quadratures are only
    // smooth down to their own tolerance)
    let floor = |segs: &[(f64, f64, f64, f64)]| {
        1e-14 * segs.iter().map(|s| s.3.abs()).sum::<f64>()
    };
    while total_err > tol.max(floor(&segs)) && segs.len() < max_segs {
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .0.total_cmp(&y.1 .0))
            .expect("non-empty");
        let (err, lo, hi, _) = segs.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval at floating point resolution; keep as-is
            segs.push((0.0, lo, hi, segs_value(&mut f, lo, hi)));
            total_err -= err;
            continue;
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        total_err += e1 + e2 - err;
        segs.push((e1, lo, mid, v1));
        segs.push((e2, mid, hi, v2));
    }
    segs.iter().map(|s| s.3).sum()
}

fn segs_value<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> f64 {
    gk15(f, lo, hi).0
}

/// Single non-adaptive 15-point Gauss-Kronrod pass over [a, b]. Used where
/// the caller controls panel sizes and needs evaluation noise at rounding
/// level rather than at an adaptive tolerance.
pub fn gk15_value<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    gk15(&mut f, a, b).0
}

/// Tensor Gauss-Kronrod rule on a triangle via the collapsed map
/// P(u, v) = (1-u) A + u ((1-v) B + v C), for which
/// int_T f = 2 area int_0^1 int_0^1 f(P) u du dv. The embedded Gauss-7
/// tensor sum (its nodes are a subset of Kronrod-15's) gives the error
/// estimate. 225 evaluations per call, but accurate to degree ~13 per axis,
/// so tight tolerances need little subdivision.
fn tri_rules(f: &mut impl FnMut(f64, f64, f64) -> f64, v: &[[f64; 3]; 3]) -> (f64, f64, f64) {
    let area = tri_area(v);
    // nodes mapped to [0, 1] with halved weights; WGM is zero off Gauss nodes
    let mut u = [0.0_f64; 15];
    let mut wk = [0.0_f64; 15];
    let mut wg = [0.0_f64; 15];
    for j in 0..7 {
        u[j] = 0.5 * (1.0 - XGK[j]);
        u[14 - j] = 0.5 * (1.0 + XGK[j]);
        wk[j] = 0.5 * WGK[j];
        wk[14 - j] = 0.5 * WGK[j];
        if j % 2 == 1 {
            wg[j] = 0.5 * WG[j / 2];
            wg[14 - j] = 0.5 * WG[j / 2];
        }
    }
    u[7] = 0.5;
    wk[7] = 0.5 * WGK[7];
    wg[7] = 0.5 * WG[3];
    let (a, b, c) = (v[0], v[1], v[2]);
    let mut sum_k = 0.0;
    let mut sum_g = 0.0;
    for i in 0..15 {
        let ui = u[i];
        let mut row_k = 0.0;
        let mut row_g = 0.0;
        for j in 0..15 {
            let vj = u[j];
            let bx = (1.0 - vj) * b[0] + vj * c[0];
            let by = (1.0 - vj) * b[1] + vj * c[1];
            let bz = (1.0 - vj) * b[2] + vj * c[2];
            let fv = f(
                (1.0 - ui) * a[0] + ui * bx,
                (1.0 - ui) * a[1] + ui * by,
                (1.0 - ui) * a[2] + ui * bz,
            );
            row_k += wk[j] * fv;
            row_g += wg[j] * fv;
        }
        sum_k += wk[i] * ui * row_k;
        sum_g += wg[i] * ui * row_g;
    }
    let val = 2.0 * area * sum_k;
    let err = 2.0 * area * (sum_k - sum_g).abs();
    (val, err, area)
}

fn tri_area(v: &[[f64; 3]; 3]) -> f64 {
    let e1 = [v[1][0] - v[0][0], v[1][1] - v[0][1], v[1][2] - v[0][2]];
    let e2 = [v[2][0] - v[0][0], v[2][1] - v[0][1], v[2][2] - v[0][2]];
    let cx = e1[1] * e2[2] - e1[2] * e2[1];
    let cy = e1[2] * e2[0] - e1[0] * e2[2];
    let cz = e1[0] * e2[1] - e1[1] * e2[0];
    0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
}

/// Adaptive integral of a scalar field over a planar triangle in R^3 to
/// absolute tolerance `tol`, by midpoint subdivision into four children.
pub fn integrate_triangle<F: FnMut(f64, f64, f64) -> f64>(
    mut f: F,
    tri: [[f64; 3]; 3],
    tol: f64,
) -> f64 {
    let (v, e, _) = tri_rules(&mut f, &tri);
    let mut stack = vec![(tri, v, e, 0u32)];
    let mut total = 0.0;
    let mut budget_err = 0.0;
    // hard cap on refinement work so noisy integrands cannot stall callers
    let mut splits_left: u32 = 4_096;
    while let Some((t, val, err, depth)) = stack.pop() {
        let local_tol = tol * tri_area(&t) / tri_area(&tri).max(f64::MIN_POSITIVE);
        let noise = 5e-14 * val.abs();
        if err <= local_tol.max(noise) || depth >= 12 || splits_left == 0 {
            total += val;
            budget_err += err;
            continue;
        }
        splits_left -= 1;
        let m01 = mid(&t[0], &t[1]);
        let m12 = mid(&t[1], &t[2]);
        let m02 = mid(&t[0], &t[2]);
        for child in [
            [t[0], m01, m02],
            [m01, t[1], m12],
            [m02, m12, t[2]],
            [m01, m12, m02],
        ] {
            let (cv, ce, _) = tri_rules(&mut f, &child);
            stack.push((child, cv, ce, depth + 1));
        }
    }
    let _ = budget_err;
    total
}

fn mid(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        0.5 * (a[0] + b[0]),
        0.5 * (a[1] + b[1]),
        0.5 * (a[2] + b[2]),
    ]
}
