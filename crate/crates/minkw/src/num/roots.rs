//! Scalar root location: sign-change scans over monotone-agnostic grids plus
//! bisection refinement.

/// Bisect `f` on a bracket [lo, hi] with f(lo), f(hi) of opposite sign.
///
/// Stops when the bracket width falls below `rel_tol` relative to its
/// endpoints. Returns the midpoint of the final bracket.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    let mut flo = f(lo);
    let fhi = f(hi);
    debug_assert!(flo * fhi <= 0.0, "bisect needs a sign change");
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= rel_tol * hi.abs().max(lo.abs()) || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All roots of `f` found by sign changes over a geometric grid on
/// [lo, hi] with `points` samples, refined by bisection.
///
/// Grid samples that hit zero exactly are returned as-is. Roots closer than
/// the grid resolution are not separated; callers choose `points` to match
/// the expected root structure.
pub fn bracket_roots<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    points: usize,
    rel_tol: f64,
) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && points >= 2);
    let ratio = (hi / lo).powf(1.0 / (points as f64 - 1.0));
    let mut roots = Vec::new();
    let mut t_prev = lo;
    let mut f_prev = f(lo);
    if f_prev == 0.0 {
        roots.push(lo);
    }
    for k in 1..points {
        let t = if k + 1 == points { hi } else { lo * ratio.powi(k as i32) };
        let ft = f(t);
        if ft == 0.0 {
            roots.push(t);
        } else if f_prev != 0.0 && (ft > 0.0) != (f_prev > 0.0) {
            roots.push(bisect(&mut f, t_prev, t, rel_tol));
        }
        t_prev = t;
        f_prev = ft;
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_both_roots_of_bump() {
        // t e^{-t^2/2} = 0.3 has two roots straddling t = 1
        let f = |t: f64| t * (-t * t / 2.0).exp() - 0.3;
        let roots = bracket_roots(f, 1e-6, 1e3, 512, 1e-12);
        assert_eq!(roots.len(), 2);
        assert!(roots[0] < 1.0 && roots[1] > 1.0);
        for r in roots {
            assert!((r * (-r * r / 2.0).exp() - 0.3).abs() < 1e-10);
        }
    }

    #[test]
    fn bisect_matches_closed_form() {
        let r = bisect(|t| t * t - 2.0, 0.0, 2.0, 1e-14);
        assert!((r - 2.0_f64.sqrt()).abs() < 1e-12);
    }
}
