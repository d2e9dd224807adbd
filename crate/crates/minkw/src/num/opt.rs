//! Small dense optimizers: L-BFGS with backtracking, Nelder-Mead, and a
//! damped Newton driver with finite-difference Jacobians.

use nalgebra::{DMatrix, DVector};

pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when the gradient sup norm falls below this.
    pub grad_tol: f64,
    /// Cap on the sup norm of a single step; 0 disables the cap.
    pub max_step_inf: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            max_iter: 500,
            grad_tol: 1e-9,
            max_step_inf: 0.5,
        }
    }
}

pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_inf: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimize `fg` (returns value, writes gradient) starting from `x0`.
pub fn lbfgs<F>(x0: Vec<f64>, mut fg: F, opts: &LbfgsOptions) -> LbfgsOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = fg(&x, &mut g);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho: Vec<f64> = Vec::new();
    let mut iterations = 0;

    for iter in 0..opts.max_iter {
        iterations = iter;
        if inf_norm(&g) <= opts.grad_tol {
            return LbfgsOutcome {
                x,
                value: f,
                grad_inf: inf_norm(&g),
                iterations,
                converged: true,
            };
        }
        // two-loop recursion
        let mut q = g.clone();
        let m = s_hist.len();
        let mut alpha = vec![0.0; m];
        for i in (0..m).rev() {
            alpha[i] = rho[i] * dot(&s_hist[i], &q);
            for k in 0..n {
                q[k] -= alpha[i] * y_hist[i][k];
            }
        }
        let gamma = if m > 0 {
            let sy = dot(&s_hist[m - 1], &y_hist[m - 1]);
            let yy = dot(&y_hist[m - 1], &y_hist[m - 1]);
            (sy / yy).max(1e-12)
        } else {
            1.0
        };
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for i in 0..m {
            let beta = rho[i] * dot(&y_hist[i], &q);
            for k in 0..n {
                q[k] += (alpha[i] - beta) * s_hist[i][k];
            }
        }
        // q approximates H * g; descend along -q
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        if dot(&dir, &g) >= 0.0 {
            // not a descent direction; fall back to steepest descent
            dir = g.iter().map(|v| -v).collect();
            s_hist.clear();
            y_hist.clear();
            rho.clear();
        }
        let mut t = 1.0;
        if opts.max_step_inf > 0.0 {
            let d_inf = inf_norm(&dir);
            if d_inf * t > opts.max_step_inf {
                t = opts.max_step_inf / d_inf;
            }
        }
        let slope = dot(&dir, &g);
        let mut accepted = false;
        let mut x_new = vec![0.0; n];
        let mut g_new = vec![0.0; n];
        let mut f_new = f;
        for _ in 0..50 {
            for k in 0..n {
                x_new[k] = x[k] + t * dir[k];
            }
            f_new = fg(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= f + 1e-4 * t * slope {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return LbfgsOutcome {
                x,
                value: f,
                grad_inf: inf_norm(&g),
                iterations,
                converged: inf_norm(&g) <= opts.grad_tol,
            };
        }
        let s: Vec<f64> = (0..n).map(|k| x_new[k] - x[k]).collect();
        let y: Vec<f64> = (0..n).map(|k| g_new[k] - g[k]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * inf_norm(&s) * inf_norm(&y).max(1e-300) {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho.remove(0);
            }
            rho.push(1.0 / sy);
            s_hist.push(s);
            y_hist.push(y);
        }
        x = x_new.clone();
        g = g_new.clone();
        f = f_new;
    }
    LbfgsOutcome {
        x,
        value: f,
        grad_inf: inf_norm(&g),
        iterations,
        converged: inf_norm(&g) <= opts.grad_tol,
    }
}

/// Nelder-Mead on a few variables; returns the best point and value.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    scale: f64,
    max_iter: usize,
    tol: f64,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += scale;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];
        if (values[worst] - values[best]).abs() <= tol * (1.0 + values[best].abs()) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for &i in order.iter().take(n) {
            for k in 0..n {
                centroid[k] += simplex[i][k] / n as f64;
            }
        }
        let blend = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
            (0..n).map(|k| a[k] + t * (b[k] - a[k])).collect()
        };
        let reflected = blend(&centroid, &simplex[worst], -1.0);
        let fr = f(&reflected);
        if fr < values[best] {
            let expanded = blend(&centroid, &simplex[worst], -2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
        } else if fr < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = fr;
        } else {
            let contracted = blend(&centroid, &simplex[worst], 0.5);
            let fc = f(&contracted);
            if fc < values[worst] {
                simplex[worst] = contracted;
                values[worst] = fc;
            } else {
                let best_point = simplex[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    simplex[i] = blend(&best_point, &simplex[i], 0.5);
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=n {
        if values[i] < values[best] {
            best = i;
        }
    }
    (simplex[best].clone(), values[best])
}

pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub residual_inf: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Damped Newton iteration on a square residual map with a forward-difference
/// Jacobian. Steps are halved until the sup-norm residual decreases; a
/// Tikhonov-regularized least squares step covers singular Jacobians.
pub fn newton_fd<F>(
    x0: Vec<f64>,
    mut residual: F,
    tol_inf: f64,
    max_iter: usize,
    step_cap: f64,
) -> NewtonOutcome
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let mut x = x0;
    let mut r = residual(&x);
    let mut iterations = 0;
    for iter in 0..max_iter {
        iterations = iter;
        let r_inf = inf_norm(&r);
        if r_inf <= tol_inf {
            return NewtonOutcome {
                x,
                residual_inf: r_inf,
                iterations,
                converged: true,
            };
        }
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let h = crate::num::fd_step(x[j]) * 10.0;
            let mut xp = x.clone();
            xp[j] += h;
            let rp = residual(&xp);
            for i in 0..n {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
        let rhs = DVector::from_iterator(n, r.iter().map(|v| -v));
        let step = jac.clone().lu().solve(&rhs).or_else(|| {
            let jt = jac.transpose();
            let reg = &jt * &jac + DMatrix::identity(n, n) * 1e-12;
            reg.lu().solve(&(&jt * &rhs))
        });
        let Some(mut dx) = step else {
            break;
        };
        if step_cap > 0.0 {
            let d_inf = dx.amax();
            if d_inf > step_cap {
                dx *= step_cap / d_inf;
            }
        }
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let x_new: Vec<f64> = (0..n).map(|k| x[k] + t * dx[k]).collect();
            let r_new = residual(&x_new);
            let rn_inf = inf_norm(&r_new);
            if rn_inf.is_finite() && rn_inf < r_inf * (1.0 - 1e-4 * t) {
                x = x_new;
                r = r_new;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let r_inf = inf_norm(&r);
    NewtonOutcome {
        x,
        residual_inf: r_inf,
        iterations,
        converged: r_inf <= tol_inf,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lbfgs_quadratic_bowl() {
        let out = lbfgs(
            vec![3.0, -2.0, 7.0],
            |x, g| {
                let mut f = 0.0;
                for (i, xi) in x.iter().enumerate() {
                    let c = (i + 1) as f64;
                    f += 0.5 * c * xi * xi;
                    g[i] = c * xi;
                }
                f
            },
            &LbfgsOptions {
                max_step_inf: 0.0,
                ..Default::default()
            },
        );
        assert!(out.converged);
        assert!(out.x.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn lbfgs_rosenbrock() {
        let out = lbfgs(
            vec![-1.2, 1.0],
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -400.0 * a * (b - a * a) - 2.0 * (1.0 - a);
                g[1] = 200.0 * (b - a * a);
                100.0 * (b - a * a).powi(2) + (1.0 - a).powi(2)
            },
            &LbfgsOptions {
                max_iter: 2000,
                grad_tol: 1e-8,
                max_step_inf: 0.0,
                ..Default::default()
            },
        );
        assert!(out.converged, "grad_inf = {}", out.grad_inf);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn nelder_mead_two_vars() {
        let (x, _) = nelder_mead(
            |p| (p[0] - 0.3).powi(2) + 2.0 * (p[1] + 0.7).powi(2),
            &[0.0, 0.0],
            0.5,
            500,
            1e-14,
        );
        assert!((x[0] - 0.3).abs() < 1e-5 && (x[1] + 0.7).abs() < 1e-5);
    }

    #[test]
    fn newton_solves_coupled_system() {
        let out = newton_fd(
            vec![1.0, 1.0],
            |x| vec![x[0] * x[0] + x[1] - 3.0, x[0] - x[1] * x[1] + 1.0],
            1e-12,
            50,
            0.0,
        );
        assert!(out.converged);
        let (a, b) = (out.x[0], out.x[1]);
        assert!((a * a + b - 3.0).abs() < 1e-10 && (a - b * b + 1.0).abs() < 1e-10);
    }
}
