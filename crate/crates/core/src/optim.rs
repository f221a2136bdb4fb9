//! Local minimisation and bracketing root finding.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_evaluations: usize,
    /// Stop once the spread of objective values across the simplex is below
    /// `f_tolerance · (1 + |f_best|)`.
    pub f_tolerance: f64,
    /// ... and the simplex diameter is below this.
    pub x_tolerance: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 20_000,
            f_tolerance: 1e-10,
            x_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder–Mead simplex minimisation with adaptive coefficients
/// (Gao & Han), which behave better than the classical ones beyond a few
/// dimensions. Non-finite objective values are treated as +∞.
pub fn nelder_mead<F>(f: F, start: &[f64], steps: &[f64], options: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    assert_eq!(n, steps.len());
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();
    let mut evaluations = n + 1;
    let mut converged = false;

    while evaluations < options.max_evaluations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = (values[n] - values[0]).abs();
        let diameter = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if values[0].is_finite() && spread <= options.f_tolerance * (1.0 + values[0].abs()) && diameter <= options.x_tolerance {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / nf;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let reflected = along(alpha);
        let f_r = eval(&reflected);
        evaluations += 1;
        if f_r < values[0] {
            let expanded = along(alpha * gamma);
            let f_e = eval(&expanded);
            evaluations += 1;
            if f_e < f_r {
                simplex[n] = expanded;
                values[n] = f_e;
            } else {
                simplex[n] = reflected;
                values[n] = f_r;
            }
            continue;
        }
        if f_r < values[n - 1] {
            simplex[n] = reflected;
            values[n] = f_r;
            continue;
        }
        let (contracted, f_c) = if f_r < values[n] {
            let c = along(alpha * rho);
            let fc = eval(&c);
            (c, fc)
        } else {
            let c = along(-rho);
            let fc = eval(&c);
            (c, fc)
        };
        evaluations += 1;
        if f_c < values[n].min(f_r) {
            simplex[n] = contracted;
            values[n] = f_c;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + sigma * (x - b))
                .collect();
            values[i] = eval(&shrunk);
            simplex[i] = shrunk;
        }
        evaluations += n;
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        evaluations,
        converged,
    }
}

/// Golden-section search for a minimum on `[a, b]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Brent's bracketing root finder. Requires `f(a)` and `f(b)` of opposite
/// sign; stops when `|f| <= f_tol` or the bracket is narrower than `x_tol`.
pub fn brent_root<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    x_tol: f64,
    f_tol: f64,
    max_iter: usize,
) -> Option<Root> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(Root { x: a, residual: 0.0, iterations: 0 });
    }
    if fb == 0.0 {
        return Some(Root { x: b, residual: 0.0, iterations: 0 });
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for iter in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * x_tol;
        let m = 0.5 * (c - b);
        if fb.abs() <= f_tol || m.abs() <= tol {
            return Some(Root { x: b, residual: fb, iterations: iter });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Some(Root { x: b, residual: fb, iterations: max_iter })
}

/// Central finite-difference gradient with per-coordinate relative steps.
pub fn numerical_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-5 * x[i].abs().max(1e-2);
            work[i] = x[i] + h;
            let up = f(&work);
            work[i] = x[i] - h;
            let down = f(&work);
            work[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian with steps 1e-4·max(|x_i|, 1).
pub fn numerical_hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1.0)).collect();
    let f0 = f(x);
    let mut work = x.to_vec();
    let at = |work: &mut Vec<f64>, moves: &[(usize, f64)]| {
        for &(i, d) in moves {
            work[i] += d;
        }
        let v = f(work);
        for &(i, d) in moves {
            work[i] -= d;
        }
        v
    };
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let up = at(&mut work, &[(i, h[i])]);
        let down = at(&mut work, &[(i, -h[i])]);
        hess[(i, i)] = (up - 2.0 * f0 + down) / (h[i] * h[i]);
        for j in 0..i {
            let pp = at(&mut work, &[(i, h[i]), (j, h[j])]);
            let pm = at(&mut work, &[(i, h[i]), (j, -h[j])]);
            let mp = at(&mut work, &[(i, -h[i]), (j, h[j])]);
            let mm = at(&mut work, &[(i, -h[i]), (j, -h[j])]);
            let v = (pp - pm - mp + mm) / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Converged once half the Newton decrement gᵀH⁻¹g is below this.
    pub decrement_tolerance: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            decrement_tolerance: 1e-10,
        }
    }
}

/// Damped Newton refinement with finite-difference derivatives. The Hessian
/// is shifted by a multiple of the identity until positive definite, and each
/// step is halved until the objective decreases. Convergence requires a
/// positive definite unshifted Hessian and a small decrement.
pub fn newton_polish<F: Fn(&[f64]) -> f64>(f: F, start: &[f64], options: &NewtonOptions) -> Minimum {
    let n = start.len();
    let mut x = start.to_vec();
    let mut fx = f(&x);
    let mut evaluations = 1;
    let mut converged = false;
    if !fx.is_finite() {
        return Minimum { x, value: fx, evaluations, converged };
    }
    for _ in 0..options.max_iterations {
        let g = DVector::from_vec(numerical_gradient(&f, &x));
        let hess = numerical_hessian(&f, &x);
        evaluations += 2 * n + 2 * n * n + 1;
        if g.iter().chain(hess.iter()).any(|v| !v.is_finite()) {
            break;
        }
        let scale = hess.diagonal().amax().max(1e-8);
        let mut shift = 0.0;
        let chol = loop {
            let shifted = &hess + DMatrix::identity(n, n) * shift;
            if let Some(c) = shifted.cholesky() {
                break Some(c);
            }
            shift = if shift == 0.0 { 1e-8 * scale } else { shift * 10.0 };
            if shift > 1e8 * scale {
                break None;
            }
        };
        let Some(chol) = chol else { break };
        let step = -chol.solve(&g);
        let decrement = -0.5 * g.dot(&step);
        if shift == 0.0 && decrement <= options.decrement_tolerance {
            // The last full step is still worth taking when it helps.
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + s).collect();
            let ft = f(&trial);
            evaluations += 1;
            if ft < fx {
                x = trial;
                fx = ft;
            }
            converged = true;
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            let ft = f(&trial);
            evaluations += 1;
            if ft.is_finite() && ft < fx {
                x = trial;
                fx = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No descent along the Newton direction: at the optimum to
            // working precision if the Hessian is positive definite.
            converged = shift == 0.0 && decrement <= 1e3 * options.decrement_tolerance;
            break;
        }
    }
    Minimum { x, value: fx, evaluations, converged }
}
