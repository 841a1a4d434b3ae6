//! Small dense linear algebra and Monte Carlo error propagation.

use agglab_core::optimize::Objective;

/// Cholesky factor (lower, row-major) of a symmetric positive definite matrix.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// `A^{-1}` for symmetric positive definite `A`.
pub fn spd_inverse(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let l = cholesky(a, n)?;
    let mut inv = vec![0.0; n * n];
    for c in 0..n {
        // forward then back substitution on e_c
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[k * n + i] * inv[k * n + c];
            }
            inv[i * n + c] = s / l[i * n + i];
        }
    }
    Some(inv)
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

/// `H^{-1} S H^{-1}`: covariance of an M-estimator with Hessian `H` and
/// score covariance `S` (already divided by the sample size).
pub fn sandwich(h: &[f64], s: &[f64], n: usize) -> Option<Vec<f64>> {
    let hi = spd_inverse(h, n)?;
    Some(matmul(&matmul(&hi, s, n), &hi, n))
}

/// Delta-method standard error of `g(x)` under covariance `cov`, with a
/// central-difference gradient.
pub fn delta_se(cov: &[f64], x: &[f64], g: impl Fn(&[f64]) -> f64) -> f64 {
    let n = x.len();
    let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
    let h = 1e-6 * scale;
    let mut grad = vec![0.0; n];
    let mut y = x.to_vec();
    for i in 0..n {
        y[i] = x[i] + h;
        let up = g(&y);
        y[i] = x[i] - h;
        let dn = g(&y);
        y[i] = x[i];
        grad[i] = (up - dn) / (2.0 * h);
    }
    let mut v = 0.0;
    for i in 0..n {
        for j in 0..n {
            v += grad[i] * cov[i * n + j] * grad[j];
        }
    }
    v.max(0.0).sqrt()
}

/// Result of [`newton`].
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonMin {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iters: usize,
}

/// Damped Newton method for small smooth convex problems. The direction
/// solves `H p = -g` (plain `-g` when `H` is not positive definite); steps
/// backtrack on the Armijo condition. Stops at `tol` on the gradient norm,
/// after `max_iters`, or when no step decreases the value.
pub fn newton(obj: &dyn Objective, hess: impl Fn(&[f64]) -> Vec<f64>, x0: &[f64], tol: f64, max_iters: usize) -> NewtonMin {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = obj.value_grad(&x, &mut g);
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut iters = 0;
    while iters < max_iters && norm(&g) > tol {
        iters += 1;
        let dir: Vec<f64> = match spd_inverse(&hess(&x), n) {
            Some(hi) => (0..n).map(|i| -(0..n).map(|j| hi[i * n + j] * g[j]).sum::<f64>()).collect(),
            None => g.iter().map(|v| -v).collect(),
        };
        let slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
        let mut t = 1.0;
        let mut g_new = vec![0.0; n];
        let mut moved = false;
        for _ in 0..60 {
            let cand: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            let f_new = obj.value_grad(&cand, &mut g_new);
            if f_new <= f + 1e-4 * t * slope || (f_new <= f && norm(&g_new) < norm(&g)) {
                // at the rounding floor: no strict descent and no gradient progress
                if f_new >= f && norm(&g_new) >= 0.5 * norm(&g) {
                    break;
                }
                x = cand;
                f = f_new;
                std::mem::swap(&mut g, &mut g_new);
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    NewtonMin { grad_norm: norm(&g), x, value: f, iters }
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Cosine of the angle between two vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_spd() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let inv = spd_inverse(&a, 3).unwrap();
        let id = matmul(&a, &inv, 3);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[i * 3 + j] - e).abs() < 1e-12);
            }
        }
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }

    #[test]
    fn delta_method_linear() {
        // g(x) = 2 x0 - x1 with cov diag(1, 4): var = 4 + 4
        let se = delta_se(&[1.0, 0.0, 0.0, 4.0], &[0.3, 0.7], |x| 2.0 * x[0] - x[1]);
        assert!((se - 8f64.sqrt()).abs() < 1e-6);
        let (m, s) = mean_se(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    struct Quartic;

    impl Objective for Quartic {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, x: &[f64]) -> f64 {
            let mut g = [0.0; 2];
            self.value_grad(x, &mut g)
        }
        fn value_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
            // (x0 - 1)^4 + 1e-4 (x1 + 2)^2 + x0^2
            g[0] = 4.0 * (x[0] - 1.0).powi(3) + 2.0 * x[0];
            g[1] = 2e-4 * (x[1] + 2.0);
            (x[0] - 1.0).powi(4) + 1e-4 * (x[1] + 2.0).powi(2) + x[0] * x[0]
        }
    }

    #[test]
    fn newton_handles_bad_conditioning() {
        let hess = |x: &[f64]| vec![12.0 * (x[0] - 1.0).powi(2) + 2.0, 0.0, 0.0, 2e-4];
        let r = newton(&Quartic, hess, &[5.0, 10.0], 1e-13, 100);
        assert!(r.grad_norm <= 1e-13, "{r:?}");
        assert!((r.x[1] + 2.0).abs() < 1e-8);
        // 4(x-1)^3 + 2x = 0 has the single real root near 0.4102
        assert!((4.0 * (r.x[0] - 1.0).powi(3) + 2.0 * r.x[0]).abs() < 1e-12);
        assert!(r.iters < 30);
    }
}
