//! Binary two-atom-plus-Gaussian construction: the population logistic
//! minimizer is nearly orthogonal to `θ* = e1`, and majority-vote labels
//! pull it back toward `θ*`.

use agglab_core::math;
use agglab_core::optimize::Objective;
use agglab_core::scenarios::{binary_mv_prob, BinaryOrtho};

use crate::config::E3Config;
use crate::error::{LabError, Result};
use crate::par;
use crate::report::{Check, Cmp, RunReport, Table};
use crate::stats;

/// Population logistic risk over the two atoms (exact) and a fixed set of
/// Gaussian draws (Monte Carlo), with soft labels `P(Y = +1 | x)`.
pub struct MixtureRisk {
    pub d: usize,
    pub atoms: [(Vec<f64>, f64); 2],
    pub atom_weight: f64,
    /// Row-major `n x d` Gaussian draws.
    pub gauss: Vec<f64>,
    pub gauss_eta: Vec<f64>,
    pub gauss_weight: f64,
}

/// `(softplus(-z), softplus(z), sigmoid(z))` from one exponential.
fn logistic_parts(z: f64) -> (f64, f64, f64) {
    let e = (-z.abs()).exp();
    let l = e.ln_1p();
    let s = if z >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    if z >= 0.0 {
        (l, z + l, s)
    } else {
        (-z + l, l, s)
    }
}

impl MixtureRisk {
    pub fn new(model: &BinaryOrtho, seed: u64, draws: usize, m: usize) -> Self {
        let d = model.d;
        let [e1, e2] = model.atom_etas();
        let gauss: Vec<f64> = par::map_range(draws, |i| model.gaussian_point(seed, i as u64)).into_iter().flatten().collect();
        let gauss_eta = par::map_range(draws, |i| binary_mv_prob(model.eta(&gauss[i * d..(i + 1) * d]), m));
        MixtureRisk {
            d,
            atoms: [(model.x1(), binary_mv_prob(e1, m)), (model.x2(), binary_mv_prob(e2, m))],
            atom_weight: model.atom_weight(),
            gauss,
            gauss_eta,
            gauss_weight: if draws > 0 { model.delta / draws as f64 } else { 0.0 },
        }
    }

    fn draws(&self) -> usize {
        self.gauss_eta.len()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.gauss[i * self.d..(i + 1) * self.d]
    }

    /// Value and gradient of the atom part.
    fn atom_terms(&self, theta: &[f64], g: &mut [f64]) -> f64 {
        let mut v = 0.0;
        for (x, eta) in &self.atoms {
            let z = math::dot(theta, x);
            let (lp, ln, s) = logistic_parts(z);
            v += self.atom_weight * (eta * lp + (1.0 - eta) * ln);
            for (gi, xi) in g.iter_mut().zip(x) {
                *gi += self.atom_weight * (s - eta) * xi;
            }
        }
        v
    }

    /// Hessian of the risk and covariance of the Gaussian-part gradient
    /// estimate, both at `theta`.
    pub fn hessian_and_score_cov(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.d;
        let mut h = vec![0.0; d * d];
        for (x, _) in &self.atoms {
            let (_, _, s) = logistic_parts(math::dot(theta, x));
            for i in 0..d {
                for j in 0..d {
                    h[i * d + j] += self.atom_weight * s * (1.0 - s) * x[i] * x[j];
                }
            }
        }
        let n = self.draws();
        if n == 0 {
            return (h, vec![0.0; d * d]);
        }
        // [Σ σ'(z) x xᵀ | Σ r x | Σ r² x xᵀ] with r = σ(z) - η
        let width = 2 * d * d + d;
        let sums = par::chunked_sum(n, width, |range, acc| {
            for i in range {
                let x = self.point(i);
                let (_, _, s) = logistic_parts(math::dot(theta, x));
                let r = s - self.gauss_eta[i];
                let c = s * (1.0 - s);
                for a in 0..d {
                    acc[d * d + a] += r * x[a];
                    for b in 0..d {
                        acc[a * d + b] += c * x[a] * x[b];
                        acc[d * d + d + a * d + b] += r * r * x[a] * x[b];
                    }
                }
            }
        });
        let nf = n as f64;
        let mut cov = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                h[a * d + b] += self.gauss_weight * sums[a * d + b];
                let mean_a = sums[d * d + a] / nf;
                let mean_b = sums[d * d + b] / nf;
                let second = sums[d * d + d + a * d + b] / nf;
                // Var of the mean term δ · (1/n) Σ r x, per coordinate pair.
                let per = (second - mean_a * mean_b) * nf / (nf - 1.0).max(1.0);
                cov[a * d + b] = (self.gauss_weight * nf).powi(2) * per / nf;
            }
        }
        (h, cov)
    }
}

impl Objective for MixtureRisk {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let mut g = vec![0.0; self.d];
        self.value_grad(theta, &mut g)
    }

    fn value_grad(&self, theta: &[f64], g: &mut [f64]) -> f64 {
        let d = self.d;
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut v = self.atom_terms(theta, g);
        if self.draws() > 0 && self.gauss_weight > 0.0 {
            let sums = par::chunked_sum(self.draws(), d + 1, |range, acc| {
                for i in range {
                    let x = self.point(i);
                    let eta = self.gauss_eta[i];
                    let (lp, ln, s) = logistic_parts(math::dot(theta, x));
                    acc[d] += eta * lp + (1.0 - eta) * ln;
                    for (a, xa) in acc[..d].iter_mut().zip(x) {
                        *a += (s - eta) * xa;
                    }
                }
            });
            v += self.gauss_weight * sums[d];
            for (gi, s) in g.iter_mut().zip(&sums[..d]) {
                *gi += self.gauss_weight * s;
            }
        }
        v
    }
}

struct Fit {
    theta: Vec<f64>,
    cos: f64,
    se: f64,
    grad_norm: f64,
    iters: usize,
    value: f64,
}

fn fit(model: &BinaryOrtho, cfg: &E3Config, seed: u64, m: usize) -> Result<Fit> {
    let obj = MixtureRisk::new(model, seed, cfg.gaussian_draws, m);
    let min = stats::newton(&obj, |t| obj.hessian_and_score_cov(t).0, &vec![0.0; model.d], cfg.grad_tol, cfg.max_iters);
    let star = model.theta_star();
    let cos = stats::cosine(&min.x, &star);
    let (h, s) = obj.hessian_and_score_cov(&min.x);
    let cov = stats::sandwich(&h, &s, model.d).ok_or_else(|| LabError::Budget("singular Hessian at the E3 minimizer".into()))?;
    let se = stats::delta_se(&cov, &min.x, |t| stats::cosine(t, &star));
    Ok(Fit { theta: min.x, cos, se, grad_norm: min.grad_norm, iters: min.iters, value: min.value })
}

pub fn run(cfg: &E3Config, seed: u64, report: &mut RunReport) -> Result<()> {
    let mut construction = Table::new("construction", &["eps_angle", "alpha", "beta", "x1_0", "x2_0", "x2_1", "eta_x1", "eta_x2", "delta_x1", "delta_x2"]);
    let mut fits = Table::new("fits", &["eps_angle", "m", "cos", "se", "norm", "grad_norm", "iters", "value", "theta"]);
    let k = cfg.se_mult;
    let mut max_grad: f64 = 0.0;
    for &eps in &cfg.eps_angles {
        let beta = BinaryOrtho::beta_for_angle(cfg.alpha, eps);
        let model = BinaryOrtho::new(cfg.d, cfg.alpha, beta, cfg.gaussian_weight)?;
        let (x1, x2) = (model.x1(), model.x2());
        let [e1, e2] = model.atom_etas();
        construction.push(vec![
            eps.into(),
            cfg.alpha.into(),
            beta.into(),
            x1[0].into(),
            x2[0].into(),
            x2[1].into(),
            e1.into(),
            e2.into(),
            (2.0 * e1 - 1.0).abs().into(),
            (2.0 * e2 - 1.0).abs().into(),
        ]);
        let mut prev: Option<(usize, f64, f64)> = None;
        let mut worst_step = f64::INFINITY;
        for &m in &cfg.m_schedule {
            let f = fit(&model, cfg, seed, m)?;
            max_grad = max_grad.max(f.grad_norm);
            let theta_txt = f.theta.iter().map(|v| crate::report::fmt_num(*v)).collect::<Vec<_>>().join(" ");
            fits.push(vec![
                eps.into(),
                m.into(),
                f.cos.into(),
                f.se.into(),
                math::norm2(&f.theta).into(),
                f.grad_norm.into(),
                f.iters.into(),
                f.value.into(),
                theta_txt.into(),
            ]);
            report.metric(format!("cos_eps{eps}_m{m}"), f.cos);
            report.metric(format!("se_eps{eps}_m{m}"), f.se);
            if m == 1 {
                report.check(Check::new(format!("eps={eps}: |cos(theta_1, theta*)| + {k}se"), f.cos.abs() + k * f.se, Cmp::Le, eps + cfg.angle_tol));
            }
            if let Some((_, c0, s0)) = prev {
                worst_step = worst_step.min(f.cos - c0 + k * (s0 * s0 + f.se * f.se).sqrt());
            }
            prev = Some((m, f.cos, f.se));
        }
        if let Some((m, c, s)) = prev {
            report.check(Check::new(format!("eps={eps}: cos(theta_{m}, theta*) - {k}se"), c - k * s, Cmp::Ge, cfg.final_cos));
        }
        if cfg.m_schedule.len() > 1 {
            report.check(Check::new(format!("eps={eps}: min step of cos over m, plus {k}se"), worst_step, Cmp::Ge, 0.0));
        }
    }
    report.metric("max_grad_norm", max_grad);
    report.check(Check::new("max gradient norm at the fits", max_grad, Cmp::Le, 1e-6));
    report.note("Gaussian part: fixed draws with soft labels P(majority = +1 | x); standard errors by the sandwich formula and the delta method.");
    report.tables.push(construction);
    report.tables.push(fits);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use agglab_core::optimize::{minimize, Budget};

    #[test]
    fn two_point_risk_matches_closed_form() {
        let model = BinaryOrtho::new(2, 1.0, BinaryOrtho::beta_for_angle(1.0, 0.1), 0.0).unwrap();
        let obj = MixtureRisk::new(&model, 1, 16, 1);
        let sp = |t: f64| (1.0 + (-t).exp()).ln();
        for theta in [[0.0, 0.0], [1.0, -2.0], [4.0, -80.0]] {
            let z1 = theta[0] / 6.0;
            let z2 = -theta[0] / 12.0 + theta[1] / model.beta;
            let closed = 0.5 * (2.0 / 3.0 * sp(z1) + 1.0 / 3.0 * sp(-z1)) + 0.5 * (1.0 / 3.0 * sp(z2) + 2.0 / 3.0 * sp(-z2));
            assert!((obj.value(&theta) - closed).abs() < 1e-10);
        }
        // the two-point minimizer solves <θ, x1> = ln 2, <θ, x2> = -ln 2
        let min = minimize(&obj, &[0.0, 0.0], &Budget { max_iters: 50_000, tol: 1e-12, ..Budget::default() }).unwrap();
        let l2 = 2f64.ln();
        assert!((min.x[0] - 6.0 * l2).abs() < 1e-6, "{:?}", min.x);
        assert!((min.x[1] + model.beta * l2 / 2.0).abs() < 1e-3, "{:?}", min.x);
    }

    #[test]
    fn gradient_matches_differences() {
        let model = BinaryOrtho::new(3, 0.8, 50.0, 0.3).unwrap();
        let obj = MixtureRisk::new(&model, 5, 500, 3);
        let theta = [0.7, -0.4, 0.2];
        let mut g = [0.0; 3];
        obj.value_grad(&theta, &mut g);
        for i in 0..3 {
            let mut up = theta;
            let mut dn = theta;
            up[i] += 1e-6;
            dn[i] -= 1e-6;
            let fd = (obj.value(&up) - obj.value(&dn)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-7, "{fd} vs {}", g[i]);
        }
    }
}
