//! Multinomial logistic fits under a corrupted link, with and without
//! majority-vote aggregation of the labels.

use std::f64::consts::PI;

use agglab_core::calibration::{MvTable, TieRule};
use agglab_core::math;
use agglab_core::optimize::Objective;
use agglab_core::rng::Stream;
use agglab_core::scenarios::Link;
use agglab_core::task::TaskLoss;

use crate::config::E5Config;
use crate::error::{LabError, Result};
use crate::par;
use crate::report::{fmt_num, Check, Cmp, RunReport, Table};
use crate::stats;

/// Stream id for the E5 covariates.
const COVARIATE_STREAM: u64 = 0x6535;

/// `(1/n) Σ_i [lse(Θᵀx_i, 0) - <y_i, (Θᵀx_i, 0)>] + ridge ||Θ||²` for soft
/// labels `y_i`, with `Θ` row-major `d x (k-1)`.
pub struct SoftLogistic {
    pub d: usize,
    pub k: usize,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub ridge: f64,
}

impl SoftLogistic {
    fn n(&self) -> usize {
        self.xs.len() / self.d
    }

    fn probs(&self, theta: &[f64], x: &[f64], out: &mut [f64]) -> f64 {
        let c = self.k - 1;
        let mut z = vec![0.0; self.k];
        for j in 0..c {
            z[j] = (0..self.d).map(|r| theta[r * c + j] * x[r]).sum();
        }
        math::softmax(&z, out);
        math::log_sum_exp(&z) - 0.0
    }

    /// Hessian of the objective and covariance of the averaged per-sample
    /// gradient, at `theta`.
    pub fn hessian_and_score_cov(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (d, k) = (self.d, self.k);
        let c = k - 1;
        let p = d * c;
        let n = self.n();
        let sums = par::chunked_sum(n, p + 2 * p * p, |range, acc| {
            let mut s = vec![0.0; k];
            let mut g = vec![0.0; p];
            for i in range {
                let x = &self.xs[i * d..(i + 1) * d];
                let y = &self.ys[i * k..(i + 1) * k];
                self.probs(theta, x, &mut s);
                for r in 0..d {
                    for j in 0..c {
                        g[r * c + j] = x[r] * (s[j] - y[j]);
                    }
                }
                for a in 0..p {
                    acc[a] += g[a];
                    for b in 0..p {
                        acc[p + a * p + b] += g[a] * g[b];
                    }
                }
                // Hessian block (r, j), (q, l): x_r x_q (δ_jl s_j - s_j s_l)
                for r in 0..d {
                    for j in 0..c {
                        for q in 0..d {
                            for l in 0..c {
                                let jac = if j == l { s[j] * (1.0 - s[j]) } else { -s[j] * s[l] };
                                acc[p + p * p + (r * c + j) * p + q * c + l] += x[r] * x[q] * jac;
                            }
                        }
                    }
                }
            }
        });
        let nf = n as f64;
        let mut h = vec![0.0; p * p];
        let mut cov = vec![0.0; p * p];
        for a in 0..p {
            for b in 0..p {
                h[a * p + b] = sums[p + p * p + a * p + b] / nf + if a == b { 2.0 * self.ridge } else { 0.0 };
                let second = sums[p + a * p + b] / nf;
                let per = (second - sums[a] / nf * sums[b] / nf) * nf / (nf - 1.0).max(1.0);
                cov[a * p + b] = per / nf;
            }
        }
        (h, cov)
    }
}

impl Objective for SoftLogistic {
    fn dim(&self) -> usize {
        self.d * (self.k - 1)
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.value_grad(theta, &mut g)
    }

    fn value_grad(&self, theta: &[f64], g: &mut [f64]) -> f64 {
        let (d, k) = (self.d, self.k);
        let c = k - 1;
        let p = d * c;
        let sums = par::chunked_sum(self.n(), p + 1, |range, acc| {
            let mut s = vec![0.0; k];
            for i in range {
                let x = &self.xs[i * d..(i + 1) * d];
                let y = &self.ys[i * k..(i + 1) * k];
                let lse = self.probs(theta, x, &mut s);
                let mut v = lse;
                for j in 0..c {
                    let zj: f64 = (0..d).map(|r| theta[r * c + j] * x[r]).sum();
                    v -= y[j] * zj;
                }
                acc[p] += v;
                for r in 0..d {
                    for j in 0..c {
                        acc[r * c + j] += x[r] * (s[j] - y[j]);
                    }
                }
            }
        });
        let nf = self.n() as f64;
        for (a, gi) in g.iter_mut().enumerate() {
            *gi = sums[a] / nf + 2.0 * self.ridge * theta[a];
        }
        sums[p] / nf + self.ridge * theta.iter().map(|t| t * t).sum::<f64>()
    }
}

/// Default `Θ*` for `k = 3`: class vectors of norm `scale` at 120° in the
/// first two coordinates, measured against the last class.
pub fn symmetric_theta(d: usize, scale: f64) -> Vec<f64> {
    let cls: Vec<[f64; 2]> = (0..3)
        .map(|i| {
            let a = PI / 2.0 + 2.0 * PI * i as f64 / 3.0;
            [scale * a.cos(), scale * a.sin()]
        })
        .collect();
    let mut theta = vec![0.0; d * 2];
    for r in 0..2 {
        for j in 0..2 {
            theta[r * 2 + j] = cls[j][r] - cls[2][r];
        }
    }
    theta
}

/// Direction metrics of a fit against `Θ*`.
pub struct Alignment {
    /// `||PΘ/||PΘ|| - Θ*/||Θ*|| ||` with `P` the projector on span `Θ*`.
    pub aligned: f64,
    pub full: f64,
    /// Largest principal angle between the column spans.
    pub subspace_angle: f64,
    /// `||(I - P)Θ|| / ||Θ||`.
    pub off_span: f64,
}

struct Geometry {
    d: usize,
    c: usize,
    star_dir: Vec<f64>,
    /// Orthonormal basis of span `Θ*`, row-major `d x r`.
    u: Vec<f64>,
    r: usize,
}

impl Geometry {
    fn new(theta_star: &[f64], d: usize, c: usize) -> Self {
        let n = math::norm2(theta_star);
        let (u, r) = math::orthonormal_columns(theta_star, d, c);
        Geometry { d, c, star_dir: theta_star.iter().map(|v| v / n).collect(), u, r }
    }

    fn project(&self, theta: &[f64]) -> Vec<f64> {
        let (d, c, r) = (self.d, self.c, self.r);
        // U (Uᵀ Θ)
        let mut utt = vec![0.0; r * c];
        for a in 0..r {
            for j in 0..c {
                utt[a * c + j] = (0..d).map(|i| self.u[i * r + a] * theta[i * c + j]).sum();
            }
        }
        let mut out = vec![0.0; d * c];
        for i in 0..d {
            for j in 0..c {
                out[i * c + j] = (0..r).map(|a| self.u[i * r + a] * utt[a * c + j]).sum();
            }
        }
        out
    }

    fn aligned_error(&self, theta: &[f64]) -> f64 {
        dir_distance(&self.project(theta), &self.star_dir)
    }

    fn alignment(&self, theta: &[f64]) -> Alignment {
        let proj = self.project(theta);
        let resid: Vec<f64> = theta.iter().zip(&proj).map(|(a, b)| a - b).collect();
        let (q, rq) = math::orthonormal_columns(theta, self.d, self.c);
        let mut m = vec![0.0; rq * self.r];
        for a in 0..rq {
            for b in 0..self.r {
                m[a * self.r + b] = (0..self.d).map(|i| q[i * rq + a] * self.u[i * self.r + b]).sum();
            }
        }
        let sv = math::singular_values(&m, rq, self.r);
        let min_cos = if rq < self.r { 0.0 } else { sv.first().copied().unwrap_or(0.0).clamp(-1.0, 1.0) };
        Alignment {
            aligned: dir_distance(&proj, &self.star_dir),
            full: dir_distance(theta, &self.star_dir),
            subspace_angle: min_cos.acos(),
            off_span: math::norm2(&resid) / math::norm2(theta),
        }
    }
}

fn dir_distance(theta: &[f64], unit: &[f64]) -> f64 {
    let n = math::norm2(theta);
    if n == 0.0 {
        return f64::INFINITY;
    }
    theta.iter().zip(unit).map(|(a, b)| (a / n - b) * (a / n - b)).sum::<f64>().sqrt()
}

/// Smallest singular value of `M ↦ E[Z (∇σ(Θ*ᵀX) M Z)ᵀ]` with `Z = Uᵀ X`.
fn stationarity_map_min_sv(xs: &[f64], theta_star: &[f64], g: &Geometry) -> f64 {
    let (d, c, r) = (g.d, g.c, g.r);
    let n = xs.len() / d;
    let dim = r * c;
    // D[(a, b), (e, f)] = E[Z_a Z_f J_{b e}], J the Jacobian of σ_lr in (k-1) coords
    let sums = par::chunked_sum(n, dim * dim, |range, acc| {
        let mut s = vec![0.0; c + 1];
        let mut t = vec![0.0; c + 1];
        for i in range {
            let x = &xs[i * d..(i + 1) * d];
            let z: Vec<f64> = (0..r).map(|a| (0..d).map(|q| g.u[q * r + a] * x[q]).sum()).collect();
            for j in 0..c {
                t[j] = (0..d).map(|q| theta_star[q * c + j] * x[q]).sum();
            }
            t[c] = 0.0;
            math::softmax(&t, &mut s);
            for a in 0..r {
                for b in 0..c {
                    for e in 0..c {
                        let jac = if b == e { s[b] * (1.0 - s[b]) } else { -s[b] * s[e] };
                        for f in 0..r {
                            acc[(a * c + b) * dim + e * r + f] += z[a] * z[f] * jac;
                        }
                    }
                }
            }
        }
    });
    let dmat: Vec<f64> = sums.iter().map(|v| v / n as f64).collect();
    math::singular_values(&dmat, dim, dim).first().copied().unwrap_or(0.0)
}

struct FitOut {
    theta: Vec<f64>,
    align: Alignment,
    se: f64,
    norm: f64,
    grad_norm: f64,
    iters: usize,
}

fn fit(xs: &[f64], ys: Vec<f64>, cfg: &E5Config, geo: &Geometry) -> Result<FitOut> {
    let obj = SoftLogistic { d: cfg.d, k: cfg.k, xs: xs.to_vec(), ys, ridge: cfg.ridge };
    let min = stats::newton(&obj, |t| obj.hessian_and_score_cov(t).0, &vec![0.0; obj.dim()], cfg.grad_tol, cfg.max_iters);
    let (h, s) = obj.hessian_and_score_cov(&min.x);
    let cov = stats::sandwich(&h, &s, obj.dim()).ok_or_else(|| LabError::Budget("singular Hessian at an E5 fit".into()))?;
    let se = stats::delta_se(&cov, &min.x, |t| geo.aligned_error(t));
    Ok(FitOut { align: geo.alignment(&min.x), norm: math::norm2(&min.x), theta: min.x, se, grad_norm: min.grad_norm, iters: min.iters })
}

fn labels(xs: &[f64], d: usize, k: usize, theta: &[f64], link: &Link, m: usize) -> Result<Vec<f64>> {
    let c = k - 1;
    let table = if m > 1 { Some(MvTable::new(k, m, &TaskLoss::ZeroOne, TieRule::Split)?) } else { None };
    let n = xs.len() / d;
    let rows = par::map_range(n, |i| {
        let x = &xs[i * d..(i + 1) * d];
        let t: Vec<f64> = (0..c).map(|j| (0..d).map(|q| theta[q * c + j] * x[q]).sum()).collect();
        let p = link.probs(&t);
        match &table {
            Some(tb) => tb.law(&p),
            None => p,
        }
    });
    Ok(rows.into_iter().flatten().collect())
}

pub fn run(cfg: &E5Config, seed: u64, report: &mut RunReport) -> Result<()> {
    let (d, k) = (cfg.d, cfg.k);
    let c = k - 1;
    let theta_star = cfg.theta_star.clone().unwrap_or_else(|| symmetric_theta(d, cfg.scale));
    let geo = Geometry::new(&theta_star, d, c);
    if geo.r != c {
        return Err(LabError::Config("`theta_star` must have full column rank".into()));
    }
    let xs: Vec<f64> = par::map_range(cfg.samples, |i| {
        let mut s = Stream::new(seed, COVARIATE_STREAM, i as u64);
        (0..d).map(|_| s.normal()).collect::<Vec<f64>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let corrupted = Link::Corrupted { center: cfg.box_center.clone(), half_width: cfg.box_half_width.clone(), mix: cfg.mix };
    let in_box = par::map_range(cfg.samples, |i| {
        let x = &xs[i * d..(i + 1) * d];
        let t: Vec<f64> = (0..c).map(|j| (0..d).map(|q| theta_star[q * c + j] * x[q]).sum()).collect();
        usize::from(corrupted.in_box(&t))
    })
    .into_iter()
    .sum::<usize>();
    let box_mass = in_box as f64 / cfg.samples as f64;
    report.metric("box_volume", cfg.box_half_width.iter().map(|h| 2.0 * h).product());
    report.metric("box_mass", box_mass);
    report.metric("ridge_norm_ceiling", ((k as f64).ln() / cfg.ridge).sqrt());
    let min_sv = stationarity_map_min_sv(&xs, &theta_star, &geo);
    report.metric("stationarity_map_min_singular_value", min_sv);

    let mut fits = Table::new(
        "fits",
        &["link", "m", "aligned_error", "se", "full_error", "subspace_angle", "off_span", "norm", "grad_norm", "iters", "theta"],
    );
    let mut push = |name: &str, m: usize, f: &FitOut| {
        fits.push(vec![
            name.into(),
            m.into(),
            f.align.aligned.into(),
            f.se.into(),
            f.align.full.into(),
            f.align.subspace_angle.into(),
            f.align.off_span.into(),
            f.norm.into(),
            f.grad_norm.into(),
            f.iters.into(),
            f.theta.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(" ").into(),
        ]);
    };

    let base = fit(&xs, labels(&xs, d, k, &theta_star, &Link::Logistic, 1)?, cfg, &geo)?;
    push("logistic", 1, &base);
    report.metric("baseline_error", base.align.aligned);
    report.metric("baseline_se", base.se);
    let mut max_grad = base.grad_norm;
    let mut out = Vec::new();
    for &m in &cfg.m_schedule {
        let f = fit(&xs, labels(&xs, d, k, &theta_star, &corrupted, m)?, cfg, &geo)?;
        push("corrupted", m, &f);
        report.metric(format!("error_m{m}"), f.align.aligned);
        report.metric(format!("se_m{m}"), f.se);
        report.metric(format!("norm_m{m}"), f.norm);
        report.metric(format!("subspace_angle_m{m}"), f.align.subspace_angle);
        max_grad = max_grad.max(f.grad_norm);
        out.push((m, f));
    }
    let z = cfg.se_mult;
    let (m0, first) = (&out[0].0, &out[0].1);
    report.check(Check::new(
        format!("m={m0} error - {z}se vs {}x (baseline + {z}se)", cfg.baseline_factor),
        first.align.aligned - z * first.se,
        Cmp::Gt,
        cfg.baseline_factor * (base.align.aligned + z * base.se),
    ));
    if out.len() > 1 {
        let step = out
            .windows(2)
            .map(|w| w[0].1.align.aligned - w[1].1.align.aligned - z * (w[0].1.se.powi(2) + w[1].1.se.powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        report.check(Check::new(format!("min decrease of error over m, less {z}se"), step, Cmp::Gt, 0.0));
        let growth = out.windows(2).map(|w| w[1].1.norm / w[0].1.norm).fold(f64::INFINITY, f64::min);
        report.check(Check::new("min norm ratio between consecutive m", growth, Cmp::Gt, 1.0));
    }
    let (ml, last) = out.last().map(|(m, f)| (*m, f)).expect("nonempty schedule");
    report.check(Check::new(format!("m={ml} error + {z}se"), last.align.aligned + z * last.se, Cmp::Le, cfg.tol_align));
    report.metric("max_grad_norm", max_grad);
    report.check(Check::new("max gradient norm at the fits", max_grad, Cmp::Le, 1e-6));
    report.note(format!(
        "corruption box in index space: centre {:?}, half-widths {:?}, uniform weight {}; ridge {} caps the norm growth",
        cfg.box_center, cfg.box_half_width, cfg.mix, cfg.ridge
    ));
    report.tables.push(fits);
    Ok(())
}
