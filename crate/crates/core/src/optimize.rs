//! Deterministic first-order minimization for finite convex risks.
//!
//! Smooth objectives use full-gradient descent with an Armijo backtracking
//! line search (the trial step is the Barzilai–Borwein step when available).
//! Nonsmooth objectives use the subgradient method with `c/√t` steps and
//! Polyak averaging.

use alloc::vec;
use alloc::vec::Vec;

use crate::aggregate::Aggregate;
use crate::error::{Error, Result};
use crate::math;
use crate::surrogate::Surrogate;

pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Writes a (sub)gradient into `g` and returns the value.
    fn value_grad(&self, x: &[f64], g: &mut [f64]) -> f64;
    fn is_smooth(&self) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Budget {
    pub max_iters: usize,
    /// Gradient-norm tolerance.
    pub tol: f64,
    /// Stop once `x/||x||` moves less than this over `drift_window` iterations.
    pub drift_tol: Option<f64>,
    pub drift_window: usize,
    /// Base step `c` of the subgradient method.
    pub subgrad_step: f64,
    pub record_trace: bool,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_iters: 10_000, tol: 1e-8, drift_tol: None, drift_window: 100, subgrad_step: 1.0, record_trace: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stop {
    GradTol,
    DirectionStable,
    MaxIters,
    /// The line search could not make progress (at numerical precision).
    Stalled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub direction_drift: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub converged: bool,
    pub stop: Stop,
    pub trace: Vec<TraceRow>,
}

fn direction(x: &[f64]) -> Vec<f64> {
    let n = math::norm2(x);
    if n > 0.0 {
        x.iter().map(|v| v / n).collect()
    } else {
        vec![0.0; x.len()]
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    math::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

pub fn minimize(obj: &dyn Objective, init: &[f64], budget: &Budget) -> Result<Minimum> {
    if init.len() != obj.dim() {
        return Err(Error::DimensionMismatch { expected: obj.dim(), got: init.len() });
    }
    if obj.is_smooth() {
        gradient_descent(obj, init, budget)
    } else {
        subgradient_method(obj, init, budget)
    }
}

fn gradient_descent(obj: &dyn Objective, init: &[f64], budget: &Budget) -> Result<Minimum> {
    let d = init.len();
    let mut x = init.to_vec();
    let mut g = vec![0.0; d];
    let mut f = obj.value_grad(&x, &mut g);
    if !f.is_finite() {
        return Err(Error::NonFinite { iter: 0, iterate: x });
    }
    let mut trace = Vec::new();
    let mut step = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut dir = direction(&x);
    let mut anchor_dir = dir.clone();
    let mut xn = vec![0.0; d];
    let mut gn = vec![0.0; d];
    let mut stop = Stop::MaxIters;
    let mut iters = 0;
    for it in 0..budget.max_iters {
        let gnorm = math::norm2(&g);
        if gnorm <= budget.tol {
            stop = Stop::GradTol;
            break;
        }
        // Barzilai–Borwein trial step, else grow the last accepted one
        let mut t = match &prev {
            Some((px, pg)) => {
                let sy: f64 = (0..d).map(|i| (x[i] - px[i]) * (g[i] - pg[i])).sum();
                let ss: f64 = (0..d).map(|i| (x[i] - px[i]) * (x[i] - px[i])).sum();
                if sy > 0.0 {
                    ss / sy
                } else {
                    step * 2.0
                }
            }
            None => step,
        };
        let g2 = gnorm * gnorm;
        let mut accepted = false;
        let mut fnew = f;
        for _ in 0..80 {
            for i in 0..d {
                xn[i] = x[i] - t * g[i];
            }
            fnew = obj.value(&xn);
            if fnew.is_finite() && fnew <= f - 1e-4 * t * g2 {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if !fnew.is_finite() && t > 0.0 {
                return Err(Error::NonFinite { iter: it, iterate: xn.clone() });
            }
            stop = Stop::Stalled;
            break;
        }
        step = t;
        let fval = obj.value_grad(&xn, &mut gn);
        if !fval.is_finite() {
            return Err(Error::NonFinite { iter: it, iterate: xn.clone() });
        }
        prev = Some((x.clone(), g.clone()));
        core::mem::swap(&mut x, &mut xn);
        core::mem::swap(&mut g, &mut gn);
        f = fval;
        iters = it + 1;
        let new_dir = direction(&x);
        let drift = dist(&new_dir, &dir);
        dir = new_dir;
        if budget.record_trace {
            trace.push(TraceRow { iter: iters, value: f, grad_norm: math::norm2(&g), direction_drift: drift });
        }
        if let Some(dtol) = budget.drift_tol {
            if iters % budget.drift_window == 0 {
                if dist(&dir, &anchor_dir) < dtol {
                    stop = Stop::DirectionStable;
                    break;
                }
                anchor_dir = dir.clone();
            }
        }
    }
    let grad_norm = math::norm2(&g);
    Ok(Minimum {
        x,
        value: f,
        grad_norm,
        iters,
        converged: matches!(stop, Stop::GradTol | Stop::DirectionStable) || grad_norm <= budget.tol,
        stop,
        trace,
    })
}

fn subgradient_method(obj: &dyn Objective, init: &[f64], budget: &Budget) -> Result<Minimum> {
    let d = init.len();
    let mut x = init.to_vec();
    let mut g = vec![0.0; d];
    let mut avg = x.clone();
    let mut best_x = x.clone();
    let mut best_f = f64::INFINITY;
    let mut best_g = 0.0;
    let mut trace = Vec::new();
    let mut dir = direction(&x);
    let mut stop = Stop::MaxIters;
    let mut iters = 0;
    for it in 0..budget.max_iters {
        let f = obj.value_grad(&x, &mut g);
        if !f.is_finite() {
            return Err(Error::NonFinite { iter: it, iterate: x });
        }
        let gnorm = math::norm2(&g);
        if f < best_f {
            best_f = f;
            best_x = x.clone();
            best_g = gnorm;
        }
        if gnorm == 0.0 {
            stop = Stop::GradTol;
            break;
        }
        let t = budget.subgrad_step / math::sqrt((it + 1) as f64);
        for i in 0..d {
            x[i] -= t * g[i] / gnorm;
        }
        let w = 1.0 / (it + 2) as f64;
        for i in 0..d {
            avg[i] += w * (x[i] - avg[i]);
        }
        iters = it + 1;
        if budget.record_trace {
            let nd = direction(&avg);
            trace.push(TraceRow { iter: iters, value: f, grad_norm: gnorm, direction_drift: dist(&nd, &dir) });
            dir = nd;
        }
    }
    let fa = obj.value_grad(&avg, &mut g);
    if fa <= best_f {
        best_f = fa;
        best_g = math::norm2(&g);
        best_x = avg;
    }
    Ok(Minimum { x: best_x, value: best_f, grad_norm: best_g, iters, converged: stop == Stop::GradTol, stop, trace })
}

/// Sources of a certified lower bound on `inf f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LowerBound {
    Known(f64),
    /// `f` is `mu`-strongly convex: `inf f >= f(x) - ||∇f(x)||² / (2 mu)`.
    StrongConvexity { mu: f64 },
    /// `f` is `lipschitz`-Lipschitz with a minimizer inside `[-radius, radius]^d`.
    GridLipschitz { radius: f64, grid_n: usize, lipschitz: f64 },
    Unknown,
}

/// Whether `f(x) <= inf f + eps`; `None` when no bound can be certified.
pub fn eps_argmin_check(obj: &dyn Objective, x: &[f64], eps: f64, bound: LowerBound) -> Option<bool> {
    if eps == f64::INFINITY {
        return Some(true);
    }
    let d = obj.dim();
    let mut g = vec![0.0; d];
    let fx = obj.value_grad(x, &mut g);
    let lower = match bound {
        LowerBound::Known(v) => v,
        LowerBound::StrongConvexity { mu } if mu > 0.0 && obj.is_smooth() => {
            let gn = math::norm2(&g);
            fx - gn * gn / (2.0 * mu)
        }
        LowerBound::GridLipschitz { radius, grid_n, lipschitz } => {
            let n = grid_n.max(2);
            if math::powf(n as f64, d as f64) > 1e7 {
                return None;
            }
            let h = 2.0 * radius / (n - 1) as f64;
            let mut idx = vec![0usize; d];
            let mut p = vec![0.0; d];
            let mut best = f64::INFINITY;
            loop {
                for (pi, ii) in p.iter_mut().zip(&idx) {
                    *pi = -radius + h * *ii as f64;
                }
                best = best.min(obj.value(&p));
                let mut pos = 0;
                while pos < d {
                    idx[pos] += 1;
                    if idx[pos] < n {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
                if pos == d {
                    break;
                }
            }
            // every box point lies within h·√d/2 of a grid point
            best - lipschitz * h * math::sqrt(d as f64) / 2.0
        }
        _ => return None,
    };
    Some(fx <= lower + eps)
}

/// `sum_j w_j E_{a ~ law_j} φ(Θᵀ x_j, a) + ridge ||Θ||²` over a finite design,
/// with `Θ` stored row-major as `d_x x d_s`.
pub struct LinearRisk<'a> {
    pub spec: &'a Surrogate,
    pub xs: Vec<Vec<f64>>,
    pub laws: Vec<Vec<(Aggregate, f64)>>,
    pub weights: Vec<f64>,
    pub ridge: f64,
}

impl<'a> LinearRisk<'a> {
    pub fn new(spec: &'a Surrogate, xs: Vec<Vec<f64>>, laws: Vec<Vec<(Aggregate, f64)>>, weights: Vec<f64>, ridge: f64) -> Result<Self> {
        let n = xs.len();
        if laws.len() != n || weights.len() != n || n == 0 {
            return Err(Error::InvalidArgument("design, laws and weights must have equal nonzero length".into()));
        }
        let dx = xs[0].len();
        if xs.iter().any(|x| x.len() != dx) {
            return Err(Error::InvalidArgument("design rows must share a dimension".into()));
        }
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidArgument("weights must be non-negative".into()));
        }
        Ok(LinearRisk { spec, xs, laws, weights, ridge })
    }

    pub fn dx(&self) -> usize {
        self.xs[0].len()
    }

    /// Scores `Θᵀ x`.
    pub fn scores(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
        let ds = self.spec.dim();
        (0..ds).map(|c| (0..x.len()).map(|r| theta[r * ds + c] * x[r]).sum()).collect()
    }
}

impl Objective for LinearRisk<'_> {
    fn dim(&self) -> usize {
        self.dx() * self.spec.dim()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let mut total = self.ridge * theta.iter().map(|t| t * t).sum::<f64>();
        for ((x, law), w) in self.xs.iter().zip(&self.laws).zip(&self.weights) {
            if *w > 0.0 {
                total += w * self.spec.cond_risk(&self.scores(theta, x), law).unwrap_or(f64::NAN);
            }
        }
        total
    }

    fn value_grad(&self, theta: &[f64], g: &mut [f64]) -> f64 {
        let ds = self.spec.dim();
        for (gi, t) in g.iter_mut().zip(theta) {
            *gi = 2.0 * self.ridge * t;
        }
        let mut total = self.ridge * theta.iter().map(|t| t * t).sum::<f64>();
        for ((x, law), w) in self.xs.iter().zip(&self.laws).zip(&self.weights) {
            if *w == 0.0 {
                continue;
            }
            let s = self.scores(theta, x);
            for (a, wa) in law {
                if *wa == 0.0 {
                    continue;
                }
                let (Ok(v), Ok(sg)) = (self.spec.eval(&s, a), self.spec.subgradient(&s, a)) else {
                    return f64::NAN;
                };
                total += w * wa * v;
                for r in 0..x.len() {
                    for c in 0..ds {
                        g[r * ds + c] += w * wa * x[r] * sg[c];
                    }
                }
            }
        }
        total
    }

    fn is_smooth(&self) -> bool {
        match self.spec {
            Surrogate::Margin(l) | Surrogate::PairwiseConvex { phi0: l, .. } => l.is_smooth(),
            Surrogate::StructuredHinge(_) => false,
            Surrogate::MulticlassLogistic { .. } | Surrogate::SquaredVsScore { .. } => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::{label_law, ScalarLoss};
    use proptest::prelude::*;
    use std::vec;

    struct Quadratic {
        target: Vec<f64>,
        scales: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            self.target.len()
        }
        fn value(&self, x: &[f64]) -> f64 {
            x.iter().zip(&self.target).zip(&self.scales).map(|((a, b), c)| c * (a - b) * (a - b)).sum()
        }
        fn value_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
            for i in 0..x.len() {
                g[i] = 2.0 * self.scales[i] * (x[i] - self.target[i]);
            }
            self.value(x)
        }
    }

    #[test]
    fn quadratic_converges() {
        let q = Quadratic { target: vec![1.0, -2.0, 3.0], scales: vec![1.0, 1.0, 1.0] };
        let m = minimize(&q, &[0.0; 3], &Budget { tol: 1e-10, ..Budget::default() }).unwrap();
        assert!(m.converged);
        assert!(dist(&m.x, &q.target) < 1e-10);
        assert_eq!(eps_argmin_check(&q, &m.x, 1e-3, LowerBound::StrongConvexity { mu: 2.0 }), Some(true));
    }

    #[test]
    fn ill_conditioned_quadratic_converges() {
        let q = Quadratic { target: vec![1.0, -2.0], scales: vec![1.0, 1e-5] };
        let m = minimize(&q, &[0.0; 2], &Budget { tol: 1e-12, max_iters: 5000, ..Budget::default() }).unwrap();
        assert!(m.converged, "{:?}", m.stop);
        assert!(dist(&m.x, &q.target) < 1e-5);
    }

    #[test]
    fn separable_logistic_with_ridge_is_finite() {
        let spec = Surrogate::Margin(ScalarLoss::Logistic);
        let xs = vec![vec![1.0, 0.5], vec![-1.0, 0.2]];
        let laws = vec![label_law(&[0.0, 1.0]), label_law(&[1.0, 0.0])];
        let obj = LinearRisk::new(&spec, xs, laws, vec![0.5, 0.5], 1e-6).unwrap();
        let m = minimize(&obj, &[0.0, 0.0], &Budget { tol: 1e-8, max_iters: 200_000, ..Budget::default() }).unwrap();
        assert!(m.grad_norm <= 1e-8, "{:?} {}", m.stop, m.grad_norm);
        assert!(m.x.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn hinge_subgradient_matches_grid() {
        let spec = Surrogate::Margin(ScalarLoss::Hinge);
        let xs = vec![vec![1.0], vec![0.5], vec![-2.0]];
        let laws = vec![label_law(&[0.3, 0.7]), label_law(&[0.6, 0.4]), label_law(&[0.8, 0.2])];
        let obj = LinearRisk::new(&spec, xs, laws, vec![0.4, 0.3, 0.3], 0.0).unwrap();
        assert!(!obj.is_smooth());
        let m = minimize(&obj, &[0.0], &Budget { max_iters: 20_000, ..Budget::default() }).unwrap();
        let grid = (0..=200_000).map(|i| -5.0 + i as f64 * 1e-4).map(|t| obj.value(&[t])).fold(f64::INFINITY, f64::min);
        assert!((m.value - grid).abs() < 1e-4, "{} vs {grid}", m.value);
    }

    #[test]
    fn eps_argmin_examples() {
        let q = Quadratic { target: vec![1.0], scales: vec![1.0] };
        let gl = LowerBound::GridLipschitz { radius: 3.0, grid_n: 601, lipschitz: 8.0 };
        assert_eq!(eps_argmin_check(&q, &[0.0], 0.5, gl), Some(false));
        assert_eq!(eps_argmin_check(&q, &[1.0], 0.1, gl), Some(true));
        assert_eq!(eps_argmin_check(&q, &[0.0], f64::INFINITY, LowerBound::Unknown), Some(true));
        assert_eq!(eps_argmin_check(&q, &[0.0], 0.1, LowerBound::Unknown), None);
        assert_eq!(eps_argmin_check(&q, &[0.0], 0.1, LowerBound::Known(0.0)), Some(false));
    }

    #[test]
    fn direction_stop_and_trace() {
        // logistic on separable data without ridge: the norm diverges but the
        // direction settles
        let spec = Surrogate::Margin(ScalarLoss::Logistic);
        let xs = vec![vec![1.0, 0.1], vec![-1.0, 0.1]];
        let laws = vec![label_law(&[0.0, 1.0]), label_law(&[1.0, 0.0])];
        let obj = LinearRisk::new(&spec, xs, laws, vec![0.5, 0.5], 0.0).unwrap();
        let b = Budget { max_iters: 100_000, tol: 0.0, drift_tol: Some(1e-6), record_trace: true, ..Budget::default() };
        let m = minimize(&obj, &[0.0, 0.0], &b).unwrap();
        assert_eq!(m.stop, Stop::DirectionStable);
        assert_eq!(m.trace.len(), m.iters);
        assert!(m.trace.windows(2).all(|w| w[1].value <= w[0].value));
    }

    #[test]
    fn nonfinite_objective_is_an_error() {
        struct Bad;
        impl Objective for Bad {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, _: &[f64]) -> f64 {
                f64::NAN
            }
            fn value_grad(&self, _: &[f64], g: &mut [f64]) -> f64 {
                g[0] = 1.0;
                f64::NAN
            }
        }
        assert!(matches!(minimize(&Bad, &[0.0], &Budget::default()), Err(Error::NonFinite { .. })));
    }

    proptest! {
        #[test]
        fn gradients_match_central_differences(theta in proptest::collection::vec(-2.0f64..2.0, 6), p in 0.05f64..0.95) {
            for spec in [Surrogate::Margin(ScalarLoss::Logistic), Surrogate::MulticlassLogistic { k: 3 }, Surrogate::Margin(ScalarLoss::Exp)] {
                let k = spec.num_labels();
                let w: Vec<f64> = (0..k).map(|i| if i == 0 { p } else { (1.0 - p) / (k - 1) as f64 }).collect();
                let xs = vec![vec![1.0, 0.3, -0.7], vec![-0.4, 1.2, 0.5]];
                let obj = LinearRisk::new(&spec, xs, vec![label_law(&w), label_law(&w)], vec![0.6, 0.4], 0.01).unwrap();
                let d = obj.dim();
                let th = &theta[..d];
                let mut g = vec![0.0; d];
                obj.value_grad(th, &mut g);
                for i in 0..d {
                    let h = 1e-6;
                    let mut a = th.to_vec();
                    let mut b = th.to_vec();
                    a[i] += h;
                    b[i] -= h;
                    let fd = (obj.value(&a) - obj.value(&b)) / (2.0 * h);
                    prop_assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()), "{fd} vs {}", g[i]);
                }
            }
        }

        #[test]
        fn minimize_is_deterministic(t in proptest::collection::vec(-3.0f64..3.0, 2)) {
            let q = Quadratic { target: t.clone(), scales: vec![1.0, 0.1] };
            let a = minimize(&q, &[0.0, 0.0], &Budget::default()).unwrap();
            let b = minimize(&q, &[0.0, 0.0], &Budget::default()).unwrap();
            prop_assert_eq!(a.x, b.x);
        }
    }
}
