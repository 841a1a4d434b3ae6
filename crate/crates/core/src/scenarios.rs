//! Synthetic constructions: the ranking cycle, the binary near-orthogonal
//! mixture, the (optionally corrupted) multinomial logistic link, and a
//! matching noise model, together with their samplers.

use alloc::vec;
use alloc::vec::Vec;

use crate::calibration::{mv_law_mc, mv_law_ties, TieRule};
use crate::error::{Error, Result};
use crate::math;
use crate::rng::Stream;
use crate::task::{factorial, pair_index, permutation_rank, permutation_unrank, transition_scores, FiniteDist, TaskLoss};

/// Comparison law over `items` items putting weight `q_l` on `(l, l+1)` and
/// `q_{k-1}` on `(k-1, 0)`.
pub fn cycle_distribution(q: &FiniteDist) -> Result<FiniteDist> {
    let items = q.k();
    if items < 2 {
        return Err(Error::InvalidArgument("a cycle needs at least two items".into()));
    }
    if q.probs().iter().any(|v| *v <= 0.0) {
        return Err(Error::InvalidDistribution("cycle weights must be positive".into()));
    }
    let mut p = vec![0.0; items * (items - 1)];
    for l in 0..items {
        p[pair_index(items, l, (l + 1) % items)] += q.probs()[l];
    }
    FiniteDist::new(p)
}

/// `C·1` for the cycle law of `q`.
pub fn cycle_transition_scores(q: &FiniteDist) -> Result<Vec<f64>> {
    transition_scores(&cycle_distribution(q)?, q.k())
}

/// Tilts a comparison law toward the order `perm` (best first): every
/// off-diagonal entry of row `perm[i]` gains `v_i / n` with
/// `v = (k, k-1, ..., 1)`, then the law is renormalized.
pub fn perturb_toward(p: &FiniteDist, items: usize, perm: &[usize], n: f64) -> Result<FiniteDist> {
    if perm.len() != items || p.k() != items * (items - 1) {
        return Err(Error::DimensionMismatch { expected: items, got: perm.len() });
    }
    let mut w = p.probs().to_vec();
    for (rank, &row) in perm.iter().enumerate() {
        let v = (items - rank) as f64;
        for j in 0..items {
            if j != row {
                w[pair_index(items, row, j)] += v / n;
            }
        }
    }
    FiniteDist::from_weights(w)
}

/// A comparison law with independent uniform weights on every ordered pair.
pub fn random_comparison_dist(items: usize, rng: &mut Stream) -> Result<FiniteDist> {
    let k = items * (items - 1);
    FiniteDist::from_weights((0..k).map(|_| rng.uniform_open()).collect())
}

/// `m` i.i.d. labels from `p` on the stream `(seed, x_id, trial)`.
pub fn sample_labels(p: &FiniteDist, m: usize, seed: u64, x_id: u64, trial: u64) -> Vec<usize> {
    let mut rng = Stream::new(seed, x_id, trial);
    (0..m).map(|_| rng.categorical(p.probs())).collect()
}

/// Exact law of plain majority vote (lowest index on ties) over `m` draws.
pub fn rho_m(p: &FiniteDist, m: usize) -> Result<FiniteDist> {
    rho_m_ties(p, m, TieRule::LowestIndex)
}

pub fn rho_m_ties(p: &FiniteDist, m: usize, ties: TieRule) -> Result<FiniteDist> {
    FiniteDist::new(mv_law_ties(p, m, &TaskLoss::ZeroOne, ties)?)
}

/// Monte Carlo estimate of [`rho_m`] with per-label standard errors.
pub fn rho_m_mc(p: &FiniteDist, m: usize, trials: usize, seed: u64, x_id: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    mv_law_mc(p, m, &TaskLoss::ZeroOne, trials, seed, x_id)
}

/// Probability that label 1 wins a binary majority vote of `m` draws with
/// `P(label 1) = q`, i.e. `P(Bin(m, q) > m/2)` (ties go to label 0).
pub fn binary_mv_prob(q: f64, m: usize) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    if q >= 1.0 {
        return 1.0;
    }
    let (lq, lr) = (math::ln(q), math::ln(1.0 - q));
    let mut total = 0.0;
    for j in (m / 2 + 1)..=m {
        total += math::exp(math::ln_choose(m as u64, j as u64) + j as f64 * lq + (m - j) as f64 * lr);
    }
    total.min(1.0)
}

/// Two atoms plus a Gaussian: the binary construction whose population
/// logistic minimizer is nearly orthogonal to `θ* = e1`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinaryOrtho {
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Mixture weight of the `N(0, I_d)` component.
    pub delta: f64,
}

/// Stream id for Gaussian covariates of the binary construction.
pub const GAUSS_STREAM: u64 = 0x6761_7573;

impl BinaryOrtho {
    pub fn new(d: usize, alpha: f64, beta: f64, delta: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidArgument("the construction needs d >= 2".into()));
        }
        if !(alpha > 0.5) || !(beta > 0.0) || !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidArgument(alloc::format!("need alpha > 1/2, beta > 0, delta in [0, 1); got {alpha}, {beta}, {delta}")));
        }
        Ok(BinaryOrtho { d, alpha, beta, delta })
    }

    /// `β = 24α(2α-1) sqrt(1/ε² - 1)`, targeting `|cos∠(θ_φ, θ*)| <= ε`.
    pub fn beta_for_angle(alpha: f64, eps: f64) -> f64 {
        24.0 * alpha * (2.0 * alpha - 1.0) * math::sqrt(1.0 / (eps * eps) - 1.0)
    }

    pub fn theta_star(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.d];
        t[0] = 1.0;
        t
    }

    pub fn x1(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.d];
        x[0] = 1.0 / 6.0;
        x
    }

    pub fn x2(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.d];
        x[0] = -1.0 / (12.0 * self.alpha);
        x[1] = (2.0 * self.alpha - 1.0) / self.beta;
        x
    }

    /// `P(Y = +1 | x) = clamp(1/2 + x_1 (β |x_2| + 1), 0, 1)`.
    pub fn eta(&self, x: &[f64]) -> f64 {
        (0.5 + x[0] * (self.beta * math::abs(x[1]) + 1.0)).clamp(0.0, 1.0)
    }

    /// Exact values at the atoms (`2/3`, `1/3`), free of rounding in the
    /// defining formula.
    pub fn atom_etas(&self) -> [f64; 2] {
        [2.0 / 3.0, 1.0 / 3.0]
    }

    /// Mass of each atom.
    pub fn atom_weight(&self) -> f64 {
        (1.0 - self.delta) / 2.0
    }

    /// The `i`-th Gaussian covariate draw.
    pub fn gaussian_point(&self, seed: u64, i: u64) -> Vec<f64> {
        let mut r = Stream::new(seed, GAUSS_STREAM, i);
        (0..self.d).map(|_| r.normal()).collect()
    }

    /// Draws `(x, label)` from the mixture; label 1 is the `+1` class.
    pub fn sample(&self, seed: u64, i: u64) -> (Vec<f64>, usize) {
        let mut r = Stream::new(seed, GAUSS_STREAM + 1, i);
        let u = r.uniform();
        let (x, eta) = if u < self.atom_weight() {
            (self.x1(), self.atom_etas()[0])
        } else if u < 2.0 * self.atom_weight() {
            (self.x2(), self.atom_etas()[1])
        } else {
            let x: Vec<f64> = (0..self.d).map(|_| r.normal()).collect();
            let e = self.eta(&x);
            (x, e)
        };
        let y = usize::from(r.uniform() < eta);
        (x, y)
    }
}

/// Link from linear scores `t ∈ R^{k-1}` to label probabilities.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Link {
    /// `softmax(t, 0)`.
    Logistic,
    /// The logistic link on the box `|t_i - center_i| <= half_width_i` is
    /// replaced by `(1 - mix) softmax(t, 0) + mix / k`. With `mix = 1` the box
    /// is uniform and every label ties there; `mix < 1` keeps the argmax.
    Corrupted { center: Vec<f64>, half_width: Vec<f64>, mix: f64 },
}

impl Link {
    pub fn in_box(&self, t: &[f64]) -> bool {
        match self {
            Link::Logistic => false,
            Link::Corrupted { center, half_width, .. } => t.iter().zip(center).zip(half_width).all(|((ti, c), h)| math::abs(ti - c) <= *h),
        }
    }

    pub fn probs(&self, t: &[f64]) -> Vec<f64> {
        let k = t.len() + 1;
        if let Link::Corrupted { mix, .. } = self {
            if *mix == 1.0 && self.in_box(t) {
                return vec![1.0 / k as f64; k];
            }
        }
        let mut z = t.to_vec();
        z.push(0.0);
        let mut out = vec![0.0; k];
        math::softmax(&z, &mut out);
        if let Link::Corrupted { mix, .. } = self {
            if self.in_box(t) {
                for o in out.iter_mut() {
                    *o = (1.0 - mix) * *o + mix / k as f64;
                }
            }
        }
        out
    }
}

/// Multinomial logistic model `P(Y | x) = link(Θ*ᵀ x)` with `Θ*` stored
/// row-major as `d x (k-1)` (the last class has score 0).
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MultiIndexLogistic {
    pub d: usize,
    pub k: usize,
    pub theta: Vec<f64>,
    pub link: Link,
}

impl MultiIndexLogistic {
    pub fn new(d: usize, k: usize, theta: Vec<f64>, link: Link) -> Result<Self> {
        if k < 2 || theta.len() != d * (k - 1) {
            return Err(Error::DimensionMismatch { expected: d * (k.max(2) - 1), got: theta.len() });
        }
        if let Link::Corrupted { center, half_width, mix } = &link {
            if center.len() != k - 1 || half_width.len() != k - 1 || half_width.iter().any(|h| !(*h > 0.0)) {
                return Err(Error::InvalidArgument("corruption box must match k - 1 with positive half-widths".into()));
            }
            if !(*mix > 0.0 && *mix <= 1.0) {
                return Err(Error::InvalidArgument("corruption mix must lie in (0, 1]".into()));
            }
        }
        Ok(MultiIndexLogistic { d, k, theta, link })
    }

    /// `Θ*ᵀ x`.
    pub fn index(&self, x: &[f64]) -> Vec<f64> {
        let c = self.k - 1;
        (0..c).map(|j| (0..self.d).map(|i| self.theta[i * c + j] * x[i]).sum()).collect()
    }

    pub fn probs(&self, x: &[f64]) -> Vec<f64> {
        self.link.probs(&self.index(x))
    }

    /// Lebesgue volume of the corruption box in index space.
    pub fn box_volume(&self) -> f64 {
        match &self.link {
            Link::Logistic => 0.0,
            Link::Corrupted { half_width, .. } => half_width.iter().map(|h| 2.0 * h).product(),
        }
    }
}

/// Matching label law for `n` rows: the matching `y_star` with probability
/// `1 - eta`, otherwise one of its `n - 1` adjacent transpositions uniformly.
pub fn bipartite_noise_model(n: usize, eta: f64, y_star: usize) -> Result<FiniteDist> {
    if n < 2 {
        return Err(Error::InvalidArgument("matching noise needs N >= 2".into()));
    }
    if !(0.0..0.5).contains(&eta) {
        return Err(Error::InvalidArgument(alloc::format!("corruption rate must lie in [0, 1/2), got {eta}")));
    }
    let k = factorial(n);
    if y_star >= k {
        return Err(Error::InvalidLabel { label: y_star, k });
    }
    let base = permutation_unrank(n, y_star);
    let mut p = vec![0.0; k];
    p[y_star] = 1.0 - eta;
    for i in 0..n - 1 {
        let mut perm = base.clone();
        perm.swap(i, i + 1);
        p[permutation_rank(&perm)] += eta / (n - 1) as f64;
    }
    FiniteDist::new(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{noise_profile, FiniteModel};
    use crate::task::{order_by_score, permutations};
    use proptest::prelude::*;
    use std::vec;

    #[test]
    fn cycle_scores_are_flat() {
        for q in [vec![0.2, 0.3, 0.5], vec![0.1, 0.2, 0.3, 0.4], vec![0.25; 4]] {
            let q = FiniteDist::new(q).unwrap();
            let c1 = cycle_transition_scores(&q).unwrap();
            assert!(c1.iter().all(|v| (v - 1.0).abs() < 1e-15), "{c1:?}");
            // row/column pattern: each item wins once and loses once
            let p = cycle_distribution(&q).unwrap();
            let items = q.k();
            for l in 0..items {
                let next = (l + 1) % items;
                assert_eq!(p.probs()[pair_index(items, l, next)], q.probs()[l]);
                let row: f64 = (0..items).filter(|&j| j != l).map(|j| p.probs()[pair_index(items, l, j)]).sum();
                assert_eq!(row, q.probs()[l]);
            }
        }
    }

    #[test]
    fn perturbation_orders_scores() {
        for items in [3, 4] {
            let q = FiniteDist::uniform(items);
            let p = cycle_distribution(&q).unwrap();
            for perm in permutations(items) {
                let pn = perturb_toward(&p, items, &perm, 1e4).unwrap();
                let c1 = transition_scores(&pn, items).unwrap();
                for w in perm.windows(2) {
                    assert!(c1[w[0]] > c1[w[1]], "{perm:?} {c1:?}");
                }
                assert_eq!(order_by_score(&c1), perm);
            }
        }
    }

    #[test]
    fn concentrated_pair_leads() {
        let mut w = vec![1e-3; 6];
        w[pair_index(3, 0, 1)] = 1.0;
        let c1 = transition_scores(&FiniteDist::from_weights(w).unwrap(), 3).unwrap();
        assert_eq!(math::argmax(&c1), 0);
    }

    #[test]
    fn sampling_examples() {
        let pm = FiniteDist::point_mass(3, 2);
        assert_eq!(sample_labels(&pm, 7, 1, 2, 3), vec![2; 7]);
        assert_eq!(sample_labels(&FiniteDist::uniform(4), 20, 9, 1, 5), sample_labels(&FiniteDist::uniform(4), 20, 9, 1, 5));
        let p = FiniteDist::new(vec![0.5, 0.3, 0.2]).unwrap();
        let z = sample_labels(&p, 100_000, 42, 0, 0);
        for (y, py) in p.probs().iter().enumerate() {
            let f = z.iter().filter(|v| **v == y).count() as f64 / 1e5;
            assert!((f - py).abs() <= 3.0 * (py * (1.0 - py) / 1e5).sqrt(), "{y}: {f}");
        }
    }

    #[test]
    fn rho_examples() {
        let p = FiniteDist::new(vec![0.5, 0.3, 0.2]).unwrap();
        for (a, b) in rho_m(&p, 1).unwrap().probs().iter().zip(p.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
        let r = rho_m(&FiniteDist::new(vec![0.8, 0.2]).unwrap(), 3).unwrap();
        assert!((r.probs()[0] - 0.896).abs() < 1e-12);
        assert!((binary_mv_prob(0.8, 3) - 0.896).abs() < 1e-12);
        assert!((binary_mv_prob(0.5, 2) - 0.25).abs() < 1e-12);
        let r = rho_m(&FiniteDist::new(vec![0.2, 0.6, 0.2]).unwrap(), 200).unwrap();
        assert!(r.probs()[1] >= 0.99);
    }

    #[test]
    fn binary_construction_atoms() {
        let c = BinaryOrtho::new(2, 1.0, BinaryOrtho::beta_for_angle(1.0, 0.1), 0.01).unwrap();
        assert!((c.eta(&c.x1()) - 2.0 / 3.0).abs() <= 1e-15);
        assert!((c.eta(&c.x2()) - 1.0 / 3.0).abs() <= 1e-15);
        for alpha in [0.6, 0.8, 1.5] {
            let c = BinaryOrtho::new(3, alpha, 7.0, 0.0).unwrap();
            assert!((c.eta(&c.x1()) - 2.0 / 3.0).abs() <= 1e-15);
            assert!((c.eta(&c.x2()) - 1.0 / 3.0).abs() <= 1e-15);
        }
        for i in 0..100_000 {
            let x = c.gaussian_point(42, i);
            let e = c.eta(&x);
            assert_eq!(e > 0.5, x[0] > 0.0);
        }
        assert!(BinaryOrtho::new(2, 0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn corrupted_link_examples() {
        let link = Link::Corrupted { center: vec![1.0, -0.5], half_width: vec![0.25, 0.25], mix: 1.0 };
        assert_eq!(link.probs(&[1.1, -0.4]), vec![1.0 / 3.0; 3]);
        let half = Link::Corrupted { center: vec![1.0, -0.5], half_width: vec![0.25, 0.25], mix: 0.5 };
        let lr = Link::Logistic.probs(&[1.1, -0.4]);
        for (a, b) in half.probs(&[1.1, -0.4]).iter().zip(&lr) {
            assert!((a - (0.5 * b + 0.5 / 3.0)).abs() < 1e-15);
        }
        let out = link.probs(&[2.0, 0.0]);
        assert_eq!(out, Link::Logistic.probs(&[2.0, 0.0]));
        let m = MultiIndexLogistic::new(2, 3, vec![1.0, 0.0, 0.0, 1.0], link).unwrap();
        assert_eq!(m.index(&[0.3, -0.2]), vec![0.3, -0.2]);
        assert!((m.box_volume() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn matching_noise_examples() {
        let p = bipartite_noise_model(2, 0.3, 0).unwrap();
        assert_eq!(p.probs(), &[0.7, 0.3]);
        let model = FiniteModel::new(vec![1.0], vec![p]).unwrap();
        let pr = noise_profile(&model, &TaskLoss::MatchingHamming { n: 2 }, 0.0).unwrap();
        assert!((pr.points[0].delta - 0.4).abs() < 1e-12);
        assert_eq!(bipartite_noise_model(3, 0.0, 4).unwrap(), FiniteDist::point_mass(6, 4));
        assert!(bipartite_noise_model(3, 0.5, 0).is_err());
    }

    proptest! {
        #[test]
        fn matching_mode_is_truth(eta in 0.0f64..0.4999, n in 2usize..5, seed in any::<u64>()) {
            let y = (seed as usize) % factorial(n);
            prop_assert_eq!(bipartite_noise_model(n, eta, y).unwrap().argmax(), y);
        }

        #[test]
        fn corrupted_link_keeps_argmax_outside_box(t in proptest::collection::vec(-3.0f64..3.0, 2)) {
            let link = Link::Corrupted { center: vec![0.5, 0.5], half_width: vec![0.4, 0.4], mix: 1.0 };
            let a = link.probs(&t);
            let partial = Link::Corrupted { center: vec![0.5, 0.5], half_width: vec![0.4, 0.4], mix: 0.6 }.probs(&t);
            prop_assert_eq!(math::argmax(&partial), math::argmax(&Link::Logistic.probs(&t)));
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            if link.in_box(&t) {
                prop_assert!(a.iter().all(|v| *v == 1.0 / 3.0));
            } else {
                prop_assert_eq!(math::argmax(&a), math::argmax(&Link::Logistic.probs(&t)));
            }
        }

        #[test]
        fn binary_odd_majority_keeps_mode(q in 0.0f64..1.0, h in 0usize..20) {
            prop_assume!((q - 0.5).abs() > 1e-9);
            let p = FiniteDist::new(vec![1.0 - q, q]).unwrap();
            prop_assert_eq!(rho_m(&p, 2 * h + 1).unwrap().argmax(), p.argmax());
        }

        #[test]
        fn majority_link_consistency(w in proptest::collection::vec(0.05f64..1.0, 3), m in 1usize..30) {
            let p = FiniteDist::from_weights(w).unwrap();
            let sorted = { let mut s = p.probs().to_vec(); s.sort_by(|a, b| b.partial_cmp(a).unwrap()); s };
            prop_assume!(sorted[0] - sorted[1] > 1e-9);
            prop_assert_eq!(rho_m_ties(&p, m, TieRule::Split).unwrap().argmax(), p.argmax());
        }
    }
}
