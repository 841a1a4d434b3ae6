//! Noise statistics, majority-vote laws, pointwise calibration functions and
//! the comparison-inequality checks built on them.

use alloc::vec;
use alloc::vec::Vec;

use crate::aggregate::{gmv_from_counts, Aggregate};
use crate::error::{Error, Result};
use crate::math;
use crate::rng::Stream;
use crate::surrogate::{AggLaw, Certificate, Region, SearchOpts, Surrogate};
use crate::task::{expected_losses, FiniteDist, TaskLoss};

/// Largest number of count vectors enumerated by exact majority-vote laws.
pub const EXACT_LIMIT: f64 = 1e6;

/// A conditional label model on a finite covariate support.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteModel {
    pub weights: Vec<f64>,
    pub dists: Vec<FiniteDist>,
}

impl FiniteModel {
    pub fn new(weights: Vec<f64>, dists: Vec<FiniteDist>) -> Result<Self> {
        if weights.len() != dists.len() || weights.is_empty() {
            return Err(Error::InvalidArgument("support weights and label laws must match and be nonempty".into()));
        }
        let k = dists[0].k();
        if let Some(d) = dists.iter().find(|d| d.k() != k) {
            return Err(Error::DimensionMismatch { expected: k, got: d.k() });
        }
        let w = FiniteDist::from_weights(weights)?;
        Ok(FiniteModel { weights: w.probs().to_vec(), dists })
    }

    pub fn k(&self) -> usize {
        self.dists[0].k()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `E[l(y, Y)] - min_y' E[l(y', Y)]` for every label `y`.
pub fn label_excesses(loss: &TaskLoss, p: &FiniteDist) -> Vec<f64> {
    let r = expected_losses(loss, p);
    let best = r.iter().cloned().fold(f64::INFINITY, f64::min);
    r.iter().map(|v| v - best).collect()
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoisePoint {
    pub x_id: usize,
    pub delta: f64,
    pub kappa: f64,
    pub y_star: usize,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseProfile {
    pub points: Vec<NoisePoint>,
    pub weights: Vec<f64>,
    pub alpha: f64,
    /// Smallest constant in `P(pred f != pred f*) <= c (R(f) - R*)^α`.
    pub c_mt: f64,
    /// Whether `c_mt` came from full subset enumeration (else a lower estimate).
    pub c_mt_exact: bool,
}

impl NoiseProfile {
    /// `P(κ(X) > t)`.
    pub fn kappa_tail(&self, t: f64) -> f64 {
        self.points.iter().zip(&self.weights).filter(|(p, _)| p.kappa > t).map(|(_, w)| w).sum()
    }

    /// `P(Δ(X) <= t)`.
    pub fn delta_cdf(&self, t: f64) -> f64 {
        self.points.iter().zip(&self.weights).filter(|(p, _)| p.delta <= t).map(|(_, w)| w).sum()
    }
}

/// Exact `Δ`, `κ` and Bayes label at every support point, plus the tightest
/// low-noise constant for exponent `alpha`.
pub fn noise_profile(model: &FiniteModel, loss: &TaskLoss, alpha: f64) -> Result<NoiseProfile> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(alloc::format!("noise exponent must lie in [0, 1], got {alpha}")));
    }
    let mut points = Vec::with_capacity(model.len());
    let mut ties = Vec::new();
    for (x_id, p) in model.dists.iter().enumerate() {
        let ex = label_excesses(loss, p);
        let y_star = math::argmin(&ex);
        let wrong: Vec<f64> = ex.iter().enumerate().filter(|(y, _)| *y != y_star).map(|(_, v)| *v).collect();
        let lo = wrong.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = wrong.iter().cloned().fold(0.0, f64::max);
        if lo <= 1e-12 {
            ties.push(x_id as u64);
            continue;
        }
        // equal wrong excesses up to rounding count as κ = 1 exactly
        let kappa = if hi - lo <= 1e-12 * hi { 1.0 } else { hi / lo };
        points.push(NoisePoint { x_id, delta: lo, kappa, y_star });
    }
    if !ties.is_empty() {
        return Err(Error::NonUniqueBayes(ties));
    }
    let weights = model.weights.clone();
    let (c_mt, c_mt_exact) = fit_c_mt(&points, &weights, alpha);
    Ok(NoiseProfile { points, weights, alpha, c_mt, c_mt_exact })
}

/// `sup_S P(S) / (sum_S w Δ)^α` over nonempty subsets of the support: a
/// hypothesis wrong exactly on `S` with the cheapest wrong labels attains it.
fn fit_c_mt(points: &[NoisePoint], weights: &[f64], alpha: f64) -> (f64, bool) {
    let n = points.len();
    let ratio = |mass: f64, ex: f64| if mass > 0.0 { mass / math::powf(ex, alpha) } else { 0.0 };
    if n <= 20 {
        let mut best = 0.0f64;
        for mask in 1u32..(1u32 << n) {
            let (mut mass, mut ex) = (0.0, 0.0);
            for i in 0..n {
                if mask & (1 << i) != 0 {
                    mass += weights[i];
                    ex += weights[i] * points[i].delta;
                }
            }
            best = best.max(ratio(mass, ex));
        }
        (best, true)
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| points[*a].delta.partial_cmp(&points[*b].delta).unwrap_or(core::cmp::Ordering::Equal));
        let (mut mass, mut ex, mut best) = (0.0, 0.0, 0.0f64);
        for i in order {
            mass += weights[i];
            ex += weights[i] * points[i].delta;
            best = best.max(ratio(mass, ex));
        }
        (best, false)
    }
}

/// Smallest `c` with `P(Δ <= ε) <= (c ε)^β` for all `ε > 0`.
pub fn fit_m_beta(profile: &NoiseProfile, beta: f64) -> f64 {
    if beta == 0.0 {
        return 1.0;
    }
    let min_delta = profile.points.iter().map(|p| p.delta).fold(f64::INFINITY, f64::min);
    if beta == f64::INFINITY {
        return 1.0 / min_delta;
    }
    profile.points.iter().map(|p| math::powf(profile.delta_cdf(p.delta), 1.0 / beta) / p.delta).fold(0.0, f64::max)
}

pub fn beta_from_alpha(alpha: f64) -> f64 {
    if alpha >= 1.0 {
        f64::INFINITY
    } else {
        alpha / (1.0 - alpha)
    }
}

pub fn alpha_from_beta(beta: f64) -> f64 {
    if beta == f64::INFINITY {
        1.0
    } else {
        beta / (1.0 + beta)
    }
}

/// The exponent-`α` constant implied by an `M_β` constant `c`.
pub fn c_alpha_from_beta(c: f64, beta: f64) -> f64 {
    if beta == f64::INFINITY {
        c
    } else if beta == 0.0 {
        1.0
    } else {
        math::powf(c / beta, beta / (1.0 + beta)) * (1.0 + beta)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseCheck {
    pub alpha: f64,
    pub c_mt: f64,
    /// Largest `P(pred f != pred f*) / (R(f) - R*)^α` over the supplied `f`.
    pub tightest_alpha_constant: f64,
    pub alpha_holds: bool,
    pub beta: f64,
    pub c_beta: f64,
    pub beta_holds: bool,
}

/// Task excess and disagreement mass of a score function given per point.
pub fn task_excess(model: &FiniteModel, loss: &TaskLoss, f: &[Vec<f64>], dec: &crate::task::Decoder) -> Result<(f64, f64)> {
    let mut ex = 0.0;
    let mut wrong = 0.0;
    for ((w, p), s) in model.weights.iter().zip(&model.dists).zip(f) {
        let e = label_excesses(loss, p);
        let y = dec.decode(s)?;
        ex += w * e[y];
        if y != math::argmin(&e) {
            wrong += w;
        }
    }
    Ok((ex, wrong))
}

/// Checks both low-noise conditions against supplied hypotheses and an `ε` grid.
pub fn check_noise_conditions(
    profile: &NoiseProfile,
    model: &FiniteModel,
    loss: &TaskLoss,
    dec: &crate::task::Decoder,
    f_set: &[Vec<Vec<f64>>],
    eps_grid: &[f64],
) -> Result<NoiseCheck> {
    let mut tight = 0.0f64;
    let mut holds = true;
    for f in f_set {
        let (ex, wrong) = task_excess(model, loss, f, dec)?;
        if wrong > 0.0 {
            let r = wrong / math::powf(ex, profile.alpha);
            tight = tight.max(r);
            holds &= wrong <= profile.c_mt * math::powf(ex, profile.alpha) * (1.0 + 1e-12) + 1e-15;
        }
    }
    let beta = beta_from_alpha(profile.alpha);
    let c_beta = fit_m_beta(profile, beta);
    let beta_holds = eps_grid.iter().filter(|e| **e > 0.0).all(|&e| {
        let lhs = profile.delta_cdf(e);
        let rhs = if beta == f64::INFINITY {
            if c_beta * e < 1.0 {
                0.0
            } else {
                1.0
            }
        } else {
            math::powf(c_beta * e, beta)
        };
        lhs <= rhs * (1.0 + 1e-12) + 1e-15
    });
    Ok(NoiseCheck { alpha: profile.alpha, c_mt: profile.c_mt, tightest_alpha_constant: tight, alpha_holds: holds, beta, c_beta, beta_holds })
}

/// Exact law of the generalized majority vote of `m` i.i.d. draws from `p`,
/// by enumerating label counts.
pub fn mv_law(p: &FiniteDist, m: usize, loss: &TaskLoss) -> Result<Vec<f64>> {
    mv_law_ties(p, m, loss, TieRule::LowestIndex)
}

/// How a majority vote with several minimizing labels is resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TieRule {
    LowestIndex,
    /// Split the tied mass equally, i.e. the law of a uniformly random
    /// tie-break.
    Split,
}

/// [`mv_law`] under an explicit tie rule.
pub fn mv_law_ties(p: &FiniteDist, m: usize, loss: &TaskLoss, ties: TieRule) -> Result<Vec<f64>> {
    let k = p.k();
    if m == 0 {
        return Err(Error::EmptyTuple);
    }
    let outcomes = exact_outcomes(p, m);
    if outcomes > EXACT_LIMIT {
        return Err(Error::EnumerationTooLarge { outcomes, limit: EXACT_LIMIT });
    }
    let lp: Vec<f64> = p.probs().iter().map(|v| if *v > 0.0 { math::ln(*v) } else { f64::NEG_INFINITY }).collect();
    let lfact: Vec<f64> = (0..=m).map(|i| math::ln_gamma(i as f64 + 1.0)).collect();
    let mut law = vec![0.0; k];
    let mut counts = vec![0u32; k];
    #[allow(clippy::too_many_arguments)]
    fn rec(pos: usize, left: usize, counts: &mut [u32], acc: f64, lp: &[f64], lfact: &[f64], loss: &TaskLoss, ties: TieRule, law: &mut [f64]) {
        let k = counts.len();
        if pos == k - 1 {
            counts[pos] = left as u32;
            if left > 0 && lp[pos] == f64::NEG_INFINITY {
                return;
            }
            let term = acc - lfact[left] + if left > 0 { left as f64 * lp[pos] } else { 0.0 };
            let mass = math::exp(term);
            match ties {
                TieRule::LowestIndex => law[gmv_from_counts(counts, loss)] += mass,
                TieRule::Split => {
                    let winners = vote_winners(counts, loss);
                    let share = mass / winners.len() as f64;
                    for y in winners {
                        law[y] += share;
                    }
                }
            }
            return;
        }
        for c in 0..=left {
            if c > 0 && lp[pos] == f64::NEG_INFINITY {
                break;
            }
            counts[pos] = c as u32;
            let term = acc - lfact[c] + if c > 0 { c as f64 * lp[pos] } else { 0.0 };
            rec(pos + 1, left - c, counts, term, lp, lfact, loss, ties, law);
        }
    }
    rec(0, m, &mut counts, lfact[m], &lp, &lfact, loss, ties, &mut law);
    let total: f64 = law.iter().sum();
    for v in law.iter_mut() {
        *v /= total;
    }
    Ok(law)
}

/// Precomputed vote outcomes for repeated exact majority-vote laws with a
/// fixed `(k, m, loss, ties)`: each label-count composition stores its log
/// multinomial coefficient and the share of its mass given to each winner.
#[derive(Clone, Debug)]
pub struct MvTable {
    k: usize,
    counts: Vec<u32>,
    log_coef: Vec<f64>,
    shares: Vec<Vec<(usize, f64)>>,
}

impl MvTable {
    pub fn new(k: usize, m: usize, loss: &TaskLoss, ties: TieRule) -> Result<Self> {
        if m == 0 {
            return Err(Error::EmptyTuple);
        }
        let outcomes = math::composition_count(m, k);
        if outcomes > EXACT_LIMIT {
            return Err(Error::EnumerationTooLarge { outcomes, limit: EXACT_LIMIT });
        }
        let lfact: Vec<f64> = (0..=m).map(|i| math::ln_gamma(i as f64 + 1.0)).collect();
        let mut t = MvTable { k, counts: Vec::new(), log_coef: Vec::new(), shares: Vec::new() };
        let mut c = vec![0u32; k];
        fn rec(pos: usize, left: usize, c: &mut [u32], lfact: &[f64], loss: &TaskLoss, ties: TieRule, t: &mut MvTable) {
            let k = c.len();
            if pos == k - 1 {
                c[pos] = left as u32;
                t.counts.extend_from_slice(c);
                let m: usize = c.iter().map(|v| *v as usize).sum();
                t.log_coef.push(lfact[m] - c.iter().map(|v| lfact[*v as usize]).sum::<f64>());
                t.shares.push(match ties {
                    TieRule::LowestIndex => vec![(gmv_from_counts(c, loss), 1.0)],
                    TieRule::Split => {
                        let w = vote_winners(c, loss);
                        let share = 1.0 / w.len() as f64;
                        w.into_iter().map(|y| (y, share)).collect()
                    }
                });
                return;
            }
            for v in 0..=left {
                c[pos] = v as u32;
                rec(pos + 1, left - v, c, lfact, loss, ties, t);
            }
        }
        rec(0, m, &mut c, &lfact, loss, ties, &mut t);
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.log_coef.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_coef.is_empty()
    }

    /// Law of the vote under label probabilities `p`.
    pub fn law(&self, p: &[f64]) -> Vec<f64> {
        let k = self.k;
        let lp: Vec<f64> = p.iter().map(|v| if *v > 0.0 { math::ln(*v) } else { f64::NEG_INFINITY }).collect();
        let mut law = vec![0.0; k];
        for (i, (lc, sh)) in self.log_coef.iter().zip(&self.shares).enumerate() {
            let c = &self.counts[i * k..(i + 1) * k];
            let mut term = *lc;
            for (ci, l) in c.iter().zip(&lp) {
                if *ci > 0 {
                    term += *ci as f64 * l;
                }
            }
            if term == f64::NEG_INFINITY {
                continue;
            }
            let mass = math::exp(term);
            for (y, w) in sh {
                law[*y] += mass * w;
            }
        }
        let total: f64 = law.iter().sum();
        law.iter_mut().for_each(|v| *v /= total);
        law
    }
}

/// Number of count vectors the exact enumeration visits: labels with zero
/// probability are pruned, so only the support size matters.
pub fn exact_outcomes(p: &FiniteDist, m: usize) -> f64 {
    let support = p.probs().iter().filter(|v| **v > 0.0).count().max(1);
    math::composition_count(m, support)
}

/// All labels minimizing the total vote loss.
fn vote_winners(counts: &[u32], loss: &TaskLoss) -> Vec<usize> {
    let k = counts.len();
    let totals: Vec<f64> = (0..k).map(|y| (0..k).filter(|&j| counts[j] > 0).map(|j| counts[j] as f64 * loss.value(y, j)).sum()).collect();
    let best = totals.iter().cloned().fold(f64::INFINITY, f64::min);
    (0..k).filter(|&y| totals[y] <= best + 1e-12).collect()
}

/// Monte Carlo law of the generalized majority vote with per-label standard
/// errors; trial `t` uses the stream `(seed, x_id, t)`.
pub fn mv_law_mc(p: &FiniteDist, m: usize, loss: &TaskLoss, trials: usize, seed: u64, x_id: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if m == 0 {
        return Err(Error::EmptyTuple);
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let k = p.k();
    let mut hits = vec![0u64; k];
    let mut counts = vec![0u32; k];
    for t in 0..trials {
        let mut rng = Stream::new(seed, x_id, t as u64);
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..m {
            counts[rng.categorical(p.probs())] += 1;
        }
        hits[gmv_from_counts(&counts, loss)] += 1;
    }
    let n = trials as f64;
    let law: Vec<f64> = hits.iter().map(|h| *h as f64 / n).collect();
    let se = law.iter().map(|q| math::sqrt(q * (1.0 - q) / n)).collect();
    Ok((law, se))
}

/// How majority-vote laws are computed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LawMode {
    Exact,
    MonteCarlo { trials: usize, seed: u64 },
    /// Exact when within [`EXACT_LIMIT`], otherwise Monte Carlo.
    Auto { trials: usize, seed: u64 },
}

pub fn mv_law_with(p: &FiniteDist, m: usize, loss: &TaskLoss, mode: LawMode, x_id: u64) -> Result<Vec<f64>> {
    match mode {
        LawMode::Exact => mv_law(p, m, loss),
        LawMode::MonteCarlo { trials, seed } => Ok(mv_law_mc(p, m, loss, trials, seed, x_id)?.0),
        LawMode::Auto { trials, seed } => {
            if exact_outcomes(p, m) <= EXACT_LIMIT {
                mv_law(p, m, loss)
            } else {
                Ok(mv_law_mc(p, m, loss, trials, seed, x_id)?.0)
            }
        }
    }
}

/// Law of `A_m(Z)` over the certificate's witnesses.
pub fn witness_law(label_law: &[f64], cert: &Certificate) -> AggLaw {
    let mut law: AggLaw = Vec::new();
    for (y, w) in label_law.iter().enumerate() {
        if *w <= 0.0 {
            continue;
        }
        let a = &cert.witnesses[y];
        match law.iter_mut().find(|(b, _)| b == a) {
            Some(entry) => entry.1 += w,
            None => law.push((a.clone(), *w)),
        }
    }
    law
}

/// `2k exp(-m Δ² / 2)`: bound on the probability that majority vote misses
/// the Bayes label.
pub fn hoeffding_mv_bound(k: usize, m: usize, delta: f64) -> f64 {
    2.0 * k as f64 * math::exp(-(m as f64) * delta * delta / 2.0)
}

/// `δ_{φ,A}(s, x)`: conditional aggregated surrogate risk minus its infimum.
pub fn excess_agg_surrogate(spec: &Surrogate, law: &[(Aggregate, f64)], s: &[f64], opts: &SearchOpts) -> Result<f64> {
    let risk = spec.cond_risk(s, law)?;
    let inf = spec.cond_inf(law, Region::All, opts)?.value;
    Ok((risk - inf).max(0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationCurve {
    pub epsilons: Vec<f64>,
    pub psi_raw: Vec<f64>,
    pub psi_convex: Vec<f64>,
    /// Set when some grid `ε` exceeds every achievable task excess; those
    /// entries are `+∞` in both curves.
    pub truncated: bool,
}

/// Pointwise calibration function `ψ̄(ε) = inf {δ_{φ,A}(s) : δ_l(s) >= ε}` for
/// a surrogate under aggregate law `law`, with task excesses taken from `p`.
///
/// The task excess depends on `s` only through the decoded label, so the
/// constraint set is a union of decode regions and the infimum is a minimum
/// of per-region conditional infima.
pub fn calibration_curve(
    spec: &Surrogate,
    law: &[(Aggregate, f64)],
    p: &FiniteDist,
    loss: &TaskLoss,
    eps_grid: &[f64],
    opts: &SearchOpts,
) -> Result<CalibrationCurve> {
    if eps_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("epsilon grid must be increasing".into()));
    }
    let k = spec.num_labels();
    if p.k() != k {
        return Err(Error::DimensionMismatch { expected: k, got: p.k() });
    }
    let ex = label_excesses(loss, p);
    let inf_all = spec.cond_inf(law, Region::All, opts)?.value;
    let mut region_gap = Vec::with_capacity(k);
    for y in 0..k {
        region_gap.push((spec.cond_inf(law, Region::Decodes(y), opts)?.value - inf_all).max(0.0));
    }
    let mut truncated = false;
    let psi_raw: Vec<f64> = eps_grid
        .iter()
        .map(|&e| {
            let v = (0..k).filter(|&y| ex[y] >= e - 1e-12).map(|y| region_gap[y]).fold(f64::INFINITY, f64::min);
            if v == f64::INFINITY {
                truncated = true;
            }
            v
        })
        .collect();
    let psi_convex = convex_minorant(eps_grid, &psi_raw);
    Ok(CalibrationCurve { epsilons: eps_grid.to_vec(), psi_raw, psi_convex, truncated })
}

/// Largest convex nondecreasing function below `(xs, ys)` on the grid;
/// `+∞` entries stay `+∞`.
pub fn convex_minorant(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(_, y)| y.is_finite()).map(|(x, y)| (*x, *y)).collect();
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // drop b if it lies on or above segment a-p
            if (b.1 - a.1) * (p.0 - a.0) >= (p.1 - a.1) * (b.0 - a.0) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut out: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            if !y.is_finite() {
                return f64::INFINITY;
            }
            let j = hull.partition_point(|h| h.0 < *x);
            if j < hull.len() && hull[j].0 == *x {
                hull[j].1
            } else {
                let (a, b) = (hull[j - 1], hull[j]);
                a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
            }
        })
        .collect();
    // flatten the decreasing part left of the minimum
    let mut lo = f64::INFINITY;
    let mut argmin = 0;
    for (i, v) in out.iter().enumerate() {
        if *v < lo {
            lo = *v;
            argmin = i;
        }
    }
    for v in out[..argmin].iter_mut() {
        *v = lo;
    }
    out
}

/// `c1 - 2k(c1 + c2) exp(-m ε² / (2 κ²))`.
pub fn calibration_lower_bound(c1: f64, c2: f64, k: usize, m: usize, eps: f64, kappa: f64) -> f64 {
    c1 - 2.0 * k as f64 * (c1 + c2) * math::exp(-(m as f64) * eps * eps / (2.0 * kappa * kappa))
}

fn log_term(k: usize, c1: f64, c2: f64) -> f64 {
    math::ln(4.0 * k as f64 * (c1 + c2) / c1)
}

/// `e_m(t) = t sqrt((2/m) ln(4k(c1 + c2)/c1))`.
pub fn error_function(t: f64, m: usize, c1: f64, c2: f64, k: usize) -> f64 {
    t * math::sqrt(2.0 / m as f64 * log_term(k, c1, c2))
}

/// `x^(1/(1-α))`, read as its limit when `α = 1`.
fn root_power(x: f64, alpha: f64) -> f64 {
    if alpha >= 1.0 {
        if x < 1.0 {
            0.0
        } else if x == 1.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        math::powf(x, 1.0 / (1.0 - alpha))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Xi {
    pub value: f64,
    /// The threshold is at least 1, so no task excess in `[0, 1]` passes it
    /// except possibly 1 itself.
    pub vacuous: bool,
}

/// The consistency threshold `ξ_{m,k}` for exponent `alpha` and constant `c_mt`.
pub fn xi_threshold(m: usize, k: usize, c1: f64, c2: f64, alpha: f64, c_mt: f64) -> Xi {
    let mf = m as f64;
    let value = if alpha >= 1.0 {
        let need = 32.0 * f64::max(c_mt * c_mt, math::powf(c_mt, 4.0)) * log_term(k, c1, c2);
        if mf >= need {
            0.0
        } else {
            f64::INFINITY
        }
    } else if k == 2 {
        math::powf(32.0 * c_mt * c_mt / mf * math::ln(8.0 * (c1 + c2) / c1), 1.0 / (2.0 * (1.0 - alpha)))
    } else {
        4.0 * math::powf(32.0 * math::powf(c_mt, 4.0) / mf * log_term(k, c1, c2), alpha / (2.0 * (1.0 - alpha * alpha)))
    };
    Xi { value, vacuous: !(value < 1.0) }
}

/// `2 P(κ > M) + (4 c_MT e_m(M))^(1/(1-α))`.
pub fn thm1_gate(profile: &NoiseProfile, m: usize, k: usize, c1: f64, c2: f64, big_m: f64) -> f64 {
    let e = error_function(big_m, m, c1, c2, k);
    2.0 * profile.kappa_tail(big_m) + root_power(4.0 * profile.c_mt * e, profile.alpha)
}

/// The `M` balancing the two gate terms (1 for binary problems).
pub fn balanced_big_m(m: usize, k: usize, c1: f64, c2: f64, alpha: f64, c_mt: f64) -> f64 {
    if k == 2 {
        return 1.0;
    }
    let inner = 32.0 / m as f64 * log_term(k, c1, c2);
    math::powf(inner, -1.0 / (2.0 * (1.0 + alpha))) * math::powf(c_mt / 2.0, -(1.0 - alpha) / (1.0 + alpha))
}

pub const M_SWEEP: [f64; 4] = [1.0, 2.0, 5.0, 10.0];

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonRow {
    pub f_id: usize,
    pub task_excess: f64,
    pub surrogate_excess: f64,
    /// Smallest comparison gate over the candidate `M` values.
    pub gate: f64,
    /// `(16 / c1) * surrogate_excess`.
    pub bound_rhs: f64,
    pub gated: bool,
    pub xi_gated: bool,
    pub violated: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonReport {
    pub m: usize,
    pub big_m: Vec<f64>,
    pub xi: Xi,
    pub rows: Vec<ComparisonRow>,
    pub gated: usize,
    pub xi_gated: usize,
    pub violations: usize,
    /// Largest `task / surrogate` excess ratio among gated rows.
    pub max_gated_ratio: f64,
}

/// Checks `R(f) - R* <= (16/c1)(R_{φ,A_m}(f) - R*_{φ,A_m})` for each
/// hypothesis `f` (one score vector per support point) that clears the
/// comparison gate at some candidate `M` or the threshold `ξ_{m,k}`.
#[allow(clippy::too_many_arguments)]
pub fn verify_comparison(
    model: &FiniteModel,
    profile: &NoiseProfile,
    spec: &Surrogate,
    cert: &Certificate,
    loss: &TaskLoss,
    m: usize,
    hypotheses: &[Vec<Vec<f64>>],
    mode: LawMode,
    opts: &SearchOpts,
) -> Result<ComparisonReport> {
    let k = model.k();
    let dec = spec.decoder();
    let (c1, c2) = (cert.c1, cert.c2);
    let mut laws = Vec::with_capacity(model.len());
    let mut infs = Vec::with_capacity(model.len());
    for (x_id, p) in model.dists.iter().enumerate() {
        let law = witness_law(&mv_law_with(p, m, loss, mode, x_id as u64)?, cert);
        infs.push(spec.cond_inf(&law, Region::All, opts)?.value);
        laws.push(law);
    }
    let mut big_m: Vec<f64> = M_SWEEP.to_vec();
    big_m.push(balanced_big_m(m, k, c1, c2, profile.alpha, profile.c_mt));
    let gate = big_m.iter().map(|bm| thm1_gate(profile, m, k, c1, c2, *bm)).fold(f64::INFINITY, f64::min);
    let xi = xi_threshold(m, k, c1, c2, profile.alpha, profile.c_mt);
    let mut rows = Vec::with_capacity(hypotheses.len());
    for (f_id, f) in hypotheses.iter().enumerate() {
        if f.len() != model.len() {
            return Err(Error::DimensionMismatch { expected: model.len(), got: f.len() });
        }
        let (task, _) = task_excess(model, loss, f, &dec)?;
        let mut sur = 0.0;
        for (((w, law), inf), s) in model.weights.iter().zip(&laws).zip(&infs).zip(f) {
            sur += w * (spec.cond_risk(s, law)? - inf).max(0.0);
        }
        let rhs = 16.0 / c1 * sur;
        let gated = task >= gate;
        let xi_gated = task >= xi.value;
        let violated = (gated || xi_gated) && task > rhs + 1e-9;
        rows.push(ComparisonRow { f_id, task_excess: task, surrogate_excess: sur, gate, bound_rhs: rhs, gated, xi_gated, violated });
    }
    let gated = rows.iter().filter(|r| r.gated).count();
    let xi_gated = rows.iter().filter(|r| r.xi_gated).count();
    let violations = rows.iter().filter(|r| r.violated).count();
    let max_gated_ratio = rows
        .iter()
        .filter(|r| (r.gated || r.xi_gated) && r.task_excess > 0.0)
        .map(|r| if r.surrogate_excess > 0.0 { r.task_excess / r.surrogate_excess } else { f64::INFINITY })
        .fold(0.0, f64::max);
    Ok(ComparisonReport { m, big_m, xi, rows, gated, xi_gated, violations, max_gated_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::{label_law, make_cert_margin, ScalarLoss};
    use crate::task::Decoder;
    use proptest::prelude::*;
    use std::vec;

    fn dist(p: &[f64]) -> FiniteDist {
        FiniteDist::new(p.to_vec()).unwrap()
    }

    fn single(p: &[f64]) -> FiniteModel {
        FiniteModel::new(vec![1.0], vec![dist(p)]).unwrap()
    }

    #[test]
    fn mv_table_matches_direct_enumeration() {
        let p = dist(&[0.5, 0.3, 0.2]);
        for ties in [TieRule::LowestIndex, TieRule::Split] {
            for m in [1, 2, 4, 7] {
                let t = MvTable::new(3, m, &TaskLoss::ZeroOne, ties).unwrap();
                let a = t.law(p.probs());
                let b = mv_law_ties(&p, m, &TaskLoss::ZeroOne, ties).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() < 1e-13);
                }
            }
        }
        assert_eq!(MvTable::new(3, 4, &TaskLoss::ZeroOne, TieRule::Split).unwrap().len(), 15);
        let pm = MvTable::new(3, 5, &TaskLoss::ZeroOne, TieRule::Split).unwrap().law(&[0.0, 1.0, 0.0]);
        assert_eq!(pm, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn noise_profile_examples() {
        let pr = noise_profile(&single(&[0.3, 0.7]), &TaskLoss::ZeroOne, 0.0).unwrap();
        assert!((pr.points[0].delta - 0.4).abs() < 1e-12);
        assert_eq!(pr.points[0].kappa, 1.0);
        assert_eq!(pr.points[0].y_star, 1);
        let pr = noise_profile(&single(&[0.5, 0.3, 0.2]), &TaskLoss::ZeroOne, 0.0).unwrap();
        assert!((pr.points[0].delta - 0.2).abs() < 1e-12);
        assert!((pr.points[0].kappa - 1.5).abs() < 1e-12);
        let pr = noise_profile(&single(&[0.5, 0.25, 0.25]), &TaskLoss::ZeroOne, 0.0).unwrap();
        assert!((pr.points[0].kappa - 1.0).abs() < 1e-12);
        assert_eq!(pr.c_mt, 1.0);
        let two = FiniteModel::new(vec![0.5, 0.5], vec![dist(&[0.6, 0.4]), dist(&[0.5, 0.5])]).unwrap();
        assert_eq!(noise_profile(&two, &TaskLoss::ZeroOne, 0.5), Err(Error::NonUniqueBayes(vec![1])));
    }

    #[test]
    fn m_beta_examples() {
        let model = FiniteModel::new(vec![0.5, 0.5], vec![dist(&[0.35, 0.65]), dist(&[0.1, 0.9])]).unwrap();
        let pr = noise_profile(&model, &TaskLoss::ZeroOne, 1.0).unwrap();
        // min Δ = 0.3
        assert!((fit_m_beta(&pr, f64::INFINITY) - 1.0 / 0.3).abs() < 1e-12);
        // α = 1: worst subset is the low-margin point alone
        assert!((pr.c_mt - 1.0 / 0.3).abs() < 1e-12);
        assert_eq!(fit_m_beta(&pr, 0.0), 1.0);
    }

    #[test]
    fn beta_to_alpha_equivalence() {
        // two Δ levels 0.1 and 0.6 with mass 0.3 / 0.7
        let model = FiniteModel::new(vec![0.3, 0.7], vec![dist(&[0.45, 0.55]), dist(&[0.2, 0.8])]).unwrap();
        for beta in [0.5, 1.0, 3.0] {
            let alpha = alpha_from_beta(beta);
            assert!((beta_from_alpha(alpha) - beta).abs() < 1e-12);
            let pr = noise_profile(&model, &TaskLoss::ZeroOne, alpha).unwrap();
            let c = fit_m_beta(&pr, beta);
            // analytic tail: max(0.3^(1/β)/0.1, 1/0.6)
            let expect = f64::max(0.3f64.powf(1.0 / beta) / 0.1, 1.0 / 0.6);
            assert!((c - expect).abs() < 1e-12);
            assert!(pr.c_mt <= c_alpha_from_beta(c, beta) + 1e-12, "{} vs {}", pr.c_mt, c_alpha_from_beta(c, beta));
        }
    }

    #[test]
    fn mv_law_examples() {
        let law = mv_law(&dist(&[0.2, 0.8]), 3, &TaskLoss::ZeroOne).unwrap();
        assert!((law[1] - 0.896).abs() < 1e-12 && (law[0] - 0.104).abs() < 1e-12);
        let p = dist(&[0.5, 0.3, 0.2]);
        let law = mv_law(&p, 1, &TaskLoss::ZeroOne).unwrap();
        for (a, b) in law.iter().zip(p.probs()) {
            assert!((a - b).abs() < 1e-12);
        }
        // ties to the lowest index: m = 2, binary fair coin
        let law = mv_law(&dist(&[0.5, 0.5]), 2, &TaskLoss::ZeroOne).unwrap();
        assert!((law[0] - 0.75).abs() < 1e-12);
        assert!(matches!(mv_law(&dist(&[0.25; 4]), 400, &TaskLoss::ZeroOne), Err(Error::EnumerationTooLarge { .. })));
        let law = mv_law(&dist(&[0.6, 0.2, 0.2]), 200, &TaskLoss::ZeroOne).unwrap();
        assert!(law[0] >= 0.99);
    }

    #[test]
    fn split_ties_are_symmetric() {
        let law = mv_law_ties(&dist(&[0.45, 0.55]), 2, &TaskLoss::ZeroOne, TieRule::Split).unwrap();
        assert!((law[1] - 0.55).abs() < 1e-12);
        let law = mv_law_ties(&dist(&[0.33, 0.34, 0.33]), 3, &TaskLoss::ZeroOne, TieRule::Split).unwrap();
        assert_eq!(math::argmax(&law), 1);
        assert!((law[0] - law[2]).abs() < 1e-12);
        let low = mv_law(&dist(&[0.33, 0.34, 0.33]), 3, &TaskLoss::ZeroOne).unwrap();
        assert_eq!(math::argmax(&low), 0);
    }

    #[test]
    fn mc_law_agrees_with_exact() {
        let p = dist(&[0.45, 0.35, 0.2]);
        let exact = mv_law(&p, 7, &TaskLoss::ZeroOne).unwrap();
        let (mc, se) = mv_law_mc(&p, 7, &TaskLoss::ZeroOne, 20_000, 42, 3).unwrap();
        for i in 0..3 {
            assert!((exact[i] - mc[i]).abs() <= 4.0 * se[i] + 1e-12, "{i}: {} vs {}", exact[i], mc[i]);
        }
        assert_eq!(mv_law_mc(&p, 7, &TaskLoss::ZeroOne, 100, 42, 3), mv_law_mc(&p, 7, &TaskLoss::ZeroOne, 100, 42, 3));
    }

    #[test]
    fn excess_agg_surrogate_examples() {
        let (spec, cert) = make_cert_margin(&ScalarLoss::Hinge, 1.0).unwrap();
        let opts = SearchOpts::default();
        let law = witness_law(&mv_law(&dist(&[0.2, 0.8]), 3, &TaskLoss::ZeroOne).unwrap(), &cert);
        // 0.896 φ(-1) + 0.104 φ(1) - inf, inf = 2 * 0.104 at s = 1
        let v = excess_agg_surrogate(&spec, &law, &[-1.0], &opts).unwrap();
        assert!((v - (0.896 * 2.0 - 0.208)).abs() < 1e-12, "{v}");
        // deterministic labels: zero at the anchor
        let law = witness_law(&mv_law(&dist(&[0.0, 1.0]), 5, &TaskLoss::ZeroOne).unwrap(), &cert);
        assert_eq!(excess_agg_surrogate(&spec, &law, &[1.0], &opts).unwrap(), 0.0);
        // m = 1 is the plain conditional excess
        let law = witness_law(&mv_law(&dist(&[0.3, 0.7]), 1, &TaskLoss::ZeroOne).unwrap(), &cert);
        let plain = label_law(&[0.3, 0.7]);
        let a = excess_agg_surrogate(&spec, &law, &[0.3], &opts).unwrap();
        let b = spec.cond_risk(&[0.3], &plain).unwrap() - 0.6;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn hinge_calibration_without_aggregation() {
        let spec = Surrogate::Margin(ScalarLoss::Hinge);
        let p = dist(&[0.75, 0.25]);
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let c = calibration_curve(&spec, &label_law(p.probs()), &p, &TaskLoss::ZeroOne, &grid, &SearchOpts::default()).unwrap();
        assert_eq!(c.psi_raw[0], 0.0);
        assert!(c.truncated);
        // grid oracle for the raw value at ε = 0.3: inf over s >= 0 minus inf over all
        let risk = |s: f64| 0.75 * f64::max(1.0 + s, 0.0) + 0.25 * f64::max(1.0 - s, 0.0);
        let wrong = (0..=50_000).map(|i| risk(i as f64 * 1e-4)).fold(f64::INFINITY, f64::min);
        let all = (0..=100_000).map(|i| risk(-5.0 + i as f64 * 1e-4)).fold(f64::INFINITY, f64::min);
        assert!((c.psi_raw[30] - (wrong - all)).abs() < 1e-9);
        for (i, e) in [(10, 0.1), (30, 0.3)] {
            assert!((c.psi_convex[i] - e).abs() < 1e-12, "{}", c.psi_convex[i]);
        }
        assert_eq!(c.psi_raw[60], f64::INFINITY);
    }

    #[test]
    fn minorant_examples() {
        let xs = [0.0, 0.25, 0.5, 0.75, 1.0];
        let ys = [0.0, 0.5, 0.5, 0.6, f64::INFINITY];
        let h = convex_minorant(&xs, &ys);
        assert_eq!(h[4], f64::INFINITY);
        assert!((h[1] - 0.2).abs() < 1e-12 && (h[3] - 0.6).abs() < 1e-12);
        // decreasing start gets flattened
        let h = convex_minorant(&[0.1, 0.2, 0.3], &[0.5, 0.1, 0.4]);
        assert_eq!(h, vec![0.1, 0.1, 0.4]);
    }

    #[test]
    fn error_function_and_xi_examples() {
        let e = error_function(1.0, 8, 1.0, 2.0, 2);
        assert!((e - 0.891_354_8).abs() < 1e-6, "{e}");
        assert!((error_function(2.0, 8, 1.0, 2.0, 2) - 2.0 * e).abs() < 1e-15);
        assert!(error_function(1.0, 1 << 40, 1.0, 2.0, 2) < 1e-5);
        let xi = xi_threshold(1000, 2, 1.0, 2.0, 0.5, 1.0);
        assert!((xi.value - 0.032 * 24f64.ln()).abs() < 1e-12, "{}", xi.value);
        assert!(!xi.vacuous);
        let xi4 = xi_threshold(4000, 2, 1.0, 2.0, 0.5, 1.0);
        assert!((xi4.value / xi.value - 0.25).abs() < 1e-12);
        let z = xi_threshold(10, 3, 1.0, 2.0, 0.0, 1.0);
        assert_eq!(z.value, 4.0);
        assert!(z.vacuous);
        let need = 32.0 * 36f64.ln();
        assert_eq!(xi_threshold(need.ceil() as usize, 3, 1.0, 2.0, 1.0, 1.0).value, 0.0);
        assert_eq!(xi_threshold(need.floor() as usize, 3, 1.0, 2.0, 1.0, 1.0).value, f64::INFINITY);
    }

    #[test]
    fn balanced_m_equalizes_terms() {
        let (k, c1, c2, alpha, c) = (3, 1.0, 2.0, 0.6, 1.3);
        let m = 500;
        let bm = balanced_big_m(m, k, c1, c2, alpha, c);
        let tail = 2.0 * (c / bm).powf(alpha / (1.0 - alpha));
        let second = (4.0 * c * error_function(bm, m, c1, c2, k)).powf(1.0 / (1.0 - alpha));
        assert!((tail - second).abs() < 1e-9 * tail, "{tail} vs {second}");
        assert!(tail + second <= xi_threshold(m, k, c1, c2, alpha, c).value + 1e-12);
    }

    fn rand_model(seed: u64, n: usize, k: usize) -> FiniteModel {
        let mut r = Stream::new(seed, 0, 0);
        let mut dists = Vec::new();
        for _ in 0..n {
            // a clear mode keeps Δ away from zero
            let mut w: Vec<f64> = (0..k).map(|_| r.uniform()).collect();
            let top = r.below(k);
            w[top] += 1.0 + r.uniform();
            dists.push(FiniteDist::from_weights(w).unwrap());
        }
        let weights = (0..n).map(|_| 0.2 + r.uniform()).collect();
        FiniteModel::new(weights, dists).unwrap()
    }

    #[test]
    fn calibration_lower_bound_holds() {
        let (spec, cert) = make_cert_margin(&ScalarLoss::Logistic, 1.0).unwrap();
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let model = rand_model(5, 6, 2);
        let pr = noise_profile(&model, &TaskLoss::ZeroOne, 0.0).unwrap();
        for m in [1, 3, 9, 41] {
            for (p, np) in model.dists.iter().zip(&pr.points) {
                let law = witness_law(&mv_law(p, m, &TaskLoss::ZeroOne).unwrap(), &cert);
                let c = calibration_curve(&spec, &law, p, &TaskLoss::ZeroOne, &grid, &SearchOpts::default()).unwrap();
                for (e, v) in grid.iter().zip(&c.psi_raw) {
                    assert!(*v >= calibration_lower_bound(cert.c1, cert.c2, 2, m, *e, np.kappa) - 1e-6);
                    if *e > 0.0 && *e >= error_function(np.kappa, m, cert.c1, cert.c2, 2) {
                        assert!(*v >= cert.c1 / 2.0 - 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn comparison_examples() {
        let (spec, cert) = make_cert_margin(&ScalarLoss::Hinge, 1.0).unwrap();
        let model = FiniteModel::new(vec![0.2; 5], [0.95, 0.05, 0.9, 0.92, 0.04].iter().map(|q| dist(&[1.0 - q, *q])).collect()).unwrap();
        let pr = noise_profile(&model, &TaskLoss::ZeroOne, 0.9).unwrap();
        let bayes: Vec<Vec<f64>> = pr.points.iter().map(|p| cert.anchors[p.y_star].clone()).collect();
        let wrong: Vec<Vec<f64>> = pr.points.iter().map(|p| cert.anchors[1 - p.y_star].clone()).collect();
        let mut r = Stream::new(1, 0, 0);
        let mut hyps = vec![bayes, wrong];
        for _ in 0..200 {
            hyps.push((0..5).map(|_| vec![4.0 * r.uniform() - 2.0]).collect());
        }
        let rep = verify_comparison(&model, &pr, &spec, &cert, &TaskLoss::ZeroOne, 1001, &hyps, LawMode::Exact, &SearchOpts::default()).unwrap();
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.rows[0].task_excess, 0.0);
        assert!(rep.rows[1].gated);
        assert!(rep.max_gated_ratio <= 16.0 / cert.c1);
        let rep = verify_comparison(&model, &pr, &spec, &cert, &TaskLoss::ZeroOne, 15, &hyps, LawMode::Exact, &SearchOpts::default()).unwrap();
        assert_eq!(rep.violations, 0);
    }

    proptest! {
        #[test]
        fn kappa_bounded_by_inverse_delta(seed in any::<u64>(), k in 2usize..5) {
            let model = rand_model(seed, 4, k);
            let pr = noise_profile(&model, &TaskLoss::ZeroOne, 0.5).unwrap();
            for p in &pr.points {
                prop_assert!(p.kappa >= 1.0 && p.kappa <= 1.0 / p.delta + 1e-12);
            }
        }

        #[test]
        fn calibration_curve_invariants(seed in any::<u64>(), m in 1usize..8) {
            let model = rand_model(seed, 1, 3);
            let p = &model.dists[0];
            let spec = Surrogate::MulticlassLogistic { k: 3 };
            let law = label_law(&mv_law(p, m, &TaskLoss::ZeroOne).unwrap());
            let grid: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
            let c = calibration_curve(&spec, &law, p, &TaskLoss::ZeroOne, &grid, &SearchOpts::default()).unwrap();
            prop_assert_eq!(c.psi_raw[0], 0.0);
            prop_assert_eq!(c.psi_convex[0], 0.0);
            for i in 0..grid.len() {
                prop_assert!(c.psi_raw[i] >= 0.0);
                prop_assert!(c.psi_convex[i] <= c.psi_raw[i] + 1e-9);
                if i > 0 {
                    prop_assert!(c.psi_raw[i] >= c.psi_raw[i - 1]);
                    prop_assert!(c.psi_convex[i] >= c.psi_convex[i - 1] - 1e-12);
                }
            }
            let again = convex_minorant(&grid, &c.psi_convex);
            for (a, b) in again.iter().zip(&c.psi_convex) {
                prop_assert!(a == b || (a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn noise_conditions_hold_for_fitted_constants(seed in any::<u64>(), alpha in 0.0f64..1.0) {
            let model = rand_model(seed, 5, 3);
            let pr = noise_profile(&model, &TaskLoss::ZeroOne, alpha).unwrap();
            let mut r = Stream::new(seed, 1, 0);
            let hyps: Vec<Vec<Vec<f64>>> = (0..30).map(|_| (0..5).map(|_| (0..3).map(|_| r.normal()).collect()).collect()).collect();
            let grid: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
            let chk = check_noise_conditions(&pr, &model, &TaskLoss::ZeroOne, &Decoder::Argmax { k: 3 }, &hyps, &grid).unwrap();
            prop_assert!(chk.alpha_holds && chk.beta_holds);
            prop_assert!(chk.tightest_alpha_constant <= pr.c_mt * (1.0 + 1e-12));
        }
    }
}
