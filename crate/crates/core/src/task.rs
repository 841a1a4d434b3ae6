//! Label spaces, conditional label distributions, scores, decoders and task
//! losses.
//!
//! Labels are always indices `0..k`. Structured spaces fix an encoding:
//!
//! - ranking pairs over `n` items: `(i, j)` with `i != j`, enumerated row-major
//!   with the diagonal skipped, so `k = n(n-1)`;
//! - bipartite matchings on `2N` vertices: permutations of `0..N` in
//!   lexicographic order, so `k = N!`; permutation `π` matches left vertex
//!   `u` to right vertex `π(u)`.
//!
//! Every argmax/argmin over labels breaks ties toward the lowest index. The
//! sign decoder maps `s = 0` to the positive class.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Tolerance used when validating that probabilities sum to one.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Structure {
    Plain,
    RankingPairs { items: usize },
    BipartiteMatching { n: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabelSpace {
    k: usize,
    structure: Structure,
}

impl LabelSpace {
    pub fn plain(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(alloc::format!("label space needs k >= 2, got {k}")));
        }
        Ok(LabelSpace { k, structure: Structure::Plain })
    }

    pub fn ranking_pairs(items: usize) -> Result<Self> {
        if items < 2 {
            return Err(Error::InvalidArgument(alloc::format!("ranking needs >= 2 items, got {items}")));
        }
        Ok(LabelSpace { k: items * (items - 1), structure: Structure::RankingPairs { items } })
    }

    pub fn bipartite(n: usize) -> Result<Self> {
        if !(2..=10).contains(&n) {
            return Err(Error::InvalidArgument(alloc::format!("bipartite matching needs 2 <= N <= 10, got {n}")));
        }
        Ok(LabelSpace { k: factorial(n), structure: Structure::BipartiteMatching { n } })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn check(&self, label: usize) -> Result<usize> {
        if label < self.k {
            Ok(label)
        } else {
            Err(Error::InvalidLabel { label, k: self.k })
        }
    }
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Index of the ordered pair `(i, j)`, `i != j`, among `items` items.
pub fn pair_index(items: usize, i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < items && j < items);
    i * (items - 1) + if j < i { j } else { j - 1 }
}

/// Inverse of [`pair_index`].
pub fn pair_of(items: usize, idx: usize) -> (usize, usize) {
    let i = idx / (items - 1);
    let r = idx % (items - 1);
    (i, if r < i { r } else { r + 1 })
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(factorial(n));
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        // next lexicographic permutation
        let mut i = n.wrapping_sub(1);
        while i > 0 && p[i - 1] >= p[i] {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        let mut j = n - 1;
        while p[j] <= p[i - 1] {
            j -= 1;
        }
        p.swap(i - 1, j);
        p[i..].reverse();
    }
    out
}

/// Lexicographic rank of a permutation (its label index).
pub fn permutation_rank(perm: &[usize]) -> usize {
    let n = perm.len();
    let mut rank = 0;
    for i in 0..n {
        let smaller = perm[i + 1..].iter().filter(|&&x| x < perm[i]).count();
        rank += smaller * factorial(n - 1 - i);
    }
    rank
}

/// Permutation with the given lexicographic rank.
pub fn permutation_unrank(n: usize, mut rank: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let f = factorial(n - 1 - i);
        out.push(pool.remove(rank / f));
        rank %= f;
    }
    out
}

/// Probability vector over a finite label set.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FiniteDist {
    probs: Vec<f64>,
}

impl FiniteDist {
    /// Validates non-negativity and unit mass within [`PROB_TOL`], then
    /// renormalizes.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(alloc::format!("entry {p} is negative or not finite")));
        }
        let total: f64 = probs.iter().sum();
        if math::abs(total - 1.0) > PROB_TOL {
            return Err(Error::InvalidDistribution(alloc::format!("mass {total} != 1")));
        }
        Ok(FiniteDist { probs: probs.into_iter().map(|p| p / total).collect() })
    }

    /// Normalizes an arbitrary non-negative weight vector.
    pub fn from_weights(w: Vec<f64>) -> Result<Self> {
        let total: f64 = w.iter().sum();
        if !(total > 0.0) || w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidDistribution("weights must be non-negative with positive mass".into()));
        }
        FiniteDist::new(w.into_iter().map(|x| x / total).collect())
    }

    pub fn point_mass(k: usize, label: usize) -> Self {
        let mut probs = vec![0.0; k];
        probs[label] = 1.0;
        FiniteDist { probs }
    }

    pub fn uniform(k: usize) -> Self {
        FiniteDist { probs: vec![1.0 / k as f64; k] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn argmax(&self) -> usize {
        math::argmax(&self.probs)
    }
}

/// A score vector `s ∈ R^d`, optionally constrained to sum to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Score {
    values: Vec<f64>,
    sum_zero: bool,
}

impl Score {
    pub fn new(values: Vec<f64>) -> Self {
        Score { values, sum_zero: false }
    }

    pub fn sum_zero(values: Vec<f64>) -> Result<Self> {
        let s: f64 = values.iter().sum();
        if math::abs(s) > 1e-10 {
            return Err(Error::InvalidArgument(alloc::format!("sum-zero score sums to {s}")));
        }
        Ok(Score { values, sum_zero: true })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_sum_zero(&self) -> bool {
        self.sum_zero
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decoder {
    /// `d = 1`; label 1 is the positive class, label 0 the negative.
    Sign,
    Argmax { k: usize },
    /// Orders `items` coordinates; the label is the lexicographic rank of the
    /// permutation listing items from highest to lowest score.
    RankingOrder { items: usize },
    /// Maximizes `<s, v(y)>` over matchings, `d = N^2`.
    MatchingArgmax { n: usize },
    /// Argmax over `(s_1, ..., s_{k-1}, 0)`: the last class has score fixed
    /// at zero, so `d = k - 1`.
    ArgmaxPadded { k: usize },
    /// `argmax_y <s, v(y)>` for an explicit row-major `k x d` embedding.
    Embedding { k: usize, d: usize, table: Vec<f64> },
}

impl Decoder {
    pub fn score_dim(&self) -> usize {
        match self {
            Decoder::Sign => 1,
            Decoder::Argmax { k } => *k,
            Decoder::RankingOrder { items } => *items,
            Decoder::MatchingArgmax { n } => n * n,
            Decoder::ArgmaxPadded { k } => k - 1,
            Decoder::Embedding { d, .. } => *d,
        }
    }

    pub fn num_labels(&self) -> usize {
        match self {
            Decoder::Sign => 2,
            Decoder::Argmax { k } => *k,
            Decoder::RankingOrder { items } => factorial(*items),
            Decoder::MatchingArgmax { n } => factorial(*n),
            Decoder::ArgmaxPadded { k } | Decoder::Embedding { k, .. } => *k,
        }
    }

    pub fn decode(&self, s: &[f64]) -> Result<usize> {
        if s.len() != self.score_dim() {
            return Err(Error::DimensionMismatch { expected: self.score_dim(), got: s.len() });
        }
        Ok(match self {
            Decoder::Sign => usize::from(s[0] >= 0.0),
            Decoder::Argmax { .. } => math::argmax(s),
            Decoder::RankingOrder { .. } => permutation_rank(&order_by_score(s)),
            Decoder::MatchingArgmax { n } if *n <= SMALL_MATCHING => small_matching_argmax(s, *n),
            Decoder::MatchingArgmax { n } => permutation_rank(&best_matching(s, *n)),
            Decoder::ArgmaxPadded { k } => {
                let mut best = 0;
                let mut best_v = s[0];
                for i in 1..*k {
                    let v = if i + 1 == *k { 0.0 } else { s[i] };
                    if v > best_v {
                        best_v = v;
                        best = i;
                    }
                }
                best
            }
            Decoder::Embedding { k, d, table } => {
                let mut best = 0;
                let mut best_v = f64::NEG_INFINITY;
                for y in 0..*k {
                    let v = math::dot(&table[y * d..(y + 1) * d], s);
                    if v > best_v {
                        best_v = v;
                        best = y;
                    }
                }
                best
            }
        })
    }
}

const SMALL_MATCHING: usize = 6;

/// Enumerates permutations in lexicographic order without allocating; the
/// first strict maximum is the lowest-index argmax.
fn small_matching_argmax(s: &[f64], n: usize) -> usize {
    let mut p = [0usize; SMALL_MATCHING];
    for (i, v) in p.iter_mut().enumerate().take(n) {
        *v = i;
    }
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    let mut rank = 0;
    loop {
        let v: f64 = (0..n).map(|u| s[u * n + p[u]]).sum();
        if v > best_v {
            best_v = v;
            best = rank;
        }
        rank += 1;
        let mut i = n - 1;
        while i > 0 && p[i - 1] >= p[i] {
            i -= 1;
        }
        if i == 0 {
            return best;
        }
        let mut j = n - 1;
        while p[j] <= p[i - 1] {
            j -= 1;
        }
        p.swap(i - 1, j);
        p[i..n].reverse();
    }
}

/// Item indices sorted by descending score, ties by lower index.
pub fn order_by_score(s: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx
}

/// Maximum-weight perfect matching value via the Hungarian algorithm on the
/// `n x n` weight matrix `w[u * n + v]` restricted to `rows`/`cols`.
fn assignment_value(w: &[f64], n: usize, rows: &[usize], cols: &[usize]) -> f64 {
    let r = rows.len();
    if r == 0 {
        return 0.0;
    }
    // minimize cost = -weight; potentials formulation (1-indexed)
    let cost = |i: usize, j: usize| -w[rows[i - 1] * n + cols[j - 1]];
    let inf = f64::INFINITY;
    let mut u = vec![0.0; r + 1];
    let mut v = vec![0.0; r + 1];
    let mut p = vec![0usize; r + 1];
    let mut way = vec![0usize; r + 1];
    for i in 1..=r {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; r + 1];
        let mut used = vec![false; r + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=r {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=r {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = 0.0;
    for j in 1..=r {
        total += w[rows[p[j] - 1] * n + cols[j - 1]];
    }
    total
}

/// Lexicographically smallest permutation attaining the maximum of
/// `sum_u s[u * n + π(u)]`.
pub fn best_matching(s: &[f64], n: usize) -> Vec<usize> {
    let all: Vec<usize> = (0..n).collect();
    let best = assignment_value(s, n, &all, &all);
    let scale = 1.0 + s.iter().fold(0.0f64, |m, x| m.max(math::abs(*x)));
    let tol = 1e-12 * scale * n as f64;
    let mut perm = Vec::with_capacity(n);
    let mut free_cols: Vec<usize> = all.clone();
    let mut acc = 0.0;
    for u in 0..n {
        let rows: Vec<usize> = (u + 1..n).collect();
        for (ci, &c) in free_cols.iter().enumerate() {
            let rest: Vec<usize> = free_cols.iter().enumerate().filter(|(i, _)| *i != ci).map(|(_, &x)| x).collect();
            let val = acc + s[u * n + c] + assignment_value(s, n, &rows, &rest);
            if val >= best - tol {
                perm.push(c);
                acc += s[u * n + c];
                free_cols.remove(ci);
                break;
            }
        }
    }
    perm
}

/// Edge-indicator embedding of a matching, row-major `N x N`.
pub fn matching_embedding(perm: &[usize]) -> Vec<f64> {
    let n = perm.len();
    let mut v = vec![0.0; n * n];
    for (u, &c) in perm.iter().enumerate() {
        v[u * n + c] = 1.0;
    }
    v
}

/// Task losses, all valued in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TaskLoss {
    ZeroOne,
    /// Mis-ordering indicator against the normalized transition matrix; acts
    /// on scores directly rather than on decoded labels.
    RankingDisagreement,
    /// Fraction of mistaken edges, `||v(y1) - v(y2)||_1 / (2N)`.
    MatchingHamming { n: usize },
    /// Row-major `k x k` table, entry `(yhat, y)` is `l(yhat, y)`.
    Table { k: usize, values: Vec<f64> },
}

impl TaskLoss {
    pub fn table(k: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != k * k {
            return Err(Error::DimensionMismatch { expected: k * k, got: values.len() });
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("task loss table entries must lie in [0, 1]".into()));
        }
        Ok(TaskLoss::Table { k, values })
    }

    /// `l(yhat, y)` for expectation-form losses.
    pub fn value(&self, yhat: usize, y: usize) -> f64 {
        match self {
            TaskLoss::ZeroOne => {
                if yhat == y {
                    0.0
                } else {
                    1.0
                }
            }
            TaskLoss::MatchingHamming { n } => {
                let a = permutation_unrank(*n, yhat);
                let b = permutation_unrank(*n, y);
                let diff = a.iter().zip(&b).filter(|(x, y)| x != y).count();
                // each wrong row contributes two differing edge indicators
                (2 * diff) as f64 / (2 * n) as f64
            }
            TaskLoss::Table { k, values } => values[yhat * k + y],
            TaskLoss::RankingDisagreement => f64::NAN,
        }
    }

    pub fn is_expectation_form(&self) -> bool {
        !matches!(self, TaskLoss::RankingDisagreement)
    }

    /// Dense `k x k` table of `l(yhat, y)`.
    pub fn matrix(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                out[a * k + b] = self.value(a, b);
            }
        }
        out
    }
}

/// `E_{Y~p}[l(yhat, Y)]` for every candidate `yhat`.
pub fn expected_losses(loss: &TaskLoss, p: &FiniteDist) -> Vec<f64> {
    let k = p.k();
    (0..k)
        .map(|yhat| p.probs().iter().enumerate().map(|(y, py)| if *py > 0.0 { py * loss.value(yhat, y) } else { 0.0 }).sum())
        .collect()
}

/// Normalized transition matrix `C` (row-major `items x items`) built from a
/// distribution over ranking pairs; `0/0` columns become `1/(items-1)`.
pub fn transition_matrix(p: &FiniteDist, items: usize) -> Result<Vec<f64>> {
    if p.k() != items * (items - 1) {
        return Err(Error::DimensionMismatch { expected: items * (items - 1), got: p.k() });
    }
    let mut c = vec![0.0; items * items];
    for j in 0..items {
        let col: f64 = (0..items).filter(|&i| i != j).map(|i| p.probs()[pair_index(items, i, j)]).sum();
        for i in 0..items {
            if i == j {
                continue;
            }
            c[i * items + j] = if col > 0.0 {
                p.probs()[pair_index(items, i, j)] / col
            } else {
                1.0 / (items - 1) as f64
            };
        }
    }
    Ok(c)
}

/// `C · 1`.
pub fn transition_scores(p: &FiniteDist, items: usize) -> Result<Vec<f64>> {
    let c = transition_matrix(p, items)?;
    Ok((0..items).map(|i| c[i * items..(i + 1) * items].iter().sum()).collect())
}

/// Ranking loss `max_{i<j} 1{(s_i - s_j) g_ij <= 0, g_ij != 0}` with
/// `g_ij = (e_i - e_j)^T C 1`.
pub fn ranking_loss(s: &[f64], c_one: &[f64]) -> f64 {
    let n = s.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let g = c_one[i] - c_one[j];
            if math::abs(g) > 1e-12 && (s[i] - s[j]) * g <= 0.0 {
                return 1.0;
            }
        }
    }
    0.0
}

/// Conditional task risk `R(s | x)`.
pub fn task_risk_conditional(loss: &TaskLoss, dec: &Decoder, s: &[f64], p: &FiniteDist) -> Result<f64> {
    match loss {
        TaskLoss::RankingDisagreement => {
            let items = match dec {
                Decoder::RankingOrder { items } => *items,
                _ => return Err(Error::InvalidArgument("ranking loss needs the ranking decoder".into())),
            };
            if s.len() != items {
                return Err(Error::DimensionMismatch { expected: items, got: s.len() });
            }
            Ok(ranking_loss(s, &transition_scores(p, items)?))
        }
        _ => {
            if p.k() != dec.num_labels() {
                return Err(Error::DimensionMismatch { expected: dec.num_labels(), got: p.k() });
            }
            let yhat = dec.decode(s)?;
            Ok(expected_losses(loss, p)[yhat])
        }
    }
}

/// Pointwise excess task risk `δ_l(s, x)`; the infimum over scores is taken
/// exactly by enumerating decodable labels.
pub fn excess_task_risk(loss: &TaskLoss, dec: &Decoder, s: &[f64], p: &FiniteDist) -> Result<f64> {
    match loss {
        TaskLoss::RankingDisagreement => {
            let items = match dec {
                Decoder::RankingOrder { items } => *items,
                _ => return Err(Error::InvalidArgument("ranking loss needs the ranking decoder".into())),
            };
            let c_one = transition_scores(p, items)?;
            let risk = task_risk_conditional(loss, dec, s, p)?;
            // candidates: every strict ordering, plus C·1 itself
            let mut best = ranking_loss(&c_one, &c_one);
            for perm in permutations(items) {
                let mut cand = vec![0.0; items];
                for (pos, &item) in perm.iter().enumerate() {
                    cand[item] = (items - pos) as f64;
                }
                best = best.min(ranking_loss(&cand, &c_one));
            }
            Ok(risk - best)
        }
        _ => {
            let risks = expected_losses(loss, p);
            let yhat = dec.decode(s)?;
            let best = risks.iter().cloned().fold(f64::INFINITY, f64::min);
            Ok(risks[yhat] - best)
        }
    }
}
