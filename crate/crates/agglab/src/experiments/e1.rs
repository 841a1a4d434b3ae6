//! Pairwise convex surrogates on a ranking cycle and its perturbations.

use agglab_core::optimize::{minimize, Budget, Objective};
use agglab_core::rng::Stream;
use agglab_core::scenarios::{cycle_distribution, perturb_toward};
use agglab_core::surrogate::ScalarLoss;
use agglab_core::task::{order_by_score, pair_of, permutations, transition_scores, FiniteDist};

use crate::config::E1Config;
use crate::error::Result;
use crate::par;
use crate::report::{Check, Cmp, RunReport, Table};

const DIRECTION_STREAM: u64 = 0x6531;

/// `sum_(i,j) p_ij φ(s_i - s_j)` over sum-zero scores `s = (u, -Σu)`.
pub struct PairRisk<'a> {
    pub items: usize,
    pub p: &'a [f64],
    pub phi: &'a ScalarLoss,
}

impl PairRisk<'_> {
    pub fn scores(&self, u: &[f64]) -> Vec<f64> {
        let mut s = u.to_vec();
        s.push(-u.iter().sum::<f64>());
        s
    }
}

impl Objective for PairRisk<'_> {
    fn dim(&self) -> usize {
        self.items - 1
    }

    fn value(&self, u: &[f64]) -> f64 {
        let s = self.scores(u);
        self.p.iter().enumerate().map(|(l, w)| {
            let (i, j) = pair_of(self.items, l);
            if *w > 0.0 { w * self.phi.value(s[i] - s[j]) } else { 0.0 }
        }).sum()
    }

    fn value_grad(&self, u: &[f64], g: &mut [f64]) -> f64 {
        let s = self.scores(u);
        let mut gs = vec![0.0; self.items];
        let mut v = 0.0;
        for (l, w) in self.p.iter().enumerate() {
            if *w <= 0.0 {
                continue;
            }
            let (i, j) = pair_of(self.items, l);
            let t = s[i] - s[j];
            v += w * self.phi.value(t);
            let d = w * self.phi.deriv(t);
            gs[i] += d;
            gs[j] -= d;
        }
        let last = gs[self.items - 1];
        for (gi, gsi) in g.iter_mut().zip(&gs) {
            *gi = gsi - last;
        }
        v
    }

    fn is_smooth(&self) -> bool {
        self.phi.is_smooth()
    }
}

fn surrogate_min(items: usize, p: &FiniteDist, phi: &ScalarLoss, tol: f64) -> Result<Vec<f64>> {
    let obj = PairRisk { items, p: p.probs(), phi };
    let budget = Budget { max_iters: 200_000, tol, ..Budget::default() };
    let min = minimize(&obj, &vec![0.0; items - 1], &budget)?;
    Ok(obj.scores(&min.x))
}

/// The strict order of `s` (best first), or `None` when two entries are
/// within `gap` of each other.
fn strict_order(s: &[f64], gap: f64) -> Option<Vec<usize>> {
    let o = order_by_score(s);
    o.windows(2).all(|w| s[w[0]] - s[w[1]] > gap).then_some(o)
}

fn fmt_order(o: &Option<Vec<usize>>) -> String {
    match o {
        Some(o) => o.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(">"),
        None => "tie".into(),
    }
}

pub fn run(cfg: &E1Config, seed: u64, report: &mut RunReport) -> Result<()> {
    let items = cfg.items;
    let q = match &cfg.q {
        Some(q) => FiniteDist::from_weights(q.clone())?,
        None => FiniteDist::uniform(items),
    };
    let cycle = cycle_distribution(&q)?;
    let mut losses: Vec<(String, ScalarLoss)> =
        cfg.surrogates.iter().map(|c| (format!("{c:?}").to_lowercase(), c.loss())).collect();
    if let Some(pieces) = &cfg.custom {
        losses.push(("custom".into(), ScalarLoss::max_affine(pieces.iter().map(|p| (p[0], p[1])).collect())?));
    }
    let dirs: Vec<Vec<f64>> = (0..cfg.directions)
        .map(|t| {
            let mut s = Stream::new(seed, DIRECTION_STREAM, t as u64);
            (0..cycle.k()).map(|_| s.uniform_open()).collect()
        })
        .collect();

    let mut summary = Table::new("summary", &["surrogate", "cycle_min_norm", "level", "strict_cases", "disagreements"]);
    let mut toward = Table::new("perturb_toward", &["surrogate", "target", "level", "surrogate_order", "c1_order"]);
    for (name, phi) in &losses {
        let s0 = surrogate_min(items, &cycle, phi, cfg.opt_tol)?;
        let norm0 = s0.iter().map(|v| v * v).sum::<f64>().sqrt();
        report.metric(format!("{name}_cycle_min_norm"), norm0);
        report.check(Check::new(format!("{name}: cycle minimizer norm"), norm0, Cmp::Le, cfg.zero_tol));
        let mut total = 0usize;
        for &level in &cfg.levels {
            let rows = par::map(&dirs, |u| -> Result<(bool, bool)> {
                let w: Vec<f64> = cycle.probs().iter().zip(u).map(|(p, e)| p + e / level).collect();
                let p = FiniteDist::from_weights(w)?;
                let s = surrogate_min(items, &p, phi, cfg.opt_tol)?;
                let a = strict_order(&s, cfg.gap_tol);
                let b = strict_order(&transition_scores(&p, items)?, cfg.gap_tol);
                let strict = a.is_some() && b.is_some();
                Ok((strict, strict && a != b))
            });
            let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
            let strict = rows.iter().filter(|r| r.0).count();
            let dis = rows.iter().filter(|r| r.1).count();
            total += dis;
            summary.push(vec![name.as_str().into(), norm0.into(), level.into(), strict.into(), dis.into()]);
            for perm in permutations(items) {
                let p = perturb_toward(&cycle, items, &perm, level)?;
                let s = surrogate_min(items, &p, phi, cfg.opt_tol)?;
                toward.push(vec![
                    name.as_str().into(),
                    fmt_order(&Some(perm)).into(),
                    level.into(),
                    fmt_order(&strict_order(&s, cfg.gap_tol)).into(),
                    fmt_order(&strict_order(&transition_scores(&p, items)?, cfg.gap_tol)).into(),
                ]);
            }
        }
        report.metric(format!("{name}_disagreements"), total as f64);
        report.check(Check::new(format!("{name}: order disagreements with C·1 near the cycle"), total as f64, Cmp::Ge, 1.0));
    }
    report.note(format!(
        "perturbations p + U/level with U uniform on the {} ordered pairs, {} directions per level",
        cycle.k(),
        cfg.directions
    ));
    report.tables.push(summary);
    report.tables.push(toward);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use agglab_core::task::pair_index;

    #[test]
    fn gradient_matches_differences() {
        let p = FiniteDist::from_weights((1..=6).map(|v| v as f64).collect()).unwrap();
        let phi = ScalarLoss::Logistic;
        let obj = PairRisk { items: 3, p: p.probs(), phi: &phi };
        let u = [0.3, -0.7];
        let mut g = [0.0; 2];
        obj.value_grad(&u, &mut g);
        for i in 0..2 {
            let mut a = u;
            let mut b = u;
            a[i] += 1e-6;
            b[i] -= 1e-6;
            assert!(((obj.value(&a) - obj.value(&b)) / 2e-6 - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn dominant_pairs_set_the_order() {
        let mut w = vec![0.01; 6];
        w[pair_index(3, 2, 0)] = 1.0;
        w[pair_index(3, 2, 1)] = 1.0;
        w[pair_index(3, 0, 1)] = 1.0;
        let p = FiniteDist::from_weights(w).unwrap();
        let s = surrogate_min(3, &p, &ScalarLoss::Logistic, 1e-12).unwrap();
        assert_eq!(strict_order(&s, 1e-9), Some(vec![2, 0, 1]));
        assert!(s.iter().sum::<f64>().abs() < 1e-12);
    }
}
