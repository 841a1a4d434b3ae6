//! Nearest-neighbour label aggregation on `[0, 1]` with a piecewise-constant
//! label law, followed by a per-cell multinomial logistic fit on the
//! aggregated training labels.

use agglab_core::aggregate::{generalized_majority_vote, knn_aggregate};
use agglab_core::math;
use agglab_core::optimize::{minimize, Budget, Objective};
use agglab_core::rng::Stream;
use agglab_core::task::{Decoder, FiniteDist, TaskLoss};

use crate::config::E7Config;
use crate::error::{LabError, Result};
use crate::par;
use crate::report::{Check, Cmp, RunReport, Table};
use crate::stats::mean_se;

const TRAIN_STREAM: u64 = 0x6537;
const CELL_RIDGE: f64 = 1e-6;

struct Law {
    pieces: Vec<FiniteDist>,
}

impl Law {
    fn piece(&self, x: f64) -> usize {
        ((x * self.pieces.len() as f64) as usize).min(self.pieces.len() - 1)
    }

    fn bayes(&self, x: f64) -> usize {
        self.pieces[self.piece(x)].argmax()
    }
}

/// Multinomial logistic risk on one cell with label frequencies `freq`,
/// scores `(s, 0)`.
struct CellRisk<'a> {
    freq: &'a [f64],
}

impl Objective for CellRisk<'_> {
    fn dim(&self) -> usize {
        self.freq.len() - 1
    }

    fn value(&self, s: &[f64]) -> f64 {
        let mut g = vec![0.0; s.len()];
        self.value_grad(s, &mut g)
    }

    fn value_grad(&self, s: &[f64], g: &mut [f64]) -> f64 {
        let mut z = s.to_vec();
        z.push(0.0);
        let mut p = vec![0.0; z.len()];
        math::softmax(&z, &mut p);
        let total: f64 = self.freq.iter().sum();
        let mut v = total * math::log_sum_exp(&z) + CELL_RIDGE * s.iter().map(|x| x * x).sum::<f64>();
        for (j, gj) in g.iter_mut().enumerate() {
            v -= self.freq[j] * z[j];
            *gj = total * p[j] - self.freq[j] + 2.0 * CELL_RIDGE * s[j];
        }
        v
    }
}

/// Majority vote over the `kk` nearest training points of `anchor`,
/// optionally leaving one index out.
fn knn_vote(anchor: f64, xs: &[f64], ys: &[usize], kk: usize, skip: Option<usize>, k: usize) -> Result<usize> {
    let mut d: Vec<(f64, usize)> =
        xs.iter().enumerate().filter(|(i, _)| Some(*i) != skip).map(|(i, x)| ((x - anchor) * (x - anchor), i)).collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    d.select_nth_unstable_by(kk - 1, cmp);
    let near: Vec<usize> = d[..kk].iter().map(|(_, i)| ys[*i]).collect();
    Ok(generalized_majority_vote(&near, &TaskLoss::ZeroOne, k)?)
}

struct Trial {
    disagreement: f64,
    excess: f64,
}

fn trial(cfg: &E7Config, law: &Law, n: usize, seed: u64, t: u64) -> Result<Trial> {
    let k = law.pieces[0].k();
    let kk = ((n as f64).sqrt().round() as usize).clamp(1, n - 1);
    let mut rng = Stream::new(seed, TRAIN_STREAM + n as u64, t);
    let xs: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    let ys: Vec<usize> = xs.iter().map(|x| rng.categorical(law.pieces[law.piece(*x)].probs())).collect();
    let points: Vec<Vec<f64>> = xs.iter().map(|x| vec![*x]).collect();

    let mut wrong = 0usize;
    for i in 0..cfg.probes {
        let x = (i as f64 + 0.5) / cfg.probes as f64;
        if knn_aggregate(&[x], &points, &ys, kk, &TaskLoss::ZeroOne, k)? != law.bayes(x) {
            wrong += 1;
        }
    }

    let agg = (0..n).map(|i| knn_vote(xs[i], &xs, &ys, kk, Some(i), k)).collect::<Result<Vec<_>>>()?;
    let mut freq = vec![vec![0.0; k]; cfg.cells];
    for (x, a) in xs.iter().zip(&agg) {
        let c = ((x * cfg.cells as f64) as usize).min(cfg.cells - 1);
        freq[c][*a] += 1.0;
    }
    let dec = Decoder::ArgmaxPadded { k };
    let budget = Budget { max_iters: 10_000, tol: 1e-10, ..Budget::default() };
    let mut excess = 0.0;
    for (c, f) in freq.iter().enumerate() {
        let s = minimize(&CellRisk { freq: f }, &vec![0.0; k - 1], &budget)?.x;
        let yhat = dec.decode(&s)?;
        let p = &law.pieces[law.piece((c as f64 + 0.5) / cfg.cells as f64)];
        excess += (p.probs()[p.argmax()] - p.probs()[yhat]) / cfg.cells as f64;
    }
    Ok(Trial { disagreement: wrong as f64 / cfg.probes as f64, excess })
}

pub fn run(cfg: &E7Config, seed: u64, report: &mut RunReport) -> Result<()> {
    let pieces = cfg.pieces.iter().map(|p| FiniteDist::new(p.clone())).collect::<std::result::Result<Vec<_>, _>>()?;
    let law = Law { pieces };
    let min_delta = law
        .pieces
        .iter()
        .map(|p| {
            let mut s = p.probs().to_vec();
            s.sort_by(|a, b| b.total_cmp(a));
            s[0] - s[1]
        })
        .fold(f64::INFINITY, f64::min);
    if min_delta < cfg.min_delta {
        return Err(LabError::Config(format!("piece laws have margin {min_delta}, below min_delta = {}", cfg.min_delta)));
    }
    report.metric("min_delta", min_delta);
    let mut table = Table::new("sizes", &["n", "K", "disagreement", "disagreement_se", "task_excess", "task_excess_se"]);
    let mut res = Vec::new();
    for &n in &cfg.ns {
        let trials = par::map_range(cfg.trials, |t| trial(cfg, &law, n, seed, t as u64)).into_iter().collect::<Result<Vec<_>>>()?;
        let (d, dse) = mean_se(&trials.iter().map(|t| t.disagreement).collect::<Vec<_>>());
        let (e, ese) = mean_se(&trials.iter().map(|t| t.excess).collect::<Vec<_>>());
        let kk = ((n as f64).sqrt().round() as usize).clamp(1, n - 1);
        table.push(vec![n.into(), kk.into(), d.into(), dse.into(), e.into(), ese.into()]);
        report.metric(format!("disagreement_n{n}"), d);
        report.metric(format!("disagreement_se_n{n}"), dse);
        report.metric(format!("task_excess_n{n}"), e);
        res.push((n, d, dse, e));
    }
    let z = cfg.se_mult;
    if res.len() > 1 {
        let step = res
            .windows(2)
            .map(|w| w[0].1 - w[1].1 + z * (w[0].2 * w[0].2 + w[1].2 * w[1].2).sqrt())
            .fold(f64::INFINITY, f64::min);
        report.check(Check::new(format!("min decrease of disagreement over n, plus {z}se"), step, Cmp::Ge, 0.0));
    }
    let &(n_last, d_last, _, e_last) = res.last().ok_or_else(|| LabError::Config("`ns` is empty".into()))?;
    report.check(Check::new(format!("n={n_last}: disagreement with the Bayes label"), d_last, Cmp::Le, cfg.max_disagreement));
    report.check(Check::new(format!("n={n_last}: task excess of the per-cell fit"), e_last, Cmp::Le, cfg.excess_tol));
    report.tables.push(table);
    Ok(())
}
