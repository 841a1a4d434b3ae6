//! Squared loss against ranking frequency aggregates: the minimizer is the
//! conditional mean of the aggregate, which should order items like `C·1`.

use agglab_core::aggregate::{ranking_frequency_aggregate, Aggregate};
use agglab_core::rng::Stream;
use agglab_core::scenarios::{random_comparison_dist, sample_labels};
use agglab_core::task::{order_by_score, transition_scores, FiniteDist};

use crate::config::E2Config;
use crate::error::{LabError, Result};
use crate::par;
use crate::report::{Check, Cmp, RunReport, Table};

const DIST_STREAM: u64 = 0x6532;
/// Label streams use `x_id = LABEL_BASE + distribution index`.
const LABEL_BASE: u64 = 0x6532_0000;

fn min_gap(c: &[f64]) -> f64 {
    let o = order_by_score(c);
    o.windows(2).map(|w| c[w[0]] - c[w[1]]).fold(f64::INFINITY, f64::min)
}

/// Mean and standard error of the non-`⋆` aggregates, plus the `⋆` rate.
fn aggregate_mean(p: &FiniteDist, items: usize, m: usize, trials: usize, seed: u64, x_id: u64) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let sums = par::chunked_sum(trials, 2 * items + 1, |range, acc| {
        for t in range {
            let z = sample_labels(p, m, seed, x_id, t as u64);
            if let Ok(Aggregate::Scores(s)) = ranking_frequency_aggregate(&z, items) {
                acc[2 * items] += 1.0;
                for (i, v) in s.iter().enumerate() {
                    acc[i] += v;
                    acc[items + i] += v * v;
                }
            }
        }
    });
    let n = sums[2 * items];
    if n < 2.0 {
        return Err(LabError::Budget(format!("only {n} non-star aggregates out of {trials}")));
    }
    let mean: Vec<f64> = sums[..items].iter().map(|s| s / n).collect();
    let se = (0..items)
        .map(|i| {
            let var = (sums[items + i] - n * mean[i] * mean[i]) / (n - 1.0);
            (var.max(0.0) / n).sqrt()
        })
        .collect();
    Ok((mean, se, 1.0 - n / trials as f64))
}

pub fn run(cfg: &E2Config, seed: u64, report: &mut RunReport) -> Result<()> {
    let items = cfg.items;
    let m = cfg.m.unwrap_or(2 * items);
    let mut rng = Stream::new(seed, DIST_STREAM, 0);
    let mut dists = Vec::with_capacity(cfg.distributions);
    let mut draws = 0;
    while dists.len() < cfg.distributions {
        if draws == cfg.max_draws {
            return Err(LabError::Budget(format!(
                "found {} of {} distributions with C·1 gap >= {} in {} draws",
                dists.len(),
                cfg.distributions,
                cfg.min_gap,
                draws
            )));
        }
        draws += 1;
        let p = random_comparison_dist(items, &mut rng)?;
        let c = transition_scores(&p, items)?;
        if min_gap(&c) >= cfg.min_gap {
            dists.push((p, c));
        }
    }
    report.metric("candidate_draws", draws as f64);

    let mut table = Table::new("distributions", &["id", "c1", "mean_aggregate", "se", "max_z", "star_rate", "order_match"]);
    let mut worst_z: f64 = 0.0;
    let mut mismatches = 0usize;
    for (id, (p, c)) in dists.iter().enumerate() {
        let (mean, se, star) = aggregate_mean(p, items, m, cfg.trials, seed, LABEL_BASE + id as u64)?;
        let z = mean.iter().zip(c).zip(&se).map(|((a, b), s)| (a - b).abs() / s).fold(0.0, f64::max);
        worst_z = worst_z.max(z);
        let same = order_by_score(&mean) == order_by_score(c);
        if !same {
            mismatches += 1;
        }
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ");
        table.push(vec![id.into(), join(c).into(), join(&mean).into(), join(&se).into(), z.into(), star.into(), same.into()]);
    }
    report.metric("m", m as f64);
    report.metric("max_standardized_deviation", worst_z);
    report.check(Check::new("max |mean aggregate - C·1| / se over items and distributions", worst_z, Cmp::Le, cfg.se_mult));
    report.check(Check::new("distributions whose aggregate order differs from C·1", mismatches as f64, Cmp::Eq, 0.0));
    report.tables.push(table);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_mean_is_unbiased_for_c1() {
        let p = FiniteDist::from_weights(vec![0.3, 0.1, 0.05, 0.2, 0.25, 0.1]).unwrap();
        let c = transition_scores(&p, 3).unwrap();
        let (mean, se, star) = aggregate_mean(&p, 3, 6, 20_000, 7, 1).unwrap();
        assert!(star > 0.0 && star < 1.0);
        for i in 0..3 {
            assert!((mean[i] - c[i]).abs() < 4.0 * se[i], "{i}: {} vs {}", mean[i], c[i]);
        }
    }
}
