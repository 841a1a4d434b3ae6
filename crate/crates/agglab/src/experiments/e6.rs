//! Bipartite matching: the structured hinge certificate, then the comparison
//! inequality under generalized majority vote with the mistaken-edge loss.

use agglab_core::calibration::{noise_profile, verify_comparison, FiniteModel, LawMode};
use agglab_core::rng::Stream;
use agglab_core::scenarios::bipartite_noise_model;
use agglab_core::surrogate::{check_certificate, make_cert_bipartite, SearchOpts};
use agglab_core::task::{factorial, TaskLoss};

use crate::config::{E6Block, E6Config};
use crate::error::Result;
use crate::experiments::e4::{random_hypotheses, report_rows, ROW_COLUMNS};
use crate::report::{Check, Cmp, RunReport, Table};

const MODEL_STREAM: u64 = 0x6536;

fn model_for(n: usize, cfg: &E6Config, rng: &mut Stream) -> Result<FiniteModel> {
    let k = factorial(n);
    let dists = (0..cfg.support_points)
        .map(|_| {
            let y = rng.below(k);
            bipartite_noise_model(n, cfg.eta_max * rng.uniform(), y)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let weights = (0..cfg.support_points).map(|_| rng.uniform_open()).collect();
    Ok(FiniteModel::new(weights, dists)?)
}

pub fn run(cfg: &E6Config, seed: u64, report: &mut RunReport) -> Result<()> {
    let mut certs = Table::new("certificates", &["n", "c1", "c2", "valid", "worst_slack_1", "worst_slack_2"]);
    let mut summary = Table::new("summary", &["block", "n", "m", "gate", "xi", "gated", "violations", "max_gated_ratio"]);
    let mut rows = Table::new("rows", &ROW_COLUMNS);
    let mut ns: Vec<usize> = cfg.blocks.iter().chain(&cfg.extended).map(|b| b.n).collect();
    ns.sort_unstable();
    ns.dedup();
    for &n in &ns {
        let (spec, cert) = make_cert_bipartite(n)?;
        let cr = check_certificate(&spec, &cert, cfg.cert_radius, cfg.cert_grid)?;
        certs.push(vec![n.into(), cert.c1.into(), cert.c2.into(), cr.valid.into(), cr.worst_slack_1.into(), cr.worst_slack_2.into()]);
        report.check(Check::new(format!("N={n}: certificate worst slack (first inequality)"), cr.worst_slack_1, Cmp::Ge, 0.0));
        report.check(Check::new(format!("N={n}: certificate worst slack (second inequality)"), cr.worst_slack_2, Cmp::Ge, 0.0));
    }

    let mut totals = [(0usize, 0usize); 2];
    let mut stream = 0u64;
    let blocks: [(&[E6Block], &str); 2] = [(&cfg.blocks, ""), (&cfg.extended, "_ext")];
    for (set, (list, suffix)) in blocks.into_iter().enumerate() {
        for b in list {
            let tag = format!("n{}{suffix}", b.n);
            let mut rng = Stream::new(seed, MODEL_STREAM, stream);
            stream += 1;
            let loss = TaskLoss::MatchingHamming { n: b.n };
            let model = model_for(b.n, cfg, &mut rng)?;
            let profile = noise_profile(&model, &loss, 0.0)?;
            let (spec, cert) = make_cert_bipartite(b.n)?;
            let hyps = random_hypotheses(cfg.hypotheses, cfg.support_points, spec.dim(), 1.0, &mut rng);
            for &m in &b.m {
                let mode = LawMode::Auto { trials: cfg.mc_trials, seed };
                let r = verify_comparison(&model, &profile, &spec, &cert, &loss, m, &hyps, mode, &SearchOpts::default())?;
                report_rows(&mut rows, &tag, factorial(b.n), &r);
                let g = r.rows.iter().filter(|row| row.gated || row.xi_gated).count();
                summary.push(vec![
                    tag.as_str().into(),
                    b.n.into(),
                    m.into(),
                    r.rows[0].gate.into(),
                    r.xi.value.into(),
                    g.into(),
                    r.violations.into(),
                    r.max_gated_ratio.into(),
                ]);
                totals[set].0 += g;
                totals[set].1 += r.violations;
            }
        }
    }
    report.metric("gated_rows", totals[0].0 as f64);
    report.metric("gated_rows_extended", totals[1].0 as f64);
    report.check(Check::new("comparison inequality violations among gated hypotheses", (totals[0].1 + totals[1].1) as f64, Cmp::Eq, 0.0));
    if !cfg.extended.is_empty() {
        report.check(Check::new("gated hypotheses in the extended blocks", totals[1].0 as f64, Cmp::Ge, 1.0));
    }
    report.tables.push(certs);
    report.tables.push(summary);
    report.tables.push(rows);
    Ok(())
}
