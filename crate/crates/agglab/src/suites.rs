//! Property suites outside the E1–E7 pipelines: certificate constants, the
//! Hoeffding envelope of majority vote, and the calibration lower bound.

use agglab_core::calibration::{calibration_curve, calibration_lower_bound, hoeffding_mv_bound, mv_law, noise_profile, witness_law, FiniteModel};
use agglab_core::rng::Stream;
use agglab_core::scenarios::rho_m_mc;
use agglab_core::surrogate::{check_certificate, make_cert_bipartite, make_cert_margin, ScalarLoss, SearchOpts};
use agglab_core::task::TaskLoss;

use crate::config::ScalarChoice;
use crate::error::Result;
use crate::experiments::e4::{random_law, surrogate_for};
use crate::report::{Check, Cmp, RunReport, Table};

const HOEFFDING_STREAM: u64 = 0x4f45;
const CALIB_STREAM: u64 = 0x4341;

/// Hinge margin certificate at `δ = 1` and its validation.
pub fn hinge_certificate() -> Result<RunReport> {
    let mut r = RunReport::new("hinge_certificate", 0, serde_json::json!({ "loss": "hinge", "delta": 1.0 }));
    let (spec, cert) = make_cert_margin(&ScalarLoss::Hinge, 1.0)?;
    let cr = check_certificate(&spec, &cert, 3.0, 61)?;
    r.check(Check::new("c1", cert.c1, Cmp::Eq, 1.0));
    r.check(Check::new("c2", cert.c2, Cmp::Eq, 2.0));
    r.check(Check::new("worst slack (first inequality)", cr.worst_slack_1, Cmp::Ge, -1e-9));
    r.check(Check::new("worst slack (second inequality)", cr.worst_slack_2, Cmp::Ge, -1e-9));
    Ok(r)
}

/// Matching certificates for each `N` in `ns`.
pub fn bipartite_certificates(ns: &[usize], radius: f64, grid: usize) -> Result<RunReport> {
    let mut r = RunReport::new("bipartite_certificate", 0, serde_json::json!({ "n": ns, "radius": radius, "grid": grid }));
    for &n in ns {
        let (spec, cert) = make_cert_bipartite(n)?;
        let cr = check_certificate(&spec, &cert, radius, grid)?;
        r.check(Check::new(format!("N={n}: c1 * N"), cert.c1 * n as f64, Cmp::Eq, 1.0));
        r.check(Check::new(format!("N={n}: c2"), cert.c2, Cmp::Eq, 2.0));
        r.check(Check::new(format!("N={n}: worst slack (first inequality)"), cr.worst_slack_1, Cmp::Ge, -1e-9));
        r.check(Check::new(format!("N={n}: worst slack (second inequality)"), cr.worst_slack_2, Cmp::Ge, -1e-9));
    }
    Ok(r)
}

/// Monte Carlo majority-vote error against `2k exp(-m Δ²/2)` on `cases`
/// random `(p, m)` pairs with `k <= 4`, `m <= 50`.
pub fn hoeffding_envelope(seed: u64, cases: usize, trials: usize, se_mult: f64) -> Result<RunReport> {
    let cfg = serde_json::json!({ "cases": cases, "trials": trials, "se_mult": se_mult });
    let mut r = RunReport::new("hoeffding", seed, cfg);
    let mut t = Table::new("cases", &["case", "k", "m", "p", "delta", "error_rate", "se", "bound"]);
    let mut rng = Stream::new(seed, HOEFFDING_STREAM, 0);
    let mut worst = f64::NEG_INFINITY;
    for case in 0..cases {
        let k = 2 + rng.below(3);
        let m = 1 + rng.below(50);
        let p = random_law(k, 0.05, false, &mut rng)?;
        let profile = noise_profile(&FiniteModel::new(vec![1.0], vec![p.clone()])?, &TaskLoss::ZeroOne, 0.0)?;
        let (delta, y) = (profile.points[0].delta, profile.points[0].y_star);
        let (law, se) = rho_m_mc(&p, m, trials, seed, HOEFFDING_STREAM + 1 + case as u64)?;
        let err = 1.0 - law[y];
        let bound = hoeffding_mv_bound(k, m, delta);
        worst = worst.max(err - se_mult * se[y] - bound);
        let probs = p.probs().iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(" ");
        t.push(vec![case.into(), k.into(), m.into(), probs.into(), delta.into(), err.into(), se[y].into(), bound.into()]);
    }
    r.check(Check::new(format!("max (error - {se_mult}se - bound)"), worst, Cmp::Le, 0.0));
    r.tables.push(t);
    Ok(r)
}

/// `ψ̄_{A_m}(ε, x)` against `c1 - 2k(c1 + c2) exp(-m ε² / (2κ²))` on
/// `models` random finite-support models, exact majority-vote laws.
pub fn calibration_bound(seed: u64, models: usize, ms: &[usize], tol: f64) -> Result<RunReport> {
    let cfg = serde_json::json!({ "models": models, "m": ms, "tol": tol });
    let mut r = RunReport::new("calibration_bound", seed, cfg);
    let mut t = Table::new("points", &["model", "x", "k", "m", "kappa", "eps", "psi", "bound"]);
    let grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
    let opts = SearchOpts::default();
    let mut worst = f64::NEG_INFINITY;
    let mut informative = 0usize;
    let mut rng = Stream::new(seed, CALIB_STREAM, 0);
    for id in 0..models {
        let k = 2 + id % 3;
        let points = 2 + rng.below(2);
        let dists = (0..points).map(|_| random_law(k, 0.1, false, &mut rng)).collect::<Result<Vec<_>>>()?;
        let model = FiniteModel::new(vec![1.0; points], dists)?;
        let profile = noise_profile(&model, &TaskLoss::ZeroOne, 0.0)?;
        let (spec, cert) = surrogate_for(k, ScalarChoice::Hinge)?;
        for (x, (p, pt)) in model.dists.iter().zip(&profile.points).enumerate() {
            for &m in ms {
                let law = witness_law(&mv_law(p, m, &TaskLoss::ZeroOne)?, &cert);
                let curve = calibration_curve(&spec, &law, p, &TaskLoss::ZeroOne, &grid, &opts)?;
                for (eps, psi) in grid.iter().zip(&curve.psi_raw) {
                    let bound = calibration_lower_bound(cert.c1, cert.c2, k, m, *eps, pt.kappa);
                    if bound > 0.0 && psi.is_finite() {
                        informative += 1;
                    }
                    if psi.is_finite() {
                        worst = worst.max(bound - psi);
                    }
                    t.push(vec![id.into(), x.into(), k.into(), m.into(), pt.kappa.into(), (*eps).into(), (*psi).into(), bound.into()]);
                }
            }
        }
    }
    r.metric("informative_points", informative as f64);
    r.check(Check::new("max (bound - psi) over models, points, m and eps", worst, Cmp::Le, tol));
    r.tables.push(t);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hinge_suite_passes() {
        assert_eq!(hinge_certificate().unwrap().verdict(), crate::report::Verdict::Pass);
    }
}
