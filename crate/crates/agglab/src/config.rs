//! Experiment configuration: a JSON object with an `experiment` tag, optional
//! `seed` / `out`, and experiment-specific parameters. Unknown keys are
//! rejected; omitted parameters take the defaults below.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{LabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    E1,
    E2,
    E3,
    E4,
    E5,
    E6,
    E7,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] =
        [ExperimentId::E1, ExperimentId::E2, ExperimentId::E3, ExperimentId::E4, ExperimentId::E5, ExperimentId::E6, ExperimentId::E7];

    pub fn describe(self) -> &'static str {
        match self {
            ExperimentId::E1 => "ranking cycle: convex pairwise surrogates are not consistent",
            ExperimentId::E2 => "ranking: squared loss on frequency aggregates recovers the C·1 order",
            ExperimentId::E3 => "binary mixture: logistic direction nearly orthogonal, repaired by majority vote",
            ExperimentId::E4 => "comparison inequality with majority vote on random finite supports",
            ExperimentId::E5 => "multiclass logistic with a corrupted link: direction error versus m",
            ExperimentId::E6 => "bipartite matching: certificate and comparison inequality",
            ExperimentId::E7 => "nearest-neighbour aggregation on a piecewise-constant label law",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ExperimentId {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| LabError::Config(format!("unknown experiment `{s}` (expected E1..E7)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarChoice {
    Hinge,
    Logistic,
    Exp,
    SquaredHinge,
}

impl ScalarChoice {
    pub fn loss(self) -> agglab_core::surrogate::ScalarLoss {
        use agglab_core::surrogate::ScalarLoss;
        match self {
            ScalarChoice::Hinge => ScalarLoss::Hinge,
            ScalarChoice::Logistic => ScalarLoss::Logistic,
            ScalarChoice::Exp => ScalarLoss::Exp,
            ScalarChoice::SquaredHinge => ScalarLoss::SquaredHinge,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct E1Config {
    pub items: usize,
    /// Cycle weights; uniform when absent.
    pub q: Option<Vec<f64>>,
    /// Scalar losses applied to score differences `s_i - s_j`.
    pub surrogates: Vec<ScalarChoice>,
    /// Extra user loss `max_i (slope_i t + intercept_i)` as `[slope, intercept]` pairs.
    pub custom: Option<Vec<[f64; 2]>>,
    /// Perturbation sizes `1/n` around the cycle.
    pub levels: Vec<f64>,
    pub directions: usize,
    pub zero_tol: f64,
    pub opt_tol: f64,
    /// Minimal adjacent score gap for an ordering to count as strict.
    pub gap_tol: f64,
}

impl Default for E1Config {
    fn default() -> Self {
        E1Config {
            items: 3,
            q: None,
            surrogates: vec![ScalarChoice::Logistic, ScalarChoice::SquaredHinge],
            custom: None,
            levels: vec![1e2, 1e3, 1e4],
            directions: 200,
            zero_tol: 1e-4,
            opt_tol: 1e-12,
            gap_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct E2Config {
    pub items: usize,
    pub distributions: usize,
    /// Labels per example; `2 * items` when absent.
    pub m: Option<usize>,
    pub trials: usize,
    /// Minimal adjacent gap in `C·1` for a distribution to have a unique order.
    pub min_gap: f64,
    pub se_mult: f64,
    /// Candidate draws before giving up on finding enough distributions.
    pub max_draws: usize,
}

impl Default for E2Config {
    fn default() -> Self {
        E2Config { items: 3, distributions: 20, m: None, trials: 50_000, min_gap: 0.05, se_mult: 3.0, max_draws: 10_000 }
    }
}

fn e3_eps() -> Vec<f64> {
    vec![0.3, 0.1]
}
fn e3_d() -> usize {
    2
}
fn e3_weight() -> f64 {
    1e-4
}
fn e3_draws() -> usize {
    1_000_000
}
fn e3_ms() -> Vec<usize> {
    vec![1, 5, 25, 125]
}
fn e3_angle_tol() -> f64 {
    0.05
}
fn e3_final() -> f64 {
    0.99
}
fn se_mult() -> f64 {
    3.0
}
fn e3_iters() -> usize {
    20_000
}
fn e3_grad() -> f64 {
    1e-12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct E3Config {
    /// Noise exponent of the construction (must exceed 1/2).
    pub alpha: f64,
    #[serde(default = "e3_eps")]
    pub eps_angles: Vec<f64>,
    #[serde(default = "e3_d")]
    pub d: usize,
    /// Mixture weight of the Gaussian component.
    #[serde(default = "e3_weight")]
    pub gaussian_weight: f64,
    #[serde(default = "e3_draws")]
    pub gaussian_draws: usize,
    #[serde(default = "e3_ms")]
    pub m_schedule: Vec<usize>,
    #[serde(default = "e3_angle_tol")]
    pub angle_tol: f64,
    #[serde(default = "e3_final")]
    pub final_cos: f64,
    #[serde(default = "se_mult")]
    pub se_mult: f64,
    #[serde(default = "e3_iters")]
    pub max_iters: usize,
    #[serde(default = "e3_grad")]
    pub grad_tol: f64,
}

impl E3Config {
    pub fn with_alpha(alpha: f64) -> Self {
        E3Config {
            alpha,
            eps_angles: e3_eps(),
            d: e3_d(),
            gaussian_weight: e3_weight(),
            gaussian_draws: e3_draws(),
            m_schedule: e3_ms(),
            angle_tol: e3_angle_tol(),
            final_cos: e3_final(),
            se_mult: se_mult(),
            max_iters: e3_iters(),
            grad_tol: e3_grad(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct E4Block {
    pub k: usize,
    pub m: Vec<usize>,
    /// Noise exponent used for the `c_MT` fit and the thresholds.
    pub alpha: f64,
    pub support_points: usize,
    pub hypotheses: usize,
    /// Spread the wrong-label mass evenly (`κ = 1` under zero-one loss).
    pub equal_wrong: bool,
}

impl Default for E4Block {
    fn default() -> Self {
        E4Block { k: 2, m: vec![1, 3, 9, 27], alpha: 0.0, support_points: 5, hypotheses: 200, equal_wrong: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct E4Config {
    pub blocks: Vec<E4Block>,
    /// Larger-`m` blocks where the comparison gates are not vacuous.
    pub extended: Vec<E4Block>,
    pub margin_loss: ScalarChoice,
    pub min_delta: f64,
    /// Monte Carlo trials when an exact law is too large.
    pub mc_trials: usize,
}

impl Default for E4Config {
    fn default() -> Self {
        let core = |k| E4Block { k, ..E4Block::default() };
        let ext = |k, m| E4Block { k, m: vec![m], equal_wrong: true, ..E4Block::default() };
        E4Config {
            blocks: vec![core(2), core(3), core(4)],
            extended: vec![ext(2, 1001), ext(3, 501), ext(4, 1500)],
            margin_loss: ScalarChoice::Hinge,
            min_delta: 0.1,
            mc_trials: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct E5Config {
    pub d: usize,
    pub k: usize,
    /// Row-major `d x (k-1)`; when absent (k = 3), class vectors at 120°
    /// of norm `scale` in the first two coordinates.
    pub theta_star: Option<Vec<f64>>,
    pub scale: f64,
    pub box_center: Vec<f64>,
    pub box_half_width: Vec<f64>,
    /// Weight of the uniform law inside the box (1 = fully uniform).
    pub mix: f64,
    pub samples: usize,
    pub m_schedule: Vec<usize>,
    pub ridge: f64,
    pub baseline_factor: f64,
    pub tol_align: f64,
    pub se_mult: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for E5Config {
    fn default() -> Self {
        E5Config {
            d: 4,
            k: 3,
            theta_star: None,
            scale: 1.0,
            box_center: vec![2.5, 0.0],
            box_half_width: vec![1.0, 1.0],
            mix: 0.5,
            samples: 200_000,
            m_schedule: vec![1, 9, 81],
            ridge: 1e-8,
            baseline_factor: 5.0,
            tol_align: 0.05,
            se_mult: 3.0,
            max_iters: 50_000,
            grad_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct E6Block {
    pub n: usize,
    pub m: Vec<usize>,
}

impl Default for E6Block {
    fn default() -> Self {
        E6Block { n: 2, m: vec![1, 3, 9, 27] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct E6Config {
    pub blocks: Vec<E6Block>,
    pub extended: Vec<E6Block>,
    pub cert_radius: f64,
    pub cert_grid: usize,
    pub support_points: usize,
    pub hypotheses: usize,
    pub eta_max: f64,
    pub mc_trials: usize,
}

impl Default for E6Config {
    fn default() -> Self {
        E6Config {
            blocks: vec![E6Block { n: 2, ..E6Block::default() }, E6Block { n: 3, ..E6Block::default() }],
            extended: vec![E6Block { n: 2, m: vec![1001] }, E6Block { n: 3, m: vec![1001] }],
            cert_radius: 3.0,
            cert_grid: 5,
            support_points: 4,
            hypotheses: 50,
            eta_max: 0.3,
            mc_trials: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct E7Config {
    /// Label law on each of the equal-width pieces of `[0, 1]`.
    pub pieces: Vec<Vec<f64>>,
    pub ns: Vec<usize>,
    pub probes: usize,
    pub trials: usize,
    /// Cells of the per-cell score class (a multiple of the piece count keeps
    /// cells inside pieces).
    pub cells: usize,
    pub excess_tol: f64,
    pub max_disagreement: f64,
    pub min_delta: f64,
    pub se_mult: f64,
}

impl Default for E7Config {
    fn default() -> Self {
        E7Config {
            pieces: vec![vec![0.7, 0.2, 0.1], vec![0.15, 0.6, 0.25], vec![0.2, 0.2, 0.6]],
            ns: vec![200, 800, 3200],
            probes: 300,
            trials: 20,
            cells: 12,
            excess_tol: 0.02,
            max_disagreement: 0.05,
            min_delta: 0.2,
            se_mult: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Params {
    E1(E1Config),
    E2(E2Config),
    E3(E3Config),
    E4(E4Config),
    E5(E5Config),
    E6(E6Config),
    E7(E7Config),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub params: Params,
}

fn parse<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| LabError::Config(e.to_string()))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(LabError::Config(format!("`{name}` must be positive and finite, got {v}")))
    }
}

fn nonempty_ms(name: &str, ms: &[usize]) -> Result<()> {
    if ms.is_empty() || ms.contains(&0) {
        return Err(LabError::Config(format!("`{name}` must be a nonempty list of positive integers")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn id(&self) -> ExperimentId {
        match self.params {
            Params::E1(_) => ExperimentId::E1,
            Params::E2(_) => ExperimentId::E2,
            Params::E3(_) => ExperimentId::E3,
            Params::E4(_) => ExperimentId::E4,
            Params::E5(_) => ExperimentId::E5,
            Params::E6(_) => ExperimentId::E6,
            Params::E7(_) => ExperimentId::E7,
        }
    }

    /// Shipped defaults; E3 uses `alpha = 1`.
    pub fn default_for(id: ExperimentId) -> Self {
        let params = match id {
            ExperimentId::E1 => Params::E1(E1Config::default()),
            ExperimentId::E2 => Params::E2(E2Config::default()),
            ExperimentId::E3 => Params::E3(E3Config::with_alpha(1.0)),
            ExperimentId::E4 => Params::E4(E4Config::default()),
            ExperimentId::E5 => Params::E5(E5Config::default()),
            ExperimentId::E6 => Params::E6(E6Config::default()),
            ExperimentId::E7 => Params::E7(E7Config::default()),
        };
        ExperimentConfig { seed: None, out: None, params }
    }

    pub fn from_value(v: Value) -> Result<Self> {
        let Value::Object(mut map) = v else {
            return Err(LabError::Config("config must be a JSON object".into()));
        };
        let id: ExperimentId = match map.remove("experiment") {
            Some(Value::String(s)) => s.parse()?,
            Some(_) => return Err(LabError::Config("`experiment` must be a string".into())),
            None => return Err(LabError::Config("missing field `experiment`".into())),
        };
        let seed = match map.remove("seed") {
            None | Some(Value::Null) => None,
            Some(v) => Some(v.as_u64().ok_or_else(|| LabError::Config("`seed` must be a non-negative integer".into()))?),
        };
        let out = match map.remove("out") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s),
            Some(_) => return Err(LabError::Config("`out` must be a string".into())),
        };
        let rest = Value::Object(map);
        let params = match id {
            ExperimentId::E1 => Params::E1(parse(rest)?),
            ExperimentId::E2 => Params::E2(parse(rest)?),
            ExperimentId::E3 => Params::E3(parse(rest)?),
            ExperimentId::E4 => Params::E4(parse(rest)?),
            ExperimentId::E5 => Params::E5(parse(rest)?),
            ExperimentId::E6 => Params::E6(parse(rest)?),
            ExperimentId::E7 => Params::E7(parse(rest)?),
        };
        let cfg = ExperimentConfig { seed, out, params };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s).map_err(|e| LabError::Config(format!("parse error: {e}")))?;
        Self::from_value(v)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::from_json_str(&s)
    }

    /// The full configuration with defaults filled in.
    pub fn resolved(&self) -> Value {
        let params = match &self.params {
            Params::E1(c) => serde_json::to_value(c),
            Params::E2(c) => serde_json::to_value(c),
            Params::E3(c) => serde_json::to_value(c),
            Params::E4(c) => serde_json::to_value(c),
            Params::E5(c) => serde_json::to_value(c),
            Params::E6(c) => serde_json::to_value(c),
            Params::E7(c) => serde_json::to_value(c),
        }
        .expect("config serializes");
        let mut map = Map::new();
        map.insert("experiment".into(), Value::String(self.id().to_string()));
        if let Some(s) = self.seed {
            map.insert("seed".into(), Value::from(s));
        }
        if let Some(o) = &self.out {
            map.insert("out".into(), Value::String(o.clone()));
        }
        if let Value::Object(p) = params {
            map.extend(p);
        }
        Value::Object(map)
    }

    /// Replaces every Monte Carlo trial count with `n`.
    pub fn override_mc_trials(&mut self, n: usize) {
        match &mut self.params {
            Params::E2(c) => c.trials = n,
            Params::E4(c) => c.mc_trials = n,
            Params::E6(c) => c.mc_trials = n,
            Params::E7(c) => c.trials = n,
            Params::E1(_) | Params::E3(_) | Params::E5(_) => {}
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.params {
            Params::E1(c) => {
                if c.items < 3 {
                    return Err(LabError::Config("`items` must be at least 3".into()));
                }
                if let Some(q) = &c.q {
                    if q.len() != c.items || q.iter().any(|v| !(*v > 0.0)) {
                        return Err(LabError::Config("`q` must have `items` positive entries".into()));
                    }
                }
                if c.surrogates.is_empty() && c.custom.is_none() {
                    return Err(LabError::Config("`surrogates` is empty".into()));
                }
                if c.levels.is_empty() || c.levels.iter().any(|l| !(*l > 0.0)) {
                    return Err(LabError::Config("`levels` must be positive".into()));
                }
            }
            Params::E2(c) => {
                if c.items < 2 || c.distributions == 0 || c.trials < 2 {
                    return Err(LabError::Config("E2 needs items >= 2, distributions >= 1, trials >= 2".into()));
                }
                if c.m == Some(0) {
                    return Err(LabError::Config("`m` must be positive".into()));
                }
            }
            Params::E3(c) => {
                if !(c.alpha > 0.5 && c.alpha.is_finite()) {
                    return Err(LabError::Config(format!("`alpha` must exceed 1/2, got {}", c.alpha)));
                }
                if c.d < 2 || c.gaussian_draws == 0 || !(0.0..1.0).contains(&c.gaussian_weight) {
                    return Err(LabError::Config("E3 needs d >= 2, gaussian_draws >= 1, gaussian_weight in [0, 1)".into()));
                }
                if c.eps_angles.is_empty() || c.eps_angles.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                    return Err(LabError::Config("`eps_angles` must lie in (0, 1)".into()));
                }
                nonempty_ms("m_schedule", &c.m_schedule)?;
            }
            Params::E4(c) => {
                for b in c.blocks.iter().chain(&c.extended) {
                    if b.k < 2 || b.support_points == 0 || !(0.0..=1.0).contains(&b.alpha) {
                        return Err(LabError::Config("E4 blocks need k >= 2, support_points >= 1, alpha in [0, 1]".into()));
                    }
                    nonempty_ms("m", &b.m)?;
                }
                if !(0.0..1.0).contains(&c.min_delta) {
                    return Err(LabError::Config("`min_delta` must lie in [0, 1)".into()));
                }
            }
            Params::E5(c) => {
                if c.k < 3 || c.d < c.k - 1 {
                    return Err(LabError::Config("E5 needs k >= 3 and d >= k - 1".into()));
                }
                if c.theta_star.is_none() && c.k != 3 {
                    return Err(LabError::Config("`theta_star` is required unless k = 3".into()));
                }
                if let Some(t) = &c.theta_star {
                    if t.len() != c.d * (c.k - 1) {
                        return Err(LabError::Config("`theta_star` must have d * (k - 1) entries".into()));
                    }
                }
                if c.box_center.len() != c.k - 1 || c.box_half_width.len() != c.k - 1 {
                    return Err(LabError::Config("box center and half-width need k - 1 entries".into()));
                }
                if !(c.mix > 0.0 && c.mix <= 1.0) {
                    return Err(LabError::Config("`mix` must lie in (0, 1]".into()));
                }
                positive("scale", c.scale)?;
                positive("tol_align", c.tol_align)?;
                nonempty_ms("m_schedule", &c.m_schedule)?;
            }
            Params::E6(c) => {
                for b in c.blocks.iter().chain(&c.extended) {
                    if !(2..=4).contains(&b.n) {
                        return Err(LabError::Config("E6 supports n in 2..=4".into()));
                    }
                    nonempty_ms("m", &b.m)?;
                }
                if !(0.0..0.5).contains(&c.eta_max) {
                    return Err(LabError::Config("`eta_max` must lie in [0, 1/2)".into()));
                }
            }
            Params::E7(c) => {
                if c.pieces.is_empty() || c.pieces.iter().any(|p| p.len() != c.pieces[0].len() || p.len() < 2) {
                    return Err(LabError::Config("`pieces` must be nonempty laws of a common size >= 2".into()));
                }
                if c.ns.is_empty() || c.ns.contains(&0) || c.probes == 0 || c.trials == 0 || c.cells == 0 {
                    return Err(LabError::Config("E7 needs positive ns, probes, trials and cells".into()));
                }
            }
        }
        Ok(())
    }
}
