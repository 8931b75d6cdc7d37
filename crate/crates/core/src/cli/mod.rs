//! Scenario runner behind the `phireg` binary.
//!
//! A scenario is a JSON file naming a protocol, a horizon, a list of seeds
//! and protocol parameters. Seeds run in parallel; records are merged in
//! seed order so the CSV is byte-stable.

mod counter;
mod family;
mod hardness_runs;
mod online;
mod play;
mod record;
mod stream;

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::audit::{
    deviation_regret, external_regret, finite_phi_regret, phi_int_regret, proj_regret, beam_regret,
    conv_phi_regret, proximal_regret, Exactness, RegretReport, Trajectory, Witness,
};
use crate::deviations::{Deviation, DeviationSet};
use crate::error::{Error, Result};
use crate::geometry::ConvexSet;
use crate::learners::{Gd, Learner, Md, Og, StepSchedule};

pub use record::{emit_csv, format_sig, write_csv, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    SingleLearner,
    GameDynamics,
    HardnessProbe,
    Conformal,
    Counterexample,
}

/// A value the final rows of every seed must reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub column: String,
    pub value: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    pub kind: ScenarioKind,
    pub protocol: String,
    #[serde(default)]
    pub description: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Number of (roughly geometric) checkpoints written per seed.
    #[serde(default)]
    pub checkpoints: Option<usize>,
    #[serde(default)]
    pub expect: Vec<Expectation>,
}

pub struct ProtocolInfo {
    pub name: &'static str,
    pub kind: ScenarioKind,
    pub summary: &'static str,
}

pub const PROTOCOLS: &[ProtocolInfo] = &[
    ProtocolInfo { name: "single_learner", kind: ScenarioKind::SingleLearner, summary: "one learner on a loss stream, audited at checkpoints" },
    ProtocolInfo { name: "gd_proximal_family", kind: ScenarioKind::SingleLearner, summary: "GD proximal regret against a random prox family and its bounds" },
    ProtocolInfo { name: "tree_sampler", kind: ScenarioKind::SingleLearner, summary: "Hedge tree sampler on experts with constant maps" },
    ProtocolInfo { name: "tree_sampling_law", kind: ScenarioKind::SingleLearner, summary: "Monte-Carlo law of the tree sampler against the exact law" },
    ProtocolInfo { name: "key_inequality", kind: ScenarioKind::SingleLearner, summary: "fuzz of the prox key inequality" },
    ProtocolInfo { name: "hedge_bound", kind: ScenarioKind::SingleLearner, summary: "Hedge external regret against 2 sqrt(T ln n)" },
    ProtocolInfo { name: "conv_mix", kind: ScenarioKind::SingleLearner, summary: "conv(Φ) regret of the mixture-chain learner" },
    ProtocolInfo { name: "phi_int", kind: ScenarioKind::SingleLearner, summary: "exact Φ_Int regret of GD and its linearized certificate" },
    ProtocolInfo { name: "md_bregman", kind: ScenarioKind::SingleLearner, summary: "negentropy MD against Bregman proximal deviations" },
    ProtocolInfo { name: "dynamics", kind: ScenarioKind::GameDynamics, summary: "uncoupled dynamics with per-player certificates" },
    ProtocolInfo { name: "og_bilinear", kind: ScenarioKind::GameDynamics, summary: "OG self-play on the bilinear game, prox regret and variation" },
    ProtocolInfo { name: "hr_example", kind: ScenarioKind::Counterexample, summary: "±1/2 play under |x|: zero Φ_Proj regret, linear external regret" },
    ProtocolInfo { name: "linear_span", kind: ScenarioKind::Counterexample, summary: "GD stuck at a stationary point of a concave loss" },
    ProtocolInfo { name: "beam_triangle", kind: ScenarioKind::Counterexample, summary: "linear beam regret of GD on the triangle instance" },
    ProtocolInfo { name: "motzkin_straus", kind: ScenarioKind::HardnessProbe, summary: "simplex QP maximum against the clique number" },
    ProtocolInfo { name: "probes", kind: ScenarioKind::HardnessProbe, summary: "improving deviations of f_k in the four probe cases" },
    ProtocolInfo { name: "conformal", kind: ScenarioKind::Conformal, summary: "threshold learner on one synthetic score stream" },
    ProtocolInfo { name: "conformal_identity", kind: ScenarioKind::Conformal, summary: "coverage identity over rotating synthetic streams" },
];

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::config("id", "must not be empty"));
        }
        if self.t == 0 {
            return Err(Error::config("T", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "must not be empty"));
        }
        let info = PROTOCOLS
            .iter()
            .find(|p| p.name == self.protocol)
            .ok_or_else(|| Error::config("protocol", format!("unknown protocol `{}`", self.protocol)))?;
        if info.kind != self.kind {
            return Err(Error::config(
                "kind",
                format!("protocol `{}` belongs to kind {:?}", self.protocol, info.kind),
            ));
        }
        Ok(())
    }

    /// Deserializes `params`, reporting errors with their field path.
    pub(crate) fn params<P: DeserializeOwned>(&self) -> Result<P> {
        let value = match &self.params {
            serde_json::Value::Null => serde_json::Value::Object(Default::default()),
            v => v.clone(),
        };
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { "params".to_string() } else { format!("params.{path}") };
            Error::config(path, e.into_inner().to_string())
        })
    }

    pub(crate) fn checkpoint_times(&self) -> Vec<usize> {
        checkpoint_times(self.t, self.checkpoints.unwrap_or(24))
    }
}

/// Outcome of one acceptance check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub(crate) fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScenarioOutcome {
    pub records: Vec<RunRecord>,
    pub checks: Vec<Check>,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Runs every seed of the scenario and evaluates its checks.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    let mut out = match cfg.protocol.as_str() {
        "single_learner" => online::single_learner(cfg)?,
        "gd_proximal_family" => online::gd_proximal_family(cfg)?,
        "tree_sampler" => online::tree_sampler(cfg)?,
        "tree_sampling_law" => online::tree_sampling_law(cfg)?,
        "key_inequality" => online::key_inequality(cfg)?,
        "hedge_bound" => online::hedge_bound(cfg)?,
        "conv_mix" => online::conv_mix(cfg)?,
        "phi_int" => online::phi_int(cfg)?,
        "md_bregman" => online::md_bregman(cfg)?,
        "dynamics" => play::dynamics(cfg)?,
        "og_bilinear" => play::og_bilinear(cfg)?,
        "hr_example" => counter::hr_example(cfg)?,
        "linear_span" => counter::linear_span(cfg)?,
        "beam_triangle" => counter::beam_triangle(cfg)?,
        "motzkin_straus" => hardness_runs::motzkin_straus(cfg)?,
        "probes" => hardness_runs::probes(cfg)?,
        "conformal" => stream::conformal(cfg)?,
        "conformal_identity" => stream::conformal_identity(cfg)?,
        other => return Err(Error::config("protocol", format!("unknown protocol `{other}`"))),
    };
    for (k, e) in cfg.expect.iter().enumerate() {
        out.checks.push(evaluate_expectation(cfg, &out.records, e, k));
    }
    Ok(out)
}

fn evaluate_expectation(cfg: &ScenarioConfig, records: &[RunRecord], e: &Expectation, k: usize) -> Check {
    let name = format!("expect_{k}_{}", e.column);
    let finals: Vec<&RunRecord> = records.iter().filter(|r| r.t == cfg.t).collect();
    if finals.is_empty() {
        return Check::new(&name, false, "no final rows");
    }
    let mut worst: f64 = 0.0;
    for r in &finals {
        match r.get(&e.column) {
            Some(v) => worst = worst.max((v - e.value).abs()),
            None => return Check::new(&name, false, format!("no column `{}`", e.column)),
        }
    }
    Check::new(&name, worst <= e.tol, format!("max |{} - {}| = {worst:.3e} (tol {:.1e})", e.column, e.value, e.tol))
}

/// Runs `f` for each seed in parallel and returns results in seed order.
pub(crate) fn per_seed<T: Send>(seeds: &[u64], f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    seeds.par_iter().map(|&s| f(s)).collect()
}

/// A generator for `(seed, stream)`; distinct streams are independent.
pub(crate) fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// About `n` geometrically spaced rounds in `1..=t`, always ending at `t`.
pub fn checkpoint_times(t: usize, n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=n)
        .map(|i| ((t as f64).powf(i as f64 / n as f64).round() as usize).clamp(1, t))
        .collect();
    out.push(t);
    out.sort_unstable();
    out.dedup();
    out
}

/// Least-squares slope of `ln y` on `ln t` over points with `t >= skip * t_max`
/// and `y > 0`.
pub fn loglog_slope(ts: &[usize], ys: &[f64], skip: f64) -> Option<f64> {
    let t_max = *ts.iter().max()? as f64;
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(t, y)| **t as f64 >= skip * t_max && **y > 0.0)
        .map(|(t, y)| ((*t as f64).ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// A learner for a given strategy set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerSpec {
    Gd {
        #[serde(default)]
        x1: Option<Vec<f64>>,
        schedule: StepSchedule,
    },
    Og {
        #[serde(default)]
        w0: Option<Vec<f64>>,
        schedule: StepSchedule,
    },
    /// Negentropy mirror descent from the uniform point; simplex only.
    Md {
        schedule: StepSchedule,
    },
}

impl LearnerSpec {
    pub fn build(&self, set: &ConvexSet) -> Result<Box<dyn Learner>> {
        Ok(match self {
            LearnerSpec::Gd { x1, schedule } => {
                let x1 = x1.clone().unwrap_or_else(|| set.projected_origin());
                Box::new(Gd::new(set.clone(), x1, *schedule)?)
            }
            LearnerSpec::Og { w0, schedule } => Box::new(Og::new(set.clone(), w0.clone(), *schedule)?),
            LearnerSpec::Md { schedule } => match set {
                ConvexSet::Simplex { d } => Box::new(Md::uniform(*d, *schedule)?),
                _ => return Err(Error::input("mirror descent runs on the simplex only")),
            },
        })
    }
}

/// What to audit a trajectory against.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "audit", rename_all = "snake_case", deny_unknown_fields)]
pub enum AuditSpec {
    External,
    Proj { delta: f64 },
    Int { delta: f64 },
    Beam {
        delta: f64,
        #[serde(default)]
        directions: Vec<Vec<f64>>,
    },
    /// The exact and linearized proximal regret of one `f`.
    Prox { f: crate::deviations::ProxFunction },
    Finite { maps: Vec<Deviation> },
    Conv { maps: Vec<Deviation> },
    /// Any deviation family, as used by certification.
    Family { set: DeviationSet },
}

/// A named audit result.
#[derive(Debug, Clone, Serialize)]
pub struct AuditLine {
    pub name: String,
    pub total: f64,
    pub exactness: Exactness,
    pub witness: Witness,
}

impl AuditLine {
    fn from_report(name: impl Into<String>, r: RegretReport) -> Self {
        Self { name: name.into(), total: r.total, exactness: r.exactness, witness: r.witness }
    }
}

/// Evaluates one audit on a trajectory.
pub fn audit(traj: &Trajectory, spec: &AuditSpec) -> Result<Vec<AuditLine>> {
    Ok(match spec {
        AuditSpec::External => vec![AuditLine::from_report("external", external_regret(traj)?)],
        AuditSpec::Proj { delta } => vec![AuditLine::from_report("proj", proj_regret(traj, *delta)?)],
        AuditSpec::Int { delta } => vec![AuditLine::from_report("int", phi_int_regret(traj, *delta)?)],
        AuditSpec::Beam { delta, directions } => {
            vec![AuditLine::from_report("beam", beam_regret(traj, *delta, directions)?)]
        }
        AuditSpec::Prox { f } => {
            let r = proximal_regret(traj, f)?;
            let label = f.label();
            vec![
                AuditLine::from_report(format!("prox_{label}"), r.exact),
                AuditLine::from_report(format!("prox_{label}_linearized"), r.linearized),
            ]
        }
        AuditSpec::Finite { maps } => vec![AuditLine::from_report("finite", finite_phi_regret(traj, maps)?)],
        AuditSpec::Conv { maps } => {
            let c = conv_phi_regret(traj, maps)?;
            let mut out = vec![AuditLine {
                name: "conv_lower".into(),
                total: c.lower,
                exactness: Exactness::LowerBound,
                witness: Witness::Mixture { weights: c.weights.clone() },
            }];
            if let Some(u) = c.upper {
                out.push(AuditLine {
                    name: "conv_upper".into(),
                    total: u,
                    exactness: Exactness::Exact,
                    witness: Witness::Mixture { weights: c.weights },
                });
            }
            out
        }
        AuditSpec::Family { set } => audit_family(traj, set)?,
    })
}

fn audit_family(traj: &Trajectory, set: &DeviationSet) -> Result<Vec<AuditLine>> {
    set.validate(&traj.set)?;
    match set {
        DeviationSet::Finite { maps, .. } => audit(traj, &AuditSpec::Finite { maps: maps.clone() }),
        DeviationSet::Conv { maps, .. } => audit(traj, &AuditSpec::Conv { maps: maps.clone() }),
        DeviationSet::Proj { delta } => audit(traj, &AuditSpec::Proj { delta: *delta }),
        DeviationSet::Int { delta } => audit(traj, &AuditSpec::Int { delta: *delta }),
        DeviationSet::Beam { delta } => audit(traj, &AuditSpec::Beam { delta: *delta, directions: Vec::new() }),
        DeviationSet::IntPlus { delta } => {
            let int = phi_int_regret(traj, *delta)?;
            let shrink = deviation_regret(traj, &Deviation::Shrink { delta: *delta })?;
            let best = if shrink.total > int.total { shrink } else { int };
            Ok(vec![AuditLine::from_report("int_plus", best)])
        }
        DeviationSet::ProxFamily { fs } => {
            let mut best: Option<AuditLine> = None;
            for f in fs {
                let r = proximal_regret(traj, f)?.exact;
                if best.as_ref().is_none_or(|b| r.total > b.total) {
                    best = Some(AuditLine::from_report("prox_family", r));
                }
            }
            Ok(best.into_iter().collect())
        }
    }
}

/// Reads a deviation spec given either inline as JSON or as a file path.
pub fn parse_audit_spec(arg: &str) -> Result<AuditSpec> {
    let text = if arg.trim_start().starts_with('{') { arg.to_string() } else { std::fs::read_to_string(arg)? };
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(format!("deviation-spec {path}"), e.into_inner().to_string())
    })
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    parse_trajectory(&std::fs::read_to_string(path)?)
}

/// Parses a JSON trajectory and fills in loss values and gradients.
pub fn parse_trajectory(text: &str) -> Result<Trajectory> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut traj: Trajectory = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(format!("trajectory {path}"), e.into_inner().to_string())
    })?;
    traj.validate_and_fill()?;
    Ok(traj)
}

/// Scenario files in a directory, sorted by file name.
pub fn list_scenarios(dir: &Path) -> Result<Vec<(PathBuf, ScenarioConfig)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let cfg = ScenarioConfig::load(&p).map_err(|e| match e {
                Error::Config { path, msg } => Error::config(format!("{}: {path}", p.display()), msg),
                other => other,
            })?;
            Ok((p, cfg))
        })
        .collect()
}
