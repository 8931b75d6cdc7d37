//! Conformal protocols.

use serde::Deserialize;

use super::{per_seed, Check, RunRecord, ScenarioConfig, ScenarioOutcome};
use crate::conformal::{ConformalState, ScoreStream};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConformalParams {
    alpha: f64,
    eta: f64,
    #[serde(default)]
    theta1: f64,
    stream: ScoreStream,
}

fn run_rows(cfg: &ScenarioConfig, seed: u64, scores: &[f64], theta1: f64, eta: f64, alpha: f64) -> Result<(Vec<RunRecord>, ConformalState)> {
    let marks = cfg.checkpoint_times();
    let mut st = ConformalState::new(theta1, eta, alpha).map_err(|e| Error::config("params", e.to_string()))?;
    let mut rows = Vec::new();
    let mut next = 0;
    for (t, s) in scores.iter().enumerate() {
        st.update(*s);
        if next < marks.len() && marks[next] == t + 1 {
            let mut rec = RunRecord::new(&cfg.id, seed, t + 1);
            rec.push("theta", st.theta)
                .push("miscoverage", st.miscoverage()?)
                .push("gap", st.coverage_gap()?)
                .push("identity_gap", st.identity_gap()?);
            rows.push(rec);
            next += 1;
        }
    }
    Ok((rows, st))
}

pub(super) fn conformal(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let p: ConformalParams = cfg.params()?;
    let rows = per_seed(&cfg.seeds, |seed| {
        let scores = p.stream.generate(cfg.t, seed)?;
        Ok(run_rows(cfg, seed, &scores, p.theta1, p.eta, p.alpha)?.0)
    })?;
    Ok(ScenarioOutcome { records: rows.into_iter().flatten().collect(), checks: Vec::new() })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct IdentityParams {
    alpha: f64,
    eta: f64,
    #[serde(default)]
    theta1: f64,
    #[serde(default = "identity_tol")]
    identity_tol: f64,
    #[serde(default = "gap_tol")]
    gap_tol: f64,
}

fn identity_tol() -> f64 {
    1e-12
}

fn gap_tol() -> f64 {
    0.02
}

/// Seed `s` runs stream `ScoreStream::rotation(s)` generated with seed `s`.
pub(super) fn conformal_identity(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let p: IdentityParams = cfg.params()?;
    let seeds = per_seed(&cfg.seeds, |seed| {
        let scores = ScoreStream::rotation(seed as usize).generate(cfg.t, seed)?;
        let (rows, st) = run_rows(cfg, seed, &scores, p.theta1, p.eta, p.alpha)?;
        let gap = st.coverage_gap()?;
        Ok((rows, (gap - st.identity_gap()?).abs(), gap))
    })?;
    let worst_id = seeds.iter().map(|s| s.1).fold(0.0, f64::max);
    let worst_gap = seeds.iter().map(|s| s.2).fold(0.0, f64::max);
    let checks = vec![
        Check::new(
            "conformal_identity",
            worst_id <= p.identity_tol,
            format!("{} streams, max |gap - |θ_end - θ_1|/(ηT)| = {worst_id:.3e}", seeds.len()),
        ),
        Check::new("conformal_gap", worst_gap <= p.gap_tol, format!("max coverage gap {worst_gap:.5}")),
    ];
    Ok(ScenarioOutcome { records: seeds.into_iter().flat_map(|s| s.0).collect(), checks })
}
