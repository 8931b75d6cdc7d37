//! Deterministic counterexamples.

use serde::Deserialize;

use super::{loglog_slope, per_seed, Check, RunRecord, ScenarioConfig, ScenarioOutcome};
use crate::audit::{beam_regret, external_regret, proj_regret, Loss, Trajectory};
use crate::error::{Error, Result};
use crate::games::BeamTriangleAdversary;
use crate::geometry::ConvexSet;
use crate::learners::{Feedback, Gd, Learner, StepSchedule};
use crate::oracles::Builtin;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct HrParams {
    #[serde(default = "quarter")]
    delta: f64,
    #[serde(default = "exact_tol")]
    tol: f64,
}

fn quarter() -> f64 {
    0.25
}

fn exact_tol() -> f64 {
    1e-12
}

/// Plays `+1/2, -1/2, ...` on `[-1, 1]` against `|x|`.
pub(super) fn hr_example(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let p: HrParams = cfg.params()?;
    if !(p.delta >= 0.0 && p.delta <= 0.5) {
        return Err(Error::config("params.delta", "must lie in [0, 1/2]"));
    }
    let set = ConvexSet::interval(-1.0, 1.0)?;
    let mut traj = Trajectory::new(set);
    for t in 0..cfg.t {
        let x = if t % 2 == 0 { 0.5 } else { -0.5 };
        traj.record(vec![x], Loss::Builtin(Builtin::Abs1d))?;
    }
    let marks = cfg.checkpoint_times();
    let rows = per_seed(&cfg.seeds, |seed| {
        marks
            .iter()
            .map(|&t| {
                let pre = traj.prefix(t);
                let mut rec = RunRecord::new(&cfg.id, seed, t);
                rec.push("regret_proj", proj_regret(&pre, p.delta)?.total)
                    .push("regret_external", external_regret(&pre)?.total);
                Ok(rec)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let proj = proj_regret(&traj, p.delta)?;
    let ext = external_regret(&traj)?;
    let half = cfg.t as f64 / 2.0;
    let checks = vec![
        Check::new(
            "hr_proj_zero",
            proj.total.abs() <= p.tol,
            format!("Φ_Proj regret {:.3e} ({:?})", proj.total, proj.exactness),
        ),
        Check::new(
            "hr_external_half",
            (ext.total - half).abs() <= p.tol,
            format!("external regret {} vs {half} ({:?})", ext.total, ext.exactness),
        ),
    ];
    Ok(ScenarioOutcome { records: rows.into_iter().flatten().collect(), checks })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpanParams {
    #[serde(default = "one")]
    l: f64,
    #[serde(default = "span_delta")]
    delta: f64,
    #[serde(default = "span_eta")]
    eta: f64,
    #[serde(default = "span_tol")]
    tol: f64,
}

fn one() -> f64 {
    1.0
}

fn span_delta() -> f64 {
    0.3
}

fn span_eta() -> f64 {
    0.1
}

fn span_tol() -> f64 {
    1e-8
}

/// GD from the stationary point 0 of `-(L/2) x^2` on `[-1, 1]`.
pub(super) fn linear_span(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let p: SpanParams = cfg.params()?;
    let set = ConvexSet::interval(-1.0, 1.0)?;
    let loss = Builtin::NegQuadratic1d { l: p.l };
    let mut gd = Gd::new(set.clone(), vec![0.0], StepSchedule::Constant { eta: p.eta })?;
    let mut traj = Trajectory::new(set);
    for _ in 0..cfg.t {
        let x = gd.next()?;
        let g = loss.gradient(&x);
        traj.record(x, Loss::Builtin(loss.clone()))?;
        gd.observe(Feedback::LossGradient(&g))?;
    }
    traj.next_x = Some(gd.next()?);
    let marks = cfg.checkpoint_times();
    let rows = per_seed(&cfg.seeds, |seed| {
        marks
            .iter()
            .map(|&t| {
                let mut rec = RunRecord::new(&cfg.id, seed, t);
                rec.push("regret_proj", proj_regret(&traj.prefix(t), p.delta)?.total)
                    .push("predicted", p.delta * p.delta * p.l * t as f64 / 2.0);
                Ok(rec)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let got = proj_regret(&traj, p.delta)?;
    let want = p.delta * p.delta * p.l * cfg.t as f64 / 2.0;
    let checks = vec![Check::new(
        "linear_span",
        (got.total - want).abs() <= p.tol,
        format!("Φ_Proj regret {} vs {want} ({:?})", got.total, got.exactness),
    )];
    Ok(ScenarioOutcome { records: rows.into_iter().flatten().collect(), checks })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BeamParams {
    #[serde(default = "beam_delta")]
    delta: f64,
    #[serde(default = "beam_eta")]
    eta: f64,
    #[serde(default = "ratio")]
    min_ratio: f64,
    #[serde(default = "exponent")]
    min_exponent: f64,
    /// Evenly spaced checkpoints used for the growth fit.
    #[serde(default = "fit_points")]
    fit_points: usize,
}

fn beam_delta() -> f64 {
    0.2
}

fn beam_eta() -> f64 {
    0.01
}

fn ratio() -> f64 {
    1.8
}

fn exponent() -> f64 {
    0.9
}

fn fit_points() -> usize {
    100
}

/// GD from `A` on the triangle against the three-phase adversary. The growth
/// exponent is fitted on the witness direction's cumulative gains over the
/// last 90% of rounds.
pub(super) fn beam_triangle(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let p: BeamParams = cfg.params()?;
    let mut adv = BeamTriangleAdversary::new(p.delta).map_err(|e| Error::config("params.delta", e.to_string()))?;
    let set = adv.set();
    let mut gd = Gd::new(set.clone(), vec![0.0, 0.0], StepSchedule::Constant { eta: p.eta })?;
    let mut traj = Trajectory::new(set);
    for _ in 0..cfg.t {
        let x = gd.next()?;
        let u = adv.loss(&x);
        traj.record(x, Loss::Builtin(Builtin::Linear { v: u.clone() }))?;
        gd.observe(Feedback::LossGradient(&u))?;
    }
    let extra = [adv.witness()];
    let full = beam_regret(&traj, p.delta, &extra)?;
    let half = beam_regret(&traj.prefix(cfg.t / 2), p.delta, &extra)?;
    let n = p.fit_points.max(2);
    let ts: Vec<usize> = (1..=n).map(|i| (i * cfg.t / n).max(1)).collect();
    let ys: Vec<f64> = ts.iter().map(|t| full.cumulative[t - 1]).collect();
    let slope = loglog_slope(&ts, &ys, 0.1);
    let rows = per_seed(&cfg.seeds, |seed| {
        Ok(ts
            .iter()
            .zip(&ys)
            .map(|(&t, &y)| {
                let mut rec = RunRecord::new(&cfg.id, seed, t);
                rec.push("beam_regret", y);
                rec
            })
            .collect::<Vec<_>>())
    })?;
    let r = if half.total > 0.0 { full.total / half.total } else { f64::NAN };
    let checks = vec![
        Check::new(
            "beam_ratio",
            r > p.min_ratio,
            format!("Reg(T) = {:.4}, Reg(T/2) = {:.4}, ratio {r:.4}, cycles {}", full.total, half.total, adv.cycles),
        ),
        Check::new(
            "beam_exponent",
            slope.is_some_and(|s| s >= p.min_exponent),
            format!("log-log exponent {}", slope.map_or("undefined".to_string(), |s| format!("{s:.4}"))),
        ),
    ];
    Ok(ScenarioOutcome { records: rows.into_iter().flatten().collect(), checks })
}
