//! Game-dynamics protocols.

use serde::Deserialize;

use super::family::ball_family;
use super::{per_seed, rng, Check, LearnerSpec, RunRecord, ScenarioConfig, ScenarioOutcome};
use crate::audit::bounds::{og_game_bound, og_variation_bound};
use crate::audit::proximal_regret;
use crate::deviations::DeviationSet;
use crate::error::{Error, Result};
use crate::games::{certify_phi_equilibrium, run_uncoupled_dynamics, CertMode, EmpiricalDistribution, GameSpec, SmoothGame};
use crate::learners::{Learner, Og, StepSchedule};
use crate::vecops::dist;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DynamicsParams {
    game: GameSpec,
    learners: Vec<LearnerSpec>,
    deviation_sets: Vec<DeviationSet>,
    cert: CertMode,
}

/// Runs the learners against each other and certifies the empirical
/// distribution of every prefix ending at a checkpoint.
pub(super) fn dynamics(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let p: DynamicsParams = cfg.params()?;
    let game = SmoothGame::new(p.game.clone()).map_err(|e| Error::config("params.game", e.to_string()))?;
    if p.learners.len() != game.n() {
        return Err(Error::config("params.learners", format!("the game has {} players", game.n())));
    }
    if p.deviation_sets.len() != game.n() {
        return Err(Error::config("params.deviation_sets", format!("the game has {} players", game.n())));
    }
    for (i, ds) in p.deviation_sets.iter().enumerate() {
        ds.validate(&game.sets[i]).map_err(|e| Error::config(format!("params.deviation_sets[{i}]"), e.to_string()))?;
    }
    let marks = cfg.checkpoint_times();
    let rows = per_seed(&cfg.seeds, |seed| {
        let mut learners = p
            .learners
            .iter()
            .zip(&game.sets)
            .map(|(l, s)| l.build(s))
            .collect::<Result<Vec<Box<dyn Learner>>>>()?;
        let run = run_uncoupled_dynamics(&game, &mut learners, cfg.t)?;
        let mut rows = Vec::new();
        for &t in &marks {
            let emp = EmpiricalDistribution {
                profiles: run.empirical.profiles[..t].to_vec(),
                gradients: run.empirical.gradients[..t].to_vec(),
            };
            let certs = certify_phi_equilibrium(&emp, &game, &p.deviation_sets, p.cert)?;
            let mut rec = RunRecord::new(&cfg.id, seed, t);
            for (i, c) in certs.iter().enumerate() {
                rec.push(format!("epsilon_p{i}"), c.epsilon);
            }
            rows.push(rec);
        }
        Ok(rows)
    })?;
    Ok(ScenarioOutcome { records: rows.into_iter().flatten().collect(), checks: Vec::new() })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct OgParams {
    #[serde(default = "default_w0")]
    w0: Vec<Vec<f64>>,
    #[serde(default)]
    family_seed: u64,
    #[serde(default = "default_counts")]
    family: [usize; 4],
    #[serde(default = "one")]
    scale: f64,
}

fn default_w0() -> Vec<Vec<f64>> {
    vec![vec![0.5], vec![-0.3]]
}

fn default_counts() -> [usize; 4] {
    [4, 4, 2, 2]
}

fn one() -> f64 {
    1.0
}

/// OG self-play on the bilinear game with `η = T^{-1/4}`.
pub(super) fn og_bilinear(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let p: OgParams = cfg.params()?;
    let game = SmoothGame::new(GameSpec::Bilinear { scale: p.scale })?;
    let n = game.n();
    if p.w0.len() != n {
        return Err(Error::config("params.w0", "needs one start per player"));
    }
    let t = cfg.t;
    let eta = (t as f64).powf(-0.25);
    let family = ball_family(&game.sets[0], p.family, &mut rng(p.family_seed, 1))?;
    let var_bound = og_variation_bound(n, game.l, eta, game.g);
    let marks = cfg.checkpoint_times();
    let seeds = per_seed(&cfg.seeds, |seed| {
        let mut learners = game
            .sets
            .iter()
            .zip(&p.w0)
            .map(|(s, w)| Og::new(s.clone(), Some(w.clone()), StepSchedule::Constant { eta }).map(|o| Box::new(o) as Box<dyn Learner>))
            .collect::<Result<Vec<_>>>()?;
        let run = run_uncoupled_dynamics(&game, &mut learners, t)?;
        let mut worst_slack = f64::INFINITY;
        let mut worst_var: f64 = 0.0;
        let mut series = Vec::new();
        let mut var_running = Vec::new();
        for i in 0..n {
            let traj = &run.trajectories[i];
            let set = &game.sets[i];
            for m in &family {
                let rep = proximal_regret(traj, &m.f)?;
                let ps = &rep.prox_points;
                let d = dist(&p.w0[i], &ps[0]);
                let bf = m.f.value(&ps[0], set)? - m.f.value(&ps[t - 1], set)?;
                let bound = og_game_bound(d, bf, n, game.l, game.g, t);
                worst_slack = worst_slack.min(bound - rep.linearized.total);
                series.push((i, rep.linearized.cumulative, bound));
            }
            let var = run.empirical.gradient_variation(i)?;
            let mut acc: f64 = 0.0;
            let mut running = vec![0.0];
            for v in &var {
                acc = acc.max(*v);
                running.push(acc);
            }
            worst_var = worst_var.max(acc);
            var_running.push(running);
        }
        let mut rows = Vec::new();
        for &tt in &marks {
            let mut rec = RunRecord::new(&cfg.id, seed, tt);
            for (k, (i, cum, bound)) in series.iter().enumerate() {
                let j = k % family.len();
                rec.push(format!("reg_p{i}_f{j}"), cum[tt - 1]).push(format!("bound_p{i}_f{j}"), *bound);
            }
            for (i, running) in var_running.iter().enumerate() {
                rec.push(format!("max_variation_p{i}"), running[tt - 1]);
            }
            rec.push("variation_bound", var_bound);
            rows.push(rec);
        }
        Ok((rows, worst_slack, worst_var))
    })?;
    let pairs = seeds.len() * n * family.len();
    let worst = seeds.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let worst_var = seeds.iter().map(|s| s.2).fold(0.0, f64::max);
    let checks = vec![
        Check::new("og_prox_bound", worst >= 0.0, format!("{pairs} (player, f) pairs, min slack {worst:.4}")),
        Check::new(
            "og_variation",
            worst_var <= var_bound,
            format!("max ||g^t - g^(t-1)||^2 = {worst_var:.6e} vs {var_bound:.6e}"),
        ),
    ];
    Ok(ScenarioOutcome { records: seeds.into_iter().flat_map(|s| s.0).collect(), checks })
}
