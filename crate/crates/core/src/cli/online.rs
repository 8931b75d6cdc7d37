//! Single-learner protocols.

use std::collections::HashMap;

use rand::Rng;
use serde::Deserialize;

use super::family::{ball_family, random_symmetric, uniform_in, unit_vector, FamilyMember};
use super::{audit, per_seed, rng, AuditSpec, Check, LearnerSpec, RunRecord, ScenarioConfig, ScenarioOutcome};
use crate::audit::bounds::{
    conv_mix_bound, gd_optimized_bound, gd_prox_bound, hedge_bound as hedge_rhs, kl, md_bregman_bound, phi_int_bound,
    tree_sampler_bound,
};
use crate::audit::{conv_phi_regret, finite_phi_regret, phi_int_regret, proximal_regret, Exactness, Loss, Trajectory};
use crate::deviations::{bregman_prox_negentropy, prox, Deviation, DeviationSet, ProxFunction};
use crate::error::{Error, Result};
use crate::games::{certify_phi_equilibrium, CertMode, EmpiricalDistribution, GameSpec, SmoothGame};
use crate::geometry::{dirichlet_one, ConvexSet};
use crate::learners::{
    tree_sample, ConvMix, Feedback, Gd, Hedge, HedgeEta, Learner, Md, StepSchedule, TreeSampler,
};
use crate::oracles::Builtin;
use crate::vecops::{dist, dot, scale, sub};

const FAMILY: u64 = 1;
const STREAM: u64 = 2;
const MAPS: u64 = 3;

fn linear(v: &[f64]) -> Loss {
    Loss::Builtin(Builtin::Linear { v: v.to_vec() })
}

/// Runs a gradient learner on fixed linear losses `<g^t, x>`.
fn run_linear(learner: &mut dyn Learner, set: &ConvexSet, gs: &[Vec<f64>]) -> Result<Trajectory> {
    let mut traj = Trajectory::new(set.clone());
    for g in gs {
        let x = learner.next()?;
        traj.record(x, linear(g))?;
        learner.observe(Feedback::LossGradient(g))?;
    }
    traj.next_x = Some(learner.next()?);
    Ok(traj)
}

/// Seeds that must meet a bound holding with probability `1 - beta`.
fn required(total: usize, beta: f64) -> usize {
    (((1.0 - beta) * total as f64 - 1e-9).ceil() as usize).min(total)
}

// ---------------------------------------------------------------------------
// Generic single learner

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "stream", rename_all = "snake_case", deny_unknown_fields)]
enum LossStream {
    /// The same loss every round.
    Fixed { loss: Builtin },
    /// Cycles through the listed losses.
    Cycle { losses: Vec<Builtin> },
    /// Linear losses with iid uniformly random directions of norm `g`.
    RandomLinear {
        #[serde(default = "one")]
        g: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SingleLearnerParams {
    set: ConvexSet,
    learner: LearnerSpec,
    losses: LossStream,
    #[serde(default = "default_audits")]
    audits: Vec<AuditSpec>,
}

fn default_audits() -> Vec<AuditSpec> {
    vec![AuditSpec::External]
}

pub(super) fn single_learner(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let p: SingleLearnerParams = cfg.params()?;
    p.set.validate().map_err(|e| Error::config("params.set", e.to_string()))?;
    let d = p.set.dim();
    let marks = cfg.checkpoint_times();
    let rows = per_seed(&cfg.seeds, |seed| {
        let mut learner = p.learner.build(&p.set)?;
        let mut r = rng(seed, STREAM);
        let mut traj = Trajectory::new(p.set.clone());
        for t in 0..cfg.t {
            let x = learner.next()?;
            let loss = match &p.losses {
                LossStream::Fixed { loss } => loss.clone(),
                LossStream::Cycle { losses } => {
                    if losses.is_empty() {
                        return Err(Error::config("params.losses.losses", "must not be empty"));
                    }
                    losses[t % losses.len()].clone()
                }
                LossStream::RandomLinear { g } => Builtin::Linear { v: scale(&unit_vector(d, &mut r), *g) },
            };
            let loss = Loss::Builtin(loss);
            let grad = loss.gradient(&x);
            traj.record(x, loss)?;
            learner.observe(Feedback::LossGradient(&grad))?;
        }
        traj.next_x = Some(learner.next()?);
        let mut rows = Vec::new();
        for &t in &marks {
            let pre = traj.prefix(t);
            let mut rec = RunRecord::new(&cfg.id, seed, t);
            for a in &p.audits {
                for line in audit(&pre, a)? {
                    rec.push(format!("regret_{}", line.name), line.total);
                }
            }
            rows.push(rec);
        }
        Ok(rows)
    })?;
    Ok(ScenarioOutcome { records: rows.into_iter().flatten().collect(), checks: Vec::new() })
}

// ---------------------------------------------------------------------------
// GD against a prox family

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GdProxParams {
    #[serde(default = "five")]
    d: usize,
    /// Constant step; defaults to `1/sqrt(T)`.
    #[serde(default)]
    eta: Option<f64>,
    #[serde(default)]
    family_seed: u64,
    /// Gradient norm of the loss stream.
    #[serde(default = "one")]
    g: f64,
    #[serde(default = "default_counts")]
    family: [usize; 4],
    #[serde(default = "slack_tol")]
    tol: f64,
}

fn five() -> usize {
    5
}

fn default_counts() -> [usize; 4] {
    [4, 4, 2, 2]
}

fn slack_tol() -> f64 {
    1e-7
}

struct GdProxSeed {
    rows: Vec<RunRecord>,
    /// Smallest `rhs - Reg_f` at `T` over the family.
    min_slack: f64,
    /// Smallest `G sqrt(D^2 + 2B) sqrt(T) - Reg_f` under the tuned step.
    min_opt_slack: f64,
}

pub(super) fn gd_proximal_family(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let p: GdProxParams = cfg.params()?;
    if p.d == 0 {
        return Err(Error::config("params.d", "must be positive"));
    }
    let t = cfg.t;
    let eta = p.eta.unwrap_or(1.0 / (t as f64).sqrt());
    let set = ConvexSet::ball(vec![0.0; p.d], 1.0)?;
    let family = ball_family(&set, p.family, &mut rng(p.family_seed, FAMILY))?;
    let x1 = vec![0.0; p.d];
    let marks = cfg.checkpoint_times();

    let seeds = per_seed(&cfg.seeds, |seed| {
        let mut r = rng(seed, STREAM);
        let gs: Vec<Vec<f64>> = (0..t).map(|_| scale(&unit_vector(p.d, &mut r), p.g)).collect();
        let mut gd = Gd::new(set.clone(), x1.clone(), StepSchedule::Constant { eta })?;
        let traj = run_linear(&mut gd, &set, &gs)?;

        let reports = family.iter().map(|m| proximal_regret(&traj, &m.f)).collect::<Result<Vec<_>>>()?;
        let mut min_slack = f64::INFINITY;
        for (m, rep) in family.iter().zip(&reports) {
            let b = gd_prox_bound(&traj, &m.f, eta, rep)?;
            min_slack = min_slack.min(b.rhs - rep.linearized.total);
        }

        // Tuned step with B supplied before the run.
        let mut opt = Vec::with_capacity(family.len());
        let mut min_opt_slack = f64::INFINITY;
        for m in &family {
            let (bound, cum) = tuned_run(m, &set, &x1, &gs, p.g)?;
            min_opt_slack = min_opt_slack.min(bound - cum.last().copied().unwrap_or(0.0));
            opt.push((bound, cum));
        }

        let mut rows = Vec::with_capacity(marks.len());
        for &tt in &marks {
            let mut rec = RunRecord::new(&cfg.id, seed, tt);
            let pre = traj.prefix(tt);
            for (k, (m, rep)) in family.iter().zip(&reports).enumerate() {
                let pre_rep = proximal_regret(&pre, &m.f)?;
                let b = gd_prox_bound(&pre, &m.f, eta, &pre_rep)?;
                rec.push(format!("reg_f{k}"), rep.linearized.cumulative[tt - 1]);
                rec.push(format!("bound_f{k}"), b.rhs);
            }
            for (k, (bound, cum)) in opt.iter().enumerate() {
                rec.push(format!("opt_reg_f{k}"), cum[tt - 1]);
                rec.push(format!("opt_bound_f{k}"), *bound);
            }
            rows.push(rec);
        }
        Ok(GdProxSeed { rows, min_slack, min_opt_slack })
    })?;

    let worst = seeds.iter().map(|s| s.min_slack).fold(f64::INFINITY, f64::min);
    let worst_opt = seeds.iter().map(|s| s.min_opt_slack).fold(f64::INFINITY, f64::min);
    let pairs = seeds.len() * family.len();
    let checks = vec![
        Check::new(
            "gd_prox_bound",
            worst >= -p.tol,
            format!("{pairs} (stream, f) pairs, min slack {worst:.6e}"),
        ),
        Check::new(
            "gd_prox_optimized",
            worst_opt >= -p.tol,
            format!("{pairs} (stream, f) pairs, min slack {worst_opt:.6e}"),
        ),
    ];
    Ok(ScenarioOutcome { records: seeds.into_iter().flat_map(|s| s.rows).collect(), checks })
}

/// GD with `η = sqrt((D^2 + 2B)/(G^2 T))`, `B = f(p^1) - inf f`. Returns the
/// bound `G sqrt(D^2 + 2B) sqrt(T)` and the cumulative linearized regret.
fn tuned_run(m: &FamilyMember, set: &ConvexSet, x1: &[f64], gs: &[Vec<f64>], g: f64) -> Result<(f64, Vec<f64>)> {
    let t = gs.len();
    let p1 = prox(&m.f, x1, set)?;
    let d = dist(x1, &p1);
    let b = m.f.value(&p1, set)? - m.lower;
    if d * d + 2.0 * b <= 0.0 {
        return Err(Error::Numerical { msg: "tuned step is zero".into(), residual: d * d + 2.0 * b });
    }
    let schedule = StepSchedule::HorizonTuned { d, bf: b, g, t };
    let mut gd = Gd::new(set.clone(), x1.to_vec(), schedule)?;
    let traj = run_linear(&mut gd, set, gs)?;
    let rep = proximal_regret(&traj, &m.f)?;
    Ok((gd_optimized_bound(g, d, b, t), rep.linearized.cumulative))
}

// ---------------------------------------------------------------------------
// Tree sampler

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeParams {
    #[serde(default = "eight")]
    n: usize,
    #[serde(default = "beta_default")]
    beta: f64,
    /// Tree depth; defaults to `ceil(sqrt(T))`.
    #[serde(default)]
    h: Option<usize>,
    #[serde(default = "decomp_tol")]
    tol: f64,
}

fn eight() -> usize {
    8
}

fn beta_default() -> f64 {
    0.05
}

fn decomp_tol() -> f64 {
    1e-9
}

struct TreeSeed {
    rows: Vec<RunRecord>,
    regret: f64,
    decomposition_error: f64,
}

pub(super) fn tree_sampler(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let p: TreeParams = cfg.params()?;
    if p.n < 2 {
        return Err(Error::config("params.n", "needs at least two experts"));
    }
    if !(p.beta > 0.0 && p.beta < 1.0) {
        return Err(Error::config("params.beta", "must lie in (0, 1)"));
    }
    let t = cfg.t;
    let n = p.n;
    let h = p.h.unwrap_or_else(|| TreeSampler::depth_for_horizon(t));
    let set = ConvexSet::simplex(n)?;
    let maps: Vec<Deviation> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            Deviation::Constant { point: e }
        })
        .collect();
    let marks = cfg.checkpoint_times();
    let bound = tree_sampler_bound(t, n, p.beta);

    let seeds = per_seed(&cfg.seeds, |seed| {
        let mut sampler =
            TreeSampler::new(maps.clone(), set.clone(), vec![1.0 / n as f64; n], h, HedgeEta::Horizon { t }, seed)?;
        let mut r = rng(seed, STREAM);
        let mut traj = Trajectory::new(set.clone());
        let mut plays = Vec::with_capacity(t);
        for _ in 0..t {
            let x = sampler.next()?;
            let rewards: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
            let u = |y: &[f64]| dot(&rewards, y);
            plays.push(u(&x));
            traj.record(x, linear(&scale(&rewards, -1.0)))?;
            sampler.observe(Feedback::Utility(&u))?;
        }

        // Running Hedge regret and stationarity term from the log.
        let mut cum = vec![0.0; n];
        let (mut expected, mut stationarity) = (0.0, 0.0);
        let mut hedge_at = Vec::with_capacity(t);
        let mut stat_at = Vec::with_capacity(t);
        for (round, play) in sampler.log.iter().zip(&plays) {
            let e = dot(&round.probs, &round.rewards);
            expected += e;
            stationarity += e - play;
            for (c, v) in cum.iter_mut().zip(&round.rewards) {
                *c += v;
            }
            hedge_at.push(cum.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - expected);
            stat_at.push(stationarity);
        }
        let regret = finite_phi_regret(&traj, &maps)?.total;
        let decomposition_error = (sampler.hedge.external_regret() + stationarity - regret).abs();

        let mut rows = Vec::new();
        for &tt in &marks {
            let mut rec = RunRecord::new(&cfg.id, seed, tt);
            rec.push("phi_regret", finite_phi_regret(&traj.prefix(tt), &maps)?.total)
                .push("hedge_regret", hedge_at[tt - 1])
                .push("stationarity", stat_at[tt - 1])
                .push("bound", tree_sampler_bound(tt, n, p.beta));
            rows.push(rec);
        }
        Ok(TreeSeed { rows, regret, decomposition_error })
    })?;

    let within = seeds.iter().filter(|s| s.regret <= bound).count();
    let need = required(seeds.len(), p.beta);
    let worst_err = seeds.iter().map(|s| s.decomposition_error).fold(0.0, f64::max);
    let max_regret = seeds.iter().map(|s| s.regret).fold(f64::NEG_INFINITY, f64::max);
    let checks = vec![
        Check::new(
            "tree_bound",
            within >= need,
            format!("{within}/{} seeds within {bound:.4} (need {need}), max regret {max_regret:.4}", seeds.len()),
        ),
        Check::new(
            "decomposition",
            worst_err <= p.tol,
            format!("max |hedge + stationarity - phi regret| = {worst_err:.3e}"),
        ),
    ];
    Ok(ScenarioOutcome { records: seeds.into_iter().flat_map(|s| s.rows).collect(), checks })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct LawParams {
    #[serde(default = "three")]
    h: usize,
    #[serde(default = "half_half")]
    p: Vec<f64>,
    #[serde(default = "law_tol")]
    tol: f64,
}

fn three() -> usize {
    3
}

fn half_half() -> Vec<f64> {
    vec![0.5, 0.5]
}

fn law_tol() -> f64 {
    0.01
}

/// `T` draws of the sampler; TV distance over (depth, path) outcomes
/// against `P(depth k, path) = (1/h) prod p(path_i)`.
pub(super) fn tree_sampling_law(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let p: LawParams = cfg.params()?;
    let m = p.p.len();
    if m == 0 || p.h < 2 {
        return Err(Error::config("params", "needs a nonempty p and h >= 2"));
    }
    if p.p.iter().any(|v| *v < 0.0) || (p.p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::config("params.p", "must be a probability vector"));
    }
    let set = ConvexSet::interval(0.0, 1.0)?;
    // Distinct targets keep every path's endpoint distinct.
    let maps: Vec<Deviation> = (0..m)
        .map(|i| Deviation::Interpolate { lambda: 0.5, target: vec![i as f64 / (m.max(2) - 1) as f64] })
        .collect();
    let mut exact: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut frontier = vec![(Vec::new(), 1.0)];
    for _ in 0..p.h {
        let mut next = Vec::new();
        for (path, prob) in frontier {
            exact.insert(path.clone(), prob / p.h as f64);
            for (i, pi) in p.p.iter().enumerate() {
                let mut q: Vec<usize> = path.clone();
                q.push(i);
                next.push((q, prob * pi));
            }
        }
        frontier = next;
    }
    let seeds = per_seed(&cfg.seeds, |seed| {
        let mut r = rng(seed, STREAM);
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for _ in 0..cfg.t {
            let draw = tree_sample(&[0.5], p.h, &p.p, &maps, &set, &mut r)?;
            *counts.entry(draw.path).or_default() += 1;
        }
        let total = cfg.t as f64;
        let mut tv = 0.0;
        for (path, q) in &exact {
            tv += (counts.get(path).copied().unwrap_or(0) as f64 / total - q).abs();
        }
        for (path, c) in &counts {
            if !exact.contains_key(path) {
                tv += *c as f64 / total;
            }
        }
        let mut rec = RunRecord::new(&cfg.id, seed, cfg.t);
        rec.push("tv", 0.5 * tv).push("outcomes", exact.len() as f64);
        Ok(rec)
    })?;
    let worst = seeds.iter().filter_map(|r| r.get("tv")).fold(0.0, f64::max);
    let checks = vec![Check::new("sampling_law", worst <= p.tol, format!("max TV {worst:.5} (tol {})", p.tol))];
    Ok(ScenarioOutcome { records: seeds, checks })
}

// ---------------------------------------------------------------------------
// Key inequality fuzz

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyParams {
    #[serde(default = "eight")]
    max_dim: usize,
    #[serde(default = "key_tol")]
    tol: f64,
}

fn key_tol() -> f64 {
    1e-8
}

/// Slack `2f(p) - 2f(p_x) - c||p - p_x||^2 - (||x - p_x||^2 - ||x - p||^2)`
/// with `c = 1` for convex `f` and `c = 0` otherwise.
pub(crate) fn key_inequality_slack(f: &ProxFunction, x: &[f64], p: &[f64], set: &ConvexSet) -> Result<f64> {
    let px = prox(f, x, set)?;
    let lhs = crate::vecops::dist_sq(x, &px) - crate::vecops::dist_sq(x, p);
    let mut rhs = 2.0 * f.value(p, set)? - 2.0 * f.value(&px, set)?;
    if f.is_convex(set) {
        rhs -= crate::vecops::dist_sq(p, &px);
    }
    Ok(rhs - lhs)
}

/// A random `(set, f)` pair: linear, quadratic-to-anchor, symmetric affine
/// (ball and box only) or a smooth concave quadratic through the generic solver.
pub(crate) fn random_key_case<R: Rng + ?Sized>(max_dim: usize, rng: &mut R) -> Result<(ConvexSet, ProxFunction)> {
    let d = rng.random_range(1..=max_dim.max(1));
    let set = match rng.random_range(0..3) {
        0 => ConvexSet::ball(vec![0.0; d], 1.0)?,
        1 => ConvexSet::unit_box(d)?,
        _ => ConvexSet::simplex(d)?,
    };
    let kinds = if matches!(set, ConvexSet::Simplex { .. }) { 3 } else { 4 };
    let f = match rng.random_range(0..kinds) {
        0 => ProxFunction::Linear { v: scale(&unit_vector(d, rng), uniform_in(0.0, 3.0, rng)) },
        1 => ProxFunction::QuadToAnchor { lambda: uniform_in(0.0, 0.95, rng), anchor: set.sample(rng) },
        2 => ProxFunction::Generic {
            f: Builtin::QuadraticToAnchor { weight: -uniform_in(0.05, 0.9, rng), anchor: set.sample(rng) },
            solver: Default::default(),
        },
        _ => match &set {
            ConvexSet::Ball { .. } => {
                let eigs: Vec<f64> = (0..d).map(|_| uniform_in(0.3, 0.95, rng)).collect();
                let top = eigs.iter().cloned().fold(0.0, f64::max);
                let a = random_symmetric(&eigs, rng);
                let b = scale(&unit_vector(d, rng), uniform_in(0.0, 1.0 - top, rng));
                ProxFunction::SymmetricAffine { a, b }
            }
            _ => {
                let diag: Vec<f64> = (0..d).map(|_| uniform_in(0.3, 1.0, rng)).collect();
                let b: Vec<f64> = diag.iter().map(|a| uniform_in(0.0, 1.0 - a, rng)).collect();
                let a = (0..d).map(|i| (0..d).map(|j| if i == j { diag[i] } else { 0.0 }).collect()).collect();
                ProxFunction::SymmetricAffine { a, b }
            }
        },
    };
    Ok((set, f))
}

pub(super) fn key_inequality(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let p: KeyParams = cfg.params()?;
    let rows = per_seed(&cfg.seeds, |seed| {
        let mut r = rng(seed, STREAM);
        let mut worst = f64::INFINITY;
        let mut nonconvex = 0usize;
        for _ in 0..cfg.t {
            let (set, f) = random_key_case(p.max_dim, &mut r)?;
            let x = set.sample(&mut r);
            let q = set.sample(&mut r);
            if !f.is_convex(&set) {
                nonconvex += 1;
            }
            worst = worst.min(key_inequality_slack(&f, &x, &q, &set)?);
        }
        let mut rec = RunRecord::new(&cfg.id, seed, cfg.t);
        rec.push("min_slack", worst).push("nonconvex_cases", nonconvex as f64);
        Ok(rec)
    })?;
    let worst = rows.iter().filter_map(|r| r.get("min_slack")).fold(f64::INFINITY, f64::min);
    let cases = cfg.t * cfg.seeds.len();
    let checks = vec![Check::new(
        "key_inequality",
        worst >= -p.tol,
        format!("{cases} cases, min slack {worst:.3e}"),
    )];
    Ok(ScenarioOutcome { records: rows, checks })
}

// ---------------------------------------------------------------------------
// Hedge

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct HedgeParams {
    #[serde(default = "default_ns")]
    ns: Vec<usize>,
}

fn default_ns() -> Vec<usize> {
    vec![2, 8, 32]
}

const HEDGE_STREAMS: [&str; 3] = ["uniform", "bernoulli", "adaptive"];

fn hedge_run<R: Rng + ?Sized>(n: usize, t: usize, kind: usize, marks: &[usize], rng: &mut R) -> Result<Vec<f64>> {
    let mut hedge = Hedge::new(n, HedgeEta::Horizon { t })?;
    let q: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut out = Vec::with_capacity(marks.len());
    let mut next_mark = 0;
    for round in 1..=t {
        let rewards: Vec<f64> = match kind {
            0 => (0..n).map(|_| rng.random::<f64>()).collect(),
            1 => q.iter().map(|qi| if rng.random::<f64>() < *qi { 1.0 } else { 0.0 }).collect(),
            _ => {
                let w = hedge.weights();
                let mut k = 0;
                for i in 1..n {
                    if w[i] < w[k] {
                        k = i;
                    }
                }
                (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect()
            }
        };
        hedge.update(&rewards)?;
        while next_mark < marks.len() && marks[next_mark] == round {
            out.push(hedge.external_regret());
            next_mark += 1;
        }
    }
    Ok(out)
}

pub(super) fn hedge_bound(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let p: HedgeParams = cfg.params()?;
    if p.ns.iter().any(|n| *n < 1) || p.ns.is_empty() {
        return Err(Error::config("params.ns", "needs positive expert counts"));
    }
    let marks = cfg.checkpoint_times();
    let seeds = per_seed(&cfg.seeds, |seed| {
        let mut series = Vec::new();
        for (ni, &n) in p.ns.iter().enumerate() {
            for kind in 0..HEDGE_STREAMS.len() {
                let mut r = rng(seed, 100 + (ni * HEDGE_STREAMS.len() + kind) as u64);
                series.push((n, kind, hedge_run(n, cfg.t, kind, &marks, &mut r)?));
            }
        }
        let mut rows = Vec::new();
        for (mi, &tt) in marks.iter().enumerate() {
            let mut rec = RunRecord::new(&cfg.id, seed, tt);
            for (n, kind, s) in &series {
                rec.push(format!("regret_n{n}_{}", HEDGE_STREAMS[*kind]), s[mi]);
            }
            for n in &p.ns {
                rec.push(format!("bound_n{n}"), hedge_rhs(tt, *n));
            }
            rows.push(rec);
        }
        let mut worst: f64 = f64::INFINITY;
        for (n, _, s) in &series {
            worst = worst.min(hedge_rhs(cfg.t, *n) - s.last().copied().unwrap_or(0.0));
        }
        Ok((rows, worst))
    })?;
    let runs = seeds.len() * p.ns.len() * HEDGE_STREAMS.len();
    let worst = seeds.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let checks = vec![Check::new("hedge_bound", worst >= 0.0, format!("{runs} runs, min slack {worst:.4}"))];
    Ok(ScenarioOutcome { records: seeds.into_iter().flat_map(|s| s.0).collect(), checks })
}

// ---------------------------------------------------------------------------
// conv(Φ) mixture learner

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvParams {
    #[serde(default = "three")]
    d: usize,
    #[serde(default = "delta_default")]
    delta: f64,
    #[serde(default = "beta_default")]
    beta: f64,
    /// Maximizer of the reward; defaults to the box center.
    #[serde(default)]
    center: Option<Vec<f64>>,
    /// Number of projection maps and interpolation maps.
    #[serde(default = "two_two")]
    maps: [usize; 2],
}

fn delta_default() -> f64 {
    0.1
}

fn two_two() -> [usize; 2] {
    [2, 2]
}

/// Reward `u(x) = 1 - ||x - c||^2 / d` on `[0,1]^d`, handled as the loss
/// `||x - c||^2 / d` (constants do not change regret).
pub(super) fn conv_mix(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let p: ConvParams = cfg.params()?;
    if p.d == 0 {
        return Err(Error::config("params.d", "must be positive"));
    }
    let d = p.d;
    let set = ConvexSet::unit_box(d)?;
    let center = p.center.clone().unwrap_or_else(|| vec![0.5; d]);
    if center.len() != d || !set.contains(&center, 0.0) {
        return Err(Error::config("params.center", "must be a point of the unit box"));
    }
    let weight = 2.0 / d as f64;
    let loss = Builtin::QuadraticToAnchor { weight, anchor: center };
    // |∇u| = (2/d)||x - c|| <= 2/sqrt(d); Hessian norm 2/d.
    let g = 2.0 / (d as f64).sqrt();
    let l = weight;
    let n_maps = p.maps[0] + p.maps[1];
    if n_maps == 0 {
        return Err(Error::config("params.maps", "needs at least one map"));
    }
    let k = ((cfg.t as f64).sqrt().ceil() as usize).max(1);
    let bound = conv_mix_bound(cfg.t, g, p.delta, n_maps, p.beta, l);
    let seeds = per_seed(&cfg.seeds, |seed| {
        let mut r = rng(seed, MAPS);
        let mut maps = Vec::with_capacity(n_maps);
        for _ in 0..p.maps[0] {
            maps.push(Deviation::Projection { v: scale(&unit_vector(d, &mut r), p.delta) });
        }
        for _ in 0..p.maps[1] {
            maps.push(Deviation::Interpolate { lambda: p.delta / (d as f64).sqrt(), target: set.sample(&mut r) });
        }
        let root = set.sample(&mut r);
        let mut learner = ConvMix::new(maps.clone(), set.clone(), root, k, g * p.delta, HedgeEta::Horizon { t: cfg.t }, seed)?;
        let mut traj = Trajectory::new(set.clone());
        for _ in 0..cfg.t {
            let x = learner.next()?;
            let l = Loss::Builtin(loss.clone());
            let grad = l.gradient(&x);
            traj.record(x, l)?;
            learner.observe(Feedback::LossGradient(&grad))?;
        }
        let c = conv_phi_regret(&traj, &maps)?;
        let upper = c
            .upper
            .ok_or_else(|| Error::Numerical { msg: "no conv regret certificate".into(), residual: f64::NAN })?;
        let mut rec = RunRecord::new(&cfg.id, seed, cfg.t);
        rec.push("conv_lower", c.lower).push("conv_upper", upper).push("bound", bound);
        Ok(rec)
    })?;
    let within = seeds.iter().filter(|r| r.get("conv_upper").unwrap_or(f64::INFINITY) <= bound).count();
    let need = required(seeds.len(), p.beta);
    let max_up = seeds.iter().filter_map(|r| r.get("conv_upper")).fold(f64::NEG_INFINITY, f64::max);
    let checks = vec![Check::new(
        "conv_bound",
        within >= need,
        format!("{within}/{} seeds within {bound:.4} (need {need}), max certified regret {max_up:.4}", seeds.len()),
    )];
    Ok(ScenarioOutcome { records: seeds, checks })
}

// ---------------------------------------------------------------------------
// Φ_Int

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntParams {
    #[serde(default = "three")]
    d: usize,
    #[serde(default = "delta_default")]
    delta: f64,
    #[serde(default = "one")]
    g: f64,
}

/// GD with `η = D/(G sqrt(T))` on the unit ball against random linear losses.
pub(super) fn phi_int(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let p: IntParams = cfg.params()?;
    if p.d == 0 {
        return Err(Error::config("params.d", "must be positive"));
    }
    let set = ConvexSet::ball(vec![0.0; p.d], 1.0)?;
    let t = cfg.t;
    let eta = set.diameter() / (p.g * (t as f64).sqrt());
    let bound = phi_int_bound(p.delta, p.g, t);
    let marks = cfg.checkpoint_times();
    // Linear utilities are 0-smooth; the game only carries the set and L.
    let game = SmoothGame::new(GameSpec::SinglePlayer {
        utility: Builtin::Linear { v: vec![0.0; p.d] },
        set: set.clone(),
        offset: 0.0,
        scale: 1.0,
    })?;
    let eps_bound = 2.0 * p.delta * p.g / (t as f64).sqrt() + p.delta * p.delta * game.l / 2.0;
    let seeds = per_seed(&cfg.seeds, |seed| {
        let mut r = rng(seed, STREAM);
        let gs: Vec<Vec<f64>> = (0..t).map(|_| scale(&unit_vector(p.d, &mut r), p.g)).collect();
        let mut gd = Gd::new(set.clone(), set.projected_origin(), StepSchedule::Constant { eta })?;
        let traj = run_linear(&mut gd, &set, &gs)?;
        let rep = phi_int_regret(&traj, p.delta)?;
        let emp = EmpiricalDistribution {
            profiles: traj.rounds.iter().map(|r| vec![r.x.clone()]).collect(),
            gradients: gs.iter().map(|g| vec![scale(g, -1.0)]).collect(),
        };
        let cert = certify_phi_equilibrium(
            &emp,
            &game,
            &[DeviationSet::Int { delta: p.delta }],
            CertMode::Linearized { delta: p.delta },
        )?;
        let mut rows = Vec::new();
        for &tt in &marks {
            let mut rec = RunRecord::new(&cfg.id, seed, tt);
            let pre = phi_int_regret(&traj.prefix(tt), p.delta)?;
            rec.push("int_regret", pre.total).push("bound", phi_int_bound(p.delta, p.g, tt));
            rec.push("epsilon", if tt == t { cert[0].epsilon } else { f64::NAN });
            rows.push(rec);
        }
        let exact = rep.exactness == Exactness::Exact && cert[0].exactness == Exactness::Exact;
        Ok((rows, rep.total, cert[0].epsilon, exact))
    })?;
    let worst = seeds.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let worst_eps = seeds.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
    let exact = seeds.iter().all(|s| s.3);
    let checks = vec![
        Check::new(
            "int_regret_bound",
            exact && worst <= bound,
            format!("max exact Φ_Int regret {worst:.4} vs bound {bound:.4} (exact: {exact})"),
        ),
        Check::new(
            "int_certificate",
            worst_eps <= eps_bound,
            format!("max certified epsilon {worst_eps:.6} vs {eps_bound:.6}"),
        ),
    ];
    Ok(ScenarioOutcome { records: seeds.into_iter().flat_map(|s| s.0).collect(), checks })
}

// ---------------------------------------------------------------------------
// Mirror descent

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdParams {
    #[serde(default = "four")]
    d: usize,
    #[serde(default = "eight")]
    family_size: usize,
    #[serde(default)]
    family_seed: u64,
}

fn four() -> usize {
    4
}

/// Negentropy MD with `η = sqrt(2 ln d / (G^2 T))` against losses with
/// iid Uniform[-1, 1] coordinates (`G = 1` in the sup norm).
pub(super) fn md_bregman(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let p: MdParams = cfg.params()?;
    if p.d < 2 {
        return Err(Error::config("params.d", "needs at least two coordinates"));
    }
    let (d, t) = (p.d, cfg.t);
    let set = ConvexSet::simplex(d)?;
    let g = 1.0;
    let eta = (2.0 * (d as f64).ln() / (g * g * t as f64)).sqrt();
    let mut fr = rng(p.family_seed, FAMILY);
    let family: Vec<ProxFunction> = (0..p.family_size)
        .map(|_| ProxFunction::QuadToAnchor { lambda: uniform_in(0.05, 0.9, &mut fr), anchor: dirichlet_one(d, &mut fr) })
        .collect();
    let marks = cfg.checkpoint_times();
    let seeds = per_seed(&cfg.seeds, |seed| {
        let mut r = rng(seed, STREAM);
        let gs: Vec<Vec<f64>> = (0..t).map(|_| (0..d).map(|_| r.random_range(-1.0..=1.0)).collect()).collect();
        let mut md = Md::uniform(d, StepSchedule::Constant { eta })?;
        let traj = run_linear(&mut md, &set, &gs)?;
        let next = traj.next_x.clone().expect("set by run_linear");
        let x1 = &traj.rounds[0].x;
        let mut slack_spec = f64::INFINITY;
        let mut slack_pt = f64::INFINITY;
        let mut cums = Vec::with_capacity(family.len());
        for f in &family {
            let ps = traj.rounds.iter().map(|r| bregman_prox_negentropy(f, &r.x)).collect::<Result<Vec<_>>>()?;
            let p_end = bregman_prox_negentropy(f, &next)?;
            let mut acc = 0.0;
            let cum: Vec<f64> = traj
                .rounds
                .iter()
                .zip(&ps)
                .map(|(r, pt)| {
                    acc += dot(&r.gradient, &sub(&r.x, pt));
                    acc
                })
                .collect();
            let reg = acc;
            let kl1 = kl(&ps[0], x1);
            let f1 = f.value(&ps[0], &set)?;
            let spec = md_bregman_bound(kl1, f1, f.value(&p_end, &set)?, eta, g, t);
            let pt = md_bregman_bound(kl1, f1, f.value(&ps[t - 1], &set)?, eta, g, t);
            slack_spec = slack_spec.min(spec - reg);
            slack_pt = slack_pt.min(pt - reg);
            cums.push((cum, spec));
        }
        let mut rows = Vec::new();
        for &tt in &marks {
            let mut rec = RunRecord::new(&cfg.id, seed, tt);
            for (k, (cum, spec)) in cums.iter().enumerate() {
                rec.push(format!("reg_f{k}"), cum[tt - 1]).push(format!("bound_f{k}"), *spec);
            }
            rows.push(rec);
        }
        Ok((rows, slack_spec, slack_pt))
    })?;
    let runs = seeds.len() * family.len();
    let worst = seeds.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let worst_pt = seeds.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check::new("md_bregman", worst >= 0.0, format!("{runs} runs, min slack {worst:.4} (end point f(p^(T+1)))")),
        Check::new("md_bregman_pt", worst_pt >= 0.0, format!("{runs} runs, min slack {worst_pt:.4} (end point f(p^T))")),
    ];
    Ok(ScenarioOutcome { records: seeds.into_iter().flat_map(|s| s.0).collect(), checks })
}
