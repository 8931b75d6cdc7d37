//! Online learners with a uniform round contract: `next()` yields the play
//! `x^t`, `observe(feedback)` closes the round.
//!
//! `next()` is idempotent within a round, so randomized learners draw once
//! per round no matter how often the play is queried.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::deviations::Deviation;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{ConvexSet, MEMBER_TOL};
use crate::vecops::{dot, sub};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant { eta: f64 },
    /// `eta_t = scale / sqrt(t)`
    InverseSqrt { scale: f64 },
    /// `eta = sqrt((D^2 + 2 B_f) / (G^2 T))`
    HorizonTuned { d: f64, bf: f64, g: f64, t: usize },
}

impl StepSchedule {
    /// Step used in round `t` (1-based).
    pub fn eta(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::Constant { eta } => eta,
            StepSchedule::InverseSqrt { scale } => scale / (t.max(1) as f64).sqrt(),
            StepSchedule::HorizonTuned { d, bf, g, t: horizon } => {
                ((d * d + 2.0 * bf) / (g * g * horizon as f64)).sqrt()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::Constant { eta } => eta > 0.0 && eta.is_finite(),
            StepSchedule::InverseSqrt { scale } => scale > 0.0 && scale.is_finite(),
            StepSchedule::HorizonTuned { d, bf, g, t } => {
                g > 0.0 && t > 0 && d * d + 2.0 * bf > 0.0 && (d * d + 2.0 * bf).is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::input(format!("step schedule must be positive and finite: {self:?}")))
        }
    }
}

/// Feedback closing a round.
pub enum Feedback<'a> {
    /// Gradient of the round's loss at the play.
    LossGradient(&'a [f64]),
    /// Gradient of the round's utility at the play.
    UtilityGradient(&'a [f64]),
    /// Reward per expert, each in `[0, 1]`.
    Rewards(&'a [f64]),
    /// The round's full reward function, values in `[0, 1]`.
    Utility(&'a dyn Fn(&[f64]) -> f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackKind {
    Gradient,
    RewardVector,
    RewardOracle,
}

pub trait Learner: Send {
    /// The play of the current round.
    fn next(&mut self) -> Result<Vec<f64>>;
    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()>;
    /// Number of completed rounds.
    fn rounds(&self) -> usize;
    fn feedback_kind(&self) -> FeedbackKind;
}

fn loss_gradient(fb: Feedback<'_>, dim: usize) -> Result<Vec<f64>> {
    let g = match fb {
        Feedback::LossGradient(g) => g.to_vec(),
        Feedback::UtilityGradient(g) => g.iter().map(|v| -v).collect(),
        _ => return Err(Error::input("gradient learners need gradient feedback")),
    };
    check_dim(dim, g.len())?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("non-finite gradient"));
    }
    Ok(g)
}

/// Projected online gradient descent.
#[derive(Debug, Clone)]
pub struct Gd {
    pub set: ConvexSet,
    pub x: Vec<f64>,
    pub schedule: StepSchedule,
    pub t: usize,
}

impl Gd {
    pub fn new(set: ConvexSet, x1: Vec<f64>, schedule: StepSchedule) -> Result<Self> {
        set.validate()?;
        schedule.validate()?;
        check_dim(set.dim(), x1.len())?;
        if !set.contains(&x1, MEMBER_TOL) {
            return Err(Error::input("GD start point must lie in X"));
        }
        Ok(Self { set, x: x1, schedule, t: 0 })
    }

    /// `x <- Π[x - eta_t g]`
    pub fn update(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.set.dim(), g.len())?;
        let eta = self.schedule.eta(self.t + 1);
        let step: Vec<f64> = self.x.iter().zip(g).map(|(x, gi)| x - eta * gi).collect();
        self.x = self.set.project(&step)?;
        self.t += 1;
        Ok(())
    }
}

impl Learner for Gd {
    fn next(&mut self) -> Result<Vec<f64>> {
        Ok(self.x.clone())
    }
    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        let g = loss_gradient(feedback, self.set.dim())?;
        self.update(&g)
    }
    fn rounds(&self) -> usize {
        self.t
    }
    fn feedback_kind(&self) -> FeedbackKind {
        FeedbackKind::Gradient
    }
}

/// Optimistic gradient: `x^t = Π[w^{t-1} - eta g^{t-1}]`,
/// `w^t = Π[w^{t-1} - eta g^t]`, with `g^0 = 0`.
#[derive(Debug, Clone)]
pub struct Og {
    pub set: ConvexSet,
    pub w: Vec<f64>,
    pub x: Vec<f64>,
    pub last_gradient: Vec<f64>,
    pub schedule: StepSchedule,
    pub t: usize,
}

impl Og {
    pub fn new(set: ConvexSet, w0: Option<Vec<f64>>, schedule: StepSchedule) -> Result<Self> {
        set.validate()?;
        schedule.validate()?;
        let w = match w0 {
            Some(w) => {
                check_dim(set.dim(), w.len())?;
                if !set.contains(&w, MEMBER_TOL) {
                    return Err(Error::input("OG start point must lie in X"));
                }
                w
            }
            None => set.projected_origin(),
        };
        let d = set.dim();
        Ok(Self { x: w.clone(), w, last_gradient: vec![0.0; d], set, schedule, t: 0 })
    }

    pub fn update(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.set.dim(), g.len())?;
        let eta = self.schedule.eta(self.t + 1);
        let w_next = self.set.project(&self.w.iter().zip(g).map(|(w, gi)| w - eta * gi).collect::<Vec<_>>())?;
        let eta_next = self.schedule.eta(self.t + 2);
        self.x = self.set.project(&w_next.iter().zip(g).map(|(w, gi)| w - eta_next * gi).collect::<Vec<_>>())?;
        self.w = w_next;
        self.last_gradient = g.to_vec();
        self.t += 1;
        Ok(())
    }
}

impl Learner for Og {
    fn next(&mut self) -> Result<Vec<f64>> {
        Ok(self.x.clone())
    }
    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        let g = loss_gradient(feedback, self.set.dim())?;
        self.update(&g)
    }
    fn rounds(&self) -> usize {
        self.t
    }
    fn feedback_kind(&self) -> FeedbackKind {
        FeedbackKind::Gradient
    }
}

/// Mirror descent on the simplex with the negative-entropy mirror map.
#[derive(Debug, Clone)]
pub struct Md {
    pub p: Vec<f64>,
    pub schedule: StepSchedule,
    pub t: usize,
}

impl Md {
    pub fn new(p1: Vec<f64>, schedule: StepSchedule) -> Result<Self> {
        schedule.validate()?;
        if p1.is_empty() || p1.iter().any(|v| *v < 0.0) || (p1.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::input("MD start point must lie on the simplex"));
        }
        Ok(Self { p: p1, schedule, t: 0 })
    }

    pub fn uniform(d: usize, schedule: StepSchedule) -> Result<Self> {
        if d == 0 {
            return Err(Error::input("MD needs a positive dimension"));
        }
        Self::new(vec![1.0 / d as f64; d], schedule)
    }

    /// `p <- p * exp(-eta g)`, renormalized.
    pub fn update(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.p.len(), g.len())?;
        let eta = self.schedule.eta(self.t + 1);
        self.p = exp_weights(&self.p, g, -eta);
        self.t += 1;
        Ok(())
    }
}

/// `w_i ∝ p_i exp(s g_i)` with the max exponent subtracted; zero weights
/// stay zero.
fn exp_weights(p: &[f64], g: &[f64], s: f64) -> Vec<f64> {
    let m = p
        .iter()
        .zip(g)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(_, gi)| s * gi)
        .fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = p.iter().zip(g).map(|(pi, gi)| if *pi > 0.0 { pi * (s * gi - m).exp() } else { 0.0 }).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

impl Learner for Md {
    fn next(&mut self) -> Result<Vec<f64>> {
        Ok(self.p.clone())
    }
    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        let g = loss_gradient(feedback, self.p.len())?;
        self.update(&g)
    }
    fn rounds(&self) -> usize {
        self.t
    }
    fn feedback_kind(&self) -> FeedbackKind {
        FeedbackKind::Gradient
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "eta", rename_all = "snake_case")]
pub enum HedgeEta {
    Fixed { value: f64 },
    /// `sqrt(ln n / T)` for a known horizon.
    Horizon { t: usize },
    /// `sqrt(ln n / t)` in round `t`.
    Anytime,
}

/// Hedge over `n` experts with rewards in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Hedge {
    cumulative: Vec<f64>,
    eta: HedgeEta,
    t: usize,
    weights: Vec<f64>,
    expected_total: f64,
}

impl Hedge {
    pub fn new(n: usize, eta: HedgeEta) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("Hedge needs at least one expert"));
        }
        match eta {
            HedgeEta::Fixed { value } if !(value >= 0.0 && value.is_finite()) => {
                return Err(Error::input("Hedge step must be finite and nonnegative"))
            }
            HedgeEta::Horizon { t: 0 } => return Err(Error::input("Hedge horizon must be positive")),
            _ => {}
        }
        Ok(Self { cumulative: vec![0.0; n], eta, t: 0, weights: vec![1.0 / n as f64; n], expected_total: 0.0 })
    }

    pub fn n(&self) -> usize {
        self.cumulative.len()
    }

    /// Step used in round `t` (1-based).
    pub fn eta_at(&self, t: usize) -> f64 {
        let logn = (self.n() as f64).ln();
        match self.eta {
            HedgeEta::Fixed { value } => value,
            HedgeEta::Horizon { t: horizon } => (logn / horizon as f64).sqrt(),
            HedgeEta::Anytime => (logn / t.max(1) as f64).sqrt(),
        }
    }

    /// Current distribution over experts.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Applies one round of rewards; each must lie in `[0, 1]`.
    pub fn update(&mut self, rewards: &[f64]) -> Result<()> {
        check_dim(self.n(), rewards.len())?;
        if let Some(r) = rewards.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::input(format!("Hedge reward {r} outside [0, 1]")));
        }
        self.expected_total += dot(&self.weights, rewards);
        for (c, r) in self.cumulative.iter_mut().zip(rewards) {
            *c += r;
        }
        self.t += 1;
        let eta = self.eta_at(self.t + 1);
        let uniform = vec![1.0; self.n()];
        self.weights = exp_weights(&uniform, &self.cumulative, eta);
        Ok(())
    }

    /// `max_i sum_t r_i^t - sum_t <p^t, r^t>`
    pub fn external_regret(&self) -> f64 {
        self.cumulative.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - self.expected_total
    }

    pub fn cumulative_rewards(&self) -> &[f64] {
        &self.cumulative
    }
}

impl Learner for Hedge {
    fn next(&mut self) -> Result<Vec<f64>> {
        Ok(self.weights.clone())
    }
    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        match feedback {
            Feedback::Rewards(r) => self.update(r),
            _ => Err(Error::input("Hedge needs a reward vector")),
        }
    }
    fn rounds(&self) -> usize {
        self.t
    }
    fn feedback_kind(&self) -> FeedbackKind {
        FeedbackKind::RewardVector
    }
}

/// Draws an index from a distribution using one uniform variate.
fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|v| *v > 0.0).unwrap_or(p.len() - 1)
}

/// One draw of the tree sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeDraw {
    pub point: Vec<f64>,
    /// Depth in `1..=h`; the root has depth 1.
    pub depth: usize,
    /// Indices of the maps applied on the way from the root, `depth - 1` long.
    pub path: Vec<usize>,
    pub map_applications: usize,
}

/// Builds `x_1 = root, x_k = φ_k(x_{k-1})` with `φ_k` iid from `p` for
/// `k = 2..h` and returns a uniformly chosen node of that chain.
pub fn tree_sample<R: Rng + ?Sized>(
    root: &[f64],
    h: usize,
    p: &[f64],
    maps: &[Deviation],
    set: &ConvexSet,
    rng: &mut R,
) -> Result<TreeDraw> {
    if h < 2 {
        return Err(Error::input("tree depth h must be at least 2"));
    }
    check_dim(maps.len(), p.len())?;
    let mut nodes = vec![root.to_vec()];
    let mut path = Vec::with_capacity(h - 1);
    for _ in 2..=h {
        let i = sample_index(p, rng);
        path.push(i);
        let next = maps[i].apply(nodes.last().expect("nonempty"), set)?;
        nodes.push(next);
    }
    let k = rng.random_range(0..h);
    path.truncate(k);
    Ok(TreeDraw { point: nodes.swap_remove(k), depth: k + 1, path, map_applications: h - 1 })
}

/// Per-round log of a Hedge-driven sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeRound {
    pub probs: Vec<f64>,
    pub rewards: Vec<f64>,
}

/// Φ-regret minimization by sampling from the Hedge-induced tree.
#[derive(Debug, Clone)]
pub struct TreeSampler {
    pub maps: Vec<Deviation>,
    pub set: ConvexSet,
    pub root: Vec<f64>,
    pub h: usize,
    pub hedge: Hedge,
    rng: ChaCha8Rng,
    current: Option<Vec<f64>>,
    pub log: Vec<HedgeRound>,
    pub map_applications: usize,
    pub reward_evaluations: usize,
}

impl TreeSampler {
    pub fn new(maps: Vec<Deviation>, set: ConvexSet, root: Vec<f64>, h: usize, eta: HedgeEta, seed: u64) -> Result<Self> {
        set.validate()?;
        check_dim(set.dim(), root.len())?;
        if !set.contains(&root, MEMBER_TOL) {
            return Err(Error::input("tree root must lie in X"));
        }
        if h < 2 {
            return Err(Error::input("tree depth h must be at least 2"));
        }
        let hedge = Hedge::new(maps.len(), eta)?;
        Ok(Self {
            maps,
            set,
            root,
            h,
            hedge,
            rng: ChaCha8Rng::seed_from_u64(seed),
            current: None,
            log: Vec::new(),
            map_applications: 0,
            reward_evaluations: 0,
        })
    }

    /// `h = ceil(sqrt(T))`, at least 2.
    pub fn depth_for_horizon(t: usize) -> usize {
        ((t as f64).sqrt().ceil() as usize).max(2)
    }
}

impl Learner for TreeSampler {
    fn next(&mut self) -> Result<Vec<f64>> {
        if let Some(x) = &self.current {
            return Ok(x.clone());
        }
        let draw = tree_sample(&self.root, self.h, self.hedge.weights(), &self.maps, &self.set, &mut self.rng)?;
        self.map_applications += draw.map_applications;
        self.current = Some(draw.point.clone());
        Ok(draw.point)
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        let Feedback::Utility(u) = feedback else {
            return Err(Error::input("the tree sampler needs the round's reward function"));
        };
        let x = self.next()?;
        let mut rewards = Vec::with_capacity(self.maps.len());
        for m in &self.maps {
            let y = m.apply(&x, &self.set)?;
            self.map_applications += 1;
            rewards.push(u(&y));
            self.reward_evaluations += 1;
        }
        let probs = self.hedge.weights().to_vec();
        self.hedge.update(&rewards)?;
        self.log.push(HedgeRound { probs, rewards });
        self.current = None;
        Ok(())
    }

    fn rounds(&self) -> usize {
        self.hedge.t
    }

    fn feedback_kind(&self) -> FeedbackKind {
        FeedbackKind::RewardOracle
    }
}

/// conv(Φ)-regret minimization: plays a uniform node of the chain
/// `x_k = Σ_φ p(φ) φ(x_{k-1})` and feeds linearized rewards to Hedge.
#[derive(Debug, Clone)]
pub struct ConvMix {
    pub maps: Vec<Deviation>,
    pub set: ConvexSet,
    pub root: Vec<f64>,
    pub k: usize,
    pub hedge: Hedge,
    /// Declared bound `G delta` on `|<∇u, φ(x) - x>|`.
    pub g_delta: f64,
    rng: ChaCha8Rng,
    current: Option<Vec<f64>>,
    pub log: Vec<HedgeRound>,
}

impl ConvMix {
    pub fn new(
        maps: Vec<Deviation>,
        set: ConvexSet,
        root: Vec<f64>,
        k: usize,
        g_delta: f64,
        eta: HedgeEta,
        seed: u64,
    ) -> Result<Self> {
        set.validate()?;
        check_dim(set.dim(), root.len())?;
        if !set.contains(&root, MEMBER_TOL) {
            return Err(Error::input("root must lie in X"));
        }
        if k < 1 {
            return Err(Error::input("chain length K must be positive"));
        }
        if !(g_delta >= 0.0 && g_delta.is_finite()) {
            return Err(Error::input("G*delta must be finite and nonnegative"));
        }
        let hedge = Hedge::new(maps.len(), eta)?;
        Ok(Self {
            maps,
            set,
            root,
            k,
            hedge,
            g_delta,
            rng: ChaCha8Rng::seed_from_u64(seed),
            current: None,
            log: Vec::new(),
        })
    }

    /// The chain `x_1..x_K` under the current Hedge distribution.
    pub fn chain(&self) -> Result<Vec<Vec<f64>>> {
        let p = self.hedge.weights();
        let mut nodes = vec![self.root.clone()];
        for _ in 1..self.k {
            let prev = nodes.last().expect("nonempty");
            let mut next = vec![0.0; prev.len()];
            for (m, pm) in self.maps.iter().zip(p) {
                if *pm == 0.0 {
                    continue;
                }
                let y = m.apply(prev, &self.set)?;
                for (n, yi) in next.iter_mut().zip(&y) {
                    *n += pm * yi;
                }
            }
            nodes.push(next);
        }
        Ok(nodes)
    }
}

impl Learner for ConvMix {
    fn next(&mut self) -> Result<Vec<f64>> {
        if let Some(x) = &self.current {
            return Ok(x.clone());
        }
        let mut nodes = self.chain()?;
        let i = self.rng.random_range(0..nodes.len());
        let x = nodes.swap_remove(i);
        self.current = Some(x.clone());
        Ok(x)
    }

    fn observe(&mut self, feedback: Feedback<'_>) -> Result<()> {
        let g = match feedback {
            Feedback::UtilityGradient(g) => g.to_vec(),
            Feedback::LossGradient(g) => g.iter().map(|v| -v).collect(),
            _ => return Err(Error::input("ConvMix needs gradient feedback")),
        };
        check_dim(self.set.dim(), g.len())?;
        let x = self.next()?;
        let mut raw = Vec::with_capacity(self.maps.len());
        for m in &self.maps {
            let r = dot(&g, &sub(&m.apply(&x, &self.set)?, &x));
            if r.abs() > self.g_delta * (1.0 + 1e-9) + 1e-15 {
                return Err(Error::input(format!(
                    "linearized reward {r} exceeds the declared bound G*delta = {}",
                    self.g_delta
                )));
            }
            raw.push(r);
        }
        let mapped: Vec<f64> = if self.g_delta > 0.0 {
            raw.iter().map(|r| ((r + self.g_delta) / (2.0 * self.g_delta)).clamp(0.0, 1.0)).collect()
        } else {
            vec![0.5; raw.len()]
        };
        let probs = self.hedge.weights().to_vec();
        self.hedge.update(&mapped)?;
        self.log.push(HedgeRound { probs, rewards: raw });
        self.current = None;
        Ok(())
    }

    fn rounds(&self) -> usize {
        self.hedge.t
    }

    fn feedback_kind(&self) -> FeedbackKind {
        FeedbackKind::Gradient
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn interval(lo: f64, hi: f64) -> ConvexSet {
        ConvexSet::interval(lo, hi).unwrap()
    }

    #[test]
    fn gd_examples() {
        let mut gd = Gd::new(interval(-1.0, 1.0), vec![0.0], StepSchedule::Constant { eta: 0.1 }).unwrap();
        gd.update(&[1.0]).unwrap();
        assert_abs_diff_eq!(gd.x[0], -0.1, epsilon = 1e-15);
        let mut gd = Gd::new(interval(0.0, 1.0), vec![0.05], StepSchedule::Constant { eta: 0.1 }).unwrap();
        gd.update(&[1.0]).unwrap();
        assert_eq!(gd.x, vec![0.0]);
        gd.update(&[0.0]).unwrap();
        assert_eq!(gd.x, vec![0.0]);
        assert_eq!(gd.t, 2);
    }

    #[test]
    fn og_examples() {
        let mut og = Og::new(interval(0.0, 1.0), Some(vec![0.5]), StepSchedule::Constant { eta: 0.1 }).unwrap();
        assert_eq!(og.next().unwrap(), vec![0.5]);
        og.update(&[1.0]).unwrap();
        assert_abs_diff_eq!(og.w[0], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(og.x[0], 0.3, epsilon = 1e-15);

        let mut og = Og::new(interval(0.0, 1.0), Some(vec![0.05]), StepSchedule::Constant { eta: 0.1 }).unwrap();
        og.update(&[1.0]).unwrap();
        assert_eq!((og.w[0], og.x[0]), (0.0, 0.0));

        let mut og = Og::new(interval(-1.0, 1.0), Some(vec![0.3]), StepSchedule::Constant { eta: 0.1 }).unwrap();
        for _ in 0..5 {
            og.update(&[0.0]).unwrap();
            assert_eq!(og.x, vec![0.3]);
        }
    }

    #[test]
    fn md_examples() {
        let e = std::f64::consts::E;
        let mut md = Md::new(vec![0.5, 0.5], StepSchedule::Constant { eta: 1.0 }).unwrap();
        md.update(&[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(md.p[0], 1.0 / (1.0 + e), epsilon = 1e-15);
        assert_abs_diff_eq!(md.p[1], e / (1.0 + e), epsilon = 1e-15);
        let before = md.p.clone();
        md.update(&[0.0, 0.0]).unwrap();
        assert_eq!(md.p, before);
        let mut md = Md::new(vec![1.0, 0.0], StepSchedule::Constant { eta: 1.0 }).unwrap();
        md.update(&[5.0, -3.0]).unwrap();
        assert_eq!(md.p, vec![1.0, 0.0]);
        let mut md = Md::new(vec![0.5, 0.5], StepSchedule::Constant { eta: 1.0 }).unwrap();
        md.update(&[1e6, 0.0]).unwrap();
        assert!(md.p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn hedge_examples() {
        let e = std::f64::consts::E;
        let mut h = Hedge::new(2, HedgeEta::Fixed { value: 1.0 }).unwrap();
        h.update(&[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(h.weights()[0], e / (e + 1.0), epsilon = 1e-15);
        let w = h.weights().to_vec();
        h.update(&[0.3, 0.3]).unwrap();
        assert_abs_diff_eq!(h.weights()[0], w[0], epsilon = 1e-15);
        let mut one = Hedge::new(1, HedgeEta::Horizon { t: 10 }).unwrap();
        one.update(&[0.7]).unwrap();
        assert_eq!(one.weights(), &[1.0]);
        assert!(matches!(h.update(&[1.5, 0.0]), Err(Error::Input(_))));
        assert!(matches!(h.update(&[-0.1, 0.0]), Err(Error::Input(_))));
    }

    #[test]
    fn schedules() {
        assert_eq!(StepSchedule::InverseSqrt { scale: 2.0 }.eta(4), 1.0);
        let tuned = StepSchedule::HorizonTuned { d: 2.0, bf: 0.0, g: 1.0, t: 16 };
        assert_abs_diff_eq!(tuned.eta(1), 0.5, epsilon = 1e-15);
        assert!(StepSchedule::Constant { eta: 0.0 }.validate().is_err());
    }

    #[test]
    fn tree_sample_degenerate_cases() {
        let set = interval(0.0, 1.0);
        let maps = vec![Deviation::Identity];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let d = tree_sample(&[0.4], 3, &[1.0], &maps, &set, &mut rng).unwrap();
            assert_eq!(d.point, vec![0.4]);
        }
        let maps = vec![Deviation::Constant { point: vec![1.0] }];
        let mut roots = 0;
        for _ in 0..2000 {
            let d = tree_sample(&[0.0], 2, &[1.0], &maps, &set, &mut rng).unwrap();
            if d.point == vec![0.0] {
                roots += 1;
            }
        }
        assert!((roots as f64 / 2000.0 - 0.5).abs() < 0.05);
        assert!(tree_sample(&[0.0], 1, &[1.0], &maps, &set, &mut rng).is_err());
    }

    #[test]
    fn tree_sampler_cost_accounting() {
        let set = ConvexSet::simplex(8).unwrap();
        let maps: Vec<Deviation> = (0..8)
            .map(|i| {
                let mut p = vec![0.0; 8];
                p[i] = 1.0;
                Deviation::Constant { point: p }
            })
            .collect();
        let t_total = 1024;
        let h = TreeSampler::depth_for_horizon(t_total);
        assert_eq!(h, 32);
        let mut s = TreeSampler::new(maps, set.clone(), vec![0.125; 8], h, HedgeEta::Horizon { t: t_total }, 1).unwrap();
        s.next().unwrap();
        s.next().unwrap();
        assert_eq!(s.map_applications, 31);
        s.observe(Feedback::Utility(&|x: &[f64]| x[0])).unwrap();
        assert_eq!(s.map_applications, 31 + 8);
        assert_eq!(s.reward_evaluations, 8);
    }

    #[test]
    fn tree_sampler_zero_rewards_keep_uniform() {
        let set = interval(0.0, 1.0);
        let maps = vec![Deviation::Identity, Deviation::Constant { point: vec![0.0] }];
        let mut s = TreeSampler::new(maps, set, vec![0.5], 4, HedgeEta::Horizon { t: 16 }, 9).unwrap();
        for _ in 0..16 {
            s.next().unwrap();
            s.observe(Feedback::Utility(&|_: &[f64]| 0.0)).unwrap();
            assert_eq!(s.hedge.weights(), &[0.5, 0.5]);
        }
    }

    #[test]
    fn depth_rounding() {
        assert_eq!(TreeSampler::depth_for_horizon(2048), 46);
        assert_eq!(TreeSampler::depth_for_horizon(1), 2);
    }

    #[test]
    fn convmix_examples() {
        let set = interval(0.0, 1.0);
        let mut c = ConvMix::new(vec![Deviation::Identity], set.clone(), vec![0.3], 5, 0.1, HedgeEta::Anytime, 0).unwrap();
        assert_eq!(c.next().unwrap(), vec![0.3]);

        let c = ConvMix::new(
            vec![Deviation::Constant { point: vec![0.9] }],
            set.clone(),
            vec![0.3],
            4,
            1.0,
            HedgeEta::Anytime,
            0,
        )
        .unwrap();
        assert_eq!(c.chain().unwrap(), vec![vec![0.3], vec![0.9], vec![0.9], vec![0.9]]);

        let c = ConvMix::new(
            vec![Deviation::Constant { point: vec![1.0] }, Deviation::Constant { point: vec![0.0] }],
            set,
            vec![0.3],
            2,
            1.0,
            HedgeEta::Anytime,
            0,
        )
        .unwrap();
        assert_eq!(c.chain().unwrap()[1], vec![0.5]);
    }

    #[test]
    fn convmix_rejects_rewards_beyond_declared_bound() {
        let set = interval(0.0, 1.0);
        let mut c = ConvMix::new(
            vec![Deviation::Constant { point: vec![1.0] }],
            set,
            vec![0.0],
            2,
            0.1,
            HedgeEta::Anytime,
            3,
        )
        .unwrap();
        c.next().unwrap();
        let x = c.next().unwrap();
        let res = c.observe(Feedback::UtilityGradient(&[1.0]));
        if x == vec![0.0] {
            assert!(matches!(res, Err(Error::Input(_))));
        }
    }

    #[test]
    fn gd_telescoping_identity() {
        let set = ConvexSet::ball(vec![0.0, 0.0], 1e6).unwrap();
        let eta = 0.05;
        let mut gd = Gd::new(set, vec![0.1, -0.2], StepSchedule::Constant { eta }).unwrap();
        let x1 = gd.x.clone();
        let mut sum = [0.0, 0.0];
        for t in 0..100 {
            let g = [(t as f64).sin(), (t as f64 * 0.7).cos()];
            sum[0] += eta * g[0];
            sum[1] += eta * g[1];
            gd.update(&g).unwrap();
        }
        assert_abs_diff_eq!(sum[0], x1[0] - gd.x[0], epsilon = 1e-12);
        assert_abs_diff_eq!(sum[1], x1[1] - gd.x[1], epsilon = 1e-12);
    }
}
