//! Smooth games, uncoupled dynamics and Φ-equilibrium certification.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audit::{linearized_gain, Exactness, Loss, Trajectory, Witness};
use crate::deviations::{DeviationSet, SharedOracle};
use crate::error::{check_dim, Error, Result};
use crate::geometry::ConvexSet;
use crate::hardness::FkInstance;
use crate::learners::{Feedback, FeedbackKind, Learner};
use crate::oracles::{Builtin, Convexity, DiffOracle, FnOracle, Oracle};
use crate::vecops::{dist, dist_sq, norm};

fn one() -> f64 {
    1.0
}

/// Shipped game instances.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "game", rename_all = "snake_case")]
pub enum GameSpec {
    /// One player with utility `offset + scale * f(x)`.
    SinglePlayer {
        utility: Builtin,
        set: ConvexSet,
        #[serde(default)]
        offset: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `u_1 = (x_1 - x_2)^2 = -u_2` on `[-1, 1]^2`.
    SquaredDifference,
    /// `u_1 = s x y = -u_2` on `[-1, 1]^2`.
    Bilinear {
        #[serde(default = "one")]
        scale: f64,
    },
    /// One player maximizing `f_k` over its nonnegative l1 ball.
    Fk { graph: crate::hardness::Graph, k: usize },
}

/// A game with per-player sets and declared constants `G` (gradient norm)
/// and `L` (joint gradient Lipschitzness).
#[derive(Debug, Clone)]
pub struct SmoothGame {
    pub spec: Arc<GameSpec>,
    pub sets: Vec<ConvexSet>,
    pub g: f64,
    pub l: f64,
}

impl SmoothGame {
    pub fn new(spec: GameSpec) -> Result<Self> {
        let square = || ConvexSet::interval(-1.0, 1.0);
        let (sets, g, l) = match &spec {
            GameSpec::SinglePlayer { utility, set, scale, offset } => {
                if !(scale.is_finite() && offset.is_finite()) {
                    return Err(Error::input("utility scale and offset must be finite"));
                }
                let o = Oracle::new(utility.clone(), set.clone())?;
                let g = o.lipschitz().ok_or_else(|| Error::input("utility has no declared Lipschitz constant"))?;
                let l = o.smoothness().ok_or_else(|| Error::input("utility is not smooth"))?;
                (vec![set.clone()], scale.abs() * g, scale.abs() * l)
            }
            GameSpec::SquaredDifference => (vec![square()?, square()?], 4.0, 2.0 * 2f64.sqrt()),
            GameSpec::Bilinear { scale } => {
                if !scale.is_finite() {
                    return Err(Error::input("bilinear scale must be finite"));
                }
                (vec![square()?, square()?], scale.abs(), scale.abs())
            }
            GameSpec::Fk { graph, k } => {
                let inst = FkInstance::new(graph.clone(), *k)?;
                let o = Oracle::new(Builtin::MotzkinFk { graph: graph.clone(), k: *k }, inst.domain.clone())?;
                (vec![inst.domain], o.lipschitz().expect("declared"), o.smoothness().expect("declared"))
            }
        };
        Ok(Self { spec: Arc::new(spec), sets, g, l })
    }

    pub fn n(&self) -> usize {
        self.sets.len()
    }

    /// `u_i(x)`
    pub fn utility(&self, i: usize, profile: &[Vec<f64>]) -> f64 {
        utility(&self.spec, i, profile)
    }

    /// `∇_{x_i} u_i(x)`
    pub fn gradient(&self, i: usize, profile: &[Vec<f64>]) -> Vec<f64> {
        gradient(&self.spec, i, profile)
    }

    fn check_profile(&self, profile: &[Vec<f64>]) -> Result<()> {
        check_dim(self.n(), profile.len())?;
        for (i, (x, s)) in profile.iter().zip(&self.sets).enumerate() {
            check_dim(s.dim(), x.len())?;
            if !s.contains(x, 1e-7) {
                return Err(Error::input(format!("player {i} played outside its strategy set")));
            }
        }
        Ok(())
    }

    /// Checks the declared `G` and `L` on sampled profiles and pairs.
    /// Returns the largest observed ratios `(||∇||/G, Lip/L)`.
    pub fn check_constants(&self, samples: usize, seed: u64) -> Result<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = (0.0f64, 0.0f64);
        let draw = |rng: &mut ChaCha8Rng| self.sets.iter().map(|s| s.sample(rng)).collect::<Vec<_>>();
        for _ in 0..samples {
            let a = draw(&mut rng);
            let b = draw(&mut rng);
            let gap = a.iter().zip(&b).map(|(x, y)| dist_sq(x, y)).sum::<f64>().sqrt();
            for i in 0..self.n() {
                let ga = self.gradient(i, &a);
                if self.g > 0.0 {
                    worst.0 = worst.0.max(norm(&ga) / self.g);
                }
                if gap > 0.0 && self.l > 0.0 {
                    worst.1 = worst.1.max(dist(&ga, &self.gradient(i, &b)) / (self.l * gap));
                }
            }
        }
        if worst.0 > 1.0 + 1e-9 || worst.1 > 1.0 + 1e-9 {
            return Err(Error::input(format!(
                "declared constants violated: gradient ratio {}, Lipschitz ratio {}",
                worst.0, worst.1
            )));
        }
        Ok(worst)
    }
}

fn utility(spec: &GameSpec, i: usize, p: &[Vec<f64>]) -> f64 {
    match spec {
        GameSpec::SinglePlayer { utility, offset, scale, .. } => offset + scale * utility.value(&p[0]),
        GameSpec::SquaredDifference => {
            let s = (p[0][0] - p[1][0]).powi(2);
            if i == 0 {
                s
            } else {
                -s
            }
        }
        GameSpec::Bilinear { scale } => {
            let v = scale * p[0][0] * p[1][0];
            if i == 0 {
                v
            } else {
                -v
            }
        }
        GameSpec::Fk { graph, k } => crate::hardness::fk_value(graph, *k, &p[0]),
    }
}

fn gradient(spec: &GameSpec, i: usize, p: &[Vec<f64>]) -> Vec<f64> {
    match spec {
        GameSpec::SinglePlayer { utility, scale, .. } => utility.gradient(&p[0]).into_iter().map(|g| scale * g).collect(),
        GameSpec::SquaredDifference => {
            let d = 2.0 * (p[0][0] - p[1][0]);
            let _ = i;
            vec![d]
        }
        GameSpec::Bilinear { scale } => {
            if i == 0 {
                vec![scale * p[1][0]]
            } else {
                vec![-scale * p[0][0]]
            }
        }
        GameSpec::Fk { graph, k } => crate::hardness::fk_gradient(graph, *k, &p[0]),
    }
}

/// Uniform distribution over the played joint profiles, with each player's
/// own utility gradient at every profile.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmpiricalDistribution {
    /// `profiles[t][i]` is player `i`'s strategy in round `t`.
    pub profiles: Vec<Vec<Vec<f64>>>,
    /// `gradients[t][i] = ∇_{x_i} u_i(x^t)`; empty when not recorded.
    pub gradients: Vec<Vec<Vec<f64>>>,
}

impl EmpiricalDistribution {
    pub fn point_mass(profile: Vec<Vec<f64>>, gradients: Option<Vec<Vec<f64>>>) -> Self {
        Self { profiles: vec![profile], gradients: gradients.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    fn player_check(&self, player: usize) -> Result<()> {
        if self.is_empty() {
            return Err(Error::input("empty support"));
        }
        if player >= self.profiles[0].len() {
            return Err(Error::input(format!("no player {player}")));
        }
        Ok(())
    }

    pub fn strategies(&self, player: usize) -> Result<Vec<&[f64]>> {
        self.player_check(player)?;
        Ok(self.profiles.iter().map(|p| p[player].as_slice()).collect())
    }

    pub fn gradients(&self, player: usize) -> Result<Vec<&[f64]>> {
        self.player_check(player)?;
        if self.gradients.len() != self.profiles.len() {
            return Err(Error::input("gradients were not recorded for every support point"));
        }
        Ok(self.gradients.iter().map(|g| g[player].as_slice()).collect())
    }

    /// `||g^t - g^{t-1}||^2` for `t >= 2`.
    pub fn gradient_variation(&self, player: usize) -> Result<Vec<f64>> {
        let gs = self.gradients(player)?;
        Ok(gs.windows(2).map(|w| dist_sq(w[1], w[0])).collect())
    }
}

/// Output of a dynamics run.
#[derive(Debug, Clone)]
pub struct DynamicsRun {
    /// Player `i`'s losses `y ↦ -u_i(y, x_{-i}^t)`.
    pub trajectories: Vec<Trajectory>,
    pub empirical: EmpiricalDistribution,
}

/// Runs all learners in lockstep for `t` rounds. Gradient learners see only
/// `∇_{x_i} u_i(x^t)`; reward-oracle learners see `u_i(·, x_{-i}^t)`.
pub fn run_uncoupled_dynamics(game: &SmoothGame, learners: &mut [Box<dyn Learner>], t: usize) -> Result<DynamicsRun> {
    if learners.len() != game.n() {
        return Err(Error::input(format!("{} learners for a {}-player game", learners.len(), game.n())));
    }
    if t == 0 {
        return Err(Error::input("T must be at least 1"));
    }
    let n = game.n();
    let mut trajectories: Vec<Trajectory> = game.sets.iter().map(|s| Trajectory::new(s.clone())).collect();
    let mut empirical = EmpiricalDistribution::default();
    for _ in 0..t {
        let profile = learners.iter_mut().map(|l| l.next()).collect::<Result<Vec<_>>>()?;
        game.check_profile(&profile)?;
        let grads: Vec<Vec<f64>> = (0..n).map(|i| game.gradient(i, &profile)).collect();
        let shared = Arc::new(profile.clone());
        for (i, learner) in learners.iter_mut().enumerate() {
            match learner.feedback_kind() {
                FeedbackKind::Gradient => learner.observe(Feedback::UtilityGradient(&grads[i]))?,
                FeedbackKind::RewardOracle => {
                    let reward = |y: &[f64]| unilateral_utility(game, i, &shared, y);
                    learner.observe(Feedback::Utility(&reward))?
                }
                FeedbackKind::RewardVector => {
                    return Err(Error::input("reward-vector learners cannot play a game directly"))
                }
            }
        }
        for (i, traj) in trajectories.iter_mut().enumerate() {
            traj.record(profile[i].clone(), unilateral_loss(game, i, &shared))?;
        }
        empirical.profiles.push(profile);
        empirical.gradients.push(grads);
    }
    for (traj, learner) in trajectories.iter_mut().zip(learners.iter_mut()) {
        traj.next_x = Some(learner.next()?);
    }
    Ok(DynamicsRun { trajectories, empirical })
}

fn unilateral_utility(game: &SmoothGame, i: usize, profile: &[Vec<f64>], y: &[f64]) -> f64 {
    let mut p = profile.to_vec();
    p[i] = y.to_vec();
    game.utility(i, &p)
}

/// `y ↦ -u_i(y, x_{-i})` as a loss.
fn unilateral_loss(game: &SmoothGame, i: usize, profile: &Arc<Vec<Vec<f64>>>) -> Loss {
    let d = game.sets[i].dim();
    let (spec_v, prof_v) = (game.spec.clone(), profile.clone());
    let (spec_g, prof_g) = (game.spec.clone(), profile.clone());
    let value = move |y: &[f64]| {
        let mut p = prof_v.as_ref().clone();
        p[i] = y.to_vec();
        -utility(&spec_v, i, &p)
    };
    let grad = move |y: &[f64]| {
        let mut p = prof_g.as_ref().clone();
        p[i] = y.to_vec();
        gradient(&spec_g, i, &p).into_iter().map(|v| -v).collect()
    };
    let convexity = match game.spec.as_ref() {
        GameSpec::Bilinear { .. } => Convexity::Convex,
        GameSpec::SinglePlayer { utility, scale, .. } => match (utility.convexity(), *scale <= 0.0) {
            (Convexity::Convex, true) => Convexity::Convex,
            _ => Convexity::Unknown,
        },
        _ => Convexity::Unknown,
    };
    let oracle = FnOracle::new(d, value, grad).with_constants(Some(game.g), Some(game.l), convexity);
    Loss::Oracle(SharedOracle(Arc::new(oracle)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CertMode {
    /// Exact enumeration of `E[u_i(φ(x_i), x_{-i})] - E[u_i(x)]`.
    Utility,
    /// Linearized gain plus the smoothness slack `δ^2 L / 2`.
    Linearized { delta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub epsilon: f64,
    pub exactness: Exactness,
    pub witness: Witness,
}

/// Per-player ε such that the empirical distribution is an ε-approximate
/// Φ-equilibrium.
pub fn certify_phi_equilibrium(
    emp: &EmpiricalDistribution,
    game: &SmoothGame,
    dev_sets: &[DeviationSet],
    mode: CertMode,
) -> Result<Vec<Certificate>> {
    if emp.is_empty() {
        return Err(Error::input("empty support"));
    }
    check_dim(game.n(), dev_sets.len())?;
    let mut out = Vec::with_capacity(game.n());
    for (i, ds) in dev_sets.iter().enumerate() {
        let set = &game.sets[i];
        ds.validate(set)?;
        match mode {
            CertMode::Utility => {
                let members = ds
                    .members()
                    .ok_or_else(|| Error::input("utility-mode certification needs an enumerable family"))?;
                let base: f64 = emp.profiles.iter().map(|p| game.utility(i, p)).sum::<f64>() * emp.weight();
                let mut best: Option<Certificate> = None;
                for (k, m) in members.iter().enumerate() {
                    let mut acc = 0.0;
                    for p in &emp.profiles {
                        let y = m.apply(&p[i], set)?;
                        acc += unilateral_utility(game, i, p, &y);
                    }
                    let eps = acc * emp.weight() - base;
                    if best.as_ref().map_or(true, |b| eps > b.epsilon) {
                        best = Some(Certificate {
                            epsilon: eps,
                            exactness: Exactness::Exact,
                            witness: Witness::Map { index: k, name: m.name() },
                        });
                    }
                }
                let mut cert = best.expect("nonempty family");
                if matches!(ds, DeviationSet::Conv { .. }) {
                    cert.exactness = Exactness::LowerBound;
                }
                out.push(cert);
            }
            CertMode::Linearized { delta } => {
                if !(delta >= 0.0 && delta.is_finite()) {
                    return Err(Error::input("delta must be finite and nonnegative"));
                }
                let gain = linearized_gain(emp, i, set, ds)?;
                out.push(Certificate {
                    epsilon: gain.gain + delta * delta * game.l / 2.0,
                    exactness: gain.exactness,
                    witness: gain.witness,
                });
            }
        }
    }
    Ok(out)
}

/// The adaptive adversary on the triangle `A=(0,0), B=(1,1), C=(δ,0)` that
/// drives GD around the boundary `A → B → C → A`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamTriangleAdversary {
    pub delta: f64,
    pub phase: u8,
    pub cycles: usize,
}

impl BeamTriangleAdversary {
    const TOL: f64 = 1e-10;

    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::input(format!("the triangle instance needs 0 < delta < 1/2, got {delta}")));
        }
        Ok(Self { delta, phase: 1, cycles: 0 })
    }

    pub fn set(&self) -> ConvexSet {
        ConvexSet::triangle([0.0, 0.0], [1.0, 1.0], [self.delta, 0.0]).expect("valid triangle")
    }

    /// The witness direction `v = (-δ, 0)`.
    pub fn witness(&self) -> Vec<f64> {
        vec![-self.delta, 0.0]
    }

    /// Loss vector for the round whose play is `x`.
    pub fn loss(&mut self, x: &[f64]) -> Vec<f64> {
        let (a, b, c) = ([0.0, 0.0], [1.0, 1.0], [self.delta, 0.0]);
        if self.phase == 1 && dist(x, &b) <= Self::TOL {
            self.phase = 2;
        }
        if self.phase == 2 && (dist(x, &c) <= Self::TOL || x[1].abs() <= Self::TOL) {
            self.phase = 3;
        }
        if self.phase == 3 && dist(x, &a) <= Self::TOL {
            self.phase = 1;
            self.cycles += 1;
        }
        let unit = |from: [f64; 2], to: [f64; 2]| {
            let v = [to[0] - from[0], to[1] - from[1]];
            let n = norm(&v);
            vec![v[0] / n, v[1] / n]
        };
        match self.phase {
            1 => unit(b, a),
            2 => unit(c, b),
            _ => unit(a, c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::finite_phi_regret;
    use crate::deviations::Deviation;
    use crate::learners::{Gd, StepSchedule};
    use approx::assert_abs_diff_eq;

    #[test]
    fn stationary_single_player_stays_put() {
        let game = SmoothGame::new(GameSpec::SinglePlayer {
            utility: Builtin::QuadraticToAnchor { weight: 2.0, anchor: vec![0.5] },
            set: ConvexSet::interval(0.0, 1.0).unwrap(),
            offset: 1.0,
            scale: -1.0,
        })
        .unwrap();
        let gd = Gd::new(game.sets[0].clone(), vec![0.5], StepSchedule::Constant { eta: 0.1 }).unwrap();
        let mut ls: Vec<Box<dyn Learner>> = vec![Box::new(gd)];
        let run = run_uncoupled_dynamics(&game, &mut ls, 20).unwrap();
        assert!(run.empirical.profiles.iter().all(|p| p[0] == vec![0.5]));
    }

    #[test]
    fn bilinear_first_step() {
        let game = SmoothGame::new(GameSpec::Bilinear { scale: 1.0 }).unwrap();
        let mk = || Gd::new(ConvexSet::interval(-1.0, 1.0).unwrap(), vec![1.0], StepSchedule::Constant { eta: 0.1 }).unwrap();
        let mut ls: Vec<Box<dyn Learner>> = vec![Box::new(mk()), Box::new(mk())];
        let run = run_uncoupled_dynamics(&game, &mut ls, 2).unwrap();
        assert_eq!(run.empirical.profiles[1][0], vec![1.0]);
        assert_abs_diff_eq!(run.empirical.profiles[1][1][0], 0.9, epsilon = 1e-15);

        let mut ls: Vec<Box<dyn Learner>> = vec![Box::new(mk()), Box::new(mk())];
        let run = run_uncoupled_dynamics(&game, &mut ls, 1).unwrap();
        assert_eq!(run.empirical.profiles, vec![vec![vec![1.0], vec![1.0]]]);
    }

    #[test]
    fn certification_examples() {
        let game = SmoothGame::new(GameSpec::SinglePlayer {
            utility: Builtin::Linear { v: vec![1.0] },
            set: ConvexSet::interval(0.0, 1.0).unwrap(),
            offset: 0.0,
            scale: 1.0,
        })
        .unwrap();
        let emp = EmpiricalDistribution::point_mass(vec![vec![0.5]], Some(vec![vec![1.0]]));
        let c = certify_phi_equilibrium(&emp, &game, &[DeviationSet::Int { delta: 0.5 }], CertMode::Linearized { delta: 0.0 })
            .unwrap();
        assert_abs_diff_eq!(c[0].epsilon, 0.25, epsilon = 1e-15);
        assert_eq!(c[0].witness, Witness::Interpolation { lambda: 0.5, target: vec![1.0] });

        let id = DeviationSet::Finite { maps: vec![Deviation::Identity], locality_delta: None };
        let c = certify_phi_equilibrium(&emp, &game, &[id], CertMode::Utility).unwrap();
        assert_eq!(c[0].epsilon, 0.0);

        let stationary = EmpiricalDistribution::point_mass(vec![vec![0.5]], Some(vec![vec![0.0]]));
        for ds in [DeviationSet::Int { delta: 0.2 }, DeviationSet::Proj { delta: 0.2 }, DeviationSet::Beam { delta: 0.2 }] {
            let c = certify_phi_equilibrium(&stationary, &game, &[ds], CertMode::Linearized { delta: 0.2 }).unwrap();
            assert_abs_diff_eq!(c[0].epsilon, 0.04 * game.l / 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn fk_origin_has_zero_gain() {
        let graph = crate::hardness::Graph::path(3).unwrap();
        let game = SmoothGame::new(GameSpec::Fk { graph, k: 3 }).unwrap();
        let x = vec![0.0; 3];
        let g = game.gradient(0, &[x.clone()]);
        assert_eq!(g, vec![0.0; 3]);
        let emp = EmpiricalDistribution::point_mass(vec![x], Some(vec![g]));
        let delta = 0.1;
        let c = certify_phi_equilibrium(&emp, &game, &[DeviationSet::Proj { delta }], CertMode::Linearized { delta }).unwrap();
        assert_abs_diff_eq!(c[0].epsilon, delta * delta * game.l / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn utility_certificate_matches_regret_over_t() {
        let game = SmoothGame::new(GameSpec::SquaredDifference).unwrap();
        let mk = |x: f64| Gd::new(ConvexSet::interval(-1.0, 1.0).unwrap(), vec![x], StepSchedule::Constant { eta: 0.05 }).unwrap();
        let mut ls: Vec<Box<dyn Learner>> = vec![Box::new(mk(0.3)), Box::new(mk(-0.2))];
        let t = 200;
        let run = run_uncoupled_dynamics(&game, &mut ls, t).unwrap();
        let maps = vec![Deviation::Identity, Deviation::Constant { point: vec![1.0] }, Deviation::Constant { point: vec![-1.0] }];
        let ds = DeviationSet::Finite { maps: maps.clone(), locality_delta: None };
        let certs = certify_phi_equilibrium(&run.empirical, &game, &[ds.clone(), ds], CertMode::Utility).unwrap();
        for i in 0..2 {
            let reg = finite_phi_regret(&run.trajectories[i], &maps).unwrap().total;
            assert_abs_diff_eq!(certs[i].epsilon * t as f64, reg, epsilon = 1e-9);
        }
    }

    #[test]
    fn declared_constants_hold() {
        for spec in [GameSpec::SquaredDifference, GameSpec::Bilinear { scale: 1.0 }] {
            SmoothGame::new(spec).unwrap().check_constants(2000, 7).unwrap();
        }
    }

    #[test]
    fn triangle_adversary_cycles() {
        let mut adv = BeamTriangleAdversary::new(0.2).unwrap();
        let mut gd = Gd::new(adv.set(), vec![0.0, 0.0], StepSchedule::Constant { eta: 0.05 }).unwrap();
        for _ in 0..2000 {
            let x = gd.x.clone();
            let g = adv.loss(&x);
            gd.update(&g).unwrap();
        }
        assert!(adv.cycles >= 5);
    }
}
