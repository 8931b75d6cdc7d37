//! Post-hoc regret computation over recorded trajectories.
//!
//! Every report states whether its inner maximization was solved exactly or
//! only yields a certified lower bound.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deviations::{int_lambda_max, prox, shrink_map, Deviation, DeviationSet, ProxFunction, SharedOracle};
use crate::error::{check_dim, Error, Result};
use crate::games::EmpiricalDistribution;
use crate::geometry::{project_scaled_simplex, ConvexSet};
use crate::oracles::{Builtin, Convexity};
use crate::vecops::{dist, dist_sq, dot, norm, scale, sub};

/// A round's loss function.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Loss {
    Builtin(Builtin),
    #[serde(skip)]
    Oracle(SharedOracle),
}

impl Loss {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Loss::Builtin(b) => b.value(x),
            Loss::Oracle(o) => o.0.value(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Loss::Builtin(b) => b.gradient(x),
            Loss::Oracle(o) => o.0.gradient(x),
        }
    }

    pub fn convexity(&self) -> Convexity {
        match self {
            Loss::Builtin(b) => b.convexity(),
            Loss::Oracle(o) => o.0.convexity(),
        }
    }

    /// The coefficient vector of a linear loss.
    pub fn linear_coefficients(&self) -> Option<&[f64]> {
        match self {
            Loss::Builtin(Builtin::Linear { v }) => Some(v),
            _ => None,
        }
    }

    fn piecewise_concave_1d(&self) -> Option<&Builtin> {
        match self {
            Loss::Builtin(b) if b.is_piecewise_concave_1d() => Some(b),
            _ => None,
        }
    }
}

/// One recorded round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Round {
    pub x: Vec<f64>,
    pub loss: Loss,
    #[serde(default)]
    pub gradient: Vec<f64>,
    #[serde(default)]
    pub value: f64,
}

/// Recorded play `x^1..x^T` with the losses faced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub set: ConvexSet,
    pub rounds: Vec<Round>,
    /// The learner's next iterate `x^{T+1}`, when known.
    #[serde(default)]
    pub next_x: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn new(set: ConvexSet) -> Self {
        Self { set, rounds: Vec::new(), next_x: None }
    }

    /// Appends a round, evaluating the loss and its gradient at `x`.
    pub fn record(&mut self, x: Vec<f64>, loss: Loss) -> Result<()> {
        check_dim(self.set.dim(), x.len())?;
        if !self.set.contains(&x, 1e-7) {
            return Err(Error::input(format!("round {} plays a point outside X", self.rounds.len() + 1)));
        }
        let value = loss.value(&x);
        let gradient = loss.gradient(&x);
        check_dim(self.set.dim(), gradient.len())?;
        self.rounds.push(Round { x, loss, gradient, value });
        Ok(())
    }

    /// Validates a deserialized trajectory and fills in values and gradients.
    pub fn validate_and_fill(&mut self) -> Result<()> {
        self.set.validate()?;
        let d = self.set.dim();
        for (t, r) in self.rounds.iter_mut().enumerate() {
            check_dim(d, r.x.len())?;
            if !self.set.contains(&r.x, 1e-7) {
                return Err(Error::input(format!("round {} plays a point outside X", t + 1)));
            }
            r.value = r.loss.value(&r.x);
            r.gradient = r.loss.gradient(&r.x);
            check_dim(d, r.gradient.len())?;
        }
        if let Some(x) = &self.next_x {
            check_dim(d, x.len())?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// The first `n` rounds; `next_x` becomes the `(n+1)`-th play when present.
    pub fn prefix(&self, n: usize) -> Trajectory {
        let n = n.min(self.len());
        let next_x = if n < self.len() { Some(self.rounds[n].x.clone()) } else { self.next_x.clone() };
        Trajectory { set: self.set.clone(), rounds: self.rounds[..n].to_vec(), next_x }
    }

    pub fn all_linear(&self) -> bool {
        self.rounds.iter().all(|r| r.loss.linear_coefficients().is_some())
    }

    fn total_loss_at(&self, y: &[f64]) -> f64 {
        self.rounds.iter().map(|r| r.loss.value(y)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exactness {
    Exact,
    LowerBound,
}

/// The deviation attaining a reported regret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    None,
    Point { x: Vec<f64> },
    Direction { v: Vec<f64> },
    Interpolation { lambda: f64, target: Vec<f64> },
    Map { index: usize, name: String },
    Prox { label: String },
    Mixture { weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub total: f64,
    /// Running sums of the per-round gains of the reported witness.
    pub cumulative: Vec<f64>,
    pub exactness: Exactness,
    pub witness: Witness,
}

impl RegretReport {
    fn from_gains(gains: impl IntoIterator<Item = f64>, exactness: Exactness, witness: Witness) -> Self {
        let mut acc = 0.0;
        let cumulative: Vec<f64> = gains
            .into_iter()
            .map(|g| {
                acc += g;
                acc
            })
            .collect();
        Self { total: cumulative.last().copied().unwrap_or(0.0), cumulative, exactness, witness }
    }
}

/// Regret of one fixed deviation: `sum_t l^t(x^t) - l^t(φ(x^t))`.
pub fn deviation_regret(traj: &Trajectory, dev: &Deviation) -> Result<RegretReport> {
    let mut gains = Vec::with_capacity(traj.len());
    for r in &traj.rounds {
        let y = dev.apply(&r.x, &traj.set)?;
        gains.push(r.value - r.loss.value(&y));
    }
    Ok(RegretReport::from_gains(gains, Exactness::Exact, Witness::Map { index: 0, name: dev.name() }))
}

fn interval_bounds(set: &ConvexSet) -> Result<(f64, f64)> {
    let (hi, _) = set.support_maximizer(&[1.0])?;
    let (lo, _) = set.support_maximizer(&[-1.0])?;
    Ok((lo[0], hi[0]))
}

fn point_regret(traj: &Trajectory, x: &[f64], exactness: Exactness) -> RegretReport {
    RegretReport::from_gains(
        traj.rounds.iter().map(|r| r.value - r.loss.value(x)),
        exactness,
        Witness::Point { x: x.to_vec() },
    )
}

/// `max_{x in X} sum_t l^t(x^t) - l^t(x)`.
///
/// Exact for linear losses and for one-dimensional piecewise-concave
/// builtins; otherwise a lower bound from a candidate search.
pub fn external_regret(traj: &Trajectory) -> Result<RegretReport> {
    let set = &traj.set;
    let d = set.dim();
    if traj.all_linear() {
        let mut total = vec![0.0; d];
        for r in &traj.rounds {
            for (a, b) in total.iter_mut().zip(r.loss.linear_coefficients().expect("linear")) {
                *a -= b;
            }
        }
        let (x, _) = set.support_maximizer(&total)?;
        return Ok(point_regret(traj, &x, Exactness::Exact));
    }
    if d == 1 {
        let (lo, hi) = interval_bounds(set)?;
        if let Some(builtins) = traj.rounds.iter().map(|r| r.loss.piecewise_concave_1d()).collect::<Option<Vec<_>>>() {
            let mut cands = vec![lo, hi];
            for b in builtins {
                cands.extend(b.kinks_1d().into_iter().filter(|k| (lo..=hi).contains(k)));
            }
            cands.sort_by(f64::total_cmp);
            cands.dedup();
            let best = argmin_by(&cands, |c| traj.total_loss_at(&[*c]));
            return Ok(point_regret(traj, &[best], Exactness::Exact));
        }
        if traj.rounds.iter().all(|r| r.loss.convexity() == Convexity::Convex) {
            let y = golden_section_min(lo, hi, |c| traj.total_loss_at(&[c]));
            let best = argmin_by(&[lo, y, hi], |c| traj.total_loss_at(&[*c]));
            return Ok(point_regret(traj, &[best], Exactness::LowerBound));
        }
    }
    let mut cands: Vec<Vec<f64>> = traj.rounds.iter().map(|r| r.x.clone()).collect();
    cands.extend(set.polytope_vertices());
    cands.push(set.projected_origin());
    external_regret_with_candidates(traj, &cands)
}

/// External regret against a caller-supplied comparator grid; a lower bound.
pub fn external_regret_with_candidates(traj: &Trajectory, candidates: &[Vec<f64>]) -> Result<RegretReport> {
    if candidates.is_empty() {
        return Err(Error::input("empty comparator grid"));
    }
    for c in candidates {
        check_dim(traj.set.dim(), c.len())?;
    }
    let best = argmin_by(candidates, |c| traj.total_loss_at(c));
    Ok(point_regret(traj, &best, Exactness::LowerBound))
}

/// First minimizer, so ties go to the earliest candidate.
fn argmin_by<T: Clone>(items: &[T], mut f: impl FnMut(&T) -> f64) -> T {
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (i, it) in items.iter().enumerate() {
        let v = f(it);
        if v < best_val {
            best = i;
            best_val = v;
        }
    }
    items[best].clone()
}

fn golden_section_min(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Proximal regret for one `f`, in both exact and linearized form.
#[derive(Debug, Clone)]
pub struct ProximalReport {
    /// `sum_t l^t(x^t) - l^t(p^t)`
    pub exact: RegretReport,
    /// `sum_t <g^t, x^t - p^t>`
    pub linearized: RegretReport,
    /// `p^t = prox_f(x^t)`
    pub prox_points: Vec<Vec<f64>>,
}

pub fn proximal_regret(traj: &Trajectory, f: &ProxFunction) -> Result<ProximalReport> {
    f.validate(&traj.set)?;
    let prox_points = traj.rounds.iter().map(|r| prox(f, &r.x, &traj.set)).collect::<Result<Vec<_>>>()?;
    let witness = Witness::Prox { label: f.label() };
    let exact = RegretReport::from_gains(
        traj.rounds.iter().zip(&prox_points).map(|(r, p)| r.value - r.loss.value(p)),
        Exactness::Exact,
        witness.clone(),
    );
    let linearized = RegretReport::from_gains(
        traj.rounds.iter().zip(&prox_points).map(|(r, p)| dot(&r.gradient, &sub(&r.x, p))),
        Exactness::Exact,
        witness,
    );
    Ok(ProximalReport { exact, linearized, prox_points })
}

/// Proximal regret for each `f` of a family, in parallel.
pub fn proximal_regret_family(traj: &Trajectory, fs: &[ProxFunction]) -> Result<Vec<ProximalReport>> {
    fs.par_iter().map(|f| proximal_regret(traj, f)).collect()
}

/// Per-map totals `sum_t l^t(x^t) - l^t(φ(x^t))`.
pub fn finite_phi_totals(traj: &Trajectory, maps: &[Deviation]) -> Result<Vec<f64>> {
    maps.iter().map(|m| deviation_regret(traj, m).map(|r| r.total)).collect()
}

/// Φ-regret of a finite family by enumeration; ties go to the lowest index.
pub fn finite_phi_regret(traj: &Trajectory, maps: &[Deviation]) -> Result<RegretReport> {
    if maps.is_empty() {
        return Err(Error::input("a finite family needs at least one map"));
    }
    let mut best: Option<(usize, RegretReport)> = None;
    for (i, m) in maps.iter().enumerate() {
        let r = deviation_regret(traj, m)?;
        if best.as_ref().map_or(true, |(_, b)| r.total > b.total) {
            best = Some((i, r));
        }
    }
    let (index, mut report) = best.expect("nonempty");
    report.witness = Witness::Map { index, name: maps[index].name() };
    Ok(report)
}

/// Φ_Proj(δ)-regret.
///
/// Exact in one dimension for piecewise-concave builtin losses (the
/// objective is then minimized at a breakpoint of `v ↦ Π[x^t - v]`), and
/// for linear losses whose iterates all stay at least δ inside X. A lower
/// bound otherwise.
pub fn proj_regret(traj: &Trajectory, delta: f64) -> Result<RegretReport> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::input("delta must be finite and nonnegative"));
    }
    let set = &traj.set;
    let d = set.dim();
    let at = |v: &[f64]| deviation_regret(traj, &Deviation::Projection { v: v.to_vec() });
    let with_witness = |mut r: RegretReport, v: Vec<f64>, e: Exactness| {
        r.exactness = e;
        r.witness = Witness::Direction { v };
        r
    };
    if d == 1 {
        if let Some(builtins) = traj.rounds.iter().map(|r| r.loss.piecewise_concave_1d()).collect::<Option<Vec<_>>>() {
            let (lo, hi) = interval_bounds(set)?;
            let mut kinks: Vec<f64> = builtins.iter().flat_map(|b| b.kinks_1d()).collect();
            kinks.sort_by(f64::total_cmp);
            kinks.dedup();
            let mut cands = vec![-delta, 0.0, delta];
            let mut xs: Vec<f64> = traj.rounds.iter().map(|r| r.x[0]).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            for x in xs {
                for b in kinks.iter().chain([lo, hi].iter()) {
                    let v = x - b;
                    if v.abs() <= delta {
                        cands.push(v);
                    }
                }
            }
            cands.sort_by(f64::total_cmp);
            cands.dedup();
            let mut best: Option<(f64, RegretReport)> = None;
            for v in cands {
                let r = at(&[v])?;
                if best.as_ref().map_or(true, |(_, b)| r.total > b.total) {
                    best = Some((v, r));
                }
            }
            let (v, r) = best.expect("nonempty");
            return Ok(with_witness(r, vec![v], Exactness::Exact));
        }
    }
    let gsum = traj.rounds.iter().fold(vec![0.0; d], |mut acc, r| {
        for (a, g) in acc.iter_mut().zip(&r.gradient) {
            *a += g;
        }
        acc
    });
    let gnorm = norm(&gsum);
    let v_star = if gnorm > 0.0 { scale(&gsum, delta / gnorm) } else { vec![0.0; d] };
    if traj.all_linear() {
        let interior = traj.rounds.iter().map(|r| set.interior_margin(&r.x)).collect::<Result<Vec<_>>>()?;
        if interior.iter().all(|m| *m >= delta) {
            let r = at(&v_star)?;
            return Ok(with_witness(r, v_star, Exactness::Exact));
        }
    }
    let mut cands = vec![vec![0.0; d], v_star];
    for i in 0..d {
        for s in [delta, -delta] {
            let mut e = vec![0.0; d];
            e[i] = s;
            cands.push(e);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37);
    for _ in 0..20 {
        cands.push(random_direction(d, delta, &mut rng));
    }
    let mut best: Option<(Vec<f64>, RegretReport)> = None;
    for v in cands {
        let r = at(&v)?;
        if best.as_ref().map_or(true, |(_, b)| r.total > b.total) {
            best = Some((v, r));
        }
    }
    let (v, r) = best.expect("nonempty");
    Ok(with_witness(r, v, Exactness::LowerBound))
}

fn random_direction<R: Rng + ?Sized>(d: usize, length: f64, rng: &mut R) -> Vec<f64> {
    let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let n = norm(&g).max(1e-300);
    scale(&g, length / n)
}

/// Φ_Int(δ)-regret: `max_{λ <= λ_max, x*} sum_t l^t(x^t) - l^t((1-λ)x^t + λx*)`.
///
/// For linear losses this is `λ_max [ExtReg]^+` and is exact; otherwise
/// the external comparator is reused over a λ grid as a lower bound.
pub fn phi_int_regret(traj: &Trajectory, delta: f64) -> Result<RegretReport> {
    let lam_max = int_lambda_max(delta, &traj.set);
    let ext = external_regret(traj)?;
    let Witness::Point { x: target } = ext.witness.clone() else {
        unreachable!("external regret reports a point witness")
    };
    let eval = |lambda: f64| deviation_regret(traj, &Deviation::Interpolate { lambda, target: target.clone() });
    let (lambda, mut report) = if traj.all_linear() {
        let lambda = if ext.total > 0.0 { lam_max } else { 0.0 };
        let mut r = eval(lambda)?;
        r.exactness = Exactness::Exact;
        (lambda, r)
    } else {
        let mut best = (0.0, eval(0.0)?);
        for k in 1..=16 {
            let lambda = lam_max * k as f64 / 16.0;
            let r = eval(lambda)?;
            if r.total > best.1.total {
                best = (lambda, r);
            }
        }
        best.1.exactness = Exactness::LowerBound;
        best
    };
    report.witness = Witness::Interpolation { lambda, target };
    Ok(report)
}

/// Beam-search regret over directions of norm δ; always a lower bound.
/// `extra` directions are scored alongside the built-in grid.
pub fn beam_regret(traj: &Trajectory, delta: f64, extra: &[Vec<f64>]) -> Result<RegretReport> {
    let d = traj.set.dim();
    let mut dirs: Vec<Vec<f64>> = extra.to_vec();
    if d == 2 {
        dirs.extend((0..360).map(|k| {
            let a = k as f64 * std::f64::consts::PI / 180.0;
            vec![delta * a.cos(), delta * a.sin()]
        }));
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0xbea3);
        for i in 0..d {
            for s in [delta, -delta] {
                let mut e = vec![0.0; d];
                e[i] = s;
                dirs.push(e);
            }
        }
        dirs.extend((0..64).map(|_| random_direction(d, delta, &mut rng)));
    }
    let mut best: Option<(Vec<f64>, RegretReport)> = None;
    for v in dirs {
        check_dim(d, v.len())?;
        let r = deviation_regret(traj, &Deviation::Beam { v: v.clone() })?;
        if best.as_ref().map_or(true, |(_, b)| r.total > b.total) {
            best = Some((v, r));
        }
    }
    let (v, mut r) = best.ok_or_else(|| Error::input("no beam directions"))?;
    r.exactness = Exactness::LowerBound;
    r.witness = Witness::Direction { v };
    Ok(r)
}

/// conv(Φ)-regret `max_{p in Δ(Φ)} sum_t l^t(x^t) - l^t(Σ_φ p_φ φ(x^t))`.
#[derive(Debug, Clone)]
pub struct ConvRegret {
    /// Attained by `weights`, hence a lower bound.
    pub lower: f64,
    /// Frank-Wolfe certificate, available when every loss is convex (the
    /// objective is then concave in `p`).
    pub upper: Option<f64>,
    pub weights: Vec<f64>,
}

pub fn conv_phi_regret(traj: &Trajectory, maps: &[Deviation]) -> Result<ConvRegret> {
    let n = maps.len();
    if n == 0 {
        return Err(Error::input("a finite family needs at least one map"));
    }
    let images: Vec<Vec<Vec<f64>>> = traj
        .rounds
        .iter()
        .map(|r| maps.iter().map(|m| m.apply(&r.x, &traj.set)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let d = traj.set.dim();
    let mix = |p: &[f64], ys: &[Vec<f64>]| {
        let mut z = vec![0.0; d];
        for (pi, y) in p.iter().zip(ys) {
            for (zj, yj) in z.iter_mut().zip(y) {
                *zj += pi * yj;
            }
        }
        z
    };
    let objective = |p: &[f64]| -> f64 {
        traj.rounds.iter().zip(&images).map(|(r, ys)| r.value - r.loss.value(&mix(p, ys))).sum()
    };
    let gradient = |p: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; n];
        for (r, ys) in traj.rounds.iter().zip(&images) {
            let gl = r.loss.gradient(&mix(p, ys));
            for (gi, y) in g.iter_mut().zip(ys) {
                *gi -= dot(&gl, y);
            }
        }
        g
    };
    let vertex = |i: usize| {
        let mut p = vec![0.0; n];
        p[i] = 1.0;
        p
    };
    let (mut pw, mut val) = (0..n)
        .map(vertex)
        .chain([vec![1.0 / n as f64; n]])
        .map(|q| {
            let v = objective(&q);
            (q, v)
        })
        .fold((Vec::new(), f64::NEG_INFINITY), |best, cand| if cand.1 > best.1 { cand } else { best });
    let mut step = 1.0;
    for _ in 0..5000 {
        let g = gradient(&pw);
        let gap = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - dot(&g, &pw);
        if gap <= 1e-12 * (1.0 + val.abs()) {
            break;
        }
        let target = project_scaled_simplex(&pw.iter().zip(&g).map(|(a, b)| a + step * b).collect::<Vec<_>>(), 1.0);
        let dir = sub(&target, &pw);
        if norm(&dir) == 0.0 {
            break;
        }
        let slope = |s: f64| {
            let q: Vec<f64> = pw.iter().zip(&dir).map(|(a, b)| a + s * b).collect();
            dot(&gradient(&q), &dir)
        };
        let s = if slope(1.0) >= 0.0 {
            step *= 2.0;
            1.0
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if slope(mid) >= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            step *= 0.5;
            lo
        };
        if s == 0.0 {
            continue;
        }
        let cand: Vec<f64> = pw.iter().zip(&dir).map(|(a, b)| a + s * b).collect();
        let cv = objective(&cand);
        if cv < val && (val - cv) > 1e-12 * (1.0 + val.abs()) {
            break;
        }
        pw = cand;
        val = cv;
    }
    let concave = traj.rounds.iter().all(|r| r.loss.convexity() == Convexity::Convex);
    let upper = if concave {
        let g = gradient(&pw);
        Some(val + (g.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - dot(&g, &pw)).max(0.0))
    } else {
        None
    };
    Ok(ConvRegret { lower: val, upper, weights: pw })
}

/// Right-hand sides of the regret bounds.
pub mod bounds {
    use super::*;

    /// Constant-step GD proximal-regret bound evaluated on a run.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct GdProxBound {
        pub rhs: f64,
        /// `||x^1 - p^1||`
        pub d: f64,
        /// `f(p^1) - f(p^T)`
        pub bf: f64,
    }

    /// `(D^2 + 2B_f - ||x^{T+1} - p^T||^2)/(2η) + (η/2) Σ||g^t||^2`, minus
    /// `Σ_{t<T} ||p^t - p^{t+1}||^2 / (2η)` when `f` is convex.
    pub fn gd_prox_bound(traj: &Trajectory, f: &ProxFunction, eta: f64, report: &ProximalReport) -> Result<GdProxBound> {
        let t = traj.len();
        if t == 0 {
            return Err(Error::input("empty trajectory"));
        }
        let next = traj.next_x.as_ref().ok_or_else(|| Error::input("the bound needs x^{T+1}"))?;
        let p = &report.prox_points;
        let d = dist(&traj.rounds[0].x, &p[0]);
        let bf = f.value(&p[0], &traj.set)? - f.value(&p[t - 1], &traj.set)?;
        let grad_sq: f64 = traj.rounds.iter().map(|r| dot(&r.gradient, &r.gradient)).sum();
        let mut rhs = (d * d + 2.0 * bf - dist_sq(next, &p[t - 1])) / (2.0 * eta) + eta / 2.0 * grad_sq;
        if f.is_convex(&traj.set) {
            rhs -= p.windows(2).map(|w| dist_sq(&w[0], &w[1])).sum::<f64>() / (2.0 * eta);
        }
        Ok(GdProxBound { rhs, d, bf })
    }

    /// `G sqrt(D^2 + 2B) sqrt(T)`, the bound under `η = sqrt((D^2+2B)/(G^2 T))`.
    pub fn gd_optimized_bound(g: f64, d: f64, bf: f64, t: usize) -> f64 {
        g * (d * d + 2.0 * bf).sqrt() * (t as f64).sqrt()
    }

    /// `(D^2 + 2B_f + 4nL^2G^2) T^{1/4}` for OG with `η = T^{-1/4}` in games.
    pub fn og_game_bound(d: f64, bf: f64, n: usize, l: f64, g: f64, t: usize) -> f64 {
        (d * d + 2.0 * bf + 4.0 * n as f64 * l * l * g * g) * (t as f64).powf(0.25)
    }

    /// `3nL^2η^2G^2`, the per-round gradient-variation bound for OG in games.
    pub fn og_variation_bound(n: usize, l: f64, eta: f64, g: f64) -> f64 {
        3.0 * n as f64 * l * l * eta * eta * g * g
    }

    /// `KL(p|x) = Σ p_i ln(p_i/x_i)` on the simplex.
    pub fn kl(p: &[f64], x: &[f64]) -> f64 {
        p.iter().zip(x).filter(|(pi, _)| **pi > 0.0).map(|(pi, xi)| pi * (pi / xi).ln()).sum()
    }

    /// `(D_φ(p^1|x^1) + f(p^1) - f(p_end))/η + ηG^2T/2` for negentropy MD.
    pub fn md_bregman_bound(kl_p1_x1: f64, f_p1: f64, f_end: f64, eta: f64, g: f64, t: usize) -> f64 {
        (kl_p1_x1 + f_p1 - f_end) / eta + eta * g * g * t as f64 / 2.0
    }

    /// `2 sqrt(T ln n)`
    pub fn hedge_bound(t: usize, n: usize) -> f64 {
        2.0 * (t as f64 * (n as f64).ln()).sqrt()
    }

    /// `8 sqrt(T (ln|Φ| + ln(1/β)))`
    pub fn tree_sampler_bound(t: usize, n: usize, beta: f64) -> f64 {
        8.0 * (t as f64 * ((n as f64).ln() + (1.0 / beta).ln())).sqrt()
    }

    /// `8 sqrt(T) (Gδ sqrt(ln|Φ|) + sqrt(ln(1/β))) + δ^2 L T`
    pub fn conv_mix_bound(t: usize, g: f64, delta: f64, n: usize, beta: f64, l: f64) -> f64 {
        let tf = t as f64;
        8.0 * tf.sqrt() * (g * delta * (n as f64).ln().sqrt() + (1.0 / beta).ln().sqrt()) + delta * delta * l * tf
    }

    /// `2δG sqrt(T)`
    pub fn phi_int_bound(delta: f64, g: f64, t: usize) -> f64 {
        2.0 * delta * g * (t as f64).sqrt()
    }
}

/// Linearized gain of one player under an empirical distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub gain: f64,
    pub exactness: Exactness,
    pub witness: Witness,
}

/// `max_φ E_σ[<∇_{x_i} u_i(x), φ(x_i) - x_i>]` over a deviation family.
pub fn linearized_gain(
    emp: &EmpiricalDistribution,
    player: usize,
    set: &ConvexSet,
    dev_set: &DeviationSet,
) -> Result<GainReport> {
    let xs = emp.strategies(player)?;
    let gs = emp.gradients(player)?;
    if xs.is_empty() {
        return Err(Error::input("empty support"));
    }
    let m = xs.len() as f64;
    let d = set.dim();
    let mean_gain = |dev: &Deviation| -> Result<f64> {
        let mut acc = 0.0;
        for (x, g) in xs.iter().zip(gs.iter()) {
            acc += dot(g, &sub(&dev.apply(x, set)?, x));
        }
        Ok(acc / m)
    };
    let gbar = gs.iter().fold(vec![0.0; d], |mut acc, g| {
        for (a, gi) in acc.iter_mut().zip(g.iter()) {
            *a += gi / m;
        }
        acc
    });
    let gx: f64 = xs.iter().zip(gs.iter()).map(|(x, g)| dot(g, x)).sum::<f64>() / m;
    let best_of = |devs: Vec<Deviation>| -> Result<GainReport> {
        let mut best = GainReport { gain: f64::NEG_INFINITY, exactness: Exactness::Exact, witness: Witness::None };
        for (i, dev) in devs.iter().enumerate() {
            let v = mean_gain(dev)?;
            if v > best.gain {
                best = GainReport { gain: v, exactness: Exactness::Exact, witness: Witness::Map { index: i, name: dev.name() } };
            }
        }
        Ok(best)
    };
    match dev_set {
        DeviationSet::Int { delta } | DeviationSet::IntPlus { delta } => {
            let lam = int_lambda_max(*delta, set);
            let (target, val) = set.support_maximizer(&gbar)?;
            let raw = lam * (val - gx);
            let mut report = if raw > 0.0 {
                GainReport { gain: raw, exactness: Exactness::Exact, witness: Witness::Interpolation { lambda: lam, target } }
            } else {
                GainReport { gain: 0.0, exactness: Exactness::Exact, witness: Witness::Interpolation { lambda: 0.0, target } }
            };
            if matches!(dev_set, DeviationSet::IntPlus { .. }) {
                let shrink: f64 =
                    xs.iter().zip(gs.iter()).map(|(x, g)| dot(g, &sub(&shrink_map(x, *delta), x))).sum::<f64>() / m;
                if shrink > report.gain {
                    report.gain = shrink;
                    report.witness = Witness::Map { index: 0, name: format!("shrink({delta})") };
                }
            }
            Ok(report)
        }
        DeviationSet::Finite { .. } | DeviationSet::Conv { .. } | DeviationSet::ProxFamily { .. } => {
            best_of(dev_set.members().expect("enumerable"))
        }
        DeviationSet::Proj { delta } => {
            let gn = norm(&gbar);
            let interior = xs.iter().map(|x| set.interior_margin(x)).collect::<Result<Vec<_>>>()?;
            if gn == 0.0 && gs.iter().all(|g| g.iter().all(|v| *v == 0.0)) {
                return Ok(GainReport { gain: 0.0, exactness: Exactness::Exact, witness: Witness::Direction { v: vec![0.0; d] } });
            }
            if interior.iter().all(|mg| *mg >= *delta) {
                let v = if gn > 0.0 { scale(&gbar, -delta / gn) } else { vec![0.0; d] };
                return Ok(GainReport { gain: delta * gn, exactness: Exactness::Exact, witness: Witness::Direction { v } });
            }
            let objective = |v: &[f64]| mean_gain(&Deviation::Projection { v: v.to_vec() });
            let mut rng = ChaCha8Rng::seed_from_u64(0x51a7);
            let mut starts = vec![if gn > 0.0 { scale(&gbar, -delta / gn) } else { vec![0.0; d] }];
            starts.extend((1..20).map(|_| random_direction(d, *delta, &mut rng)));
            let mut best = (vec![0.0; d], 0.0);
            for s in starts {
                let (v, val) = ball_ascent(&objective, s, *delta)?;
                if val > best.1 {
                    best = (v, val);
                }
            }
            Ok(GainReport { gain: best.1, exactness: Exactness::LowerBound, witness: Witness::Direction { v: best.0 } })
        }
        DeviationSet::Beam { delta } => {
            let mut rng = ChaCha8Rng::seed_from_u64(0xbea3);
            let mut dirs = Vec::new();
            if d == 2 {
                dirs.extend((0..360).map(|k| {
                    let a = k as f64 * std::f64::consts::PI / 180.0;
                    vec![a.cos(), a.sin()]
                }));
            } else {
                dirs.extend((0..200).map(|_| random_direction(d, 1.0, &mut rng)));
            }
            let mut best = (vec![0.0; d], 0.0);
            for u in dirs {
                for s in [1.0, 0.5, 0.25] {
                    let v = scale(&u, delta * s);
                    let val = mean_gain(&Deviation::Beam { v: v.clone() })?;
                    if val > best.1 {
                        best = (v, val);
                    }
                }
            }
            Ok(GainReport { gain: best.1, exactness: Exactness::LowerBound, witness: Witness::Direction { v: best.0 } })
        }
    }
}

/// Projected ascent with finite-difference gradients over `||v|| <= r`.
fn ball_ascent(f: &dyn Fn(&[f64]) -> Result<f64>, start: Vec<f64>, r: f64) -> Result<(Vec<f64>, f64)> {
    let d = start.len();
    let clip = |v: Vec<f64>| {
        let n = norm(&v);
        if n > r {
            scale(&v, r / n)
        } else {
            v
        }
    };
    let mut v = clip(start);
    let mut val = f(&v)?;
    let h = 1e-7 * r.max(1e-12);
    let mut step = r;
    for _ in 0..100 {
        let mut grad = vec![0.0; d];
        for i in 0..d {
            let mut up = v.clone();
            up[i] += h;
            let mut dn = v.clone();
            dn[i] -= h;
            grad[i] = (f(&up)? - f(&dn)?) / (2.0 * h);
        }
        let gn = norm(&grad);
        if gn == 0.0 {
            break;
        }
        let mut moved = false;
        while step > 1e-12 * r {
            let cand = clip(v.iter().zip(&grad).map(|(a, b)| a + step * b / gn).collect());
            let cv = f(&cand)?;
            if cv > val {
                v = cand;
                val = cv;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok((v, val))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn abs_traj(points: &[f64]) -> Trajectory {
        let mut t = Trajectory::new(ConvexSet::interval(-1.0, 1.0).unwrap());
        for p in points {
            t.record(vec![*p], Loss::Builtin(Builtin::Abs1d)).unwrap();
        }
        t
    }

    #[test]
    fn external_regret_examples() {
        let r = external_regret(&abs_traj(&[0.5, -0.5])).unwrap();
        assert_eq!(r.total, 1.0);
        assert_eq!(r.witness, Witness::Point { x: vec![0.0] });
        assert_eq!(r.exactness, Exactness::Exact);

        let mut t = Trajectory::new(ConvexSet::interval(-1.0, 1.0).unwrap());
        for x in [0.0, -0.1, -0.2] {
            t.record(vec![x], Loss::Builtin(Builtin::Linear { v: vec![1.0] })).unwrap();
        }
        let r = external_regret(&t).unwrap();
        assert_abs_diff_eq!(r.total, 2.7, epsilon = 1e-15);
        assert_eq!(r.witness, Witness::Point { x: vec![-1.0] });

        let mut t = Trajectory::new(ConvexSet::interval(-1.0, 1.0).unwrap());
        t.record(vec![0.3], Loss::Builtin(Builtin::Linear { v: vec![1.0] })).unwrap();
        t.record(vec![0.1], Loss::Builtin(Builtin::Linear { v: vec![-1.0] })).unwrap();
        let r = external_regret(&t).unwrap();
        assert_abs_diff_eq!(r.total, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn proximal_regret_examples() {
        let t = abs_traj(&[0.5, -0.5]);
        let r = proximal_regret(&t, &ProxFunction::Linear { v: vec![0.25] }).unwrap();
        assert_eq!(r.exact.total, 0.0);
        let whole = ProxFunction::Indicator { subset: ConvexSet::interval(-1.0, 1.0).unwrap() };
        assert_eq!(proximal_regret(&t, &whole).unwrap().exact.total, 0.0);

        let (l, delta, n) = (1.0, 0.3, 50);
        let mut t = Trajectory::new(ConvexSet::interval(-1.0, 1.0).unwrap());
        for _ in 0..n {
            t.record(vec![0.0], Loss::Builtin(Builtin::NegQuadratic1d { l })).unwrap();
        }
        let r = proximal_regret(&t, &ProxFunction::Linear { v: vec![delta] }).unwrap();
        assert_abs_diff_eq!(r.exact.total, delta * delta * l * n as f64 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn finite_phi_examples() {
        let t = abs_traj(&[0.5, -0.5]);
        assert_eq!(finite_phi_regret(&t, &[Deviation::Identity]).unwrap().total, 0.0);
        let zero = Deviation::Constant { point: vec![0.0] };
        assert_eq!(finite_phi_regret(&t, &[zero.clone()]).unwrap().total, 1.0);
        let r = finite_phi_regret(&t, &[Deviation::Identity, zero]).unwrap();
        assert_eq!(r.total, 1.0);
        assert!(matches!(r.witness, Witness::Map { index: 1, .. }));
        let r = finite_phi_regret(&t, &[Deviation::Identity, Deviation::Identity]).unwrap();
        assert!(matches!(r.witness, Witness::Map { index: 0, .. }));
    }

    #[test]
    fn proj_regret_one_dimensional_examples() {
        let pts: Vec<f64> = (0..100).map(|t| if t % 2 == 0 { 0.5 } else { -0.5 }).collect();
        let t = abs_traj(&pts);
        let r = proj_regret(&t, 0.25).unwrap();
        assert_eq!(r.total, 0.0);
        assert_eq!(r.exactness, Exactness::Exact);
        assert_eq!(external_regret(&t).unwrap().total, 50.0);
    }

    #[test]
    fn phi_int_is_scaled_external_regret() {
        let mut t = Trajectory::new(ConvexSet::interval(0.0, 2.0).unwrap());
        for x in [1.0, 1.5, 0.5] {
            t.record(vec![x], Loss::Builtin(Builtin::Linear { v: vec![1.0] })).unwrap();
        }
        let ext = external_regret(&t).unwrap().total;
        let r = phi_int_regret(&t, 0.5).unwrap();
        assert_abs_diff_eq!(r.total, 0.25 * ext, epsilon = 1e-12);
        assert_eq!(r.exactness, Exactness::Exact);
    }

    #[test]
    fn conv_regret_on_constant_maps_matches_vertex_search() {
        let set = ConvexSet::interval(0.0, 1.0).unwrap();
        let mut t = Trajectory::new(set);
        for x in [0.2, 0.9, 0.4] {
            t.record(vec![x], Loss::Builtin(Builtin::QuadraticToAnchor { weight: 2.0, anchor: vec![0.6] })).unwrap();
        }
        let maps = vec![Deviation::Constant { point: vec![0.0] }, Deviation::Constant { point: vec![1.0] }];
        let r = conv_phi_regret(&t, &maps).unwrap();
        // best mixture is the constant 0.6
        let direct = deviation_regret(&t, &Deviation::Constant { point: vec![0.6] }).unwrap().total;
        assert_abs_diff_eq!(r.lower, direct, epsilon = 1e-9);
        assert!(r.upper.unwrap() >= r.lower && r.upper.unwrap() - r.lower < 1e-8);
    }

    #[test]
    fn bound_formulas() {
        assert_abs_diff_eq!(bounds::hedge_bound(4, 2), 2.0 * (4.0 * 2f64.ln()).sqrt());
        assert_abs_diff_eq!(bounds::og_variation_bound(2, 1.0, 0.5, 1.0), 1.5);
        assert_abs_diff_eq!(bounds::kl(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert_abs_diff_eq!(bounds::gd_optimized_bound(1.0, 1.0, 0.0, 16), 4.0);
    }

    #[test]
    fn trajectory_json_round_trip() {
        let t = abs_traj(&[0.5, -0.5]);
        let s = serde_json::to_string(&t).unwrap();
        let mut back: Trajectory = serde_json::from_str(&s).unwrap();
        back.validate_and_fill().unwrap();
        assert_eq!(external_regret(&back).unwrap().total, 1.0);
    }
}
