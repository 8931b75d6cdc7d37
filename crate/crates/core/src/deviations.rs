//! Strategy modifications and proximal operators.
//!
//! A [`Deviation`] is a single map `X -> X`; a [`DeviationSet`] is a family
//! Φ of such maps. Proximal operators are exposed both directly through
//! [`prox`] and as members of a `prox_family`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{beam_step, ConvexSet, MEMBER_TOL};
use crate::oracles::{Builtin, Convexity, DiffOracle, Oracle};
use crate::vecops::{add, dist, dist_sq, dot, lerp, mat_vec, norm, norm1, scale, sub};

/// Iteration controls for the generic prox solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxSolverParams {
    pub max_iter: usize,
    pub step_tol: f64,
    pub residual_tol: f64,
}

impl Default for ProxSolverParams {
    fn default() -> Self {
        Self { max_iter: 100_000, step_tol: 1e-10, residual_tol: 1e-9 }
    }
}

/// Shared handle to a user-supplied oracle.
#[derive(Clone)]
pub struct SharedOracle(pub Arc<dyn DiffOracle>);

impl fmt::Debug for SharedOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SharedOracle(dim = {})", self.0.dim())
    }
}

/// How `B_f` enters step-size-optimized bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum BfPolicy {
    /// Estimated from the realized prox trajectory after the run.
    Trajectory,
    /// Supplied a priori, usable for choosing the step size.
    Known { bound: f64 },
}

/// The function `f` defining `prox_f(x) = argmin_{y in X} f(y) + ||y - x||^2 / 2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProxFunction {
    /// `f(y) = <v, y>`, prox `Π[x - v]`.
    Linear { v: Vec<f64> },
    /// `f(y) = lambda/(1-lambda) * ||y - anchor||^2 / 2`, prox
    /// `(1 - lambda) x + lambda anchor`.
    QuadToAnchor { lambda: f64, anchor: Vec<f64> },
    /// Indicator of a closed convex subset of X; prox is projection onto it.
    Indicator { subset: ConvexSet },
    /// Prox equal to the affine map `Ax + b` for symmetric `A`.
    SymmetricAffine { a: Vec<Vec<f64>>, b: Vec<f64> },
    /// A builtin solved by projected gradient.
    Generic {
        f: Builtin,
        #[serde(default)]
        solver: ProxSolverParams,
    },
    /// A user oracle solved by projected gradient.
    #[serde(skip)]
    Custom { oracle: SharedOracle, solver: ProxSolverParams },
}

impl ProxFunction {
    pub fn label(&self) -> String {
        match self {
            ProxFunction::Linear { .. } => "linear".into(),
            ProxFunction::QuadToAnchor { lambda, .. } => format!("quad_to_anchor({lambda})"),
            ProxFunction::Indicator { .. } => "indicator".into(),
            ProxFunction::SymmetricAffine { .. } => "symmetric_affine".into(),
            ProxFunction::Generic { .. } => "generic".into(),
            ProxFunction::Custom { .. } => "custom".into(),
        }
    }

    /// Checks the type invariants against the ambient set.
    pub fn validate(&self, set: &ConvexSet) -> Result<()> {
        let d = set.dim();
        match self {
            ProxFunction::Linear { v } => check_dim(d, v.len()),
            ProxFunction::QuadToAnchor { lambda, anchor } => {
                check_dim(d, anchor.len())?;
                if !(0.0..1.0).contains(lambda) {
                    return Err(Error::input(format!("quad_to_anchor needs lambda in [0, 1), got {lambda}")));
                }
                if !set.contains(anchor, MEMBER_TOL) {
                    return Err(Error::input("quad_to_anchor anchor must lie in X"));
                }
                Ok(())
            }
            ProxFunction::Indicator { subset } => {
                subset.validate()?;
                check_dim(d, subset.dim())?;
                for p in subset_probe_points(subset) {
                    if !set.contains(&p, 1e-9) {
                        return Err(Error::input("indicator subset is not contained in X"));
                    }
                }
                Ok(())
            }
            ProxFunction::SymmetricAffine { a, b } => {
                let spec = symmetric_spectrum(a, d)?;
                check_dim(d, b.len())?;
                let (lo, hi) = spec;
                let convex = lo > 0.0 && hi <= 1.0 + 1e-12;
                let smooth = lo > 0.5;
                if !(convex || smooth) {
                    return Err(Error::input(format!(
                        "symmetric_affine needs PD A with eigenvalues in (0, 1] or all above 1/2; got [{lo}, {hi}]"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
                let mut pts = set.polytope_vertices();
                pts.extend((0..512).map(|_| set.sample(&mut rng)));
                for x in pts {
                    let y = add(&mat_vec(a, &x), b);
                    if !set.contains(&y, 1e-9) {
                        return Err(Error::input("symmetric_affine maps a point of X outside X"));
                    }
                }
                Ok(())
            }
            ProxFunction::Generic { f, .. } => {
                let oracle = Oracle::new(f.clone(), set.clone())?;
                check_generic(&oracle)
            }
            ProxFunction::Custom { oracle, .. } => {
                check_dim(d, oracle.0.dim())?;
                check_generic(oracle.0.as_ref())
            }
        }
    }

    /// `f(y)`; `+inf` off the indicator's subset.
    pub fn value(&self, y: &[f64], set: &ConvexSet) -> Result<f64> {
        Ok(match self {
            ProxFunction::Linear { v } => dot(v, y),
            ProxFunction::QuadToAnchor { lambda, anchor } => lambda / (1.0 - lambda) * 0.5 * dist_sq(y, anchor),
            ProxFunction::Indicator { subset } => {
                if subset.contains(y, 1e-9) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxFunction::SymmetricAffine { a, b } => {
                let d = y.len();
                let am = DMatrix::from_fn(d, d, |i, j| a[i][j]);
                let inv = am
                    .try_inverse()
                    .ok_or_else(|| Error::input("symmetric_affine matrix is singular"))?;
                let yv = DVector::from_column_slice(y);
                let bv = DVector::from_column_slice(b);
                let q = (&inv * &yv).dot(&yv) - yv.dot(&yv);
                0.5 * q - (&inv * bv).dot(&yv)
            }
            ProxFunction::Generic { f, .. } => {
                let _ = set;
                f.value(y)
            }
            ProxFunction::Custom { oracle, .. } => oracle.0.value(y),
        })
    }

    /// Smoothness of `f`, when it is differentiable.
    pub fn smoothness(&self, set: &ConvexSet) -> Option<f64> {
        match self {
            ProxFunction::Linear { .. } => Some(0.0),
            ProxFunction::QuadToAnchor { lambda, .. } => Some(lambda / (1.0 - lambda)),
            ProxFunction::Indicator { .. } => None,
            ProxFunction::SymmetricAffine { a, .. } => {
                let (lo, hi) = symmetric_spectrum(a, set.dim()).ok()?;
                Some((1.0 / lo - 1.0).abs().max((1.0 / hi - 1.0).abs()))
            }
            ProxFunction::Generic { f, .. } => Oracle::new(f.clone(), set.clone()).ok()?.smoothness(),
            ProxFunction::Custom { oracle, .. } => oracle.0.smoothness(),
        }
    }

    /// True when `f` is convex; otherwise it is smooth with constant below 1.
    pub fn is_convex(&self, set: &ConvexSet) -> bool {
        match self {
            ProxFunction::Linear { .. } | ProxFunction::QuadToAnchor { .. } | ProxFunction::Indicator { .. } => true,
            ProxFunction::SymmetricAffine { a, .. } => match symmetric_spectrum(a, set.dim()) {
                Ok((lo, hi)) => lo > 0.0 && hi <= 1.0 + 1e-12,
                Err(_) => false,
            },
            ProxFunction::Generic { f, .. } => f.convexity() == Convexity::Convex,
            ProxFunction::Custom { oracle, .. } => oracle.0.convexity() == Convexity::Convex,
        }
    }
}

fn check_generic(oracle: &dyn DiffOracle) -> Result<()> {
    let l = oracle
        .smoothness()
        .ok_or_else(|| Error::input("generic prox needs a declared smoothness constant"))?;
    if oracle.convexity() == Convexity::Convex || l < 1.0 {
        Ok(())
    } else {
        Err(Error::input(format!("generic prox needs a convex f or smoothness < 1, got L = {l}")))
    }
}

/// Points used to test subset inclusion: vertices when available, plus
/// support maximizers along the coordinate directions and seeded samples.
fn subset_probe_points(subset: &ConvexSet) -> Vec<Vec<f64>> {
    let d = subset.dim();
    let mut pts = subset.polytope_vertices();
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[i] = s;
            pts.push(subset.support_maximizer(&e).expect("dimension matches").0);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..256 {
        let mut g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = norm(&g).max(1e-300);
        g.iter_mut().for_each(|v| *v /= n);
        pts.push(subset.support_maximizer(&g).expect("dimension matches").0);
    }
    pts
}

/// Smallest and largest eigenvalue of a symmetric matrix given by rows.
pub fn symmetric_spectrum(a: &[Vec<f64>], d: usize) -> Result<(f64, f64)> {
    check_dim(d, a.len())?;
    for row in a {
        check_dim(d, row.len())?;
    }
    for i in 0..d {
        for j in 0..i {
            if (a[i][j] - a[j][i]).abs() > 1e-12 * (1.0 + a[i][j].abs()) {
                return Err(Error::input("symmetric_affine matrix is not symmetric"));
            }
        }
    }
    let m = DMatrix::from_fn(d, d, |i, j| a[i][j]);
    let eig = SymmetricEigen::new(m).eigenvalues;
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// `prox_f(x) = argmin_{y in X} f(y) + ||y - x||^2 / 2`.
pub fn prox(f: &ProxFunction, x: &[f64], set: &ConvexSet) -> Result<Vec<f64>> {
    check_dim(set.dim(), x.len())?;
    if !set.contains(x, 1e-7) {
        return Err(Error::input("prox input must lie in X"));
    }
    match f {
        ProxFunction::Linear { v } => {
            check_dim(x.len(), v.len())?;
            set.project(&sub(x, v))
        }
        ProxFunction::QuadToAnchor { lambda, anchor } => {
            check_dim(x.len(), anchor.len())?;
            Ok(lerp(x, anchor, *lambda))
        }
        ProxFunction::Indicator { subset } => subset.project(x),
        ProxFunction::SymmetricAffine { a, b } => Ok(add(&mat_vec(a, x), b)),
        ProxFunction::Generic { f: builtin, solver } => {
            let oracle = Oracle::new(builtin.clone(), set.clone())?;
            check_generic(&oracle)?;
            generic_prox(&oracle, x, set, solver)
        }
        ProxFunction::Custom { oracle, solver } => {
            check_generic(oracle.0.as_ref())?;
            generic_prox(oracle.0.as_ref(), x, set, solver)
        }
    }
}

/// Projected gradient on `y -> f(y) + ||y - x||^2 / 2` with step `1/(1+L)`.
pub fn generic_prox(f: &dyn DiffOracle, x: &[f64], set: &ConvexSet, params: &ProxSolverParams) -> Result<Vec<f64>> {
    let l = f.smoothness().ok_or_else(|| Error::input("generic prox needs a declared smoothness constant"))?;
    let step = 1.0 / (1.0 + l);
    let mut p = x.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..params.max_iter {
        let g = f.gradient(&p);
        let trial: Vec<f64> = p.iter().zip(&g).zip(x).map(|((pi, gi), xi)| pi - step * (gi + pi - xi)).collect();
        let next = set.project(&trial)?;
        let moved = dist(&next, &p);
        p = next;
        residual = moved / step;
        if moved <= params.step_tol && residual <= params.residual_tol {
            return Ok(p);
        }
    }
    Err(Error::Numerical { msg: "generic prox solver did not converge".into(), residual })
}

/// Bregman prox under the negative entropy on the simplex:
/// `argmin_{y in Δ} f(y) + KL(y | x)`. Supports linear and quad_to_anchor.
pub fn bregman_prox_negentropy(f: &ProxFunction, x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| *v < 0.0) || (x.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::input("Bregman prox input must lie on the simplex"));
    }
    match f {
        ProxFunction::Linear { v } => {
            check_dim(x.len(), v.len())?;
            let m = v
                .iter()
                .zip(x)
                .filter(|(_, xi)| **xi > 0.0)
                .map(|(vi, _)| -vi)
                .fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = v
                .iter()
                .zip(x)
                .map(|(vi, xi)| if *xi > 0.0 { xi * (-vi - m).exp() } else { 0.0 })
                .collect();
            let s: f64 = w.iter().sum();
            Ok(w.iter().map(|wi| wi / s).collect())
        }
        ProxFunction::QuadToAnchor { lambda, anchor } => {
            check_dim(x.len(), anchor.len())?;
            let c = lambda / (1.0 - lambda);
            if c == 0.0 {
                return Ok(x.to_vec());
            }
            entropic_quadratic_prox(c, anchor, x)
        }
        _ => Err(Error::input(format!("no Bregman prox for the {} family", f.label()))),
    }
}

/// Solves `w + ln w = z` for `w > 0`, i.e. `w = W(e^z)`.
fn lambert_w_exp(z: f64) -> f64 {
    let mut w = if z < 1.0 { z.exp() } else { z - z.ln() };
    for _ in 0..100 {
        let h = w + w.ln() - z;
        let next = w - h / (1.0 + 1.0 / w);
        let next = if next <= 0.0 { w / 2.0 } else { next };
        if (next - w).abs() <= 1e-16 * w.max(1e-300) {
            return next;
        }
        w = next;
    }
    w
}

/// KKT solution `y_i = W(c x_i e^{c a_i - nu}) / c` with `nu` chosen so that
/// `sum y = 1`.
fn entropic_quadratic_prox(c: f64, anchor: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let base: Vec<Option<f64>> =
        x.iter().zip(anchor).map(|(xi, ai)| if *xi > 0.0 { Some((c * xi).ln() + c * ai) } else { None }).collect();
    let eval = |nu: f64| -> (Vec<f64>, f64, f64) {
        let mut y = vec![0.0; x.len()];
        let mut deriv = 0.0;
        for (i, b) in base.iter().enumerate() {
            if let Some(z) = b {
                let yi = lambert_w_exp(z - nu) / c;
                y[i] = yi;
                deriv -= yi / (1.0 + c * yi);
            }
        }
        let s = y.iter().sum();
        (y, s, deriv)
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    while eval(lo).1 < 1.0 {
        lo *= 2.0;
        if lo < -1e6 {
            return Err(Error::Numerical { msg: "Bregman prox bracket failed".into(), residual: f64::INFINITY });
        }
    }
    while eval(hi).1 > 1.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Numerical { msg: "Bregman prox bracket failed".into(), residual: f64::INFINITY });
        }
    }
    let mut nu = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (y, s, deriv) = eval(nu);
        if (s - 1.0).abs() <= 1e-15 {
            return Ok(y);
        }
        if s > 1.0 {
            lo = nu;
        } else {
            hi = nu;
        }
        let newton = nu - (s - 1.0) / deriv;
        nu = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    let (y, s, _) = eval(nu);
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::Numerical { msg: "Bregman prox normalization failed".into(), residual: (s - 1.0).abs() });
    }
    Ok(y.iter().map(|v| v / s).collect())
}

type MapFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A named user map for finite families.
#[derive(Clone)]
pub struct NamedMap {
    pub name: String,
    pub map: Arc<MapFn>,
}

impl NamedMap {
    pub fn new(name: impl Into<String>, map: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self { name: name.into(), map: Arc::new(map) }
    }
}

impl fmt::Debug for NamedMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NamedMap({})", self.name)
    }
}

/// A single strategy modification `φ: X -> X`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum Deviation {
    Identity,
    Constant { point: Vec<f64> },
    /// `(1 - lambda) x + lambda target`
    Interpolate { lambda: f64, target: Vec<f64> },
    /// `Π[x - v]`
    Projection { v: Vec<f64> },
    /// `x - lambda* v` with the largest feasible `lambda*` in `[0, 1]`.
    Beam { v: Vec<f64> },
    /// `(1 - delta/(12 d^3 ||x||_1)) x` when `||x||_1 >= delta/(12 d^3)`,
    /// the identity otherwise.
    Shrink { delta: f64 },
    Prox { f: ProxFunction },
    #[serde(skip)]
    Custom(NamedMap),
}

impl Deviation {
    pub fn name(&self) -> String {
        match self {
            Deviation::Identity => "identity".into(),
            Deviation::Constant { point } => format!("constant{point:?}"),
            Deviation::Interpolate { lambda, target } => format!("interpolate({lambda},{target:?})"),
            Deviation::Projection { v } => format!("projection{v:?}"),
            Deviation::Beam { v } => format!("beam{v:?}"),
            Deviation::Shrink { delta } => format!("shrink({delta})"),
            Deviation::Prox { f } => format!("prox_{}", f.label()),
            Deviation::Custom(m) => m.name.clone(),
        }
    }

    /// `φ(x)`. Errors if `x` is outside `set` or the result leaves it.
    pub fn apply(&self, x: &[f64], set: &ConvexSet) -> Result<Vec<f64>> {
        check_dim(set.dim(), x.len())?;
        let y = match self {
            Deviation::Identity => x.to_vec(),
            Deviation::Constant { point } => {
                check_dim(x.len(), point.len())?;
                point.clone()
            }
            Deviation::Interpolate { lambda, target } => {
                check_dim(x.len(), target.len())?;
                lerp(x, target, *lambda)
            }
            Deviation::Projection { v } => {
                check_dim(x.len(), v.len())?;
                set.project(&sub(x, v))?
            }
            Deviation::Beam { v } => {
                let lam = beam_step(set, x, v)?;
                x.iter().zip(v).map(|(xi, vi)| xi - lam * vi).collect()
            }
            Deviation::Shrink { delta } => shrink_map(x, *delta),
            Deviation::Prox { f } => prox(f, x, set)?,
            Deviation::Custom(m) => (m.map)(x),
        };
        check_dim(set.dim(), y.len())?;
        if !set.contains(&y, 1e-7) {
            return Err(Error::input(format!("deviation {} left the strategy set", self.name())));
        }
        Ok(y)
    }
}

/// The extra map of the restricted family.
pub fn shrink_map(x: &[f64], delta: f64) -> Vec<f64> {
    let d = x.len() as f64;
    let cut = delta / (12.0 * d.powi(3));
    let s = norm1(x);
    if s >= cut && s > 0.0 {
        scale(x, 1.0 - cut / s)
    } else {
        x.to_vec()
    }
}

/// A family Φ of strategy modifications.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DeviationSet {
    Finite {
        maps: Vec<Deviation>,
        #[serde(default)]
        locality_delta: Option<f64>,
    },
    Proj { delta: f64 },
    Int { delta: f64 },
    IntPlus { delta: f64 },
    Beam { delta: f64 },
    ProxFamily { fs: Vec<ProxFunction> },
    Conv {
        maps: Vec<Deviation>,
        #[serde(default)]
        locality_delta: Option<f64>,
    },
}

impl DeviationSet {
    pub fn locality_delta(&self) -> Option<f64> {
        match self {
            DeviationSet::Finite { locality_delta, .. } | DeviationSet::Conv { locality_delta, .. } => *locality_delta,
            DeviationSet::Proj { delta }
            | DeviationSet::Int { delta }
            | DeviationSet::IntPlus { delta }
            | DeviationSet::Beam { delta } => Some(*delta),
            DeviationSet::ProxFamily { .. } => None,
        }
    }

    /// The members of an enumerable family.
    pub fn members(&self) -> Option<Vec<Deviation>> {
        match self {
            DeviationSet::Finite { maps, .. } | DeviationSet::Conv { maps, .. } => Some(maps.clone()),
            DeviationSet::ProxFamily { fs } => Some(fs.iter().map(|f| Deviation::Prox { f: f.clone() }).collect()),
            _ => None,
        }
    }

    pub fn validate(&self, set: &ConvexSet) -> Result<()> {
        if let Some(delta) = self.locality_delta() {
            if !(delta >= 0.0 && delta.is_finite()) {
                return Err(Error::input(format!("locality delta must be finite and nonnegative, got {delta}")));
            }
        }
        match self {
            DeviationSet::Finite { maps, .. } | DeviationSet::Conv { maps, .. } if maps.is_empty() => {
                Err(Error::input("a finite family needs at least one map"))
            }
            DeviationSet::ProxFamily { fs } => fs.iter().try_for_each(|f| f.validate(set)),
            _ => Ok(()),
        }
    }

    /// Empirical maximum of `||φ(x) - x||` over sampled `x` and members.
    /// A lower bound on the true supremum.
    pub fn locality_radius<R: Rng + ?Sized>(&self, set: &ConvexSet, n_samples: usize, rng: &mut R) -> Result<f64> {
        let d = set.dim();
        let mut xs = set.polytope_vertices();
        xs.extend((0..n_samples.max(1)).map(|_| set.sample(rng)));
        let directions = |k: usize, r: &mut R| -> Vec<Vec<f64>> {
            let mut out = Vec::new();
            for i in 0..d {
                for s in [1.0, -1.0] {
                    let mut e = vec![0.0; d];
                    e[i] = s;
                    out.push(e);
                }
            }
            for _ in 0..k {
                let g: Vec<f64> = (0..d).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
                let n = norm(&g).max(1e-300);
                out.push(g.iter().map(|v| v / n).collect());
            }
            out
        };
        let mut radius: f64 = 0.0;
        match self {
            DeviationSet::Finite { .. } | DeviationSet::Conv { .. } | DeviationSet::ProxFamily { .. } => {
                let members = self.members().expect("enumerable");
                for x in &xs {
                    for m in &members {
                        radius = radius.max(dist(&m.apply(x, set)?, x));
                    }
                }
            }
            DeviationSet::Proj { delta } | DeviationSet::Beam { delta } => {
                let beam = matches!(self, DeviationSet::Beam { .. });
                for x in &xs {
                    for u in directions(8, rng) {
                        let v = scale(&u, *delta);
                        let dev = if beam { Deviation::Beam { v } } else { Deviation::Projection { v } };
                        radius = radius.max(dist(&dev.apply(x, set)?, x));
                    }
                }
            }
            DeviationSet::Int { delta } | DeviationSet::IntPlus { delta } => {
                let lam = int_lambda_max(*delta, set);
                let mut targets = set.polytope_vertices();
                targets.extend((0..16).map(|_| set.sample(rng)));
                for x in &xs {
                    for t in &targets {
                        radius = radius.max(lam * dist(t, x));
                    }
                    if matches!(self, DeviationSet::IntPlus { .. }) {
                        radius = radius.max(dist(&shrink_map(x, *delta), x));
                    }
                }
            }
        }
        Ok(radius)
    }
}

/// Largest interpolation weight allowed in `Int(delta)`: `min(1, delta / D)`.
pub fn int_lambda_max(delta: f64, set: &ConvexSet) -> f64 {
    let diam = set.diameter();
    if diam == 0.0 {
        1.0
    } else {
        (delta / diam).min(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line() -> ConvexSet {
        ConvexSet::interval(-1.0, 1.0).unwrap()
    }

    #[test]
    fn prox_examples() {
        let p = prox(&ProxFunction::Linear { v: vec![0.5] }, &[0.9], &line()).unwrap();
        assert_abs_diff_eq!(p[0], 0.4, epsilon = 1e-15);
        let p = prox(&ProxFunction::QuadToAnchor { lambda: 0.5, anchor: vec![0.0] }, &[1.0], &line()).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-15);
        let f = ProxFunction::SymmetricAffine { a: vec![vec![0.75]], b: vec![0.0] };
        f.validate(&line()).unwrap();
        let p = prox(&f, &[0.8], &line()).unwrap();
        assert_abs_diff_eq!(p[0], 0.6, epsilon = 1e-15);
    }

    #[test]
    fn symmetric_affine_value_matches_hand_formula() {
        // A = 0.75 gives f(x) = x^2 / 6; minimizing x^2/6 + (x - 0.8)^2/2 gives 0.6.
        let f = ProxFunction::SymmetricAffine { a: vec![vec![0.75]], b: vec![0.0] };
        assert_abs_diff_eq!(f.value(&[0.3], &line()).unwrap(), 0.09 / 6.0, epsilon = 1e-15);
        let g = ProxFunction::Generic {
            f: Builtin::QuadraticToAnchor { weight: 1.0 / 3.0, anchor: vec![0.0] },
            solver: ProxSolverParams::default(),
        };
        let p = prox(&g, &[0.8], &line()).unwrap();
        assert_abs_diff_eq!(p[0], 0.6, epsilon = 1e-9);
    }

    #[test]
    fn symmetric_affine_rejections() {
        let bad = ProxFunction::SymmetricAffine { a: vec![vec![0.2, 0.0], vec![0.0, -0.1]], b: vec![0.0, 0.0] };
        assert!(bad.validate(&ConvexSet::unit_box(2).unwrap()).is_err());
        let asym = ProxFunction::SymmetricAffine { a: vec![vec![0.5, 0.1], vec![0.0, 0.5]], b: vec![0.0, 0.0] };
        assert!(asym.validate(&ConvexSet::unit_box(2).unwrap()).is_err());
        let escapes = ProxFunction::SymmetricAffine { a: vec![vec![0.9]], b: vec![0.5] };
        assert!(escapes.validate(&line()).is_err());
    }

    #[test]
    fn generic_rejects_unit_smoothness() {
        let f = ProxFunction::Generic {
            f: Builtin::NegQuadratic1d { l: 1.0 },
            solver: ProxSolverParams::default(),
        };
        assert!(f.validate(&line()).is_err());
        let ok = ProxFunction::Generic {
            f: Builtin::NegQuadratic1d { l: 0.5 },
            solver: ProxSolverParams::default(),
        };
        ok.validate(&line()).unwrap();
        // argmin -x^2/4 + (y - 0.4)^2/2 over [-1, 1] is y = 0.8.
        let p = prox(&ok, &[0.4], &line()).unwrap();
        assert_abs_diff_eq!(p[0], 0.8, epsilon = 1e-9);
    }

    #[test]
    fn generic_non_convergence_reports_residual() {
        let f = ProxFunction::Generic {
            f: Builtin::QuadraticToAnchor { weight: 5.0, anchor: vec![0.0] },
            solver: ProxSolverParams { max_iter: 1, ..Default::default() },
        };
        match prox(&f, &[0.9], &line()) {
            Err(Error::Numerical { residual, .. }) => assert!(residual > 0.0),
            other => panic!("expected a numerical error, got {other:?}"),
        }
    }

    #[test]
    fn apply_examples() {
        let dev = Deviation::Interpolate { lambda: 0.5, target: vec![0.0] };
        assert_eq!(dev.apply(&[1.0], &line()).unwrap(), vec![0.5]);
        let tri = ConvexSet::triangle([0.0, 0.0], [1.0, 1.0], [0.2, 0.0]).unwrap();
        let beam = Deviation::Beam { v: vec![-0.2, 0.0] };
        let y = beam.apply(&[0.5, 0.5], &tri).unwrap();
        assert_abs_diff_eq!(y[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(y[1], 0.5, epsilon = 1e-12);
        let y = Deviation::Shrink { delta: 0.6 }.apply(&[0.5], &ConvexSet::nonneg_l1_ball(1, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(y[0], 0.45, epsilon = 1e-15);
    }

    #[test]
    fn shrink_is_identity_below_threshold() {
        assert_eq!(shrink_map(&[0.01], 0.6), vec![0.01]);
    }

    #[test]
    fn locality_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = ConvexSet::unit_box(2).unwrap();
        assert!(DeviationSet::Proj { delta: 0.3 }.locality_radius(&b, 200, &mut rng).unwrap() <= 0.3 + 1e-12);
        assert!(DeviationSet::Int { delta: 0.3 }.locality_radius(&b, 200, &mut rng).unwrap() <= 0.3 + 1e-12);
        let id = DeviationSet::Finite { maps: vec![Deviation::Identity], locality_delta: Some(0.0) };
        assert_eq!(id.locality_radius(&b, 50, &mut rng).unwrap(), 0.0);
        let l1 = ConvexSet::nonneg_l1_ball(3, 1.0).unwrap();
        assert!(DeviationSet::IntPlus { delta: 0.5 }.locality_radius(&l1, 200, &mut rng).unwrap() <= 0.5 + 1e-12);
        assert!(DeviationSet::Beam { delta: 0.2 }.locality_radius(&b, 100, &mut rng).unwrap() <= 0.2 + 1e-12);
    }

    #[test]
    fn bregman_prox_linear_is_softmax() {
        let y = bregman_prox_negentropy(&ProxFunction::Linear { v: vec![1.0, 0.0] }, &[0.5, 0.5]).unwrap();
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(y[0], 1.0 / (1.0 + e), epsilon = 1e-15);
    }

    #[test]
    fn bregman_prox_quadratic_satisfies_kkt() {
        let x = [0.1, 0.2, 0.3, 0.4];
        let a = [0.7, 0.1, 0.1, 0.1];
        let lambda: f64 = 0.4;
        let c = lambda / (1.0 - lambda);
        let y = bregman_prox_negentropy(&ProxFunction::QuadToAnchor { lambda, anchor: a.to_vec() }, &x).unwrap();
        assert_abs_diff_eq!(y.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        // Stationarity: c (y_i - a_i) + ln(y_i / x_i) is the same for every i.
        let k: Vec<f64> = (0..4).map(|i| c * (y[i] - a[i]) + (y[i] / x[i]).ln()).collect();
        for v in &k {
            assert_abs_diff_eq!(*v, k[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn serde_descriptors() {
        let j = r#"{"family":"prox_family","fs":[{"family":"linear","v":[0.1]},{"family":"indicator","subset":{"kind":"interval","lo":0.0,"hi":0.5}}]}"#;
        let s: DeviationSet = serde_json::from_str(j).unwrap();
        s.validate(&line()).unwrap();
        assert_eq!(s.members().unwrap().len(), 2);
        let d: Deviation = serde_json::from_str(r#"{"map":"constant","point":[0.0]}"#).unwrap();
        assert_eq!(d.apply(&[0.7], &line()).unwrap(), vec![0.0]);
    }
}
