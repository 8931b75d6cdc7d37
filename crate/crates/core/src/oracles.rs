//! First-order oracles: value and gradient with Lipschitz and smoothness
//! metadata.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{ConvexSet, MEMBER_TOL};
use crate::hardness::Graph;
use crate::vecops::{dist_sq, dot, norm, sub};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    Convex,
    SmoothNonconvex,
    Unknown,
}

/// A differentiable (or subdifferentiable) function of one vector argument.
pub trait DiffOracle: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.value(x), self.gradient(x))
    }

    /// Declared bound on the gradient norm, if known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }

    /// Declared Lipschitz constant of the gradient, if known.
    fn smoothness(&self) -> Option<f64> {
        None
    }

    fn convexity(&self) -> Convexity {
        Convexity::Unknown
    }
}

/// Built-in functions addressable from scenario configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "snake_case")]
pub enum Builtin {
    /// `<v, x>`
    Linear { v: Vec<f64> },
    /// `weight/2 * ||x - anchor||^2`
    QuadraticToAnchor { weight: f64, anchor: Vec<f64> },
    /// `|x|` on the line; the subgradient at 0 is 0.
    Abs1d,
    /// `-(l/2) x^2` on the line.
    NegQuadratic1d { l: f64 },
    /// `scale * x_0 * x_1`
    BilinearGamePayoff { scale: f64 },
    /// `(x_0 - x_1)^2`
    SquaredDifference,
    /// `x'Ax - (1 - 1/k) ||x||_1^2` for the adjacency matrix of `graph`.
    MotzkinFk { graph: Graph, k: usize },
}

impl Builtin {
    /// Dimension implied by the parameters, if any.
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            Builtin::Linear { v } => Some(v.len()),
            Builtin::QuadraticToAnchor { anchor, .. } => Some(anchor.len()),
            Builtin::Abs1d | Builtin::NegQuadratic1d { .. } => Some(1),
            Builtin::BilinearGamePayoff { .. } | Builtin::SquaredDifference => Some(2),
            Builtin::MotzkinFk { graph, .. } => Some(graph.d()),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Builtin::Linear { v } => dot(v, x),
            Builtin::QuadraticToAnchor { weight, anchor } => 0.5 * weight * dist_sq(x, anchor),
            Builtin::Abs1d => x[0].abs(),
            Builtin::NegQuadratic1d { l } => -0.5 * l * x[0] * x[0],
            Builtin::BilinearGamePayoff { scale } => scale * x[0] * x[1],
            Builtin::SquaredDifference => (x[0] - x[1]).powi(2),
            Builtin::MotzkinFk { graph, k } => crate::hardness::fk_value(graph, *k, x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Builtin::Linear { v } => v.clone(),
            Builtin::QuadraticToAnchor { weight, anchor } => {
                sub(x, anchor).into_iter().map(|d| weight * d).collect()
            }
            Builtin::Abs1d => vec![if x[0] > 0.0 {
                1.0
            } else if x[0] < 0.0 {
                -1.0
            } else {
                0.0
            }],
            Builtin::NegQuadratic1d { l } => vec![-l * x[0]],
            Builtin::BilinearGamePayoff { scale } => vec![scale * x[1], scale * x[0]],
            Builtin::SquaredDifference => {
                let d = 2.0 * (x[0] - x[1]);
                vec![d, -d]
            }
            Builtin::MotzkinFk { graph, k } => crate::hardness::fk_gradient(graph, *k, x),
        }
    }

    pub fn convexity(&self) -> Convexity {
        match self {
            Builtin::Linear { .. } | Builtin::Abs1d | Builtin::SquaredDifference => Convexity::Convex,
            Builtin::QuadraticToAnchor { weight, .. } => {
                if *weight >= 0.0 {
                    Convexity::Convex
                } else {
                    Convexity::SmoothNonconvex
                }
            }
            Builtin::NegQuadratic1d { l } => {
                if *l <= 0.0 {
                    Convexity::Convex
                } else {
                    Convexity::SmoothNonconvex
                }
            }
            Builtin::BilinearGamePayoff { .. } | Builtin::MotzkinFk { .. } => Convexity::SmoothNonconvex,
        }
    }

    /// Kinks of a one-dimensional builtin, i.e. points where it is not
    /// differentiable.
    pub fn kinks_1d(&self) -> Vec<f64> {
        match self {
            Builtin::Abs1d => vec![0.0],
            _ => Vec::new(),
        }
    }

    /// True for one-dimensional builtins that are piecewise linear or
    /// concave between kinks, so their minimum over an interval is attained
    /// at a kink or an endpoint.
    pub fn is_piecewise_concave_1d(&self) -> bool {
        match self {
            Builtin::Abs1d => true,
            Builtin::Linear { v } => v.len() == 1,
            Builtin::NegQuadratic1d { l } => *l >= 0.0,
            _ => false,
        }
    }
}

/// A builtin bound to its domain. Lipschitz and smoothness constants are
/// computed for that domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Oracle {
    pub f: Builtin,
    pub domain: ConvexSet,
}

impl Oracle {
    pub fn new(f: Builtin, domain: ConvexSet) -> Result<Self> {
        domain.validate()?;
        if let Some(d) = f.fixed_dim() {
            check_dim(domain.dim(), d)?;
        }
        if let Builtin::MotzkinFk { graph, k } = &f {
            graph.validate()?;
            if *k == 0 || *k > graph.d() {
                return Err(Error::input(format!("f_k requires 1 <= k <= d, got k = {k}")));
            }
        }
        Ok(Self { f, domain })
    }

    /// Value and gradient at a point of the domain.
    pub fn evaluate_with_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.domain.dim(), x.len())?;
        if !self.domain.contains(x, MEMBER_TOL) {
            return Err(Error::input("point outside the oracle's domain"));
        }
        Ok((self.f.value(x), self.f.gradient(x)))
    }
}

impl DiffOracle for Oracle {
    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.f.value(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.f.gradient(x)
    }

    fn lipschitz(&self) -> Option<f64> {
        let origin = vec![0.0; self.domain.dim()];
        match &self.f {
            Builtin::Linear { v } => Some(norm(v)),
            Builtin::QuadraticToAnchor { weight, anchor } => {
                Some(weight.abs() * self.domain.max_distance_from(anchor).ok()?)
            }
            Builtin::Abs1d => Some(1.0),
            Builtin::NegQuadratic1d { l } => Some(l.abs() * self.domain.max_distance_from(&origin).ok()?),
            Builtin::BilinearGamePayoff { scale } => {
                Some(scale.abs() * self.domain.max_distance_from(&origin).ok()?)
            }
            Builtin::SquaredDifference => {
                let up = self.domain.support_maximizer(&[1.0, -1.0]).ok()?.1;
                let down = self.domain.support_maximizer(&[-1.0, 1.0]).ok()?.1;
                Some(2.0 * 2f64.sqrt() * up.max(down).max(0.0))
            }
            Builtin::MotzkinFk { graph, .. } => {
                let radius = match self.domain {
                    ConvexSet::NonnegL1Ball { budget, .. } => budget,
                    _ => return None,
                };
                Some(4.0 * (graph.d() as f64).sqrt() * radius)
            }
        }
    }

    fn smoothness(&self) -> Option<f64> {
        match &self.f {
            Builtin::Linear { .. } => Some(0.0),
            Builtin::QuadraticToAnchor { weight, .. } => Some(weight.abs()),
            Builtin::Abs1d => None,
            Builtin::NegQuadratic1d { l } => Some(l.abs()),
            Builtin::BilinearGamePayoff { scale } => Some(scale.abs()),
            Builtin::SquaredDifference => Some(4.0),
            Builtin::MotzkinFk { graph, .. } => Some(2.0 * graph.d() as f64 + 2.0),
        }
    }

    fn convexity(&self) -> Convexity {
        self.f.convexity()
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// An oracle backed by closures.
#[derive(Clone)]
pub struct FnOracle {
    dim: usize,
    value: Arc<ValueFn>,
    grad: Arc<GradFn>,
    pub lipschitz: Option<f64>,
    pub smooth: Option<f64>,
    pub convexity: Convexity,
}

impl fmt::Debug for FnOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnOracle").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl FnOracle {
    pub fn new(
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            value: Arc::new(value),
            grad: Arc::new(grad),
            lipschitz: None,
            smooth: None,
            convexity: Convexity::Unknown,
        }
    }

    pub fn with_constants(mut self, g: Option<f64>, l: Option<f64>, convexity: Convexity) -> Self {
        self.lipschitz = g;
        self.smooth = l;
        self.convexity = convexity;
        self
    }
}

impl DiffOracle for FnOracle {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.grad)(x)
    }
    fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }
    fn smoothness(&self) -> Option<f64> {
        self.smooth
    }
    fn convexity(&self) -> Convexity {
        self.convexity
    }
}

/// Central finite-difference gradient with step `h`.
pub fn finite_difference_gradient(f: &dyn DiffOracle, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let up = f.value(&y);
            y[i] = x[i] - h;
            let down = f.value(&y);
            y[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}
