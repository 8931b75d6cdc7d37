//! Convex feasible sets with exact Euclidean projections.
//!
//! Every kind has a closed-form projection. Membership checks take an
//! explicit tolerance so that callers can distinguish "numerically on the
//! boundary" from "outside".

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::vecops::{dist, dot, lex_less, norm};

/// Default membership tolerance.
pub const MEMBER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexSet {
    Interval { lo: f64, hi: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Simplex { d: usize },
    NonnegL1Ball { d: usize, budget: f64 },
    Triangle2d { a: [f64; 2], b: [f64; 2], c: [f64; 2] },
}

impl ConvexSet {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        let s = ConvexSet::Interval { lo, hi };
        s.validate()?;
        Ok(s)
    }

    pub fn unit_box(d: usize) -> Result<Self> {
        Self::cube(vec![0.0; d], vec![1.0; d])
    }

    pub fn cube(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let s = ConvexSet::Box { lo, hi };
        s.validate()?;
        Ok(s)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let s = ConvexSet::Ball { center, radius };
        s.validate()?;
        Ok(s)
    }

    pub fn simplex(d: usize) -> Result<Self> {
        let s = ConvexSet::Simplex { d };
        s.validate()?;
        Ok(s)
    }

    pub fn nonneg_l1_ball(d: usize, budget: f64) -> Result<Self> {
        let s = ConvexSet::NonnegL1Ball { d, budget };
        s.validate()?;
        Ok(s)
    }

    pub fn triangle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Result<Self> {
        let s = ConvexSet::Triangle2d { a, b, c };
        s.validate()?;
        Ok(s)
    }

    /// Checks the type invariants. Deserialized sets must pass this before use.
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            ConvexSet::Interval { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::input(format!("interval requires lo <= hi, got [{lo}, {hi}]")));
                }
            }
            ConvexSet::Box { lo, hi } => {
                if lo.is_empty() {
                    return Err(Error::input("box must have positive dimension"));
                }
                check_dim(lo.len(), hi.len())?;
                if !finite(lo) || !finite(hi) || lo.iter().zip(hi).any(|(l, h)| l > h) {
                    return Err(Error::input("box requires finite lo <= hi per coordinate"));
                }
            }
            ConvexSet::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(Error::input("ball must have positive dimension"));
                }
                if !finite(center) || !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::input("ball requires a finite center and radius > 0"));
                }
            }
            ConvexSet::Simplex { d } => {
                if *d == 0 {
                    return Err(Error::input("simplex must have positive dimension"));
                }
            }
            ConvexSet::NonnegL1Ball { d, budget } => {
                if *d == 0 {
                    return Err(Error::input("l1 ball must have positive dimension"));
                }
                if !(budget.is_finite() && *budget > 0.0) {
                    return Err(Error::input("nonneg_l1_ball requires budget > 0"));
                }
            }
            ConvexSet::Triangle2d { a, b, c } => {
                if !finite(a) || !finite(b) || !finite(c) {
                    return Err(Error::input("triangle vertices must be finite"));
                }
                let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
                let scale = dist(a, b).max(dist(b, c)).max(dist(a, c));
                if area2.abs() <= 1e-12 * scale * scale {
                    return Err(Error::input("triangle vertices are collinear"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Interval { .. } => 1,
            ConvexSet::Box { lo, .. } => lo.len(),
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Simplex { d } | ConvexSet::NonnegL1Ball { d, .. } => *d,
            ConvexSet::Triangle2d { .. } => 2,
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            ConvexSet::Interval { lo, hi } => x[0] >= lo - tol && x[0] <= hi + tol,
            ConvexSet::Box { lo, hi } => {
                x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
            }
            ConvexSet::Ball { center, radius } => dist(x, center) <= radius + tol,
            ConvexSet::Simplex { .. } => {
                x.iter().all(|v| *v >= -tol) && (x.iter().sum::<f64>() - 1.0).abs() <= tol
            }
            ConvexSet::NonnegL1Ball { budget, .. } => {
                x.iter().all(|v| *v >= -tol) && x.iter().sum::<f64>() <= budget + tol
            }
            ConvexSet::Triangle2d { a, b, c } => {
                triangle_halfplanes(a, b, c).iter().all(|(n, off)| dot(n, x) - off <= tol)
            }
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("cannot project a non-finite point"));
        }
        Ok(match self {
            ConvexSet::Interval { lo, hi } => vec![x[0].clamp(*lo, *hi)],
            ConvexSet::Box { lo, hi } => {
                x.iter().zip(lo.iter().zip(hi)).map(|(v, (l, h))| v.clamp(*l, *h)).collect()
            }
            ConvexSet::Ball { center, radius } => {
                let r = dist(x, center);
                if r <= *radius {
                    x.to_vec()
                } else {
                    let s = radius / r;
                    center.iter().zip(x).map(|(c, v)| c + s * (v - c)).collect()
                }
            }
            ConvexSet::Simplex { .. } => project_scaled_simplex(x, 1.0),
            ConvexSet::NonnegL1Ball { budget, .. } => {
                let clipped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
                if clipped.iter().sum::<f64>() <= *budget {
                    clipped
                } else {
                    project_scaled_simplex(&clipped, *budget)
                }
            }
            ConvexSet::Triangle2d { a, b, c } => project_triangle(a, b, c, x),
        })
    }

    /// Point of the set maximizing `<direction, .>`; ties go to the
    /// lexicographically smallest maximizer.
    pub fn support_maximizer(&self, direction: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_dim(self.dim(), direction.len())?;
        let point = match self {
            ConvexSet::Interval { lo, hi } => vec![if direction[0] > 0.0 { *hi } else { *lo }],
            ConvexSet::Box { lo, hi } => direction
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(g, (l, h))| if *g > 0.0 { *h } else { *l })
                .collect(),
            ConvexSet::Ball { center, radius } => {
                let n = norm(direction);
                if n == 0.0 {
                    let mut p = center.clone();
                    p[0] -= radius;
                    p
                } else {
                    center.iter().zip(direction).map(|(c, g)| c + radius * g / n).collect()
                }
            }
            ConvexSet::Simplex { d } => {
                // The maximizing face is spanned by the argmax coordinates; its
                // lexicographically smallest point is the last such vertex.
                let best = last_argmax(direction);
                unit(*d, best, 1.0)
            }
            ConvexSet::NonnegL1Ball { d, budget } => {
                let best = last_argmax(direction);
                if direction[best] > 0.0 {
                    unit(*d, best, *budget)
                } else {
                    vec![0.0; *d]
                }
            }
            ConvexSet::Triangle2d { a, b, c } => {
                let mut best = a.to_vec();
                let mut best_val = dot(a, direction);
                for v in [b, c] {
                    let val = dot(v, direction);
                    if val > best_val || (val == best_val && lex_less(v, &best)) {
                        best = v.to_vec();
                        best_val = val;
                    }
                }
                best
            }
        };
        let value = dot(&point, direction);
        Ok((point, value))
    }

    /// Exact Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        match self {
            ConvexSet::Interval { lo, hi } => hi - lo,
            ConvexSet::Box { lo, hi } => dist(lo, hi),
            ConvexSet::Ball { radius, .. } => 2.0 * radius,
            ConvexSet::Simplex { d } => {
                if *d >= 2 {
                    2f64.sqrt()
                } else {
                    0.0
                }
            }
            ConvexSet::NonnegL1Ball { d, budget } => {
                if *d >= 2 {
                    budget * 2f64.sqrt()
                } else {
                    *budget
                }
            }
            ConvexSet::Triangle2d { a, b, c } => dist(a, b).max(dist(b, c)).max(dist(a, c)),
        }
    }

    /// Largest distance from `p` to any point of the set.
    pub fn max_distance_from(&self, p: &[f64]) -> Result<f64> {
        check_dim(self.dim(), p.len())?;
        Ok(match self {
            ConvexSet::Ball { center, radius } => dist(p, center) + radius,
            ConvexSet::Box { lo, hi } => p
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| (v - l).abs().max((v - h).abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            ConvexSet::Interval { lo, hi } => (p[0] - lo).abs().max((p[0] - hi).abs()),
            _ => self
                .polytope_vertices()
                .iter()
                .map(|v| dist(v, p))
                .fold(0.0, f64::max),
        })
    }

    /// Vertices of the polytope kinds (interval, simplex, l1 ball, triangle,
    /// and boxes of dimension at most 16). Empty for balls.
    pub fn polytope_vertices(&self) -> Vec<Vec<f64>> {
        match self {
            ConvexSet::Interval { lo, hi } => vec![vec![*lo], vec![*hi]],
            ConvexSet::Box { lo, hi } => {
                let d = lo.len();
                if d > 16 {
                    return Vec::new();
                }
                (0..1usize << d)
                    .map(|m| (0..d).map(|i| if m >> i & 1 == 1 { hi[i] } else { lo[i] }).collect())
                    .collect()
            }
            ConvexSet::Ball { .. } => Vec::new(),
            ConvexSet::Simplex { d } => (0..*d).map(|i| unit(*d, i, 1.0)).collect(),
            ConvexSet::NonnegL1Ball { d, budget } => {
                let mut v = vec![vec![0.0; *d]];
                v.extend((0..*d).map(|i| unit(*d, i, *budget)));
                v
            }
            ConvexSet::Triangle2d { a, b, c } => vec![a.to_vec(), b.to_vec(), c.to_vec()],
        }
    }

    /// Radius of the largest Euclidean ball around `x` contained in the set
    /// (zero for sets without interior, such as the simplex).
    pub fn interior_margin(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        if !self.contains(x, MEMBER_TOL) {
            return Ok(0.0);
        }
        let m = match self {
            ConvexSet::Interval { lo, hi } => (x[0] - lo).min(hi - x[0]),
            ConvexSet::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| (v - l).min(h - v))
                .fold(f64::INFINITY, f64::min),
            ConvexSet::Ball { center, radius } => radius - dist(x, center),
            ConvexSet::Simplex { .. } => 0.0,
            ConvexSet::NonnegL1Ball { d, budget } => {
                let min_coord = x.iter().fold(f64::INFINITY, |m, v| m.min(*v));
                min_coord.min((budget - x.iter().sum::<f64>()) / (*d as f64).sqrt())
            }
            ConvexSet::Triangle2d { a, b, c } => triangle_halfplanes(a, b, c)
                .iter()
                .map(|(n, off)| off - dot(n, x))
                .fold(f64::INFINITY, f64::min),
        };
        Ok(m.max(0.0))
    }

    /// Projection of the origin; the default starting point of learners.
    pub fn projected_origin(&self) -> Vec<f64> {
        self.project(&vec![0.0; self.dim()]).expect("dimension matches by construction")
    }

    /// Draws a point of the set. Boxes and intervals are sampled uniformly,
    /// balls by a normalized Gaussian scaled by `U^{1/d}`, simplices by
    /// Dirichlet(1), the l1 ball by dropping one coordinate of a
    /// Dirichlet(1) draw in dimension d+1, triangles by Dirichlet(1)
    /// barycentric weights.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            ConvexSet::Interval { lo, hi } => vec![lo + (hi - lo) * rng.random::<f64>()],
            ConvexSet::Box { lo, hi } => {
                lo.iter().zip(hi).map(|(l, h)| l + (h - l) * rng.random::<f64>()).collect()
            }
            ConvexSet::Ball { center, radius } => {
                let d = center.len();
                let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let n = norm(&g).max(1e-300);
                let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
                center.iter().zip(&g).map(|(c, v)| c + r * v / n).collect()
            }
            ConvexSet::Simplex { d } => dirichlet_one(*d, rng),
            ConvexSet::NonnegL1Ball { d, budget } => {
                let mut w = dirichlet_one(d + 1, rng);
                w.pop();
                w.iter().map(|v| v * budget).collect()
            }
            ConvexSet::Triangle2d { a, b, c } => {
                let w = dirichlet_one(3, rng);
                (0..2).map(|i| w[0] * a[i] + w[1] * b[i] + w[2] * c[i]).collect()
            }
        }
    }
}

fn unit(d: usize, i: usize, s: f64) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[i] = s;
    v
}

fn last_argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x >= v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn dirichlet_one<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Projection onto `{y >= 0 : sum y = s}` by sorting and thresholding.
pub fn project_scaled_simplex(x: &[f64], s: f64) -> Vec<f64> {
    let mut u = x.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - s) / (j as f64 + 1.0);
        if uj - t > 0.0 {
            theta = t;
        }
    }
    x.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Outward unit normals and offsets `(n, c)` with the triangle equal to
/// `{y : n . y <= c}` for all three edges.
pub(crate) fn triangle_halfplanes(a: &[f64; 2], b: &[f64; 2], c: &[f64; 2]) -> [([f64; 2], f64); 3] {
    let edge = |p: &[f64; 2], q: &[f64; 2], r: &[f64; 2]| {
        let mut n = [q[1] - p[1], p[0] - q[0]];
        let len = (n[0] * n[0] + n[1] * n[1]).sqrt();
        n = [n[0] / len, n[1] / len];
        if n[0] * (r[0] - p[0]) + n[1] * (r[1] - p[1]) > 0.0 {
            n = [-n[0], -n[1]];
        }
        (n, n[0] * p[0] + n[1] * p[1])
    };
    [edge(a, b, c), edge(b, c, a), edge(c, a, b)]
}

fn closest_on_segment(p: &[f64; 2], q: &[f64; 2], x: &[f64]) -> Vec<f64> {
    let pq = [q[0] - p[0], q[1] - p[1]];
    let len2 = pq[0] * pq[0] + pq[1] * pq[1];
    let t = (((x[0] - p[0]) * pq[0] + (x[1] - p[1]) * pq[1]) / len2).clamp(0.0, 1.0);
    vec![p[0] + t * pq[0], p[1] + t * pq[1]]
}

fn project_triangle(a: &[f64; 2], b: &[f64; 2], c: &[f64; 2], x: &[f64]) -> Vec<f64> {
    if triangle_halfplanes(a, b, c).iter().all(|(n, off)| dot(n, x) <= *off) {
        return x.to_vec();
    }
    [(a, b), (b, c), (c, a)]
        .iter()
        .map(|(p, q)| closest_on_segment(p, q, x))
        .min_by(|u, v| dist(u, x).total_cmp(&dist(v, x)))
        .expect("three edges")
}

/// Largest `lambda` in `[0, 1]` with `x - lambda * v` in the set.
///
/// Closed form for triangles; bisection to 1e-10 for every other kind.
pub fn beam_step(set: &ConvexSet, x: &[f64], v: &[f64]) -> Result<f64> {
    check_dim(set.dim(), x.len())?;
    check_dim(set.dim(), v.len())?;
    if let ConvexSet::Triangle2d { a, b, c } = set {
        let mut lam: f64 = 1.0;
        for (n, off) in triangle_halfplanes(a, b, c) {
            let rate = -(n[0] * v[0] + n[1] * v[1]);
            if rate > 0.0 {
                lam = lam.min(((off - dot(&n, x)) / rate).max(0.0));
            }
        }
        return Ok(lam.clamp(0.0, 1.0));
    }
    let at = |l: f64| -> Vec<f64> { x.iter().zip(v).map(|(xi, vi)| xi - l * vi).collect() };
    if set.contains(&at(1.0), 1e-12) {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if set.contains(&at(mid), 1e-12) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn projection_examples() {
        let b = ConvexSet::unit_box(2).unwrap();
        assert_eq!(b.project(&[1.5, 0.5]).unwrap(), vec![1.0, 0.5]);
        let s = ConvexSet::simplex(2).unwrap();
        let p = s.project(&[0.8, 0.8]).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-15);
        let l = ConvexSet::nonneg_l1_ball(2, 1.0).unwrap();
        let p = l.project(&[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn l1_ball_kkt_by_hand() {
        // (2, -1, 0.5): clip to (2, 0, 0.5), sum 2.5 > 1, threshold 1 gives (1, 0, 0).
        let l = ConvexSet::nonneg_l1_ball(3, 1.0).unwrap();
        let p = l.project(&[2.0, -1.0, 0.5]).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
        // Inside points are fixed.
        assert_eq!(l.project(&[0.2, 0.3, 0.1]).unwrap(), vec![0.2, 0.3, 0.1]);
    }

    #[test]
    fn support_examples() {
        let s = ConvexSet::simplex(2).unwrap();
        assert_eq!(s.support_maximizer(&[1.0, -2.0]).unwrap(), (vec![1.0, 0.0], 1.0));
        let b = ConvexSet::unit_box(2).unwrap();
        assert_eq!(b.support_maximizer(&[1.0, -2.0]).unwrap(), (vec![1.0, 0.0], 1.0));
        let ball = ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let (p, v) = ball.support_maximizer(&[1.0, -2.0]).unwrap();
        let r5 = 5f64.sqrt();
        assert_abs_diff_eq!(p[0], 1.0 / r5, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], -2.0 / r5, epsilon = 1e-15);
        assert_abs_diff_eq!(v, r5, epsilon = 1e-15);
    }

    #[test]
    fn support_ties_are_lexicographically_smallest() {
        let s = ConvexSet::simplex(3).unwrap();
        assert_eq!(s.support_maximizer(&[1.0, 1.0, 0.0]).unwrap().0, vec![0.0, 1.0, 0.0]);
        let b = ConvexSet::unit_box(2).unwrap();
        assert_eq!(b.support_maximizer(&[0.0, 1.0]).unwrap().0, vec![0.0, 1.0]);
        let l = ConvexSet::nonneg_l1_ball(2, 1.0).unwrap();
        assert_eq!(l.support_maximizer(&[0.0, -1.0]).unwrap().0, vec![0.0, 0.0]);
    }

    #[test]
    fn diameters() {
        assert_abs_diff_eq!(ConvexSet::unit_box(4).unwrap().diameter(), 2.0);
        assert_eq!(ConvexSet::ball(vec![0.0; 3], 0.7).unwrap().diameter(), 1.4);
        assert_eq!(ConvexSet::simplex(5).unwrap().diameter(), 2f64.sqrt());
        let t = ConvexSet::triangle([0.0, 0.0], [1.0, 1.0], [0.2, 0.0]).unwrap();
        assert_eq!(t.diameter(), 2f64.sqrt());
    }

    #[test]
    fn invalid_sets_are_rejected() {
        assert!(ConvexSet::interval(1.0, 0.0).is_err());
        assert!(ConvexSet::ball(vec![0.0], 0.0).is_err());
        assert!(ConvexSet::nonneg_l1_ball(2, 0.0).is_err());
        assert!(ConvexSet::triangle([0.0, 0.0], [1.0, 1.0], [2.0, 2.0]).is_err());
        assert!(matches!(
            ConvexSet::unit_box(2).unwrap().project(&[1.0]),
            Err(Error::Dimension { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn triangle_projection_and_beam() {
        let t = ConvexSet::triangle([0.0, 0.0], [1.0, 1.0], [0.2, 0.0]).unwrap();
        assert_eq!(t.project(&[0.5, 0.5]).unwrap(), vec![0.5, 0.5]);
        let p = t.project(&[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-15);
        let lam = beam_step(&t, &[0.5, 0.5], &[-0.2, 0.0]).unwrap();
        assert_abs_diff_eq!(lam, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn beam_bisection_on_box() {
        let b = ConvexSet::unit_box(2).unwrap();
        let lam = beam_step(&b, &[0.9, 0.5], &[-0.4, 0.0]).unwrap();
        assert!((lam - 0.25).abs() <= 1e-10);
        assert_eq!(beam_step(&b, &[0.5, 0.5], &[0.1, 0.1]).unwrap(), 1.0);
    }

    #[test]
    fn samples_are_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sets = [
            ConvexSet::interval(-1.0, 2.0).unwrap(),
            ConvexSet::unit_box(3).unwrap(),
            ConvexSet::ball(vec![1.0, -1.0], 0.5).unwrap(),
            ConvexSet::simplex(4).unwrap(),
            ConvexSet::nonneg_l1_ball(3, 2.0).unwrap(),
            ConvexSet::triangle([0.0, 0.0], [1.0, 1.0], [0.2, 0.0]).unwrap(),
        ];
        for s in &sets {
            for _ in 0..200 {
                assert!(s.contains(&s.sample(&mut rng), 1e-12));
            }
        }
    }

    #[test]
    fn serde_round_trip() {
        let s = ConvexSet::nonneg_l1_ball(3, 1.0).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"kind":"nonneg_l1_ball","d":3,"budget":1.0}"#);
        let back: ConvexSet = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }
}
