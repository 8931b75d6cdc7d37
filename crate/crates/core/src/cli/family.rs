//! Random instances shared by the protocols.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::deviations::ProxFunction;
use crate::error::{Error, Result};
use crate::geometry::ConvexSet;
use crate::vecops::{norm, scale};

pub(crate) fn unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = norm(&g);
        if n > 1e-12 {
            return scale(&g, 1.0 / n);
        }
    }
}

pub(crate) fn uniform_in<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// A symmetric matrix `Q diag(eigs) Q'` with a Haar-ish random rotation.
pub(crate) fn random_symmetric<R: Rng + ?Sized>(eigs: &[f64], rng: &mut R) -> Vec<Vec<f64>> {
    let d = eigs.len();
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let a = &q * DMatrix::from_diagonal(&DVector::from_column_slice(eigs)) * q.transpose();
    (0..d).map(|i| (0..d).map(|j| 0.5 * (a[(i, j)] + a[(j, i)])).collect()).collect()
}

pub(crate) fn solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let d = b.len();
    let m = DMatrix::from_fn(d, d, |i, j| a[i][j]);
    let x = m
        .lu()
        .solve(&DVector::from_column_slice(b))
        .ok_or_else(|| Error::Numerical { msg: "singular matrix".into(), residual: f64::NAN })?;
    Ok(x.iter().copied().collect())
}

/// A prox function together with a lower bound of `f` on the ambient set,
/// so that `f(p^1) - lower` bounds `B_f` before the run.
#[derive(Debug, Clone)]
pub(crate) struct FamilyMember {
    pub f: ProxFunction,
    pub lower: f64,
}

/// Convex prox functions on the centered unit ball (the interval `[-1, 1]`
/// when `d = 1`): `n_lin` linear, `n_quad` quadratic-to-anchor, `n_ind`
/// sub-ball indicators avoiding the origin and `n_aff` symmetric affine
/// maps with spectrum in `[0.3, 0.9]`.
pub(crate) fn ball_family<R: Rng + ?Sized>(
    set: &ConvexSet,
    counts: [usize; 4],
    rng: &mut R,
) -> Result<Vec<FamilyMember>> {
    let d = set.dim();
    let [n_lin, n_quad, n_ind, n_aff] = counts;
    let mut out = Vec::new();
    for _ in 0..n_lin {
        let v = scale(&unit_vector(d, rng), uniform_in(0.2, 1.5, rng));
        let lower = -norm(&v);
        out.push(FamilyMember { f: ProxFunction::Linear { v }, lower });
    }
    for _ in 0..n_quad {
        let anchor = scale(&unit_vector(d, rng), uniform_in(0.2, 0.9, rng));
        let lambda = uniform_in(0.1, 0.9, rng);
        out.push(FamilyMember { f: ProxFunction::QuadToAnchor { lambda, anchor }, lower: 0.0 });
    }
    for _ in 0..n_ind {
        let c_norm = uniform_in(0.3, 0.6, rng);
        let center = scale(&unit_vector(d, rng), c_norm);
        let radius = uniform_in(0.1, (c_norm - 0.05).min(1.0 - c_norm), rng);
        let subset = if d == 1 {
            ConvexSet::interval(center[0] - radius, center[0] + radius)?
        } else {
            ConvexSet::ball(center, radius)?
        };
        out.push(FamilyMember { f: ProxFunction::Indicator { subset }, lower: 0.0 });
    }
    for _ in 0..n_aff {
        let eigs: Vec<f64> = (0..d).map(|_| uniform_in(0.3, 0.9, rng)).collect();
        let top = eigs.iter().cloned().fold(0.0, f64::max);
        let a = random_symmetric(&eigs, rng);
        let b = scale(&unit_vector(d, rng), uniform_in(0.0, 1.0 - top, rng));
        let c = solve(&a, &b)?;
        out.push(FamilyMember { f: ProxFunction::SymmetricAffine { a, b }, lower: -norm(&c) });
    }
    for m in &out {
        m.f.validate(set)?;
    }
    Ok(out)
}
