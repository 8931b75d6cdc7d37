use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use phireg::audit::bounds::hedge_bound;
use phireg::audit::{deviation_regret, external_regret, finite_phi_regret, finite_phi_totals, Loss, Trajectory};
use phireg::conformal::run_stream;
use phireg::deviations::{prox, Deviation, ProxFunction};
use phireg::geometry::ConvexSet;
use phireg::learners::{Hedge, HedgeEta};
use phireg::oracles::Builtin;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn project_unit_ball(x: &[f64]) -> Vec<f64> {
    let n = dot(x, x).sqrt();
    if n <= 1.0 {
        x.to_vec()
    } else {
        x.iter().map(|v| v / n).collect()
    }
}

fn vec_in(d: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-r..r, d)
}

fn in_ball(d: usize) -> impl Strategy<Value = Vec<f64>> {
    vec_in(d, 1.0).prop_map(|x| project_unit_ball(&x))
}

fn set_and_two_points() -> impl Strategy<Value = (ConvexSet, Vec<f64>, Vec<f64>)> {
    (1usize..=6, 0usize..3).prop_flat_map(|(d, kind)| {
        let set = match kind {
            0 => ConvexSet::ball(vec![0.0; d], 1.0).unwrap(),
            1 => ConvexSet::unit_box(d).unwrap(),
            _ => ConvexSet::simplex(d).unwrap(),
        };
        (Just(set), vec_in(d, 3.0), vec_in(d, 3.0))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn projection_is_firmly_nonexpansive((set, x, y) in set_and_two_points()) {
        let px = set.project(&x).unwrap();
        let py = set.project(&y).unwrap();
        prop_assert!(set.contains(&px, 1e-9));
        let diff: Vec<f64> = px.iter().zip(&py).map(|(a, b)| a - b).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        prop_assert!(dot(&diff, &diff) <= dot(&diff, &xy) + 1e-9);
    }

    #[test]
    fn projection_is_idempotent((set, x, _y) in set_and_two_points()) {
        let px = set.project(&x).unwrap();
        let ppx = set.project(&px).unwrap();
        for (a, b) in px.iter().zip(&ppx) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    /// Convex f on the unit ball: `2f(p) - 2f(p_x) - ||p - p_x||^2 >= ||x - p_x||^2 - ||x - p||^2`,
    /// with `p_x` computed by hand.
    #[test]
    fn key_inequality_for_closed_form_prox(
        d in 1usize..=8,
        seed in any::<u64>(),
        linear in any::<bool>(),
        lambda in 0.0f64..0.95,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |r: f64| -> Vec<f64> { (0..d).map(|_| rng.random_range(-r..r)).collect() };
        let x = project_unit_ball(&draw(1.0));
        let p = project_unit_ball(&draw(1.0));
        let set = ConvexSet::ball(vec![0.0; d], 1.0).unwrap();
        let (f, px, fval): (ProxFunction, Vec<f64>, Box<dyn Fn(&[f64]) -> f64>) = if linear {
            let v = draw(2.0);
            let shifted: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - b).collect();
            let v2 = v.clone();
            (ProxFunction::Linear { v }, project_unit_ball(&shifted), Box::new(move |y: &[f64]| dot(&v2, y)))
        } else {
            let anchor = project_unit_ball(&draw(1.0));
            let px: Vec<f64> = x.iter().zip(&anchor).map(|(a, b)| (1.0 - lambda) * a + lambda * b).collect();
            let a2 = anchor.clone();
            let c = lambda / (1.0 - lambda);
            (ProxFunction::QuadToAnchor { lambda, anchor }, px, Box::new(move |y: &[f64]| c * dist_sq(y, &a2) / 2.0))
        };
        let got = prox(&f, &x, &set).unwrap();
        prop_assert!(dist_sq(&got, &px).sqrt() <= 1e-9);
        let lhs = dist_sq(&x, &px) - dist_sq(&x, &p);
        let rhs = 2.0 * fval(&p) - 2.0 * fval(&px) - dist_sq(&p, &px);
        prop_assert!(rhs - lhs >= -1e-8, "slack {}", rhs - lhs);
    }

    #[test]
    fn hedge_regret_within_bound(n in 2usize..=16, t in 1usize..=400, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut h = Hedge::new(n, HedgeEta::Horizon { t }).unwrap();
        for _ in 0..t {
            let r: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            h.update(&r).unwrap();
        }
        prop_assert!(h.external_regret() <= hedge_bound(t, n) + 1e-9);
        let w = h.weights();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    /// For linear losses on the unit ball the best fixed point is `-S/||S||`
    /// with `S` the summed loss vector.
    #[test]
    fn external_regret_matches_closed_form(
        d in 1usize..=5,
        rounds in prop::collection::vec((in_ball(5), vec_in(5, 1.0)), 1..40),
    ) {
        let set = ConvexSet::ball(vec![0.0; d], 1.0).unwrap();
        let mut traj = Trajectory::new(set.clone());
        let mut sum = vec![0.0; d];
        let mut played = 0.0;
        for (x, v) in &rounds {
            let x = project_unit_ball(&x[..d]);
            let v = v[..d].to_vec();
            played += dot(&v, &x);
            for (s, vi) in sum.iter_mut().zip(&v) {
                *s += vi;
            }
            traj.record(x, Loss::Builtin(Builtin::Linear { v })).unwrap();
        }
        let want = played + dot(&sum, &sum).sqrt();
        let got = external_regret(&traj).unwrap();
        assert_abs_diff_eq!(got.total, want, epsilon = 1e-9);
        // Any constant map does no better than the exact maximizer.
        let star = project_unit_ball(&sum.iter().map(|s| -s * 10.0).collect::<Vec<_>>());
        let c = deviation_regret(&traj, &Deviation::Constant { point: star }).unwrap();
        prop_assert!(c.total <= got.total + 1e-9);
    }

    #[test]
    fn finite_phi_regret_is_the_maximum(
        rounds in prop::collection::vec((in_ball(3), vec_in(3, 1.0)), 1..30),
        targets in prop::collection::vec((in_ball(3), 0.0f64..1.0), 1..6),
    ) {
        let set = ConvexSet::ball(vec![0.0; 3], 1.0).unwrap();
        let mut traj = Trajectory::new(set);
        for (x, v) in rounds {
            traj.record(x, Loss::Builtin(Builtin::Linear { v })).unwrap();
        }
        let maps: Vec<Deviation> = targets
            .into_iter()
            .map(|(target, lambda)| Deviation::Interpolate { lambda, target })
            .collect();
        let totals = finite_phi_totals(&traj, &maps).unwrap();
        let rep = finite_phi_regret(&traj, &maps).unwrap();
        let max = totals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(rep.total, max);
    }

    #[test]
    fn conformal_identity_holds(
        scores in prop::collection::vec(0.0f64..1.0, 1..500),
        eta in 0.001f64..0.5,
        alpha in 0.0f64..0.5,
        theta1 in -1.0f64..1.0,
    ) {
        let st = run_stream(&scores, theta1, eta, alpha).unwrap();
        let lhs = st.coverage_gap().unwrap();
        let rhs = (st.theta - theta1).abs() / (eta * scores.len() as f64);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs));
    }
}
