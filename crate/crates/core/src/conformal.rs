//! Online conformal prediction with a 1-D score threshold.
//!
//! The threshold runs unconstrained gradient descent on the coverage
//! indicator gradient `alpha - 1{score > theta}`. Telescoping the updates
//! gives the coverage identity checked by [`ConformalState::identity_gap`].

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalState {
    pub theta: f64,
    pub theta1: f64,
    pub eta: f64,
    pub alpha: f64,
    pub rounds: usize,
    pub misses: usize,
}

impl ConformalState {
    pub fn new(theta1: f64, eta: f64, alpha: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::input(format!("eta must be positive, got {eta}")));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::input(format!("alpha must lie in [0,1), got {alpha}")));
        }
        if !theta1.is_finite() {
            return Err(Error::input("initial threshold must be finite"));
        }
        Ok(Self { theta: theta1, theta1, eta, alpha, rounds: 0, misses: 0 })
    }

    /// One round. Returns whether the score was covered by the current threshold.
    pub fn update(&mut self, score: f64) -> bool {
        let covered = score <= self.theta;
        let g = if covered { self.alpha } else { self.alpha - 1.0 };
        self.theta -= self.eta * g;
        self.rounds += 1;
        if !covered {
            self.misses += 1;
        }
        covered
    }

    pub fn miscoverage(&self) -> Result<f64> {
        if self.rounds == 0 {
            return Err(Error::input("coverage gap needs at least one round"));
        }
        Ok(self.misses as f64 / self.rounds as f64)
    }

    /// `|miscoverage - alpha|`.
    pub fn coverage_gap(&self) -> Result<f64> {
        Ok((self.miscoverage()? - self.alpha).abs())
    }

    /// `|theta^{T+1} - theta^1| / (eta T)`, equal to the coverage gap up to rounding.
    pub fn identity_gap(&self) -> Result<f64> {
        if self.rounds == 0 {
            return Err(Error::input("coverage gap needs at least one round"));
        }
        Ok((self.theta - self.theta1).abs() / (self.eta * self.rounds as f64))
    }
}

/// Synthetic score streams, all supported on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stream", rename_all = "snake_case")]
pub enum ScoreStream {
    /// iid Uniform[0,1].
    Uniform,
    /// iid Beta(a, b).
    Beta { a: f64, b: f64 },
    /// Uniform on `[0, 1/2]` for the first half, on `[1/2, 1]` after.
    Shift,
    /// `(1 + sin(2 pi t / period)) / 2` plus Uniform[-0.1, 0.1] noise, clamped.
    Periodic { period: f64 },
    /// Every score is 0, so every round is covered once theta is nonnegative.
    Constant { value: f64 },
}

impl ScoreStream {
    /// The four-way rotation used by the acceptance scenario: stream `i` of a batch.
    pub fn rotation(i: usize) -> Self {
        match i % 4 {
            0 => ScoreStream::Uniform,
            1 => ScoreStream::Beta { a: 2.0, b: 5.0 },
            2 => ScoreStream::Shift,
            _ => ScoreStream::Periodic { period: 500.0 },
        }
    }

    pub fn generate(&self, t: usize, seed: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = match *self {
            ScoreStream::Uniform => (0..t).map(|_| rng.random::<f64>()).collect(),
            ScoreStream::Beta { a, b } => {
                let dist = Beta::new(a, b).map_err(|e| Error::input(format!("beta stream: {e}")))?;
                (0..t).map(|_| dist.sample(&mut rng)).collect()
            }
            ScoreStream::Shift => (0..t)
                .map(|s| {
                    let u: f64 = rng.random();
                    if 2 * s < t { 0.5 * u } else { 0.5 + 0.5 * u }
                })
                .collect(),
            ScoreStream::Periodic { period } => {
                if !(period > 0.0) {
                    return Err(Error::input("period must be positive"));
                }
                (0..t)
                    .map(|s| {
                        let base = 0.5 * (1.0 + (std::f64::consts::TAU * s as f64 / period).sin());
                        (base + rng.random_range(-0.1..0.1)).clamp(0.0, 1.0)
                    })
                    .collect()
            }
            ScoreStream::Constant { value } => vec![value; t],
        };
        Ok(out)
    }
}

/// Runs the threshold learner on a whole stream and returns the final state.
pub fn run_stream(scores: &[f64], theta1: f64, eta: f64, alpha: f64) -> Result<ConformalState> {
    let mut st = ConformalState::new(theta1, eta, alpha)?;
    for (i, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::input(format!("score {i} is not finite")));
        }
        st.update(s);
    }
    Ok(st)
}

/// Reads one score per line. Blank lines are skipped.
pub fn read_scores(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let Some(field) = rec.get(0) else { continue };
        let field = field.trim();
        if field.is_empty() {
            continue;
        }
        let v: f64 = field
            .parse()
            .map_err(|_| Error::input(format!("line {}: `{field}` is not a number", i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn always_covered_drifts_down() {
        let st = run_stream(&[-1.0; 10], 0.0, 0.1, 0.1).unwrap();
        assert!((st.theta - (-0.1)).abs() < 1e-12);
        assert!((st.coverage_gap().unwrap() - 0.1).abs() < 1e-12);
        assert!((st.identity_gap().unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn alpha_zero_never_decreases() {
        let scores = ScoreStream::Uniform.generate(200, 3).unwrap();
        let mut st = ConformalState::new(0.2, 0.05, 0.0).unwrap();
        for s in scores {
            let before = st.theta;
            st.update(s);
            assert!(st.theta >= before);
        }
    }

    #[test]
    fn alternating_returns_every_two_rounds() {
        let mut st = ConformalState::new(0.0, 0.2, 0.5).unwrap();
        for _ in 0..5 {
            st.update(10.0);
            st.update(-10.0);
            assert_eq!(st.theta, 0.0);
        }
        assert_eq!(st.coverage_gap().unwrap(), 0.0);
    }

    #[test]
    fn miss_pattern_gap() {
        // misses at rounds 1 and 4 with alpha = 0.5
        let mut st = ConformalState::new(0.0, 0.1, 0.5).unwrap();
        for s in [1.0, -1.0, -1.0, 1.0] {
            st.update(s);
        }
        assert_eq!(st.misses, 2);
        assert_eq!(st.coverage_gap().unwrap(), 0.0);
    }

    #[test]
    fn zero_rounds_is_an_error() {
        let st = ConformalState::new(0.0, 0.1, 0.1).unwrap();
        assert!(st.coverage_gap().is_err());
        assert!(ConformalState::new(0.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn bounded_scores_keep_theta_in_band() {
        for i in 0..4 {
            let scores = ScoreStream::rotation(i).generate(5000, i as u64).unwrap();
            let mut st = ConformalState::new(0.5, 0.05, 0.1).unwrap();
            for s in scores {
                assert!((0.0..=1.0).contains(&s));
                st.update(s);
                assert!(st.theta >= -0.05 - 1e-12 && st.theta <= 1.05 + 1e-12);
            }
        }
    }
}
