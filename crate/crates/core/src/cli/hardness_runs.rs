//! Hardness-instance protocols.

use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;

use super::{per_seed, rng, Check, RunRecord, ScenarioConfig, ScenarioOutcome};
use crate::error::{Error, Result};
use crate::geometry::dirichlet_one;
use crate::hardness::{
    clique_number, int_plus_threshold, shrink_threshold, simplex_quadratic_max, small_norm_threshold, FkInstance,
    Graph,
};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MsParams {
    /// All labeled graphs on `1..=max_labeled_d` vertices.
    #[serde(default = "five")]
    max_labeled_d: usize,
    #[serde(default = "fifty")]
    random_graphs: usize,
    #[serde(default = "six")]
    random_d: usize,
    #[serde(default = "half")]
    edge_p: f64,
    #[serde(default = "starts")]
    starts: usize,
    #[serde(default = "ms_tol")]
    tol: f64,
}

fn five() -> usize {
    5
}

fn fifty() -> usize {
    50
}

fn six() -> usize {
    6
}

fn half() -> f64 {
    0.5
}

fn starts() -> usize {
    200
}

fn ms_tol() -> f64 {
    1e-6
}

/// One row per graph: `t` is the graph index.
pub(super) fn motzkin_straus(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let p: MsParams = cfg.params()?;
    if p.max_labeled_d > 6 {
        return Err(Error::config("params.max_labeled_d", "at most 6"));
    }
    let seeds = per_seed(&cfg.seeds, |seed| {
        let mut graphs = Vec::new();
        for d in 1..=p.max_labeled_d {
            graphs.extend(Graph::all_labeled(d)?);
        }
        for i in 0..p.random_graphs {
            graphs.push(Graph::erdos_renyi(p.random_d, p.edge_p, seed.wrapping_mul(1_000_003).wrapping_add(i as u64))?);
        }
        let rows = graphs
            .par_iter()
            .enumerate()
            .map(|(i, g)| {
                let omega = clique_number(g)?;
                let target = 1.0 - 1.0 / omega as f64;
                let (value, _) = simplex_quadratic_max(g, p.starts, &mut rng(seed, 1000 + i as u64));
                let mut rec = RunRecord::new(&cfg.id, seed, i);
                rec.push("d", g.d() as f64)
                    .push("omega", omega as f64)
                    .push("qp_max", value)
                    .push("target", target)
                    .push("error", (value - target).abs());
                Ok(rec)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(rows)
    })?;
    let rows: Vec<RunRecord> = seeds.into_iter().flatten().collect();
    let worst = rows.iter().filter_map(|r| r.get("error")).fold(0.0, f64::max);
    let checks = vec![Check::new(
        "motzkin_straus",
        worst <= p.tol,
        format!("{} graphs, max |qp max - (1 - 1/ω)| = {worst:.3e}", rows.len()),
    )];
    Ok(ScenarioOutcome { records: rows, checks })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbeParams {
    #[serde(default = "twenty")]
    graphs: usize,
    #[serde(default = "four")]
    min_d: usize,
    #[serde(default = "eight")]
    max_d: usize,
    #[serde(default = "half")]
    edge_p: f64,
    #[serde(default = "half")]
    delta: f64,
    #[serde(default = "points")]
    points: usize,
}

fn twenty() -> usize {
    20
}

fn four() -> usize {
    4
}

fn eight() -> usize {
    8
}

fn points() -> usize {
    200
}

/// The four probe cases, by code in the `case` column.
#[derive(Debug, Clone, Copy)]
enum Case {
    /// `k > ω`, `||x||_1 >= δ/2`, gain `> δ²/(4d(d+1))`.
    Shrink = 0,
    /// `k < ω`, `||x||_1 <= δ/2`, gain `>= δ²/(8d²)`.
    SmallNorm = 1,
    /// `k > ω`, `||x||_1 >= δ/(12d³)`, one Int⁺ map, gain `> δ²/(144d⁸)`.
    IntPlusShrink = 2,
    /// `k < ω`, `||x||_1 <= δ/(12d³)`, one Int⁺ map, gain `> δ²/(144d⁸)`.
    IntPlusSmall = 3,
}

fn run_case<R: Rng + ?Sized>(inst: &FkInstance, case: Case, delta: f64, points: usize, rng: &mut R) -> Result<(usize, f64, f64)> {
    let d = inst.d();
    let cut = delta / (12.0 * (d as f64).powi(3));
    let (lo, hi, threshold) = match case {
        Case::Shrink => (delta / 2.0, 1.0, shrink_threshold(d, delta)),
        Case::SmallNorm => (0.0, delta / 2.0, small_norm_threshold(d, delta)),
        Case::IntPlusShrink => (cut, 1.0, int_plus_threshold(d, delta)),
        Case::IntPlusSmall => (0.0, cut, int_plus_threshold(d, delta)),
    };
    let mut passed = 0;
    let mut min_gain = f64::INFINITY;
    for _ in 0..points {
        let s = lo + (hi - lo) * rng.random::<f64>();
        let x: Vec<f64> = dirichlet_one(d, rng).iter().map(|w| w * s).collect();
        let probe = match case {
            Case::Shrink | Case::SmallNorm => inst.probe_local_maximizer(&x, delta)?,
            Case::IntPlusShrink | Case::IntPlusSmall => inst.probe_int_plus(&x, delta)?,
        };
        let gain = probe.map_or(f64::NEG_INFINITY, |p| p.gain);
        min_gain = min_gain.min(gain);
        let ok = match case {
            Case::SmallNorm => gain >= threshold,
            _ => gain > threshold,
        };
        if ok {
            passed += 1;
        }
    }
    Ok((passed, min_gain, threshold))
}

/// One row per (graph, case): `t` is the graph index.
pub(super) fn probes(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let p: ProbeParams = cfg.params()?;
    if p.min_d < 2 || p.min_d > p.max_d || p.max_d > 20 {
        return Err(Error::config("params.min_d", "needs 2 <= min_d <= max_d <= 20"));
    }
    if !(p.delta > 0.0 && p.delta <= 1.0) {
        return Err(Error::config("params.delta", "must lie in (0, 1]"));
    }
    let seeds = per_seed(&cfg.seeds, |seed| {
        (0..p.graphs)
            .into_par_iter()
            .map(|gi| {
                let mut r = rng(seed, 2000 + gi as u64);
                let d = r.random_range(p.min_d..=p.max_d);
                let graph = Graph::erdos_renyi(d, p.edge_p, r.random())?;
                let omega = clique_number(&graph)?;
                let mut cases = Vec::new();
                if omega < d {
                    cases.push((omega + 1, Case::Shrink));
                    cases.push((omega + 1, Case::IntPlusShrink));
                }
                if omega > 1 {
                    cases.push((omega - 1, Case::SmallNorm));
                    cases.push((omega - 1, Case::IntPlusSmall));
                }
                let mut rows = Vec::new();
                for (k, case) in cases {
                    let inst = FkInstance::new(graph.clone(), k)?;
                    let (passed, min_gain, threshold) = run_case(&inst, case, p.delta, p.points, &mut r)?;
                    let mut rec = RunRecord::new(&cfg.id, seed, gi);
                    rec.push("d", d as f64)
                        .push("omega", omega as f64)
                        .push("k", k as f64)
                        .push("case", case as u8 as f64)
                        .push("points", p.points as f64)
                        .push("passed", passed as f64)
                        .push("min_gain", min_gain)
                        .push("threshold", threshold);
                    rows.push(rec);
                }
                Ok(rows)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rows: Vec<RunRecord> = seeds.into_iter().flatten().flatten().collect();
    let mut checks = Vec::new();
    let names = ["probe_shrink", "probe_small_norm", "probe_int_plus_shrink", "probe_int_plus_small"];
    for (code, name) in names.iter().enumerate() {
        let mine: Vec<&RunRecord> = rows.iter().filter(|r| r.get("case") == Some(code as f64)).collect();
        let total: f64 = mine.iter().filter_map(|r| r.get("points")).sum();
        let passed: f64 = mine.iter().filter_map(|r| r.get("passed")).sum();
        checks.push(Check::new(
            name,
            !mine.is_empty() && passed == total,
            format!("{passed}/{total} in-case points improve past the threshold over {} graph cases", mine.len()),
        ));
    }
    Ok(ScenarioOutcome { records: rows, checks })
}
