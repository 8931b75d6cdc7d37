//! Hard instances built from the Motzkin–Straus program.
//!
//! `f_k(x) = x'Ax - (1 - 1/k) ||x||_1^2` over `{x >= 0, ||x||_1 <= 1}`.
//! The clique oracle is exact brute force, so the local-maximizer probes can
//! be checked against the true clique number.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{dirichlet_one, project_scaled_simplex, ConvexSet, MEMBER_TOL};
use crate::vecops::{dist, norm1};

/// Largest vertex count accepted by the brute-force clique oracle.
pub const CLIQUE_BUDGET: usize = 20;

/// Simple undirected graph stored as adjacency bitmasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct Graph {
    d: usize,
    adj: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    d: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<GraphRepr> for Graph {
    type Error = Error;
    fn try_from(r: GraphRepr) -> Result<Self> {
        Graph::from_edges(r.d, &r.edges)
    }
}

impl From<Graph> for GraphRepr {
    fn from(g: Graph) -> Self {
        GraphRepr { d: g.d, edges: g.edges() }
    }
}

impl Graph {
    pub fn empty(d: usize) -> Result<Self> {
        if d == 0 || d > 64 {
            return Err(Error::input(format!("graph size must be in 1..=64, got {d}")));
        }
        Ok(Self { d, adj: vec![0; d] })
    }

    pub fn from_edges(d: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(d)?;
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i >= self.d || j >= self.d {
            return Err(Error::input(format!("edge ({i}, {j}) out of range for d = {}", self.d)));
        }
        if i == j {
            return Err(Error::input(format!("self-loop at vertex {i}")));
        }
        self.adj[i] |= 1 << j;
        self.adj[j] |= 1 << i;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..self.d {
            if self.adj[i] >> i & 1 == 1 {
                return Err(Error::input("adjacency has a nonzero diagonal"));
            }
            for j in 0..self.d {
                if (self.adj[i] >> j & 1) != (self.adj[j] >> i & 1) {
                    return Err(Error::input("adjacency is not symmetric"));
                }
            }
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i] >> j & 1 == 1
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        for i in 0..self.d {
            for j in i + 1..self.d {
                if self.has_edge(i, j) {
                    e.push((i, j));
                }
            }
        }
        e
    }

    pub fn adjacency_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.d)
            .map(|i| (0..self.d).map(|j| if self.has_edge(i, j) { 1.0 } else { 0.0 }).collect())
            .collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(|m| m.count_ones() as usize).max().unwrap_or(0)
    }

    pub fn complete(d: usize) -> Result<Self> {
        let mut g = Self::empty(d)?;
        for i in 0..d {
            for j in i + 1..d {
                g.add_edge(i, j)?;
            }
        }
        Ok(g)
    }

    pub fn path(d: usize) -> Result<Self> {
        let edges: Vec<_> = (1..d).map(|i| (i - 1, i)).collect();
        Self::from_edges(d, &edges)
    }

    pub fn cycle(d: usize) -> Result<Self> {
        if d < 3 {
            return Err(Error::input("a cycle needs at least 3 vertices"));
        }
        let edges: Vec<_> = (0..d).map(|i| (i, (i + 1) % d)).collect();
        Self::from_edges(d, &edges)
    }

    pub fn petersen() -> Self {
        let mut edges = Vec::new();
        for i in 0..5 {
            edges.push((i, (i + 1) % 5));
            edges.push((i, i + 5));
            edges.push((5 + i, 5 + (i + 2) % 5));
        }
        Self::from_edges(10, &edges).expect("valid edges")
    }

    /// G(d, p) with a seeded ChaCha stream.
    pub fn erdos_renyi(d: usize, p: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = Self::empty(d)?;
        for i in 0..d {
            for j in i + 1..d {
                if rng.random::<f64>() < p {
                    g.add_edge(i, j)?;
                }
            }
        }
        Ok(g)
    }

    /// Every labeled graph on `d` vertices, in edge-mask order.
    pub fn all_labeled(d: usize) -> Result<Vec<Self>> {
        let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
        if pairs.len() > 20 {
            return Err(Error::Budget(format!("{} labeled graphs is too many", 1u64 << pairs.len())));
        }
        (0..1u32 << pairs.len())
            .map(|mask| {
                let edges: Vec<_> =
                    pairs.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, e)| *e).collect();
                Self::from_edges(d, &edges)
            })
            .collect()
    }

    /// Parses the text format: first line `d`, then one `i j` edge per line,
    /// 0-indexed. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let first = lines.next().ok_or_else(|| Error::input("empty graph file"))?;
        let d: usize = first.parse().map_err(|_| Error::input(format!("bad vertex count `{first}`")))?;
        let mut g = Self::empty(d)?;
        for (n, line) in lines.enumerate() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 2 {
                return Err(Error::input(format!("edge line {} must hold two indices", n + 2)));
            }
            let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::input(format!("bad vertex `{s}`")));
            g.add_edge(parse(parts[0])?, parse(parts[1])?)?;
        }
        Ok(g)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.d);
        for (i, j) in self.edges() {
            s.push_str(&format!("{i} {j}\n"));
        }
        s
    }

    /// `x'Ax`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.d {
            let mut row = 0.0;
            let mut m = self.adj[i];
            while m != 0 {
                let j = m.trailing_zeros() as usize;
                row += x[j];
                m &= m - 1;
            }
            total += x[i] * row;
        }
        total
    }

    /// `Ax`
    pub fn adj_times(&self, x: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|i| {
                let mut row = 0.0;
                let mut m = self.adj[i];
                while m != 0 {
                    row += x[m.trailing_zeros() as usize];
                    m &= m - 1;
                }
                row
            })
            .collect()
    }
}

/// Exact clique number and one maximum clique (sorted vertex list).
pub fn max_clique(graph: &Graph) -> Result<(usize, Vec<usize>)> {
    if graph.d > CLIQUE_BUDGET {
        return Err(Error::Budget(format!(
            "clique oracle is limited to {CLIQUE_BUDGET} vertices, got {}",
            graph.d
        )));
    }
    fn expand(adj: &[u64], r: u64, mut p: u64, best: &mut u64) {
        if p == 0 {
            if r.count_ones() > best.count_ones() {
                *best = r;
            }
            return;
        }
        while p != 0 {
            if r.count_ones() + p.count_ones() <= best.count_ones() {
                return;
            }
            let v = p.trailing_zeros() as usize;
            expand(adj, r | 1 << v, p & adj[v], best);
            p &= !(1u64 << v);
        }
    }
    let all = if graph.d == 64 { u64::MAX } else { (1u64 << graph.d) - 1 };
    let mut best = 0u64;
    expand(&graph.adj, 0, all, &mut best);
    let members: Vec<usize> = (0..graph.d).filter(|i| best >> i & 1 == 1).collect();
    Ok((members.len(), members))
}

pub fn clique_number(graph: &Graph) -> Result<usize> {
    Ok(max_clique(graph)?.0)
}

pub(crate) fn fk_value(graph: &Graph, k: usize, x: &[f64]) -> f64 {
    let s = norm1(x);
    graph.quadratic_form(x) - (1.0 - 1.0 / k as f64) * s * s
}

pub(crate) fn fk_gradient(graph: &Graph, k: usize, x: &[f64]) -> Vec<f64> {
    let s = norm1(x);
    let c = 2.0 * (1.0 - 1.0 / k as f64) * s;
    graph.adj_times(x).into_iter().map(|ax| 2.0 * ax - c).collect()
}

/// Which constructive deviation a probe used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// `(1 - delta/(2||x||_1)) x`
    Shrink,
    /// `(1 + delta/(2||x||_1)) x`
    Inflate,
    /// `(delta/2) x*`
    Jump,
    /// `(1 - delta/(12 d^3 ||x||_1)) x`
    IntPlusShrink,
    /// `(1 - delta/sqrt(d)) x + (delta/sqrt(d)) x*`
    IntPlusInterpolate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub kind: ProbeKind,
    pub point: Vec<f64>,
    pub gain: f64,
}

/// `f_k` on the nonnegative unit l1 ball together with the clique data.
#[derive(Debug, Clone)]
pub struct FkInstance {
    pub graph: Graph,
    pub k: usize,
    pub omega: usize,
    pub clique: Vec<usize>,
    pub domain: ConvexSet,
}

impl FkInstance {
    pub fn new(graph: Graph, k: usize) -> Result<Self> {
        graph.validate()?;
        if k == 0 || k > graph.d() {
            return Err(Error::input(format!("k must lie in [1, {}], got {k}", graph.d())));
        }
        let (omega, clique) = max_clique(&graph)?;
        let domain = ConvexSet::nonneg_l1_ball(graph.d(), 1.0)?;
        Ok(Self { graph, k, omega, clique, domain })
    }

    pub fn d(&self) -> usize {
        self.graph.d()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        fk_value(&self.graph, self.k, x)
    }

    pub fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.d(), x.len())?;
        if !self.domain.contains(x, MEMBER_TOL) {
            return Err(Error::input("point outside the nonnegative unit l1 ball"));
        }
        Ok((self.value(x), fk_gradient(&self.graph, self.k, x)))
    }

    /// Uniform distribution over a maximum clique; attains `1 - 1/omega`
    /// on the simplex.
    pub fn x_star(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.d()];
        let w = 1.0 / self.clique.len() as f64;
        for &i in &self.clique {
            x[i] = w;
        }
        x
    }

    /// Applies the constructive local-improvement deviations and
    /// returns the best strictly improving one, or `None` when `x` falls
    /// outside the covered cases or nothing improves.
    pub fn probe_local_maximizer(&self, x: &[f64], delta: f64) -> Result<Option<Probe>> {
        self.check_probe_input(x, delta)?;
        let s = norm1(x);
        let fx = self.value(x);
        let mut candidates = Vec::new();
        if self.k > self.omega && s >= delta / 2.0 {
            let c = 1.0 - delta / (2.0 * s);
            candidates.push((ProbeKind::Shrink, x.iter().map(|v| c * v).collect::<Vec<_>>()));
        }
        if self.k < self.omega && s <= delta / 2.0 {
            if s > 0.0 {
                let c = 1.0 + delta / (2.0 * s);
                candidates.push((ProbeKind::Inflate, x.iter().map(|v| c * v).collect()));
            }
            candidates.push((ProbeKind::Jump, self.x_star().iter().map(|v| 0.5 * delta * v).collect()));
        }
        Ok(self.best_improving(candidates, fx, x, delta))
    }

    /// Probes with deviations restricted to interpolations plus the single
    /// shrink map of the restricted family.
    pub fn probe_int_plus(&self, x: &[f64], delta: f64) -> Result<Option<Probe>> {
        self.check_probe_input(x, delta)?;
        let s = norm1(x);
        let d = self.d() as f64;
        let cut = delta / (12.0 * d.powi(3));
        let fx = self.value(x);
        let mut candidates = Vec::new();
        if self.k > self.omega && s >= cut {
            let c = 1.0 - cut / s;
            candidates.push((ProbeKind::IntPlusShrink, x.iter().map(|v| c * v).collect::<Vec<_>>()));
        }
        if self.k < self.omega && s <= cut {
            let lam = (delta / d.sqrt()).min(1.0);
            let xs = self.x_star();
            candidates.push((
                ProbeKind::IntPlusInterpolate,
                x.iter().zip(&xs).map(|(a, b)| (1.0 - lam) * a + lam * b).collect(),
            ));
        }
        Ok(self.best_improving(candidates, fx, x, delta))
    }

    fn check_probe_input(&self, x: &[f64], delta: f64) -> Result<()> {
        check_dim(self.d(), x.len())?;
        if !self.domain.contains(x, MEMBER_TOL) {
            return Err(Error::input("probe point outside the domain"));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::input(format!("delta must lie in (0, 1], got {delta}")));
        }
        Ok(())
    }

    fn best_improving(&self, candidates: Vec<(ProbeKind, Vec<f64>)>, fx: f64, x: &[f64], delta: f64) -> Option<Probe> {
        let mut best: Option<Probe> = None;
        for (kind, point) in candidates {
            debug_assert!(dist(&point, x) <= delta * (1.0 + 1e-9));
            debug_assert!(self.domain.contains(&point, 1e-9));
            let gain = self.value(&point) - fx;
            if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Probe { kind, point, gain });
            }
        }
        best
    }

    /// Spectral norm of the exact Hessian `2A - 2(1 - 1/k) 11'`.
    pub fn hessian_spectral_norm(&self) -> f64 {
        let d = self.d();
        let c = 2.0 * (1.0 - 1.0 / self.k as f64);
        let h = DMatrix::from_fn(d, d, |i, j| if self.graph.has_edge(i, j) { 2.0 } else { 0.0 } - c);
        SymmetricEigen::new(h).eigenvalues.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

/// Gain threshold of the shrink case: `delta^2 / (4 d (d+1))`.
pub fn shrink_threshold(d: usize, delta: f64) -> f64 {
    delta * delta / (4.0 * d as f64 * (d as f64 + 1.0))
}

/// Gain threshold of the small-norm case: `delta^2 / (8 d^2)`.
pub fn small_norm_threshold(d: usize, delta: f64) -> f64 {
    delta * delta / (8.0 * (d * d) as f64)
}

/// Gain threshold of the restricted family: `delta^2 / (144 d^8)`.
pub fn int_plus_threshold(d: usize, delta: f64) -> f64 {
    delta * delta / (144.0 * (d as f64).powi(8))
}

/// Maximum of `x'Ax` over the simplex by multistart projected gradient
/// ascent. Returns the best value and its point.
pub fn simplex_quadratic_max<R: Rng + ?Sized>(graph: &Graph, starts: usize, rng: &mut R) -> (f64, Vec<f64>) {
    let d = graph.d();
    let step = 1.0 / (2.0 * graph.max_degree().max(1) as f64);
    let mut best = (f64::NEG_INFINITY, vec![0.0; d]);
    for s in 0..starts.max(1) {
        let mut x = if s == 0 { vec![1.0 / d as f64; d] } else { dirichlet_one(d, rng) };
        for _ in 0..20_000 {
            let ax = graph.adj_times(&x);
            let y: Vec<f64> = x.iter().zip(&ax).map(|(xi, gi)| xi + step * 2.0 * gi).collect();
            let next = project_scaled_simplex(&y, 1.0);
            let moved = dist(&next, &x);
            x = next;
            if moved <= 1e-14 {
                break;
            }
        }
        let v = graph.quadratic_form(&x);
        if v > best.0 {
            best = (v, x);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn triangle_plus_isolated() -> Graph {
        Graph::from_edges(4, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn clique_examples() {
        assert_eq!(clique_number(&Graph::complete(3).unwrap()).unwrap(), 3);
        assert_eq!(clique_number(&Graph::path(3).unwrap()).unwrap(), 2);
        assert_eq!(clique_number(&Graph::petersen()).unwrap(), 2);
        assert_eq!(clique_number(&Graph::empty(4).unwrap()).unwrap(), 1);
        assert_eq!(clique_number(&Graph::cycle(5).unwrap()).unwrap(), 2);
        assert!(matches!(clique_number(&Graph::empty(21).unwrap()), Err(Error::Budget(_))));
    }

    #[test]
    fn fk_examples() {
        let k3 = FkInstance::new(Graph::complete(3).unwrap(), 3).unwrap();
        let (v, g) = k3.value_grad(&[0.0; 3]).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g, vec![0.0; 3]);
        assert_abs_diff_eq!(k3.value(&[1.0 / 3.0; 3]), 0.0, epsilon = 1e-15);
        let k2 = FkInstance::new(Graph::complete(3).unwrap(), 2).unwrap();
        assert_abs_diff_eq!(k2.value(&[0.5, 0.5, 0.0]), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k2.value(&[1.0 / 3.0; 3]), 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn shrink_probe_example() {
        let inst = FkInstance::new(triangle_plus_isolated(), 4).unwrap();
        assert_eq!(inst.omega, 3);
        let x = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0];
        assert_abs_diff_eq!(inst.value(&x), -1.0 / 12.0, epsilon = 1e-15);
        let p = inst.probe_local_maximizer(&x, 0.5).unwrap().unwrap();
        assert_eq!(p.kind, ProbeKind::Shrink);
        assert_abs_diff_eq!(p.gain, (1.0 - 0.5625) / 12.0, epsilon = 1e-15);
        assert!(p.gain > shrink_threshold(4, 0.5));
        assert_abs_diff_eq!(shrink_threshold(4, 0.5), 0.003125, epsilon = 1e-15);
    }

    #[test]
    fn jump_probe_at_origin() {
        let inst = FkInstance::new(triangle_plus_isolated(), 2).unwrap();
        let delta = 0.5;
        let p = inst.probe_local_maximizer(&[0.0; 4], delta).unwrap().unwrap();
        assert_eq!(p.kind, ProbeKind::Jump);
        assert_abs_diff_eq!(p.gain, delta * delta / 4.0 * (0.5 - 1.0 / 3.0), epsilon = 1e-15);
    }

    #[test]
    fn probe_is_silent_at_k_equal_omega() {
        let inst = FkInstance::new(triangle_plus_isolated(), 3).unwrap();
        let x = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0];
        assert!(inst.probe_local_maximizer(&x, 0.5).unwrap().is_none());
        assert!(inst.probe_int_plus(&x, 0.5).unwrap().is_none());
    }

    #[test]
    fn graph_text_round_trip() {
        let g = Graph::petersen();
        assert_eq!(Graph::parse(&g.to_text()).unwrap(), g);
        assert!(Graph::parse("3\n0 3\n").is_err());
        assert!(Graph::parse("3\n1 1\n").is_err());
        let j = serde_json::to_string(&Graph::path(3).unwrap()).unwrap();
        assert_eq!(j, r#"{"d":3,"edges":[[0,1],[1,2]]}"#);
    }

    #[test]
    fn labeled_graph_counts() {
        let total: usize = (1..=5).map(|d| Graph::all_labeled(d).unwrap().len()).sum();
        assert_eq!(total, 1 + 2 + 8 + 64 + 1024);
    }

    #[test]
    fn motzkin_straus_on_small_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in [Graph::complete(4).unwrap(), Graph::cycle(5).unwrap(), triangle_plus_isolated()] {
            let omega = clique_number(&g).unwrap() as f64;
            let (v, _) = simplex_quadratic_max(&g, 50, &mut rng);
            assert_abs_diff_eq!(v, 1.0 - 1.0 / omega, epsilon = 1e-9);
        }
    }

    #[test]
    fn hessian_bound() {
        let inst = FkInstance::new(Graph::complete(5).unwrap(), 2).unwrap();
        assert!(inst.hessian_spectral_norm() <= 2.0 * 5.0 + 2.0);
    }
}
