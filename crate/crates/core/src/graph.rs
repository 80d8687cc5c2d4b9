//! Simple undirected graphs in CSR form, the degree order, and the random graph sampler.

use std::collections::VecDeque;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::weights::{pair_probability, Model, WeightSequence};

/// Symmetric simple graph with sorted neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl SparseGraph {
    pub fn empty(n: usize) -> Self {
        Self {
            offsets: vec![0; n + 1],
            targets: Vec::new(),
        }
    }

    /// Builds a graph from undirected edges. Duplicates are merged; self-loops are rejected.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (u, v) in edges {
            for &z in &[u, v] {
                if z >= n {
                    return Err(Error::InvalidVertex { vertex: z, n });
                }
            }
            if u == v {
                return Err(Error::InvalidParameter(format!("self-loop at {u}")));
            }
            pairs.push((u, v));
            pairs.push((v, u));
        }
        pairs.par_sort_unstable();
        pairs.dedup();
        Ok(Self::from_sorted_arcs(n, &pairs))
    }

    /// `arcs` must be sorted, deduplicated and symmetric.
    fn from_sorted_arcs(n: usize, arcs: &[(usize, usize)]) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for &(u, _) in arcs {
            offsets[u + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Self {
            offsets,
            targets: arcs.iter().map(|&(_, v)| v).collect(),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.targets[self.offsets[x]..self.offsets[x + 1]]
    }

    #[inline]
    pub fn degree(&self, x: usize) -> usize {
        self.offsets[x + 1] - self.offsets[x]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n()).map(|x| self.degree(x)).collect()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n()).map(|x| self.degree(x)).max().unwrap_or(0)
    }

    #[inline]
    pub fn has_edge(&self, x: usize, y: usize) -> bool {
        self.neighbors(x).binary_search(&y).is_ok()
    }

    pub fn check_vertex(&self, x: usize) -> Result<()> {
        if x >= self.n() {
            Err(Error::InvalidVertex { vertex: x, n: self.n() })
        } else {
            Ok(())
        }
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| v > u)
                .map(move |&v| (u, v))
        })
    }

    /// Keeps the edges `{u, v}` (called with `u < v`) for which `keep` is true.
    pub fn filter_edges<F>(&self, keep: F) -> Self
    where
        F: Fn(usize, usize) -> bool + Sync,
    {
        let n = self.n();
        let lists: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .map(|u| {
                self.neighbors(u)
                    .iter()
                    .copied()
                    .filter(|&v| if u < v { keep(u, v) } else { keep(v, u) })
                    .collect()
            })
            .collect();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut targets = Vec::new();
        for l in lists {
            targets.extend_from_slice(&l);
            offsets.push(targets.len());
        }
        Self { offsets, targets }
    }

    /// True when every edge of `self` is an edge of `other`.
    pub fn is_subgraph_of(&self, other: &SparseGraph) -> bool {
        self.n() == other.n() && self.edges().all(|(u, v)| other.has_edge(u, v))
    }

    /// Edges of `self` that are absent from `sub`.
    pub fn edge_difference(&self, sub: &SparseGraph) -> SparseGraph {
        self.filter_edges(|u, v| !sub.has_edge(u, v))
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(u, yu)| {
            *yu = self.neighbors(u).iter().map(|&v| x[v]).sum();
        });
    }

    /// Vertices at distance `<= r` from `x`, sorted.
    pub fn ball(&self, x: usize, r: usize) -> Result<Vec<usize>> {
        self.check_vertex(x)?;
        let mut bfs = Bfs::new(self.n());
        bfs.run(self, x, r, None);
        let mut v = bfs.visited().to_vec();
        v.sort_unstable();
        Ok(v)
    }

    /// Vertices at distance exactly `r` from `x`, sorted.
    pub fn sphere(&self, x: usize, r: usize) -> Result<Vec<usize>> {
        self.check_vertex(x)?;
        let mut bfs = Bfs::new(self.n());
        bfs.run(self, x, r, None);
        let mut v: Vec<usize> = bfs
            .visited()
            .iter()
            .copied()
            .filter(|&y| bfs.dist(y) == Some(r))
            .collect();
        v.sort_unstable();
        Ok(v)
    }

    /// Header `n <N> m <M>`, then one `u v` line per edge with `u < v`.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("n {} m {}\n", self.n(), self.edge_count());
        for (u, v) in self.edges() {
            s.push_str(&format!("{u} {v}\n"));
        }
        s
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let (n, m) = match h.as_slice() {
            ["n", n, "m", m] => (
                n.parse::<usize>().map_err(|e| Error::Parse(format!("header n: {e}")))?,
                m.parse::<usize>().map_err(|e| Error::Parse(format!("header m: {e}")))?,
            ),
            _ => return Err(Error::Parse(format!("bad header {header:?}"))),
        };
        let mut edges = Vec::with_capacity(m);
        for (i, line) in lines.enumerate() {
            let mut it = line.split_whitespace();
            let mut field = || -> Result<usize> {
                it.next()
                    .ok_or_else(|| Error::Parse(format!("edge line {}: missing field", i + 1)))?
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("edge line {}: {e}", i + 1)))
            };
            let (u, v) = (field()?, field()?);
            if u >= v {
                return Err(Error::Parse(format!("edge line {}: need u < v, got {u} {v}", i + 1)));
            }
            edges.push((u, v));
        }
        if edges.len() != m {
            return Err(Error::Parse(format!("header says {m} edges, found {}", edges.len())));
        }
        let g = Self::from_edges(n, edges)?;
        if g.edge_count() != m {
            return Err(Error::Parse("duplicate edges".into()));
        }
        Ok(g)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_edge_list(&std::fs::read_to_string(path)?)
    }
}

/// Breadth-first search with a reusable distance table, so repeated small searches
/// cost only the size of what they touch.
#[derive(Debug, Clone)]
pub struct Bfs {
    dist: Vec<u32>,
    touched: Vec<usize>,
    queue: VecDeque<usize>,
}

impl Bfs {
    pub fn new(n: usize) -> Self {
        Self {
            dist: vec![u32::MAX; n],
            touched: Vec::new(),
            queue: VecDeque::new(),
        }
    }

    fn reset(&mut self) {
        for &v in &self.touched {
            self.dist[v] = u32::MAX;
        }
        self.touched.clear();
        self.queue.clear();
    }

    /// Explores from `src` up to depth `max_depth`, never entering `blocked`.
    pub fn run(&mut self, g: &SparseGraph, src: usize, max_depth: usize, blocked: Option<usize>) {
        self.search(g, src, max_depth, blocked, |_| false);
    }

    /// Like [`Bfs::run`] but stops at the first vertex `v != src` with `hit(v)`, returning it.
    pub fn search<F>(
        &mut self,
        g: &SparseGraph,
        src: usize,
        max_depth: usize,
        blocked: Option<usize>,
        hit: F,
    ) -> Option<usize>
    where
        F: Fn(usize) -> bool,
    {
        self.reset();
        self.dist[src] = 0;
        self.touched.push(src);
        self.queue.push_back(src);
        while let Some(u) = self.queue.pop_front() {
            let du = self.dist[u] as usize;
            if du == max_depth {
                continue;
            }
            for &v in g.neighbors(u) {
                if Some(v) == blocked || self.dist[v] != u32::MAX {
                    continue;
                }
                self.dist[v] = du as u32 + 1;
                self.touched.push(v);
                if hit(v) {
                    return Some(v);
                }
                self.queue.push_back(v);
            }
        }
        None
    }

    /// Vertices reached by the last search, in discovery order.
    pub fn visited(&self) -> &[usize] {
        &self.touched
    }

    pub fn dist(&self, v: usize) -> Option<usize> {
        match self.dist[v] {
            u32::MAX => None,
            d => Some(d as usize),
        }
    }
}

/// The strict order `x ≺ y` iff `D_x < D_y`, or `D_x = D_y` and `x > y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeOrder {
    degrees: Vec<usize>,
    rank: Vec<usize>,
    pi: Vec<usize>,
}

impl DegreeOrder {
    pub fn from_degrees(degrees: Vec<usize>) -> Self {
        let mut pi: Vec<usize> = (0..degrees.len()).collect();
        pi.sort_unstable_by(|&a, &b| degrees[b].cmp(&degrees[a]).then(a.cmp(&b)));
        let mut rank = vec![0; pi.len()];
        for (i, &v) in pi.iter().enumerate() {
            rank[v] = i;
        }
        Self { degrees, rank, pi }
    }

    /// `x ≺ y`.
    #[inline]
    pub fn precedes(&self, x: usize, y: usize) -> bool {
        self.rank[x] > self.rank[y]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    #[inline]
    pub fn degree(&self, x: usize) -> usize {
        self.degrees[x]
    }

    /// Position of each vertex in the ≺-descending list (0 = largest).
    pub fn rank(&self) -> &[usize] {
        &self.rank
    }

    /// ≺-descending list of vertices.
    pub fn pi(&self) -> &[usize] {
        &self.pi
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }
}

pub fn degree_order(g: &SparseGraph) -> DegreeOrder {
    DegreeOrder::from_degrees(g.degrees())
}

/// `(S₁⁺(x), S₁⁻(x))`: the neighbours above and below `x` in ≺.
pub fn split_neighborhood(g: &SparseGraph, ord: &DegreeOrder, x: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    g.check_vertex(x)?;
    Ok(g.neighbors(x).iter().partition(|&&y| ord.precedes(x, y)))
}

/// Sampling algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Geometric skips under the dominating bound `w_x w_y / sum w`, then exact thinning.
    #[default]
    Skip,
    /// One keyed uniform per pair; quadratic.
    Pairwise,
}

pub fn sample_grg(ws: &WeightSequence, seed: u64, model: Model) -> SparseGraph {
    sample_graph(ws, seed, model, SamplerKind::Skip)
}

pub fn sample_graph(ws: &WeightSequence, seed: u64, model: Model, kind: SamplerKind) -> SparseGraph {
    match kind {
        SamplerKind::Skip => sample_skip(ws, seed, model),
        SamplerKind::Pairwise => sample_pairwise(ws, seed, model),
    }
}

fn sample_pairwise(ws: &WeightSequence, seed: u64, model: Model) -> SparseGraph {
    let n = ws.n();
    let w = ws.weights();
    let total = ws.total();
    let edges: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|x| {
            ((x + 1)..n).filter_map(move |y| {
                let p = pair_probability(w[x] * w[y], total, model);
                (rng::pair_uniform(seed, x, y) < p).then_some((x, y))
            })
        })
        .collect();
    SparseGraph::from_edges(n, edges).expect("sampled edges are valid")
}

fn sample_skip(ws: &WeightSequence, seed: u64, model: Model) -> SparseGraph {
    let n = ws.n();
    let w = ws.weights();
    let total = ws.total();
    let mut by_weight: Vec<usize> = (0..n).collect();
    by_weight.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    let sw: Vec<f64> = by_weight.iter().map(|&v| w[v]).collect();

    let edges: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let x = by_weight[i];
            let mut stream = rng::keyed_stream(seed, 0x534b_4950, &[x as u64]);
            let mut out = Vec::new();
            let mut j = i + 1;
            if j >= n {
                return out;
            }
            // `bound` dominates p for every later position in the row.
            let mut bound = (sw[i] * sw[j] / total).min(1.0);
            while j < n && bound > 0.0 {
                if bound < 1.0 {
                    let u: f64 = 1.0 - stream.random::<f64>();
                    let skip = (u.ln() / (-bound).ln_1p()).floor();
                    if skip >= (n - j) as f64 {
                        break;
                    }
                    j += skip as usize;
                }
                let y = by_weight[j];
                let p = pair_probability(sw[i] * sw[j], total, model);
                if rng::pair_uniform(seed, x, y) * bound < p {
                    out.push((x.min(y), x.max(y)));
                }
                bound = (sw[i] * sw[j] / total).min(1.0);
                j += 1;
            }
            out
        })
        .collect();
    SparseGraph::from_edges(n, edges).expect("sampled edges are valid")
}

/// Small graphs used throughout the tests.
pub mod fixtures {
    use super::SparseGraph;

    /// Six vertices with degrees (3,2,2,1,1,1); one down-up path (1,2,0).
    pub fn g6() -> SparseGraph {
        SparseGraph::from_edges(6, [(0, 4), (0, 5), (0, 2), (2, 1), (1, 3)]).unwrap()
    }

    pub fn c5() -> SparseGraph {
        SparseGraph::from_edges(5, (0..5).map(|i| (i, (i + 1) % 5))).unwrap()
    }

    pub fn star9() -> SparseGraph {
        star(9)
    }

    pub fn p3() -> SparseGraph {
        SparseGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    /// Centre 0 with leaves `1..=k`.
    pub fn star(k: usize) -> SparseGraph {
        SparseGraph::from_edges(k + 1, (1..=k).map(|i| (0, i))).unwrap()
    }

    /// Centre 0, `mids` middle vertices, each with `leaves` leaves.
    pub fn two_level_star(mids: usize, leaves: usize) -> SparseGraph {
        let mut edges = Vec::new();
        let mut next = mids + 1;
        for m in 1..=mids {
            edges.push((0, m));
            for _ in 0..leaves {
                edges.push((m, next));
                next += 1;
            }
        }
        SparseGraph::from_edges(next, edges).unwrap()
    }

    /// Disjoint stars with the given leaf counts, centres first in each block.
    pub fn disjoint_stars(sizes: &[usize]) -> SparseGraph {
        let mut edges = Vec::new();
        let mut base = 0;
        for &k in sizes {
            edges.extend((1..=k).map(|i| (base, base + i)));
            base += k + 1;
        }
        SparseGraph::from_edges(base, edges).unwrap()
    }
}
