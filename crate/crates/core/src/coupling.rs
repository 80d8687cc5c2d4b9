//! Finite truncations of the coupled label-path trees `T_x ⊇ Ť_x` and the
//! embedding of the cycle-pruned ball `B_r^nc(x)` into them.
//!
//! Nodes are label paths `(x, y_1, …, y_k)`. The edge to a child `y_{k+1}` copies
//! the real edge `y_k ~ y_{k+1}` when the parent path is the lexicographically
//! smallest geodesic to `y_k` and `y_{k+1}` lies outside `B_k(x)`; otherwise it is
//! an auxiliary Bernoulli draw `Ẑ` keyed by the child's label path. `Ť` keeps the
//! auxiliary draws only for parents on the sphere `S_k(x)` and children outside `B_k(x)`.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Bfs, SparseGraph};
use crate::rng;
use crate::weights::{pair_probability, Model, WeightSequence};

pub const DEFAULT_NODE_BUDGET: usize = 100_000;

/// Lexicographically smallest simple path of length exactly `k` from `x` to `y` in `g`.
pub fn canonical_path(g: &SparseGraph, x: usize, y: usize, k: usize) -> Option<Vec<usize>> {
    if x >= g.n() || y >= g.n() {
        return None;
    }
    if k == 0 {
        return (x == y).then(|| vec![x]);
    }
    let mut bfs = Bfs::new(g.n());
    bfs.run(g, y, k, None);
    let dist_to_y: Vec<Option<usize>> = (0..g.n()).map(|v| bfs.dist(v)).collect();
    let mut path = vec![x];
    let mut on = vec![false; g.n()];
    on[x] = true;

    fn dfs(
        g: &SparseGraph,
        y: usize,
        k: usize,
        dist: &[Option<usize>],
        path: &mut Vec<usize>,
        on: &mut [bool],
    ) -> bool {
        let u = *path.last().unwrap();
        let left = k + 1 - path.len();
        if left == 0 {
            return u == y;
        }
        for &v in g.neighbors(u) {
            if on[v] || (v == y && left > 1) {
                continue;
            }
            match dist[v] {
                Some(d) if d < left => {}
                _ => continue,
            }
            on[v] = true;
            path.push(v);
            if dfs(g, y, k, dist, path, on) {
                return true;
            }
            path.pop();
            on[v] = false;
        }
        false
    }

    if x == y {
        return None;
    }
    dfs(g, y, k, &dist_to_y, &mut path, &mut on).then_some(path)
}

/// Which tree a view describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeKind {
    /// `T_x`.
    Full,
    /// `Ť_x`.
    Check,
}

/// Which nodes get their children materialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeScope {
    /// Breadth-first over every node of the root component.
    #[default]
    Full,
    /// Only canonical nodes (the possible images of the embedding) are expanded.
    Spine,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub label: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    /// Children were generated for this node.
    pub expanded: bool,
}

/// The root component of one of the two trees, truncated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledTree {
    pub root: usize,
    pub kind: TreeKind,
    /// Nodes of depth `<= depth` were eligible for expansion.
    pub depth: usize,
    pub budget_hit: bool,
    nodes: Vec<TreeNode>,
    /// Child node indices, sorted by label.
    children: Vec<Vec<usize>>,
}

impl CoupledTree {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, i: usize) -> &TreeNode {
        &self.nodes[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Tree degree: children plus the parent edge.
    pub fn degree(&self, i: usize) -> usize {
        self.children[i].len() + usize::from(self.nodes[i].parent.is_some())
    }

    /// Node whose label path is `path` (starting with the root label).
    pub fn find(&self, path: &[usize]) -> Option<usize> {
        let (&first, rest) = path.split_first()?;
        if first != self.root {
            return None;
        }
        let mut cur = 0;
        for &label in rest {
            let ch = &self.children[cur];
            let pos = ch
                .binary_search_by_key(&label, |&c| self.nodes[c].label)
                .ok()?;
            cur = ch[pos];
        }
        Some(cur)
    }

    pub fn label_path(&self, mut i: usize) -> Vec<usize> {
        let mut p = vec![self.nodes[i].label];
        while let Some(q) = self.nodes[i].parent {
            p.push(self.nodes[q].label);
            i = q;
        }
        p.reverse();
        p
    }

    /// Parent-child node index pairs.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.children
            .iter()
            .enumerate()
            .flat_map(|(p, ch)| ch.iter().map(move |&c| (p, c)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledPair {
    pub full: CoupledTree,
    pub check: CoupledTree,
}

/// Precomputed per-graph data for repeated tree builds.
pub struct CouplingContext<'a> {
    g: &'a SparseGraph,
    ws: &'a WeightSequence,
    model: Model,
    by_weight: Vec<usize>,
    sorted_w: Vec<f64>,
}

struct ArenaNode {
    label: usize,
    parent: Option<usize>,
    depth: usize,
    canonical: bool,
    in_check: bool,
    expanded: bool,
    key: u64,
}

impl<'a> CouplingContext<'a> {
    pub fn new(g: &'a SparseGraph, ws: &'a WeightSequence, model: Model) -> Result<Self> {
        if g.n() != ws.n() {
            return Err(Error::InvalidParameter(format!(
                "{} weights for {} vertices",
                ws.n(),
                g.n()
            )));
        }
        let w = ws.weights();
        let mut by_weight: Vec<usize> = (0..ws.n()).collect();
        by_weight.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
        let sorted_w = by_weight.iter().map(|&v| w[v]).collect();
        Ok(Self {
            g,
            ws,
            model,
            by_weight,
            sorted_w,
        })
    }

    /// Labels `v != y` with `Ẑ = 1` in one row of auxiliary draws, sorted.
    fn sample_row<R: Rng>(&self, y: usize, rng: &mut R) -> Vec<usize> {
        let n = self.by_weight.len();
        let wy = self.ws.weight(y);
        let total = self.ws.total();
        let mut out = Vec::new();
        let mut j = 0;
        let mut bound = (wy * self.sorted_w[0] / total).min(1.0);
        while j < n && bound > 0.0 {
            if bound < 1.0 {
                let u: f64 = 1.0 - rng.random::<f64>();
                let skip = (u.ln() / (-bound).ln_1p()).floor();
                if skip >= (n - j) as f64 {
                    break;
                }
                j += skip as usize;
            }
            let v = self.by_weight[j];
            let prod = wy * self.sorted_w[j];
            if v != y {
                let p = pair_probability(prod, total, self.model);
                if rng.random::<f64>() * bound < p {
                    out.push(v);
                }
            }
            bound = (prod / total).min(1.0);
            j += 1;
        }
        out.sort_unstable();
        out
    }

    /// Builds both trees rooted at `x`. Nodes of depth `<= depth` are expanded,
    /// so degrees are exact up to that depth unless the budget was hit.
    pub fn build(&self, x: usize, depth: usize, seed: u64, node_budget: usize, scope: TreeScope) -> Result<CoupledPair> {
        self.g.check_vertex(x)?;
        if node_budget == 0 {
            return Err(Error::InvalidParameter("node budget must be positive".into()));
        }
        let g = self.g;
        // Distances from x and the lexicographically smallest predecessor on each layer.
        let mut bfs = Bfs::new(g.n());
        bfs.run(g, x, depth + 1, None);
        let dist = |v: usize| bfs.dist(v);
        let mut layers: Vec<Vec<usize>> = vec![Vec::new(); depth + 2];
        for &v in bfs.visited() {
            layers[dist(v).unwrap()].push(v);
        }
        let mut lexrank: BTreeMap<usize, usize> = BTreeMap::new();
        let mut pmin: BTreeMap<usize, usize> = BTreeMap::new();
        lexrank.insert(x, 0);
        for k in 1..layers.len() {
            let mut keyed: Vec<(usize, usize)> = layers[k]
                .iter()
                .map(|&v| {
                    let p = g
                        .neighbors(v)
                        .iter()
                        .copied()
                        .filter(|&u| dist(u) == Some(k - 1))
                        .min_by_key(|u| lexrank[u])
                        .expect("BFS predecessor exists");
                    pmin.insert(v, p);
                    (lexrank[&p], v)
                })
                .collect();
            keyed.sort_unstable();
            for (i, &(_, v)) in keyed.iter().enumerate() {
                lexrank.insert(v, i);
            }
        }
        let in_ball = |v: usize, k: usize| dist(v).is_some_and(|d| d <= k);

        let mut arena = vec![ArenaNode {
            label: x,
            parent: None,
            depth: 0,
            canonical: true,
            in_check: true,
            expanded: false,
            key: rng::hash_words(seed, &[0x5452_4545, x as u64]),
        }];
        let mut kids: Vec<Vec<usize>> = vec![Vec::new()];
        let mut budget_hit = false;
        let mut head = 0;
        while head < arena.len() {
            let i = head;
            head += 1;
            let (y, k) = (arena[i].label, arena[i].depth);
            if k > depth || (scope == TreeScope::Spine && !arena[i].canonical) {
                continue;
            }
            // (label, Ž) for every child with Z = 1
            let mut new_children: Vec<(usize, bool)> = Vec::new();
            if k == 0 {
                new_children.extend(g.neighbors(x).iter().map(|&v| (v, true)));
            } else {
                let mut stream = rng::keyed_stream(arena[i].key, 0x5a48_4154, &[]);
                let row = self.sample_row(y, &mut stream);
                let on_sphere = dist(y) == Some(k);
                if arena[i].canonical {
                    new_children.extend(
                        g.neighbors(y)
                            .iter()
                            .filter(|&&v| !in_ball(v, k))
                            .map(|&v| (v, true)),
                    );
                    new_children.extend(row.into_iter().filter(|&v| in_ball(v, k)).map(|v| (v, false)));
                } else if on_sphere {
                    new_children.extend(row.into_iter().map(|v| (v, !in_ball(v, k))));
                } else {
                    new_children.extend(row.into_iter().map(|v| (v, false)));
                }
                new_children.sort_unstable();
            }
            if arena.len() + new_children.len() > node_budget {
                budget_hit = true;
                break;
            }
            arena[i].expanded = true;
            let (parent_canonical, parent_check, parent_key) = (arena[i].canonical, arena[i].in_check, arena[i].key);
            for (v, check) in new_children {
                let canonical = parent_canonical && dist(v) == Some(k + 1) && pmin.get(&v) == Some(&y);
                let idx = arena.len();
                arena.push(ArenaNode {
                    label: v,
                    parent: Some(i),
                    depth: k + 1,
                    canonical,
                    in_check: parent_check && check,
                    expanded: false,
                    key: rng::hash_words(parent_key, &[v as u64]),
                });
                kids.push(Vec::new());
                kids[i].push(idx);
            }
        }

        let extract = |kind: TreeKind| -> CoupledTree {
            let keep: Vec<bool> = arena
                .iter()
                .map(|a| kind == TreeKind::Full || a.in_check)
                .collect();
            let mut remap = vec![usize::MAX; arena.len()];
            let mut nodes = Vec::new();
            for (i, a) in arena.iter().enumerate() {
                if keep[i] {
                    remap[i] = nodes.len();
                    nodes.push(TreeNode {
                        label: a.label,
                        parent: a.parent.map(|p| remap[p]),
                        depth: a.depth,
                        expanded: a.expanded,
                    });
                }
            }
            let mut children = vec![Vec::new(); nodes.len()];
            for (i, ch) in kids.iter().enumerate() {
                if keep[i] {
                    children[remap[i]] = ch.iter().filter(|&&c| keep[c]).map(|&c| remap[c]).collect();
                }
            }
            CoupledTree {
                root: x,
                kind,
                depth,
                budget_hit,
                nodes,
                children,
            }
        };
        Ok(CoupledPair {
            full: extract(TreeKind::Full),
            check: extract(TreeKind::Check),
        })
    }
}

/// One-shot build with a fresh context.
pub fn build_coupled_trees(
    g: &SparseGraph,
    ws: &WeightSequence,
    x: usize,
    depth: usize,
    seed: u64,
    node_budget: usize,
) -> Result<CoupledPair> {
    CouplingContext::new(g, ws, Model::Grg)?.build(x, depth, seed, node_budget, TreeScope::Full)
}

/// The map `ι` from `B_r^nc(x)` to label paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    pub root: usize,
    pub r: usize,
    paths: BTreeMap<usize, Vec<usize>>,
}

impl Embedding {
    pub fn get(&self, y: usize) -> Option<&[usize]> {
        self.paths.get(&y).map(Vec::as_slice)
    }

    /// Vertices of the ball, ascending.
    pub fn domain(&self) -> impl Iterator<Item = usize> + '_ {
        self.paths.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Unique short paths from `x` in the cycle-pruned graph.
pub fn embed(g_nc: &SparseGraph, x: usize, r: usize) -> Result<Embedding> {
    g_nc.check_vertex(x)?;
    let mut bfs = Bfs::new(g_nc.n());
    bfs.run(g_nc, x, r, None);
    let mut paths: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    paths.insert(x, vec![x]);
    for &v in &bfs.visited()[1..] {
        let dv = bfs.dist(v).unwrap();
        let parent = g_nc
            .neighbors(v)
            .iter()
            .copied()
            .find(|&u| bfs.dist(u) == Some(dv - 1))
            .expect("BFS predecessor exists");
        let mut p = paths[&parent].clone();
        p.push(v);
        paths.insert(v, p);
    }
    // A second simple path of length <= r exists iff some non-tree edge hangs off a vertex at depth < r.
    for &u in bfs.visited() {
        let du = bfs.dist(u).unwrap();
        for &v in g_nc.neighbors(u) {
            let Some(dv) = bfs.dist(v) else { continue };
            let tree_edge = (dv == du + 1 && paths[&v][du] == u) || (du == dv + 1 && paths[&u][dv] == v);
            if !tree_edge && du.min(dv) < r {
                return Err(Error::NotCycleFree {
                    root: x,
                    detail: format!("edge {{{u}, {v}}} closes a second path of length <= {r}"),
                });
            }
        }
    }
    Ok(Embedding { root: x, r, paths })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub root: usize,
    pub r: usize,
    pub ball_size: usize,
    pub injective: bool,
    pub edges_checked: usize,
    pub edges_ok: bool,
    pub degrees_checked: usize,
    pub degrees_ok: bool,
    /// Some needed node was never expanded (budget or depth too small).
    pub incomplete: bool,
    pub witnesses: Vec<String>,
}

impl EmbeddingReport {
    pub fn pass(&self) -> bool {
        self.injective && self.edges_ok && self.degrees_ok && !self.incomplete
    }
}

/// Checks that `ι` is injective and edge-preserving into `Ť_x`, and that
/// `D^nc_y ≤ D^Ť_{ι(y)} ≤ D^T_{ι(y)}` on `B_{r-1}^nc(x)`.
pub fn verify_embedding(g_nc: &SparseGraph, x: usize, r: usize, trees: &CoupledPair) -> EmbeddingReport {
    let mut rep = EmbeddingReport {
        root: x,
        r,
        ball_size: 0,
        injective: true,
        edges_checked: 0,
        edges_ok: true,
        degrees_checked: 0,
        degrees_ok: true,
        incomplete: false,
        witnesses: Vec::new(),
    };
    let emb = match embed(g_nc, x, r) {
        Ok(e) => e,
        Err(e) => {
            rep.injective = false;
            rep.edges_ok = false;
            rep.witnesses.push(e.to_string());
            return rep;
        }
    };
    rep.ball_size = emb.len();
    let distinct: HashSet<&[usize]> = emb.domain().map(|y| emb.get(y).unwrap()).collect();
    if distinct.len() != emb.len() {
        rep.injective = false;
        rep.witnesses.push("two vertices share a label path".into());
    }
    for y in emb.domain() {
        let py = emb.get(y).unwrap();
        for &z in g_nc.neighbors(y) {
            let Some(pz) = emb.get(z) else { continue };
            if pz.len() != py.len() + 1 {
                continue;
            }
            rep.edges_checked += 1;
            let ok = pz[..py.len()] == *py && trees.check.find(pz).is_some();
            if !ok {
                rep.edges_ok = false;
                rep.witnesses.push(format!("edge {{{y}, {z}}} missing from the check tree"));
            }
        }
        if py.len() <= r {
            // y ∈ B_{r-1}
            let (Some(ic), Some(i_f)) = (trees.check.find(py), trees.full.find(py)) else {
                rep.incomplete = true;
                rep.witnesses.push(format!("node for {y} not materialized"));
                continue;
            };
            if !trees.check.node(ic).expanded || !trees.full.node(i_f).expanded {
                rep.incomplete = true;
                rep.witnesses.push(format!("node for {y} not expanded"));
                continue;
            }
            rep.degrees_checked += 1;
            let (dnc, dc, df) = (g_nc.degree(y), trees.check.degree(ic), trees.full.degree(i_f));
            if !(dnc <= dc && dc <= df) {
                rep.degrees_ok = false;
                rep.witnesses.push(format!("vertex {y}: D^nc = {dnc}, check = {dc}, full = {df}"));
            }
        }
    }
    rep
}
