//! Two-step pruning: remove edges on short simple loops, then remove down-up edges.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Bfs, DegreeOrder, SparseGraph};
use crate::weights::WeightSequence;

pub const DEFAULT_RADIUS: usize = 6;

/// `ξ_ν = 3(ν+1)(2−3δ)/((1−δ)(1−2δ)) · log n / log log n`.
pub fn xi_threshold(nu: f64, delta: f64, n: usize) -> Result<f64> {
    if n < 16 {
        return Err(Error::InvalidParameter(format!("xi needs n >= 16, got {n}")));
    }
    if !(delta > 0.0 && delta < 1.0 / 3.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta} not in (0, 1/3)")));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter(format!("nu = {nu} must be positive")));
    }
    let ln = (n as f64).ln();
    let pre = 3.0 * (nu + 1.0) * (2.0 - 3.0 * delta) / ((1.0 - delta) * (1.0 - 2.0 * delta));
    Ok(pre * ln / ln.ln())
}

/// `log n / log log n`.
pub fn log_ratio(n: usize) -> f64 {
    let ln = (n as f64).ln();
    ln / ln.ln()
}

/// Neighbours `y` of `x` lying on a simple loop through `x` of length at most `2r+1`
/// whose first step is `y`.
pub fn cyc_neighbors(g: &SparseGraph, x: usize, r: usize) -> Result<Vec<usize>> {
    g.check_vertex(x)?;
    if r == 0 {
        return Err(Error::InvalidParameter("r must be positive".into()));
    }
    let nb = g.neighbors(x);
    let mut bfs = Bfs::new(g.n());
    Ok(nb
        .iter()
        .copied()
        .filter(|&y| {
            bfs.search(g, y, 2 * r - 1, Some(x), |z| z != y && nb.binary_search(&z).is_ok())
                .is_some()
        })
        .collect())
}

/// Bridges of `g` as `(u, v)` with `u < v`, sorted.
pub fn bridges(g: &SparseGraph) -> Vec<(usize, usize)> {
    let n = g.n();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut out = Vec::new();
    let mut time = 0;
    // frame: (vertex, parent, next neighbour index)
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        disc[root] = time;
        low[root] = time;
        time += 1;
        stack.push((root, usize::MAX, 0));
        while let Some(&mut (u, parent, ref mut i)) = stack.last_mut() {
            let nb = g.neighbors(u);
            if *i < nb.len() {
                let v = nb[*i];
                *i += 1;
                if v == parent {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = time;
                    low[v] = time;
                    time += 1;
                    stack.push((v, u, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if parent != usize::MAX {
                    low[parent] = low[parent].min(low[u]);
                    if low[u] > disc[parent] {
                        out.push((parent.min(u), parent.max(u)));
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Two-sided search for a path between the endpoints of edge `{a, b}` that avoids the edge.
struct LoopSearch {
    da: Vec<u32>,
    db: Vec<u32>,
    touched: Vec<usize>,
}

impl LoopSearch {
    fn new(n: usize) -> Self {
        Self {
            da: vec![u32::MAX; n],
            db: vec![u32::MAX; n],
            touched: Vec::new(),
        }
    }

    /// True iff `dist(a, b) <= max_len` in `g` with the edge `{a, b}` deleted.
    fn edge_on_short_loop(&mut self, g: &SparseGraph, a: usize, b: usize, max_len: usize) -> bool {
        for &v in &self.touched {
            self.da[v] = u32::MAX;
            self.db[v] = u32::MAX;
        }
        self.touched.clear();
        self.da[a] = 0;
        self.db[b] = 0;
        self.touched.extend([a, b]);
        let mut fa = vec![a];
        let mut fb = vec![b];
        let (mut la, mut lb) = (0usize, 0usize);
        while la + lb < max_len && !fa.is_empty() && !fb.is_empty() {
            let expand_a = fa.len() <= fb.len();
            let (front, mine, other, level) = if expand_a {
                (&mut fa, &mut self.da, &self.db, &mut la)
            } else {
                (&mut fb, &mut self.db, &self.da, &mut lb)
            };
            let mut next = Vec::new();
            for &u in front.iter() {
                for &v in g.neighbors(u) {
                    if (u == a && v == b) || (u == b && v == a) || mine[v] != u32::MAX {
                        continue;
                    }
                    if other[v] != u32::MAX {
                        return true;
                    }
                    mine[v] = *level as u32 + 1;
                    self.touched.push(v);
                    next.push(v);
                }
            }
            *front = next;
            *level += 1;
        }
        false
    }
}

/// The per-vertex sets `S₁^cyc(x)` for every vertex.
pub fn cyc_sets(g: &SparseGraph, r: usize) -> Vec<Vec<usize>> {
    let n = g.n();
    let br = bridges(g);
    let flagged: Vec<(usize, usize)> = g
        .edges()
        .collect::<Vec<_>>()
        .into_par_iter()
        .filter(|e| br.binary_search(e).is_err())
        .map_init(
            || LoopSearch::new(n),
            |ls, (u, v)| ls.edge_on_short_loop(g, u, v, 2 * r).then_some((u, v)),
        )
        .flatten()
        .collect();
    let mut sets = vec![Vec::new(); n];
    for (u, v) in flagged {
        sets[u].push(v);
        sets[v].push(u);
    }
    for s in &mut sets {
        s.sort_unstable();
    }
    sets
}

/// ≺-maximal neighbour of every vertex, if any.
pub fn top_neighbors(g: &SparseGraph, ord: &DegreeOrder) -> Vec<Option<usize>> {
    (0..g.n())
        .map(|y| g.neighbors(y).iter().copied().min_by_key(|&z| ord.rank()[z]))
        .collect()
}

/// `S₁^du(x) = {y ~ x : y ≺ x, ∃ z ~ y with x ≺ z}` computed on `g` (normally `g_nc`).
pub fn du_sets(g: &SparseGraph, ord: &DegreeOrder) -> Vec<Vec<usize>> {
    let top = top_neighbors(g, ord);
    (0..g.n())
        .into_par_iter()
        .map(|x| {
            g.neighbors(x)
                .iter()
                .copied()
                .filter(|&y| ord.precedes(y, x) && top[y].is_some_and(|z| ord.precedes(x, z)))
                .collect()
        })
        .collect()
}

/// Pruning output with the per-vertex removal ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneResult {
    pub g_nc: SparseGraph,
    pub g_p: SparseGraph,
    pub removed_cyc: Vec<Vec<usize>>,
    pub removed_du: Vec<Vec<usize>>,
    pub degree_before: Vec<usize>,
    pub r: usize,
    /// Threshold attached by the caller, recorded for reports.
    pub xi: Option<f64>,
    pub warnings: Vec<String>,
}

impl PruneResult {
    /// Number of step-2 edges incident to `x` (either endpoint).
    pub fn du_incident_count(&self, x: usize) -> usize {
        self.g_nc.degree(x) - self.g_p.degree(x)
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = Some(xi);
        self
    }

    /// CSV with columns vertex, removed_cyc_count, removed_du_count, degree_before, degree_after.
    pub fn ledger_csv(&self) -> String {
        let mut s = String::from("vertex,removed_cyc_count,removed_du_count,degree_before,degree_after\n");
        for x in 0..self.g_p.n() {
            s.push_str(&format!(
                "{x},{},{},{},{}\n",
                self.removed_cyc[x].len(),
                self.du_incident_count(x),
                self.degree_before[x],
                self.g_p.degree(x)
            ));
        }
        s
    }
}

/// Runs both pruning steps. The order `ord` must come from the degrees of `g`.
pub fn prune(g: &SparseGraph, ord: &DegreeOrder, r: usize) -> PruneResult {
    let mut warnings = Vec::new();
    if r < DEFAULT_RADIUS {
        warnings.push(format!("radius r = {r} below the default {DEFAULT_RADIUS}"));
    }
    let removed_cyc = cyc_sets(g, r.max(1));
    let g_nc = g.filter_edges(|u, v| removed_cyc[u].binary_search(&v).is_err());
    let removed_du = du_sets(&g_nc, ord);
    let g_p = g_nc.filter_edges(|u, v| {
        removed_du[u].binary_search(&v).is_err() && removed_du[v].binary_search(&u).is_err()
    });
    debug_assert_eq!(g_p, keep_max_forest(&g_nc, ord));
    PruneResult {
        g_nc,
        g_p,
        removed_cyc,
        removed_du,
        degree_before: g.degrees(),
        r,
        xi: None,
        warnings,
    }
}

/// Keeps, for each vertex, only the edge to its ≺-maximal upper neighbour.
pub fn keep_max_forest(g: &SparseGraph, ord: &DegreeOrder) -> SparseGraph {
    let top = top_neighbors(g, ord);
    let keep_up = |y: usize, x: usize| ord.precedes(y, x) && top[y] == Some(x);
    g.filter_edges(|u, v| keep_up(u, v) || keep_up(v, u))
}

/// Union-find acyclicity test.
pub fn verify_forest(g: &SparseGraph) -> bool {
    let mut parent: Vec<usize> = (0..g.n()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (u, v) in g.edges() {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a == b {
            return false;
        }
        parent[a] = b;
    }
    true
}

/// First path `(x, y, z)` with `y ≺ x ≺ z`, scanning centres `y` in label order.
pub fn find_down_up(g: &SparseGraph, ord: &DegreeOrder) -> Option<(usize, usize, usize)> {
    for y in 0..g.n() {
        let nb = g.neighbors(y);
        for &x in nb {
            if !ord.precedes(y, x) {
                continue;
            }
            if let Some(&z) = nb.iter().find(|&&z| z != x && ord.precedes(x, z)) {
                return Some((x, y, z));
            }
        }
    }
    None
}

pub fn verify_no_down_up(g: &SparseGraph, ord: &DegreeOrder) -> bool {
    find_down_up(g, ord).is_none()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeLossStats {
    /// `D_x − D_x^p`.
    pub loss: Vec<usize>,
    pub max: usize,
    /// `histogram[k]` = number of vertices with loss `k`.
    pub histogram: Vec<usize>,
    /// Vertices with loss above `ξ/2`; empty when no threshold was supplied.
    pub exceeding: Vec<usize>,
}

pub fn degree_loss_stats(pr: &PruneResult, xi: Option<f64>) -> DegreeLossStats {
    let loss: Vec<usize> = (0..pr.g_p.n())
        .map(|x| pr.degree_before[x] - pr.g_p.degree(x))
        .collect();
    let max = loss.iter().copied().max().unwrap_or(0);
    let mut histogram = vec![0; max + 1];
    for &l in &loss {
        histogram[l] += 1;
    }
    let exceeding = match xi.or(pr.xi) {
        Some(xi) => (0..loss.len()).filter(|&x| loss[x] as f64 > xi / 2.0).collect(),
        None => Vec::new(),
    };
    DegreeLossStats {
        loss,
        max,
        histogram,
        exceeding,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexClass {
    Low,
    Mid,
    High,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexPartition {
    pub v_low: Vec<usize>,
    pub v_mid: Vec<usize>,
    pub v_high: Vec<usize>,
    class: Vec<VertexClass>,
}

impl VertexPartition {
    pub fn class(&self, x: usize) -> VertexClass {
        self.class[x]
    }

    pub fn is_high(&self, x: usize) -> bool {
        self.class[x] == VertexClass::High
    }
}

/// High: `D ≥ ξ`; low: `D < ξ, w ≤ 4ξ`; mid: `D < ξ, w > 4ξ`.
pub fn vertex_partition(g: &SparseGraph, ws: &WeightSequence, xi: f64) -> Result<VertexPartition> {
    vertex_partition_from_degrees(&g.degrees(), ws, xi)
}

pub fn vertex_partition_from_degrees(degrees: &[usize], ws: &WeightSequence, xi: f64) -> Result<VertexPartition> {
    if !(xi > 0.0) {
        return Err(Error::InvalidParameter(format!("xi = {xi} must be positive")));
    }
    if ws.n() != degrees.len() {
        return Err(Error::InvalidParameter(format!(
            "{} weights for {} vertices",
            ws.n(),
            degrees.len()
        )));
    }
    let class: Vec<VertexClass> = (0..degrees.len())
        .map(|x| {
            if degrees[x] as f64 >= xi {
                VertexClass::High
            } else if ws.weight(x) <= 4.0 * xi {
                VertexClass::Low
            } else {
                VertexClass::Mid
            }
        })
        .collect();
    let pick = |c| (0..degrees.len()).filter(|&x| class[x] == c).collect::<Vec<_>>();
    Ok(VertexPartition {
        v_low: pick(VertexClass::Low),
        v_mid: pick(VertexClass::Mid),
        v_high: pick(VertexClass::High),
        class,
    })
}

/// The `degree_before` column of a ledger written by [`PruneResult::ledger_csv`],
/// indexed by vertex.
pub fn ledger_degrees(text: &str) -> Result<Vec<usize>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let headers = rd.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("ledger has no {name} column")))
    };
    let (vc, dc) = (col("vertex")?, col("degree_before")?);
    let mut pairs = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let parse = |i: usize| {
            rec[i]
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad ledger entry {:?}", &rec[i])))
        };
        pairs.push((parse(vc)?, parse(dc)?));
    }
    let mut degrees = vec![usize::MAX; pairs.len()];
    for (v, d) in pairs {
        let slot = degrees
            .get_mut(v)
            .ok_or_else(|| Error::Parse(format!("ledger vertex {v} out of range")))?;
        *slot = d;
    }
    if degrees.contains(&usize::MAX) {
        return Err(Error::Parse("ledger does not list every vertex exactly once".into()));
    }
    Ok(degrees)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{degree_order, fixtures::*};
    use proptest::prelude::*;

    /// Exhaustive oracle: neighbours `y` such that some simple loop x→y→…→x has length ≤ max_len.
    fn cyc_oracle(g: &SparseGraph, x: usize, max_len: usize) -> Vec<usize> {
        fn dfs(g: &SparseGraph, x: usize, u: usize, len: usize, max_len: usize, on: &mut Vec<bool>) -> bool {
            for &v in g.neighbors(u) {
                if v == x && len + 1 >= 3 && len < max_len {
                    return true;
                }
                if v != x && !on[v] && len + 1 < max_len {
                    on[v] = true;
                    let found = dfs(g, x, v, len + 1, max_len, on);
                    on[v] = false;
                    if found {
                        return true;
                    }
                }
            }
            false
        }
        g.neighbors(x)
            .iter()
            .copied()
            .filter(|&y| {
                let mut on = vec![false; g.n()];
                on[x] = true;
                on[y] = true;
                dfs(g, x, y, 1, max_len, &mut on)
            })
            .collect()
    }

    /// Exhaustive oracle for down-up sets on `g`.
    fn du_oracle(g: &SparseGraph, ord: &DegreeOrder) -> Vec<Vec<usize>> {
        (0..g.n())
            .map(|x| {
                g.neighbors(x)
                    .iter()
                    .copied()
                    .filter(|&y| {
                        (0..g.n()).any(|z| g.has_edge(y, z) && ord.precedes(y, x) && ord.precedes(x, z))
                    })
                    .collect()
            })
            .collect()
    }

    fn triangle_pendant() -> SparseGraph {
        SparseGraph::from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)]).unwrap()
    }

    #[test]
    fn xi_examples() {
        let xi = xi_threshold(1.0, 0.1, 10_000).unwrap();
        assert!((xi - 58.76).abs() < 0.01, "{xi}");
        let l = log_ratio(10_000);
        assert!((xi / l - 10.2 / 0.72).abs() < 1e-12);
        let tiny = xi_threshold(1.0, 1e-12, 10_000).unwrap() / l;
        assert!((tiny - 12.0).abs() < 1e-9);
        assert!(xi_threshold(2.0, 0.1, 10_000).unwrap() > xi);
        assert!(xi_threshold(1.0, 0.1, 15).is_err());
        assert!(xi_threshold(1.0, 0.4, 100).is_err());
    }

    #[test]
    fn cyc_examples() {
        let c5 = c5();
        for x in 0..5 {
            let s = cyc_neighbors(&c5, x, 6).unwrap();
            assert_eq!(s, c5.neighbors(x).to_vec());
            assert_eq!(s, cyc_oracle(&c5, x, 13));
        }
        // the 5-cycle is too long for r = 1 (loops of length <= 3)
        assert!(cyc_neighbors(&c5, 0, 1).unwrap().is_empty());
        let g = g6();
        for x in 0..6 {
            assert!(cyc_neighbors(&g, x, 6).unwrap().is_empty());
        }
        let t = triangle_pendant();
        assert!(cyc_neighbors(&t, 3, 6).unwrap().is_empty());
        assert_eq!(cyc_neighbors(&t, 2, 6).unwrap(), vec![0, 1]);
        assert_eq!(cyc_neighbors(&t, 0, 6).unwrap(), vec![1, 2]);
        assert_eq!(cyc_neighbors(&t, 2, 6).unwrap(), cyc_oracle(&t, 2, 13));
    }

    #[test]
    fn bridges_examples() {
        assert_eq!(bridges(&triangle_pendant()), vec![(2, 3)]);
        assert!(bridges(&c5()).is_empty());
        assert_eq!(bridges(&g6()).len(), 5);
    }

    #[test]
    fn g6_pruning() {
        let g = g6();
        let ord = degree_order(&g);
        let pr = prune(&g, &ord, 6);
        assert_eq!(pr.g_nc, g);
        let edges: Vec<_> = pr.g_p.edges().collect();
        assert_eq!(edges, vec![(0, 2), (0, 4), (0, 5), (1, 3)]);
        assert_eq!(pr.removed_du[1], vec![2]);
        assert_eq!(du_oracle(&pr.g_nc, &ord), pr.removed_du);
        assert!(verify_forest(&pr.g_p));
        assert!(verify_no_down_up(&pr.g_p, &ord));
        assert!(!verify_no_down_up(&g, &ord));
        assert_eq!(find_down_up(&g, &ord), Some((1, 2, 0)));
        let stats = degree_loss_stats(&pr, None);
        assert_eq!(stats.loss, vec![0, 1, 1, 0, 0, 0]);
        assert_eq!(stats.histogram, vec![4, 2]);
    }

    #[test]
    fn c5_and_star_pruning() {
        let g = c5();
        let ord = degree_order(&g);
        let pr = prune(&g, &ord, 6);
        assert_eq!(pr.g_nc.edge_count(), 0);
        assert_eq!(pr.g_p.edge_count(), 0);
        assert_eq!(degree_loss_stats(&pr, None).loss, vec![2; 5]);
        assert!(!verify_forest(&g));
        assert!(verify_forest(&SparseGraph::empty(4)));

        let s = star9();
        let ord = degree_order(&s);
        let pr = prune(&s, &ord, 6);
        assert_eq!(pr.g_p, s);
        assert!(degree_loss_stats(&pr, Some(1.0)).loss.iter().all(|&l| l == 0));
        assert!(verify_no_down_up(&s, &ord));
    }

    #[test]
    fn small_radius_warns() {
        let g = g6();
        let pr = prune(&g, &degree_order(&g), 2);
        assert_eq!(pr.warnings.len(), 1);
    }

    #[test]
    fn ledger_csv_layout() {
        let g = g6();
        let pr = prune(&g, &degree_order(&g), 6);
        let csv = pr.ledger_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "vertex,removed_cyc_count,removed_du_count,degree_before,degree_after");
        assert_eq!(lines[2], "1,0,1,2,1");
        assert_eq!(lines.len(), 7);
    }

    #[test]
    fn partition_examples() {
        let g = g6();
        let ws = WeightSequence::new(g.degrees().iter().map(|&d| d as f64).collect()).unwrap();
        let p = vertex_partition(&g, &ws, 2.0).unwrap();
        assert_eq!(p.v_high, vec![0, 1, 2]);
        assert_eq!(p.v_low, vec![3, 4, 5]);
        assert!(p.v_mid.is_empty());
        let p = vertex_partition(&g, &ws, 10.0).unwrap();
        assert!(p.v_high.is_empty());
        assert_eq!(p.v_low.len(), 6);
        let p = vertex_partition(&g, &ws, 1.0).unwrap();
        assert_eq!(p.v_high.len(), 6);
        let heavy = WeightSequence::new(vec![100.0; 6]).unwrap();
        let p = vertex_partition(&g, &heavy, 2.5).unwrap();
        assert_eq!(p.v_high, vec![0]);
        assert_eq!(p.v_mid, vec![1, 2, 3, 4, 5]);
        assert!(vertex_partition(&g, &ws, 0.0).is_err());
    }

    fn arb_graph(max_n: usize) -> impl Strategy<Value = SparseGraph> {
        (3..max_n).prop_flat_map(|n| {
            prop::collection::vec((0..n, 0..n), 0..(2 * n)).prop_map(move |e| {
                SparseGraph::from_edges(n, e.into_iter().filter(|(u, v)| u != v)).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn edge_route_matches_vertex_route(g in arb_graph(14), r in 1usize..4) {
            let sets = cyc_sets(&g, r);
            for x in 0..g.n() {
                let direct = cyc_neighbors(&g, x, r).unwrap();
                prop_assert_eq!(&sets[x], &direct);
                prop_assert_eq!(&direct, &cyc_oracle(&g, x, 2 * r + 1));
                for &y in &direct {
                    prop_assert!(sets[y].contains(&x));
                }
            }
        }

        #[test]
        fn pruning_invariants(g in arb_graph(30), r in 1usize..7) {
            let ord = degree_order(&g);
            let pr = prune(&g, &ord, r);
            prop_assert!(pr.g_p.is_subgraph_of(&pr.g_nc));
            prop_assert!(pr.g_nc.is_subgraph_of(&g));
            prop_assert!(verify_forest(&pr.g_p));
            prop_assert!(verify_no_down_up(&pr.g_p, &ord));
            prop_assert_eq!(&pr.g_p, &keep_max_forest(&pr.g_nc, &ord));
            prop_assert_eq!(&du_oracle(&pr.g_nc, &ord), &pr.removed_du);
            for x in 0..g.n() {
                prop_assert_eq!(
                    g.degree(x) - pr.g_p.degree(x),
                    pr.removed_cyc[x].len() + pr.du_incident_count(x)
                );
            }
            // step 2 is idempotent
            let again = du_sets(&pr.g_p, &ord);
            prop_assert!(again.iter().all(Vec::is_empty));
        }
    }

    #[test]
    fn ledger_roundtrip() {
        let g = g6();
        let ord = degree_order(&g);
        let pr = prune(&g, &ord, 6);
        assert_eq!(ledger_degrees(&pr.ledger_csv()).unwrap(), g.degrees());
        assert!(ledger_degrees("vertex,degree_before\n0,1\n0,2\n").is_err());
        assert!(ledger_degrees("vertex\n0\n").is_err());
    }
}
