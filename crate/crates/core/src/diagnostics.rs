//! Per-vertex functionals of sampled graphs with their high-probability bounds.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigenbasis::PrunedForest;
use crate::error::{Error, Result};
use crate::graph::{DegreeOrder, SparseGraph};
use crate::pruning::{du_sets, log_ratio};
use crate::weights::WeightSequence;

/// Constant `c > 1` used when reporting the down-up and `D^{nc+}` bounds.
pub const DEFAULT_C: f64 = 3.0;

/// Down-up sets of every vertex together with the inverse incidence.
#[derive(Debug, Clone)]
pub struct DuIndex {
    sets: Vec<Vec<usize>>,
    /// `owners[y]` = all `x` with `y ∈ S^du(x)`, sorted.
    owners: Vec<Vec<usize>>,
}

impl DuIndex {
    pub fn new(g_nc: &SparseGraph, ord: &DegreeOrder) -> Self {
        Self::from_sets(du_sets(g_nc, ord))
    }

    pub fn from_sets(sets: Vec<Vec<usize>>) -> Self {
        let mut owners = vec![Vec::new(); sets.len()];
        for (x, s) in sets.iter().enumerate() {
            for &y in s {
                owners[y].push(x);
            }
        }
        Self { sets, owners }
    }

    pub fn set(&self, x: usize) -> &[usize] {
        &self.sets[x]
    }

    pub fn count(&self, x: usize) -> usize {
        self.sets[x].len()
    }

    /// `(x₂, |S^du(x₁) ∩ S^du(x₂)|)` for every `x₂ ≠ x₁` with a nonempty overlap.
    fn overlaps(&self, x1: usize) -> Vec<(usize, usize)> {
        let mut hits: Vec<usize> = self.sets[x1].iter().flat_map(|&y| self.owners[y].iter().copied()).collect();
        hits.sort_unstable();
        let mut out: Vec<(usize, usize)> = Vec::new();
        for x2 in hits.into_iter().filter(|&x2| x2 != x1) {
            match out.last_mut() {
                Some((v, c)) if *v == x2 => *c += 1,
                _ => out.push((x2, 1)),
            }
        }
        out
    }

    /// `Σ_{x₂,x₃ ∈ high, x₂ ≺ x₁, x₂ ≺ x₃} |du(x₁) ∩ du(x₂)| · |(du(x₂) ∖ du(x₁)) ∩ du(x₃)|`.
    pub fn p1(&self, ord: &DegreeOrder, is_high: &[bool], x1: usize) -> f64 {
        let mine = &self.sets[x1];
        let mut total = 0u64;
        for (x2, shared) in self.overlaps(x1) {
            if !is_high[x2] || !ord.precedes(x2, x1) {
                continue;
            }
            let mut inner = 0u64;
            for &y in &self.sets[x2] {
                if mine.binary_search(&y).is_ok() {
                    continue;
                }
                inner += self.owners[y]
                    .iter()
                    .filter(|&&x3| is_high[x3] && ord.precedes(x2, x3))
                    .count() as u64;
            }
            total += shared as u64 * inner;
        }
        total as f64
    }

    /// `Σ_{x₂ ∈ mid, x₂ ≠ x₁} |du(x₁) ∩ du(x₂)|`.
    pub fn p2(&self, is_mid: &[bool], x1: usize) -> f64 {
        self.overlaps(x1)
            .into_iter()
            .filter(|&(x2, _)| is_mid[x2])
            .map(|(_, c)| c as f64)
            .sum()
    }
}

fn mask(n: usize, set: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &x in set {
        m[x] = true;
    }
    m
}

/// `|S^du(x)|` in the cycle-free graph.
pub fn du_count(g_nc: &SparseGraph, ord: &DegreeOrder, x: usize) -> Result<usize> {
    g_nc.check_vertex(x)?;
    let top = crate::pruning::top_neighbors(g_nc, ord);
    Ok(g_nc
        .neighbors(x)
        .iter()
        .filter(|&&y| ord.precedes(y, x) && top[y].is_some_and(|t| ord.precedes(x, t)))
        .count())
}

/// `D^{nc+}_x`: neighbours above `x` that survive cycle removal.
pub fn ncplus_count(g_nc: &SparseGraph, ord: &DegreeOrder, x: usize) -> Result<usize> {
    g_nc.check_vertex(x)?;
    Ok(g_nc.neighbors(x).iter().filter(|&&y| ord.precedes(x, y)).count())
}

pub fn p1_statistic(g_nc: &SparseGraph, ord: &DegreeOrder, v_high: &[usize], x1: usize) -> Result<f64> {
    g_nc.check_vertex(x1)?;
    Ok(DuIndex::new(g_nc, ord).p1(ord, &mask(g_nc.n(), v_high), x1))
}

pub fn p2_statistic(g_nc: &SparseGraph, ord: &DegreeOrder, v_mid: &[usize], x1: usize) -> Result<f64> {
    g_nc.check_vertex(x1)?;
    Ok(DuIndex::new(g_nc, ord).p2(&mask(g_nc.n(), v_mid), x1))
}

/// `(1/D^p_x) Σ_{y child of x} D^{p−}_y`.
pub fn descending_ball_ratio(forest: &PrunedForest, x: usize) -> Result<f64> {
    if x >= forest.n() {
        return Err(Error::InvalidVertex { vertex: x, n: forest.n() });
    }
    let dp = forest.d_p(x);
    if dp == 0 {
        return Err(Error::ZeroDegree(x));
    }
    let sum: usize = forest.children(x).iter().map(|&y| forest.d_p_minus(y)).sum();
    Ok(sum as f64 / dp as f64)
}

/// `D̂⁺_x = #{y ~ x : w_y ≥ w_x}`.
pub fn hat_dplus(g: &SparseGraph, ws: &WeightSequence, x: usize) -> Result<usize> {
    g.check_vertex(x)?;
    let wx = ws.weight(x);
    Ok(g.neighbors(x).iter().filter(|&&y| ws.weight(y) >= wx).count())
}

/// Values of one functional against its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaStat {
    pub name: String,
    /// `(vertex, value)`.
    pub values: Vec<(usize, f64)>,
    pub bound: f64,
    /// Whether a value must stay at most (`true`) or at least (`false`) the bound.
    pub upper: bool,
    pub exceed_count: usize,
}

impl LemmaStat {
    fn new(name: &str, values: Vec<(usize, f64)>, bound: f64, upper: bool) -> Self {
        let mut s = Self {
            name: name.to_string(),
            values,
            bound,
            upper,
            exceed_count: 0,
        };
        s.exceed_count = s.values.iter().filter(|v| s.exceeds(v.1)).count();
        s
    }

    pub fn exceeds(&self, value: f64) -> bool {
        if self.upper {
            value > self.bound
        } else {
            value < self.bound
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn exceed_fraction(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.exceed_count as f64 / self.values.len() as f64
        }
    }
}

/// Writes `stat_name,vertex,value,bound,exceeded` rows.
pub fn write_csv<W: Write>(stats: &[LemmaStat], mut out: W) -> Result<()> {
    writeln!(out, "stat_name,vertex,value,bound,exceeded")?;
    for s in stats {
        for &(x, v) in &s.values {
            writeln!(out, "{},{},{},{},{}", s.name, x, v, s.bound, u8::from(s.exceeds(v)))?;
        }
    }
    Ok(())
}

/// The sibling floor `#Sib⁻(x) ≥ D^p_{x̂}/2`, per parented high vertex. The
/// reported value is the ratio `#Sib⁻(x) / (D^p_{x̂}/2)` against the bound 1.
pub fn sibling_floor_check(forest: &PrunedForest, v_high: &[usize]) -> LemmaStat {
    let values = v_high
        .iter()
        .filter_map(|&x| {
            forest
                .parent(x)
                .map(|p| (x, forest.sib_minus(x).len() as f64 / (forest.d_p(p) as f64 / 2.0)))
        })
        .collect();
    LemmaStat::new("sibling_floor", values, 1.0, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticParams {
    pub nu: f64,
    pub delta: f64,
    pub c: f64,
}

impl DiagnosticParams {
    pub fn new(nu: f64, delta: f64) -> Self {
        Self { nu, delta, c: DEFAULT_C }
    }

    pub fn du_bound(&self, n: usize) -> f64 {
        self.c * self.nu / (1.0 - 2.0 * self.delta) * log_ratio(n)
    }

    pub fn ncplus_bound(&self, n: usize) -> f64 {
        self.c * self.nu / (1.0 - self.delta) * log_ratio(n)
    }

    pub fn p1_bound(&self, n: usize) -> f64 {
        2.0 * self.nu * log_ratio(n).powi(2)
    }

    pub fn p2_bound(&self, n: usize) -> f64 {
        2.0 * self.nu * log_ratio(n)
    }

    pub fn descending_ball_bound(&self, n: usize) -> f64 {
        3.0 * self.nu * log_ratio(n)
    }

    pub fn hat_dplus_bound(&self, n: usize) -> f64 {
        2.0 * self.nu / (1.0 - self.delta) * log_ratio(n)
    }
}

/// Inputs for [`all_stats`].
pub struct DiagnosticInput<'a> {
    pub g: &'a SparseGraph,
    pub g_nc: &'a SparseGraph,
    pub forest: &'a PrunedForest,
    pub ord: &'a DegreeOrder,
    pub ws: &'a WeightSequence,
    pub v_high: &'a [usize],
    pub v_mid: &'a [usize],
}

/// Every functional: down-up counts, `D^{nc+}` and `D̂⁺` over all vertices, `P⁽¹⁾`
/// and the descending ball over high vertices, `P⁽²⁾` over middle vertices, and the
/// sibling floor.
pub fn all_stats(inp: &DiagnosticInput<'_>, params: &DiagnosticParams) -> Result<Vec<LemmaStat>> {
    let n = inp.g.n();
    if inp.g_nc.n() != n || inp.forest.n() != n || inp.ws.n() != n {
        return Err(Error::InvalidParameter("inputs disagree on the vertex count".into()));
    }
    let idx = DuIndex::new(inp.g_nc, inp.ord);
    let high = mask(n, inp.v_high);
    let mid = mask(n, inp.v_mid);
    let every = |f: &(dyn Fn(usize) -> f64 + Sync)| -> Vec<(usize, f64)> { (0..n).into_par_iter().map(|x| (x, f(x))).collect() };
    let du: Vec<(usize, f64)> = every(&|x| idx.count(x) as f64);
    let nc: Vec<(usize, f64)> = every(&|x| inp.g_nc.neighbors(x).iter().filter(|&&y| inp.ord.precedes(x, y)).count() as f64);
    let hd: Vec<(usize, f64)> = every(&|x| {
        let wx = inp.ws.weight(x);
        inp.g.neighbors(x).iter().filter(|&&y| inp.ws.weight(y) >= wx).count() as f64
    });
    let p1: Vec<(usize, f64)> = inp.v_high.par_iter().map(|&x| (x, idx.p1(inp.ord, &high, x))).collect();
    let p2: Vec<(usize, f64)> = inp.v_mid.par_iter().map(|&x| (x, idx.p2(&mid, x))).collect();
    let ball: Vec<(usize, f64)> = inp
        .v_high
        .iter()
        .filter(|&&x| inp.forest.d_p(x) > 0)
        .map(|&x| descending_ball_ratio(inp.forest, x).map(|v| (x, v)))
        .collect::<Result<_>>()?;
    Ok(vec![
        LemmaStat::new("du_count", du, params.du_bound(n), true),
        LemmaStat::new("ncplus_count", nc, params.ncplus_bound(n), true),
        LemmaStat::new("p1", p1, params.p1_bound(n), true),
        LemmaStat::new("p2", p2, params.p2_bound(n), true),
        LemmaStat::new("descending_ball", ball, params.descending_ball_bound(n), true),
        sibling_floor_check(inp.forest, inp.v_high),
        LemmaStat::new("hat_dplus", hd, params.hat_dplus_bound(n), true),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenbasis::forest_structure;
    use crate::graph::{degree_order, fixtures::*, sample_grg};
    use crate::pruning::{prune, vertex_partition};
    use crate::weights::{make_power_law_quantile, Model, ParamCheck};
    use proptest::prelude::*;

    fn brute_du(g: &SparseGraph, ord: &DegreeOrder) -> Vec<Vec<usize>> {
        // y ∈ du(x) iff y ≺ x and some neighbour z of y satisfies z ≻ x
        (0..g.n())
            .map(|x| {
                g.neighbors(x)
                    .iter()
                    .copied()
                    .filter(|&y| ord.precedes(y, x) && g.neighbors(y).iter().any(|&z| ord.precedes(x, z)))
                    .collect()
            })
            .collect()
    }

    fn inter(a: &[usize], b: &[usize]) -> usize {
        a.iter().filter(|v| b.contains(v)).count()
    }

    fn brute_p1(du: &[Vec<usize>], ord: &DegreeOrder, high: &[usize], x1: usize) -> f64 {
        let mut t = 0usize;
        for &x2 in high {
            for &x3 in high {
                if ord.precedes(x2, x1) && ord.precedes(x2, x3) {
                    let diff: Vec<usize> = du[x2].iter().copied().filter(|v| !du[x1].contains(v)).collect();
                    t += inter(&du[x1], &du[x2]) * inter(&diff, &du[x3]);
                }
            }
        }
        t as f64
    }

    fn brute_p2(du: &[Vec<usize>], mid: &[usize], x1: usize) -> f64 {
        mid.iter().filter(|&&x2| x2 != x1).map(|&x2| inter(&du[x1], &du[x2])).sum::<usize>() as f64
    }

    #[test]
    fn g6_examples() {
        let g = g6();
        let ord = degree_order(&g);
        assert_eq!(du_count(&g, &ord, 1).unwrap(), 1);
        assert_eq!(ncplus_count(&g, &ord, 2).unwrap(), 2);
        assert_eq!(ncplus_count(&g, &ord, 0).unwrap(), 0);
        let all: Vec<usize> = (0..6).collect();
        for x in 0..6 {
            assert_eq!(p1_statistic(&g, &ord, &all, x).unwrap(), 0.0);
            assert_eq!(p2_statistic(&g, &ord, &[], x).unwrap(), 0.0);
        }
        let pr = prune(&g, &ord, 6);
        let f = forest_structure(&pr.g_p, &ord).unwrap();
        assert_eq!(descending_ball_ratio(&f, 0).unwrap(), 0.0);
        let s = sibling_floor_check(&f, &[0, 1, 2]);
        assert_eq!(s.values, vec![(2, 2.0 / 1.5)]);
        assert_eq!(s.exceed_count, 0);
    }

    #[test]
    fn star_examples() {
        let g = star9();
        let ord = degree_order(&g);
        for x in 0..10 {
            assert_eq!(du_count(&g, &ord, x).unwrap(), 0);
        }
        assert_eq!(ncplus_count(&g, &ord, 4).unwrap(), 1);
        let f = forest_structure(&g, &ord).unwrap();
        assert_eq!(descending_ball_ratio(&f, 0).unwrap(), 0.0);
        assert!(sibling_floor_check(&f, &[0]).values.is_empty());
        let lonely = forest_structure(&SparseGraph::empty(3), &degree_order(&SparseGraph::empty(3))).unwrap();
        assert_eq!(descending_ball_ratio(&lonely, 1), Err(Error::ZeroDegree(1)));
    }

    #[test]
    fn two_level_descending_ball() {
        let g = two_level_star(9, 5);
        let ord = degree_order(&g);
        let f = forest_structure(&g, &ord).unwrap();
        assert_eq!(descending_ball_ratio(&f, 0).unwrap(), 5.0);
    }

    #[test]
    fn hat_dplus_examples() {
        let g = star9();
        let ws = WeightSequence::new((0..10).map(|i| if i == 0 { 9.0 } else { 1.0 }).collect()).unwrap();
        assert_eq!(hat_dplus(&g, &ws, 0).unwrap(), 0);
        assert_eq!(hat_dplus(&g, &ws, 3).unwrap(), 1);
        let flat = WeightSequence::new(vec![2.0; 10]).unwrap();
        for x in 0..10 {
            assert_eq!(hat_dplus(&g, &flat, x).unwrap(), g.degree(x));
        }
    }

    /// Hub 0 above stars 1, 2, 3 (3 smallest of the three); vertex 5 joins 0, 1, 3 and
    /// vertex 6 joins 0, 2, 3, so `du(3) = {5, 6}` overlaps both `du(1)` and `du(2)`.
    fn overlapping_stars() -> SparseGraph {
        let mut edges = vec![(0, 5), (0, 6), (1, 5), (3, 5), (2, 6), (3, 6), (3, 18), (3, 19)];
        edges.extend((7..12).map(|l| (0, l)));
        edges.extend((12..15).map(|l| (1, l)));
        edges.extend((15..18).map(|l| (2, l)));
        SparseGraph::from_edges(20, edges).unwrap()
    }

    #[test]
    fn p1_p2_match_brute_force_on_crafted_fixture() {
        let g = overlapping_stars();
        let ord = degree_order(&g);
        let du = brute_du(&g, &ord);
        assert!(du.iter().filter(|s| !s.is_empty()).count() >= 2);
        let all: Vec<usize> = (0..g.n()).collect();
        let idx = DuIndex::new(&g, &ord);
        let high = mask(g.n(), &all);
        assert_eq!(idx.set(3), &[5, 6]);
        assert_eq!(idx.p1(&ord, &high, 1), 1.0);
        for x in 0..g.n() {
            assert_eq!(idx.set(x), du[x].as_slice());
            assert_eq!(idx.p1(&ord, &high, x), brute_p1(&du, &ord, &all, x));
            assert_eq!(idx.p2(&high, x), brute_p2(&du, &all, x));
        }
    }

    #[test]
    fn random_instances_match_brute_force() {
        let ws = make_power_law_quantile(300, 2.2, 1.5, ParamCheck::Strict).unwrap();
        for seed in 0..4 {
            let g = sample_grg(&ws, seed, Model::Grg);
            let ord = degree_order(&g);
            let pr = prune(&g, &ord, 6);
            let du = brute_du(&pr.g_nc, &ord);
            let part = vertex_partition(&g, &ws, 3.0).unwrap();
            let idx = DuIndex::new(&pr.g_nc, &ord);
            let high = mask(g.n(), &part.v_high);
            let mid = mask(g.n(), &part.v_mid);
            for x in 0..g.n() {
                assert_eq!(idx.set(x), du[x].as_slice());
                assert_eq!(idx.p1(&ord, &high, x), brute_p1(&du, &ord, &part.v_high, x));
                assert_eq!(idx.p2(&mid, x), brute_p2(&du, &part.v_mid, x));
                assert_eq!(du_count(&pr.g_nc, &ord, x).unwrap(), du[x].len());
            }
        }
    }

    #[test]
    fn report_and_csv() {
        let ws = make_power_law_quantile(2000, 2.5, 1.0, ParamCheck::Strict).unwrap();
        let g = sample_grg(&ws, 3, Model::Grg);
        let ord = degree_order(&g);
        let pr = prune(&g, &ord, 6);
        let f = forest_structure(&pr.g_p, &ord).unwrap();
        let part = vertex_partition(&g, &ws, 4.0).unwrap();
        let inp = DiagnosticInput {
            g: &g,
            g_nc: &pr.g_nc,
            forest: &f,
            ord: &ord,
            ws: &ws,
            v_high: &part.v_high,
            v_mid: &part.v_mid,
        };
        let params = DiagnosticParams::new(1.0, 0.1);
        let a = all_stats(&inp, &params).unwrap();
        let b = all_stats(&inp, &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 7);
        let mut buf = Vec::new();
        write_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("stat_name,vertex,value,bound,exceeded\n"));
        let rows = text.lines().count() - 1;
        assert_eq!(rows, a.iter().map(|s| s.values.len()).sum::<usize>());
        let du = &a[0];
        assert!((du.bound - 3.0 / 0.8 * log_ratio(2000)).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn pure_and_brute_force_equal(edges in proptest::collection::vec((0usize..25, 0usize..25), 0..70)) {
            let g = SparseGraph::from_edges(25, edges.into_iter().filter(|(a, b)| a != b)).unwrap();
            let ord = degree_order(&g);
            let du = brute_du(&g, &ord);
            let idx = DuIndex::new(&g, &ord);
            let hi: Vec<usize> = (0..25).filter(|&x| g.degree(x) >= 3).collect();
            let md: Vec<usize> = (0..25).filter(|&x| g.degree(x) == 2).collect();
            let (hm, mm) = (mask(25, &hi), mask(25, &md));
            for x in 0..25 {
                prop_assert_eq!(idx.p1(&ord, &hm, x), brute_p1(&du, &ord, &hi, x));
                prop_assert_eq!(idx.p2(&mm, x), brute_p2(&du, &md, x));
                prop_assert_eq!(ncplus_count(&g, &ord, x).unwrap(), g.neighbors(x).iter().filter(|&&y| ord.precedes(x, y)).count());
            }
        }
    }
}
