//! Spectral statistics of sampled graphs: resonant sets, semilocalization mass,
//! eigenvalue–degree matching, localization on isolated vertices and norms of
//! the error operators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigenbasis::{projector_apply, Projection, PseudoEigenbasis, Sign};
use crate::error::{Error, Result};
use crate::graph::{DegreeOrder, SparseGraph};
use crate::linalg::{self, dot, FnOperator};
use crate::pruning::log_ratio;

pub use crate::linalg::{extremal_eigs, operator_norm, EigenMethod, EigenPair, SpectralResult};

pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonantFlavor {
    /// Uses the degrees `D_x` of the sampled graph.
    Original,
    /// Uses the pruned child counts `D^{p−}_x`.
    Pruned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonantSet {
    pub lambda: f64,
    pub eta: f64,
    pub members: Vec<usize>,
    pub flavor: ResonantFlavor,
}

impl ResonantSet {
    pub fn contains(&self, x: usize) -> bool {
        self.members.binary_search(&x).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_subset_of(&self, other: &ResonantSet) -> bool {
        self.members.iter().all(|&x| other.contains(x))
    }
}

/// `{x : |√deg_x − λ| ≤ η}`.
pub fn resonant_set(degrees: &[usize], lambda: f64, eta: f64, flavor: ResonantFlavor) -> Result<ResonantSet> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("eta = {eta} must be positive")));
    }
    let members = (0..degrees.len())
        .filter(|&x| ((degrees[x] as f64).sqrt() - lambda).abs() <= eta)
        .collect();
    Ok(ResonantSet {
        lambda,
        eta,
        members,
        flavor,
    })
}

/// `Σ_{x ∈ W} ⟨q, u_σ(x)⟩²` over basis members in `W`.
pub fn semiloc_mass(q: &[f64], basis: &PseudoEigenbasis, w: &ResonantSet, sigma: Sign) -> f64 {
    basis
        .members
        .iter()
        .filter(|m| m.sign == sigma && w.contains(m.vertex))
        .map(|m| m.vector.dot_dense(q).powi(2))
        .sum()
}

pub fn ipr(q: &[f64]) -> f64 {
    q.iter().map(|v| v.powi(4)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Top,
    Bottom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRow {
    pub side: Side,
    /// 1-based position from the respective end of the spectrum.
    pub index: usize,
    pub lambda: f64,
    /// `√D_{π(index)}`.
    pub sqrt_degree: f64,
    /// `|λ ∓ √D_{π(index)}|`.
    pub diff: f64,
    pub normalized: f64,
}

/// Pairs the `i`-th largest eigenvalue with `√D_{π(i)}`, and the `i`-th smallest with
/// `−√D_{π(i)}`, for eigenvalues beyond `threshold` in absolute value.
pub fn eigenvalue_degree_match(spec: &SpectralResult, ord: &DegreeOrder, threshold: f64) -> Vec<MatchRow> {
    let scale = log_ratio(ord.n()).sqrt();
    let row = |side: Side, i: usize, lambda: f64| {
        let sd = (ord.degree(ord.pi()[i]) as f64).sqrt();
        let diff = match side {
            Side::Top => (lambda - sd).abs(),
            Side::Bottom => (lambda + sd).abs(),
        };
        MatchRow {
            side,
            index: i + 1,
            lambda,
            sqrt_degree: sd,
            diff,
            normalized: diff / scale,
        }
    };
    let mut rows: Vec<MatchRow> = spec
        .top
        .iter()
        .enumerate()
        .filter(|(i, p)| p.value > threshold && *i < ord.n())
        .map(|(i, p)| row(Side::Top, i, p.value))
        .collect();
    rows.extend(
        spec.bottom
            .iter()
            .enumerate()
            .filter(|(i, p)| p.value < -threshold && *i < ord.n())
            .map(|(i, p)| row(Side::Bottom, i, p.value)),
    );
    rows
}

/// The isolated set: `d_x ≥ (4ν/9) log n` and, for every `y ≠ x`,
/// `|d_x − d_y| ≥ max(4√(ν log n d_x) + 4√(ν log n d_y), 16η²)`.
pub fn isolated_vertices(d: &[f64], nu: f64, eta: f64, n: usize) -> Vec<usize> {
    let c = nu * (n as f64).ln();
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let gap16 = 16.0 * eta * eta;
    let ok = |dx: f64, dy: f64| (dx - dy).abs() >= (4.0 * (c * dx).sqrt() + 4.0 * (c * dy).sqrt()).max(gap16);
    // For y below x, |d_x − d_y| − 4√(c d_y) decreases in d_y, so the nearest lower
    // value is the worst case. For y above x the same quantity is convex in d_y with
    // its minimum at d_y = 4c: above max(d_x, 4c) the nearest value is the worst, and
    // values between d_x and 4c are all checked.
    let mut out: Vec<usize> = (0..sorted.len())
        .into_par_iter()
        .filter_map(|k| {
            let dx = sorted[k];
            if dx < 4.0 * c / 9.0 {
                return None;
            }
            if k > 0 && !ok(dx, sorted[k - 1]) {
                return None;
            }
            let mut j = k + 1;
            while j < sorted.len() {
                if !ok(dx, sorted[j]) {
                    return None;
                }
                if sorted[j] >= 4.0 * c {
                    break;
                }
                j += 1;
            }
            Some(order[k])
        })
        .collect();
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRow {
    pub index: usize,
    pub lambda: f64,
    pub eta: f64,
    pub resonant_size: usize,
    /// Whether the resonant set meets the isolated set.
    pub hits_isolated: bool,
    pub singleton: bool,
    /// Isolated vertex with the largest `⟨q, u₊(x)⟩²`.
    pub best_vertex: Option<usize>,
    pub mass: f64,
}

/// For every top eigenpair above `threshold`, the best single-vertex mass over the
/// isolated set, with `η` fixed.
pub fn localization_check(
    spec: &SpectralResult,
    basis: &PseudoEigenbasis,
    vstar: &[usize],
    degrees: &[usize],
    eta: f64,
    threshold: f64,
) -> Result<Vec<LocalizationRow>> {
    let mut rows = Vec::new();
    for (i, p) in spec.top.iter().enumerate() {
        if p.value <= threshold {
            continue;
        }
        let w = resonant_set(degrees, p.value, eta, ResonantFlavor::Original)?;
        let hits = w.members.iter().any(|x| vstar.binary_search(x).is_ok());
        let mut best: Option<(usize, f64)> = None;
        for m in basis.members.iter().filter(|m| m.sign == Sign::Plus) {
            if vstar.binary_search(&m.vertex).is_ok() {
                let v = m.vector.dot_dense(&p.vector).powi(2);
                if best.is_none_or(|b| v > b.1) {
                    best = Some((m.vertex, v));
                }
            }
        }
        rows.push(LocalizationRow {
            index: i + 1,
            lambda: p.value,
            eta,
            resonant_size: w.len(),
            hits_isolated: hits,
            singleton: w.len() == 1,
            best_vertex: best.map(|b| b.0),
            mass: best.map_or(0.0, |b| b.1),
        });
    }
    Ok(rows)
}

/// `‖A − A^p‖`.
pub fn pruning_error_norm(g: &SparseGraph, g_p: &SparseGraph) -> Result<f64> {
    if !g_p.is_subgraph_of(g) {
        return Err(Error::InvalidParameter("pruned graph is not a subgraph".into()));
    }
    operator_norm(&g.edge_difference(g_p), DEFAULT_TOL, 0)
}

/// `‖Π̄ A^p Π̄‖`.
pub fn residual_block_norm(g_p: &SparseGraph, basis: &PseudoEigenbasis) -> Result<f64> {
    let op = FnOperator::new(g_p.n(), |x: &[f64], y: &mut [f64]| {
        let bar = projector_apply(basis, x, Projection::PiBar);
        let mut a = vec![0.0; x.len()];
        g_p.matvec(&bar, &mut a);
        y.copy_from_slice(&projector_apply(basis, &a, Projection::PiBar));
    });
    operator_norm(&op, DEFAULT_TOL, 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestrictedNorm {
    pub norm: f64,
    pub max_degree: usize,
    /// `2√max_degree`.
    pub bound: f64,
    pub within: bool,
}

/// Norm of the forest restricted to the complement of `v_high`, with the tree bound.
pub fn forest_restricted_norm(g_p: &SparseGraph, v_high: &[usize]) -> Result<RestrictedNorm> {
    let mut high = vec![false; g_p.n()];
    for &x in v_high {
        g_p.check_vertex(x)?;
        high[x] = true;
    }
    let rest = g_p.filter_edges(|u, v| !high[u] && !high[v]);
    let norm = operator_norm(&rest, DEFAULT_TOL, 2)?;
    let max_degree = rest.max_degree();
    let bound = 2.0 * (max_degree as f64).sqrt();
    Ok(RestrictedNorm {
        norm,
        max_degree,
        bound,
        within: norm <= bound * (1.0 + 1e-9) + 1e-12,
    })
}

/// `2√(max restricted degree)`: the eigenvalue cut for degree matching.
pub fn match_threshold(g_p: &SparseGraph, v_high: &[usize]) -> f64 {
    let mut high = vec![false; g_p.n()];
    for &x in v_high {
        high[x] = true;
    }
    let d = (0..g_p.n())
        .filter(|&x| !high[x])
        .map(|x| g_p.neighbors(x).iter().filter(|&&y| !high[y]).count())
        .max()
        .unwrap_or(0);
    2.0 * (d as f64).sqrt()
}

/// `‖(Id − Π_W) q‖²` where `Π_W` projects on `u_σ(x)`, `x ∈ W`.
pub fn complement_mass(q: &[f64], basis: &PseudoEigenbasis, w: &ResonantSet, sigma: Sign) -> f64 {
    let mut r = q.to_vec();
    for m in basis.members.iter().filter(|m| m.sign == sigma && w.contains(m.vertex)) {
        let c = m.vector.dot_dense(q);
        m.vector.axpy_into(-c, &mut r);
    }
    dot(&r, &r)
}

/// Largest `|λ|` among computed pairs, for sanity checks against `‖A‖`.
pub fn spectral_radius(spec: &SpectralResult) -> f64 {
    spec.top.iter().chain(&spec.bottom).map(|p| p.value.abs()).fold(0.0, f64::max)
}

pub fn adjacency_norm(g: &SparseGraph) -> Result<f64> {
    linalg::operator_norm(g, DEFAULT_TOL, 3)
}
