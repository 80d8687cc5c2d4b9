//! Forest structure of the pruned graph and the localized orthonormal family
//! `u_σ(x)` built on it, together with the operators assembled from that family.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DegreeOrder, SparseGraph};
use crate::linalg::{self, CsrMatrix, FnOperator, LinearOperator, SparseVec};

/// Parent, children and smaller siblings of every vertex of a pruned forest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrunedForest {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    sib_minus: Vec<Vec<usize>>,
}

impl PrunedForest {
    pub fn n(&self) -> usize {
        self.parent.len()
    }

    pub fn parent(&self, x: usize) -> Option<usize> {
        self.parent[x]
    }

    pub fn children(&self, x: usize) -> &[usize] {
        &self.children[x]
    }

    /// Siblings smaller than `x` in the degree order.
    pub fn sib_minus(&self, x: usize) -> &[usize] {
        &self.sib_minus[x]
    }

    /// All children of the parent, `x` included; empty when `x` has no parent.
    pub fn siblings(&self, x: usize) -> &[usize] {
        self.parent[x].map(|p| self.children[p].as_slice()).unwrap_or(&[])
    }

    pub fn d_p_minus(&self, x: usize) -> usize {
        self.children[x].len()
    }

    /// Degree in the forest.
    pub fn d_p(&self, x: usize) -> usize {
        self.children[x].len() + usize::from(self.parent[x].is_some())
    }
}

/// Reads off parents (the unique larger neighbour), children and smaller siblings.
pub fn forest_structure(g_p: &SparseGraph, ord: &DegreeOrder) -> Result<PrunedForest> {
    let n = g_p.n();
    if ord.n() != n {
        return Err(Error::InvalidParameter(format!("order over {} vertices for a graph on {n}", ord.n())));
    }
    let mut parent = vec![None; n];
    let mut children = vec![Vec::new(); n];
    for x in 0..n {
        for &y in g_p.neighbors(x) {
            if ord.precedes(x, y) {
                if parent[x].is_some() {
                    return Err(Error::MultipleParents(x));
                }
                parent[x] = Some(y);
            } else {
                children[x].push(y);
            }
        }
    }
    let sib_minus = (0..n)
        .map(|x| match parent[x] {
            Some(p) => children[p].iter().copied().filter(|&y| ord.precedes(y, x)).collect(),
            None => Vec::new(),
        })
        .collect();
    Ok(PrunedForest {
        parent,
        children,
        sib_minus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn of(x: f64) -> Sign {
        if x < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }
}

fn childless(forest: &PrunedForest, x: usize) -> Result<()> {
    if forest.d_p_minus(x) == 0 {
        Err(Error::ChildlessVertex(x))
    } else {
        Ok(())
    }
}

/// `V₁(x) = 1_{children}/√D^{p−}`.
fn v1(forest: &PrunedForest, x: usize) -> SparseVec {
    let c = forest.children(x);
    if c.is_empty() {
        SparseVec::default()
    } else {
        SparseVec::indicator(c, 1.0 / (c.len() as f64).sqrt())
    }
}

/// Normalized star eigenvector `(1_x + σ V₁(x))/√2`.
pub fn star_vectors(forest: &PrunedForest, x: usize, sigma: Sign) -> Result<SparseVec> {
    childless(forest, x)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Ok(SparseVec::unit(x).scaled(h).add(sigma.value() * h, &v1(forest, x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisVariant {
    /// `(Û₀(x) + σV₁(x))/√2` with Helmert-type sibling contrasts; orthonormal.
    #[default]
    ProofDerived,
    /// `(1_x + σV₁(x) − 1_{Sib⁻}/#Sib⁻)/√Z`, normalized by the scalar `√Z` only.
    Displayed,
}

impl FromStr for BasisVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proof" | "proof_derived" => Ok(Self::ProofDerived),
            "displayed" => Ok(Self::Displayed),
            _ => Err(Error::Parse(format!("unknown basis variant {s:?}"))),
        }
    }
}

impl fmt::Display for BasisVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ProofDerived => "proof_derived",
            Self::Displayed => "displayed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub vertex: usize,
    pub sign: Sign,
    /// `Z_x = 2 + 2/#Sib⁻(x)`, or 2 when there are no smaller siblings.
    pub z: f64,
    pub d_p_minus: usize,
    pub vector: SparseVec,
}

impl Member {
    /// `σ√D^{p−}_x`.
    pub fn eigenvalue(&self) -> f64 {
        self.sign.value() * (self.d_p_minus as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoEigenbasis {
    pub n: usize,
    pub variant: BasisVariant,
    /// Ordered by vertex, `+` before `−`.
    pub members: Vec<Member>,
    /// High vertices without children; no vector is built for them.
    pub dropped_childless: Vec<usize>,
    /// High vertices with a parent but no smaller sibling. Excluded from the
    /// proof-derived family, kept in the displayed one.
    pub flagged_no_sibling: Vec<usize>,
}

impl PseudoEigenbasis {
    pub fn find(&self, x: usize, sigma: Sign) -> Option<&Member> {
        self.members.iter().find(|m| m.vertex == x && m.sign == sigma)
    }

    pub fn vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.members.iter().map(|m| m.vertex).collect();
        v.dedup();
        v
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

pub fn z_factor(forest: &PrunedForest, x: usize) -> f64 {
    match forest.sib_minus(x).len() {
        0 => 2.0,
        s => 2.0 + 2.0 / s as f64,
    }
}

fn member_vector(forest: &PrunedForest, x: usize, sigma: Sign, variant: BasisVariant) -> SparseVec {
    let sib = forest.sib_minus(x);
    let z = z_factor(forest, x);
    let s = sib.len() as f64;
    let contrast = if sib.is_empty() {
        SparseVec::unit(x)
    } else {
        SparseVec::unit(x).add(-1.0 / s, &SparseVec::indicator(sib, 1.0))
    };
    match variant {
        BasisVariant::ProofDerived => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            contrast
                .scaled((2.0 / z).sqrt() * h)
                .add(sigma.value() * h, &v1(forest, x))
        }
        BasisVariant::Displayed => contrast.add(sigma.value(), &v1(forest, x)).scaled(1.0 / z.sqrt()),
    }
}

/// The family `u_σ(x)`, `x ∈ v_high`, `σ = ±`.
pub fn pseudo_eigenvectors(forest: &PrunedForest, v_high: &[usize], variant: BasisVariant) -> PseudoEigenbasis {
    let mut verts: Vec<usize> = v_high.to_vec();
    verts.sort_unstable();
    verts.dedup();
    let dropped_childless: Vec<usize> = verts.iter().copied().filter(|&x| forest.d_p_minus(x) == 0).collect();
    let flagged_no_sibling: Vec<usize> = verts
        .iter()
        .copied()
        .filter(|&x| forest.d_p_minus(x) > 0 && forest.parent(x).is_some() && forest.sib_minus(x).is_empty())
        .collect();
    let kept: Vec<usize> = verts
        .into_iter()
        .filter(|&x| forest.d_p_minus(x) > 0)
        .filter(|x| variant == BasisVariant::Displayed || flagged_no_sibling.binary_search(x).is_err())
        .collect();
    let members = kept
        .par_iter()
        .flat_map_iter(|&x| {
            Sign::BOTH.into_iter().map(move |sigma| Member {
                vertex: x,
                sign: sigma,
                z: z_factor(forest, x),
                d_p_minus: forest.d_p_minus(x),
                vector: member_vector(forest, x, sigma, variant),
            })
        })
        .collect();
    PseudoEigenbasis {
        n: forest.n(),
        variant,
        members,
        dropped_childless,
        flagged_no_sibling,
    }
}

/// Largest entry of `|Gram − I|` over the family.
pub fn verify_orthonormal(basis: &PseudoEigenbasis) -> f64 {
    let mut touching: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, m) in basis.members.iter().enumerate() {
        for &v in m.vector.support() {
            touching.entry(v).or_default().push(i);
        }
    }
    (0..basis.members.len())
        .into_par_iter()
        .map(|i| {
            let a = &basis.members[i].vector;
            let mut others: Vec<usize> = a.support().iter().flat_map(|v| touching[v].iter().copied()).collect();
            others.sort_unstable();
            others.dedup();
            let mut worst = (a.dot(a) - 1.0).abs();
            for j in others.into_iter().filter(|&j| j != i) {
                worst = worst.max(a.dot(&basis.members[j].vector).abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// `δ_σ(x) = A^p u_σ(x) − σ√D^{p−}_x u_σ(x)`, computed directly and from the closed form.
pub fn residual_delta(
    g_p: &SparseGraph,
    forest: &PrunedForest,
    basis: &PseudoEigenbasis,
    x: usize,
    sigma: Sign,
) -> Result<(SparseVec, SparseVec)> {
    let m = basis
        .find(x, sigma)
        .ok_or_else(|| Error::InvalidParameter(format!("vertex {x} is not a member of the basis")))?;
    let s = sigma.value();
    let d = forest.d_p_minus(x) as f64;
    let numeric = linalg::graph_apply_sparse(g_p, &m.vector).add(-s * d.sqrt(), &m.vector);

    let mut pairs = Vec::new();
    for &y in forest.children(x) {
        pairs.extend(g_p.neighbors(y).iter().filter(|&&v| v != x).map(|&v| (v, s / d.sqrt())));
    }
    let sib = forest.sib_minus(x);
    if !sib.is_empty() {
        let k = sib.len() as f64;
        for &y in sib {
            pairs.extend(forest.children(y).iter().map(|&v| (v, -1.0 / k)));
            pairs.push((y, s * d.sqrt() / k));
        }
    }
    let closed = SparseVec::from_pairs(pairs).scaled(1.0 / m.z.sqrt());
    Ok((numeric, closed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    Pi,
    PiBar,
}

fn coefficients(basis: &PseudoEigenbasis, v: &[f64]) -> Vec<f64> {
    basis.members.par_iter().map(|m| m.vector.dot_dense(v)).collect()
}

/// `Π^p v` or `Π̄^p v`.
pub fn projector_apply(basis: &PseudoEigenbasis, v: &[f64], which: Projection) -> Vec<f64> {
    let c = coefficients(basis, v);
    let mut out = match which {
        Projection::Pi => vec![0.0; v.len()],
        Projection::PiBar => v.to_vec(),
    };
    let sign = if which == Projection::Pi { 1.0 } else { -1.0 };
    for (m, ci) in basis.members.iter().zip(c) {
        m.vector.axpy_into(sign * ci, &mut out);
    }
    out
}

/// The block approximation `Â = Σ σ√D^{p−} uu* + Π̄ A^p Π̄` as an operator.
pub struct BlockOperator<'a> {
    g_p: &'a SparseGraph,
    basis: &'a PseudoEigenbasis,
}

impl<'a> BlockOperator<'a> {
    pub fn new(g_p: &'a SparseGraph, basis: &'a PseudoEigenbasis) -> Self {
        Self { g_p, basis }
    }
}

impl LinearOperator for BlockOperator<'_> {
    fn dim(&self) -> usize {
        self.g_p.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let bar = projector_apply(self.basis, x, Projection::PiBar);
        let mut abar = vec![0.0; x.len()];
        self.g_p.matvec(&bar, &mut abar);
        let out = projector_apply(self.basis, &abar, Projection::PiBar);
        y.copy_from_slice(&out);
        let c = coefficients(self.basis, x);
        for (m, ci) in self.basis.members.iter().zip(c) {
            m.vector.axpy_into(m.eigenvalue() * ci, y);
        }
    }
}

pub fn block_apply(g_p: &SparseGraph, basis: &PseudoEigenbasis, v: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; v.len()];
    BlockOperator::new(g_p, basis).apply(v, &mut y);
    y
}

pub const NORM_TOL: f64 = 1e-10;

/// `‖Σ σ√D^{p−}(uu* − vv*)‖` over the members of `basis`.
pub fn uv_gap_norm(g_p: &SparseGraph, forest: &PrunedForest, basis: &PseudoEigenbasis) -> Result<f64> {
    if basis.is_empty() {
        return Ok(0.0);
    }
    let stars: Vec<SparseVec> = basis
        .members
        .iter()
        .map(|m| star_vectors(forest, m.vertex, m.sign))
        .collect::<Result<_>>()?;
    let op = FnOperator::new(g_p.n(), |x: &[f64], y: &mut [f64]| {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (m, v) in basis.members.iter().zip(&stars) {
            let l = m.eigenvalue();
            m.vector.axpy_into(l * m.vector.dot_dense(x), y);
            v.axpy_into(-l * v.dot_dense(x), y);
        }
    });
    linalg::operator_norm(&op, NORM_TOL, 0)
}

/// The four pieces of `Σ δ_σ(x) u_σ(x)*` for the displayed family, as sparse matrices.
pub fn appendix_a_operators(forest: &PrunedForest, basis: &PseudoEigenbasis) -> [CsrMatrix; 4] {
    let n = forest.n();
    let mut t: [Vec<(usize, usize, f64)>; 4] = Default::default();
    for x in basis.vertices() {
        let c = forest.children(x);
        let d = c.len() as f64;
        let a = 2.0 / z_factor(forest, x);
        for &y in c {
            for &row in forest.children(y) {
                t[0].extend(c.iter().map(|&col| (row, col, a / d)));
            }
        }
        let sib = forest.sib_minus(x);
        if sib.is_empty() {
            continue;
        }
        let s = sib.len() as f64;
        for &y in sib {
            t[1].extend(c.iter().map(|&col| (y, col, a / s)));
            t[2].extend(forest.children(y).iter().map(|&row| (row, x, -a / s)));
            for &z in sib {
                t[3].extend(forest.children(y).iter().map(|&row| (row, z, a / (s * s))));
            }
        }
    }
    t.map(|tr| CsrMatrix::from_triplets(n, tr))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppendixNorms {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    /// Whether `‖B₁‖ ≤ 1` holds on this instance.
    pub b1_within_unit: bool,
}

pub fn appendix_a_norms(forest: &PrunedForest, basis: &PseudoEigenbasis) -> Result<AppendixNorms> {
    let ops = appendix_a_operators(forest, basis);
    let mut norms = [0.0; 4];
    for (k, b) in ops.iter().enumerate() {
        let bt = b.transpose();
        norms[k] = linalg::operator_norm_general(b.n(), |x, y| b.apply(x, y), |x, y| bt.apply(x, y), NORM_TOL, k as u64)?;
    }
    Ok(AppendixNorms {
        b1: norms[0],
        b2: norms[1],
        b3: norms[2],
        b4: norms[3],
        b1_within_unit: norms[0] <= 1.0 + 1e-9,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramSchmidtFamily {
    /// `V₁(x)` for every high vertex with children.
    pub v1: Vec<(usize, SparseVec)>,
    /// `U₀(x)` in decreasing degree order; `None` when `1_x` already lies in the span.
    pub u0: Vec<(usize, Option<SparseVec>)>,
}

impl GramSchmidtFamily {
    pub fn vectors(&self) -> impl Iterator<Item = &SparseVec> {
        self.v1.iter().map(|p| &p.1).chain(self.u0.iter().filter_map(|p| p.1.as_ref()))
    }
}

/// Sequential Gram–Schmidt of `(V₁(x))` followed by `(1_x)` in decreasing order.
pub fn gram_schmidt_reference(forest: &PrunedForest, ord: &DegreeOrder, v_high: &[usize]) -> Result<GramSchmidtFamily> {
    if v_high.is_empty() {
        return Err(Error::InvalidParameter("empty high-degree set".into()));
    }
    let mut verts = v_high.to_vec();
    verts.sort_by_key(|&x| ord.rank()[x]);
    verts.dedup();
    let mut done: Vec<SparseVec> = Vec::new();
    let mut touching: HashMap<usize, Vec<usize>> = HashMap::new();
    let push = |v: SparseVec, done: &mut Vec<SparseVec>, touching: &mut HashMap<usize, Vec<usize>>| {
        for &i in v.support() {
            touching.entry(i).or_default().push(done.len());
        }
        done.push(v);
    };
    let mut fam = GramSchmidtFamily {
        v1: Vec::new(),
        u0: Vec::new(),
    };
    for &x in &verts {
        if forest.d_p_minus(x) > 0 {
            let mut w = v1(forest, x);
            for _ in 0..2 {
                w = project_out(w, &done, &touching);
            }
            let nw = w.norm();
            let w = w.scaled(1.0 / nw);
            fam.v1.push((x, w.clone()));
            push(w, &mut done, &mut touching);
        }
    }
    for &x in &verts {
        let mut w = SparseVec::unit(x);
        for _ in 0..2 {
            w = project_out(w, &done, &touching);
        }
        let nw = w.norm();
        if nw < 1e-10 {
            fam.u0.push((x, None));
        } else {
            let w = w.scaled(1.0 / nw);
            fam.u0.push((x, Some(w.clone())));
            push(w, &mut done, &mut touching);
        }
    }
    Ok(fam)
}

fn project_out(w: SparseVec, done: &[SparseVec], touching: &HashMap<usize, Vec<usize>>) -> SparseVec {
    let mut hit: Vec<usize> = w
        .support()
        .iter()
        .filter_map(|i| touching.get(i))
        .flatten()
        .copied()
        .collect();
    hit.sort_unstable();
    hit.dedup();
    let mut out = w.clone();
    for j in hit {
        let c = w.dot(&done[j]);
        out = out.add(-c, &done[j]);
    }
    out
}
