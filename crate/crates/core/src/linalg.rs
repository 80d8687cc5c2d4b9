//! Matrix-free symmetric operators, sparse vectors and matrices, and the
//! eigen/norm solvers used on them.
//!
//! Reductions over long vectors are summed in fixed-size chunks combined in
//! index order, so results do not depend on the number of worker threads.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::rng;

const CHUNK: usize = 4096;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= CHUNK {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    partial.iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi += alpha * xi);
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    x.par_iter_mut().for_each(|v| *v *= alpha);
}

/// Normalizes in place and returns the previous norm.
pub fn normalize(x: &mut [f64]) -> f64 {
    let nrm = norm(x);
    if nrm > 0.0 {
        scale(1.0 / nrm, x);
    }
    nrm
}

/// Deterministic Gaussian start vector.
pub fn random_unit(n: usize, seed: u64, tag: u64) -> Vec<f64> {
    let mut s = rng::keyed_stream(seed, 0x4c41_4e43, &[tag, n as u64]);
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            let d: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut s);
            d
        })
        .collect();
    if normalize(&mut v) == 0.0 {
        v[s.random_range(0..n)] = 1.0;
    }
    v
}

/// Square operator given by its action.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for SparseGraph {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y);
    }
}

/// Operator defined by a closure.
pub struct FnOperator<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> FnOperator<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVec {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseVec {
    /// Sums duplicate indices and drops exact zeros.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut idx: Vec<usize> = Vec::with_capacity(pairs.len());
        let mut val: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if idx.last() == Some(&i) {
                *val.last_mut().unwrap() += v;
            } else {
                idx.push(i);
                val.push(v);
            }
        }
        let (idx, val) = idx.into_iter().zip(val).filter(|(_, v)| *v != 0.0).unzip();
        Self { idx, val }
    }

    pub fn unit(i: usize) -> Self {
        Self {
            idx: vec![i],
            val: vec![1.0],
        }
    }

    /// `scale · 1_S`.
    pub fn indicator(set: &[usize], scale: f64) -> Self {
        Self::from_pairs(set.iter().map(|&i| (i, scale)).collect())
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx.iter().copied().zip(self.val.iter().copied())
    }

    pub fn get(&self, i: usize) -> f64 {
        self.idx.binary_search(&i).map(|p| self.val[p]).unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.val.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot_dense(&self, x: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * x[i]).sum()
    }

    pub fn dot(&self, other: &SparseVec) -> f64 {
        let (mut a, mut b, mut s) = (0, 0, 0.0);
        while a < self.idx.len() && b < other.idx.len() {
            match self.idx[a].cmp(&other.idx[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    s += self.val[a] * other.val[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        s
    }

    /// `y += alpha · self`.
    pub fn axpy_into(&self, alpha: f64, y: &mut [f64]) {
        for (i, v) in self.iter() {
            y[i] += alpha * v;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            idx: self.idx.clone(),
            val: self.val.iter().map(|v| v * alpha).collect(),
        }
    }

    /// `self + alpha · other`.
    pub fn add(&self, alpha: f64, other: &SparseVec) -> Self {
        let mut pairs: Vec<(usize, f64)> = self.iter().collect();
        pairs.extend(other.iter().map(|(i, v)| (i, alpha * v)));
        Self::from_pairs(pairs)
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut d = vec![0.0; n];
        self.axpy_into(1.0, &mut d);
        d
    }

    pub fn max_abs_diff(&self, other: &SparseVec) -> f64 {
        self.add(-1.0, other).val.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn support(&self) -> &[usize] {
        &self.idx
    }
}

/// `A · v` for a graph adjacency and a sparse vector.
pub fn graph_apply_sparse(g: &SparseGraph, v: &SparseVec) -> SparseVec {
    let mut pairs = Vec::new();
    for (i, a) in v.iter() {
        pairs.extend(g.neighbors(i).iter().map(|&j| (j, a)));
    }
    SparseVec::from_pairs(pairs)
}

/// General square sparse matrix in CSR form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicate entries are summed.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut offsets = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Self { n, offsets, cols, vals }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(r, yr)| {
            let (a, b) = (self.offsets[r], self.offsets[r + 1]);
            *yr = self.cols[a..b].iter().zip(&self.vals[a..b]).map(|(&c, v)| v * x[c]).sum();
        });
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.n {
            for p in self.offsets[r]..self.offsets[r + 1] {
                t.push((self.cols[p], r, self.vals[p]));
            }
        }
        Self::from_triplets(self.n, t)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for p in self.offsets[r]..self.offsets[r + 1] {
                m[(r, self.cols[p])] += self.vals[p];
            }
        }
        m
    }
}

/// Dense matrix of a symmetric operator, built column by column.
pub fn to_dense<O: LinearOperator + ?Sized>(op: &O) -> DMatrix<f64> {
    let n = op.dim();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let mut y = vec![0.0; n];
            op.apply(&e, &mut y);
            y
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| cols[j][i])
}

pub const DEFAULT_NORM_MAX_ITER: usize = 20_000;

/// `‖op‖` for self-adjoint `op`: the largest eigenvalue magnitude, by Lanczos.
pub fn operator_norm<O: LinearOperator + ?Sized>(op: &O, tol: f64, seed: u64) -> Result<f64> {
    if op.dim() == 0 {
        return Ok(0.0);
    }
    let spec = extremal_eigs(op, 1, tol, seed, EigenMethod::Lanczos)?;
    Ok(spec.top[0].value.abs().max(spec.bottom[0].value.abs()))
}

/// `‖B‖` from the actions of `B` and `B*`, by power iteration on `B*B`.
pub fn operator_norm_general<F, G>(n: usize, apply: F, apply_t: G, tol: f64, seed: u64) -> Result<f64>
where
    F: Fn(&[f64], &mut [f64]),
    G: Fn(&[f64], &mut [f64]),
{
    if n == 0 {
        return Ok(0.0);
    }
    let mut v = random_unit(n, seed, 0x4e4f_524d);
    let mut bv = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut last = f64::NAN;
    let mut residual = f64::INFINITY;
    for it in 0..DEFAULT_NORM_MAX_ITER {
        apply(&v, &mut bv);
        apply_t(&bv, &mut w);
        let rho = dot(&v, &w);
        if rho <= 0.0 || !rho.is_finite() {
            if norm(&w) == 0.0 {
                return Ok(0.0);
            }
        }
        // residual of the Rayleigh pair for B*B
        let r2: f64 = w.iter().zip(&v).map(|(a, b)| (a - rho * b).powi(2)).sum();
        residual = r2.sqrt();
        let wn = norm(&w);
        if wn == 0.0 {
            return Ok(0.0);
        }
        if residual <= tol * rho.abs() || (it > 10 && (rho - last).abs() <= 8.0 * f64::EPSILON * rho) {
            return Ok(rho.max(0.0).sqrt());
        }
        last = rho;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wn;
        }
    }
    Err(Error::NoConvergence {
        iterations: DEFAULT_NORM_MAX_ITER,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    /// Dense up to [`DENSE_MAX`], Lanczos above.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

pub const DENSE_MAX: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    /// `‖A v − λ v‖`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    /// Largest eigenpairs, descending.
    pub top: Vec<EigenPair>,
    /// Smallest eigenpairs, ascending.
    pub bottom: Vec<EigenPair>,
    /// Whole spectrum, descending (dense path only).
    pub all_values: Option<Vec<f64>>,
    pub method: EigenMethod,
}

impl SpectralResult {
    /// Top values followed by bottom values, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.top.iter().map(|p| p.value).collect();
        v.extend(self.bottom.iter().rev().map(|p| p.value));
        v
    }

    pub fn max_residual(&self) -> f64 {
        self.top
            .iter()
            .chain(&self.bottom)
            .map(|p| p.residual)
            .fold(0.0, f64::max)
    }
}

fn residual_of<O: LinearOperator + ?Sized>(op: &O, value: f64, v: &[f64]) -> f64 {
    let mut av = vec![0.0; v.len()];
    op.apply(v, &mut av);
    av.iter().zip(v).map(|(a, b)| (a - value * b).powi(2)).sum::<f64>().sqrt()
}

/// Fixes the sign of an eigenvector: its largest-magnitude entry (first on ties) is positive.
pub fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 0..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&b| b < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// The `k` largest and `k` smallest eigenpairs of a self-adjoint operator.
pub fn extremal_eigs<O: LinearOperator + ?Sized>(
    op: &O,
    k: usize,
    tol: f64,
    seed: u64,
    method: EigenMethod,
) -> Result<SpectralResult> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} not in 1..={n}")));
    }
    let dense = match method {
        EigenMethod::Dense => true,
        EigenMethod::Lanczos => 2 * k > n,
        EigenMethod::Auto => n <= DENSE_MAX || 2 * k > n,
    };
    if dense {
        dense_eigs(op, k)
    } else {
        lanczos_eigs(op, k, tol, seed)
    }
}

fn dense_eigs<O: LinearOperator + ?Sized>(op: &O, k: usize) -> Result<SpectralResult> {
    let n = op.dim();
    let m = to_dense(op);
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let pair = |i: usize| {
        let mut vector: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        canonical_sign(&mut vector);
        let value = eig.eigenvalues[i];
        let residual = residual_of(op, value, &vector);
        EigenPair { value, vector, residual }
    };
    let top = order[..k].iter().map(|&i| pair(i)).collect();
    let bottom = order.iter().rev().take(k).map(|&i| pair(i)).collect();
    Ok(SpectralResult {
        top,
        bottom,
        all_values: Some(order.iter().map(|&i| eig.eigenvalues[i]).collect()),
        method: EigenMethod::Dense,
    })
}

/// Orthogonalizes `w` against every vector of `basis` (two passes).
fn reorthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            if c != 0.0 {
                axpy(-c, q, w);
            }
        }
    }
}

struct Cycle {
    basis: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

fn lanczos_cycle<O: LinearOperator + ?Sized>(op: &O, start: Vec<f64>, m: usize, locked: &[Vec<f64>]) -> Cycle {
    let n = op.dim();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    let mut q = start;
    reorthogonalize(&mut q, locked);
    normalize(&mut q);
    let mut w = vec![0.0; n];
    for j in 0..m {
        op.apply(&q, &mut w);
        let a = dot(&q, &w);
        alpha.push(a);
        basis.push(q);
        reorthogonalize(&mut w, locked);
        reorthogonalize(&mut w, &basis);
        let b = norm(&w);
        beta.push(b);
        let scale_ref = alpha.iter().map(|x| x.abs()).fold(1.0, f64::max);
        if b <= 1e-12 * scale_ref || j + 1 == m {
            break;
        }
        q = w.iter().map(|x| x / b).collect();
    }
    Cycle { basis, alpha, beta }
}

/// Explicitly restarted Lanczos with full reorthogonalization and locking.
fn lanczos_eigs<O: LinearOperator + ?Sized>(op: &O, k: usize, tol: f64, seed: u64) -> Result<SpectralResult> {
    let n = op.dim();
    let max_restarts = 300;
    let mut locked_vecs: Vec<Vec<f64>> = Vec::new();
    let mut top: Vec<(f64, usize)> = Vec::new();
    let mut bottom: Vec<(f64, usize)> = Vec::new();
    let mut start = random_unit(n, seed, 0);
    let mut last_residual = f64::INFINITY;
    let mut verified = false;
    let mut restarts = 0;
    let mut norm_est: f64 = 1.0;
    while restarts < max_restarts {
        restarts += 1;
        let free = n - locked_vecs.len();
        let m = free.min((4 * k + 40).max(80));
        let cyc = lanczos_cycle(op, start.clone(), m, &locked_vecs);
        let mm = cyc.alpha.len();
        let t = DMatrix::from_fn(mm, mm, |i, j| {
            if i == j {
                cyc.alpha[i]
            } else if i + 1 == j {
                cyc.beta[i]
            } else if j + 1 == i {
                cyc.beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..mm).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let b_last = *cyc.beta.last().unwrap();
        norm_est = norm_est.max(eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let thresh = tol * norm_est;
        let res = |i: usize| (b_last * eig.eigenvectors[(mm - 1, i)]).abs();
        let ritz = |i: usize| -> Vec<f64> {
            let mut v = vec![0.0; n];
            for (j, q) in cyc.basis.iter().enumerate() {
                axpy(eig.eigenvectors[(j, i)], q, &mut v);
            }
            normalize(&mut v);
            v
        };

        if top.len() == k && bottom.len() == k {
            // Verification pass: nothing in the complement may beat the locked extremes.
            let lo_top = top.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let hi_bottom = bottom.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            let (i_max, i_min) = (order[0], order[mm - 1]);
            let mut changed = false;
            if eig.eigenvalues[i_max] > lo_top + thresh && res(i_max) <= thresh {
                let pos = top.iter().position(|p| p.0 == lo_top).unwrap();
                top.remove(pos);
                top.push((eig.eigenvalues[i_max], locked_vecs.len()));
                locked_vecs.push(ritz(i_max));
                changed = true;
            }
            if eig.eigenvalues[i_min] < hi_bottom - thresh && res(i_min) <= thresh {
                let pos = bottom.iter().position(|p| p.0 == hi_bottom).unwrap();
                bottom.remove(pos);
                bottom.push((eig.eigenvalues[i_min], locked_vecs.len()));
                locked_vecs.push(ritz(i_min));
                changed = true;
            }
            let unsettled = (eig.eigenvalues[i_max] > lo_top + thresh && res(i_max) > thresh)
                || (eig.eigenvalues[i_min] < hi_bottom - thresh && res(i_min) > thresh);
            if !changed && !unsettled {
                verified = true;
                break;
            }
            start = if unsettled {
                let mut s = ritz(i_max);
                axpy(1.0, &ritz(i_min), &mut s);
                s
            } else {
                random_unit(n, seed, restarts as u64)
            };
            continue;
        }

        let mut need_top = k - top.len();
        let mut need_bottom = k - bottom.len();
        let mut restart = vec![0.0; n];
        let mut any_unconverged = false;
        let mut lock_now: Vec<(usize, bool)> = Vec::new();
        let mut blocked_top = false;
        for &i in order.iter().take(need_top) {
            if !blocked_top && res(i) <= thresh {
                lock_now.push((i, true));
            } else {
                blocked_top = true;
                any_unconverged = true;
                axpy(1.0, &ritz(i), &mut restart);
                last_residual = res(i);
            }
        }
        let mut blocked_bottom = false;
        for &i in order.iter().rev().take(need_bottom) {
            if lock_now.iter().any(|&(j, _)| j == i) {
                continue;
            }
            if !blocked_bottom && res(i) <= thresh {
                lock_now.push((i, false));
            } else {
                blocked_bottom = true;
                any_unconverged = true;
                axpy(1.0, &ritz(i), &mut restart);
                last_residual = res(i);
            }
        }
        for (i, is_top) in lock_now {
            let idx = locked_vecs.len();
            locked_vecs.push(ritz(i));
            if is_top && need_top > 0 {
                top.push((eig.eigenvalues[i], idx));
                need_top -= 1;
            } else if need_bottom > 0 {
                bottom.push((eig.eigenvalues[i], idx));
                need_bottom -= 1;
            }
        }
        start = if any_unconverged && norm(&restart) > 0.0 {
            let noise = random_unit(n, seed, 1000 + restarts as u64);
            axpy(1e-3, &noise, &mut restart);
            restart
        } else {
            random_unit(n, seed, restarts as u64)
        };
    }
    if !verified {
        return Err(Error::NoConvergence {
            iterations: restarts,
            residual: last_residual,
        });
    }
    let finish = |mut list: Vec<(f64, usize)>, descending: bool| -> Vec<EigenPair> {
        list.sort_by(|a, b| if descending { b.0.total_cmp(&a.0) } else { a.0.total_cmp(&b.0) });
        list.into_iter()
            .map(|(_, i)| {
                let mut vector = locked_vecs[i].clone();
                canonical_sign(&mut vector);
                let mut av = vec![0.0; n];
                op.apply(&vector, &mut av);
                let value = dot(&vector, &av);
                let residual = residual_of(op, value, &vector);
                EigenPair { value, vector, residual }
            })
            .collect()
    };
    Ok(SpectralResult {
        top: finish(top, true),
        bottom: finish(bottom, false),
        all_values: None,
        method: EigenMethod::Lanczos,
    })
}
