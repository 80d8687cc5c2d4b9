//! Weight sequences, empirical moments and degree concentration envelopes.

use std::collections::BTreeMap;
use std::path::Path;

use rand_distr::{Distribution, Exp, Pareto};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_DELTA: f64 = 0.1;
/// Largest `n` for which [`expected_degrees`] runs the quadratic exact sum by default.
pub const DEFAULT_EXACT_BUDGET: usize = 20_000;

/// Strictly positive vertex weights together with the exponents `epsilon` and `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSequence {
    w: Vec<f64>,
    epsilon: f64,
    delta: f64,
    total: f64,
    /// Free-form notes (boundary-regime warnings, convention flags).
    pub notes: Vec<String>,
}

impl WeightSequence {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 weights, got {}",
                w.len()
            )));
        }
        if let Some((i, v)) = w.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "weight {i} = {v} is not a strictly positive finite real"
            )));
        }
        let total = w.iter().sum();
        Ok(Self {
            w,
            epsilon: DEFAULT_EPSILON,
            delta: DEFAULT_DELTA,
            total,
            notes: Vec::new(),
        })
    }

    pub fn with_exponents(mut self, epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::InvalidParameter(format!("epsilon = {epsilon} not in (0, 1/2)")));
        }
        if !(delta > 0.0 && delta < 1.0 / 3.0) {
            return Err(Error::InvalidParameter(format!("delta = {delta} not in (0, 1/3)")));
        }
        self.epsilon = epsilon;
        self.delta = delta;
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.w.len()
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    #[inline]
    pub fn weight(&self, x: usize) -> f64 {
        self.w[x]
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `sum_z w_z`.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn max_weight(&self) -> f64 {
        self.w.iter().copied().fold(f64::MIN, f64::max)
    }

    /// True when `epsilon` and `delta` are still the library defaults.
    pub fn uses_default_exponents(&self) -> bool {
        self.epsilon == DEFAULT_EPSILON && self.delta == DEFAULT_DELTA
    }

    fn check_vertex(&self, x: usize) -> Result<()> {
        if x >= self.n() {
            Err(Error::InvalidVertex { vertex: x, n: self.n() })
        } else {
            Ok(())
        }
    }

    /// One decimal per line, shortest round-trip formatting.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.n() * 20);
        for w in &self.w {
            s.push_str(&format!("{w}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let w = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .enumerate()
            .map(|(i, l)| {
                l.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(w)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// How out-of-range distribution parameters are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParamCheck {
    #[default]
    Strict,
    /// Accept the parameter and record a note on the sequence.
    WarnOnly,
}

/// Power-law quantile weights `w_x = c ((n+1)/x)^{1/alpha}`, `x = 1..n`.
pub fn make_power_law_quantile(n: usize, alpha: f64, c: f64, check: ParamCheck) -> Result<WeightSequence> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n = {n} < 2")));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("c = {c} must be positive")));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must be positive")));
    }
    let mut note = None;
    if alpha <= 2.0 {
        match check {
            ParamCheck::Strict => {
                return Err(Error::InvalidParameter(format!(
                    "power-law exponent alpha = {alpha} must exceed 2"
                )))
            }
            ParamCheck::WarnOnly => note = Some(format!("alpha = {alpha} <= 2: outside the power-law regime")),
        }
    }
    let np1 = (n + 1) as f64;
    let w = (1..=n).map(|x| c * (np1 / x as f64).powf(1.0 / alpha)).collect();
    let mut ws = WeightSequence::new(w)?;
    ws.notes.extend(note);
    Ok(ws)
}

/// Exponential quantile weights `w_x = log((n+1)/x) / alpha`, `x = 1..n`.
pub fn make_exponential_quantile(n: usize, alpha: f64) -> Result<WeightSequence> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n = {n} < 2")));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must be positive")));
    }
    let np1 = (n + 1) as f64;
    let w = (1..=n).map(|x| (np1 / x as f64).ln() / alpha).collect();
    WeightSequence::new(w)
}

/// Law of i.i.d. weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightLaw {
    /// `mu([t, inf)) = (c/t)^alpha ∧ 1`.
    PowerLaw { alpha: f64, c: f64 },
    /// Exponential law with rate `alpha`.
    Exponential { alpha: f64 },
}

/// `n` independent draws from `law`, deterministic in `seed`.
pub fn make_iid(n: usize, law: WeightLaw, seed: u64) -> Result<WeightSequence> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n = {n} < 2")));
    }
    let mut stream = rng::keyed_stream(seed, 0x5745_4947, &[n as u64]);
    let w: Vec<f64> = match law {
        WeightLaw::PowerLaw { alpha, c } => {
            if !(alpha > 2.0) || !(c > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "power law needs alpha > 2 and c > 0 (alpha = {alpha}, c = {c})"
                )));
            }
            let d = Pareto::new(c, alpha).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            (0..n).map(|_| d.sample(&mut stream)).collect()
        }
        WeightLaw::Exponential { alpha } => {
            if !(alpha > 0.0) {
                return Err(Error::InvalidParameter(format!("alpha = {alpha} must be positive")));
            }
            let d = Exp::new(alpha).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            (0..n)
                .map(|_| loop {
                    let v: f64 = d.sample(&mut stream);
                    if v > 0.0 {
                        break v;
                    }
                })
                .collect()
        }
    };
    WeightSequence::new(w)
}

/// `(1/n) sum_x w_x^k`.
pub fn empirical_moment(ws: &WeightSequence, k: u32) -> f64 {
    let s: f64 = ws.w.iter().map(|w| w.powi(k as i32)).sum();
    s / ws.n() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMoments {
    pub m1: f64,
    pub m2: f64,
    pub mk: BTreeMap<u32, f64>,
}

pub fn empirical_moments(ws: &WeightSequence, orders: &[u32]) -> EmpiricalMoments {
    EmpiricalMoments {
        m1: empirical_moment(ws, 1),
        m2: empirical_moment(ws, 2),
        mk: orders.iter().map(|&k| (k, empirical_moment(ws, k))).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `w_x <= n^{1/2 - epsilon}` for every x.
    pub max_weight_ok: bool,
    /// `m1 >= n^{-epsilon}`.
    pub m1_ok: bool,
    /// `m2 / m1`.
    pub ratio: f64,
    /// `log(m2/m1) / log log n`; absent when `n < 3`.
    pub ratio_log_exponent: Option<f64>,
    pub epsilon: f64,
    pub delta: f64,
    pub default_exponents: bool,
}

pub fn check_assumptions(ws: &WeightSequence) -> AssumptionReport {
    let n = ws.n() as f64;
    let m1 = empirical_moment(ws, 1);
    let m2 = empirical_moment(ws, 2);
    let cap = n.powf(0.5 - ws.epsilon);
    let ratio = m2 / m1;
    AssumptionReport {
        max_weight_ok: ws.w.iter().all(|&w| w <= cap),
        m1_ok: m1 >= n.powf(-ws.epsilon),
        ratio,
        ratio_log_exponent: (ws.n() >= 3).then(|| ratio.ln() / n.ln().ln()),
        epsilon: ws.epsilon,
        delta: ws.delta,
        default_exponents: ws.uses_default_exponents(),
    }
}

/// Random graph law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// `p_xy = w_x w_y / (sum_z w_z + w_x w_y)`.
    #[default]
    Grg,
    /// `p_xy = min(w_x w_y / sum_z w_z, 1)`.
    ChungLu,
}

impl std::str::FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grg" => Ok(Model::Grg),
            "chung_lu" | "chung-lu" | "cl" => Ok(Model::ChungLu),
            other => Err(Error::InvalidParameter(format!("unknown model {other}"))),
        }
    }
}

/// Edge probability from a weight product and the weight total.
#[inline]
pub(crate) fn pair_probability(product: f64, total: f64, model: Model) -> f64 {
    match model {
        Model::Grg => product / (total + product),
        Model::ChungLu => (product / total).min(1.0),
    }
}

pub fn edge_probability(ws: &WeightSequence, x: usize, y: usize, model: Model) -> Result<f64> {
    ws.check_vertex(x)?;
    ws.check_vertex(y)?;
    if x == y {
        return Err(Error::InvalidParameter(format!("edge probability needs x != y (got {x})")));
    }
    Ok(pair_probability(ws.w[x] * ws.w[y], ws.total, model))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegreeMode {
    /// `d_x = sum_{y != x} p_xy` (quadratic).
    Exact,
    /// `d_x = w_x (1 - w_x / (m1 n))`.
    Approx,
}

/// Expected degrees under the GRG law. `budget` bounds `n` in exact mode.
pub fn expected_degrees(ws: &WeightSequence, mode: DegreeMode, budget: usize) -> Result<Vec<f64>> {
    let total = ws.total;
    match mode {
        DegreeMode::Exact => {
            if ws.n() > budget {
                return Err(Error::BudgetExceeded { n: ws.n(), budget });
            }
            Ok((0..ws.n())
                .into_par_iter()
                .map(|x| {
                    let wx = ws.w[x];
                    ws.w
                        .iter()
                        .enumerate()
                        .filter(|&(y, _)| y != x)
                        .map(|(_, &wy)| pair_probability(wx * wy, total, Model::Grg))
                        .sum()
                })
                .collect())
        }
        DegreeMode::Approx => Ok(ws.w.iter().map(|&w| w * (1.0 - w / total)).collect()),
    }
}

/// Bennett-type two-sided envelope `(lower, upper)` for a degree with mean `d`.
pub fn bennett_envelope(d: f64, nu: f64, n: usize) -> (f64, f64) {
    let logn = (n as f64).ln();
    let lower = d - (2.0 * nu * d * logn).sqrt();
    let upper = d + 2.0 * (nu * logn * d.max(4.0 * nu / 9.0 * logn)).sqrt();
    (lower, upper)
}
