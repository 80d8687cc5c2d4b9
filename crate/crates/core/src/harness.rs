//! Experiment configuration, the end-to-end pipelines, Monte-Carlo aggregation
//! and CSV/JSON emission.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{self, SizeEstimate};
use crate::eigenbasis::{
    forest_structure, pseudo_eigenvectors, uv_gap_norm, verify_orthonormal, BasisVariant, PrunedForest,
    PseudoEigenbasis, Sign,
};
use crate::error::{Error, Result};
use crate::graph::{degree_order, sample_graph, DegreeOrder, SamplerKind, SparseGraph};
use crate::pruning::{log_ratio, prune, vertex_partition, xi_threshold, PruneResult, VertexPartition, DEFAULT_RADIUS};
use crate::spectral::{
    eigenvalue_degree_match, extremal_eigs, ipr, isolated_vertices, localization_check, match_threshold,
    pruning_error_norm, resonant_set, residual_block_norm, semiloc_mass, EigenMethod, LocalizationRow, MatchRow,
    ResonantFlavor, Side, SpectralResult, DEFAULT_TOL,
};
use crate::weights::{
    expected_degrees, make_exponential_quantile, make_iid, make_power_law_quantile, DegreeMode, Model, ParamCheck,
    WeightLaw, WeightSequence, DEFAULT_DELTA, DEFAULT_EXACT_BUDGET,
};

/// Written into every CSV row and summary.
pub const VERSION: &str = concat!("speclocal-core/", env!("CARGO_PKG_VERSION"));

/// Where the weights of an instance come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    PowerLaw {
        alpha: f64,
        #[serde(default = "one")]
        c: f64,
    },
    Exponential {
        alpha: f64,
    },
    Iid {
        law: WeightLaw,
    },
    File {
        path: String,
    },
    Explicit {
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl WeightSpec {
    /// Weights for `n` vertices; `seed` only matters for i.i.d. weights.
    /// File and explicit weights ignore `n`.
    pub fn build(&self, n: usize, seed: u64) -> Result<WeightSequence> {
        match self {
            WeightSpec::PowerLaw { alpha, c } => make_power_law_quantile(n, *alpha, *c, ParamCheck::Strict),
            WeightSpec::Exponential { alpha } => make_exponential_quantile(n, *alpha),
            WeightSpec::Iid { law } => make_iid(n, *law, seed),
            WeightSpec::File { path } => WeightSequence::read_file(path),
            WeightSpec::Explicit { values } => WeightSequence::new(values.clone()),
        }
    }

    pub fn power_law_alpha(&self) -> Option<f64> {
        match self {
            WeightSpec::PowerLaw { alpha, .. } => Some(*alpha),
            WeightSpec::Iid {
                law: WeightLaw::PowerLaw { alpha, .. },
            } => Some(*alpha),
            _ => None,
        }
    }
}

/// A fixed graph used instead of sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSpec {
    File { path: String },
    Explicit { n: usize, edges: Vec<(usize, usize)> },
}

impl GraphSpec {
    pub fn load(&self) -> Result<SparseGraph> {
        match self {
            GraphSpec::File { path } => SparseGraph::read_file(path),
            GraphSpec::Explicit { n, edges } => SparseGraph::from_edges(*n, edges.iter().copied()),
        }
    }
}

/// How `η` is chosen for an eigenvalue `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaRule {
    /// `η = f |λ|`.
    Fraction(f64),
    Absolute(f64),
}

impl Default for EtaRule {
    fn default() -> Self {
        EtaRule::Fraction(0.5)
    }
}

impl EtaRule {
    pub fn eta(&self, lambda: f64) -> f64 {
        match *self {
            EtaRule::Fraction(f) => f * lambda.abs(),
            EtaRule::Absolute(e) => e,
        }
    }
}

/// Estimator family for resonant-set sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Generic,
    Exp,
    Powerlaw,
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(Family::Generic),
            "exp" | "exponential" => Ok(Family::Exp),
            "powerlaw" | "power_law" => Ok(Family::Powerlaw),
            other => Err(Error::Parse(format!("unknown family {other}"))),
        }
    }
}

/// Leading term of the family's estimate of `E #W_{λ,η}`.
pub fn family_estimate(family: Family, ws: &WeightSequence, alpha: Option<f64>, lambda: f64, eta: f64) -> Result<SizeEstimate> {
    let need_alpha = || alpha.ok_or_else(|| Error::InvalidParameter("family estimate needs alpha".into()));
    match family {
        Family::Generic => Ok(SizeEstimate {
            leading: analytics::expected_w_generic(ws, lambda, eta)?,
            slack: 0.0,
        }),
        Family::Exp => analytics::expected_w_exponential(ws.n(), need_alpha()?, lambda, eta),
        Family::Powerlaw => analytics::expected_w_powerlaw(ws.n(), need_alpha()?, lambda, eta),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsizeSpec {
    /// `(λ, η)` pairs.
    pub pairs: Vec<(f64, f64)>,
    pub family: Family,
    /// Exponent for the family estimator, when the weight spec does not carry one.
    #[serde(default)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub weights: WeightSpec,
    #[serde(default)]
    pub model: Model,
    #[serde(default)]
    pub sampler: SamplerKind,
    #[serde(default)]
    pub graph: Option<GraphSpec>,
    #[serde(default)]
    pub n_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_r")]
    pub r: usize,
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub xi: Option<f64>,
    #[serde(default)]
    pub eta: EtaRule,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub method: EigenMethod,
    #[serde(default)]
    pub variant: BasisVariant,
    /// Also compute `‖Π̄A^pΠ̄‖` and the `u/v` gap in scaling runs.
    #[serde(default = "yes")]
    pub scaling_block_norms: bool,
    #[serde(default)]
    pub wsize: Option<WsizeSpec>,
    /// Adds wall-clock timings to reports; outputs are then no longer byte-reproducible.
    #[serde(default)]
    pub record_timings: bool,
    #[serde(default)]
    pub out_dir: Option<String>,
}

fn default_r() -> usize {
    DEFAULT_RADIUS
}
fn default_delta() -> f64 {
    DEFAULT_DELTA
}
fn default_k() -> usize {
    10
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn yes() -> bool {
    true
}

impl ExperimentConfig {
    /// A config with defaults for everything but weights, sizes and seeds.
    pub fn new(weights: WeightSpec, n_grid: Vec<usize>, seeds: Vec<u64>) -> Self {
        Self {
            weights,
            model: Model::Grg,
            sampler: SamplerKind::Skip,
            graph: None,
            n_grid,
            seeds,
            r: DEFAULT_RADIUS,
            nu: 1.0,
            delta: DEFAULT_DELTA,
            xi: None,
            eta: EtaRule::default(),
            k: default_k(),
            tol: DEFAULT_TOL,
            method: EigenMethod::Auto,
            variant: BasisVariant::ProofDerived,
            scaling_block_norms: true,
            wsize: None,
            record_timings: false,
            out_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("seed list is empty".into()));
        }
        if self.graph.is_none() && self.n_grid.is_empty() {
            return Err(Error::InvalidParameter("n grid is empty".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("n grid must be strictly ascending".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if !(self.nu > 0.0) {
            return Err(Error::InvalidParameter(format!("nu = {} must be positive", self.nu)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0 / 3.0) {
            return Err(Error::InvalidParameter(format!("delta = {} not in (0, 1/3)", self.delta)));
        }
        if let Some(xi) = self.xi {
            if !(xi > 0.0) {
                return Err(Error::InvalidParameter(format!("xi = {xi} must be positive")));
            }
        }
        match self.eta {
            EtaRule::Fraction(f) if !(f > 0.0 && f <= 0.5) => {
                return Err(Error::InvalidParameter(format!("eta fraction {f} not in (0, 1/2]")))
            }
            EtaRule::Absolute(e) if !(e > 0.0) => {
                return Err(Error::InvalidParameter(format!("eta = {e} must be positive")))
            }
            _ => {}
        }
        Ok(())
    }

    /// The `(n, seed)` runs in output order. An explicit graph gives one size.
    fn tasks(&self) -> Vec<(usize, u64)> {
        let grid = match &self.graph {
            Some(spec) => vec![spec.load().map_or(0, |g| g.n())],
            None => self.n_grid.clone(),
        };
        grid.iter()
            .flat_map(|&n| self.seeds.iter().map(move |&s| (n, s)))
            .collect()
    }

    fn xi_for(&self, n: usize) -> Result<f64> {
        match self.xi {
            Some(xi) => Ok(xi),
            None => xi_threshold(self.nu, self.delta, n),
        }
    }
}

/// Everything built from one sampled graph: pruning, partition, forest and basis.
#[derive(Debug, Clone)]
pub struct Instance {
    pub n: usize,
    pub seed: u64,
    pub ws: WeightSequence,
    pub g: SparseGraph,
    pub ord: DegreeOrder,
    pub pr: PruneResult,
    pub xi: f64,
    pub partition: VertexPartition,
    pub forest: PrunedForest,
    pub basis: PseudoEigenbasis,
}

impl Instance {
    pub fn build(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<Self> {
        let (g, ws) = match &cfg.graph {
            Some(spec) => {
                let g = spec.load()?;
                let ws = cfg.weights.build(g.n(), seed)?;
                (g, ws)
            }
            None => {
                let ws = cfg.weights.build(n, seed)?;
                let g = sample_graph(&ws, seed, cfg.model, cfg.sampler);
                (g, ws)
            }
        };
        let xi = cfg.xi_for(g.n().max(16))?;
        Self::from_parts(g, ws, cfg.r, xi, cfg.variant, seed)
    }

    pub fn from_parts(
        g: SparseGraph,
        ws: WeightSequence,
        r: usize,
        xi: f64,
        variant: BasisVariant,
        seed: u64,
    ) -> Result<Self> {
        if ws.n() != g.n() {
            return Err(Error::InvalidParameter(format!("{} weights for {} vertices", ws.n(), g.n())));
        }
        let ord = degree_order(&g);
        let pr = prune(&g, &ord, r).with_xi(xi);
        let partition = vertex_partition(&g, &ws, xi)?;
        let forest = forest_structure(&pr.g_p, &ord)?;
        let basis = pseudo_eigenvectors(&forest, &partition.v_high, variant);
        Ok(Self {
            n: g.n(),
            seed,
            ws,
            g,
            ord,
            pr,
            xi,
            partition,
            forest,
            basis,
        })
    }

    pub fn spectrum(&self, k: usize, tol: f64, method: EigenMethod) -> Result<SpectralResult> {
        extremal_eigs(&self.g, k.min(self.n), tol, self.seed, method)
    }

    pub fn match_threshold(&self) -> f64 {
        match_threshold(&self.pr.g_p, &self.partition.v_high)
    }
}

/// Per-run outcome. `data` is absent exactly when `status` is not `ok`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord<T> {
    pub n: usize,
    pub seed: u64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub elapsed_ms: Option<f64>,
    pub data: Option<T>,
}

impl<T> RunRecord<T> {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport<T, S> {
    pub experiment: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord<T>>,
    pub summary: S,
}

impl<T: Serialize, S: Serialize> RunReport<T, S> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The summary with the config echo, without per-run data.
    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Head<'a, S> {
            experiment: &'a str,
            version: &'a str,
            config: &'a ExperimentConfig,
            runs: usize,
            failed: Vec<(usize, u64, &'a str)>,
            summary: &'a S,
        }
        let failed = self
            .records
            .iter()
            .filter(|r| r.status != "ok")
            .map(|r| (r.n, r.seed, r.status.as_str()))
            .collect();
        Ok(serde_json::to_string_pretty(&Head {
            experiment: &self.experiment,
            version: &self.version,
            config: &self.config,
            runs: self.records.len(),
            failed,
            summary: &self.summary,
        })?)
    }
}

fn status_of(e: &Error) -> String {
    format!("error: {e}").replace(['\n', '\r'], " ")
}

// Seeds fan out across the pool; results come back in task order.
fn run_all<T, F>(cfg: &ExperimentConfig, f: F) -> Vec<RunRecord<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    cfg.tasks()
        .into_par_iter()
        .map(|(n, seed)| {
            let start = Instant::now();
            let out = f(n, seed);
            let elapsed_ms = cfg.record_timings.then(|| start.elapsed().as_secs_f64() * 1e3);
            match out {
                Ok(data) => RunRecord {
                    n,
                    seed,
                    status: "ok".into(),
                    elapsed_ms,
                    data: Some(data),
                },
                Err(e) => RunRecord {
                    n,
                    seed,
                    status: status_of(&e),
                    elapsed_ms,
                    data: None,
                },
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// statistics

/// Type-7 (linear interpolation) empirical quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub const DEFAULT_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub reps: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// `(level, value)`.
    pub quantiles: Vec<(f64, f64)>,
    pub bound: Option<f64>,
    /// Fraction of values strictly above `bound`.
    pub exceed_fraction: Option<f64>,
}

impl QuantileTable {
    pub fn from_values(values: &[f64], levels: &[f64], bound: Option<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 values, got {}", values.len())));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let reps = sorted.len();
        Ok(Self {
            reps,
            mean: sorted.iter().sum::<f64>() / reps as f64,
            min: sorted[0],
            max: sorted[reps - 1],
            quantiles: levels.iter().map(|&q| (q, quantile_sorted(&sorted, q))).collect(),
            bound,
            exceed_fraction: bound.map(|b| sorted.iter().filter(|&&v| v > b).count() as f64 / reps as f64),
        })
    }

    pub fn quantile(&self, level: f64) -> Option<f64> {
        self.quantiles.iter().find(|(q, _)| (*q - level).abs() < 1e-12).map(|p| p.1)
    }
}

/// Runs `producer` once per seed (in parallel) and tabulates the results in seed order.
pub fn mc_verify<F>(seeds: &[u64], producer: F, levels: &[f64], bound: Option<f64>) -> Result<QuantileTable>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    if seeds.len() < 2 {
        return Err(Error::InvalidParameter(format!("mc_verify needs at least 2 reps, got {}", seeds.len())));
    }
    let values: Vec<f64> = seeds.par_iter().map(|&s| producer(s)).collect::<Result<_>>()?;
    QuantileTable::from_values(&values, levels, bound)
}

/// Ordinary least squares `y = a + b x` with a two-sided 95% interval for `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub points: usize,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SlopeFit {
    /// The interval contains 0 or lies below it.
    pub fn no_growth(&self) -> bool {
        self.ci_low <= 0.0
    }
}

pub fn least_squares(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    let m = x.len();
    if m != y.len() || m < 3 {
        return Err(Error::InvalidParameter(format!("regression needs >= 3 paired points, got {m}")));
    }
    let mx = x.iter().sum::<f64>() / m as f64;
    let my = y.iter().sum::<f64>() / m as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("regression needs at least two distinct x".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let dof = (m - 2) as f64;
    let stderr = (ssr / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(SlopeFit {
        points: m,
        slope,
        intercept,
        stderr,
        ci_low: slope - t * stderr,
        ci_high: slope + t * stderr,
    })
}

// ---------------------------------------------------------------------------
// semilocalization

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemilocPair {
    pub side: Side,
    /// 1-based position from the respective end of the spectrum.
    pub eig_index: usize,
    pub lambda: f64,
    pub eta: f64,
    pub resonant_size: usize,
    pub mass: f64,
    pub one_minus_mass: f64,
    /// `(1 − mass) η² log log n / log n`.
    pub normalized_ratio: f64,
    pub ipr: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemilocRun {
    pub xi: f64,
    pub max_degree: usize,
    pub high_count: usize,
    pub basis_size: usize,
    pub flagged_no_sibling: usize,
    pub orthonormality_deviation: f64,
    pub match_threshold: f64,
    pub method: EigenMethod,
    pub pairs: Vec<SemilocPair>,
    pub matches: Vec<MatchRow>,
}

impl SemilocRun {
    pub fn top(&self) -> Option<&SemilocPair> {
        self.pairs.iter().find(|p| p.side == Side::Top && p.eig_index == 1)
    }
}

/// Masses of the `k` top and `k` bottom eigenvectors on their resonant profiles.
pub fn semiloc_instance(inst: &Instance, k: usize, eta: EtaRule, tol: f64, method: EigenMethod) -> Result<SemilocRun> {
    let spec = inst.spectrum(k, tol, method)?;
    let degrees = inst.g.degrees();
    let scale = log_ratio(inst.n.max(16));
    let mut pairs = Vec::new();
    let sides = [(Side::Top, &spec.top), (Side::Bottom, &spec.bottom)];
    for (side, list) in sides {
        for (i, p) in list.iter().enumerate() {
            let lambda = p.value;
            let e = eta.eta(lambda);
            let (size, mass) = if lambda.abs() > e && e > 0.0 {
                let w = resonant_set(&degrees, lambda.abs(), e, ResonantFlavor::Original)?;
                (w.len(), semiloc_mass(&p.vector, &inst.basis, &w, Sign::of(lambda)))
            } else {
                (0, 0.0)
            };
            pairs.push(SemilocPair {
                side,
                eig_index: i + 1,
                lambda,
                eta: e,
                resonant_size: size,
                mass,
                one_minus_mass: 1.0 - mass,
                normalized_ratio: (1.0 - mass) * e * e / scale,
                ipr: ipr(&p.vector),
                residual: p.residual,
            });
        }
    }
    let threshold = inst.match_threshold();
    Ok(SemilocRun {
        xi: inst.xi,
        max_degree: inst.g.max_degree(),
        high_count: inst.partition.v_high.len(),
        basis_size: inst.basis.len(),
        flagged_no_sibling: inst.basis.flagged_no_sibling.len(),
        orthonormality_deviation: verify_orthonormal(&inst.basis),
        match_threshold: threshold,
        method: spec.method,
        matches: eigenvalue_degree_match(&spec, &inst.ord, threshold),
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub n: usize,
    pub runs: usize,
    pub ok: usize,
    /// Median over seeds of the top pair's normalized deficit.
    pub median_normalized: f64,
    pub median_mass: f64,
    pub min_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemilocSummary {
    pub trend: Vec<TrendPoint>,
    /// Median normalized deficit is non-increasing along the n grid.
    pub monotone_nonincreasing: bool,
    /// Slope of the top-pair normalized deficit against `log log n`.
    pub slope: Option<SlopeFit>,
}

pub type SemilocReport = RunReport<SemilocRun, SemilocSummary>;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    quantile_sorted(values, 0.5)
}

pub fn run_semiloc_experiment(cfg: &ExperimentConfig) -> Result<SemilocReport> {
    cfg.validate()?;
    let records = run_all(cfg, |n, seed| {
        let inst = Instance::build(cfg, n, seed)?;
        semiloc_instance(&inst, cfg.k, cfg.eta, cfg.tol, cfg.method)
    });
    let mut trend = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for n in distinct_sizes(&records) {
        let group: Vec<&RunRecord<SemilocRun>> = records.iter().filter(|r| r.n == n).collect();
        let tops: Vec<&SemilocPair> = group.iter().filter_map(|r| r.data.as_ref()?.top()).collect();
        for t in &tops {
            xs.push((n.max(16) as f64).ln().ln());
            ys.push(t.normalized_ratio);
        }
        let mut norm: Vec<f64> = tops.iter().map(|t| t.normalized_ratio).collect();
        let mut mass: Vec<f64> = tops.iter().map(|t| t.mass).collect();
        trend.push(TrendPoint {
            n,
            runs: group.len(),
            ok: group.iter().filter(|r| r.is_ok()).count(),
            median_normalized: median(&mut norm),
            median_mass: median(&mut mass),
            min_mass: mass.iter().copied().fold(f64::NAN, f64::min),
        });
    }
    let monotone_nonincreasing = trend.windows(2).all(|w| w[1].median_normalized <= w[0].median_normalized);
    Ok(RunReport {
        experiment: "semiloc".into(),
        version: VERSION.into(),
        config: cfg.clone(),
        summary: SemilocSummary {
            trend,
            monotone_nonincreasing,
            slope: least_squares(&xs, &ys).ok(),
        },
        records,
    })
}

fn distinct_sizes<T>(records: &[RunRecord<T>]) -> Vec<usize> {
    let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    ns.dedup();
    ns
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemilocCsvRow {
    pub n: usize,
    pub seed: u64,
    pub version: String,
    pub status: String,
    pub side: Option<Side>,
    pub eig_index: Option<usize>,
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
    pub resonant_size: Option<usize>,
    pub mass: Option<f64>,
    pub one_minus_mass: Option<f64>,
    pub normalized_ratio: Option<f64>,
    pub ipr: Option<f64>,
}

fn semiloc_rows(n: usize, seed: u64, run: &SemilocRun) -> impl Iterator<Item = SemilocCsvRow> + '_ {
    run.pairs.iter().map(move |p| SemilocCsvRow {
        n,
        seed,
        version: VERSION.into(),
        status: "ok".into(),
        side: Some(p.side),
        eig_index: Some(p.eig_index),
        lambda: Some(p.lambda),
        eta: Some(p.eta),
        resonant_size: Some(p.resonant_size),
        mass: Some(p.mass),
        one_minus_mass: Some(p.one_minus_mass),
        normalized_ratio: Some(p.normalized_ratio),
        ipr: Some(p.ipr),
    })
}

pub fn write_semiloc_csv<W: Write>(report: &SemilocReport, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    for r in &report.records {
        match &r.data {
            Some(run) => {
                for row in semiloc_rows(r.n, r.seed, run) {
                    w.serialize(row).map_err(csv_err)?;
                }
            }
            None => w
                .serialize(SemilocCsvRow {
                    n: r.n,
                    seed: r.seed,
                    version: VERSION.into(),
                    status: r.status.clone(),
                    side: None,
                    eig_index: None,
                    lambda: None,
                    eta: None,
                    resonant_size: None,
                    mass: None,
                    one_minus_mass: None,
                    normalized_ratio: None,
                    ipr: None,
                })
                .map_err(csv_err)?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Semiloc rows for a single instance (the CLI's graph-file mode).
pub fn write_semiloc_run_csv<W: Write>(n: usize, seed: u64, run: &SemilocRun, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    for row in semiloc_rows(n, seed, run) {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCsvRow {
    pub n: usize,
    pub seed: u64,
    pub version: String,
    pub side: Side,
    pub index: usize,
    pub lambda: f64,
    pub sqrt_degree: f64,
    pub diff: f64,
    pub normalized: f64,
}

pub fn write_match_csv<W: Write>(report: &SemilocReport, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    for r in &report.records {
        let Some(run) = &r.data else { continue };
        for m in &run.matches {
            w.serialize(MatchCsvRow {
                n: r.n,
                seed: r.seed,
                version: VERSION.into(),
                side: m.side,
                index: m.index,
                lambda: m.lambda,
                sqrt_degree: m.sqrt_degree,
                diff: m.diff,
                normalized: m.normalized,
            })
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCsvRow {
    pub n: usize,
    pub seed: u64,
    pub version: String,
    pub method: EigenMethod,
    pub side: Side,
    pub index: usize,
    pub lambda: f64,
    /// `√D_{π(index)}`; the bottom side is compared against its negative.
    pub sqrt_degree: f64,
    pub residual: f64,
}

/// One row per computed eigenpair, top side first.
pub fn write_spectrum_csv<W: Write>(seed: u64, spec: &SpectralResult, ord: &DegreeOrder, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    let sides = [(Side::Top, &spec.top), (Side::Bottom, &spec.bottom)];
    for (side, pairs) in sides {
        for (i, p) in pairs.iter().enumerate() {
            w.serialize(SpectrumCsvRow {
                n: ord.n(),
                seed,
                version: VERSION.into(),
                method: spec.method,
                side,
                index: i + 1,
                lambda: p.value,
                sqrt_degree: (ord.degree(ord.pi()[i.min(ord.n() - 1)]) as f64).sqrt(),
                residual: p.residual,
            })
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// scaling

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRun {
    pub xi: f64,
    /// `√(log n / log log n)`.
    pub scale: f64,
    pub max_degree: usize,
    pub pruning_error: f64,
    pub pruning_ratio: f64,
    pub residual_block: Option<f64>,
    pub residual_ratio: Option<f64>,
    pub uv_gap: Option<f64>,
    pub uv_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSummary {
    /// Regressions of each ratio against `log log n`.
    pub fits: Vec<(String, SlopeFit)>,
    pub per_n: Vec<(usize, QuantileTable)>,
}

impl ScalingSummary {
    pub fn fit(&self, name: &str) -> Option<&SlopeFit> {
        self.fits.iter().find(|(k, _)| k == name).map(|p| &p.1)
    }
}

pub type ScalingReport = RunReport<ScalingRun, ScalingSummary>;

pub fn scaling_instance(inst: &Instance, block_norms: bool) -> Result<ScalingRun> {
    let scale = log_ratio(inst.n.max(16)).sqrt();
    let pruning_error = pruning_error_norm(&inst.g, &inst.pr.g_p)?;
    let (residual_block, uv_gap) = if block_norms {
        (
            Some(residual_block_norm(&inst.pr.g_p, &inst.basis)?),
            Some(uv_gap_norm(&inst.pr.g_p, &inst.forest, &inst.basis)?),
        )
    } else {
        (None, None)
    };
    Ok(ScalingRun {
        xi: inst.xi,
        scale,
        max_degree: inst.g.max_degree(),
        pruning_error,
        pruning_ratio: pruning_error / scale,
        residual_ratio: residual_block.map(|v| v / scale),
        residual_block,
        uv_ratio: uv_gap.map(|v| v / scale),
        uv_gap,
    })
}

pub fn run_scaling_experiment(cfg: &ExperimentConfig) -> Result<ScalingReport> {
    cfg.validate()?;
    let records = run_all(cfg, |n, seed| {
        let inst = Instance::build(cfg, n, seed)?;
        scaling_instance(&inst, cfg.scaling_block_norms)
    });
    let ok: Vec<(usize, &ScalingRun)> = records.iter().filter_map(|r| Some((r.n, r.data.as_ref()?))).collect();
    let x: Vec<f64> = ok.iter().map(|(n, _)| ((*n).max(16) as f64).ln().ln()).collect();
    let mut fits = Vec::new();
    let series: [(&str, fn(&ScalingRun) -> Option<f64>); 3] = [
        ("pruning_ratio", |r| Some(r.pruning_ratio)),
        ("residual_ratio", |r| r.residual_ratio),
        ("uv_ratio", |r| r.uv_ratio),
    ];
    for (name, get) in series {
        let ys: Vec<Option<f64>> = ok.iter().map(|(_, r)| get(r)).collect();
        if ys.iter().all(Option::is_some) {
            let y: Vec<f64> = ys.into_iter().flatten().collect();
            if let Ok(fit) = least_squares(&x, &y) {
                fits.push((name.to_string(), fit));
            }
        }
    }
    let per_n = distinct_sizes(&records)
        .into_iter()
        .filter_map(|n| {
            let v: Vec<f64> = ok.iter().filter(|(m, _)| *m == n).map(|(_, r)| r.pruning_ratio).collect();
            QuantileTable::from_values(&v, &DEFAULT_LEVELS, None).ok().map(|t| (n, t))
        })
        .collect();
    Ok(RunReport {
        experiment: "scaling".into(),
        version: VERSION.into(),
        config: cfg.clone(),
        records,
        summary: ScalingSummary { fits, per_n },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCsvRow {
    pub n: usize,
    pub seed: u64,
    pub version: String,
    pub status: String,
    pub log_log_n: f64,
    pub scale: Option<f64>,
    pub max_degree: Option<usize>,
    pub pruning_error: Option<f64>,
    pub pruning_ratio: Option<f64>,
    pub residual_block: Option<f64>,
    pub residual_ratio: Option<f64>,
    pub uv_gap: Option<f64>,
    pub uv_ratio: Option<f64>,
}

pub fn write_scaling_csv<W: Write>(report: &ScalingReport, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    for r in &report.records {
        let d = r.data.as_ref();
        w.serialize(ScalingCsvRow {
            n: r.n,
            seed: r.seed,
            version: VERSION.into(),
            status: r.status.clone(),
            log_log_n: (r.n.max(16) as f64).ln().ln(),
            scale: d.map(|d| d.scale),
            max_degree: d.map(|d| d.max_degree),
            pruning_error: d.map(|d| d.pruning_error),
            pruning_ratio: d.map(|d| d.pruning_ratio),
            residual_block: d.and_then(|d| d.residual_block),
            residual_ratio: d.and_then(|d| d.residual_ratio),
            uv_gap: d.and_then(|d| d.uv_gap),
            uv_ratio: d.and_then(|d| d.uv_ratio),
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// localization

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRun {
    pub eta: f64,
    pub k: usize,
    pub threshold: f64,
    pub vstar: Vec<usize>,
    /// No isolated vertex: the localization statement says nothing here.
    pub vacuous: bool,
    pub rows: Vec<LocalizationRow>,
    /// `π(i) = i` for the leading `k` ranks (vertex labels are weight ranks).
    pub pi_identity: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSummary {
    pub runs: usize,
    pub vacuous_runs: usize,
    /// Among reported pairs, the fraction with a singleton resonant set.
    pub singleton_fraction: f64,
    pub pi_identity_fraction: f64,
    pub mass: Option<QuantileTable>,
}

pub type LocalizationReport = RunReport<LocalizationRun, LocalizationSummary>;

/// Number of leading pairs examined: `⌊n^{1/(2α+2)}⌋` for power-law weights.
pub fn localization_k(cfg: &ExperimentConfig, n: usize) -> usize {
    match cfg.weights.power_law_alpha() {
        Some(alpha) => ((n as f64).powf(1.0 / (2.0 * alpha + 2.0)).floor() as usize).max(1),
        None => cfg.k,
    }
}

pub fn localization_instance(inst: &Instance, nu: f64, eta: f64, k: usize, tol: f64, method: EigenMethod) -> Result<LocalizationRun> {
    let mode = if inst.n <= DEFAULT_EXACT_BUDGET {
        DegreeMode::Exact
    } else {
        DegreeMode::Approx
    };
    let d = expected_degrees(&inst.ws, mode, DEFAULT_EXACT_BUDGET)?;
    let vstar = isolated_vertices(&d, nu, eta, inst.n);
    let spec = inst.spectrum(k, tol, method)?;
    let threshold = inst.match_threshold();
    let rows = localization_check(&spec, &inst.basis, &vstar, &inst.g.degrees(), eta, threshold)?;
    let k = k.min(inst.n);
    Ok(LocalizationRun {
        eta,
        k,
        threshold,
        vacuous: vstar.is_empty(),
        vstar,
        rows,
        pi_identity: (0..k).map(|i| inst.ord.pi()[i] == i).collect(),
    })
}

pub fn run_localization_experiment(cfg: &ExperimentConfig) -> Result<LocalizationReport> {
    cfg.validate()?;
    let eta = match cfg.eta {
        EtaRule::Absolute(e) => e,
        EtaRule::Fraction(_) => {
            return Err(Error::InvalidParameter("localization needs an absolute eta".into()));
        }
    };
    let records = run_all(cfg, |n, seed| {
        let inst = Instance::build(cfg, n, seed)?;
        let k = localization_k(cfg, inst.n);
        localization_instance(&inst, cfg.nu, eta, k, cfg.tol, cfg.method)
    });
    let ok: Vec<&LocalizationRun> = records.iter().filter_map(|r| r.data.as_ref()).collect();
    let rows: Vec<&LocalizationRow> = ok.iter().flat_map(|r| r.rows.iter()).collect();
    let pis: Vec<bool> = ok.iter().flat_map(|r| r.pi_identity.iter().copied()).collect();
    let frac = |num: usize, den: usize| if den == 0 { f64::NAN } else { num as f64 / den as f64 };
    let masses: Vec<f64> = rows.iter().filter(|r| r.hits_isolated).map(|r| r.mass).collect();
    let summary = LocalizationSummary {
        runs: records.len(),
        vacuous_runs: ok.iter().filter(|r| r.vacuous).count(),
        singleton_fraction: frac(rows.iter().filter(|r| r.singleton).count(), rows.len()),
        pi_identity_fraction: frac(pis.iter().filter(|&&b| b).count(), pis.len()),
        mass: QuantileTable::from_values(&masses, &DEFAULT_LEVELS, None).ok(),
    };
    Ok(RunReport {
        experiment: "localization".into(),
        version: VERSION.into(),
        config: cfg.clone(),
        records,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationCsvRow {
    pub n: usize,
    pub seed: u64,
    pub version: String,
    pub status: String,
    pub vstar_size: Option<usize>,
    pub index: Option<usize>,
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
    pub resonant_size: Option<usize>,
    pub hits_isolated: Option<bool>,
    pub singleton: Option<bool>,
    pub best_vertex: Option<usize>,
    pub mass: Option<f64>,
    pub pi_identity: Option<bool>,
}

pub fn write_localization_csv<W: Write>(report: &LocalizationReport, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    let blank = |r: &RunRecord<LocalizationRun>, status: String, vstar: Option<usize>| LocalizationCsvRow {
        n: r.n,
        seed: r.seed,
        version: VERSION.into(),
        status,
        vstar_size: vstar,
        index: None,
        lambda: None,
        eta: None,
        resonant_size: None,
        hits_isolated: None,
        singleton: None,
        best_vertex: None,
        mass: None,
        pi_identity: None,
    };
    for r in &report.records {
        match &r.data {
            None => w.serialize(blank(r, r.status.clone(), None)).map_err(csv_err)?,
            Some(run) if run.rows.is_empty() => {
                w.serialize(blank(r, "ok".into(), Some(run.vstar.len()))).map_err(csv_err)?
            }
            Some(run) => {
                for row in &run.rows {
                    w.serialize(LocalizationCsvRow {
                        n: r.n,
                        seed: r.seed,
                        version: VERSION.into(),
                        status: "ok".into(),
                        vstar_size: Some(run.vstar.len()),
                        index: Some(row.index),
                        lambda: Some(row.lambda),
                        eta: Some(row.eta),
                        resonant_size: Some(row.resonant_size),
                        hits_isolated: Some(row.hits_isolated),
                        singleton: Some(row.singleton),
                        best_vertex: row.best_vertex,
                        mass: Some(row.mass),
                        pi_identity: run.pi_identity.get(row.index - 1).copied(),
                    })
                    .map_err(csv_err)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// resonant-set sizes

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsizePoint {
    pub lambda: f64,
    pub eta: f64,
    pub observed: usize,
    /// `Σ_x P((λ−η)² ≤ Pois(w_x) ≤ (λ+η)²)`.
    pub poisson_proxy: f64,
    pub generic: f64,
    pub family: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsizeAggregate {
    pub lambda: f64,
    pub eta: f64,
    pub runs: usize,
    pub mean: f64,
    pub std_error: f64,
    pub poisson_proxy: f64,
    pub generic: f64,
    pub family: f64,
    /// `mean / family`.
    pub ratio: f64,
}

pub type WsizeReport = RunReport<Vec<WsizePoint>, Vec<WsizeAggregate>>;

pub fn wsize_points(ws: &WeightSequence, degrees: &[usize], spec: &WsizeSpec, alpha: Option<f64>) -> Result<Vec<WsizePoint>> {
    let alpha = spec.alpha.or(alpha);
    spec.pairs
        .iter()
        .map(|&(lambda, eta)| {
            let w = resonant_set(degrees, lambda, eta, ResonantFlavor::Original)?;
            let fam = family_estimate(spec.family, ws, alpha, lambda, eta)?;
            Ok(WsizePoint {
                lambda,
                eta,
                observed: w.len(),
                poisson_proxy: analytics::expected_w_poisson(ws, lambda, eta)?,
                generic: analytics::expected_w_generic(ws, lambda, eta)?,
                family: fam.leading,
                slack: fam.slack,
            })
        })
        .collect()
}

pub fn run_wsize_experiment(cfg: &ExperimentConfig) -> Result<WsizeReport> {
    cfg.validate()?;
    let spec = cfg
        .wsize
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("config has no wsize section".into()))?;
    let alpha = match &cfg.weights {
        WeightSpec::Exponential { alpha } => Some(*alpha),
        other => other.power_law_alpha(),
    };
    let records = run_all(cfg, |n, seed| {
        let (g, ws) = match &cfg.graph {
            Some(gs) => {
                let g = gs.load()?;
                let ws = cfg.weights.build(g.n(), seed)?;
                (g, ws)
            }
            None => {
                let ws = cfg.weights.build(n, seed)?;
                (sample_graph(&ws, seed, cfg.model, cfg.sampler), ws)
            }
        };
        wsize_points(&ws, &g.degrees(), spec, alpha)
    });
    let ok: Vec<&Vec<WsizePoint>> = records.iter().filter_map(|r| r.data.as_ref()).collect();
    let mut summary = Vec::new();
    for (j, &(lambda, eta)) in spec.pairs.iter().enumerate() {
        let obs: Vec<f64> = ok.iter().map(|p| p[j].observed as f64).collect();
        let m = obs.len();
        if m == 0 {
            continue;
        }
        let mean = obs.iter().sum::<f64>() / m as f64;
        let var = if m > 1 {
            obs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64
        } else {
            0.0
        };
        let avg = |f: fn(&WsizePoint) -> f64| ok.iter().map(|p| f(&p[j])).sum::<f64>() / m as f64;
        let family = avg(|p| p.family);
        summary.push(WsizeAggregate {
            lambda,
            eta,
            runs: m,
            mean,
            std_error: (var / m as f64).sqrt(),
            poisson_proxy: avg(|p| p.poisson_proxy),
            generic: avg(|p| p.generic),
            family,
            ratio: mean / family,
        });
    }
    Ok(RunReport {
        experiment: "wsize".into(),
        version: VERSION.into(),
        config: cfg.clone(),
        records,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsizeCsvRow {
    pub n: usize,
    pub seed: u64,
    pub version: String,
    pub status: String,
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
    pub observed: Option<usize>,
    pub poisson_proxy: Option<f64>,
    pub estimate_generic: Option<f64>,
    pub estimate_family: Option<f64>,
    pub slack: Option<f64>,
}

pub fn write_wsize_csv<W: Write>(report: &WsizeReport, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    for r in &report.records {
        let base = WsizeCsvRow {
            n: r.n,
            seed: r.seed,
            version: VERSION.into(),
            status: r.status.clone(),
            lambda: None,
            eta: None,
            observed: None,
            poisson_proxy: None,
            estimate_generic: None,
            estimate_family: None,
            slack: None,
        };
        match &r.data {
            None => w.serialize(base).map_err(csv_err)?,
            Some(points) => {
                for p in points {
                    w.serialize(WsizeCsvRow {
                        lambda: Some(p.lambda),
                        eta: Some(p.eta),
                        observed: Some(p.observed),
                        poisson_proxy: Some(p.poisson_proxy),
                        estimate_generic: Some(p.generic),
                        estimate_family: Some(p.family),
                        slack: Some(p.slack),
                        ..base.clone()
                    })
                    .map_err(csv_err)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// CSV helpers

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(true).from_writer(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Per-column quantile tables of a harness CSV, grouped by `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvColumnSummary {
    pub column: String,
    pub n: usize,
    pub table: QuantileTable,
}

pub fn summarize_csv<R: std::io::Read>(input: R, columns: &[String]) -> Result<Vec<CsvColumnSummary>> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd.headers().map_err(csv_err)?.clone();
    let idx = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("missing column {name}")))
    };
    let n_col = idx("n")?;
    let status_col = headers.iter().position(|h| h == "status");
    let cols: Vec<(String, usize)> = if columns.is_empty() {
        headers
            .iter()
            .enumerate()
            .filter(|(_, h)| !matches!(*h, "n" | "seed" | "version" | "status" | "side"))
            .map(|(i, h)| (h.to_string(), i))
            .collect()
    } else {
        columns.iter().map(|c| Ok((c.clone(), idx(c)?))).collect::<Result<_>>()?
    };
    let mut data: std::collections::BTreeMap<(usize, usize), Vec<f64>> = Default::default();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        if status_col.is_some_and(|s| &rec[s] != "ok") {
            continue;
        }
        let n: usize = rec[n_col].parse().map_err(|_| Error::Parse(format!("bad n {}", &rec[n_col])))?;
        for (j, (_, c)) in cols.iter().enumerate() {
            if let Ok(v) = rec[*c].parse::<f64>() {
                data.entry((j, n)).or_default().push(v);
            }
        }
    }
    Ok(data
        .into_iter()
        .filter_map(|((j, n), v)| {
            QuantileTable::from_values(&v, &DEFAULT_LEVELS, None).ok().map(|table| CsvColumnSummary {
                column: cols[j].0.clone(),
                n,
                table,
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures;

    fn star9_cfg() -> ExperimentConfig {
        let g = fixtures::star9();
        let edges: Vec<(usize, usize)> = g.edges().collect();
        let mut values = vec![9.0];
        values.extend(std::iter::repeat_n(1.0, 9));
        let mut cfg = ExperimentConfig::new(WeightSpec::Explicit { values }, vec![], vec![0]);
        cfg.graph = Some(GraphSpec::Explicit { n: 10, edges });
        cfg.xi = Some(2.0);
        cfg.k = 1;
        cfg
    }

    #[test]
    fn config_roundtrip_and_defaults() {
        let text = r#"{"weights": {"kind": "power_law", "alpha": 2.5}, "n_grid": [1024, 2048], "seeds": [1, 2]}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.r, 6);
        assert_eq!(cfg.eta, EtaRule::Fraction(0.5));
        assert_eq!(cfg.weights, WeightSpec::PowerLaw { alpha: 2.5, c: 1.0 });
        let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let eta = r#"{"weights": {"kind": "exponential", "alpha": 1}, "n_grid": [100], "seeds": [0], "eta": {"absolute": 1.5}}"#;
        assert_eq!(ExperimentConfig::from_json(eta).unwrap().eta, EtaRule::Absolute(1.5));
    }

    #[test]
    fn config_validation() {
        let base = ExperimentConfig::new(WeightSpec::Exponential { alpha: 1.0 }, vec![100, 200], vec![0]);
        assert!(base.validate().is_ok());
        let mut c = base.clone();
        c.seeds.clear();
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.n_grid = vec![200, 100];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.eta = EtaRule::Fraction(0.75);
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_json(r#"{"weights": {"kind": "exponential", "alpha": 1}, "seeds": [0], "bogus": 1}"#).is_err());
    }

    #[test]
    fn star9_gives_unit_mass() {
        let report = run_semiloc_experiment(&star9_cfg()).unwrap();
        assert_eq!(report.records.len(), 1);
        let run = report.records[0].data.as_ref().unwrap();
        for p in &run.pairs {
            assert!((p.lambda.abs() - 3.0).abs() < 1e-12);
            assert!((p.mass - 1.0).abs() < 1e-12, "{p:?}");
            assert_eq!(p.resonant_size, 1);
        }
        let mut buf = Vec::new();
        write_semiloc_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n,seed,version,status,side,eig_index,lambda,eta,resonant_size,mass,one_minus_mass,normalized_ratio,ipr"
        );
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn identical_configs_give_identical_bytes() {
        let mut cfg = ExperimentConfig::new(
            WeightSpec::PowerLaw { alpha: 2.5, c: 1.0 },
            vec![300, 600],
            vec![3, 4],
        );
        cfg.k = 3;
        let render = |cfg: &ExperimentConfig| {
            let rep = run_semiloc_experiment(cfg).unwrap();
            let mut buf = Vec::new();
            write_semiloc_csv(&rep, &mut buf).unwrap();
            (buf, rep.summary_json().unwrap())
        };
        let a = render(&cfg);
        let b = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| render(&cfg));
        assert_eq!(a, b);
    }

    #[test]
    fn failures_become_status_rows() {
        let mut cfg = ExperimentConfig::new(WeightSpec::File { path: "/nonexistent/w.txt".into() }, vec![100], vec![0, 1]);
        cfg.k = 2;
        let rep = run_semiloc_experiment(&cfg).unwrap();
        assert_eq!(rep.records.len(), 2);
        assert!(rep.records.iter().all(|r| r.status.starts_with("error") && r.data.is_none()));
        let mut buf = Vec::new();
        write_semiloc_csv(&rep, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().contains("error"));
    }

    #[test]
    fn forest_has_zero_pruning_error() {
        let g = fixtures::two_level_star(3, 2);
        let ws = WeightSequence::new(g.degrees().iter().map(|&d| d.max(1) as f64).collect()).unwrap();
        let inst = Instance::from_parts(g, ws, 6, 2.0, BasisVariant::ProofDerived, 0).unwrap();
        let run = scaling_instance(&inst, true).unwrap();
        assert_eq!(run.pruning_error, 0.0);
        assert!(run.pruning_ratio.is_finite());
    }

    #[test]
    fn scaling_rows_are_positive_and_fit_is_reported() {
        let mut cfg = ExperimentConfig::new(WeightSpec::PowerLaw { alpha: 2.5, c: 1.0 }, vec![256, 512, 1024], vec![0, 1]);
        cfg.scaling_block_norms = true;
        let rep = run_scaling_experiment(&cfg).unwrap();
        for r in &rep.records {
            let d = r.data.as_ref().unwrap();
            assert!(d.pruning_ratio.is_finite() && d.pruning_ratio >= 0.0);
            assert!(d.residual_ratio.unwrap().is_finite());
        }
        let fit = rep.summary.fit("pruning_ratio").unwrap();
        assert_eq!(fit.points, 6);
        assert!(fit.ci_low <= fit.slope && fit.slope <= fit.ci_high);
        let mut buf = Vec::new();
        write_scaling_csv(&rep, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 7);
    }

    #[test]
    fn planted_stars_localize() {
        let g = fixtures::disjoint_stars(&[100, 25]);
        let ws = WeightSequence::new(g.degrees().iter().map(|&d| d as f64).collect()).unwrap();
        let inst = Instance::from_parts(g, ws, 6, 10.0, BasisVariant::ProofDerived, 0).unwrap();
        let run = localization_instance(&inst, 0.01, 0.5, 2, 1e-10, EigenMethod::Dense).unwrap();
        assert_eq!(run.vstar, vec![0, 101]);
        assert_eq!(run.rows.len(), 2);
        for row in &run.rows {
            assert!(row.mass >= 1.0 - 1e-10);
            assert!(row.singleton);
        }
        assert_eq!(run.rows[0].best_vertex, Some(0));
        assert_eq!(run.rows[1].best_vertex, Some(101));
    }

    #[test]
    fn empty_isolated_set_is_vacuous() {
        let g = fixtures::disjoint_stars(&[4, 4]);
        let ws = WeightSequence::new(g.degrees().iter().map(|&d| d as f64).collect()).unwrap();
        let inst = Instance::from_parts(g, ws, 6, 3.0, BasisVariant::ProofDerived, 0).unwrap();
        let run = localization_instance(&inst, 1.0, 0.5, 2, 1e-10, EigenMethod::Dense).unwrap();
        assert!(run.vacuous);
    }

    #[test]
    fn quantiles_and_mc_verify() {
        let t = mc_verify(&[1, 2, 3, 4], |_| Ok(2.5), &DEFAULT_LEVELS, Some(3.0)).unwrap();
        assert!(t.quantiles.iter().all(|&(_, v)| v == 2.5));
        assert_eq!(t.exceed_fraction, Some(0.0));
        assert!(mc_verify(&[1], |_| Ok(1.0), &DEFAULT_LEVELS, None).is_err());
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5), 3.0);
        assert_eq!(quantile_sorted(&[0.0, 10.0], 0.25), 2.5);
    }

    #[test]
    fn mc_verify_du_counts_is_reproducible() {
        use crate::diagnostics::{DiagnosticParams, DuIndex};
        let producer = |seed: u64| -> Result<f64> {
            let ws = make_power_law_quantile(500, 2.5, 1.0, ParamCheck::Strict)?;
            let g = crate::graph::sample_grg(&ws, seed, Model::Grg);
            let ord = degree_order(&g);
            let pr = prune(&g, &ord, 6);
            let idx = DuIndex::new(&pr.g_nc, &ord);
            Ok((0..g.n()).map(|x| idx.count(x)).max().unwrap_or(0) as f64)
        };
        let bound = DiagnosticParams::new(1.0, DEFAULT_DELTA).du_bound(500);
        let seeds: Vec<u64> = (0..6).collect();
        let a = mc_verify(&seeds, producer, &DEFAULT_LEVELS, Some(bound)).unwrap();
        let b = mc_verify(&seeds, producer, &DEFAULT_LEVELS, Some(bound)).unwrap();
        assert_eq!(a, b);
        assert!(a.exceed_fraction.unwrap() <= 1.0);
    }

    #[test]
    fn least_squares_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = least_squares(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept + 1.0).abs() < 1e-12);
        assert!(f.stderr < 1e-12);
        let noisy = least_squares(&x, &[1.0, 0.5, 1.2, 0.8]).unwrap();
        assert!(noisy.no_growth());
    }

    #[test]
    fn wsize_experiment_reports_estimates() {
        let mut cfg = ExperimentConfig::new(WeightSpec::Exponential { alpha: 1.0 }, vec![2000], vec![0, 1, 2]);
        cfg.wsize = Some(WsizeSpec {
            pairs: vec![(3.0, 1.0), (5.0, 1.0)],
            family: Family::Exp,
            alpha: None,
        });
        let rep = run_wsize_experiment(&cfg).unwrap();
        assert_eq!(rep.summary.len(), 2);
        let a = &rep.summary[0];
        assert!((a.family - 2000.0 / 8.0).abs() < 1e-9);
        assert!(a.mean > 0.0 && a.mean <= a.generic);
        let mut buf = Vec::new();
        write_wsize_csv(&rep, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 7);
    }

    #[test]
    fn csv_summary_groups_by_n() {
        let text = "n,seed,version,status,x\n10,0,v,ok,1\n10,1,v,ok,3\n20,0,v,ok,5\n20,1,v,error: boom,\n20,2,v,ok,7\n";
        let s = summarize_csv(text.as_bytes(), &[]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].n, 10);
        assert_eq!(s[0].table.mean, 2.0);
        assert_eq!(s[1].table.reps, 2);
        assert!(summarize_csv(text.as_bytes(), &["nope".to_string()]).is_err());
    }
}
