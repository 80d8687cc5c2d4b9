use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use speclocal::analytics;
use speclocal::coupling::{verify_embedding, CouplingContext, TreeScope, DEFAULT_NODE_BUDGET};
use speclocal::diagnostics::{all_stats, write_csv, DiagnosticInput, DiagnosticParams};
use speclocal::eigenbasis::{forest_structure, pseudo_eigenvectors, verify_orthonormal, BasisVariant};
use speclocal::graph::{degree_order, sample_graph, DegreeOrder, SamplerKind};
use speclocal::harness::{self, EtaRule, ExperimentConfig, Family, Instance};
use speclocal::pruning::{
    degree_loss_stats, ledger_degrees, prune, verify_forest, verify_no_down_up, vertex_partition,
    vertex_partition_from_degrees, xi_threshold, DEFAULT_RADIUS,
};
use speclocal::spectral::{extremal_eigs, EigenMethod, DEFAULT_TOL};
use speclocal::weights::{self, ParamCheck, WeightLaw, DEFAULT_DELTA};
use speclocal::{Error, Model, SparseGraph, WeightSequence};

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VERIFY: u8 = 3;

/// Inhomogeneous random graphs: sampling, pruning, pseudo-eigenvectors and
/// eigenvector localization experiments.
#[derive(Parser, Debug)]
#[command(name = "speclocal", version)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for outputs; relative output paths are resolved against it.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a weight sequence.
    Weights(WeightsArgs),
    /// Sample a graph from a weight file.
    Sample(SampleArgs),
    /// Prune a graph into a forest and write the removal ledger.
    Prune(PruneArgs),
    /// Build the pseudo-eigenvector family of a pruned forest.
    Basis(BasisArgs),
    /// Extremal eigenpairs of a graph's adjacency matrix.
    Spectrum(SpectrumArgs),
    /// Semilocalization masses for one graph, or the configured experiment.
    Semiloc(SemilocArgs),
    /// Resonant-set size estimates, or the configured Monte-Carlo comparison.
    Wsize(WsizeArgs),
    /// Couple a ball of the pruned graph with branching trees and verify the embedding.
    CouplingCheck(CouplingArgs),
    /// Graph functionals against their high-probability bounds.
    Diagnostics(DiagnosticsArgs),
    /// Pruning-error scaling study (needs --config).
    Scaling(ExperimentArgs),
    /// Localization experiment (needs --config).
    Localize(ExperimentArgs),
    /// Per-column quantiles of a harness CSV, grouped by n.
    Report(ReportArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum WeightKind {
    Powerlaw,
    Exp,
    Iid,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum IidLaw {
    Powerlaw,
    Exp,
}

#[derive(Args, Debug)]
struct WeightsArgs {
    #[arg(long, value_enum)]
    kind: WeightKind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Law of i.i.d. weights.
    #[arg(long, value_enum, default_value = "powerlaw")]
    law: IidLaw,
    /// Accept out-of-range parameters with a note instead of failing.
    #[arg(long)]
    lenient: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModelArg {
    Grg,
    #[value(name = "chung_lu", alias = "chung-lu")]
    ChungLu,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Grg => Model::Grg,
            ModelArg::ChungLu => Model::ChungLu,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SamplerArg {
    Skip,
    Pairwise,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "grg")]
    model: ModelArg,
    #[arg(long, value_enum, default_value = "skip")]
    sampler: SamplerArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PruneArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    r: usize,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    out_forest: PathBuf,
    #[arg(long)]
    out_ledger: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum VariantArg {
    Proof,
    Displayed,
}

#[derive(Args, Debug)]
struct BasisArgs {
    /// Pruned forest (edge list).
    #[arg(long)]
    forest: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    xi: f64,
    #[arg(long, value_enum, default_value = "proof")]
    variant: VariantArg,
    /// Pruning ledger; its degree_before column supplies the original degrees.
    #[arg(long, conflicts_with = "graph")]
    ledger: Option<PathBuf>,
    /// Original graph, as an alternative source of the original degrees.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MethodArg {
    Auto,
    Dense,
    Lanczos,
}

impl From<MethodArg> for EigenMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => EigenMethod::Auto,
            MethodArg::Dense => EigenMethod::Dense,
            MethodArg::Lanczos => EigenMethod::Lanczos,
        }
    }
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SemilocArgs {
    #[arg(long, requires = "weights")]
    graph: Option<PathBuf>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 0.5)]
    eta_frac: f64,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    r: usize,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum FamilyArg {
    Generic,
    Exp,
    Powerlaw,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Generic => Family::Generic,
            FamilyArg::Exp => Family::Exp,
            FamilyArg::Powerlaw => Family::Powerlaw,
        }
    }
}

#[derive(Args, Debug)]
struct WsizeArgs {
    #[arg(long, requires_all = ["lambda", "eta"])]
    weights: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_enum, default_value = "generic")]
    family: FamilyArg,
    /// Exponent of the weight law (exp and powerlaw families).
    #[arg(long)]
    alpha: Option<f64>,
    /// Output file; `-` or absent writes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ScopeArg {
    Full,
    Spine,
}

#[derive(Args, Debug)]
struct CouplingArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    x: usize,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    r: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    reps: u64,
    #[arg(long, value_enum, default_value = "grg")]
    model: ModelArg,
    #[arg(long, value_enum, default_value = "spine")]
    scope: ScopeArg,
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    node_budget: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DiagnosticsArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    /// Constant in front of the down-up and D^{nc+} bounds.
    #[arg(long, default_value_t = speclocal::diagnostics::DEFAULT_C)]
    c: f64,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    r: usize,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExperimentArgs {}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    csv: PathBuf,
    /// Comma-separated columns (default: every numeric column).
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult = std::result::Result<(), Failure>;

struct Ctx {
    config: Option<PathBuf>,
    out_dir: Option<PathBuf>,
}

impl Ctx {
    fn path(&self, p: &Path) -> PathBuf {
        match &self.out_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn create(&self, p: &Path) -> Result<Box<dyn Write>, Failure> {
        if p == Path::new("-") {
            return Ok(Box::new(io::stdout().lock()));
        }
        let path = self.path(p);
        if let Some(parent) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }

    fn write_text(&self, p: Option<&Path>, text: &str) -> CliResult {
        let mut w = self.create(p.unwrap_or(Path::new("-")))?;
        w.write_all(text.as_bytes())?;
        if !text.ends_with('\n') {
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    fn experiment(&self) -> Result<ExperimentConfig, Failure> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| Failure::Usage("this command needs --config FILE".into()))?;
        let cfg = ExperimentConfig::from_file(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Output directory for experiment files: --out-dir, then the config's out_dir, then `.`.
    fn experiment_dir(&self, cfg: &ExperimentConfig) -> Result<PathBuf, Failure> {
        let dir = self
            .out_dir
            .clone()
            .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json values always serialize")
}

fn load_pair(graph: &Path, weights: &Path) -> Result<(SparseGraph, WeightSequence), Failure> {
    let g = SparseGraph::read_file(graph)?;
    let ws = WeightSequence::read_file(weights)?;
    if g.n() != ws.n() {
        return Err(Failure::Runtime(format!("graph has {} vertices but {} weights", g.n(), ws.n())));
    }
    Ok((g, ws))
}

fn cmd_weights(ctx: &Ctx, a: &WeightsArgs) -> CliResult {
    let check = if a.lenient { ParamCheck::WarnOnly } else { ParamCheck::Strict };
    let ws = match a.kind {
        WeightKind::Powerlaw => weights::make_power_law_quantile(a.n, a.alpha, a.c, check)?,
        WeightKind::Exp => weights::make_exponential_quantile(a.n, a.alpha)?,
        WeightKind::Iid => {
            let law = match a.law {
                IidLaw::Powerlaw => WeightLaw::PowerLaw { alpha: a.alpha, c: a.c },
                IidLaw::Exp => WeightLaw::Exponential { alpha: a.alpha },
            };
            weights::make_iid(a.n, law, a.seed)?
        }
    };
    for note in &ws.notes {
        eprintln!("note: {note}");
    }
    ctx.write_text(Some(&a.out), &ws.to_text())
}

fn cmd_sample(ctx: &Ctx, a: &SampleArgs) -> CliResult {
    let ws = WeightSequence::read_file(&a.weights)?;
    let kind = match a.sampler {
        SamplerArg::Skip => SamplerKind::Skip,
        SamplerArg::Pairwise => SamplerKind::Pairwise,
    };
    let g = sample_graph(&ws, a.seed, a.model.into(), kind);
    ctx.write_text(Some(&a.out), &g.to_edge_list())
}

fn cmd_prune(ctx: &Ctx, a: &PruneArgs) -> CliResult {
    let (g, _ws) = load_pair(&a.graph, &a.weights)?;
    let ord = degree_order(&g);
    let xi = match a.xi {
        Some(x) => x,
        None => xi_threshold(a.nu, DEFAULT_DELTA, g.n().max(16))?,
    };
    let pr = prune(&g, &ord, a.r).with_xi(xi);
    for w in &pr.warnings {
        eprintln!("warning: {w}");
    }
    ctx.write_text(Some(&a.out_forest), &pr.g_p.to_edge_list())?;
    ctx.write_text(Some(&a.out_ledger), &pr.ledger_csv())?;
    let loss = degree_loss_stats(&pr, Some(xi));
    let forest_ok = verify_forest(&pr.g_p);
    let du_free = verify_no_down_up(&pr.g_p, &ord);
    eprintln!(
        "{}",
        pretty(&json!({
            "n": g.n(),
            "edges": g.edge_count(),
            "edges_nc": pr.g_nc.edge_count(),
            "edges_forest": pr.g_p.edge_count(),
            "xi": xi,
            "max_degree_loss": loss.max,
            "loss_above_half_xi": loss.exceeding.len(),
            "forest": forest_ok,
            "down_up_free": du_free,
        }))
    );
    if !forest_ok || !du_free {
        return Err(Failure::Verify("pruned graph is not a down-up-free forest".into()));
    }
    Ok(())
}

fn cmd_basis(ctx: &Ctx, a: &BasisArgs) -> CliResult {
    let (forest_graph, ws) = load_pair(&a.forest, &a.weights)?;
    let degrees = match (&a.ledger, &a.graph) {
        (Some(l), _) => ledger_degrees(&std::fs::read_to_string(l)?)?,
        (None, Some(gp)) => SparseGraph::read_file(gp)?.degrees(),
        (None, None) => {
            eprintln!("warning: no --ledger or --graph; using forest degrees for the order and partition");
            forest_graph.degrees()
        }
    };
    if degrees.len() != forest_graph.n() {
        return Err(Failure::Runtime("original degrees do not match the forest size".into()));
    }
    let ord = DegreeOrder::from_degrees(degrees.clone());
    let part = vertex_partition_from_degrees(&degrees, &ws, a.xi)?;
    let forest = forest_structure(&forest_graph, &ord)?;
    let variant = match a.variant {
        VariantArg::Proof => BasisVariant::ProofDerived,
        VariantArg::Displayed => BasisVariant::Displayed,
    };
    let basis = pseudo_eigenvectors(&forest, &part.v_high, variant);
    ctx.write_text(Some(&a.out), &serde_json::to_string_pretty(&basis).map_err(Error::from)?)?;
    let dev = verify_orthonormal(&basis);
    eprintln!(
        "{}",
        pretty(&json!({
            "members": basis.len(),
            "high": part.v_high.len(),
            "dropped_childless": basis.dropped_childless.len(),
            "flagged_no_sibling": basis.flagged_no_sibling.len(),
            "gram_deviation": dev,
        }))
    );
    if variant == BasisVariant::ProofDerived && dev > 1e-10 {
        return Err(Failure::Verify(format!("Gram deviation {dev:e} exceeds 1e-10")));
    }
    Ok(())
}

fn cmd_spectrum(ctx: &Ctx, a: &SpectrumArgs) -> CliResult {
    let g = SparseGraph::read_file(&a.graph)?;
    let k = a.k.min(g.n());
    let spec = extremal_eigs(&g, k, a.tol, a.seed, a.method.into())?;
    let ord = degree_order(&g);
    harness::write_spectrum_csv(a.seed, &spec, &ord, ctx.create(&a.out)?)?;
    Ok(())
}

fn cmd_semiloc(ctx: &Ctx, a: &SemilocArgs) -> CliResult {
    if let (Some(gp), Some(wp)) = (&a.graph, &a.weights) {
        let (g, ws) = load_pair(gp, wp)?;
        if !(a.eta_frac > 0.0 && a.eta_frac <= 0.5) {
            return Err(Failure::Usage(format!("--eta-frac {} not in (0, 0.5]", a.eta_frac)));
        }
        let xi = match a.xi {
            Some(x) => x,
            None => xi_threshold(a.nu, DEFAULT_DELTA, g.n().max(16))?,
        };
        let inst = Instance::from_parts(g, ws, a.r, xi, BasisVariant::ProofDerived, a.seed)?;
        let run = harness::semiloc_instance(&inst, a.k, EtaRule::Fraction(a.eta_frac), a.tol, a.method.into())?;
        let out = a.out.clone().unwrap_or_else(|| PathBuf::from("semiloc.csv"));
        harness::write_semiloc_run_csv(inst.n, a.seed, &run, ctx.create(&out)?)?;
        return Ok(());
    }
    let cfg = ctx.experiment()?;
    let dir = ctx.experiment_dir(&cfg)?;
    let rep = harness::run_semiloc_experiment(&cfg)?;
    harness::write_semiloc_csv(&rep, BufWriter::new(File::create(dir.join("semiloc.csv"))?))?;
    harness::write_match_csv(&rep, BufWriter::new(File::create(dir.join("match.csv"))?))?;
    std::fs::write(dir.join("semiloc_summary.json"), rep.summary_json()?)?;
    report_failures(&rep.records)
}

fn report_failures<T>(records: &[harness::RunRecord<T>]) -> CliResult {
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed (recorded with their status)", records.len());
    }
    Ok(())
}

fn cmd_wsize(ctx: &Ctx, a: &WsizeArgs) -> CliResult {
    if let Some(wp) = &a.weights {
        let ws = WeightSequence::read_file(wp)?;
        let (lambda, eta) = (a.lambda.unwrap_or_default(), a.eta.unwrap_or_default());
        let est = harness::family_estimate(a.family.into(), &ws, a.alpha, lambda, eta)?;
        let (l_n, u_n) = analytics::resonant_degree_window(lambda, eta)?;
        let v = json!({
            "family": a.family.to_possible_value().map(|p| p.get_name().to_string()),
            "n": ws.n(),
            "lambda": lambda,
            "eta": eta,
            "l_n": l_n,
            "u_n": u_n,
            "leading": est.leading,
            "slack": est.slack,
            "generic": analytics::expected_w_generic(&ws, lambda, eta)?,
            "poisson_proxy": analytics::expected_w_poisson(&ws, lambda, eta)?,
        });
        return ctx.write_text(a.out.as_deref(), &pretty(&v));
    }
    let cfg = ctx.experiment()?;
    let dir = ctx.experiment_dir(&cfg)?;
    let rep = harness::run_wsize_experiment(&cfg)?;
    harness::write_wsize_csv(&rep, BufWriter::new(File::create(dir.join("wsize.csv"))?))?;
    std::fs::write(dir.join("wsize_summary.json"), rep.summary_json()?)?;
    report_failures(&rep.records)
}

fn cmd_coupling(ctx: &Ctx, a: &CouplingArgs) -> CliResult {
    let (g, ws) = load_pair(&a.graph, &a.weights)?;
    g.check_vertex(a.x)?;
    if a.r == 0 {
        return Err(Failure::Usage("--r must be at least 1".into()));
    }
    let ord = degree_order(&g);
    let pr = prune(&g, &ord, a.r);
    let coupling = CouplingContext::new(&g, &ws, a.model.into())?;
    let scope = match a.scope {
        ScopeArg::Full => TreeScope::Full,
        ScopeArg::Spine => TreeScope::Spine,
    };
    let mut reports = Vec::new();
    for rep in 0..a.reps {
        let pair = coupling.build(a.x, a.r - 1, a.seed.wrapping_add(rep), a.node_budget, scope)?;
        reports.push(verify_embedding(&pr.g_nc, a.x, a.r, &pair));
    }
    let failures = reports.iter().filter(|r| !r.pass()).count();
    let v = json!({
        "x": a.x,
        "r": a.r,
        "reps": a.reps,
        "passed": reports.len() - failures,
        "failed": failures,
        "reports": reports,
    });
    ctx.write_text(a.out.as_deref(), &pretty(&v))?;
    if failures > 0 {
        return Err(Failure::Verify(format!("{failures} of {} embeddings failed", a.reps)));
    }
    Ok(())
}

fn cmd_diagnostics(ctx: &Ctx, a: &DiagnosticsArgs) -> CliResult {
    let (g, ws) = load_pair(&a.graph, &a.weights)?;
    let ord = degree_order(&g);
    let xi = match a.xi {
        Some(x) => x,
        None => xi_threshold(a.nu, a.delta, g.n().max(16))?,
    };
    let pr = prune(&g, &ord, a.r);
    let part = vertex_partition(&g, &ws, xi)?;
    let forest = forest_structure(&pr.g_p, &ord)?;
    let input = DiagnosticInput {
        g: &g,
        g_nc: &pr.g_nc,
        forest: &forest,
        ord: &ord,
        ws: &ws,
        v_high: &part.v_high,
        v_mid: &part.v_mid,
    };
    let params = DiagnosticParams {
        nu: a.nu,
        delta: a.delta,
        c: a.c,
    };
    let stats = all_stats(&input, &params)?;
    write_csv(&stats, ctx.create(&a.out)?)?;
    let summary: Vec<_> = stats
        .iter()
        .map(|s| json!({"stat": s.name, "max": s.max(), "bound": s.bound, "exceed_fraction": s.exceed_fraction()}))
        .collect();
    eprintln!("{}", pretty(&json!(summary)));
    Ok(())
}

fn cmd_scaling(ctx: &Ctx) -> CliResult {
    let cfg = ctx.experiment()?;
    let dir = ctx.experiment_dir(&cfg)?;
    let rep = harness::run_scaling_experiment(&cfg)?;
    harness::write_scaling_csv(&rep, BufWriter::new(File::create(dir.join("scaling.csv"))?))?;
    std::fs::write(dir.join("scaling_summary.json"), rep.summary_json()?)?;
    report_failures(&rep.records)
}

fn cmd_localize(ctx: &Ctx) -> CliResult {
    let cfg = ctx.experiment()?;
    let dir = ctx.experiment_dir(&cfg)?;
    let rep = harness::run_localization_experiment(&cfg).map_err(|e| match e {
        Error::InvalidParameter(m) => Failure::Usage(m),
        other => other.into(),
    })?;
    harness::write_localization_csv(&rep, BufWriter::new(File::create(dir.join("localize.csv"))?))?;
    std::fs::write(dir.join("localize_summary.json"), rep.summary_json()?)?;
    report_failures(&rep.records)
}

fn cmd_report(ctx: &Ctx, a: &ReportArgs) -> CliResult {
    let file = File::open(&a.csv)?;
    let summary = harness::summarize_csv(file, &a.columns)?;
    if summary.is_empty() {
        return Err(Failure::Runtime(format!("{} has no usable rows", a.csv.display())));
    }
    ctx.write_text(a.out.as_deref(), &serde_json::to_string_pretty(&summary).map_err(Error::from)?)
}

fn run(cli: Cli) -> CliResult {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let ctx = Ctx {
        config: cli.config,
        out_dir: cli.out_dir,
    };
    if let Some(d) = &ctx.out_dir {
        std::fs::create_dir_all(d)?;
    }
    match &cli.command {
        Command::Weights(a) => cmd_weights(&ctx, a),
        Command::Sample(a) => cmd_sample(&ctx, a),
        Command::Prune(a) => cmd_prune(&ctx, a),
        Command::Basis(a) => cmd_basis(&ctx, a),
        Command::Spectrum(a) => cmd_spectrum(&ctx, a),
        Command::Semiloc(a) => cmd_semiloc(&ctx, a),
        Command::Wsize(a) => cmd_wsize(&ctx, a),
        Command::CouplingCheck(a) => cmd_coupling(&ctx, a),
        Command::Diagnostics(a) => cmd_diagnostics(&ctx, a),
        Command::Scaling(_) => cmd_scaling(&ctx),
        Command::Localize(_) => cmd_localize(&ctx),
        Command::Report(a) => cmd_report(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Verify(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(EXIT_VERIFY)
        }
    }
}
