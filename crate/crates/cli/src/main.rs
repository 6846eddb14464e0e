use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cauchy_gft::bench::{self, BenchConfig, Method, Mode};
use cauchy_gft::filter::{apply_layer, Filter, FilterBank, L2gLayerConfig};
use cauchy_gft::graph::{barabasi_albert, build_laplacian, read_graph, write_graph, Graph, LaplacianKind};
use cauchy_gft::hgf::{FactorizedGft, DENSE_LIMIT};
use cauchy_gft::linalg::{dense_eig, set_blas_threads};
use cauchy_gft::partition::{
    build_plan, CostModel, PartitionConfig, PartitionOutcome, PlanDocument, SparsifyMode,
    SparsifyPolicy,
};
use cauchy_gft::sparsify::{verify_spectral_bound, SampleTarget};
use cauchy_gft::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

const VERIFY_TOLERANCE: f64 = 1e-8;

#[derive(Parser)]
#[command(name = "cauchy-gft", version, about = "Exact graph Fourier transforms via hierarchical Cauchy factorizations")]
struct Cli {
    /// BLAS/LAPACK threads; 1 runs everything sequentially.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a plan, factorize, and optionally check against a dense solve.
    Factorize(FactorizeArgs),
    /// Runtime scaling experiments, written as CSV.
    Bench(BenchArgs),
    /// Apply a spectral filter layer to a signal.
    Filter(FilterArgs),
    /// Build a merge plan by recursive spectral bisection.
    Partition(PartitionArgs),
    /// Sparsify the top-level interface and check the quadratic-form bound.
    Sparsify(SparsifyArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Edge-list file.
    #[arg(long, conflicts_with = "ba")]
    graph: Option<PathBuf>,
    /// Barabási–Albert graph: N M SEED.
    #[arg(long, num_args = 3, value_names = ["N", "M", "SEED"])]
    ba: Option<Vec<u64>>,
}

impl GraphArgs {
    fn load(&self) -> Result<Graph, CliError> {
        match (&self.graph, &self.ba) {
            (Some(p), None) => Ok(read_graph(p)?),
            (None, Some(v)) => Ok(barabasi_albert(v[0] as usize, v[1] as usize, v[2])?),
            _ => Err(CliError::Input("give either --graph or --ba".into())),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SparsifyArg {
    None,
    Fallback,
    Always,
}

#[derive(Args)]
struct PlanArgs {
    /// Load a plan written by `partition` instead of building one.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Split exactly this many levels, ignoring the cost model.
    #[arg(long, conflicts_with = "one_level")]
    levels: Option<usize>,
    /// A single bisection.
    #[arg(long)]
    one_level: bool,
    #[arg(long, default_value_t = 1.0)]
    eig_coeff: f64,
    #[arg(long, default_value_t = 1.0)]
    merge_coeff: f64,
    #[arg(long, value_enum, default_value_t = SparsifyArg::None)]
    sparsify: SparsifyArg,
    /// Keep fraction of interface draws.
    #[arg(long, conflicts_with = "target_k")]
    rho: Option<f64>,
    /// Keep this many distinct interface edges.
    #[arg(long)]
    target_k: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    eps_jl: f64,
    #[arg(long, env = "CAUCHY_GFT_SEED", default_value_t = 0)]
    seed: u64,
}

impl PlanArgs {
    fn config(&self) -> PartitionConfig {
        let mut cfg = match (self.levels, self.one_level) {
            (Some(l), _) => PartitionConfig::fixed_levels(l),
            (None, true) => PartitionConfig::one_level(),
            (None, false) => PartitionConfig {
                cost: CostModel {
                    eig_coeff: self.eig_coeff,
                    merge_coeff: self.merge_coeff,
                },
                ..Default::default()
            },
        };
        let target = match (self.rho, self.target_k) {
            (_, Some(k)) => SampleTarget::Count { k },
            (Some(rho), None) => SampleTarget::Fraction { rho },
            (None, None) => SampleTarget::Fraction { rho: 0.5 },
        };
        cfg.sparsify = SparsifyPolicy {
            mode: match self.sparsify {
                SparsifyArg::None => SparsifyMode::None,
                SparsifyArg::Fallback => SparsifyMode::Fallback,
                SparsifyArg::Always => SparsifyMode::Always,
            },
            target,
            eps_jl: self.eps_jl,
        };
        cfg.seed = self.seed;
        cfg
    }

    /// The plan and the graph it is valid for.
    fn resolve(&self, g: Graph) -> Result<(PartitionOutcome, PartitionConfig), CliError> {
        match &self.plan {
            Some(p) => {
                let doc = PlanDocument::from_json(&std::fs::read_to_string(p)?)?;
                doc.plan.validate_for(&g)?;
                let outcome = PartitionOutcome {
                    plan: doc.plan,
                    graph: g,
                    splits: doc.splits,
                };
                Ok((outcome, doc.config))
            }
            None => {
                let cfg = self.config();
                Ok((build_plan(&g, &cfg)?, cfg))
            }
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Combinatorial,
    Normalized,
}

impl From<KindArg> for LaplacianKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Combinatorial => LaplacianKind::Combinatorial,
            KindArg::Normalized => LaplacianKind::Normalized,
        }
    }
}

#[derive(Args)]
struct FactorizeArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long, value_enum, default_value_t = KindArg::Combinatorial)]
    kind: KindArg,
    /// Compare against a dense eigendecomposition.
    #[arg(long)]
    verify: bool,
    /// Print every eigenvalue.
    #[arg(long)]
    eigenvalues: bool,
    /// Where to write the factorization (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Nodes,
    Cut,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Nodes)]
    mode: ModeArg,
    /// Graph sizes for nodes mode.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    sizes: Option<Vec<usize>>,
    /// Interface sizes for cut mode.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    ks: Option<Vec<usize>>,
    /// Graph size for cut mode.
    #[arg(long, default_value_t = 8000)]
    n: usize,
    /// Interface size for nodes mode.
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long, default_value_t = 4000)]
    ed_max_n: usize,
    #[arg(long, default_value_t = 2000)]
    verify_max_n: usize,
    #[arg(long, env = "CAUCHY_GFT_SEED", default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    /// Factorization written by `factorize --out`.
    #[arg(long)]
    factorization: PathBuf,
    /// Filter on the final spectrum: unit, power:D, heat:T, lowpass:C or bank:PATH.
    #[arg(long, conflicts_with = "layer")]
    global: Option<String>,
    /// Full layer configuration (JSON).
    #[arg(long)]
    layer: Option<PathBuf>,
    /// Signal CSV: n rows, one column per channel.
    #[arg(long)]
    signal: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PartitionArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    plan: PlanArgs,
    /// Plan document destination (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the graph with sparsified interfaces.
    #[arg(long)]
    graph_out: Option<PathBuf>,
}

#[derive(Args)]
struct SparsifyArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value_t = 0.5, conflicts_with = "target_k")]
    rho: f64,
    #[arg(long)]
    target_k: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    eps_jl: f64,
    /// Accepted distortion of the quadratic form.
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Exit with status 1 if the bound fails.
    #[arg(long)]
    verify: bool,
    #[arg(long, env = "CAUCHY_GFT_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Verify(String),
    Internal(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::ConvergenceFailure(_)
            | Error::BracketFailure { .. }
            | Error::SolverNotConverged { .. } => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    set_blas_threads(cli.threads);
    let result = match cli.command {
        Command::Factorize(a) => factorize(a),
        Command::Bench(a) => run_bench(a),
        Command::Filter(a) => filter(a),
        Command::Partition(a) => partition(a),
        Command::Sparsify(a) => sparsify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Verify(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Internal(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn factorize(a: FactorizeArgs) -> Result<(), CliError> {
    let g = a.graph.load()?;
    let kind = LaplacianKind::from(a.kind);
    let (outcome, _) = a.plan.resolve(g)?;
    let f = FactorizedGft::factorize(&outcome.graph, &outcome.plan, kind)?;
    println!(
        "n = {}, leaves = {}, levels = {}, bridge edges = {}",
        f.n(),
        outcome.plan.num_leaves(),
        outcome.plan.levels(),
        outcome.plan.num_bridges()
    );
    if a.eigenvalues || f.n() <= 20 {
        let list: Vec<String> = f.lambda_final.iter().map(|l| format!("{l:.12}")).collect();
        println!("eigenvalues: {}", list.join(" "));
    }
    if let Some(p) = &a.out {
        f.save(p)?;
    }
    if a.verify {
        if f.n() > DENSE_LIMIT {
            return Err(CliError::Input(format!(
                "--verify needs n ≤ {DENSE_LIMIT}, got {}",
                f.n()
            )));
        }
        let l = build_laplacian(&outcome.graph, kind)?;
        let dense = dense_eig(&l)?;
        let eig_err = dense
            .values
            .iter()
            .zip(&f.lambda_final)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let dense_l = l.to_dense();
        let rec = f.reconstruct_operator(&f.lambda_final)?;
        let rec_err = (rec - &dense_l).norm() / dense_l.norm().max(f64::MIN_POSITIVE);
        println!("max eigenvalue error: {eig_err:e}");
        println!("relative reconstruction error: {rec_err:e}");
        if !(eig_err <= VERIFY_TOLERANCE && rec_err <= VERIFY_TOLERANCE) {
            return Err(CliError::Verify(format!(
                "errors {eig_err:e} / {rec_err:e} exceed {VERIFY_TOLERANCE:e}"
            )));
        }
    }
    Ok(())
}

fn run_bench(a: BenchArgs) -> Result<(), CliError> {
    let mut cfg = match a.mode {
        ModeArg::Nodes => {
            let sizes = a.sizes.unwrap_or_else(|| vec![1000, 2000, 4000, 8000]);
            BenchConfig {
                ks: vec![a.k],
                ..BenchConfig::nodes(sizes)
            }
        }
        ModeArg::Cut => BenchConfig::cut(a.n, a.ks.unwrap_or_else(|| vec![2, 4, 8, 16, 32])),
    };
    if let Some(m) = a.methods {
        cfg.methods = m
            .iter()
            .map(|s| s.parse::<Method>())
            .collect::<Result<_, _>>()?;
    }
    cfg.repeats = a.repeats;
    cfg.seed = a.seed;
    cfg.ed_max_n = a.ed_max_n;
    cfg.verify_max_n = a.verify_max_n;
    cfg.validate()?;
    let records = bench::run(&cfg)?;
    write_or_print(a.out.as_deref(), &bench::to_csv(&records))?;
    let mode = match a.mode {
        ModeArg::Nodes => Mode::Nodes,
        ModeArg::Cut => Mode::Cut,
    };
    for m in [Method::Ed, Method::Cf, Method::Pre] {
        let (xs, ys) = bench::series(&records, m, mode);
        if let Ok(s) = bench::loglog_slope(&xs, &ys) {
            eprintln!("{m} log-log slope: {s:.3}");
        }
    }
    Ok(())
}

fn parse_filter(spec: &str) -> Result<Filter, CliError> {
    let (name, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let num = || {
        arg.parse::<f64>()
            .map_err(|_| CliError::Input(format!("bad filter argument in {spec:?}")))
    };
    Ok(match name {
        "unit" => Filter::Unit,
        "power" => Filter::Power {
            degree: arg
                .parse()
                .map_err(|_| CliError::Input(format!("bad degree in {spec:?}")))?,
        },
        "heat" => Filter::Heat { t: num()? },
        "lowpass" => Filter::LowPass { cutoff: num()? },
        "bank" => Filter::Bank {
            bank: FilterBank::load(arg)?,
        },
        _ => return Err(CliError::Input(format!("unknown filter {spec:?}"))),
    })
}

fn read_signal(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| CliError::Input(format!("signal line {}: not a number", i + 1)))?;
        if rows.first().is_some_and(|r| r.len() != row.len()) {
            return Err(CliError::Input(format!("signal line {}: ragged row", i + 1)));
        }
        rows.push(row);
    }
    let c = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

fn format_signal(y: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in y.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

fn filter(a: FilterArgs) -> Result<(), CliError> {
    let f = FactorizedGft::load(&a.factorization)?;
    let cfg = match (&a.layer, &a.global) {
        (Some(p), _) => L2gLayerConfig::from_json(&std::fs::read_to_string(p)?)?,
        (None, Some(spec)) => L2gLayerConfig::global(&f, parse_filter(spec)?),
        (None, None) => L2gLayerConfig::unit(&f),
    };
    let x = read_signal(&a.signal)?;
    let y = apply_layer(&f, &cfg, &x)?;
    write_or_print(a.out.as_deref(), &format_signal(&y))
}

fn partition(a: PartitionArgs) -> Result<(), CliError> {
    let g = a.graph.load()?;
    let cfg = a.plan.config();
    let outcome = build_plan(&g, &cfg)?;
    let plan = &outcome.plan;
    eprintln!(
        "leaves = {}, levels = {}, max interface = {}, bridge edges = {}",
        plan.num_leaves(),
        plan.levels(),
        plan.max_interface(),
        plan.num_bridges()
    );
    if let Some(p) = &a.graph_out {
        write_graph(&outcome.graph, p)?;
    }
    write_or_print(a.out.as_deref(), &PlanDocument::new(&cfg, &outcome).to_json()?)
}

fn sparsify(a: SparsifyArgs) -> Result<(), CliError> {
    let g = a.graph.load()?;
    let target = match a.target_k {
        Some(k) => SampleTarget::Count { k },
        None => SampleTarget::Fraction { rho: a.rho },
    };
    let cfg = PartitionConfig {
        sparsify: SparsifyPolicy {
            mode: SparsifyMode::Always,
            target,
            eps_jl: a.eps_jl,
        },
        seed: a.seed,
        ..PartitionConfig::one_level()
    };
    let outcome = build_plan(&g, &cfg)?;
    if let Some(s) = outcome.splits.first() {
        eprintln!("interface: {} crossing edges, {} kept", s.crossing, s.interface);
    }
    let kind = LaplacianKind::Combinatorial;
    let report = verify_spectral_bound(
        &build_laplacian(&g, kind)?,
        &build_laplacian(&outcome.graph, kind)?,
        a.eps,
        a.trials,
        a.seed,
    )?;
    let (lo, hi) = report.extremes();
    eprintln!("quadratic-form ratio range: [{lo:.6}, {hi:.6}], eps = {}", a.eps);
    if let Some(p) = &a.out {
        write_graph(&outcome.graph, p)?;
    }
    if a.verify && !report.pass {
        return Err(CliError::Verify(format!(
            "ratios [{lo:.4}, {hi:.4}] outside [1 - {0}, 1 + {0}]",
            a.eps
        )));
    }
    Ok(())
}
