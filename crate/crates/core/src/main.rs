use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use hybrid_rank::analysis::{tradeoff_contour, SpectrumSummary, DENSE_SPECTRUM_LIMIT};
use hybrid_rank::bench::{benchmark, write_bench_csv, BenchGrid};
use hybrid_rank::config::Config;
use hybrid_rank::eval::mean_average_precision;
use hybrid_rank::graph::{DEFAULT_EXPONENT, DEFAULT_K};
use hybrid_rank::hybrid::DEFAULT_OBSERVATION_SIZE;
use hybrid_rank::io;
use hybrid_rank::spectral::DEFAULT_ALPHA;
use hybrid_rank::synthetic::{generate_synthetic, EvalSet, SyntheticSpec};
use hybrid_rank::temporal::{DEFAULT_MAX_ITERS, DEFAULT_REL_TOL};
use hybrid_rank::{
    build_knn_graph, largest_component, sparsify, symmetric_normalize, top_eigenpairs, DescriptorSet, Error,
    FilterParams, QuerySettings, RankingIndex, RankingMode, Result, SpectralBasis,
};

const THREADS_ENV: &str = "HYBRID_RANK_THREADS";

#[derive(Parser)]
#[command(name = "hybrid-rank", version, about = "Hybrid spectral-temporal manifold ranking")]
struct Cli {
    /// key=value file supplying defaults for any flag below; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a clustered synthetic dataset with queries and relevance.
    Gen(GenArgs),
    /// Build the raw reciprocal kNN graph of a descriptor file.
    Graph(GraphArgs),
    /// Top-r eigenbasis of the normalized largest component.
    Decompose(DecomposeArgs),
    /// Rank the dataset for one query.
    Rank(RankArgs),
    /// Condition numbers and the CG error-bound contour.
    Analyze(AnalyzeArgs),
    /// Mean average precision over a query set.
    Eval(EvalArgs),
    /// Timing, memory and mAP sweep described by a grid file.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Receives data.hdrk, queries.hdrk and relevance.txt.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    exponent: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Raw graph file.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    rank: Option<usize>,
    /// Fraction of basis entries to zero.
    #[arg(long)]
    sparsity: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Bin,
}

/// Dataset, graph and per-query settings shared by `rank` and `eval`.
#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    data: PathBuf,
    /// Raw graph file.
    #[arg(long)]
    graph: PathBuf,
    /// Precomputed basis; computed on the fly when absent and needed.
    #[arg(long)]
    basis: Option<PathBuf>,
    #[arg(long)]
    queries: PathBuf,
    /// temporal, truncated, spectral, hybrid or nn.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    sparsity: Option<f64>,
    #[arg(long)]
    shortlist: Option<usize>,
    /// Nonzeros of the observation vector.
    #[arg(long)]
    observation: Option<usize>,
    #[arg(long)]
    exponent: Option<u32>,
}

#[derive(Args)]
struct RankArgs {
    #[command(flatten)]
    q: QueryArgs,
    /// Row of the query file to rank for.
    #[arg(long, default_value_t = 0)]
    query: usize,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    #[arg(long)]
    out: PathBuf,
    /// CSV of per-iteration CG residuals.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Write the φ_i(ℒ_α(𝒲_r)) grid.
    #[arg(long)]
    contour: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    rmax: Option<usize>,
    #[arg(long)]
    imax: Option<usize>,
    /// Raw graph file; its normalized largest component is analyzed.
    #[arg(long, conflicts_with = "spectrum")]
    graph: Option<PathBuf>,
    /// Spectrum CSV (j,lambda).
    #[arg(long)]
    spectrum: Option<PathBuf>,
    /// Lower bound for the smallest eigenvalue when it is not computed.
    #[arg(long, allow_hyphen_values = true)]
    lambda_n: Option<f64>,
    #[arg(long)]
    spectrum_out: Option<PathBuf>,
    /// Contour CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Report mean average precision.
    #[arg(long)]
    map: bool,
    #[command(flatten)]
    q: QueryArgs,
    #[arg(long)]
    relevance: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// key=value grid: modes, ranks, iterations, sparsity, shortlist, ...
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    basis: Option<PathBuf>,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    relevance: PathBuf,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flag, then config key, then default.
struct Resolver {
    config: Config,
}

impl Resolver {
    fn get<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.config.get(key)?.unwrap_or(default)),
        }
    }

    fn maybe<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.config.get(key),
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let cfg = Resolver { config };
    match cli.command {
        Command::Gen(a) => gen(&cfg, a),
        Command::Graph(a) => graph(&cfg, a),
        Command::Decompose(a) => decompose(&cfg, a),
        Command::Rank(a) => rank(&cfg, a),
        Command::Analyze(a) => analyze(&cfg, a),
        Command::Eval(a) => eval(&cfg, a),
        Command::Bench(a) => bench(a),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize =
        value.trim().parse().map_err(|_| Error::InvalidParameter(format!("{THREADS_ENV}='{value}' is not a count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidState(format!("thread pool: {e}")))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn load_descriptors(path: &Path) -> Result<DescriptorSet> {
    io::load(path, io::read_descriptors)
}

fn load_graph(path: &Path) -> Result<hybrid_rank::SparseGraph> {
    io::load(path, io::read_graph)
}

fn gen(cfg: &Resolver, a: GenArgs) -> Result<()> {
    let d = SyntheticSpec::default();
    let spec = SyntheticSpec {
        clusters: cfg.get(a.clusters, "clusters", d.clusters)?,
        points_per_cluster: cfg.get(a.points, "points", d.points_per_cluster)?,
        dim: cfg.get(a.dim, "dim", d.dim)?,
        noise: cfg.get(a.noise, "noise", d.noise)?,
        seed: cfg.get(a.seed, "seed", d.seed)?,
    };
    let (data, eval) = generate_synthetic(&spec)?;
    std::fs::create_dir_all(&a.out_dir)?;
    io::save(&a.out_dir.join("data.hdrk"), &data, io::write_descriptors)?;
    io::save(&a.out_dir.join("queries.hdrk"), &eval.queries, io::write_descriptors)?;
    io::save(&a.out_dir.join("relevance.txt"), eval.relevance.as_slice(), io::write_relevance)?;
    info!("wrote {} descriptors and {} queries to {}", data.len(), eval.len(), a.out_dir.display());
    Ok(())
}

fn graph(cfg: &Resolver, a: GraphArgs) -> Result<()> {
    let data = load_descriptors(&a.data)?;
    let k = cfg.get(a.k, "k", DEFAULT_K)?;
    let exponent = cfg.get(a.exponent, "exponent", DEFAULT_EXPONENT)?;
    let g = build_knn_graph(&data, k, exponent)?;
    let comps = largest_component(&g);
    info!(
        "graph: n={} nnz={} components={} largest={}",
        g.n(),
        g.nnz(),
        comps.component_count(),
        comps.largest_size()
    );
    io::save(&a.out, &g, io::write_graph)
}

fn decompose(cfg: &Resolver, a: DecomposeArgs) -> Result<()> {
    let raw = load_graph(&a.graph)?;
    let r = cfg.get(a.rank, "rank", 100)?;
    let sparsity = cfg.get(a.sparsity, "sparsity", 0.0)?;
    let comps = largest_component(&raw);
    let g = symmetric_normalize(&comps.restrict(&raw))?;
    let mut basis = top_eigenpairs(&g, r)?;
    if sparsity > 0.0 {
        basis = sparsify(&basis, sparsity)?;
    }
    info!("basis: n={} rank={} sparsity={:.4} bytes={}", basis.n(), basis.rank(), basis.sparsity(), basis.memory_bytes());
    io::save(&a.out, &basis, io::write_basis)
}

/// Loaded index plus the basis the query settings ask for.
struct Prepared {
    index: RankingIndex,
    basis: SpectralBasis,
    settings: QuerySettings,
    queries: DescriptorSet,
}

fn prepare(cfg: &Resolver, q: QueryArgs) -> Result<Prepared> {
    let d = QuerySettings::default();
    let mode: RankingMode = cfg.get(q.mode, "mode", d.mode.to_string())?.parse()?;
    let settings = QuerySettings {
        mode,
        params: FilterParams::new(cfg.get(q.alpha, "alpha", DEFAULT_ALPHA)?)?,
        observation_size: cfg.get(q.observation, "observation", DEFAULT_OBSERVATION_SIZE)?,
        exponent: cfg.get(q.exponent, "exponent", DEFAULT_EXPONENT)?,
        max_iters: cfg.get(q.iters, "iters", DEFAULT_MAX_ITERS)?,
        rel_tol: cfg.get(q.tol, "tol", DEFAULT_REL_TOL)?,
        shortlist: cfg.get(q.shortlist, "shortlist", d.shortlist)?,
    };
    let index = RankingIndex::from_graph(load_descriptors(&q.data)?, load_graph(&q.graph)?)?;
    let queries = load_descriptors(&q.queries)?;
    let needs_basis = matches!(mode, RankingMode::Spectral | RankingMode::Hybrid);
    let rank = cfg.maybe(q.rank, "rank")?;
    let sparsity = cfg.get(q.sparsity, "sparsity", 0.0)?;
    let mut basis = match (&q.basis, needs_basis) {
        (_, false) => SpectralBasis::empty(index.graph().n()),
        (Some(path), true) => {
            let b: SpectralBasis = io::load(path, io::read_basis)?;
            match rank {
                Some(r) if r < b.rank() => b.truncated(r)?,
                Some(r) if r > b.rank() => {
                    return Err(Error::InvalidParameter(format!("basis file holds rank {} < {r}", b.rank())))
                }
                _ => b,
            }
        }
        (None, true) => top_eigenpairs(index.graph(), rank.unwrap_or(0))?,
    };
    if sparsity > 0.0 && basis.rank() > 0 && !basis.is_sparse() {
        basis = sparsify(&basis, sparsity)?;
    }
    Ok(Prepared { index, basis, settings, queries })
}

fn rank(cfg: &Resolver, a: RankArgs) -> Result<()> {
    let p = prepare(cfg, a.q)?;
    if a.query >= p.queries.len() {
        return Err(Error::InvalidParameter(format!("query {} out of range ({} queries)", a.query, p.queries.len())));
    }
    let query = p.queries.row(a.query);
    let sims = p.index.data().similarities(query)?;
    let y = hybrid_rank::build_observation(query, p.index.data(), p.settings.observation_size, p.settings.exponent)?;
    let result = p.index.rank_with_basis(&p.basis, &sims, &y.vector, &p.settings)?;
    match a.format {
        OutputFormat::Csv => io::write_ranking_csv(create(&a.out)?, &result)?,
        OutputFormat::Bin => io::write_ranking_binary(create(&a.out)?, &result)?,
    }
    if let Some(rep) = &result.report {
        info!("cg: {} iterations, final residual {:e}", rep.iterations_run, rep.final_residual());
        if let Some(path) = &a.report {
            rep.write_csv(create(path)?)?;
        }
    }
    Ok(())
}

fn eval(cfg: &Resolver, a: EvalArgs) -> Result<()> {
    if !a.map {
        return Err(Error::InvalidParameter("eval needs a metric; pass --map".into()));
    }
    let p = prepare(cfg, a.q)?;
    let relevance = io::load(&a.relevance, io::read_relevance)?;
    let eval = EvalSet::new(p.queries, relevance, p.index.data().len())?;
    let results = eval
        .queries
        .rows()
        .map(|q| {
            let sims = p.index.data().similarities(q)?;
            let y = hybrid_rank::build_observation(q, p.index.data(), p.settings.observation_size, p.settings.exponent)?;
            p.index.rank_with_basis(&p.basis, &sims, &y.vector, &p.settings)
        })
        .collect::<Result<Vec<_>>>()?;
    let map = mean_average_precision(&results, &eval, None)?;
    println!("mAP={map:.6}");
    Ok(())
}

fn analyze(cfg: &Resolver, a: AnalyzeArgs) -> Result<()> {
    let alpha = cfg.get(a.alpha, "alpha", DEFAULT_ALPHA)?;
    let r_max = cfg.get(a.rmax, "rmax", 50)?;
    let i_max = cfg.get(a.imax, "imax", 50)?;
    let lambda_n = cfg.maybe(a.lambda_n, "lambda_n")?;
    let spectrum = match (&a.graph, &a.spectrum) {
        (Some(path), _) => {
            let raw = load_graph(path)?;
            let g = symmetric_normalize(&largest_component(&raw).restrict(&raw))?;
            if g.n() <= DENSE_SPECTRUM_LIMIT {
                let s = SpectrumSummary::of_graph(&g)?;
                match lambda_n {
                    Some(l) => SpectrumSummary::new(s.n(), s.leading().to_vec(), l)?,
                    None => s,
                }
            } else {
                let basis = top_eigenpairs(&g, (r_max + 1).min(g.n()))?;
                SpectrumSummary::new(g.n(), basis.eigenvalues().to_vec(), lambda_n.unwrap_or(-1.0))?
            }
        }
        (None, Some(path)) => {
            let s = SpectrumSummary::read_csv(BufReader::new(File::open(path)?))?;
            match lambda_n {
                Some(l) => SpectrumSummary::new(s.n(), s.leading().to_vec(), l)?,
                None => s,
            }
        }
        (None, None) => return Err(Error::InvalidParameter("analyze needs --graph or --spectrum".into())),
    };
    if let Some(path) = &a.spectrum_out {
        spectrum.write_csv(create(path)?)?;
    }
    if let Some(&l1) = spectrum.leading().first() {
        let kappa = hybrid_rank::analysis::condition_number(alpha, l1, spectrum.smallest())?;
        info!("n={} λ_n={} κ(r=0)={kappa:.4}", spectrum.n(), spectrum.smallest());
    }
    if a.contour {
        let grid = tradeoff_contour(&spectrum, alpha, r_max, i_max)?;
        match &a.out {
            Some(path) => grid.write_csv(create(path)?)?,
            None => grid.write_csv(std::io::stdout().lock())?,
        }
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let grid = BenchGrid::from_config(&Config::load(&a.grid)?)?;
    let mut index = RankingIndex::from_graph(load_descriptors(&a.data)?, load_graph(&a.graph)?)?;
    if let Some(path) = &a.basis {
        index.set_basis(io::load(path, io::read_basis)?)?;
    }
    let queries = load_descriptors(&a.queries)?;
    let relevance = io::load(&a.relevance, io::read_relevance)?;
    let eval = EvalSet::new(queries, relevance, index.data().len())?;
    let rows = benchmark(&index, &eval, &grid)?;
    match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            write_bench_csv(&mut w, &rows)?;
            w.flush()?;
        }
        None => write_bench_csv(std::io::stdout().lock(), &rows)?,
    }
    Ok(())
}
