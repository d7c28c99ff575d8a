//! `lakediv` command line: column alignment, outer union, tuple embedding
//! export/import, diversification, benchmark evaluation and the experiment
//! suites.
//!
//! Exit codes: 0 success, 1 configuration error, 2 some queries failed,
//! 3 internal error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lakediv::column_align::{align_columns, alignment_prf, outer_union, truth_pairs, EmbedMode, HashedBagProvider};
use lakediv::diversify::{Algorithm, DiversifyParams};
use lakediv::harness::{
    ablate_pruning, bench_synthetic, case_study, generate, rows_csv, run_pipeline, scale_csv, scale_exponents_csv,
    scale_runtime, search_tables, serialize_query_and_pool, sweep_p, union_csv, BenchReport, CaseMethod,
    PipelineReport, ProviderChoice, RunConfig, ScaleAxis, SyntheticSpec,
};
use lakediv::lake_model::{Manifest, Table};
use lakediv::serialize_embed::{
    embed_tuples, export_serialized, read_serialized, write_embeddings_jsonl, Distance, HashedPairProvider,
    JsonlTupleProvider, TupleProvider,
};

#[derive(Parser, Debug)]
#[command(name = "lakediv", version, about = "Diverse unionable tuple search over a data lake")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Align candidate columns to each query table.
    Align(LakeArgs),
    /// Outer-union the aligned candidates of each query.
    Union(LakeArgs),
    /// Export serialized tuples for an external embedder, or check an
    /// embedding file before import.
    #[command(subcommand)]
    Embed(EmbedCommand),
    /// Run the full pipeline and write per-query artifacts.
    Diversify(PipelineArgs),
    /// Run several algorithms over a benchmark and write win-count reports.
    Evaluate(PipelineArgs),
    /// Evaluate algorithms on generated instances.
    Bench(BenchArgs),
    /// Mean diversity of DUST for each cluster multiplier p.
    SweepP(SweepArgs),
    /// DUST runtime and diversity with and without pruning.
    AblatePrune(AblateArgs),
    /// Runtime curves over pool size or k, with fitted growth exponents.
    Scale(ScaleArgs),
    /// Novel values per query column as k grows.
    CaseStudy(CaseArgs),
}

#[derive(Subcommand, Debug)]
enum EmbedCommand {
    /// Write `<query>.ser.txt` and `<query>.index.jsonl` per query.
    Export {
        #[command(flatten)]
        lake: LakeArgs,
        /// Also write `<query>.jsonl` with built-in vectors in the import format.
        #[arg(long)]
        vectors: bool,
    },
    /// Validate an embedding file, optionally against an export index.
    Import {
        /// JSON Lines embedding file.
        #[arg(long)]
        vectors: PathBuf,
        /// `<query>.index.jsonl` whose tuples must all have vectors.
        #[arg(long)]
        index: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct LakeArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = AlignMode::Column)]
    align_mode: AlignMode,
    /// Tables kept by the built-in candidate search when the manifest lists none.
    #[arg(long, default_value_t = 10)]
    search_top: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlignMode {
    Column,
    Cell,
}

impl From<AlignMode> for EmbedMode {
    fn from(m: AlignMode) -> Self {
        match m {
            AlignMode::Column => EmbedMode::Column,
            AlignMode::Cell => EmbedMode::Cell,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct ParamArgs {
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Pruning budget, or `none`.
    #[arg(long, default_value = "2500", value_parser = parse_budget)]
    s: Budget,
    #[arg(long, default_value_t = 2)]
    p: usize,
    /// Diversity weight for GMC and GNE.
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    #[arg(long, default_value_t = 3)]
    rcl_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "cosine", value_parser = parse_distance)]
    distance: Distance,
}

#[derive(Debug, Clone, Copy)]
struct Budget(Option<usize>);

fn parse_budget(s: &str) -> Result<Budget, String> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(Budget(None));
    }
    s.parse().map(|v| Budget(Some(v))).map_err(|e| format!("{e}"))
}

fn parse_distance(s: &str) -> Result<Distance, String> {
    s.parse().map_err(|e: lakediv::Error| e.to_string())
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: lakediv::Error| e.to_string())
}

impl ParamArgs {
    fn params(&self) -> DiversifyParams {
        DiversifyParams {
            k: self.k,
            s: self.s.0,
            p: self.p,
            lambda: self.lambda,
            iterations: self.iterations,
            rcl_size: self.rcl_size,
            seed: self.seed,
            distance: self.distance,
        }
    }
}

#[derive(Args, Debug)]
struct PipelineArgs {
    #[command(flatten)]
    lake: LakeArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Comma-separated algorithms; defaults to dust for `diversify` and all
    /// for `evaluate`.
    #[arg(long, value_delimiter = ',', value_parser = parse_algorithm)]
    algorithm: Vec<Algorithm>,
    /// `builtin` or `import:<file or directory>`.
    #[arg(long, default_value = "builtin")]
    provider: String,
}

#[derive(Args, Debug, Clone)]
struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    n_tuples: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 20)]
    n_tables: usize,
    #[arg(long, default_value_t = 40)]
    n_components: usize,
    #[arg(long, default_value_t = 0.35)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    duplicate_fraction: f64,
    #[arg(long, default_value_t = 10)]
    n_query: usize,
}

impl SynthArgs {
    fn spec(&self, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            dim: self.dim,
            n_tuples: self.n_tuples,
            n_tables: self.n_tables,
            n_components: self.n_components,
            noise: self.noise,
            duplicate_fraction: self.duplicate_fraction,
            n_query: self.n_query,
            seed,
        }
    }

    /// One generator setting per instance; instance `i` uses seed `seed + i`.
    fn specs(&self, seed: u64, instances: usize) -> Vec<SyntheticSpec> {
        (0..instances as u64).map(|i| self.spec(seed + i)).collect()
    }
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    synth: SynthArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_delimiter = ',', value_parser = parse_algorithm)]
    algorithm: Vec<Algorithm>,
    #[arg(long, default_value_t = 10)]
    instances: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    synth: SynthArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    p_values: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    instances: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[command(flatten)]
    synth: SynthArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Comma-separated budgets; `none` means no pruning.
    #[arg(long, value_delimiter = ',', default_value = "none,2500", value_parser = parse_budget)]
    s_values: Vec<Budget>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Axis {
    S,
    K,
}

#[derive(Args, Debug)]
struct ScaleArgs {
    #[command(flatten)]
    synth: SynthArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// `s` varies the pool size, `k` the output size on a fixed pool.
    #[arg(long, value_enum, default_value_t = Axis::S)]
    axis: Axis,
    #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000,7000,10000")]
    values: Vec<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_algorithm, default_value = "dust,gmc")]
    algorithm: Vec<Algorithm>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CaseArgs {
    #[command(flatten)]
    lake: LakeArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_delimiter = ',', value_parser = parse_algorithm, default_value = "dust")]
    algorithm: Vec<Algorithm>,
    #[arg(long, value_delimiter = ',', default_value = "0,5,10,20,30")]
    ks: Vec<usize>,
    /// Query column headers; all columns when absent.
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    #[arg(long, default_value = "builtin")]
    provider: String,
}

/// Error raised for a bad invocation rather than a failed computation.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn is_config_error(err: &anyhow::Error) -> bool {
    use lakediv::Error as E;
    err.chain().any(|e| {
        e.is::<ConfigError>()
            || matches!(
                e.downcast_ref::<E>(),
                Some(
                    E::InvalidParams(_)
                        | E::Io { .. }
                        | E::Csv { .. }
                        | E::Json { .. }
                        | E::RaggedRow { .. }
                        | E::DuplicateHeader { .. }
                        | E::UnknownColumn(_)
                        | E::Malformed(_)
                        | E::Empty(_)
                )
            )
    })
}

enum Outcome {
    Ok,
    QueryFailures(usize),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::QueryFailures(n)) => {
            eprintln!("error: {n} query(ies) failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_config_error(&e) { 1 } else { 3 })
        }
    }
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Align(a) => align(&a),
        Command::Union(a) => union(&a),
        Command::Embed(EmbedCommand::Export { lake, vectors }) => embed_export(&lake, vectors),
        Command::Embed(EmbedCommand::Import { vectors, index }) => embed_import(&vectors, index.as_deref()),
        Command::Diversify(a) => diversify_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Bench(a) => bench(a),
        Command::SweepP(a) => sweep(a),
        Command::AblatePrune(a) => ablate(a),
        Command::Scale(a) => scale(a),
        Command::CaseStudy(a) => case(a),
    }
}

fn emit(out: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

struct Lake {
    manifest: Manifest,
    queries: Vec<Table>,
    tables: Vec<Table>,
}

fn load_lake(path: &Path) -> Result<Lake> {
    let manifest = Manifest::load(path)?;
    let (queries, tables) = manifest.load_tables()?;
    Ok(Lake {
        manifest,
        queries,
        tables,
    })
}

/// Candidate tables of one query: the manifest's list, else the built-in
/// search.
fn candidates(lake: &Lake, query: &Table, top: usize) -> Result<Vec<Table>> {
    let names = match lake.manifest.candidates.get(&query.name) {
        Some(c) => c.clone(),
        None => search_tables(query, &lake.tables, top)?,
    };
    names
        .iter()
        .map(|n| {
            lake.tables
                .iter()
                .find(|t| &t.name == n)
                .cloned()
                .ok_or_else(|| config_err(format!("candidate table {n:?} of query {} is not in the lake", query.name)))
        })
        .collect()
}

fn align(args: &LakeArgs) -> Result<Outcome> {
    let lake = load_lake(&args.manifest)?;
    let mut prf_rows = String::from("query,precision,recall,f1\n");
    for q in &lake.queries {
        let cands = candidates(&lake, q, args.search_top)?;
        let map = align_columns(q, &cands, &HashedBagProvider::default(), args.align_mode.into())
            .with_context(|| format!("aligning query {}", q.name))?;
        emit(args.out.as_deref(), &format!("{}/alignment.json", q.name), &(map.to_json() + "\n"))?;
        if let Some(truth) = &lake.manifest.alignment_ground_truth {
            let s = alignment_prf(&map, &truth_pairs(q, truth));
            prf_rows.push_str(&format!("{},{},{},{}\n", q.name, s.precision, s.recall, s.f1));
        }
    }
    if lake.manifest.alignment_ground_truth.is_some() {
        match &args.out {
            Some(dir) => emit(Some(dir), "alignment_prf.csv", &prf_rows)?,
            None => eprint!("{prf_rows}"),
        }
    }
    Ok(Outcome::Ok)
}

fn union(args: &LakeArgs) -> Result<Outcome> {
    let lake = load_lake(&args.manifest)?;
    for q in &lake.queries {
        let cands = candidates(&lake, q, args.search_top)?;
        let map = align_columns(q, &cands, &HashedBagProvider::default(), args.align_mode.into())
            .with_context(|| format!("aligning query {}", q.name))?;
        let u = outer_union(q, &cands, &map);
        emit(args.out.as_deref(), &format!("{}/union.csv", q.name), &union_csv(&u, usize::MAX)?)?;
    }
    Ok(Outcome::Ok)
}

fn embed_export(args: &LakeArgs, vectors: bool) -> Result<Outcome> {
    let Some(out) = args.out.as_deref() else {
        return Err(config_err("embed export needs --out"));
    };
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let lake = load_lake(&args.manifest)?;
    for q in &lake.queries {
        let cands = candidates(&lake, q, args.search_top)?;
        let map = align_columns(q, &cands, &HashedBagProvider::default(), args.align_mode.into())
            .with_context(|| format!("aligning query {}", q.name))?;
        let u = outer_union(q, &cands, &map);
        let (mut tuples, pool, _) = serialize_query_and_pool(q, &u);
        tuples.extend(pool);
        let mut text = Vec::new();
        let mut index = Vec::new();
        export_serialized(&tuples, &mut text, &mut index)?;
        fs::write(out.join(format!("{}.ser.txt", q.name)), text)?;
        fs::write(out.join(format!("{}.index.jsonl", q.name)), index)?;
        if vectors {
            let m = embed_tuples(&tuples, &HashedPairProvider::default())?;
            let mut buf = Vec::new();
            write_embeddings_jsonl(&m, &mut buf)?;
            fs::write(out.join(format!("{}.jsonl", q.name)), buf)?;
        }
        log::info!("exported {} tuples for {}", tuples.len(), q.name);
    }
    Ok(Outcome::Ok)
}

fn embed_import(vectors: &Path, index: Option<&Path>) -> Result<Outcome> {
    let provider = JsonlTupleProvider::load(vectors)?;
    let mut missing = 0;
    if let Some(index) = index {
        let text_path = index.with_file_name(
            index
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(".index.jsonl"))
                .map(|stem| format!("{stem}.ser.txt"))
                .ok_or_else(|| config_err("index file must be named <query>.index.jsonl"))?,
        );
        let open = |p: &Path| -> Result<std::io::BufReader<fs::File>> {
            Ok(std::io::BufReader::new(fs::File::open(p).with_context(|| format!("opening {}", p.display()))?))
        };
        let entries = read_serialized(open(&text_path)?, open(index)?)?;
        for (text, id) in &entries {
            let tuple = lakediv::serialize_embed::SerializedTuple {
                source: id.clone(),
                text: text.clone(),
                segments: Vec::new(),
            };
            if let Err(e) = provider.embed(&tuple) {
                eprintln!("{e}");
                missing += 1;
            }
        }
    }
    println!("{} vectors, dim {}, provider {}", provider.len(), provider.dim(), provider.tag());
    if missing > 0 {
        bail!(lakediv::Error::Malformed(format!("{missing} indexed tuple(s) have no vector")));
    }
    Ok(Outcome::Ok)
}

fn run_config(args: &PipelineArgs, default_algorithms: &[Algorithm]) -> Result<RunConfig> {
    let provider: ProviderChoice = args.provider.parse()?;
    let params = args.params.params();
    params.validate()?;
    Ok(RunConfig {
        manifest: args.lake.manifest.clone(),
        provider,
        align_mode: args.lake.align_mode.into(),
        params,
        algorithms: if args.algorithm.is_empty() {
            default_algorithms.to_vec()
        } else {
            args.algorithm.clone()
        },
        out_dir: args.lake.out.clone(),
        search_top: args.lake.search_top,
    })
}

fn report_failures(report: &PipelineReport) -> Outcome {
    let failures = report.failures();
    for (q, e) in &failures {
        eprintln!("query {q} failed: {e}");
    }
    if failures.is_empty() {
        Outcome::Ok
    } else {
        Outcome::QueryFailures(failures.len())
    }
}

fn diversify_cmd(args: PipelineArgs) -> Result<Outcome> {
    let config = run_config(&args, &[Algorithm::Dust])?;
    let report = run_pipeline(&config)?;
    let mut text = String::from("query,method,average,min,selected\n");
    for q in &report.queries {
        if let Ok(run) = &q.outcome {
            for r in &run.runs {
                let ids: Vec<String> = r.result.ids().iter().map(|t| t.to_string()).collect();
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    q.query,
                    r.result.algorithm,
                    r.score.average,
                    r.score.min,
                    ids.join(" ")
                ));
            }
        }
    }
    print!("{text}");
    Ok(report_failures(&report))
}

fn evaluate(args: PipelineArgs) -> Result<Outcome> {
    let config = run_config(&args, &Algorithm::ALL)?;
    let report = run_pipeline(&config)?;
    let (bench, timings) = BenchReport::from_pipeline(&report)?;
    if let Some(out) = &config.out_dir {
        bench.write(&timings, out)?;
    }
    print!("{}", bench.summary_csv());
    Ok(report_failures(&report))
}

fn bench(args: BenchArgs) -> Result<Outcome> {
    let params = args.params.params();
    params.validate()?;
    let algorithms = if args.algorithm.is_empty() { Algorithm::ALL.to_vec() } else { args.algorithm };
    let (report, timings) = bench_synthetic(&args.synth.specs(params.seed, args.instances), &algorithms, &params)?;
    if let Some(out) = &args.out {
        report.write(&timings, out)?;
    }
    print!("{}", report.summary_csv());
    for (q, e) in &report.failures {
        eprintln!("instance {q} failed: {e}");
    }
    Ok(if report.failures.is_empty() {
        Outcome::Ok
    } else {
        Outcome::QueryFailures(report.failures.len())
    })
}

fn sweep(args: SweepArgs) -> Result<Outcome> {
    if args.p_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(config_err("--p-values must be strictly ascending"));
    }
    let params = args.params.params();
    let instances = args
        .synth
        .specs(params.seed, args.instances)
        .iter()
        .map(generate)
        .collect::<lakediv::Result<Vec<_>>>()?;
    let rows = sweep_p(&instances, &params, &args.p_values)?;
    emit(args.out.as_deref(), "sweep_p.csv", &rows_csv(&rows)?)?;
    Ok(Outcome::Ok)
}

fn ablate(args: AblateArgs) -> Result<Outcome> {
    let params = args.params.params();
    let inst = generate(&args.synth.spec(params.seed))?;
    let budgets: Vec<Option<usize>> = args.s_values.iter().map(|b| b.0).collect();
    let rows = ablate_pruning(&inst, &params, &budgets)?;
    emit(args.out.as_deref(), "ablate_prune.csv", &rows_csv(&rows)?)?;
    Ok(Outcome::Ok)
}

fn scale(args: ScaleArgs) -> Result<Outcome> {
    let params = args.params.params();
    let axis = match args.axis {
        Axis::S => ScaleAxis::S,
        Axis::K => ScaleAxis::K,
    };
    let report = scale_runtime(&args.synth.spec(params.seed), &args.algorithm, axis, &args.values, &params, args.repeats)?;
    emit(args.out.as_deref(), "scale.csv", &scale_csv(&report))?;
    emit(args.out.as_deref(), "scale_exponents.csv", &scale_exponents_csv(&report))?;
    Ok(Outcome::Ok)
}

fn case(args: CaseArgs) -> Result<Outcome> {
    let provider: ProviderChoice = args.provider.parse()?;
    let params = args.params.params();
    let lake = load_lake(&args.lake.manifest)?;
    let mut methods: Vec<CaseMethod> = args.algorithm.iter().map(|&a| CaseMethod::Algorithm(a)).collect();
    methods.push(CaseMethod::TopSimilar);
    let mut by_query = BTreeMap::new();
    let mut failures = 0;
    for q in &lake.queries {
        let names: Option<Vec<String>> = lake.manifest.candidates.get(&q.name).cloned();
        let rows = provider.for_query(&q.name).and_then(|p| {
            case_study(q, &lake.tables, names.as_deref(), p.as_ref(), &methods, &args.ks, &args.columns, &params)
        });
        match rows {
            Ok(rows) => {
                by_query.insert(q.name.clone(), rows);
            }
            Err(e) => {
                eprintln!("query {} failed: {e}", q.name);
                failures += 1;
            }
        }
    }
    let mut text = String::from("query,method,k,column,novel_values\n");
    for (q, rows) in &by_query {
        let body = rows_csv(rows)?;
        for line in body.lines().skip(1) {
            text.push_str(&format!("{q},{line}\n"));
        }
    }
    emit(args.lake.out.as_deref(), "case_study.csv", &text)?;
    Ok(if failures == 0 { Outcome::Ok } else { Outcome::QueryFailures(failures) })
}
