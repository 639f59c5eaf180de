//! `sca`: batch driver for consensus construction, balancing, spectral
//! inspection and stochastic clustering.
//!
//! Every subcommand prints a short summary to stdout. With `--out DIR` the
//! full artifacts are written there instead of being dumped to stdout.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sca_core::balance::{self, balance_matrix, BalancedMatrix};
use sca_core::consensus::{consensus_sum, knn_consensus, ConsensusMatrix, KnnMode, Metric};
use sca_core::data::{baseball_consensus, export_histogram, histogram, LoadOptions, Orientation};
use sca_core::ensemble::ClusteringResult;
use sca_core::matrix::io::{read_matrix, write_matrix, write_vector, Metadata};
use sca_core::matrix::{sym_eigen, sym_eigen_with_vectors, BlockPartition, SymMatrix, DEFAULT_EIGEN_TOL};
use sca_core::pipeline::{
    build_ensemble, load_input, pipeline, write_clusters, write_file, ConsensusSpec, EnsembleSpec, Input,
    MemberSpec, PipelineConfig,
};
use sca_core::sca::{run_cca, run_sca, sca_restarts, CcaConfig, SCAConfig, TraceStep};
use sca_core::uncouple::{
    binomial, lambda2_bound_check, perron_cluster, sigma_bound_check, stochastic_complement, DEFAULT_EXACT_LIMIT,
};
use sca_core::{Error, Result};

const BUILTIN_BASEBALL: &str = "builtin:baseball";

#[derive(Parser)]
#[command(name = "sca", version, about = "Stochastic consensus clustering")]
struct Cli {
    /// Seed for ensemble members and random initial vectors.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for output artifacts; created if missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Balancing tolerance on row sums.
    #[arg(long, global = true, default_value_t = balance::DEFAULT_TOL)]
    tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run clustering algorithms repeatedly and save the labelings (JSON lines).
    Ensemble(EnsembleArgs),
    /// Sum the co-membership matrices of a saved ensemble.
    Consensus(ConsensusArgs),
    /// Build a consensus matrix from shared nearest neighbours.
    KnnConsensus(KnnArgs),
    /// Scale a consensus matrix to doubly stochastic form.
    Balance(BalanceArgs),
    /// Eigenvalues of a balanced matrix and the detected cluster count.
    Eigen(EigenArgs),
    /// Cluster by following a random probability vector.
    #[command(alias = "run")]
    Sca(ScaArgs),
    /// Grow a cluster around one chosen element.
    Custom(CustomArgs),
    /// Ensemble, consensus, balance, spectrum and clustering in one go.
    Pipeline(PipelineArgs),
    /// Check uncoupling bounds and stochastic complements on a consensus matrix.
    Check(CheckArgs),
    /// Histogram of the off-diagonal entries of a matrix.
    Hist(HistArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// CSV file, or `builtin:baseball`.
    #[arg(long)]
    input: String,
    #[arg(long, default_value = "rows")]
    orientation: Orientation,
    /// First CSV line is a header.
    #[arg(long)]
    header: bool,
    /// Column (name or 0-based index) with truth labels.
    #[arg(long)]
    labels: Option<String>,
}

impl DataArgs {
    fn input(&self) -> Input {
        if self.input == BUILTIN_BASEBALL {
            return Input::Baseball;
        }
        Input::Csv {
            path: PathBuf::from(&self.input),
            options: LoadOptions {
                orientation: self.orientation,
                has_header: self.header,
                label_column: self.labels.clone(),
            },
        }
    }
}

#[derive(Args)]
struct EnsembleArgs {
    #[command(flatten)]
    data: DataArgs,
    /// `method:k:repetitions`, repeatable, e.g. `nmf:3:100`.
    #[arg(long = "member", required = true)]
    members: Vec<MemberSpec>,
}

#[derive(Args)]
struct ConsensusArgs {
    /// JSON-lines ensemble written by `sca ensemble`.
    #[arg(long)]
    ensemble: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Euclidean,
    Cosine,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Euclidean => Metric::Euclidean,
            MetricArg::Cosine => Metric::Cosine,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Intersection,
    Union,
}

impl From<ModeArg> for KnnMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Intersection => KnnMode::Intersection,
            ModeArg::Union => KnnMode::Union,
        }
    }
}

#[derive(Args, Clone, Copy)]
struct KnnParams {
    #[arg(long)]
    kappa: usize,
    #[arg(long, value_enum, default_value = "euclidean")]
    metric: MetricArg,
    #[arg(long, value_enum, default_value = "intersection")]
    mode: ModeArg,
}

#[derive(Args)]
struct KnnArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    knn: KnnParams,
}

#[derive(Args)]
struct MatrixSource {
    /// Consensus matrix file, or `builtin:baseball`.
    #[arg(long)]
    consensus: String,
    #[arg(long, default_value_t = balance::DEFAULT_MAX_ITER)]
    balance_max_iter: usize,
}

#[derive(Args)]
struct BalanceArgs {
    #[command(flatten)]
    source: MatrixSource,
}

#[derive(Args)]
struct EigenArgs {
    /// Balanced matrix (as written by `sca balance`).
    #[arg(long)]
    matrix: PathBuf,
    /// Also compute eigenvectors and write them to `eigenvectors.txt`.
    #[arg(long)]
    vectors: bool,
}

#[derive(Args)]
struct ScaArgs {
    #[command(flatten)]
    source: MatrixSource,
    /// Cluster count; detected from the spectrum when omitted.
    #[arg(long)]
    k: Option<usize>,
    /// Consecutive unchanged clusterings needed to stop.
    #[arg(long, default_value_t = sca_core::sca::DEFAULT_STABILITY_COUNT)]
    stability: usize,
    #[arg(long, default_value_t = sca_core::sca::DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Independent runs with seeds `seed..seed+R`; reports distinct results.
    #[arg(long, default_value_t = 0)]
    restarts: usize,
    /// Write every iterate and its clustering to this CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct CustomArgs {
    #[command(flatten)]
    source: MatrixSource,
    /// 1-based index of the element to cluster around.
    #[arg(long)]
    target: usize,
    #[arg(long)]
    min: usize,
    #[arg(long)]
    max: usize,
    /// Return this many elements nearest the target instead of its cluster.
    #[arg(long)]
    closest_m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = sca_core::sca::DEFAULT_MAX_ITER)]
    max_iter: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConsensusKindArg {
    Ensemble,
    Knn,
    Combined,
}

#[derive(Args)]
struct PipelineArgs {
    /// JSON pipeline configuration; other flags are ignored when given.
    #[arg(long, conflicts_with_all = ["input", "members"])]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<String>,
    #[arg(long, default_value = "rows")]
    orientation: Orientation,
    #[arg(long)]
    header: bool,
    #[arg(long)]
    labels: Option<String>,
    #[arg(long = "member")]
    members: Vec<MemberSpec>,
    #[arg(long, value_enum, default_value = "ensemble")]
    kind: ConsensusKindArg,
    #[arg(long)]
    kappa: Option<usize>,
    #[arg(long, value_enum, default_value = "euclidean")]
    metric: MetricArg,
    #[arg(long, value_enum, default_value = "intersection")]
    mode: ModeArg,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    restarts: usize,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    source: MatrixSource,
    /// First-block sizes to test; all of 1..n-1 when omitted.
    #[arg(long = "n1", value_delimiter = ',')]
    n1: Vec<usize>,
    /// Largest number of subsets enumerated for an exact minimum.
    #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
    exact_limit: u64,
}

#[derive(Args)]
struct HistArgs {
    /// Matrix file in the text format, or `builtin:baseball`.
    #[arg(long)]
    matrix: String,
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Parse { .. } | Error::Domain(_) | Error::DimensionMismatch { .. } | Error::Io(_) => 2,
        Error::Support(_) | Error::Singular { .. } | Error::DegeneratePartition { .. } => 3,
        Error::NonConvergence { .. } | Error::IterationLimit { .. } => 4,
        Error::Exhaustion(_) => 5,
        Error::Stage { .. } => unreachable!("root never returns a stage wrapper"),
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir)?;
    }
    match &cli.command {
        Command::Ensemble(a) => ensemble(cli, a),
        Command::Consensus(a) => consensus(cli, a),
        Command::KnnConsensus(a) => knn(cli, a),
        Command::Balance(a) => balance_cmd(cli, a),
        Command::Eigen(a) => eigen(cli, a),
        Command::Sca(a) => sca(cli, a),
        Command::Custom(a) => custom(cli, a),
        Command::Pipeline(a) => pipeline_cmd(cli, a),
        Command::Check(a) => return check(cli, a),
        Command::Hist(a) => hist(cli, a),
    }?;
    Ok(ExitCode::SUCCESS)
}

/// Writes to `OUT/name` when `--out` is set, otherwise to stdout.
fn emit(cli: &Cli, name: &str, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match &cli.out {
        Some(dir) => write_file(&dir.join(name), |w| f(w)),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn json_line<T: serde::Serialize>(w: &mut dyn Write, v: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, v).map_err(io::Error::from)?;
    writeln!(w)?;
    Ok(())
}

fn json_pretty<T: serde::Serialize>(w: &mut dyn Write, v: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, v).map_err(io::Error::from)?;
    writeln!(w)?;
    Ok(())
}

fn ensemble(cli: &Cli, a: &EnsembleArgs) -> Result<()> {
    let (data, _) = load_input(&a.data.input())?;
    let spec = EnsembleSpec { members: a.members.clone(), seed_base: cli.seed };
    validate_ensemble(&spec)?;
    let runs = build_ensemble(&data, &spec)?;
    for w in runs.iter().filter_map(|c| c.provenance.warning.as_ref()) {
        eprintln!("warning: {w}");
    }
    emit(cli, "ensemble.jsonl", |w| runs.iter().try_for_each(|c| json_line(w, c)))?;
    if cli.out.is_some() {
        println!("{} clusterings of {} elements", runs.len(), data.elements());
    }
    Ok(())
}

fn validate_ensemble(spec: &EnsembleSpec) -> Result<()> {
    if spec.members.is_empty() {
        return Err(Error::Domain("at least one --member is required".into()));
    }
    for m in &spec.members {
        if m.repetitions == 0 || m.k < 2 {
            return Err(Error::Domain(format!("member {m:?} needs k >= 2 and repetitions >= 1")));
        }
    }
    Ok(())
}

fn read_ensemble(path: &Path) -> Result<Vec<ClusteringResult>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let c: ClusteringResult = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        out.push(c);
    }
    Ok(out)
}

fn consensus(cli: &Cli, a: &ConsensusArgs) -> Result<()> {
    let s = consensus_sum(&read_ensemble(&a.ensemble)?)?;
    emit(cli, "S.txt", |mut w| s.write(&mut w))?;
    if cli.out.is_some() {
        println!("consensus of {} elements, r={}", s.n(), s.r);
    }
    Ok(())
}

fn knn(cli: &Cli, a: &KnnArgs) -> Result<()> {
    let (data, _) = load_input(&a.data.input())?;
    let s = knn_consensus(&data, a.knn.kappa, a.knn.metric.into(), a.knn.mode.into())?;
    let iso = s.isolated_elements();
    if !iso.is_empty() {
        eprintln!("warning: {} elements share no neighbours with anything", iso.len());
    }
    emit(cli, "S.txt", |mut w| s.write(&mut w))
}

fn read_consensus(spec: &str) -> Result<ConsensusMatrix> {
    if spec == BUILTIN_BASEBALL {
        return Ok(baseball_consensus());
    }
    ConsensusMatrix::read(BufReader::new(File::open(spec)?))
}

fn balanced_from(cli: &Cli, src: &MatrixSource) -> Result<(ConsensusMatrix, BalancedMatrix)> {
    let s = read_consensus(&src.consensus)?;
    let b = balance_matrix(&s.s, cli.tol, src.balance_max_iter)?;
    Ok((s, b))
}

fn balance_cmd(cli: &Cli, a: &BalanceArgs) -> Result<()> {
    let (_, b) = balanced_from(cli, &a.source)?;
    let mut meta = Metadata::new();
    meta.insert("iterations".into(), b.iterations.to_string());
    meta.insert("residual".into(), format!("{:.3e}", b.residual));
    match &cli.out {
        Some(dir) => {
            write_file(&dir.join("P.txt"), |w| write_matrix(w, &b.p, &meta))?;
            write_file(&dir.join("d.txt"), |w| write_vector(w, &b.d, &Metadata::new()))?;
            println!("balanced in {} iterations, residual {:.3e}", b.iterations, b.residual);
            Ok(())
        }
        None => emit(cli, "", |mut w| {
            write_matrix(&mut w, &b.p, &meta)?;
            write_vector(&mut w, &b.d, &Metadata::new())
        }),
    }
}

fn eigen(cli: &Cli, a: &EigenArgs) -> Result<()> {
    let (p, _) = read_matrix(BufReader::new(File::open(&a.matrix)?))?;
    let spec = if a.vectors {
        sym_eigen_with_vectors(&p, DEFAULT_EIGEN_TOL)?
    } else {
        sym_eigen(&p, DEFAULT_EIGEN_TOL)?
    };
    let perron = perron_cluster(&spec)?;
    if let Some(w) = &perron.warning {
        eprintln!("warning: {w}");
    }
    if let (Some(dir), Some(v)) = (&cli.out, &spec.eigenvectors) {
        write_file(&dir.join("eigenvectors.txt"), |w| {
            for i in 0..v.rows() {
                let row: Vec<String> = v.row(i).iter().map(|x| sca_core::matrix::io::format_value(*x)).collect();
                writeln!(w, "{}", row.join(" "))?;
            }
            Ok(())
        })?;
    }
    let mut meta = Metadata::new();
    meta.insert("k".into(), perron.k.to_string());
    meta.insert("gap".into(), perron.gap.to_string());
    emit(cli, "spectrum.txt", |mut w| write_vector(&mut w, &spec.eigenvalues, &meta))?;
    if cli.out.is_some() {
        println!("k={} gap={:.4}", perron.k, perron.gap);
    }
    Ok(())
}

fn write_trace(path: &Path, trace: &[TraceStep]) -> Result<()> {
    write_file(path, |w| {
        let n = trace.first().map_or(0, |s| s.x.len());
        let mut head = vec!["t".to_string()];
        head.extend((1..=n).map(|i| format!("x{i}")));
        head.extend((1..=n).map(|i| format!("label{i}")));
        writeln!(w, "{}", head.join(","))?;
        for s in trace {
            let mut row = vec![s.t.to_string()];
            row.extend(s.x.iter().map(|v| v.to_string()));
            row.extend(s.labels.iter().map(|l| (l + 1).to_string()));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })
}

fn sca(cli: &Cli, a: &ScaArgs) -> Result<()> {
    let (_, b) = balanced_from(cli, &a.source)?;
    let cfg = SCAConfig {
        k_override: a.k,
        stability_count: a.stability,
        max_iter: a.max_iter,
        ipv_uniform_tol: None,
        seed: cli.seed,
    };
    let res = run_sca(&b, &cfg)?;
    if let Some(w) = res.perron.as_ref().and_then(|p| p.warning.as_ref()) {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &a.trace {
        write_trace(path, &res.trace)?;
    }
    let solutions = if a.restarts > 0 {
        sca_restarts(&b, &SCAConfig { k_override: Some(res.k_used), ..cfg.clone() }, a.restarts)?
    } else {
        Vec::new()
    };
    let report = serde_json::json!({
        "n": b.n(),
        "k_used": res.k_used,
        "detected_k": res.perron.as_ref().map(|p| p.k),
        "perron_gap": res.perron.as_ref().map(|p| p.gap),
        "iterations": res.iterations_run,
        "stop_reason": res.stop_reason,
        "cluster_sizes": res.clusters.sizes(),
        "seed": cli.seed,
        "solutions": solutions,
    });
    match &cli.out {
        Some(dir) => {
            write_file(&dir.join("clusters.csv"), |w| write_clusters(w, &res.clusters))?;
            write_file(&dir.join("report.json"), |w| json_pretty(w, &report))?;
            println!(
                "k={} sizes={:?} iterations={} stop={:?}",
                res.k_used,
                res.clusters.sizes(),
                res.iterations_run,
                res.stop_reason
            );
            for s in &solutions {
                println!("solution seen {} times: sizes={:?}", s.count, sizes_of(&s.labels));
            }
            Ok(())
        }
        None => emit(cli, "", |mut w| write_clusters(&mut w, &res.clusters)),
    }
}

fn sizes_of(labels: &[usize]) -> Vec<usize> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut c = vec![0; k];
    labels.iter().for_each(|&l| c[l] += 1);
    c
}

fn custom(cli: &Cli, a: &CustomArgs) -> Result<()> {
    let (_, b) = balanced_from(cli, &a.source)?;
    if a.target == 0 {
        return Err(Error::Domain("--target is 1-based".into()));
    }
    let cfg = CcaConfig {
        target: a.target - 1,
        min_size: a.min,
        max_size: a.max,
        max_iter: a.max_iter,
        closest_m: a.closest_m,
        k_override: a.k,
    };
    let res = run_cca(&b, &cfg)?;
    let members: Vec<usize> = res.members.iter().map(|i| i + 1).collect();
    emit(cli, "custom.csv", |w| {
        writeln!(w, "index")?;
        members.iter().try_for_each(|i| writeln!(w, "{i}"))?;
        Ok(())
    })?;
    if cli.out.is_some() {
        println!("t={} k={} members={:?}", res.t, res.k_used, members);
    }
    Ok(())
}

fn pipeline_cmd(cli: &Cli, a: &PipelineArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str::<PipelineConfig>(&text).map_err(|e| Error::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?
        }
        None => {
            let input = a.input.as_ref().ok_or_else(|| Error::Domain("--input or --config is required".into()))?;
            let data = DataArgs {
                input: input.clone(),
                orientation: a.orientation,
                header: a.header,
                labels: a.labels.clone(),
            };
            let knn = |kappa: Option<usize>| {
                kappa.ok_or_else(|| Error::Domain("--kappa is required for knn consensus".into()))
            };
            let consensus = match a.kind {
                ConsensusKindArg::Ensemble => ConsensusSpec::Ensemble,
                ConsensusKindArg::Knn => {
                    ConsensusSpec::Knn { kappa: knn(a.kappa)?, metric: a.metric.into(), mode: a.mode.into() }
                }
                ConsensusKindArg::Combined => {
                    ConsensusSpec::Combined { kappa: knn(a.kappa)?, metric: a.metric.into(), mode: a.mode.into() }
                }
            };
            let ensemble = EnsembleSpec { members: a.members.clone(), seed_base: cli.seed };
            let mut cfg = PipelineConfig::new(data.input(), ensemble, consensus);
            cfg.balance_tol = cli.tol;
            cfg.sca.seed = cli.seed;
            cfg.sca.k_override = a.k;
            cfg.restarts = a.restarts;
            cfg
        }
    };
    if cli.out.is_some() {
        cfg.out_dir = cli.out.clone();
    }
    let out = pipeline(&cfg)?;
    let r = &out.report;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    println!("n={} ensemble={} detected_k={} k_used={} gap={:.4}", r.n, r.ensemble_size, r.detected_k, r.k_used, r.perron_gap);
    println!("cluster sizes {:?}, {} iterations, stop {:?}", r.cluster_sizes, r.iterations, r.stop_reason);
    if let Some(e) = r.errors {
        println!("errors vs labels: {e}");
    }
    if cfg.out_dir.is_none() {
        let mut stdout = io::stdout().lock();
        write_clusters(&mut stdout, &ClusteringResult::from_labels(r.labels.clone(), "sca")?)?;
    }
    Ok(())
}

fn check(cli: &Cli, a: &CheckArgs) -> Result<ExitCode> {
    let (s, b) = balanced_from(cli, &a.source)?;
    let n = s.n();
    if n < 2 {
        return Err(Error::Domain("check needs at least 2 elements".into()));
    }
    let sizes: Vec<usize> = if a.n1.is_empty() { (1..n).collect() } else { a.n1.clone() };
    let mut rows = Vec::new();
    let mut all_pass = true;
    for &n1 in &sizes {
        if n1 == 0 || n1 >= n {
            return Err(Error::Domain(format!("n1={n1} must lie in 1..{n}")));
        }
        // the sigma bound compares two exact minima; skip it past the enumeration limit
        let sigma = if binomial(n, n1) <= a.exact_limit {
            Some(sigma_bound_check(&s, &b, n1, a.exact_limit)?)
        } else {
            eprintln!("n1={n1}: sigma bound skipped, C({n},{n1}) exceeds --exact-limit");
            None
        };
        let lambda = lambda2_bound_check(&b, n1, a.exact_limit)?;
        all_pass &= lambda.pass && sigma.as_ref().map_or(true, |r| r.pass);
        if let Some(r) = &sigma {
            println!("sigma  {r}");
        }
        println!("lambda {lambda}");
        rows.push(serde_json::json!({ "n1": n1, "sigma": sigma, "lambda2": lambda }));
    }

    let spectrum = sym_eigen(&b.p, DEFAULT_EIGEN_TOL)?;
    let perron = perron_cluster(&spectrum)?;
    let res = run_sca(&b, &SCAConfig { seed: cli.seed, k_override: Some(perron.k), ..Default::default() })?;
    let mut complements = Vec::new();
    if res.clusters.sizes().iter().all(|&c| c > 0) && res.k_used > 1 {
        let part = BlockPartition::new(res.clusters.labels.clone())?;
        for blk in 0..part.num_blocks() {
            let c = stochastic_complement(&b.p, &part, blk)?;
            let residual = c.c.stochastic_residual();
            let ok = c.c.is_nonnegative() && residual <= 1e-10;
            all_pass &= ok;
            println!("complement block={} size={} residual={residual:.3e} pass={ok}", blk + 1, c.members.len());
            complements.push(serde_json::json!({ "block": blk + 1, "size": c.members.len(), "residual": residual, "pass": ok }));
        }
    }
    if let Some(dir) = &cli.out {
        let report = serde_json::json!({ "n": n, "k": perron.k, "bounds": rows, "complements": complements, "pass": all_pass });
        write_file(&dir.join("check.json"), |w| json_pretty(w, &report))?;
    }
    println!("{}", if all_pass { "all checks passed" } else { "some checks FAILED" });
    Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn hist(cli: &Cli, a: &HistArgs) -> Result<()> {
    let m: SymMatrix = if a.matrix == BUILTIN_BASEBALL {
        baseball_consensus().s
    } else {
        read_matrix(BufReader::new(File::open(&a.matrix)?))?.0
    };
    let values = m.upper_triangle();
    match &cli.out {
        Some(dir) => {
            let h = export_histogram(&values, a.bins, &dir.join("hist.csv"))?;
            println!("{} values in {} bins", values.len(), h.counts.len());
            Ok(())
        }
        None => emit(cli, "", |mut w| histogram(&values, a.bins)?.write_csv(&mut w)),
    }
}
