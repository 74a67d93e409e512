mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use catcouple::coupling::build_all;
use catcouple::dataset::{describe, load_csv, synth_generate, CategoricalDataset, LabelColumn, SynthSpec};
use catcouple::eval::{evaluate, kmeans, kmodes, ClusterAssignment, EvalOptions};
use catcouple::io::{matrix_csv, read_matrix_csv, write_all_atomic};
use catcouple::kernel::{bank_to_string, default_bank, parse_bank};
use catcouple::model::Model;
use catcouple::solver::{fit, FitConfig, Mode};
use catcouple::{Error, Exec, Result};
use clap::{Args, Parser, Subcommand};

use settings::Settings;

#[derive(Parser)]
#[command(name = "catcouple", version, about = "Coupled multi-kernel embeddings for categorical tables")]
struct Cli {
    /// Worker threads for parallel sections; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// key=value file supplying defaults; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use the single-threaded code paths.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn weights and write the model, embedding and loss trace.
    Fit(FitArgs),
    /// Embed a table with a saved model.
    Transform(TransformArgs),
    /// Cluster an embedding with k-means, or a table with k-modes.
    Cluster(ClusterArgs),
    /// Score an embedding against the table's labels.
    Evaluate(EvaluateArgs),
    /// Generate a labeled table with planted clusters.
    Synth(SynthArgs),
    /// Print the factors of a table.
    Describe(DescribeArgs),
}

#[derive(Args)]
struct TableArgs {
    /// Input CSV.
    #[arg(long)]
    input: Option<String>,
    /// The first row is data, not a header.
    #[arg(long)]
    no_header: bool,
    /// Label column, by header name or 0-based index.
    #[arg(long)]
    label: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    table: TableArgs,
    /// Number of clusters in the objective.
    #[arg(long = "clusters")]
    n_clusters: Option<usize>,
    /// stochastic or full.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Object pairs per stochastic batch.
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Stop once the loss change is at most this; `inf` stops after one iteration.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Kernel tokens, e.g. `gaussian:2^-5,poly:2,linear`.
    #[arg(long)]
    kernels: Option<String>,
    /// Output model file (`.gz` compresses).
    #[arg(long)]
    model: Option<String>,
    /// Output embedding CSV.
    #[arg(long)]
    embedding: Option<String>,
    /// Optional output similarity CSV.
    #[arg(long)]
    similarity: Option<String>,
    /// Output loss-trace CSV.
    #[arg(long)]
    trace: Option<String>,
}

#[derive(Args)]
struct TransformArgs {
    #[command(flatten)]
    table: TableArgs,
    #[arg(long)]
    model: Option<String>,
    /// Output embedding CSV.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct ClusterArgs {
    /// Embedding CSV to cluster with k-means.
    #[arg(long)]
    embedding: Option<String>,
    #[command(flatten)]
    table: TableArgs,
    /// kmeans (on --embedding) or kmodes (on --input).
    #[arg(long)]
    method: Option<String>,
    #[arg(long = "clusters")]
    n_clusters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Output assignment CSV.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    table: TableArgs,
    /// Model used to embed the table.
    #[arg(long)]
    model: Option<String>,
    /// Precomputed embedding CSV, row-aligned with the table.
    #[arg(long)]
    embedding: Option<String>,
    /// Clusters; defaults to the class count.
    #[arg(long = "clusters")]
    n_clusters: Option<usize>,
    /// Clustering seeds 0..N.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Neighbour counts for precision@k, e.g. `1,5,10`.
    #[arg(long)]
    k_list: Option<String>,
    #[arg(long)]
    curve_steps: Option<usize>,
    /// Also score k-modes on the raw table.
    #[arg(long)]
    baseline: bool,
    /// Output key=value summary.
    #[arg(long)]
    summary: Option<String>,
    /// Output goodness-curve CSV.
    #[arg(long)]
    curve: Option<String>,
    /// Output precision@k CSV.
    #[arg(long)]
    precision: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n_o: Option<usize>,
    #[arg(long)]
    n_a: Option<usize>,
    #[arg(long)]
    n_mv: Option<usize>,
    #[arg(long = "clusters")]
    n_clusters: Option<usize>,
    /// Probability of a cluster's preferred value, in [0, 1].
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct DescribeArgs {
    #[command(flatten)]
    table: TableArgs,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<String>,
}

struct Context {
    settings: Settings,
    exec: Exec,
}

impl Context {
    fn table(&mut self, t: &TableArgs) -> Result<CategoricalDataset> {
        let input: String = self.settings.req("input", t.input.clone())?;
        let no_header = self.settings.switch("no_header", t.no_header)?;
        let label: Option<String> = self.settings.opt("label", t.label.clone())?;
        let label = label.map(|l| l.parse::<LabelColumn>().expect("infallible"));
        load_csv(Path::new(&input), !no_header, label.as_ref())
    }

    fn comments(&self) -> Vec<String> {
        vec![self.settings.echo_line()]
    }
}

fn assignment_csv(a: &ClusterAssignment, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str(&format!("# {c}\n"));
    }
    out.push_str(&format!("# inertia={:?}\n", a.inertia));
    out.push_str("object,cluster\n");
    for (i, l) in a.labels.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    out
}

fn with_comments(comments: &[String], body: &str) -> String {
    let mut out: String = comments.iter().map(|c| format!("# {c}\n")).collect();
    out.push_str(body);
    out
}

fn cmd_fit(ctx: &mut Context, a: &FitArgs) -> Result<Vec<(PathBuf, String)>> {
    let ds = ctx.table(&a.table)?;
    let s = &mut ctx.settings;
    let d = FitConfig::default();
    let config = FitConfig {
        n_clusters: s.req("n_clusters", a.n_clusters)?,
        mode: s.get("mode", a.mode, d.mode)?,
        learning_rate: s.get("learning_rate", a.learning_rate, d.learning_rate)?,
        batch_size: s.get("batch_size", a.batch_size, d.batch_size)?,
        max_iterations: s.get("max_iterations", a.max_iterations, d.max_iterations)?,
        delta: s.get("delta", a.delta, d.delta)?,
        seed: s.get("seed", a.seed, d.seed)?,
        beta1: s.get("beta1", a.beta1, d.beta1)?,
        beta2: s.get("beta2", a.beta2, d.beta2)?,
        epsilon: s.get("epsilon", a.epsilon, d.epsilon)?,
        keep_similarity: false,
        exec: ctx.exec,
    };
    let bank = match s.opt::<String>("kernels", a.kernels.clone())? {
        Some(spec) => parse_bank(&spec)?,
        None => default_bank(),
    };
    s.get("kernels", None, bank_to_string(&bank))?;
    let model_path: String = s.req("model", a.model.clone())?;
    let x_path: String = s.req("embedding", a.embedding.clone())?;
    let trace_path: String = s.req("trace", a.trace.clone())?;
    let s_path: Option<String> = s.opt("similarity", a.similarity.clone())?;
    let config = FitConfig {
        keep_similarity: s_path.is_some(),
        ..config
    };

    let out = fit(&ds, &bank, &config)?;
    let comments = ctx.comments();
    let spaces = build_all(&ds.without_labels(), ctx.exec);
    let model = Model::new(ctx.settings.effective().to_vec(), &ds, &bank, spaces, &out.params);
    let mut files = vec![
        (PathBuf::from(model_path), model.to_text()),
        (PathBuf::from(x_path), matrix_csv(&out.representation.embedding, None, &comments)),
        (PathBuf::from(trace_path), out.trace.to_csv(&comments)),
    ];
    if let (Some(p), Some(sim)) = (s_path, &out.representation.similarity) {
        files.push((PathBuf::from(p), matrix_csv(sim, None, &comments)));
    }
    Ok(files)
}

fn cmd_transform(ctx: &mut Context, a: &TransformArgs) -> Result<Vec<(PathBuf, String)>> {
    let ds = ctx.table(&a.table)?;
    let model_path: String = ctx.settings.req("model", a.model.clone())?;
    let out: String = ctx.settings.req("out", a.out.clone())?;
    let model = Model::load(Path::new(&model_path))?;
    let x = model.transform(&ds.without_labels(), ctx.exec)?;
    Ok(vec![(PathBuf::from(out), matrix_csv(&x, None, &ctx.comments()))])
}

fn cmd_cluster(ctx: &mut Context, a: &ClusterArgs) -> Result<Vec<(PathBuf, String)>> {
    let method: String = ctx.settings.get("method", a.method.clone(), "kmeans".into())?;
    let k: usize = ctx.settings.req("n_clusters", a.n_clusters)?;
    let seed: u64 = ctx.settings.get("seed", a.seed, 0)?;
    let restarts: usize = ctx.settings.get("restarts", a.restarts, 1)?;
    let out: String = ctx.settings.req("out", a.out.clone())?;
    let assignment = match method.as_str() {
        "kmeans" => {
            let x_path: String = ctx.settings.req("embedding", a.embedding.clone())?;
            kmeans(&read_matrix_csv(Path::new(&x_path))?, k, seed, restarts, ctx.exec)?
        }
        "kmodes" => {
            let ds = ctx.table(&a.table)?;
            kmodes(&ds, k, seed, restarts, ctx.exec)?
        }
        other => return Err(Error::config(format!("unknown clustering method {other:?}"))),
    };
    Ok(vec![(PathBuf::from(out), assignment_csv(&assignment, &ctx.comments()))])
}

fn parse_k_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|e| Error::config(format!("bad k-list entry {t:?}: {e}")))
        })
        .collect()
}

fn cmd_evaluate(ctx: &mut Context, a: &EvaluateArgs) -> Result<Vec<(PathBuf, String)>> {
    let ds = ctx.table(&a.table)?;
    if ds.labels().is_none() {
        return Err(Error::config("evaluate needs --label"));
    }
    let s = &mut ctx.settings;
    let d = EvalOptions::default();
    let k_list: String = s.get(
        "k_list",
        a.k_list.clone(),
        d.k_list.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
    )?;
    let opts = EvalOptions {
        n_clusters: s.opt("n_clusters", a.n_clusters)?,
        seeds: s.get("seeds", a.seeds, d.seeds)?,
        restarts: s.get("restarts", a.restarts, d.restarts)?,
        k_list: parse_k_list(&k_list)?,
        curve_steps: s.get("curve_steps", a.curve_steps, d.curve_steps)?,
        baseline: s.switch("baseline", a.baseline)?,
    };
    let model: Option<String> = s.opt("model", a.model.clone())?;
    let embedding: Option<String> = s.opt("embedding", a.embedding.clone())?;
    let summary_path: String = s.req("summary", a.summary.clone())?;
    let curve_path: Option<String> = s.opt("curve", a.curve.clone())?;
    let precision_path: Option<String> = s.opt("precision", a.precision.clone())?;

    let x = match (model, embedding) {
        (Some(m), None) => Model::load(Path::new(&m))?.transform(&ds.without_labels(), ctx.exec)?,
        (None, Some(e)) => read_matrix_csv(Path::new(&e))?,
        _ => return Err(Error::config("evaluate needs exactly one of --model and --embedding")),
    };
    let mut report = evaluate(&ds, &x, &opts, ctx.exec)?;
    let comments = ctx.comments();
    report.metadata.insert(0, ("config".into(), ctx.settings.echo_line()));
    let mut files = vec![(PathBuf::from(summary_path), report.summary())];
    if let Some(p) = curve_path {
        files.push((PathBuf::from(p), with_comments(&comments, &report.curve_csv())));
    }
    if let Some(p) = precision_path {
        files.push((PathBuf::from(p), with_comments(&comments, &report.precision_csv())));
    }
    Ok(files)
}

fn cmd_synth(ctx: &mut Context, a: &SynthArgs) -> Result<Vec<(PathBuf, String)>> {
    let s = &mut ctx.settings;
    let spec = SynthSpec {
        n_o: s.req("n_o", a.n_o)?,
        n_a: s.req("n_a", a.n_a)?,
        n_mv: s.req("n_mv", a.n_mv)?,
        n_clusters: s.req("n_clusters", a.n_clusters)?,
        separation: s.req("separation", a.separation)?,
        seed: s.get("seed", a.seed, 0)?,
    };
    let out: String = s.req("out", a.out.clone())?;
    let ds = synth_generate(&spec)?;
    Ok(vec![(PathBuf::from(out), ds.to_csv_string()?)])
}

fn cmd_describe(ctx: &mut Context, a: &DescribeArgs) -> Result<Vec<(PathBuf, String)>> {
    let ds = ctx.table(&a.table)?;
    let text = describe(&ds).to_string();
    match ctx.settings.opt::<String>("out", a.out.clone())? {
        Some(p) => Ok(vec![(PathBuf::from(p), text)]),
        None => {
            print!("{text}");
            Ok(Vec::new())
        }
    }
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    let mut ctx = Context {
        settings: Settings::load(cli.config.as_deref())?,
        exec: if cli.sequential { Exec::Sequential } else { Exec::Parallel },
    };
    // every output is computed before any file is written
    let files = match &cli.command {
        Command::Fit(a) => cmd_fit(&mut ctx, a)?,
        Command::Transform(a) => cmd_transform(&mut ctx, a)?,
        Command::Cluster(a) => cmd_cluster(&mut ctx, a)?,
        Command::Evaluate(a) => cmd_evaluate(&mut ctx, a)?,
        Command::Synth(a) => cmd_synth(&mut ctx, a)?,
        Command::Describe(a) => cmd_describe(&mut ctx, a)?,
    };
    write_all_atomic(&files)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("catcouple: {msg}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
