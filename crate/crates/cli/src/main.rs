use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vax_core::embed::{self, StressBasis};
use vax_core::explain::{RowOrder, Scale};
use vax_core::pipeline::{self, Artifacts, Lambda, RunConfig, Trees};
use vax_core::VaxError;

#[derive(Debug, Parser)]
#[command(name = "vax", version, about = "Jumping emerging pattern mining and explanation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mine, explain and embed a CSV dataset into an artifact directory.
    Run(Box<RunArgs>),
    /// Print the patterns supporting the given instances.
    Explain(ExplainArgs),
    /// Serve an artifact directory over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BasisArg {
    Weighted,
    Original,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OrderArg {
    Support,
    Class,
    ClassAndSupport,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScaleArg {
    Linear,
    Log,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    label_column: String,
    /// Column holding instance ids; row numbers are used otherwise.
    #[arg(long)]
    id_column: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tree count, or `auto` to grow until every row is covered.
    #[arg(long, default_value = "auto")]
    trees: String,
    /// Comma-separated increasing tree counts tried by `--trees auto`.
    #[arg(long, value_delimiter = ',')]
    tree_schedule: Option<Vec<usize>>,
    /// Weight of the pattern space in [0, 1], or `auto`.
    #[arg(long, default_value = "auto")]
    lambda: String,
    /// Comma-separated lambda values to embed.
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "weighted")]
    stress_basis: BasisArg,
    /// Discretize a numeric label column into this many equal-width bins.
    #[arg(long)]
    discretize_bins: Option<usize>,
    #[arg(long, overrides_with = "keep_ambiguous")]
    drop_ambiguous: bool,
    /// Fail on rows with identical values and different labels.
    #[arg(long, overrides_with = "drop_ambiguous")]
    keep_ambiguous: bool,
    #[arg(long)]
    histogram_bins: Option<usize>,
    #[arg(long, value_enum, default_value = "support")]
    order: OrderArg,
    #[arg(long, value_enum, default_value = "linear")]
    scale: ScaleArg,
    /// Skip the similarity map and lambda sweep.
    #[arg(long)]
    no_embed: bool,
    /// Write every raw pattern as JSON lines to this file.
    #[arg(long)]
    raw_dump: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[arg(long)]
    artifacts: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    instances: Vec<String>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    artifacts: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
}

fn config(args: RunArgs) -> Result<RunConfig, VaxError> {
    let mut c = RunConfig::new(args.input, args.label_column, args.out);
    c.id_column = args.id_column;
    c.seed = args.seed;
    c.trees = match args.trees.as_str() {
        "auto" => Trees::Auto(args.tree_schedule.unwrap_or_else(embed::default_tree_schedule)),
        n => Trees::Fixed(
            n.parse()
                .map_err(|_| VaxError::InvalidParameter(format!("--trees expects a count or `auto`, got `{n}`")))?,
        ),
    };
    c.lambda = match args.lambda.as_str() {
        "auto" => Lambda::Auto,
        x => Lambda::Fixed(
            x.parse()
                .map_err(|_| VaxError::InvalidParameter(format!("--lambda expects a number or `auto`, got `{x}`")))?,
        ),
    };
    if let Some(grid) = args.lambda_grid {
        c.lambda_grid = grid;
    }
    c.stress_basis = match args.stress_basis {
        BasisArg::Weighted => StressBasis::Weighted,
        BasisArg::Original => StressBasis::Original,
    };
    c.discretize_bins = args.discretize_bins;
    c.drop_ambiguous = args.drop_ambiguous || !args.keep_ambiguous;
    c.histogram_bins = args.histogram_bins;
    c.order = match args.order {
        OrderArg::Support => RowOrder::Support,
        OrderArg::Class => RowOrder::Class,
        OrderArg::ClassAndSupport => RowOrder::ClassAndSupport,
    };
    c.scale = match args.scale {
        ScaleArg::Linear => Scale::Linear,
        ScaleArg::Log => Scale::Log,
    };
    c.embed = !args.no_embed;
    c.raw_dump = args.raw_dump;
    Ok(c)
}

fn run(args: RunArgs) -> Result<(), VaxError> {
    let outcome = pipeline::run(&config(args)?)?;
    let m = &outcome.manifest;
    println!(
        "k={} raw={} jeps={} coverage={:.4} lambda={}",
        m.resolved_k,
        m.counts.raw,
        m.jep_count,
        m.coverage,
        m.resolved_lambda.map_or("-".to_string(), |l| format!("{l:.2}")),
    );
    Ok(())
}

fn explain(args: ExplainArgs) -> Result<(), VaxError> {
    let artifacts = Artifacts::load(&args.artifacts)?;
    let explanation = pipeline::explain_instances(&artifacts, &args.instances)?;
    let text = serde_json::to_string_pretty(&explanation).expect("explanation serializes");
    println!("{text}");
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), VaxError> {
    // Fail fast on a broken directory instead of serving 503 forever.
    Artifacts::load(&args.artifacts)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| VaxError::InvalidParameter(e.to_string()))?;
    let addr = SocketAddr::new(args.host, args.port);
    runtime
        .block_on(vax_service::serve(&args.artifacts, addr))
        .map_err(|e| VaxError::InvalidParameter(format!("cannot serve on {addr}: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(*a),
        Command::Explain(a) => explain(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
