//! `stratos`: batch ABCD stratification from the command line.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stratos_core::io::report::{
    concentration_doc, format_share, impact_views, result_rows, summary_doc, summary_path,
    write_concentration_csv, write_impact_csv, write_productivity_csv, write_result_csv,
    write_summary_json, ResultRow, RunMetadata,
};
use stratos_core::io::{load_config_or_default, load_portfolio};
use stratos_core::model::SliceKey;
use stratos_core::{
    blend_curve, classify_at_precision, cumulative_shares, hhi_report, productivity_curve,
    simulate_threshold_impact, solve_t_a, stratify, BlendSpec, ClassLabel, Error, Money,
    PortfolioSnapshot, Scope, StratifyConfig, Thresholds,
};
use stratos_service::{ServiceConfig, DEFAULT_MAX_BODY_BYTES};

#[derive(Parser)]
#[command(
    name = "stratos",
    version,
    about = "ABCD stratification of product portfolios"
)]
struct Cli {
    /// Worker threads for per-slice work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label every item A-D from its cumulative share, with no passes.
    Classify(ClassifyArgs),
    /// Run the configured passes and band the remainder.
    Stratify(StratifyArgs),
    /// Concentration index per slice.
    Hhi(HhiArgs),
    /// A-set size and share for candidate values of t_a.
    Simulate(SimulateArgs),
    /// The first-pass t_a that maximizes blended productivity.
    SolveTa(SolveTaArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Portfolio CSV.
    #[arg(long, short)]
    input: PathBuf,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config JSON; falls back to $STRATOS_CONFIG, then the defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long)]
    t_a: Option<f64>,
    #[arg(long)]
    t_b: Option<f64>,
    #[arg(long)]
    t_c: Option<f64>,
}

impl ThresholdArgs {
    fn apply(&self, base: Thresholds) -> Result<Thresholds, Error> {
        Thresholds::new(
            self.t_a.unwrap_or(base.t_a()),
            self.t_b.unwrap_or(base.t_b()),
            self.t_c.unwrap_or(base.t_c()),
        )
    }
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    /// Classify each member combination of these dimensions separately.
    #[arg(long, value_delimiter = ',')]
    group_by: Vec<String>,
    /// Result CSV (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct StratifyArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Result CSV (default: stdout). The summary goes beside it as `<name>.summary.json`.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Summary JSON path, overriding the default beside the output.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct HhiArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Dimensions to slice by; none means the whole portfolio.
    #[arg(long, value_delimiter = ',')]
    dims: Vec<String>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    thresholds: ThresholdArgs,
    /// Candidate values of t_a.
    #[arg(long, value_delimiter = ',', required = true)]
    candidates: Vec<f64>,
    /// Restrict to one slice, as `dimension=member`; repeatable.
    #[arg(long = "filter", value_parser = parse_filter)]
    filters: Vec<(String, String)>,
    #[arg(long, value_enum, default_value = "all")]
    scope: ScopeArg,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    All,
    New,
    Inline,
}

impl From<ScopeArg> for Scope {
    fn from(s: ScopeArg) -> Scope {
        match s {
            ScopeArg::All => Scope::All,
            ScopeArg::New => Scope::New,
            ScopeArg::Inline => Scope::Inline,
        }
    }
}

fn parse_filter(raw: &str) -> Result<(String, String), String> {
    match raw.split_once('=') {
        Some((d, m)) if !d.is_empty() => Ok((d.to_string(), m.to_string())),
        _ => Err(format!("expected dimension=member, got `{raw}`")),
    }
}

#[derive(Args)]
struct SolveTaArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of items the later passes add (j).
    #[arg(long)]
    later_count: u64,
    /// Total value of those items (J).
    #[arg(long)]
    later_revenue: Money,
    /// Also write the p, value, S_p, T_p table here.
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: SolveFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveFormat {
    Text,
    Json,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    /// Origin allowed by CORS; repeatable. `*` allows any.
    #[arg(long = "cors-origin")]
    cors_origins: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_MAX_BODY_BYTES)]
    max_body_bytes: usize,
}

/// Failures after argument parsing; all exit with status 1.
enum Failure {
    Data(Error),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("stratos: cannot size thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::Classify(args) => classify_cmd(args),
        Command::Stratify(args) => stratify_cmd(args),
        Command::Hhi(args) => hhi_cmd(args),
        Command::Simulate(args) => simulate_cmd(args),
        Command::SolveTa(args) => solve_ta_cmd(args),
        Command::Serve(args) => serve_cmd(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(e)) => {
            eprintln!("stratos: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(Failure::Io(e)) => {
            eprintln!("stratos: {e}");
            ExitCode::from(1)
        }
    }
}

fn open_output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) if p != Path::new("-") => Box::new(BufWriter::new(File::create(p)?)),
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(input: &InputArgs) -> Result<PortfolioSnapshot, Failure> {
    load_portfolio(&input.input).map_err(|e| match e {
        Error::Io(io) => Failure::Io(io::Error::new(
            io.kind(),
            format!("{}: {io}", input.input.display()),
        )),
        other => Failure::Data(other),
    })
}

fn config(args: &ConfigArgs) -> Result<StratifyConfig, Failure> {
    Ok(load_config_or_default(args.config.as_deref())?)
}

fn classify_cmd(args: ClassifyArgs) -> Result<(), Failure> {
    let snapshot = load(&args.input)?;
    let cfg = config(&args.config)?;
    let thresholds = args.thresholds.apply(cfg.thresholds)?;

    let mut slot: Vec<Option<ResultRow>> = vec![None; snapshot.root_len()];
    let groups = if args.group_by.is_empty() {
        vec![(SliceKey::whole(), snapshot.clone())]
    } else {
        snapshot.group_by(&args.group_by)?
    };
    for (key, group) in groups {
        let pass = if key.filter.is_empty() {
            "classify".to_string()
        } else {
            key.label()
        };
        let (labels, shares) = match cumulative_shares(&group) {
            Ok(shares) => (
                classify_at_precision(&shares, &thresholds, cfg.share_decimals).into_labels(),
                shares.as_slice().to_vec(),
            ),
            Err(Error::ZeroTotal) => (vec![ClassLabel::D; group.len()], vec![0.0; group.len()]),
            Err(e) => return Err(e.into()),
        };
        for (i, item) in group.iter().enumerate() {
            slot[item.position() as usize] = Some(ResultRow {
                item_id: item.id().to_string(),
                class: labels[i],
                assigning_pass: pass.clone(),
                slice_c_k: format_share(shares[i]),
            });
        }
    }
    let rows: Vec<ResultRow> = snapshot
        .positions()
        .iter()
        .map(|&p| slot[p as usize].take().expect("every item is in one group"))
        .collect();
    let mut out = open_output(args.output.as_deref())?;
    write_result_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(())
}

fn stratify_cmd(args: StratifyArgs) -> Result<(), Failure> {
    let snapshot = load(&args.input)?;
    let cfg = config(&args.config)?;
    let result = stratify(&snapshot, &cfg)?;

    let mut out = open_output(args.output.as_deref())?;
    write_result_csv(&result_rows(&result), &mut out)?;
    out.flush()?;

    let sidecar = args.summary.or_else(|| {
        args.output
            .as_deref()
            .filter(|p| *p != Path::new("-"))
            .map(summary_path)
    });
    if let Some(path) = sidecar {
        let metadata = RunMetadata {
            tool: "stratos".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            generated_unix_seconds: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            threads: rayon::current_num_threads(),
        };
        let mut w = BufWriter::new(File::create(path)?);
        write_summary_json(&summary_doc(&result, Some(metadata)), &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn hhi_cmd(args: HhiArgs) -> Result<(), Failure> {
    let snapshot = load(&args.input)?;
    let report = hhi_report(&snapshot, &args.dims)?;
    let mut out = open_output(args.output.as_deref())?;
    match args.format {
        Format::Csv => write_concentration_csv(&report, &mut out)?,
        Format::Json => write_json(&concentration_doc(&report), &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn simulate_cmd(args: SimulateArgs) -> Result<(), Failure> {
    let snapshot = load(&args.input)?;
    let cfg = config(&args.config)?;
    let baseline = args.thresholds.apply(cfg.thresholds)?;
    let key = SliceKey {
        filter: args.filters.into_iter().collect(),
        scope: args.scope.into(),
    };
    let slice = snapshot.slice_with_cutoff(&key, cfg.new_cutoff_months)?;
    let rows = simulate_threshold_impact(&slice, &baseline, &args.candidates)?;
    let mut out = open_output(args.output.as_deref())?;
    match args.format {
        Format::Csv => write_impact_csv(&rows, &mut out)?,
        Format::Json => write_json(&impact_views(&rows), &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn solve_ta_cmd(args: SolveTaArgs) -> Result<(), Failure> {
    let snapshot = load(&args.input)?;
    let blend = BlendSpec::new(args.later_count, args.later_revenue)?;
    let solution = solve_t_a(&snapshot, &blend)?;
    let curve = productivity_curve(&snapshot)?;
    let blended = blend_curve(&curve, &blend);
    if let Some(path) = &args.curve {
        let mut w = BufWriter::new(File::create(path)?);
        write_productivity_csv(&curve, &blended, &mut w)?;
        w.flush()?;
    }
    let mut out = io::stdout().lock();
    match args.format {
        SolveFormat::Text => {
            writeln!(out, "p_star={}", solution.p_star)?;
            writeln!(out, "t_a_star={}", format_share(solution.t_a_star))?;
            writeln!(
                out,
                "t_p_star={}",
                format_share(blended.t[solution.p_star - 1])
            )?;
            writeln!(out, "residual={}", format_share(solution.residual))?;
        }
        SolveFormat::Json => {
            let doc = serde_json::json!({
                "p_star": solution.p_star,
                "t_a_star": format_share(solution.t_a_star),
                "t_p_star": blended.t[solution.p_star - 1],
                "residual": solution.residual,
            });
            write_json(&doc, &mut out)?;
        }
    }
    Ok(())
}

fn serve_cmd(args: ServeArgs) -> Result<(), Failure> {
    let config = ServiceConfig {
        max_body_bytes: args.max_body_bytes,
        cors_origins: args.cors_origins,
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(stratos_service::serve(
        SocketAddr::new(args.host, args.port),
        config,
    ))?;
    Ok(())
}

fn write_json<T: serde::Serialize, W: Write>(value: &T, out: &mut W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    out.write_all(b"\n")
}
