//! `ide`: simulation grids, significance maps, a landscape probe and the
//! live-session server.

mod overrides;
mod output;

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ide_core::ea::Algorithm;
use ide_core::landscape::{global_maximum, standard_model, GaussianMixture, SearchDomain};
use ide_core::simulation::{run_cells, summarize, CellKey, ConvergenceTable, ExperimentConfig, SummaryRow};
use ide_core::stats::{classify_focal, TestKind};
use ide_core::CoreError;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const TABLE_FILE: &str = "convergence.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SIGNIFICANCE_FILE: &str = "significance.csv";

#[derive(Parser)]
#[command(name = "ide", version, about = "Paired-comparison interactive evolution toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid with the simulated judge.
    Simulate(SimulateArgs),
    /// Classify one algorithm against the others at every generation.
    Stats(StatsArgs),
    /// Print the landscape value at a point.
    Oracle(OracleArgs),
    /// Serve live sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// The judge sees raw landscape values.
    Exact,
    /// The judge sees per-generation levels.
    Quantized,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON experiment configuration; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the convergence table and summary.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<Algorithm>>,
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long = "pop", value_delimiter = ',')]
    populations: Option<Vec<usize>>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    /// Master seed; every cell's seed derives from it.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    levels: Option<u32>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long)]
    parallelism: Option<usize>,
    /// Configuration override applied last, e.g. `de.weight=0.9`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Keep complete cells of an existing table and run only the rest.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct StatsArgs {
    /// Convergence table written by `simulate`.
    table: PathBuf,
    #[arg(long, default_value = "de")]
    focal: Algorithm,
    /// Defaults to every other algorithm in the table.
    #[arg(long, value_delimiter = ',')]
    opponents: Option<Vec<Algorithm>>,
    #[arg(long, default_value = "sign")]
    test: TestKind,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Defaults to significance.csv beside the table.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    dim: usize,
    /// JSON landscape to use instead of the standard one.
    #[arg(long)]
    landscape: Option<PathBuf>,
    #[arg(required = true, allow_negative_numbers = true, value_name = "X")]
    point: Vec<String>,
}

#[derive(Args)]
struct ServeArgs {
    /// 0 picks a free port.
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: IpAddr,
    #[arg(long, env = "IDE_DATA_DIR", default_value = "ide-sessions")]
    data_dir: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Config(String),
    Io(String),
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Config(m) | CliError::Io(m) | CliError::Internal(m) => {
                f.write_str(m)
            }
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(_)
            | CoreError::Shape(_)
            | CoreError::Range(_)
            | CoreError::UndefinedTest(_) => CliError::Config(e.to_string()),
            CoreError::Protocol(_) | CoreError::Suspended => CliError::Internal(e.to_string()),
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_error(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Stats(args) => stats(args),
        Command::Oracle(args) => oracle(args),
        Command::Serve(args) => serve(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Builds the configuration: defaults, then the file, then flags, then
/// `--set` overrides.
fn experiment_config(args: &SimulateArgs) -> Result<ExperimentConfig, CliError> {
    let base: ExperimentConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => ExperimentConfig::default(),
    };
    let mut doc = serde_json::to_value(&base).map_err(|e| CliError::Internal(e.to_string()))?;
    let mut set = |key: &str, value: Value| {
        doc[key] = value;
    };
    if let Some(a) = &args.algorithms {
        set("algorithms", serde_json::json!(a));
    }
    if let Some(d) = &args.dims {
        set("dims", serde_json::json!(d));
    }
    if let Some(p) = &args.populations {
        set("populations", serde_json::json!(p));
    }
    if let Some(r) = args.runs {
        set("runs", r.into());
    }
    if let Some(g) = args.generations {
        set("generations", g.into());
    }
    if let Some(s) = args.seed {
        set("master_seed", s.into());
    }
    if let Some(l) = args.levels {
        set("levels", l.into());
    }
    if let Some(m) = args.mode {
        set("interactive", matches!(m, Mode::Quantized).into());
    }
    for o in &args.overrides {
        overrides::apply(&mut doc, o, &["landscape"]).map_err(CliError::Config)?;
    }
    let config: ExperimentConfig =
        serde_json::from_value(doc).map_err(|e| CliError::Config(format!("configuration: {e}")))?;
    config.validate()?;
    Ok(config)
}

#[derive(Serialize, Deserialize)]
struct LandscapeMaximum {
    dim: usize,
    value: f64,
    point: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SummaryFile {
    config: ExperimentConfig,
    cells: usize,
    rows: usize,
    maxima: Vec<LandscapeMaximum>,
    groups: Vec<SummaryRow>,
}

/// Settings that must match for rows of an earlier run to be reused.
fn same_cell_semantics(a: &ExperimentConfig, b: &ExperimentConfig) -> bool {
    a.interactive == b.interactive
        && a.generations == b.generations
        && a.levels == b.levels
        && a.master_seed == b.master_seed
        && a.domain_lower == b.domain_lower
        && a.domain_upper == b.domain_upper
        && a.ga == b.ga
        && a.de == b.de
        && a.landscape == b.landscape
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let config = experiment_config(&args)?;
    let table_path = args.out.join(TABLE_FILE);
    let summary_path = args.out.join(SUMMARY_FILE);

    let mut done = ConvergenceTable::from_rows(Vec::new());
    if args.resume && table_path.exists() {
        if summary_path.exists() {
            let previous: SummaryFile = read_json(&summary_path)?;
            if !same_cell_semantics(&previous.config, &config) {
                return Err(CliError::Config(format!(
                    "{} was produced with different run settings; refusing to resume",
                    table_path.display()
                )));
            }
        }
        let file = std::fs::File::open(&table_path).map_err(io_error(&table_path))?;
        let partial = ConvergenceTable::read_csv(std::io::BufReader::new(file))?;
        let wanted: BTreeSet<CellKey> = config.cells().into_iter().collect();
        let complete = partial.complete_cells(config.generations);
        let rows = partial
            .rows()
            .iter()
            .filter(|r| r.interactive == config.interactive)
            .filter(|r| complete.contains(&r.key()) && wanted.contains(&r.key()))
            .cloned()
            .collect();
        done = ConvergenceTable::from_rows(rows);
    }

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.parallelism {
        if n == 0 {
            return Err(CliError::Usage("--parallelism must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Internal(e.to_string()))?;

    let finished = done.complete_cells(config.generations);
    let mut groups = Vec::new();
    for &algorithm in &config.algorithms {
        for &dim in &config.dims {
            for &population in &config.populations {
                let todo: Vec<CellKey> = (0..config.runs)
                    .map(|run| CellKey { algorithm, dim, population, run })
                    .filter(|k| !finished.contains(k))
                    .collect();
                groups.push((algorithm, dim, population, todo));
            }
        }
    }
    let total = groups.len();
    for (i, (algorithm, dim, population, todo)) in groups.into_iter().enumerate() {
        let label = algorithm.label(config.interactive);
        if todo.is_empty() {
            if !args.quiet {
                eprintln!("[{}/{total}] {label} {dim}-D pop {population}: already complete", i + 1);
            }
            continue;
        }
        let start = Instant::now();
        let fresh = pool.install(|| run_cells(&config, &todo))?;
        done = done.merge(&fresh);
        // checkpoint so an interrupted grid can be resumed
        output::write_atomic(&table_path, |w| done.write_csv(w)).map_err(io_error(&table_path))?;
        if !args.quiet {
            eprintln!(
                "[{}/{total}] {label} {dim}-D pop {population}: {} runs in {:.1}s",
                i + 1,
                todo.len(),
                start.elapsed().as_secs_f64()
            );
        }
    }
    done.check_complete()?;
    output::write_atomic(&table_path, |w| done.write_csv(w)).map_err(io_error(&table_path))?;

    let mut maxima = Vec::new();
    for &dim in &config.dims {
        let domain = SearchDomain::cube(dim, config.domain_lower, config.domain_upper)?;
        let m = global_maximum(&config.model(dim)?, &domain)?;
        maxima.push(LandscapeMaximum { dim, value: m.value, point: m.point });
    }
    let summary = SummaryFile {
        cells: config.cells().len(),
        rows: done.len(),
        maxima,
        groups: summarize(&done),
        config,
    };
    output::write_atomic(&summary_path, |w| {
        serde_json::to_writer_pretty(&mut *w, &summary).map_err(std::io::Error::other)?;
        writeln!(w)
    })
    .map_err(io_error(&summary_path))?;
    if !args.quiet {
        eprintln!("wrote {} and {}", table_path.display(), summary_path.display());
    }
    Ok(())
}

fn stats(args: StatsArgs) -> Result<(), CliError> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage("--alpha must be in (0, 1)".into()));
    }
    let file = std::fs::File::open(&args.table).map_err(io_error(&args.table))?;
    let table = ConvergenceTable::read_csv(std::io::BufReader::new(file))?;
    if table.is_empty() {
        return Err(CliError::Config(format!("{} has no rows", args.table.display())));
    }
    table.check_complete()?;
    let opponents: Vec<Algorithm> = match args.opponents {
        Some(o) => o,
        None => table.algorithms().into_iter().filter(|a| *a != args.focal).collect(),
    };
    let map = classify_focal(&table, args.focal, &opponents, args.test, args.alpha)?;

    let out = args.out.unwrap_or_else(|| {
        args.table.parent().unwrap_or(Path::new(".")).join(SIGNIFICANCE_FILE)
    });
    output::write_atomic(&out, |w| map.write_csv(w)).map_err(io_error(&out))?;

    let interactive = table.rows()[0].interactive;
    let names: Vec<&str> = opponents.iter().map(|a| a.label(interactive)).collect();
    let test = match args.test {
        TestKind::Sign => "sign test",
        TestKind::Wilcoxon => "Wilcoxon signed-rank test",
    };
    println!(
        "{} vs {} ({test}, alpha {}): B better than all, P poorer than at least one, \u{b7} neither",
        args.focal.label(interactive),
        names.join(", "),
        args.alpha
    );
    print!("{}", map.raster());
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<(), CliError> {
    let point = args
        .point
        .iter()
        .map(|s| match s.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(CliError::Usage(format!("{s:?} is not a finite number"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if point.len() != args.dim {
        return Err(CliError::Usage(format!(
            "--dim is {} but {} coordinates were given",
            args.dim,
            point.len()
        )));
    }
    let model: GaussianMixture = match &args.landscape {
        Some(path) => read_json(path)?,
        None => standard_model(args.dim).map_err(|e| CliError::Usage(e.to_string()))?,
    };
    if model.dim() != args.dim {
        return Err(CliError::Usage(format!(
            "landscape is {}-D but --dim is {}",
            model.dim(),
            args.dim
        )));
    }
    // Debug formatting is the shortest exact representation, switching to
    // exponent notation for very small or large values
    println!("{:?}", model.evaluate(&point)?);
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let store = ide_session::store::Store::open(&args.data_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.data_dir.display())))?;
    let (service, warnings) = ide_session::Service::open(store)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.data_dir.display())))?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(SocketAddr::new(args.bind, args.port))
            .await
            .map_err(|e| CliError::Io(format!("bind {}:{}: {e}", args.bind, args.port)))?;
        let addr = listener.local_addr().map_err(|e| CliError::Io(e.to_string()))?;
        println!("listening on http://{addr}");
        println!("port {}", addr.port());
        let _ = std::io::stdout().flush();
        eprintln!("sessions are stored in {}", args.data_dir.display());
        ide_session::server::serve(listener, Arc::new(service), async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Io(e.to_string()))
    })
}
