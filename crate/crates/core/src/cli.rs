//! Command-line front end. [`run`] is the whole program minus logger setup.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::geo::RssiDbm;
use crate::localization::{locate, MatcherConfig, Weighting, DEFAULT_K, DEFAULT_MISSING_DBM};
use crate::navgraph::{GraphConfig, NavGraph};
use crate::propagation::PropagationParams;
use crate::radiomap::{build_radio_map, ingest_scan_log, load_radio_map, read_scan_csv, write_scan_log, ApRegistry, DEFAULT_FLOOR_DBM};
use crate::service::{self, ServiceState, SnapshotSource};
use crate::simulator::{compare_methods, evaluate_localization, generate_training_set, random_test_points, train_scenario, Scenario};
use crate::wire::{self, RadioMapSummary, RouteResponse};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Parser)]
#[command(name = "waypoint", version, about = "Wi-Fi fingerprint positioning and indoor routing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a radio map from a scan-log CSV.
    Train(TrainArgs),
    /// Estimate a location from one live scan.
    Locate(LocateArgs),
    /// Shortest path between two graph nodes.
    Route(RouteArgs),
    /// Write the synthetic training scan log of a scenario.
    Simulate(SimulateArgs),
    /// Localization error of a radio map over random test points.
    Evaluate(EvaluateArgs),
    /// Fingerprinting against propagation-model multilateration.
    Compare(CompareArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightingArg {
    Uniform,
    InverseDistance,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Args)]
struct MatcherArgs {
    /// Neighbors blended into the estimate.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Readings below this are ignored.
    #[arg(long, default_value_t = DEFAULT_FLOOR_DBM, allow_negative_numbers = true)]
    floor_dbm: f64,
    /// Substitute for an access point heard on one side only.
    #[arg(long, default_value_t = DEFAULT_MISSING_DBM, allow_negative_numbers = true)]
    missing_dbm: f64,
    #[arg(long, value_enum, default_value_t = WeightingArg::InverseDistance)]
    weighting: WeightingArg,
}

impl MatcherArgs {
    fn config(&self) -> Result<MatcherConfig, CliError> {
        let dbm = |v: f64, flag: &str| RssiDbm::new(v).map_err(|e| CliError::Usage(format!("{flag}: {e}")));
        let config = MatcherConfig {
            k: self.k,
            floor_dbm: dbm(self.floor_dbm, "--floor-dbm")?,
            missing_dbm: dbm(self.missing_dbm, "--missing-dbm")?,
            weighting: match self.weighting {
                WeightingArg::Uniform => Weighting::Uniform,
                WeightingArg::InverseDistance => Weighting::InverseDistance,
            },
        };
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Scan-log CSV.
    #[arg(long)]
    scans: PathBuf,
    /// Radio-map JSON to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FLOOR_DBM, allow_negative_numbers = true)]
    floor_dbm: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct LocateArgs {
    #[arg(long)]
    map: PathBuf,
    /// Live-scan CSV with `bssid` and `rssi_dbm` columns.
    #[arg(long)]
    scans: PathBuf,
    #[command(flatten)]
    matcher: MatcherArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct RouteArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario JSON; the built-in default scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Scan-log CSV to write; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario's noise seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Radio map to evaluate; trained from the scenario when omitted.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Seed of test positions and test-scan noise.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[command(flatten)]
    matcher: MatcherArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    points: usize,
    /// Path loss coefficient assumed when inverting readings.
    #[arg(long, default_value_t = 2.0)]
    assumed_n: f64,
    #[command(flatten)]
    matcher: MatcherArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Enables simulated mode.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_BIND)]
    bind: String,
    #[command(flatten)]
    matcher: MatcherArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    fn domain(e: impl std::fmt::Display) -> Self {
        Self::Domain(e.to_string())
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Domain(format!("reading {}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Domain(format!("opening {}: {e}", path.display())))
}

fn load_scenario(path: Option<&Path>) -> Result<Scenario, CliError> {
    match path {
        Some(p) => Scenario::from_json(&read_text(p)?).map_err(|e| CliError::Domain(format!("{}: {e}", p.display()))),
        None => Ok(Scenario::default()),
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, format: Format, value: &T, text: impl FnOnce() -> String) -> Result<(), CliError> {
    let s = match format {
        Format::Json => wire::to_json(value),
        Format::Text => text(),
    };
    out.write_all(s.as_bytes()).map_err(CliError::domain)
}

fn train(args: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let floor = RssiDbm::new(args.floor_dbm).map_err(|e| CliError::Usage(format!("--floor-dbm: {e}")))?;
    let log = ingest_scan_log(open(&args.scans)?).map_err(|e| CliError::Domain(format!("{}: {e}", args.scans.display())))?;
    for r in &log.rejections {
        let _ = writeln!(err, "{}:{}: skipped row: {}", args.scans.display(), r.line, r.reason);
    }
    let registry = ApRegistry::by_ssid(log.training.readings());
    let built = build_radio_map(&log.training, &registry, floor).map_err(CliError::domain)?;
    for id in &built.excluded {
        let _ = writeln!(err, "location {id:?} excluded: no reading at or above the floor");
    }
    std::fs::write(&args.out, built.map.to_json() + "\n").map_err(|e| CliError::Domain(format!("writing {}: {e}", args.out.display())))?;
    let summary = RadioMapSummary::new(&built.map);
    emit(out, args.output.format, &summary, || {
        format!(
            "{} fingerprints, {} access points -> {}\n",
            summary.fingerprint_count,
            summary.access_points.len(),
            args.out.display()
        )
    })
}

fn locate_cmd(args: &LocateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let config = args.matcher.config()?;
    let map = load_radio_map(open(&args.map)?).map_err(|e| CliError::Domain(format!("{}: {e}", args.map.display())))?;
    let (scan, rejections) = read_scan_csv(open(&args.scans)?).map_err(|e| CliError::Domain(format!("{}: {e}", args.scans.display())))?;
    for r in &rejections {
        let _ = writeln!(err, "{}:{}: skipped row: {}", args.scans.display(), r.line, r.reason);
    }
    let est = locate(&map, &scan, &config).map_err(CliError::domain)?;
    emit(out, args.output.format, &est, || {
        let mut s = format!("{:.6} {:.6} floor {}\n", est.point.lat, est.point.lon, est.point.floor);
        for n in &est.neighbors {
            s.push_str(&format!("  {} {:.3} dB\n", n.location_id, n.signal_distance_db));
        }
        s
    })
}

fn route(args: &RouteArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let graph = NavGraph::from_json(&read_text(&args.graph)?, &GraphConfig::default())
        .map_err(|e| CliError::Domain(format!("{}: {e}", args.graph.display())))?;
    let r = graph.shortest_path(&args.from, &args.to).map_err(CliError::domain)?;
    emit(out, args.output.format, &RouteResponse::new(&graph, &r), || format!("{} {:.1}\n", r.nodes.join(" "), r.total_m))
}

#[derive(Serialize)]
struct SimulateSummary {
    locations: usize,
    scans: usize,
    readings: usize,
    seed: u64,
}

fn simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut s = load_scenario(args.scenario.as_deref())?;
    if let Some(seed) = args.seed {
        s.noise.seed = seed;
    }
    let training = generate_training_set(&s).map_err(CliError::domain)?;
    let Some(path) = &args.out else {
        return write_scan_log(&training, out).map_err(CliError::domain);
    };
    let file = File::create(path).map_err(|e| CliError::Domain(format!("creating {}: {e}", path.display())))?;
    write_scan_log(&training, std::io::BufWriter::new(file)).map_err(CliError::domain)?;
    let scans: usize = training.locations().iter().map(|l| l.scans.len()).sum();
    let summary = SimulateSummary {
        locations: training.locations().len(),
        scans,
        readings: training.readings().count(),
        seed: s.noise.seed,
    };
    emit(out, args.output.format, &summary, || {
        format!(
            "{} locations, {} scans, {} readings (seed {}) -> {}\n",
            summary.locations,
            summary.scans,
            summary.readings,
            summary.seed,
            path.display()
        )
    })
}

fn evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = args.matcher.config()?;
    let s = load_scenario(args.scenario.as_deref())?;
    let map = match &args.map {
        Some(p) => load_radio_map(open(p)?).map_err(|e| CliError::Domain(format!("{}: {e}", p.display())))?,
        None => train_scenario(&s, config.floor_dbm).map_err(CliError::domain)?.map,
    };
    let points = random_test_points(&s, args.points, args.seed);
    let report = evaluate_localization(&map, &s, &points, &config, args.seed).map_err(CliError::domain)?;
    emit(out, args.output.format, &report, || report.to_table())
}

fn compare(args: &CompareArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = args.matcher.config()?;
    let s = load_scenario(args.scenario.as_deref())?;
    let assumed = PropagationParams {
        n: args.assumed_n,
        ..s.transmitters.first().map(|t| t.params).unwrap_or_default()
    };
    assumed.validate().map_err(|e| CliError::Usage(format!("--assumed-n: {e}")))?;
    let points = random_test_points(&s, args.points, args.seed);
    let c = compare_methods(&s, &config, &assumed, &points, args.seed).map_err(CliError::domain)?;
    emit(out, args.output.format, &c, || c.to_table())
}

fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let source = SnapshotSource {
        map: args.map.clone(),
        graph: args.graph.clone(),
        scenario: args.scenario.clone(),
        matcher: args.matcher.config()?,
        graph_config: GraphConfig::default(),
    };
    let snapshot = source.load(0).map_err(CliError::domain)?;
    let state = Arc::new(ServiceState::new(snapshot));
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(CliError::domain)?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.bind)
            .await
            .map_err(|e| CliError::Domain(format!("binding {}: {e}", args.bind)))?;
        service::serve(listener, state, source).await.map_err(CliError::domain)
    })
}

/// Runs the program on `argv` (program name first). Returns the exit
/// status: 0 on success, 1 on domain errors, 2 on usage errors.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    2
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Train(a) => train(a, out, err),
        Command::Locate(a) => locate_cmd(a, out, err),
        Command::Route(a) => route(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Compare(a) => compare(a, out),
        Command::Serve(a) => serve(a),
    };
    let _ = out.flush();
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            2
        }
        Err(CliError::Domain(m)) => {
            let _ = writeln!(err, "error: {m}");
            1
        }
    }
}
