use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ltcast_core::distributions::{DegreeCapPolicy, DegreeDistribution};
use ltcast_core::ext_real;
use ltcast_core::optimizer::{self, compare_schemes, linspace, sweep_region, Objective, DEFAULT_P1_GRID};
use ltcast_core::scenario::Scenario;
use ltcast_core::simulator::{monte_carlo, LatencyStats, SimulationOptions, DEFAULT_HISTOGRAM_BINS};
use ltcast_core::Error;

/// Degree-distribution design and simulation for LT-coded multicast.
#[derive(Parser)]
#[command(name = "ltcast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one of the design problems for a scenario.
    Optimize(OptimizeArgs),
    /// Compare one joint stream against per-cluster streams on two clusters.
    Compare(CompareArgs),
    /// Tabulate an objective over a grid of (z1, z2) demands.
    Sweep(SweepArgs),
    /// Monte Carlo latency of a distribution against a scenario.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    MinmaxLatency,
    MaxminUtilization,
    MaxminThroughput,
    MinAvgLatency,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::MinmaxLatency => Objective::MinmaxLatency,
            ObjectiveArg::MaxminUtilization => Objective::MaxminUtilization,
            ObjectiveArg::MaxminThroughput => Objective::MaxminThroughput,
            ObjectiveArg::MinAvgLatency => Objective::MinAvgLatency,
        }
    }
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum CapPolicyArg {
    #[default]
    Ceil,
    CeilMinusOne,
}

/// Flags shared by every command that loads a scenario for optimization.
#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario's grid size.
    #[arg(long)]
    grid: Option<usize>,
    /// Used when the scenario file sets no explicit degree cap.
    #[arg(long, value_enum, default_value_t)]
    degree_cap_policy: CapPolicyArg,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long, value_enum)]
    objective: ObjectiveArg,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Resolution of the p1 search for min-avg-latency.
    #[arg(long, default_value_t = DEFAULT_P1_GRID)]
    p1_grid: usize,
    /// Write the full result as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    objective: ObjectiveArg,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Demand range for cluster 1 as start:end:steps (inclusive).
    #[arg(long)]
    z1: String,
    /// Demand range for cluster 2 as start:end:steps (inclusive).
    #[arg(long)]
    z2: String,
    #[arg(long, default_value_t = DEFAULT_P1_GRID)]
    p1_grid: usize,
    /// Write the matrix here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Distribution JSON, or an `optimize --out` result.
    #[arg(long)]
    dist: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop a trial after this many emitted symbols (default 20k).
    #[arg(long)]
    emission_cap: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_HISTOGRAM_BINS)]
    bins: usize,
    /// Per-trial latencies as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Aggregate statistics as JSON.
    #[arg(long)]
    summary: Option<PathBuf>,
}

/// A failed command: message for stderr plus the process exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::UnsupportedScenario(_) => 3,
            Error::InfeasibleScenario(_) | Error::NumericalFailure(_) => 1,
            _ => 2,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::runtime(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::runtime(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Optimize(a) => cmd_optimize(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ltcast: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn load_scenario(args: &ScenarioArgs) -> Result<Scenario, Failure> {
    let text = read_input(&args.scenario)?;
    let mut s = Scenario::from_json(&text)
        .map_err(|e| Failure::usage(format!("{}: {e}", args.scenario.display())))?
        .with_cap_policy(match args.degree_cap_policy {
            CapPolicyArg::Ceil => DegreeCapPolicy::Ceil,
            CapPolicyArg::CeilMinusOne => DegreeCapPolicy::CeilMinusOne,
        });
    if let Some(g) = args.grid {
        s = s.with_grid(g)?;
    }
    Ok(s)
}

/// Accepts either a bare `{"probs": [...]}` document or any object carrying
/// one under `distribution`, such as the output of `optimize --out`.
fn load_distribution(path: &Path) -> Result<DegreeDistribution, Failure> {
    let text = read_input(path)?;
    let malformed = |e: serde_json::Error| Failure::usage(format!("{}: {e}", path.display()));
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(malformed)?;
    if let Some(inner) = value.get_mut("distribution") {
        value = inner.take();
    }
    serde_json::from_value(value).map_err(malformed)
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn cmd_optimize(a: OptimizeArgs) -> CmdResult {
    let s = load_scenario(&a.scenario)?;
    let result = optimizer::optimize(a.objective.into(), &s, a.p1_grid)?;

    if let Some(path) = &a.out {
        let json = serde_json::to_string_pretty(&result).map_err(|e| Failure::runtime(e.to_string()))?;
        fs::write(path, json + "\n")?;
    }

    let mut w = csv_writer(io::stdout().lock());
    w.write_record(["key", "value"])?;
    w.write_record(["objective", result.objective.name()])?;
    w.write_record(["objective_value", &ext_real::format(result.objective_value)])?;
    w.write_record(["headline", &ext_real::format(result.headline())])?;
    for (i, t) in result.per_cluster_latency.iter().enumerate() {
        w.write_record([format!("t_{}", i + 1), ext_real::format(*t)])?;
    }
    for (key, v) in &result.auxiliary {
        w.write_record([key.as_str(), &ext_real::format(*v)])?;
    }
    for (d, p) in result.distribution.probs().iter().enumerate() {
        if *p > 0.0 {
            w.write_record([format!("p_{}", d + 1), ext_real::format(*p)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> CmdResult {
    let s = load_scenario(&a.scenario)?;
    let rows = compare_schemes(&s)?;
    let mut w = csv_writer(io::stdout().lock());
    w.write_record(["scheme", "t_1", "t_2", "total"])?;
    for r in rows {
        let mut record = vec![r.scheme.to_string()];
        record.extend(r.latencies.iter().map(|&t| ext_real::format(t)));
        record.push(ext_real::format(r.total));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses `start:end:steps` with inclusive endpoints.
fn parse_range(text: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::usage(format!("malformed range {text:?}, expected start:end:steps"));
    let parts: Vec<&str> = text.split(':').collect();
    let [start, end, steps] = parts.as_slice() else {
        return Err(bad());
    };
    let start: f64 = start.trim().parse().map_err(|_| bad())?;
    let end: f64 = end.trim().parse().map_err(|_| bad())?;
    let steps: usize = steps.trim().parse().map_err(|_| bad())?;
    let in_range = |z: f64| (0.0..1.0).contains(&z);
    if steps == 0 || !in_range(start) || !in_range(end) || (steps == 1 && start != end) {
        return Err(bad());
    }
    Ok(linspace(start, end, steps))
}

fn cmd_sweep(a: SweepArgs) -> CmdResult {
    let z1 = parse_range(&a.z1)?;
    let z2 = parse_range(&a.z2)?;
    let s = load_scenario(&a.scenario)?;
    let m = sweep_region(a.objective.into(), &s, &z1, &z2, a.p1_grid)?;
    let failed = m.values.iter().flatten().filter(|v| v.is_nan()).count();
    if failed > 0 {
        eprintln!("ltcast: {failed} cell(s) could not be solved and are reported as nan");
    }

    let sink: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(io::BufWriter::new(fs::File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv_writer(sink);
    let mut header = vec!["z1\\z2".to_string()];
    header.extend(m.z2.iter().map(|&z| ext_real::format(z)));
    w.write_record(&header)?;
    for (z, row) in m.z1.iter().zip(&m.values) {
        let mut record = vec![ext_real::format(*z)];
        record.extend(row.iter().map(|&v| ext_real::format(v)));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let dist = load_distribution(&a.dist)?;
    let s = Scenario::from_json(&read_input(&a.scenario)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", a.scenario.display())))?;
    let options = SimulationOptions { emission_cap: a.emission_cap, histogram_bins: a.bins };
    let report = monte_carlo(&s, &dist, a.k, a.trials, a.seed, options)?;
    let clusters = s.clusters().len();
    let labels = || (1..=clusters).map(|i| format!("t_{i}")).chain(["t_0".to_string()]);

    if let Some(path) = &a.out {
        let mut w = csv_writer(io::BufWriter::new(fs::File::create(path)?));
        w.write_record(["trial".to_string()].into_iter().chain(labels()))?;
        for (trial, (row, t0)) in report.per_trial.iter().zip(report.t0_samples()).enumerate() {
            let mut record = vec![trial.to_string()];
            record.extend(row.iter().chain([&t0]).map(|&t| ext_real::format(t)));
            w.write_record(&record)?;
        }
        w.flush()?;
    }
    if let Some(path) = &a.summary {
        let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::runtime(e.to_string()))?;
        fs::write(path, json + "\n")?;
    }

    let stats: Vec<_> = report.clusters.iter().chain([&report.t0]).collect();
    let mut w = csv_writer(io::stdout().lock());
    w.write_record(["stat".to_string()].into_iter().chain(labels()))?;
    type Column = fn(&LatencyStats) -> String;
    let rows: [(&str, Column); 5] = [
        ("mean", |x| ext_real::format(x.mean)),
        ("std", |x| ext_real::format(x.std)),
        ("min", |x| ext_real::format(x.min)),
        ("max", |x| ext_real::format(x.max)),
        ("unmet", |x| x.unmet.to_string()),
    ];
    for (name, get) in rows {
        let mut record = vec![name.to_string()];
        record.extend(stats.iter().map(|x| get(x)));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
