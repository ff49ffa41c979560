//! `countmech` command-line front end.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use countmech::constructors::Selector;
use countmech::counts::{distribution_of, histogram_of, CountDistribution, CountTable};
use countmech::metrics::{distribution_distance, ErrorKind};
use countmech::oracle::{enumerate_vertices, PolytopeDescriptor, PolytopeKind};
use countmech::pipeline::bench::{parse_range, run_bench, write_bench_csv, BenchConfig};
use countmech::pipeline::experiment::{run_experiment, write_experiment_csv, DEFAULT_REPLICATES};
use countmech::pipeline::synthetic::Synthetic;
use countmech::pipeline::{run_two_stage, split_budget, ConstructorKind, NumericMode, PipelineConfig, PrivatizerKind};
use countmech::scalar::{format_rational, parse_rational, Rational};
use countmech::{Error, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "countmech", version, about = "Differentially private count tables with fixed-point count mechanisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Privatize a count table and write the release plus a JSON report.
    Privatize(PrivatizeArgs),
    /// Distances between the count distributions of two tables.
    Analyze {
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        privatized: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Exact vertices of a small polytope.
    Enumerate {
        #[arg(long)]
        polytope: PolytopeKind,
        #[arg(long)]
        n: usize,
        /// `e^epsilon` as an exact rational, e.g. `2/1`.
        #[arg(long, value_parser = rational_arg)]
        lambda: Rational,
        /// `uniform`, a comma-separated list of rationals, or a file holding one.
        #[arg(long, default_value = "uniform")]
        fixed_point: String,
    },
    /// Time constructions over a range of `n`; writes `constructor,n,wall_ms`.
    Bench {
        #[arg(long, value_delimiter = ',', required = true)]
        constructors: Vec<ConstructorKind>,
        #[arg(long)]
        n_range: String,
        #[arg(long)]
        epsilon_total: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 10_000)]
        records: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the rule-of-thumb budget split.
    SplitBudget {
        #[arg(long)]
        epsilon_total: f64,
        #[arg(long)]
        split: Option<f64>,
    },
    /// Replicated comparison of constructors on one table; writes CSV.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct PrivatizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value = "heuristic")]
    constructor: ConstructorKind,
    /// Column selector for the heuristic; omitted means try all three.
    #[arg(long)]
    selector: Option<Selector>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Input table; mutually exclusive with `--dataset`.
    #[arg(long, conflicts_with = "dataset")]
    input: Option<PathBuf>,
    /// Synthetic preset, e.g. `binomial` or `zero-inflated`.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    constructors: Vec<ConstructorKind>,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    replicates: usize,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    epsilon_total: f64,
    /// Fraction of the budget spent on the distribution; defaults to the rule of thumb.
    #[arg(long)]
    split: Option<f64>,
    /// Number of count values; required unless a dataset preset supplies it.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value = "cyclic-laplace")]
    privatizer: PrivatizerKind,
    #[arg(long, default_value = "ead")]
    error: ErrorKind,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    floor_z: bool,
    /// Noise scale for the cyclic Gaussian privatizer.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value = "float", value_parser = numeric_mode_arg)]
    numeric_mode: NumericMode,
}

impl CommonArgs {
    fn config(&self, n: usize, constructor: ConstructorKind) -> PipelineConfig {
        PipelineConfig {
            split: self.split,
            privatizer: self.privatizer,
            error_kind: self.error,
            numeric_mode: self.numeric_mode,
            floor_z: self.floor_z,
            gaussian_sigma: self.sigma,
            ..PipelineConfig::new(self.epsilon_total, n, constructor, self.seed)
        }
    }

    fn n(&self) -> Result<usize> {
        self.n.ok_or_else(|| Error::InvalidInput("--n is required".into()))
    }
}

fn rational_arg(s: &str) -> Result<Rational> {
    parse_rational(s)
}

fn numeric_mode_arg(s: &str) -> Result<NumericMode> {
    match s {
        "float" => Ok(NumericMode::Float),
        "rational" => Ok(NumericMode::Rational),
        other => Err(Error::InvalidInput(format!("unknown numeric mode {other:?}"))),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
        Error::Capacity(_) => 3,
        Error::NotMember(_) | Error::Invariant(_) | Error::Infeasible | Error::Unbounded => 4,
    }
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn distribution(table: &CountTable, n: usize) -> Result<CountDistribution<f64>> {
    distribution_of(&histogram_of(table, n)?)
}

fn privatize(args: PrivatizeArgs) -> Result<()> {
    let constructor = match (args.selector, args.constructor) {
        (Some(s), ConstructorKind::HeuristicAuto | ConstructorKind::Heuristic(_)) => ConstructorKind::Heuristic(s),
        (Some(_), other) => {
            return Err(Error::InvalidInput(format!("--selector applies to the heuristic, not {}", other.name())))
        }
        (None, kind) => kind,
    };
    let n = args.common.n()?;
    let table = CountTable::read_csv_path(&args.input, n)?;
    let out = run_two_stage(&table, &args.common.config(n, constructor))?;
    out.table.write_csv_path(&args.output)?;
    let mut w = BufWriter::new(File::create(&args.report)?);
    serde_json::to_writer_pretty(&mut w, &out.report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn fixed_point(source: &str, n: usize) -> Result<Vec<Rational>> {
    if source == "uniform" {
        return Ok(vec![Rational::new(1.into(), (n as i64).into()); n]);
    }
    let text = if Path::new(source).is_file() { std::fs::read_to_string(source)? } else { source.to_string() };
    text.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).map(parse_rational).collect()
}

fn enumerate(kind: PolytopeKind, n: usize, lambda: Rational, source: &str) -> Result<()> {
    let z = fixed_point(source, n)?;
    let desc = PolytopeDescriptor { kind, n, lambda, z };
    let vertices = enumerate_vertices(&desc)?;
    let fmt = |v: &[Rational]| v.iter().map(format_rational).collect::<Vec<_>>();
    let doc = json!({
        "kind": kind.name(),
        "n": n,
        "lambda": format_rational(&desc.lambda),
        "z": fmt(&desc.z),
        "vertices": vertices.iter().map(|m| m.to_rows().iter().map(|r| fmt(r)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "count": vertices.len(),
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let (table, n) = match (&args.input, &args.dataset) {
        (Some(path), _) => {
            let n = args.common.n()?;
            (CountTable::read_csv_path(path, n)?, n)
        }
        (None, Some(name)) => {
            let data = Synthetic::preset(name)?;
            let n = args.common.n.unwrap_or(data.n());
            (data.generate(args.common.seed)?, n)
        }
        (None, None) => return Err(Error::InvalidInput("give --input or --dataset".into())),
    };
    let base = args.common.config(n, args.constructors[0]);
    let rows = run_experiment(&table, &args.constructors, &base, args.replicates)?;
    write_experiment_csv(&rows, writer(args.output.as_deref())?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Privatize(args) => privatize(args),
        Command::Analyze { original, privatized, n } => {
            let a = distribution(&CountTable::read_csv_path(&original, n)?, n)?;
            let b = distribution(&CountTable::read_csv_path(&privatized, n)?, n)?;
            let d = distribution_distance(a.probs(), b.probs())?;
            println!("{}", serde_json::to_string_pretty(&d)?);
            Ok(())
        }
        Command::Enumerate { polytope, n, lambda, fixed_point } => enumerate(polytope, n, lambda, &fixed_point),
        Command::Bench { constructors, n_range, epsilon_total, seed, repeats, records, output } => {
            let cfg = BenchConfig { constructors, n_values: parse_range(&n_range)?, epsilon_total, seed, records, repeats };
            let rows = run_bench(&cfg)?;
            write_bench_csv(&rows, writer(output.as_deref())?)
        }
        Command::SplitBudget { epsilon_total, split } => {
            let (f, e1, e2) = split_budget(epsilon_total, split)?;
            println!("f = {f}\nepsilon_1 = {e1}\nepsilon_2 = {e2}");
            Ok(())
        }
        Command::Experiment(args) => experiment(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("countmech: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
