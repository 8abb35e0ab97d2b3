use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use unifwatch::experiment::{write_csv, write_jsonl};
use unifwatch::io::{open_input, open_output, read_frequency_vectors, symbols, values};
use unifwatch::{run_experiment, ExperimentConfig, HarnessError, Result};
use unifwatch_core::full_tester::{derive_full_params_with, run_full_tester_with};
use unifwatch_core::interval_tester::{derive_interval_params, IntervalTester};
use unifwatch_core::oracle::{
    best_interval, estimate_opt_samples, exact_hellinger_poisson_vs_mixture,
    exact_tv_poisson_vs_mixture, threshold_set_structure,
};
use unifwatch_core::uniformity::{collision_count_baseline, test_uniformity, UniformityConstants};
use unifwatch_core::{
    Branch, FullTesterConstants, PoissonMixture, SampleBudgetReport, SeededRng, SubsetStrategy,
    Tracker, TrackerConfig, UniformityTestConfig,
};

#[derive(Parser)]
#[command(
    name = "unifwatch",
    version,
    about = "Uniformity testing and tracking for streams over [1, n]"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One uniformity test at sample budget m.
    Test(TestArgs),
    /// Anytime tracking of a symbol stream.
    Track(TrackArgs),
    /// Interval tester on sample values from a Poisson-like source.
    IntervalTest(IntervalArgs),
    /// Full tester on Poissonized frequency vectors, one per input line.
    FullTest(FullArgs),
    /// Brute-force distance and structure oracles.
    Oracle(OracleArgs),
    /// Seeded Monte Carlo experiment from a JSON config.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    CollisionCount,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: u64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Symbol stream (1-based); `-` or omitted for stdin.
    #[arg(long, alias = "stream")]
    samples: Option<PathBuf>,
    /// Run a baseline tester on m samples instead.
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the full tester's repeat count.
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Args)]
struct TrackArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long)]
    stream: Option<PathBuf>,
    /// Index of the last stage to run.
    #[arg(long)]
    max_stage: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Args)]
struct IntervalArgs {
    #[arg(long)]
    mu: f64,
    /// Squared Hellinger separation to detect.
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Nonnegative sample values; the first m are used.
    #[arg(long)]
    samples: Option<PathBuf>,
}

#[derive(Args)]
struct FullArgs {
    /// Expected vector length; checked against every input line.
    #[arg(long)]
    n: Option<usize>,
    /// Null rate of each split draw.
    #[arg(long)]
    mu: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long)]
    freq: Option<PathBuf>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Fresh random subset for every test instead of shared prefixes.
    #[arg(long)]
    literal_resampling: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Hellinger,
    Tv,
    BestInterval,
    ThresholdSet,
    OptProxy,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(value_enum)]
    kind: OracleKind,
    #[arg(long)]
    mu: f64,
    /// Mixture rates, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    mix: Vec<f64>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Largest endpoint for best-interval and threshold-set.
    #[arg(long, default_value_t = 60)]
    x_max: u64,
    /// Ratio threshold for threshold-set.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Records go here; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "jsonl")]
    format: Format,
    /// Summary JSON goes here; stderr if omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
}

/// Ends iteration at the first parse error and keeps it for the caller.
struct Trap<I> {
    inner: I,
    error: Option<HarnessError>,
}

impl<I: Iterator<Item = Result<T>>, T> Iterator for Trap<I> {
    type Item = T;

    fn next(&mut self) -> Option<T> {
        if self.error.is_some() {
            return None;
        }
        match self.inner.next()? {
            Ok(v) => Some(v),
            Err(e) => {
                self.error = Some(e);
                None
            }
        }
    }
}

fn trap<I>(inner: I) -> Trap<I> {
    Trap { inner, error: None }
}

fn constants(repeats: Option<usize>) -> UniformityConstants {
    UniformityConstants {
        full: FullTesterConstants {
            repeats_override: repeats,
            ..FullTesterConstants::default()
        },
        ..UniformityConstants::default()
    }
}

fn emit(value: serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, &value)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_test(a: TestArgs) -> Result<()> {
    let mut stream = trap(symbols(open_input(a.samples.as_deref())?));
    if let Some(Baseline::CollisionCount) = a.baseline {
        let result = collision_count_baseline(a.n, a.m, &mut stream);
        if let Some(e) = stream.error {
            return Err(e);
        }
        let report = SampleBudgetReport {
            samples_requested: a.m,
            samples_consumed: a.m,
            branch: Branch::Collision,
        };
        return emit(
            json!({ "verdict": result?, "report": report, "baseline": "collision_count" }),
        );
    }
    let config = UniformityTestConfig {
        constants: constants(a.repeats),
        ..UniformityTestConfig::new(a.n, a.m, a.delta)
    };
    let result = test_uniformity(config, &mut stream, &mut SeededRng::new(a.seed));
    if let Some(e) = stream.error {
        return Err(e);
    }
    let (verdict, report) = result?;
    emit(json!({ "verdict": verdict, "report": report }))
}

fn cmd_track(a: TrackArgs) -> Result<()> {
    let mut config = TrackerConfig {
        constants: constants(a.repeats),
        ..TrackerConfig::new(a.n, a.delta)
    };
    config.max_stage = a.max_stage;
    let mut tracker = Tracker::new(config, a.seed)?;
    let mut stream = trap(symbols(open_input(a.stream.as_deref())?));
    let mut reported = 0;
    for symbol in &mut stream {
        tracker.feed(symbol)?;
        for record in &tracker.history()[reported..] {
            emit(serde_json::to_value(record)?)?;
        }
        reported = tracker.history().len();
        if tracker.status() != unifwatch_core::TrackerStatus::Plausible {
            break;
        }
    }
    if let Some(e) = stream.error {
        return Err(e);
    }
    emit(json!({
        "summary": {
            "stages_run": tracker.history().len(),
            "samples_consumed": tracker.samples_consumed(),
            "status": tracker.status(),
            "failure_budget_spent": tracker.failure_budget_spent(),
        }
    }))
}

fn cmd_interval(a: IntervalArgs) -> Result<()> {
    let params = derive_interval_params(a.mu, a.eps, a.delta)?;
    let tester = IntervalTester::new(params)?;
    let mut stream = trap(values(open_input(a.samples.as_deref())?));
    let samples: Vec<u64> = (&mut stream).take(params.m).collect();
    if let Some(e) = stream.error {
        return Err(e);
    }
    if samples.len() < params.m {
        return Err(unifwatch_core::Error::StreamExhausted {
            needed: params.m as u64,
            got: samples.len() as u64,
        }
        .into());
    }
    let scan = tester.run(&samples)?;
    emit(json!({ "params": params, "verdict": scan.verdict, "evaluations": scan.evaluations }))
}

fn cmd_full(a: FullArgs) -> Result<()> {
    let c = FullTesterConstants {
        repeats_override: a.repeats,
        ..FullTesterConstants::default()
    };
    let strategy = if a.literal_resampling {
        SubsetStrategy::LiteralResampling
    } else {
        SubsetStrategy::SharedPrefix
    };
    let vectors = read_frequency_vectors(open_input(a.freq.as_deref())?)?;
    let master = SeededRng::new(a.seed);
    for (i, freq) in vectors.iter().enumerate() {
        if let Some(n) = a.n {
            if freq.len() != n {
                return Err(HarnessError::Input {
                    line: i + 1,
                    reason: format!("expected {n} counts, found {}", freq.len()),
                });
            }
        }
        let params = derive_full_params_with(freq.len(), a.mu, a.delta, &c)?;
        let scan = run_full_tester_with(&params, freq, &mut master.child(i as u64), strategy)?;
        emit(
            json!({ "line": i + 1, "params": params, "verdict": scan.verdict, "evaluations": scan.evaluations }),
        )?;
    }
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    let mix = PoissonMixture::new(a.mix)?;
    let out = match a.kind {
        OracleKind::Hellinger => {
            serde_json::to_value(exact_hellinger_poisson_vs_mixture(a.mu, &mix, a.tol)?)?
        }
        OracleKind::Tv => serde_json::to_value(exact_tv_poisson_vs_mixture(a.mu, &mix, a.tol)?)?,
        OracleKind::BestInterval => serde_json::to_value(best_interval(a.mu, &mix, a.x_max)?)?,
        OracleKind::ThresholdSet => {
            serde_json::to_value(threshold_set_structure(a.mu, &mix, a.r, a.x_max)?)?
        }
        OracleKind::OptProxy => json!({ "opt_proxy": estimate_opt_samples(a.mu, &mix)? }),
    };
    emit(out)
}

fn read_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_json(&std::fs::read_to_string(path)?)
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let mut config = read_config(&a.config)?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(trials) = a.trials {
        config.trials = trials;
    }
    let (records, summary) = run_experiment(&config)?;
    let out = open_output(a.out.as_deref())?;
    match a.format {
        Format::Jsonl => write_jsonl(out, &records)?,
        Format::Csv => write_csv(out, &records)?,
    }
    let text = serde_json::to_string_pretty(&json!({ "config": config, "summary": summary }))?;
    match a.summary {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => eprintln!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Track(a) => cmd_track(a),
        Command::IntervalTest(a) => cmd_interval(a),
        Command::FullTest(a) => cmd_full(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("unifwatch: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
